//! Clamped-free Euler-Bernoulli beam elements.
//!
//! Every node carries three degrees of freedom: axial displacement `u`,
//! transverse displacement `v` (positive towards the counter-electrode) and
//! rotation `theta`. Node 0 is clamped. The small-displacement solver uses the
//! classical cubic Hermite element; the large-displacement solver attaches a
//! rotating frame to each element (corotational formulation) and keeps the
//! same Hermite element in that frame.
//!
//! Distributed loads act per unit reference length and stay parallel to the
//! undeformed transverse axis.

use crate::banded::SymmetricBand;
use crate::error::{Error, Result};
use crate::specimen::Specimen;

pub const MIN_ELEMENTS: usize = 4;
pub const DEFAULT_ELEMENTS: usize = 40;

const DOFS_PER_NODE: usize = 3;
// Six element DOFs couple at most five rows apart.
const BANDWIDTH: usize = 5;

pub(crate) const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Cubic Hermite shape functions on an element of length `h`, local coordinate `xi` in [0, 1].
#[inline]
pub(crate) fn hermite(xi: f64, h: f64) -> [f64; 4] {
    let xi2 = xi * xi;
    let xi3 = xi2 * xi;
    [
        1.0 - 3.0 * xi2 + 2.0 * xi3,
        h * (xi - 2.0 * xi2 + xi3),
        3.0 * xi2 - 2.0 * xi3,
        h * (xi3 - xi2),
    ]
}

#[inline]
fn hermite_slope(xi: f64, h: f64) -> [f64; 4] {
    let xi2 = xi * xi;
    [
        (-6.0 * xi + 6.0 * xi2) / h,
        1.0 - 4.0 * xi + 3.0 * xi2,
        (6.0 * xi - 6.0 * xi2) / h,
        3.0 * xi2 - 2.0 * xi,
    ]
}

/// Uniformly discretized cantilever.
#[derive(Debug, Clone)]
pub struct BeamMesh {
    specimen: Specimen,
    nodes: Vec<f64>,
    bending_rigidity: f64,
    axial_rigidity: f64,
}

pub fn build_mesh(spec: &Specimen, n_elements: usize) -> Result<BeamMesh> {
    if n_elements < MIN_ELEMENTS {
        return Err(Error::MeshTooCoarse {
            requested: n_elements,
            min: MIN_ELEMENTS,
        });
    }
    let l = spec.length();
    let mut nodes: Vec<f64> = (0..=n_elements)
        .map(|i| l * i as f64 / n_elements as f64)
        .collect();
    nodes[n_elements] = l;
    Ok(BeamMesh {
        specimen: spec.clone(),
        nodes,
        bending_rigidity: spec.bending_rigidity(),
        axial_rigidity: spec.material().young_modulus() * spec.cross_section(),
    })
}

impl BeamMesh {
    pub fn specimen(&self) -> &Specimen {
        &self.specimen
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_positions(&self) -> &[f64] {
        &self.nodes
    }

    /// `E w t^3 / 12` in N m^2.
    pub fn bending_rigidity(&self) -> f64 {
        self.bending_rigidity
    }

    pub fn axial_rigidity(&self) -> f64 {
        self.axial_rigidity
    }

    pub fn length(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    fn element_length(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    fn n_dofs(&self) -> usize {
        DOFS_PER_NODE * self.nodes.len()
    }

    fn n_free(&self) -> usize {
        self.n_dofs() - DOFS_PER_NODE
    }
}

fn locate(nodes: &[f64], x: f64) -> (usize, f64) {
    let n_el = nodes.len() - 1;
    let e = match nodes.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => i.min(n_el - 1),
        Err(0) => 0,
        Err(i) => (i - 1).min(n_el - 1),
    };
    let h = nodes[e + 1] - nodes[e];
    (e, (x - nodes[e]) / h)
}

/// Nodal solution of a beam problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionField {
    positions: Vec<f64>,
    axial: Vec<f64>,
    transverse: Vec<f64>,
    rotation: Vec<f64>,
}

impl DeflectionField {
    pub fn zero(mesh: &BeamMesh) -> Self {
        let n = mesh.n_nodes();
        Self {
            positions: mesh.nodes.clone(),
            axial: vec![0.0; n],
            transverse: vec![0.0; n],
            rotation: vec![0.0; n],
        }
    }

    fn from_dofs(mesh: &BeamMesh, dofs: &[f64]) -> Self {
        let n = mesh.n_nodes();
        let mut field = Self::zero(mesh);
        for i in 1..n {
            field.axial[i] = dofs[3 * i];
            field.transverse[i] = dofs[3 * i + 1];
            field.rotation[i] = dofs[3 * i + 2];
        }
        field
    }

    fn to_dofs(&self) -> Vec<f64> {
        let mut dofs = vec![0.0; DOFS_PER_NODE * self.positions.len()];
        for i in 0..self.positions.len() {
            dofs[3 * i] = self.axial[i];
            dofs[3 * i + 1] = self.transverse[i];
            dofs[3 * i + 2] = self.rotation[i];
        }
        dofs
    }

    /// `true` when the field lives on the nodes of `mesh`.
    pub fn matches(&self, mesh: &BeamMesh) -> bool {
        self.positions == mesh.nodes
    }

    pub fn node_positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn transverse(&self) -> &[f64] {
        &self.transverse
    }

    pub fn rotation(&self) -> &[f64] {
        &self.rotation
    }

    pub fn axial(&self) -> &[f64] {
        &self.axial
    }

    pub fn length(&self) -> f64 {
        self.positions[self.positions.len() - 1]
    }

    /// Transverse displacement at reference coordinate `x`, Hermite-interpolated.
    pub fn deflection_at(&self, x: f64) -> f64 {
        let (e, xi) = locate(&self.positions, x);
        let h = self.positions[e + 1] - self.positions[e];
        let n = hermite(xi, h);
        n[0] * self.transverse[e]
            + n[1] * self.rotation[e]
            + n[2] * self.transverse[e + 1]
            + n[3] * self.rotation[e + 1]
    }

    pub fn slope_at(&self, x: f64) -> f64 {
        let (e, xi) = locate(&self.positions, x);
        let h = self.positions[e + 1] - self.positions[e];
        let n = hermite_slope(xi, h);
        n[0] * self.transverse[e]
            + n[1] * self.rotation[e]
            + n[2] * self.transverse[e + 1]
            + n[3] * self.rotation[e + 1]
    }

    pub fn tip_displacement(&self) -> f64 {
        self.transverse[self.transverse.len() - 1]
    }

    pub fn tip_rotation(&self) -> f64 {
        self.rotation[self.rotation.len() - 1]
    }

    /// Largest transverse displacement over nodes and element interiors.
    pub fn max_deflection(&self) -> f64 {
        let mut m = self.transverse.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for e in 0..self.positions.len() - 1 {
            for k in 1..4 {
                let x = self.positions[e] + (self.positions[e + 1] - self.positions[e]) * k as f64 / 4.0;
                m = m.max(self.deflection_at(x));
            }
        }
        m
    }

    /// Largest element chord strain `|L - L0| / L0`.
    pub fn max_axial_strain(&self) -> f64 {
        (0..self.positions.len() - 1)
            .map(|e| {
                let l0 = self.positions[e + 1] - self.positions[e];
                let du = self.axial[e + 1] - self.axial[e];
                let dv = self.transverse[e + 1] - self.transverse[e];
                let ln = ((l0 + du).powi(2) + dv * dv).sqrt();
                ((2.0 * l0 * du + du * du + dv * dv) / (ln + l0) / l0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Field with every nodal value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            positions: self.positions.clone(),
            axial: self.axial.iter().map(|v| v * factor).collect(),
            transverse: self.transverse.iter().map(|v| v * factor).collect(),
            rotation: self.rotation.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self + omega (target - self)`, DOF by DOF. Both fields must share a mesh.
    pub fn relaxed_towards(&self, target: &Self, omega: f64) -> Self {
        assert_eq!(self.positions, target.positions, "fields live on different meshes");
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + omega * (y - x)).collect();
        Self {
            positions: self.positions.clone(),
            axial: mix(&self.axial, &target.axial),
            transverse: mix(&self.transverse, &target.transverse),
            rotation: mix(&self.rotation, &target.rotation),
        }
    }
}

pub fn tip_displacement(field: &DeflectionField) -> f64 {
    field.tip_displacement()
}

/// Transverse load per unit length `q(x)` (N/m), `x` in reference coordinates.
pub trait DistributedLoad {
    fn intensity(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> DistributedLoad for F {
    fn intensity(&self, x: f64) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformLoad(pub f64);

impl DistributedLoad for UniformLoad {
    fn intensity(&self, _x: f64) -> f64 {
        self.0
    }
}

/// Consistent nodal forces of a distributed load (3-point Gauss per element).
fn add_distributed(mesh: &BeamMesh, load: &dyn DistributedLoad, force: &mut [f64]) {
    for e in 0..mesh.n_elements() {
        let (xa, h) = (mesh.nodes[e], mesh.element_length(e));
        for &(xi, w) in &GAUSS3 {
            let q = load.intensity(xa + h * xi) * w * h;
            let n = hermite(xi, h);
            force[3 * e + 1] += q * n[0];
            force[3 * e + 2] += q * n[1];
            force[3 * e + 4] += q * n[2];
            force[3 * e + 5] += q * n[3];
        }
    }
}

/// Loads applied to the beam during a static solve.
///
/// `assemble` adds the nodal force vector (full DOF layout, clamped node
/// included) for the current state. When `tangent` is present the load adds
/// `-dF/dU` on the free DOFs, i.e. its contribution to the system tangent.
pub trait ExternalLoad {
    fn assemble(
        &self,
        mesh: &BeamMesh,
        state: &DeflectionField,
        force: &mut [f64],
        tangent: Option<&mut SymmetricBand>,
    ) -> Result<()>;
}

/// Dead loading: a distributed load plus point force and moment at the tip.
#[derive(Clone, Copy, Default)]
pub struct BeamLoading<'a> {
    pub distributed: Option<&'a dyn DistributedLoad>,
    pub tip_force: f64,
    pub tip_moment: f64,
}

impl<'a> BeamLoading<'a> {
    pub fn distributed(load: &'a dyn DistributedLoad) -> Self {
        Self {
            distributed: Some(load),
            ..Self::default()
        }
    }

    pub fn tip_moment(moment: f64) -> Self {
        Self {
            tip_moment: moment,
            ..Self::default()
        }
    }
}

impl ExternalLoad for BeamLoading<'_> {
    fn assemble(
        &self,
        mesh: &BeamMesh,
        _state: &DeflectionField,
        force: &mut [f64],
        _tangent: Option<&mut SymmetricBand>,
    ) -> Result<()> {
        if let Some(load) = self.distributed {
            add_distributed(mesh, load, force);
        }
        let tip = mesh.n_dofs() - DOFS_PER_NODE;
        force[tip + 1] += self.tip_force;
        force[tip + 2] += self.tip_moment;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kinematics {
    /// Small displacement, small rotation.
    Linear,
    /// Large rotation through element frames; strains stay small.
    Corotational,
}

fn linear_element_stiffness(ea: f64, ei: f64, h: f64) -> [[f64; 6]; 6] {
    let a = ea / h;
    let b = ei / h.powi(3);
    let mut k = [[0.0; 6]; 6];
    k[0][0] = a;
    k[0][3] = -a;
    k[3][0] = -a;
    k[3][3] = a;
    let bend = [
        [12.0, 6.0 * h, -12.0, 6.0 * h],
        [6.0 * h, 4.0 * h * h, -6.0 * h, 2.0 * h * h],
        [-12.0, -6.0 * h, 12.0, -6.0 * h],
        [6.0 * h, 2.0 * h * h, -6.0 * h, 4.0 * h * h],
    ];
    let map = [1, 2, 4, 5];
    for (r, row) in bend.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            k[map[r]][map[c]] = b * v;
        }
    }
    k
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    a - two_pi * (a / two_pi).round()
}

/// Corotational internal force and tangent of one element.
fn corotational_element(ea: f64, ei: f64, l0: f64, d: &[f64; 6]) -> ([f64; 6], [[f64; 6]; 6]) {
    let du = d[3] - d[0];
    let dv = d[4] - d[1];
    let dx = l0 + du;
    let ln = (dx * dx + dv * dv).sqrt();
    let (c, s) = (dx / ln, dv / ln);
    let mean = 0.5 * (d[2] + d[5]);
    let alpha = mean + wrap_angle(dv.atan2(dx) - mean);
    let stretch = (2.0 * l0 * du + du * du + dv * dv) / (ln + l0);
    let th1 = d[2] - alpha;
    let th2 = d[5] - alpha;
    let n = ea / l0 * stretch;
    let m1 = ei / l0 * (4.0 * th1 + 2.0 * th2);
    let m2 = ei / l0 * (2.0 * th1 + 4.0 * th2);

    let r = [-c, -s, 0.0, c, s, 0.0];
    let z = [s, -c, 0.0, -s, c, 0.0];
    let mut b = [[0.0; 6]; 3];
    b[0] = r;
    for k in 0..6 {
        b[1][k] = -z[k] / ln;
        b[2][k] = -z[k] / ln;
    }
    b[1][2] += 1.0;
    b[2][5] += 1.0;

    let kl = [
        [ea / l0, 0.0, 0.0],
        [0.0, 4.0 * ei / l0, 2.0 * ei / l0],
        [0.0, 2.0 * ei / l0, 4.0 * ei / l0],
    ];
    let sigma = [n, m1, m2];
    let mut f = [0.0; 6];
    let mut k = [[0.0; 6]; 6];
    for i in 0..6 {
        for a in 0..3 {
            f[i] += b[a][i] * sigma[a];
        }
    }
    let msum = (m1 + m2) / (ln * ln);
    for i in 0..6 {
        for j in 0..6 {
            let mut v = 0.0;
            for a in 0..3 {
                for bb in 0..3 {
                    v += b[a][i] * kl[a][bb] * b[bb][j];
                }
            }
            v += n / ln * z[i] * z[j];
            v += msum * (r[i] * z[j] + z[i] * r[j]);
            k[i][j] = v;
        }
    }
    (f, k)
}

/// Internal force (full DOF layout) and, optionally, the tangent on free DOFs.
fn internal_force(
    mesh: &BeamMesh,
    kinematics: Kinematics,
    dofs: &[f64],
    force: &mut [f64],
    mut tangent: Option<&mut SymmetricBand>,
) {
    let (ea, ei) = (mesh.axial_rigidity, mesh.bending_rigidity);
    for e in 0..mesh.n_elements() {
        let h = mesh.element_length(e);
        let base = DOFS_PER_NODE * e;
        let mut d = [0.0; 6];
        d.copy_from_slice(&dofs[base..base + 6]);
        let (fe, ke) = match kinematics {
            Kinematics::Linear => {
                let ke = linear_element_stiffness(ea, ei, h);
                let mut fe = [0.0; 6];
                for i in 0..6 {
                    fe[i] = (0..6).map(|j| ke[i][j] * d[j]).sum();
                }
                (fe, ke)
            }
            Kinematics::Corotational => corotational_element(ea, ei, h, &d),
        };
        for i in 0..6 {
            force[base + i] += fe[i];
        }
        if let Some(t) = tangent.as_deref_mut() {
            for i in 0..6 {
                let gi = base + i;
                if gi < DOFS_PER_NODE {
                    continue;
                }
                for j in 0..=i {
                    let gj = base + j;
                    if gj < DOFS_PER_NODE {
                        continue;
                    }
                    t.add(gi - DOFS_PER_NODE, gj - DOFS_PER_NODE, ke[i][j]);
                }
            }
        }
    }
}

/// Solves the small-displacement problem `K U = F` by a banded direct solve.
pub fn solve_linear(mesh: &BeamMesh, load: &dyn DistributedLoad) -> Result<DeflectionField> {
    let mut k = SymmetricBand::zeros(mesh.n_free(), BANDWIDTH);
    let zero = vec![0.0; mesh.n_dofs()];
    let mut scratch = vec![0.0; mesh.n_dofs()];
    internal_force(mesh, Kinematics::Linear, &zero, &mut scratch, Some(&mut k));
    let mut f = vec![0.0; mesh.n_dofs()];
    add_distributed(mesh, load, &mut f);
    let mut rhs = f[DOFS_PER_NODE..].to_vec();
    k.factor()?.solve_in_place(&mut rhs);
    let mut dofs = vec![0.0; mesh.n_dofs()];
    dofs[DOFS_PER_NODE..].copy_from_slice(&rhs);
    Ok(DeflectionField::from_dofs(mesh, &dofs))
}

/// Controls of the Newton-Raphson solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Convergence when `|R| < residual_tol * |F|` (moments scaled by element length).
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Number of load-increment halvings before giving up.
    pub max_step_cuts: usize,
    /// Reject converged states whose tangent is indefinite, so that the
    /// solution stays on the stable branch.
    pub require_stable: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_iterations: 30,
            max_step_cuts: 12,
            require_stable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NewtonReport {
    /// Newton iterations over all load increments.
    pub iterations: usize,
    /// Accepted load increments.
    pub load_steps: usize,
    /// Relative residual norms of the final increment, one per iteration.
    pub residual_history: Vec<f64>,
    /// Tangent at the solution has no negative eigenvalue.
    pub stable: bool,
}

const STALL_RESIDUAL: f64 = 1e-6;
const STALL_CORRECTION: f64 = 1e-12;

fn scaled_norm(mesh: &BeamMesh, v: &[f64], offset: usize) -> f64 {
    let h = mesh.length() / mesh.n_elements() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| if (i + offset) % 3 == 2 { (x / h).powi(2) } else { x * x })
        .sum::<f64>()
        .sqrt()
}

struct StepOutcome {
    dofs: Vec<f64>,
    iterations: usize,
    history: Vec<f64>,
    stable: bool,
}

fn newton_increment(
    mesh: &BeamMesh,
    kinematics: Kinematics,
    load: &dyn ExternalLoad,
    factor: f64,
    start: &[f64],
    settings: &NewtonSettings,
) -> Result<StepOutcome> {
    let n = mesh.n_dofs();
    let mut dofs = start.to_vec();
    let mut history = Vec::new();
    let mut first = None;
    for it in 0..=settings.max_iterations {
        let state = DeflectionField::from_dofs(mesh, &dofs);
        let mut fint = vec![0.0; n];
        let mut fext = vec![0.0; n];
        let mut tangent = SymmetricBand::zeros(mesh.n_free(), BANDWIDTH);
        let mut load_tangent = SymmetricBand::zeros(mesh.n_free(), BANDWIDTH);
        internal_force(mesh, kinematics, &dofs, &mut fint, Some(&mut tangent));
        load.assemble(mesh, &state, &mut fext, Some(&mut load_tangent))?;
        let residual: Vec<f64> = (DOFS_PER_NODE..n)
            .map(|i| factor * fext[i] - fint[i])
            .collect();
        let reference = scaled_norm(mesh, &fext[DOFS_PER_NODE..], 0) * factor;
        let rnorm = scaled_norm(mesh, &residual, 0);
        let rel = if reference > 0.0 { rnorm / reference } else { rnorm };
        history.push(rel);
        log::trace!("newton iteration {it}: relative residual {rel:.3e}");
        let first_rel = *first.get_or_insert(rel);
        if !rel.is_finite() || rel > 1e8 * first_rel.max(1.0) {
            break;
        }
        for i in 0..mesh.n_free() {
            for j in i.saturating_sub(BANDWIDTH)..=i {
                let v = load_tangent.get(i, j);
                if v != 0.0 {
                    tangent.add(i, j, factor * v);
                }
            }
        }
        if rel < settings.residual_tol || (reference == 0.0 && rnorm == 0.0) {
            let stable = tangent.factor().map(|f| f.is_positive_definite()).unwrap_or(false);
            return Ok(StepOutcome {
                dofs,
                iterations: it,
                history,
                stable,
            });
        }
        if it == settings.max_iterations {
            break;
        }
        let lu = tangent.factor()?;
        let mut step = residual;
        lu.solve_in_place(&mut step);
        for (d, s) in dofs[DOFS_PER_NODE..].iter_mut().zip(&step) {
            *d += s;
        }
        // Rounding in the rotated frames puts a floor under the attainable residual
        // when the load is small; a negligible correction then ends the iteration.
        let size = scaled_norm(mesh, &dofs[DOFS_PER_NODE..], 0);
        if rel < STALL_RESIDUAL && scaled_norm(mesh, &step, 0) <= STALL_CORRECTION * size {
            return Ok(StepOutcome {
                dofs,
                iterations: it + 1,
                history,
                stable: lu.is_positive_definite(),
            });
        }
        if dofs.iter().any(|d| !d.is_finite()) {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(f64::NAN),
        load_factor: factor,
    })
}

/// Full Newton-Raphson static solve with automatic load incrementation.
///
/// Tries the whole load in one increment (from `initial` when given); when
/// that fails the load factor is stepped from zero, halving the increment on
/// every failure. With `require_stable`, states with an indefinite tangent
/// count as failures, so the result lies on the stable branch.
pub fn solve_static(
    mesh: &BeamMesh,
    kinematics: Kinematics,
    load: &dyn ExternalLoad,
    initial: Option<&DeflectionField>,
    settings: &NewtonSettings,
) -> Result<(DeflectionField, NewtonReport)> {
    let zero = vec![0.0; mesh.n_dofs()];
    let start = match initial {
        Some(field) if field.matches(mesh) => field.to_dofs(),
        Some(_) => {
            return Err(Error::InvalidConfig(
                "initial deflection field does not match the beam mesh".into(),
            ))
        }
        None => zero.clone(),
    };
    let mut total_iterations = 0;
    match newton_increment(mesh, kinematics, load, 1.0, &start, settings) {
        Ok(out) if out.stable || !settings.require_stable => {
            return Ok((
                DeflectionField::from_dofs(mesh, &out.dofs),
                NewtonReport {
                    iterations: out.iterations,
                    load_steps: 1,
                    residual_history: out.history,
                    stable: out.stable,
                },
            ))
        }
        Ok(out) => total_iterations += out.iterations,
        Err(Error::NonConvergence { iterations, .. }) => total_iterations += iterations,
        Err(Error::GapClosure { .. }) | Err(Error::Singular { .. }) => {}
        Err(e) => return Err(e),
    }

    let mut dofs = zero;
    let mut lambda: f64 = 0.0;
    let mut increment = 0.5;
    let mut cuts = 0;
    let mut steps = 0;
    let mut last_error;
    loop {
        let target = (lambda + increment).min(1.0);
        let outcome = newton_increment(mesh, kinematics, load, target, &dofs, settings).and_then(|out| {
            if out.stable || !settings.require_stable {
                Ok(out)
            } else {
                Err(Error::NonConvergence {
                    iterations: out.iterations,
                    residual: 0.0,
                    load_factor: target,
                })
            }
        });
        match outcome {
            Ok(out) => {
                total_iterations += out.iterations;
                steps += 1;
                dofs = out.dofs;
                lambda = target;
                if lambda >= 1.0 {
                    return Ok((
                        DeflectionField::from_dofs(mesh, &dofs),
                        NewtonReport {
                            iterations: total_iterations,
                            load_steps: steps,
                            residual_history: out.history,
                            stable: out.stable,
                        },
                    ));
                }
                if out.iterations <= settings.max_iterations / 4 {
                    increment *= 2.0;
                }
            }
            Err(err @ (Error::NonConvergence { .. } | Error::GapClosure { .. } | Error::Singular { .. })) => {
                if let Error::NonConvergence { iterations, .. } = err {
                    total_iterations += iterations;
                }
                last_error = Some(err);
                cuts += 1;
                increment *= 0.5;
                if cuts > settings.max_step_cuts {
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    match last_error {
        Some(Error::GapClosure { x, deflection, gap }) => Err(Error::GapClosure { x, deflection, gap }),
        _ => Err(Error::NonConvergence {
            iterations: total_iterations,
            residual: f64::NAN,
            load_factor: lambda,
        }),
    }
}

/// Large-displacement solve under a dead distributed load.
pub fn solve_nonlinear(mesh: &BeamMesh, load: &dyn DistributedLoad) -> Result<DeflectionField> {
    solve_static(
        mesh,
        Kinematics::Corotational,
        &BeamLoading::distributed(load),
        None,
        &NewtonSettings::default(),
    )
    .map(|(field, _)| field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specimen::{builtin_specimen, DimensionSource};

    fn st1_1() -> Specimen {
        builtin_specimen("ST1-1", DimensionSource::Measured).unwrap()
    }

    fn cantilever_tip(q: f64, l: f64, ei: f64) -> f64 {
        q * l.powi(4) / (8.0 * ei)
    }

    #[test]
    fn mesh_construction() {
        let mesh = build_mesh(&st1_1(), 20).unwrap();
        assert_eq!(mesh.n_nodes(), 21);
        assert_eq!(*mesh.node_positions().last().unwrap(), st1_1().length());
        let ei = 166e9 * 15e-6 * (1.8e-6f64).powi(3) / 12.0;
        assert!((mesh.bending_rigidity() - ei).abs() / ei < 1e-12);
        assert!((mesh.bending_rigidity() - 1.210e-12).abs() < 0.001e-12);
        assert!(mesh.node_positions().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn too_few_elements() {
        assert!(matches!(
            build_mesh(&st1_1(), 3),
            Err(Error::MeshTooCoarse { requested: 3, min: 4 })
        ));
    }

    #[test]
    fn uniform_load_tip_and_midspan() {
        let mesh = build_mesh(&st1_1(), 20).unwrap();
        let q = 1e-2;
        let field = solve_linear(&mesh, &UniformLoad(q)).unwrap();
        let (l, ei) = (mesh.length(), mesh.bending_rigidity());
        let tip = cantilever_tip(q, l, ei);
        assert!((tip_displacement(&field) - tip).abs() / tip < 1e-3);
        let mid = q * l.powi(4) * 17.0 / 384.0 / ei;
        assert!((field.deflection_at(l / 2.0) - mid).abs() / mid < 1e-3);
        // closed-form curve at an element interior point
        let x = 0.3137 * l;
        let exact = q * x * x * (6.0 * l * l - 4.0 * l * x + x * x) / (24.0 * ei);
        assert!((field.deflection_at(x) - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn zero_load_gives_zero_field() {
        let mesh = build_mesh(&st1_1(), 8).unwrap();
        assert_eq!(solve_linear(&mesh, &UniformLoad(0.0)).unwrap(), DeflectionField::zero(&mesh));
        assert_eq!(solve_nonlinear(&mesh, &UniformLoad(0.0)).unwrap(), DeflectionField::zero(&mesh));
    }

    #[test]
    fn linear_solution_scales_with_load() {
        let mesh = build_mesh(&st1_1(), 12).unwrap();
        let load = |x: f64| 1e-2 * (1.0 + (x * 1e5).sin());
        let a = solve_linear(&mesh, &load).unwrap();
        let b = solve_linear(&mesh, &|x: f64| 3.5 * load(x)).unwrap();
        let a3 = a.scaled(3.5);
        for (u, v) in a3.transverse().iter().zip(b.transverse()) {
            assert!((u - v).abs() <= 1e-12 * v.abs().max(1e-30));
        }
    }

    #[test]
    fn clamped_end_is_exact() {
        let mesh = build_mesh(&st1_1(), 10).unwrap();
        for field in [
            solve_linear(&mesh, &UniformLoad(5e-2)).unwrap(),
            solve_nonlinear(&mesh, &UniformLoad(5e-2)).unwrap(),
        ] {
            assert_eq!(field.transverse()[0], 0.0);
            assert_eq!(field.rotation()[0], 0.0);
            assert_eq!(field.axial()[0], 0.0);
            assert_eq!(field.deflection_at(0.0), 0.0);
        }
    }

    #[test]
    fn interpolation_is_slope_continuous() {
        let mesh = build_mesh(&st1_1(), 6).unwrap();
        let field = solve_linear(&mesh, &|x: f64| 1e-2 * (x / 1e-4).powi(2)).unwrap();
        let (l, eps) = (mesh.length(), 1e-9 * mesh.length());
        for &x in &mesh.node_positions()[1..6] {
            let jump = (field.deflection_at(x - eps) - field.deflection_at(x + eps)).abs();
            assert!(jump <= 4.0 * eps * field.slope_at(x).abs() + 1e-18, "{jump}");
            let kink = (field.slope_at(x - eps) - field.slope_at(x + eps)).abs();
            assert!(kink <= 1e-6 * field.tip_displacement() / l, "{kink}");
        }
    }

    #[test]
    fn small_load_nonlinear_matches_linear() {
        let mesh = build_mesh(&st1_1(), 20).unwrap();
        let q = 1e-4;
        let lin = solve_linear(&mesh, &UniformLoad(q)).unwrap();
        let nl = solve_nonlinear(&mesh, &UniformLoad(q)).unwrap();
        assert!(lin.tip_displacement() < 1e-3 * mesh.length());
        let rel = (nl.tip_displacement() - lin.tip_displacement()).abs() / lin.tip_displacement();
        assert!(rel < 1e-3, "{rel}");
    }

    #[test]
    fn nonlinear_stiffens_under_large_load() {
        let mesh = build_mesh(&st1_1(), 20).unwrap();
        let q = 10.0;
        let lin = solve_linear(&mesh, &UniformLoad(q)).unwrap();
        let nl = solve_nonlinear(&mesh, &UniformLoad(q)).unwrap();
        assert!(lin.tip_displacement() > 0.1 * mesh.length());
        assert!(nl.tip_displacement() < lin.tip_displacement());
        assert!(nl.tip_displacement() < mesh.length());
        assert!(nl.max_axial_strain() < 1e-3, "{}", nl.max_axial_strain());
    }

    #[test]
    fn end_moment_rolls_beam_into_circle() {
        let mesh = build_mesh(&st1_1(), 40).unwrap();
        let moment = std::f64::consts::TAU * mesh.bending_rigidity() / mesh.length();
        let (field, report) = solve_static(
            &mesh,
            Kinematics::Corotational,
            &BeamLoading::tip_moment(moment),
            None,
            &NewtonSettings::default(),
        )
        .unwrap();
        let rel = (field.tip_rotation() - std::f64::consts::TAU).abs() / std::f64::consts::TAU;
        assert!(rel < 1e-2, "tip rotation {}", field.tip_rotation());
        // a closed circle brings the tip back to the root
        assert!(field.tip_displacement().abs() < 1e-2 * mesh.length());
        assert!(report.load_steps >= 1);
    }

    #[test]
    fn newton_converges_quadratically() {
        let mesh = build_mesh(&st1_1(), 20).unwrap();
        let q = 0.5;
        let (_, report) = solve_static(
            &mesh,
            Kinematics::Corotational,
            &BeamLoading::distributed(&UniformLoad(q)),
            None,
            &NewtonSettings::default(),
        )
        .unwrap();
        let h = &report.residual_history;
        assert!(h.len() >= 4, "{h:?}");
        eprintln!("residual history {h:?}");
        for k in h.len() - 3..h.len() - 1 {
            assert!(h[k + 1] <= 1e3 * h[k] * h[k], "{h:?}");
        }
    }

    #[test]
    fn tip_displacement_of_zero_field() {
        let mesh = build_mesh(&st1_1(), 4).unwrap();
        assert_eq!(tip_displacement(&DeflectionField::zero(&mesh)), 0.0);
    }
}
