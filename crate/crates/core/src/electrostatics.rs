//! Electrostatic loading of the beam.
//!
//! Two models are provided. The parallel-plate model uses the local gap only,
//! with an optional first-order fringing factor. The field model solves the
//! Laplace equation in the wafer plane on a body-fitted mesh of the deformed
//! gap and converts the normal field on the beam face into a line load through
//! the Maxwell stress `eps0 E_n^2 / 2`, times the out-of-plane width.
//!
//! Field domain (beam coordinates, `y` across the gap):
//!
//! ```text
//!   y = g   +------------------------------+------------+   counter-electrode, phi = 0
//!           |            gap block         |  far block |
//!   y = v(x)+==============================+ - - - - - -|   beam face, phi = V
//!           0           beam               l   end face |
//!                                           |    tip    |   Neumann elsewhere
//!                                           +-----------+   y = v(l) - t
//! ```
//!
//! The mesh is rebuilt from the current deflection on every solve, so element
//! distortion never accumulates.

use std::io::{self, Write};

use crate::banded::SymmetricBand;
use crate::beam::{DeflectionField, DistributedLoad};
use crate::error::{Error, Result};
use crate::specimen::{Specimen, EPSILON_0};

pub const DEFAULT_FRINGING: f64 = 0.65;
pub const MIN_CELLS_ACROSS: usize = 8;
pub const MIN_CELLS_ALONG: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    ParallelPlate,
    Field2d,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadModelConfig {
    pub kind: LoadKind,
    /// Fringing coefficient `f` of the parallel-plate model.
    pub fringing: f64,
    /// Field mesh cells across the gap.
    pub cells_across: usize,
    /// Field mesh cells along the beam.
    pub cells_along: usize,
    /// Field domain extension beyond the tip, in multiples of the gap.
    pub extension: f64,
}

impl Default for LoadModelConfig {
    fn default() -> Self {
        Self {
            kind: LoadKind::Field2d,
            fringing: DEFAULT_FRINGING,
            cells_across: 24,
            cells_along: 160,
            extension: 2.0,
        }
    }
}

impl LoadModelConfig {
    pub fn parallel_plate(fringing: f64) -> Self {
        Self {
            kind: LoadKind::ParallelPlate,
            fringing,
            ..Self::default()
        }
    }

    pub fn field2d() -> Self {
        Self::default()
    }

    /// Same model with both field mesh densities multiplied by `factor`.
    pub fn refined(mut self, factor: usize) -> Self {
        self.cells_across *= factor;
        self.cells_along *= factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fringing.is_finite() && self.fringing >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "fringing coefficient must be non-negative, got {}",
                self.fringing
            )));
        }
        if self.cells_across < MIN_CELLS_ACROSS {
            return Err(Error::InvalidConfig(format!(
                "field mesh needs at least {MIN_CELLS_ACROSS} cells across the gap, got {}",
                self.cells_across
            )));
        }
        if self.cells_along < MIN_CELLS_ALONG {
            return Err(Error::InvalidConfig(format!(
                "field mesh needs at least {MIN_CELLS_ALONG} cells along the beam, got {}",
                self.cells_along
            )));
        }
        if !(self.extension.is_finite() && self.extension > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "field domain extension must be positive, got {}",
                self.extension
            )));
        }
        Ok(())
    }
}

/// Parallel-plate line load for a local gap `gap` (N/m).
#[inline]
pub(crate) fn plate_intensity(gap: f64, width: f64, voltage: f64, fringing: f64) -> f64 {
    EPSILON_0 * width * voltage * voltage / (2.0 * gap * gap) * (1.0 + fringing * gap / width)
}

/// Derivative of [`plate_intensity`] with respect to the deflection (gap = g - v).
#[inline]
pub(crate) fn plate_intensity_slope(gap: f64, width: f64, voltage: f64, fringing: f64) -> f64 {
    EPSILON_0 * width * voltage * voltage / gap.powi(3) * (1.0 + fringing * gap / (2.0 * width))
}

fn check_contact(deflection: &DeflectionField, gap: f64) -> Result<()> {
    let xs = deflection.node_positions();
    for e in 0..xs.len() - 1 {
        for k in 0..=4 {
            let x = xs[e] + (xs[e + 1] - xs[e]) * k as f64 / 4.0;
            let v = deflection.deflection_at(x);
            if !(v < gap) {
                return Err(Error::GapClosure {
                    x,
                    deflection: v,
                    gap,
                });
            }
        }
    }
    Ok(())
}

/// `q(x) = eps0 w V^2 / (2 (g - v)^2) (1 + f (g - v) / w)`, towards the counter-electrode.
#[derive(Debug, Clone)]
pub struct PlateLoad {
    deflection: DeflectionField,
    gap: f64,
    width: f64,
    voltage: f64,
    fringing: f64,
}

impl DistributedLoad for PlateLoad {
    fn intensity(&self, x: f64) -> f64 {
        let local = self.gap - self.deflection.deflection_at(x);
        plate_intensity(local, self.width, self.voltage, self.fringing)
    }
}

pub fn plate_load(spec: &Specimen, v: &DeflectionField, voltage: f64, fringing: f64) -> Result<PlateLoad> {
    check_contact(v, spec.gap())?;
    Ok(PlateLoad {
        deflection: v.clone(),
        gap: spec.gap(),
        width: spec.width(),
        voltage,
        fringing,
    })
}

struct Column {
    x: f64,
    kmin: i64,
    first: usize,
}

struct Quad {
    // corners a (i,k), b (i+1,k), c (i+1,k+1), d (i,k+1)
    nodes: [usize; 4],
    split_bd: bool,
}

struct FieldMesh {
    columns: Vec<Column>,
    tip_column: usize,
    levels_across: i64,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FieldMesh {
    fn node(&self, i: usize, k: i64) -> usize {
        let c = &self.columns[i];
        debug_assert!(k >= c.kmin && k <= self.levels_across);
        c.first + (k - c.kmin) as usize
    }

    fn n_nodes(&self) -> usize {
        self.x.len()
    }
}

/// Grid stations on `[0, length]`: spacing starts at `fine`, grows by `GROWTH`
/// per cell up to `coarse` and stays there. The whole set is rescaled to end on `length`.
fn graded_stations(length: f64, fine: f64, coarse: f64) -> Vec<f64> {
    const GROWTH: f64 = 1.5;
    let fine = fine.min(coarse);
    let mut steps = Vec::new();
    let (mut h, mut sum) = (fine, 0.0);
    while sum + h < length && h < coarse {
        steps.push(h);
        sum += h;
        h = (h * GROWTH).min(coarse);
    }
    let rest = length - sum;
    let n_rest = (rest / coarse).round().max(1.0) as usize;
    steps.extend(std::iter::repeat_n(rest / n_rest as f64, n_rest));
    let mut out = Vec::with_capacity(steps.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for h in steps {
        acc += h;
        out.push(acc);
    }
    let scale = length / acc;
    for p in &mut out {
        *p *= scale;
    }
    *out.last_mut().unwrap() = length;
    out
}

fn build_field_mesh(spec: &Specimen, v: &DeflectionField, cfg: &LoadModelConfig) -> Result<FieldMesh> {
    let (l, g, t) = (spec.length(), spec.gap(), spec.thickness());
    let extension = cfg.extension * g;
    let along = l / cfg.cells_along as f64;

    let tip = v.deflection_at(l);
    if !(tip < g) {
        return Err(Error::GapClosure {
            x: l,
            deflection: tip,
            gap: g,
        });
    }
    // The field is singular at the tip corner; cells shrink towards it in every block.
    let across = (g - tip) / cfg.cells_across as f64;
    let fine = 0.01 * across.min(along);

    let mut xs: Vec<f64> = graded_stations(l, fine, along).iter().rev().map(|s| l - s).collect();
    xs[0] = 0.0;
    let nb = xs.len() - 1;
    xs.extend(graded_stations(extension, fine, along.max(across)).iter().skip(1).map(|s| l + s));
    let eta: Vec<f64> = graded_stations(1.0, fine / (g - tip), 1.0 / cfg.cells_across as f64);
    let ny = (eta.len() - 1) as i64;
    let depth = graded_stations(t, fine, across);
    let n_tip = (depth.len() - 1) as i64;

    let mut face: Vec<f64> = Vec::with_capacity(xs.len());
    for &x in &xs[..=nb] {
        let b = v.deflection_at(x);
        if !(b < g) {
            return Err(Error::GapClosure {
                x,
                deflection: b,
                gap: g,
            });
        }
        face.push(b);
    }
    face.resize(xs.len(), tip);

    let mut columns = Vec::with_capacity(xs.len());
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, (&xi, &bi)) in xs.iter().zip(&face).enumerate() {
        let kmin = if i < nb { 0 } else { -n_tip };
        columns.push(Column {
            x: xi,
            kmin,
            first: x.len(),
        });
        for k in kmin..=ny {
            x.push(xi);
            y.push(if k >= 0 {
                bi + (g - bi) * eta[k as usize]
            } else {
                tip - depth[(-k) as usize]
            });
        }
    }
    Ok(FieldMesh {
        columns,
        tip_column: nb,
        levels_across: ny,
        x,
        y,
    })
}

fn angle_at(x: &[f64], y: &[f64], p: usize, q: usize, r: usize) -> f64 {
    let (ax, ay) = (x[q] - x[p], y[q] - y[p]);
    let (bx, by) = (x[r] - x[p], y[r] - y[p]);
    (ax * by - ay * bx).abs().atan2(ax * bx + ay * by)
}

fn quads(mesh: &FieldMesh) -> Vec<Quad> {
    let mut out = Vec::new();
    for i in 0..mesh.columns.len() - 1 {
        let kmin = mesh.columns[i].kmin.max(mesh.columns[i + 1].kmin);
        for k in kmin..mesh.levels_across {
            let nodes = [
                mesh.node(i, k),
                mesh.node(i + 1, k),
                mesh.node(i + 1, k + 1),
                mesh.node(i, k + 1),
            ];
            let [a, b, c, d] = nodes;
            // Delaunay choice: the diagonal whose opposite angles sum to at most pi.
            let opposite_bd = angle_at(&mesh.x, &mesh.y, a, b, d) + angle_at(&mesh.x, &mesh.y, c, d, b);
            out.push(Quad {
                nodes,
                split_bd: opposite_bd <= std::f64::consts::PI,
            });
        }
    }
    out
}

impl Quad {
    fn triangles(&self) -> [[usize; 3]; 2] {
        let [a, b, c, d] = self.nodes;
        if self.split_bd {
            [[a, b, d], [b, c, d]]
        } else {
            [[a, b, c], [a, c, d]]
        }
    }

    fn triangle_with(&self, p: usize, q: usize) -> [usize; 3] {
        let tris = self.triangles();
        if tris[0].contains(&p) && tris[0].contains(&q) {
            tris[0]
        } else {
            tris[1]
        }
    }
}

/// Shape-function derivative coefficients and area of a linear triangle.
fn triangle_geometry(x: &[f64], y: &[f64], tri: &[usize; 3]) -> ([f64; 3], [f64; 3], f64) {
    let [p, q, r] = *tri;
    let b = [y[q] - y[r], y[r] - y[p], y[p] - y[q]];
    let c = [x[r] - x[q], x[p] - x[r], x[q] - x[p]];
    let area = 0.5 * (b[0] * c[1] - b[1] * c[0]);
    (b, c, area)
}

fn gradient(x: &[f64], y: &[f64], phi: &[f64], tri: &[usize; 3]) -> (f64, f64) {
    let (b, c, area) = triangle_geometry(x, y, tri);
    let gx = (0..3).map(|i| b[i] * phi[tri[i]]).sum::<f64>() / (2.0 * area);
    let gy = (0..3).map(|i| c[i] * phi[tri[i]]).sum::<f64>() / (2.0 * area);
    (gx, gy)
}

/// Potential in the gap and the derived field quantities on the electrodes.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    voltage: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    potential: Vec<f64>,
    face_x: Vec<f64>,
    face_field: Vec<f64>,
    beam_charge: f64,
    counter_charge: f64,
}

impl FieldSolution {
    pub fn voltage(&self) -> f64 {
        self.voltage
    }

    pub fn node_x(&self) -> &[f64] {
        &self.x
    }

    pub fn node_y(&self) -> &[f64] {
        &self.y
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Beam-face nodes, from the clamp (x = 0) to the tip (x = l).
    pub fn face_positions(&self) -> &[f64] {
        &self.face_x
    }

    /// Normal field `E_n` (V/m) at the beam-face nodes, positive from the beam into the gap.
    pub fn normal_field(&self) -> &[f64] {
        &self.face_field
    }

    /// Linear interpolation of the nodal normal field.
    pub fn normal_field_at(&self, x: f64) -> f64 {
        interpolate(&self.face_x, &self.face_field, x)
    }

    /// Induced charge on the beam electrode per unit out-of-plane depth (C/m).
    pub fn beam_charge(&self) -> f64 {
        self.beam_charge
    }

    /// Induced charge on the counter-electrode per unit depth (C/m).
    pub fn counter_charge(&self) -> f64 {
        self.counter_charge
    }

    pub fn potential_range(&self) -> (f64, f64) {
        self.potential
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }

    /// Writes `x_um,y_um,phi_V`, one line per mesh node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x_um,y_um,phi_V")?;
        for ((x, y), p) in self.x.iter().zip(&self.y).zip(&self.potential) {
            writeln!(out, "{},{},{}", x * 1e6, y * 1e6, p)?;
        }
        Ok(())
    }
}

fn interpolate(xs: &[f64], values: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return values[0];
    }
    if x >= xs[last] {
        return values[last];
    }
    let i = match xs.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => return values[i],
        Err(i) => i - 1,
    };
    let s = (x - xs[i]) / (xs[i + 1] - xs[i]);
    values[i] + s * (values[i + 1] - values[i])
}

/// Solves the Laplace equation on the deformed gap with the beam at potential `voltage`.
pub fn solve_field2d(
    spec: &Specimen,
    v: &DeflectionField,
    voltage: f64,
    cfg: &LoadModelConfig,
) -> Result<FieldSolution> {
    cfg.validate()?;
    let mesh = build_field_mesh(spec, v, cfg)?;
    let quads = quads(&mesh);
    let n = mesh.n_nodes();
    let ny = mesh.levels_across;
    let nb = mesh.tip_column;

    // Dirichlet data: None for free nodes.
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for (i, col) in mesh.columns.iter().enumerate() {
        fixed[mesh.node(i, ny)] = Some(0.0);
        if i <= nb {
            fixed[mesh.node(i, 0)] = Some(voltage);
        }
        if i == nb {
            for k in col.kmin..0 {
                fixed[mesh.node(i, k)] = Some(voltage);
            }
        }
    }

    let bandwidth = quads
        .iter()
        .map(|q| {
            let lo = q.nodes.iter().min().unwrap();
            let hi = q.nodes.iter().max().unwrap();
            hi - lo
        })
        .max()
        .unwrap_or(1);
    let mut k = SymmetricBand::zeros(n, bandwidth);
    let mut rhs = vec![0.0; n];
    for q in &quads {
        for tri in q.triangles() {
            let (b, c, area) = triangle_geometry(&mesh.x, &mesh.y, &tri);
            for r in 0..3 {
                let i = tri[r];
                if fixed[i].is_some() {
                    continue;
                }
                for s in 0..3 {
                    let j = tri[s];
                    let kij = (b[r] * b[s] + c[r] * c[s]) / (4.0 * area);
                    match fixed[j] {
                        Some(value) => rhs[i] -= kij * value,
                        None if j <= i => k.add(i, j, kij),
                        None => {}
                    }
                }
            }
        }
    }
    for (i, f) in fixed.iter().enumerate() {
        if let Some(value) = f {
            k.set(i, i, 1.0);
            rhs[i] = *value;
        }
    }
    let potential = {
        let factor = k.factor()?;
        let mut phi = rhs;
        factor.solve_in_place(&mut phi);
        phi
    };
    for (p, f) in potential.iter().zip(&fixed) {
        debug_assert!(f.is_none_or(|v| (p - v).abs() <= 1e-12 * v.abs().max(1.0)));
    }

    let (x, y) = (&mesh.x, &mesh.y);
    let quad_at = |i: usize, kk: i64| -> &Quad {
        // quads are generated column by column, bottom to top
        let mut idx = 0;
        for c in 0..i {
            let kmin = mesh.columns[c].kmin.max(mesh.columns[c + 1].kmin);
            idx += (ny - kmin) as usize;
        }
        let kmin = mesh.columns[i].kmin.max(mesh.columns[i + 1].kmin);
        &quads[idx + (kk - kmin) as usize]
    };

    // Beam face, one segment per gap-block column.
    let mut edge_field = Vec::with_capacity(nb);
    let mut edge_len = Vec::with_capacity(nb);
    let mut beam_charge = 0.0;
    for i in 0..nb {
        let q = quad_at(i, 0);
        let (a, b) = (q.nodes[0], q.nodes[1]);
        let (gx, gy) = gradient(x, y, &potential, &q.triangle_with(a, b));
        let (tx, ty) = (x[b] - x[a], y[b] - y[a]);
        let len = tx.hypot(ty);
        let en = -(gx * (-ty) + gy * tx) / len;
        edge_field.push(en);
        edge_len.push(len);
        beam_charge += EPSILON_0 * en * len;
    }
    // End face of the tip, facing +x.
    for kk in mesh.columns[nb + 1].kmin..0 {
        let q = quad_at(nb, kk);
        let (a, d) = (q.nodes[0], q.nodes[3]);
        let (gx, _) = gradient(x, y, &potential, &q.triangle_with(a, d));
        beam_charge += EPSILON_0 * (-gx) * (y[d] - y[a]);
    }
    let mut counter_charge = 0.0;
    for i in 0..mesh.columns.len() - 1 {
        let q = quad_at(i, ny - 1);
        let (c, d) = (q.nodes[2], q.nodes[3]);
        let (_, gy) = gradient(x, y, &potential, &q.triangle_with(c, d));
        counter_charge += EPSILON_0 * gy * (x[c] - x[d]);
    }

    let face_x: Vec<f64> = mesh.columns[..=nb].iter().map(|c| c.x).collect();
    let face_field = (0..=nb)
        .map(|i| match i {
            0 => edge_field[0],
            i if i == nb => edge_field[nb - 1],
            i => {
                let (l0, l1) = (edge_len[i - 1], edge_len[i]);
                (edge_field[i - 1] * l0 + edge_field[i] * l1) / (l0 + l1)
            }
        })
        .collect();

    Ok(FieldSolution {
        voltage,
        x: mesh.x,
        y: mesh.y,
        potential,
        face_x,
        face_field,
        beam_charge,
        counter_charge,
    })
}

/// Maxwell-stress line load `w eps0 E_n^2 / 2`, piecewise linear between face nodes.
#[derive(Debug, Clone)]
pub struct MaxwellLoad {
    xs: Vec<f64>,
    values: Vec<f64>,
}

impl MaxwellLoad {
    pub fn nodal_values(&self) -> &[f64] {
        &self.values
    }

    /// Exact integral of the piecewise-linear load over the beam (N).
    pub fn total_force(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, q)| 0.5 * (q[0] + q[1]) * (x[1] - x[0]))
            .sum()
    }
}

impl DistributedLoad for MaxwellLoad {
    fn intensity(&self, x: f64) -> f64 {
        if x < 0.0 || x > self.xs[self.xs.len() - 1] {
            0.0
        } else {
            interpolate(&self.xs, &self.values, x)
        }
    }
}

pub fn maxwell_load(field: &FieldSolution, spec: &Specimen) -> MaxwellLoad {
    let w = spec.width();
    MaxwellLoad {
        xs: field.face_x.clone(),
        values: field
            .face_field
            .iter()
            .map(|e| 0.5 * w * EPSILON_0 * e * e)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{build_mesh, solve_linear, UniformLoad};
    use crate::specimen::{builtin_specimen, DimensionSource};

    fn st1_1() -> Specimen {
        builtin_specimen("ST1-1", DimensionSource::Measured).unwrap()
    }

    fn flat(spec: &Specimen) -> DeflectionField {
        DeflectionField::zero(&build_mesh(spec, 40).unwrap())
    }

    #[test]
    fn config_validation() {
        assert!(LoadModelConfig::default().validate().is_ok());
        assert!(LoadModelConfig { fringing: -0.1, ..Default::default() }.validate().is_err());
        assert!(LoadModelConfig { cells_across: 7, ..Default::default() }.validate().is_err());
        assert!(LoadModelConfig { cells_along: 39, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn plate_load_on_flat_beam() {
        let s = st1_1();
        let q = plate_load(&s, &flat(&s), 100.0, 0.0).unwrap();
        let expected = EPSILON_0 * s.width() * 1e4 / (2.0 * s.gap() * s.gap());
        assert!((expected - 2.66e-2).abs() < 0.01e-2);
        for x in [0.0, 0.3 * s.length(), s.length()] {
            assert!((q.intensity(x) - expected).abs() < 1e-12 * expected);
        }
        let zero = plate_load(&s, &flat(&s), 0.0, 0.65).unwrap();
        assert_eq!(zero.intensity(0.5 * s.length()), 0.0);
    }

    #[test]
    fn plate_load_rejects_contact() {
        let s = st1_1();
        let mesh = build_mesh(&s, 20).unwrap();
        let q = 1.01 * 8.0 * s.gap() * s.bending_rigidity() / s.length().powi(4);
        let touching = solve_linear(&mesh, &UniformLoad(q)).unwrap();
        assert!(touching.tip_displacement() > s.gap());
        assert!(matches!(plate_load(&s, &touching, 10.0, 0.0), Err(Error::GapClosure { .. })));
        assert!(matches!(
            solve_field2d(&s, &touching, 10.0, &LoadModelConfig::default()),
            Err(Error::GapClosure { .. })
        ));
    }

    #[test]
    fn plate_slope_matches_finite_difference() {
        let (w, v, f) = (15e-6, 120.0, 0.65);
        for gap in [1e-6, 3e-6, 5e-6] {
            let h = 1e-6 * gap;
            // d/dv with gap = g - v
            let fd = (plate_intensity(gap - h, w, v, f) - plate_intensity(gap + h, w, v, f)) / (2.0 * h);
            let exact = plate_intensity_slope(gap, w, v, f);
            assert!((fd - exact).abs() < 1e-7 * exact, "{fd} {exact}");
        }
    }

    #[test]
    fn uniform_gap_interior_field() {
        let s = st1_1();
        let v = 100.0;
        let sol = solve_field2d(&s, &flat(&s), v, &LoadModelConfig::default()).unwrap();
        let en = v / s.gap();
        for (&x, &e) in sol.face_positions().iter().zip(sol.normal_field()) {
            if x < s.length() - 3.0 * s.gap() {
                assert!((e - en).abs() < 0.01 * en, "x = {x}: {e} vs {en}");
            }
        }
        let tip = *sol.normal_field().last().unwrap();
        assert!(tip > en, "tip field {tip} should exceed {en}");
    }

    #[test]
    fn zero_voltage_gives_zero_field() {
        let s = st1_1();
        let sol = solve_field2d(&s, &flat(&s), 0.0, &LoadModelConfig::default()).unwrap();
        assert!(sol.potential().iter().all(|&p| p == 0.0));
        assert!(sol.normal_field().iter().all(|&e| e == 0.0));
        assert_eq!(maxwell_load(&sol, &s).total_force(), 0.0);
    }

    #[test]
    fn potential_is_linear_in_voltage() {
        let s = st1_1();
        let cfg = LoadModelConfig { cells_along: 60, cells_across: 12, ..Default::default() };
        let a = solve_field2d(&s, &flat(&s), 40.0, &cfg).unwrap();
        let b = solve_field2d(&s, &flat(&s), 80.0, &cfg).unwrap();
        for (p, q) in a.potential().iter().zip(b.potential()) {
            assert!((2.0 * p - q).abs() <= 1e-12 * 80.0);
        }
    }

    #[test]
    fn maximum_principle_on_deformed_gap() {
        let s = st1_1();
        let mesh = build_mesh(&s, 40).unwrap();
        let bent = solve_linear(&mesh, &UniformLoad(0.4 * 8.0 * s.gap() * s.bending_rigidity() / s.length().powi(4))).unwrap();
        for volts in [150.0, -150.0] {
            let sol = solve_field2d(&s, &bent, volts, &LoadModelConfig::default()).unwrap();
            let (lo, hi) = sol.potential_range();
            assert!(lo >= volts.min(0.0) - 1e-9 && hi <= volts.max(0.0) + 1e-9, "{lo} {hi}");
            let q = maxwell_load(&sol, &s);
            assert!(q.nodal_values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn charge_balance() {
        let s = st1_1();
        let sol = solve_field2d(&s, &flat(&s), 100.0, &LoadModelConfig::default()).unwrap();
        let (qb, qc) = (sol.beam_charge(), sol.counter_charge());
        assert!(qb > 0.0 && qc < 0.0);
        assert!((qb + qc).abs() < 0.01 * qb, "{qb} {qc}");
    }

    #[test]
    fn maxwell_load_matches_plate_in_interior() {
        let s = st1_1();
        let v = 120.0;
        let sol = solve_field2d(&s, &flat(&s), v, &LoadModelConfig::default()).unwrap();
        let maxwell = maxwell_load(&sol, &s);
        let plate = plate_load(&s, &flat(&s), v, 0.0).unwrap();
        let x = 0.5 * s.length();
        assert!((maxwell.intensity(x) - plate.intensity(x)).abs() < 0.02 * plate.intensity(x));
        assert_eq!(maxwell.intensity(1.01 * s.length()), 0.0);
        let plate_total = plate.intensity(x) * s.length();
        assert!((maxwell.total_force() - plate_total).abs() < 0.05 * plate_total);
    }

    #[test]
    fn force_converges_under_mesh_doubling() {
        for id in ["ST1-1", "ST1-6"] {
            let s = builtin_specimen(id, DimensionSource::Measured).unwrap();
            let base = LoadModelConfig::default();
            let forces: Vec<f64> = [1, 2]
                .iter()
                .map(|&f| {
                    let sol = solve_field2d(&s, &flat(&s), 100.0, &base.refined(f)).unwrap();
                    maxwell_load(&sol, &s).total_force()
                })
                .collect();
            let plate = plate_intensity(s.gap(), s.width(), 100.0, 0.0) * s.length();
            let change = (forces[1] - forces[0]).abs() / forces[1];
            println!("{id}: F/F_plate = {:.5} {:.5}, change {:.3e}", forces[0] / plate, forces[1] / plate, change);
            assert!(change < 5e-3);
        }
    }
}
