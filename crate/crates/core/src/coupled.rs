//! Electromechanical equilibrium, voltage sweeps and pull-in search.
//!
//! Pull-in is detected as loss of convergence of the coupled iteration: either
//! the iteration budget runs out, the beam reaches the counter-electrode, or
//! the structural solve fails. Every equilibrium used for bracketing starts
//! from the undeformed beam, so a bracket can be replayed exactly.

use std::time::Instant;

use crate::analytic::EstimateMethod;
use crate::banded::SymmetricBand;
use crate::beam::{
    build_mesh, hermite, solve_linear, solve_static, BeamLoading, BeamMesh, DeflectionField, DistributedLoad,
    ExternalLoad, Kinematics, NewtonSettings, DEFAULT_ELEMENTS, GAUSS3, MIN_ELEMENTS,
};
use crate::electrostatics::{
    maxwell_load, plate_intensity, plate_intensity_slope, plate_load, solve_field2d, LoadKind, LoadModelConfig,
};
use crate::error::{Error, Result};
use crate::specimen::Specimen;

/// Voltage above which `find_pull_in` gives up.
pub const VOLTAGE_CAP: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuralMode {
    Linear,
    Nonlinear,
}

impl StructuralMode {
    fn kinematics(self) -> Kinematics {
        match self {
            Self::Linear => Kinematics::Linear,
            Self::Nonlinear => Kinematics::Corotational,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    Staggered,
    Monolithic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub structural: StructuralMode,
    pub load: LoadModelConfig,
    pub coupling: CouplingMode,
    /// Relative change of the tip displacement that ends the coupling iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial under-relaxation factor of the staggered iteration.
    pub relaxation: f64,
    /// Width of the final pull-in bracket (V).
    pub bracket_tolerance: f64,
    pub beam_elements: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            structural: StructuralMode::Nonlinear,
            load: LoadModelConfig::default(),
            coupling: CouplingMode::Staggered,
            tolerance: 1e-6,
            max_iterations: 100,
            relaxation: 1.0,
            bracket_tolerance: 0.1,
            beam_elements: DEFAULT_ELEMENTS,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.load.validate()?;
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "coupling tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.bracket_tolerance.is_finite() && self.bracket_tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pull-in bracket tolerance must be positive, got {}",
                self.bracket_tolerance
            )));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "under-relaxation factor must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("at least one coupling iteration is required".into()));
        }
        if self.beam_elements < MIN_ELEMENTS {
            return Err(Error::MeshTooCoarse {
                requested: self.beam_elements,
                min: MIN_ELEMENTS,
            });
        }
        if self.coupling == CouplingMode::Monolithic && self.load.kind != LoadKind::ParallelPlate {
            return Err(Error::InvalidConfig(
                "monolithic coupling requires the parallel-plate load model".into(),
            ));
        }
        Ok(())
    }

    /// Same configuration with the beam element size halved and the field mesh densities doubled.
    pub fn refined(mut self) -> Self {
        self.beam_elements *= 2;
        self.load = self.load.refined(2);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    /// Iteration budget exhausted.
    IterationLimit,
    /// The beam touched the counter-electrode.
    GapClosure,
    /// The structural solve failed or lost stability.
    StructuralFailure,
}

#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub voltage: f64,
    pub deflection: DeflectionField,
    pub converged: bool,
    /// Coupling iterations (staggered) or Newton iterations (monolithic).
    pub iterations: usize,
    /// Relative tip-displacement change of the last iteration.
    pub final_change: f64,
    pub termination: Termination,
}

impl EquilibriumResult {
    pub fn tip_displacement(&self) -> f64 {
        self.deflection.tip_displacement()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub voltage: f64,
    /// Tip displacement (m).
    pub tip_displacement: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub pull_in: Option<PullInResult>,
}

impl SweepResult {
    pub fn converged(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.converged)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullInResult {
    /// Largest voltage known to converge.
    pub bracket_low: f64,
    /// Smallest voltage known to fail.
    pub bracket_high: f64,
    pub pull_in_voltage: f64,
    /// Tip displacement of the equilibrium at `bracket_low` (m).
    pub last_stable_tip: f64,
    pub method: EstimateMethod,
}

fn check_voltage(voltage: f64) -> Result<()> {
    if voltage.is_finite() && voltage >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("voltage must be non-negative, got {voltage}")))
    }
}

/// Equilibrium at voltage `voltage`, starting from the undeformed beam.
pub fn solve_equilibrium(spec: &Specimen, voltage: f64, cfg: &SolverConfig) -> Result<EquilibriumResult> {
    solve_equilibrium_from(spec, voltage, cfg, None)
}

/// Equilibrium at `voltage`, starting from `initial` when given (continuation).
pub fn solve_equilibrium_from(
    spec: &Specimen,
    voltage: f64,
    cfg: &SolverConfig,
    initial: Option<&DeflectionField>,
) -> Result<EquilibriumResult> {
    cfg.validate()?;
    check_voltage(voltage)?;
    let mesh = build_mesh(spec, cfg.beam_elements)?;
    if let Some(field) = initial {
        if !field.matches(&mesh) {
            return Err(Error::InvalidConfig(
                "initial deflection field does not match the beam mesh".into(),
            ));
        }
    }
    let started = Instant::now();
    let result = match cfg.coupling {
        CouplingMode::Staggered => staggered(&mesh, voltage, cfg, initial),
        CouplingMode::Monolithic => monolithic(&mesh, voltage, cfg, initial),
    }?;
    log::debug!(
        "{} at {voltage:.4} V: {:?} after {} iterations, tip {:.6e} m, {:.1} ms",
        spec.id(),
        result.termination,
        result.iterations,
        result.tip_displacement(),
        started.elapsed().as_secs_f64() * 1e3
    );
    Ok(result)
}

fn structural_solve(
    mesh: &BeamMesh,
    mode: StructuralMode,
    load: &dyn DistributedLoad,
    initial: &DeflectionField,
) -> Result<DeflectionField> {
    match mode {
        StructuralMode::Linear => solve_linear(mesh, load),
        StructuralMode::Nonlinear => solve_static(
            mesh,
            Kinematics::Corotational,
            &BeamLoading::distributed(load),
            Some(initial),
            &NewtonSettings::default(),
        )
        .map(|(field, _)| field),
    }
}

fn electrostatic_load(spec: &Specimen, v: &DeflectionField, voltage: f64, cfg: &LoadModelConfig) -> Result<Box<dyn DistributedLoad>> {
    Ok(match cfg.kind {
        LoadKind::ParallelPlate => Box::new(plate_load(spec, v, voltage, cfg.fringing)?),
        LoadKind::Field2d => Box::new(maxwell_load(&solve_field2d(spec, v, voltage, cfg)?, spec)),
    })
}

fn failure(err: &Error) -> Option<Termination> {
    match err {
        Error::GapClosure { .. } => Some(Termination::GapClosure),
        Error::NonConvergence { .. } | Error::Singular { .. } => Some(Termination::StructuralFailure),
        _ => None,
    }
}

fn staggered(
    mesh: &BeamMesh,
    voltage: f64,
    cfg: &SolverConfig,
    initial: Option<&DeflectionField>,
) -> Result<EquilibriumResult> {
    let spec = mesh.specimen();
    let mut v = initial.cloned().unwrap_or_else(|| DeflectionField::zero(mesh));
    let mut omega = cfg.relaxation;
    let mut deltas: Vec<f64> = Vec::with_capacity(3);
    let mut change = f64::INFINITY;
    let end = |v: DeflectionField, iterations, change, termination| EquilibriumResult {
        voltage,
        deflection: v,
        converged: termination == Termination::Converged,
        iterations,
        final_change: change,
        termination,
    };
    for it in 1..=cfg.max_iterations {
        let solved = electrostatic_load(spec, &v, voltage, &cfg.load)
            .and_then(|load| structural_solve(mesh, cfg.structural, load.as_ref(), &v));
        let target = match solved {
            Ok(t) => t,
            Err(e) => match failure(&e) {
                Some(reason) => return Ok(end(v, it, change, reason)),
                None => return Err(e),
            },
        };
        let next = v.relaxed_towards(&target, omega);
        let (old_tip, new_tip) = (v.tip_displacement(), next.tip_displacement());
        let delta = new_tip - old_tip;
        change = if new_tip != 0.0 { (delta / new_tip).abs() } else { delta.abs() };
        v = next;
        if !(new_tip < spec.gap()) {
            return Ok(end(v, it, change, Termination::GapClosure));
        }
        if change < cfg.tolerance {
            return Ok(end(v, it, change, Termination::Converged));
        }
        if deltas.len() == 3 {
            deltas.remove(0);
        }
        deltas.push(delta);
        if deltas.len() == 3 && deltas[0] * deltas[1] < 0.0 && deltas[1] * deltas[2] < 0.0 {
            omega *= 0.5;
            deltas.clear();
            log::debug!("coupling iteration oscillates, under-relaxation reduced to {omega}");
        }
    }
    Ok(end(v, cfg.max_iterations, change, Termination::IterationLimit))
}

/// Parallel-plate load that follows the deflection, with its exact linearization.
struct CoupledPlateLoad {
    gap: f64,
    width: f64,
    voltage: f64,
    fringing: f64,
}

impl ExternalLoad for CoupledPlateLoad {
    fn assemble(
        &self,
        mesh: &BeamMesh,
        state: &DeflectionField,
        force: &mut [f64],
        mut tangent: Option<&mut SymmetricBand>,
    ) -> Result<()> {
        let xs = mesh.node_positions();
        let (v, theta) = (state.transverse(), state.rotation());
        for e in 0..mesh.n_elements() {
            let h = xs[e + 1] - xs[e];
            let dofs = [3 * e + 1, 3 * e + 2, 3 * e + 4, 3 * e + 5];
            let local = [v[e], theta[e], v[e + 1], theta[e + 1]];
            for &(xi, wq) in &GAUSS3 {
                let n = hermite(xi, h);
                let deflection: f64 = n.iter().zip(&local).map(|(a, b)| a * b).sum();
                let remaining = self.gap - deflection;
                if !(remaining > 0.0) {
                    return Err(Error::GapClosure {
                        x: xs[e] + xi * h,
                        deflection,
                        gap: self.gap,
                    });
                }
                let q = plate_intensity(remaining, self.width, self.voltage, self.fringing);
                for (a, &i) in dofs.iter().enumerate() {
                    force[i] += wq * h * q * n[a];
                }
                if let Some(k) = tangent.as_deref_mut() {
                    let dq = plate_intensity_slope(remaining, self.width, self.voltage, self.fringing);
                    for (a, &i) in dofs.iter().enumerate() {
                        for (b, &j) in dofs.iter().enumerate().take(a + 1) {
                            // free DOFs start after the clamped node
                            if i >= 3 && j >= 3 {
                                k.add(i - 3, j - 3, -wq * h * dq * n[a] * n[b]);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn monolithic(
    mesh: &BeamMesh,
    voltage: f64,
    cfg: &SolverConfig,
    initial: Option<&DeflectionField>,
) -> Result<EquilibriumResult> {
    let spec = mesh.specimen();
    let load = CoupledPlateLoad {
        gap: spec.gap(),
        width: spec.width(),
        voltage,
        fringing: cfg.load.fringing,
    };
    let settings = NewtonSettings {
        max_iterations: cfg.max_iterations.min(50),
        ..NewtonSettings::default()
    };
    match solve_static(mesh, cfg.structural.kinematics(), &load, initial, &settings) {
        Ok((field, report)) => Ok(EquilibriumResult {
            voltage,
            deflection: field,
            converged: true,
            iterations: report.iterations,
            final_change: 0.0,
            termination: Termination::Converged,
        }),
        Err(e) => match failure(&e) {
            Some(reason) => Ok(EquilibriumResult {
                voltage,
                deflection: initial.cloned().unwrap_or_else(|| DeflectionField::zero(mesh)),
                converged: false,
                iterations: match e {
                    Error::NonConvergence { iterations, .. } => iterations,
                    _ => 0,
                },
                final_change: f64::INFINITY,
                termination: reason,
            }),
            None => Err(e),
        },
    }
}

/// Equilibria at `v_max * k / n_steps`, `k = 1..=n_steps`, each started from
/// the previous one. Stops at the first failure and brackets the pull-in
/// voltage between the last two voltages.
pub fn voltage_sweep(spec: &Specimen, v_max: f64, n_steps: usize, cfg: &SolverConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if !(v_max.is_finite() && v_max > 0.0) {
        return Err(Error::InvalidConfig(format!("sweep voltage must be positive, got {v_max}")));
    }
    if n_steps < 2 {
        return Err(Error::InvalidConfig(format!("a sweep needs at least 2 steps, got {n_steps}")));
    }
    let mut points = Vec::with_capacity(n_steps);
    let mut previous: Option<EquilibriumResult> = None;
    for k in 1..=n_steps {
        let voltage = v_max * k as f64 / n_steps as f64;
        let eq = solve_equilibrium_from(spec, voltage, cfg, previous.as_ref().map(|p| &p.deflection))?;
        points.push(SweepPoint {
            voltage,
            tip_displacement: eq.tip_displacement(),
            converged: eq.converged,
            iterations: eq.iterations,
        });
        if !eq.converged {
            let low = match &previous {
                Some(p) => p.voltage,
                None => 0.0,
            };
            let pull_in = bisect(spec, cfg, low, voltage)?;
            return Ok(SweepResult {
                points,
                pull_in: Some(pull_in),
            });
        }
        previous = Some(eq);
    }
    Ok(SweepResult { points, pull_in: None })
}

/// Narrows `[low, high]` (converging at `low`, failing at `high`) to the bracket tolerance.
fn bisect(spec: &Specimen, cfg: &SolverConfig, mut low: f64, mut high: f64) -> Result<PullInResult> {
    let mut stable = if low > 0.0 {
        let eq = solve_equilibrium(spec, low, cfg)?;
        if !eq.converged {
            return Err(Error::InvalidConfig(format!(
                "lower pull-in bracket {low} V does not converge from the undeformed beam"
            )));
        }
        eq.tip_displacement()
    } else {
        0.0
    };
    while high - low > cfg.bracket_tolerance {
        let mid = 0.5 * (low + high);
        let eq = solve_equilibrium(spec, mid, cfg)?;
        if eq.converged {
            low = mid;
            stable = eq.tip_displacement();
        } else {
            high = mid;
        }
    }
    Ok(PullInResult {
        bracket_low: low,
        bracket_high: high,
        pull_in_voltage: 0.5 * (low + high),
        last_stable_tip: stable,
        method: EstimateMethod::Fem,
    })
}

/// Brackets the pull-in voltage: doubling from 1 V until an equilibrium fails, then bisection.
pub fn find_pull_in(spec: &Specimen, cfg: &SolverConfig) -> Result<PullInResult> {
    cfg.validate()?;
    let mut low = 0.0;
    let mut high = 1.0;
    loop {
        if high > VOLTAGE_CAP {
            return Err(Error::NoPullIn { cap: VOLTAGE_CAP });
        }
        if !solve_equilibrium(spec, high, cfg)?.converged {
            break;
        }
        low = high;
        high *= 2.0;
    }
    bisect(spec, cfg, low, high)
}

/// Two sweeps that differ only in the Young's modulus, run concurrently.
pub fn modulus_band_sweep(
    spec: &Specimen,
    e_low: f64,
    e_high: f64,
    v_max: f64,
    n_steps: usize,
    cfg: &SolverConfig,
) -> Result<(SweepResult, SweepResult)> {
    if !(e_low > 0.0 && e_low < e_high) {
        return Err(Error::InvalidConfig(format!(
            "modulus band needs 0 < low < high, got {e_low} and {e_high}"
        )));
    }
    let soft = spec.with_young_modulus(e_low)?;
    let stiff = spec.with_young_modulus(e_high)?;
    let (a, b) = std::thread::scope(|scope| {
        let handle = scope.spawn(|| voltage_sweep(&soft, v_max, n_steps, cfg));
        let b = voltage_sweep(&stiff, v_max, n_steps, cfg);
        (handle.join().expect("sweep thread panicked"), b)
    });
    Ok((a?, b?))
}
