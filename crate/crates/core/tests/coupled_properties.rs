use pullin_core::analytic::osterberg_pull_in;
use pullin_core::coupled::{
    find_pull_in, solve_equilibrium, voltage_sweep, CouplingMode, SolverConfig, StructuralMode,
};
use pullin_core::electrostatics::LoadModelConfig;
use pullin_core::specimen::{builtin_specimen, DimensionSource, Specimen};

fn measured(id: &str) -> Specimen {
    builtin_specimen(id, DimensionSource::Measured).unwrap()
}

fn plate(structural: StructuralMode) -> SolverConfig {
    SolverConfig {
        structural,
        load: LoadModelConfig::parallel_plate(0.0),
        ..SolverConfig::default()
    }
}

#[test]
fn sweep_is_increasing_and_convex_below_pull_in() {
    let s = measured("ST1-4");
    let vmax = 0.9 * osterberg_pull_in(&s).voltage;
    let r = voltage_sweep(&s, vmax, 12, &plate(StructuralMode::Nonlinear)).unwrap();
    assert!(r.points.iter().all(|p| p.converged));
    assert!(r.pull_in.is_none());
    let tips: Vec<f64> = std::iter::once(0.0).chain(r.points.iter().map(|p| p.tip_displacement)).collect();
    for w in tips.windows(3) {
        assert!(w[1] > w[0] && w[2] > w[1]);
        assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9, "second difference {}", w[2] - 2.0 * w[1] + w[0]);
    }
}

#[test]
fn warm_starts_do_not_move_fixed_points() {
    let s = measured("ST1-1");
    let cfg = plate(StructuralMode::Nonlinear);
    let vmax = 0.85 * osterberg_pull_in(&s).voltage;
    let coarse = voltage_sweep(&s, vmax, 5, &cfg).unwrap();
    let fine = voltage_sweep(&s, vmax, 10, &cfg).unwrap();
    for (k, p) in coarse.points.iter().enumerate() {
        let q = &fine.points[2 * k + 1];
        assert_eq!(q.voltage, p.voltage);
        let rel = (p.tip_displacement - q.tip_displacement).abs() / q.tip_displacement;
        assert!(rel < 1e-6, "{} V: {rel:e}", p.voltage);
    }
}

#[test]
fn field_sweep_on_st1_1_reaches_pull_in_before_200_volts() {
    let s = measured("ST1-1");
    let r = voltage_sweep(&s, 200.0, 10, &SolverConfig::default()).unwrap();
    let last = r.converged().last().unwrap();
    assert!(last.voltage < 200.0);
    assert!(!r.points.last().unwrap().converged);
    let p = r.pull_in.unwrap();
    assert!(p.pull_in_voltage < 200.0 && p.pull_in_voltage > last.voltage);
}

#[test]
fn converged_points_precede_the_failure() {
    let s = measured("ST1-2");
    let r = voltage_sweep(&s, 1.5 * osterberg_pull_in(&s).voltage, 6, &plate(StructuralMode::Linear)).unwrap();
    let first_failure = r.points.iter().position(|p| !p.converged).unwrap();
    assert_eq!(first_failure, r.points.len() - 1);
    assert!(r.points.windows(2).all(|w| w[1].voltage > w[0].voltage));
}

#[test]
fn nonlinear_never_exceeds_linear() {
    let s = measured("ST1-8");
    let vmax = 0.95 * osterberg_pull_in(&s).voltage;
    let lin = voltage_sweep(&s, vmax, 6, &plate(StructuralMode::Linear)).unwrap();
    let non = voltage_sweep(&s, vmax, 6, &plate(StructuralMode::Nonlinear)).unwrap();
    for (a, b) in lin.converged().zip(non.converged()) {
        assert_eq!(a.voltage, b.voltage);
        assert!(b.tip_displacement <= a.tip_displacement);
    }
}

// Dense cold-start scan of the same model around the bracket.
fn scan_last_converged(s: &Specimen, cfg: &SolverConfig, from: f64, to: f64) -> f64 {
    let mut last = from;
    let mut v = from;
    while v <= to {
        if solve_equilibrium(s, v, cfg).unwrap().converged {
            last = v;
        } else {
            break;
        }
        v += 0.05;
    }
    last
}

#[test]
fn plate_pull_in_matches_brute_force_scan() {
    for id in ["ST1-1", "ST1-4"] {
        let s = measured(id);
        let cfg = SolverConfig {
            coupling: CouplingMode::Monolithic,
            ..plate(StructuralMode::Nonlinear)
        };
        let p = find_pull_in(&s, &cfg).unwrap();
        assert!(p.last_stable_tip > 0.3 * s.gap() && p.last_stable_tip < 0.6 * s.gap(), "{id}");
        let scanned = scan_last_converged(&s, &cfg, p.bracket_low - 1.0, p.bracket_high + 1.0);
        assert!(scanned >= p.bracket_low - 0.05 - 1e-9 && scanned < p.bracket_high, "{id}: scan {scanned}, {p:?}");
        assert!(solve_equilibrium(&s, p.bracket_low, &cfg).unwrap().converged);
        assert!(!solve_equilibrium(&s, p.bracket_high, &cfg).unwrap().converged);
    }
}

#[test]
fn staggered_plate_pull_in_bracket_replays() {
    let s = measured("ST1-4");
    let cfg = plate(StructuralMode::Nonlinear);
    let p = find_pull_in(&s, &cfg).unwrap();
    assert!(p.bracket_high - p.bracket_low <= cfg.bracket_tolerance);
    assert!(p.last_stable_tip > 0.3 * s.gap() && p.last_stable_tip < 0.6 * s.gap());
    assert!(solve_equilibrium(&s, p.bracket_low, &cfg).unwrap().converged);
    assert!(!solve_equilibrium(&s, p.bracket_high, &cfg).unwrap().converged);
}

#[test]
fn fringing_lowers_pull_in() {
    let s = measured("ST1-2");
    let mut cfg = plate(StructuralMode::Linear);
    cfg.coupling = CouplingMode::Monolithic;
    let bare = find_pull_in(&s, &cfg).unwrap();
    cfg.load = LoadModelConfig::parallel_plate(0.65);
    let fringe = find_pull_in(&s, &cfg).unwrap();
    assert!(fringe.pull_in_voltage < bare.pull_in_voltage);
}
