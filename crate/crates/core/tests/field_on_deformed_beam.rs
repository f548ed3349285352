use pullin_core::beam::{build_mesh, solve_linear, DeflectionField, UniformLoad};
use pullin_core::electrostatics::{maxwell_load, plate_load, solve_field2d, LoadModelConfig};
use pullin_core::beam::DistributedLoad;
use pullin_core::specimen::{builtin_specimen, DimensionSource};

#[test]
fn deflection_towards_the_electrode_raises_the_load() {
    let s = builtin_specimen("ST1-4", DimensionSource::Measured).unwrap();
    let mesh = build_mesh(&s, 40).unwrap();
    let flat = DeflectionField::zero(&mesh);
    let unit_tip = solve_linear(&mesh, &UniformLoad(1.0)).unwrap();
    let bent = unit_tip.scaled(0.3 * s.gap() / unit_tip.tip_displacement());
    let cfg = LoadModelConfig::default();
    let q0 = maxwell_load(&solve_field2d(&s, &flat, 100.0, &cfg).unwrap(), &s);
    let q1 = maxwell_load(&solve_field2d(&s, &bent, 100.0, &cfg).unwrap(), &s);
    assert!(q1.total_force() > q0.total_force());
    // away from the tip the field model follows the local plate estimate
    let plate = plate_load(&s, &bent, 100.0, 0.0).unwrap();
    for x in [0.2, 0.5, 0.8].map(|f| f * s.length()) {
        let rel = (q1.intensity(x) - plate.intensity(x)).abs() / plate.intensity(x);
        assert!(rel < 0.02, "x = {x}: {rel}");
    }
    assert!(q1.intensity(s.length()) > plate.intensity(s.length()));
}
