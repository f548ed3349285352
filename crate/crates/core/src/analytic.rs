//! Closed-form pull-in estimates.

use crate::error::{Error, Result};
use crate::specimen::{Specimen, EPSILON_0};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Osterberg,
    Lumped,
    Fem,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullInEstimate {
    /// Pull-in voltage (V).
    pub voltage: f64,
    /// Tip displacement at pull-in (m).
    pub displacement: f64,
    pub method: EstimateMethod,
}

/// Cantilever pull-in after Osterberg and Senturia, with its width-fringing term.
///
/// `V = sqrt(0.28 E g^3 t^3 / (eps0 l^4 (1 + 0.42 g / w)))` and
/// `v = 3/4 eps0 l^4 V^2 / (E g^2 t^3)`.
pub fn osterberg_pull_in(spec: &Specimen) -> PullInEstimate {
    let (l, w, t, g) = (spec.length(), spec.width(), spec.thickness(), spec.gap());
    let e = spec.material().young_modulus();
    let fringing = 1.0 + 0.42 * g / w;
    let voltage = (0.28 * g.powi(3) * t.powi(3) * e / (EPSILON_0 * l.powi(4) * fringing)).sqrt();
    let displacement = 0.75 * EPSILON_0 * l.powi(4) / (e * g * g * t.powi(3)) * voltage * voltage;
    PullInEstimate {
        voltage,
        displacement,
        method: EstimateMethod::Osterberg,
    }
}

/// The Osterberg pull-in displacement after eliminating the voltage: `0.21 g / (1 + 0.42 g / w)`.
pub fn osterberg_displacement_identity(spec: &Specimen) -> f64 {
    displacement_identity(spec.gap(), spec.width())
}

pub(crate) fn displacement_identity(gap: f64, width: f64) -> f64 {
    0.21 * gap / (1.0 + 0.42 * gap / width)
}

/// One-degree-of-freedom parallel-plate actuator: spring `k`, plate area `A`, gap `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedActuator {
    stiffness_k: f64,
    plate_area: f64,
    gap_g: f64,
}

impl LumpedActuator {
    pub fn new(stiffness_k: f64, plate_area: f64, gap_g: f64) -> Result<Self> {
        for (name, v) in [("stiffness", stiffness_k), ("plate area", plate_area), ("gap", gap_g)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("lumped actuator {name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            stiffness_k,
            plate_area,
            gap_g,
        })
    }

    pub fn stiffness(&self) -> f64 {
        self.stiffness_k
    }

    pub fn plate_area(&self) -> f64 {
        self.plate_area
    }

    pub fn gap(&self) -> f64 {
        self.gap_g
    }

    /// Voltage holding the plate in equilibrium at displacement `x` (0 < x < g).
    pub fn equilibrium_voltage(&self, x: f64) -> f64 {
        (2.0 * self.stiffness_k * x * (self.gap_g - x).powi(2) / (EPSILON_0 * self.plate_area)).sqrt()
    }
}

/// Classical parallel-plate pull-in: `x = g/3`, `V = sqrt(8 k g^3 / (27 eps0 A))`.
pub fn lumped_pull_in(act: &LumpedActuator) -> PullInEstimate {
    let g = act.gap_g;
    PullInEstimate {
        voltage: (8.0 * act.stiffness_k * g.powi(3) / (27.0 * EPSILON_0 * act.plate_area)).sqrt(),
        displacement: g / 3.0,
        method: EstimateMethod::Lumped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specimen::{builtin_specimen, DimensionSource};

    fn measured(id: &str) -> Specimen {
        builtin_specimen(id, DimensionSource::Measured).unwrap()
    }

    // Dense scan of the equilibrium voltage curve; the maximum is the pull-in point.
    fn scan_max(act: &LumpedActuator, n: usize) -> (f64, f64) {
        (1..n)
            .map(|i| {
                let x = act.gap() * i as f64 / n as f64;
                (x, act.equilibrium_voltage(x))
            })
            .fold((0.0, 0.0), |best, p| if p.1 > best.1 { p } else { best })
    }

    #[test]
    fn st1_1_measured() {
        let est = osterberg_pull_in(&measured("ST1-1"));
        assert!((est.voltage - 180.0).abs() < 1.0, "{}", est.voltage);
        assert!((est.displacement * 1e6 - 0.92).abs() < 0.01);
        assert_eq!(est.method, EstimateMethod::Osterberg);
    }

    #[test]
    fn st1_4_measured() {
        let est = osterberg_pull_in(&measured("ST1-4"));
        assert!((est.voltage - 126.0).abs() < 1.26, "{}", est.voltage);
        assert!((est.displacement * 1e6 - 1.64).abs() < 0.01);
    }

    #[test]
    fn quadrupled_modulus_doubles_voltage() {
        let s = measured("ST1-1");
        let stiff = s.with_young_modulus(4.0 * s.material().young_modulus()).unwrap();
        let (a, b) = (osterberg_pull_in(&s), osterberg_pull_in(&stiff));
        assert!((b.voltage / a.voltage - 2.0).abs() < 1e-12);
        assert!((b.displacement / a.displacement - 1.0).abs() < 1e-12);
    }

    #[test]
    fn displacement_identity_values() {
        let v = osterberg_displacement_identity(&measured("ST1-1"));
        assert!((v * 1e6 - 0.21 * 5.0 / (1.0 + 0.42 * 5.0 / 15.0)).abs() < 1e-12);
        assert!((v * 1e6 - 0.921).abs() < 1e-3);
        assert_eq!(displacement_identity(0.0, 15e-6), 0.0);
        assert!((displacement_identity(5e-6, 1e300) - 0.21 * 5e-6).abs() < 1e-20);
    }

    #[test]
    fn lumped_matches_scan() {
        let act = LumpedActuator::new(1.0, 1e-9, 1e-6).unwrap();
        let est = lumped_pull_in(&act);
        let (x, v) = scan_max(&act, 1_000_000);
        assert_eq!(est.displacement, act.gap() / 3.0);
        assert!((x - act.gap() / 3.0).abs() < 2e-6 * act.gap());
        assert!((est.voltage - v).abs() / v < 1e-6);
        assert!((est.voltage - 5.79).abs() < 0.01, "{}", est.voltage);
    }

    #[test]
    fn lumped_voltage_scales_with_sqrt_stiffness() {
        let a = lumped_pull_in(&LumpedActuator::new(1.0, 1e-9, 1e-6).unwrap());
        let b = lumped_pull_in(&LumpedActuator::new(4.0, 1e-9, 1e-6).unwrap());
        assert!((b.voltage / a.voltage - 2.0).abs() < 1e-12);
        assert_eq!(a.displacement, b.displacement);
    }

    #[test]
    fn lumped_rejects_bad_parameters() {
        assert!(LumpedActuator::new(0.0, 1.0, 1.0).is_err());
        assert!(LumpedActuator::new(1.0, -1.0, 1.0).is_err());
    }
}
