//! Specimen geometry, material data and aspect-ratio classification.
//!
//! Orientation convention: the ST1 beams bend in the wafer plane. `thickness_t`
//! is the in-plane dimension along which the beam bends, `width_w` is the
//! out-of-plane depth of the beam and of the electrodes, so the bending second
//! moment of area is `w * t^3 / 12`. All lengths are stored in metres.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permittivity used for the air gap, in F/m.
pub const EPSILON_0: f64 = 8.854e-12;

const UM: f64 = 1e-6;
const GPA: f64 = 1e9;

/// Linear elastic material.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    young_modulus: f64,
    poisson_ratio: f64,
    label: String,
}

impl Material {
    pub fn new(young_modulus: f64, poisson_ratio: f64, label: impl Into<String>) -> Result<Self> {
        if !(young_modulus.is_finite() && young_modulus > 0.0) {
            return Err(Error::InvalidMaterial {
                field: "young_modulus",
                reason: format!("must be positive, got {young_modulus}"),
            });
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(Error::InvalidMaterial {
                field: "poisson_ratio",
                reason: format!("must lie in [0, 0.5), got {poisson_ratio}"),
            });
        }
        Ok(Self {
            young_modulus,
            poisson_ratio,
            label: label.into(),
        })
    }

    /// Doped epitaxial polysilicon of the ST1 set (E = 166 GPa, nu = 0.23).
    pub fn polysilicon() -> Self {
        Self {
            young_modulus: 166.0 * GPA,
            poisson_ratio: 0.23,
            label: "epitaxial polysilicon".to_string(),
        }
    }

    /// Young's modulus in Pa.
    pub fn young_modulus(&self) -> f64 {
        self.young_modulus
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.poisson_ratio
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionSource {
    Nominal,
    Measured,
}

impl fmt::Display for DimensionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimensionSource::Nominal => f.write_str("nominal"),
            DimensionSource::Measured => f.write_str("measured"),
        }
    }
}

/// Half-width of the measured spread of a dimension, in metres.
///
/// Metadata only; solvers use the central values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tolerances {
    pub length: Option<f64>,
    pub thickness: Option<f64>,
    pub gap: Option<f64>,
}

/// One microcantilever facing its counter-electrode.
#[derive(Debug, Clone, PartialEq)]
pub struct Specimen {
    id: String,
    length_l: f64,
    width_w: f64,
    thickness_t: f64,
    gap_g: f64,
    material: Material,
    dimension_source: DimensionSource,
    tolerances: Tolerances,
}

impl Specimen {
    /// Builds a specimen from SI dimensions, checking the cantilever invariants.
    pub fn new(
        id: impl Into<String>,
        length_l: f64,
        width_w: f64,
        thickness_t: f64,
        gap_g: f64,
        material: Material,
        dimension_source: DimensionSource,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |field: &'static str, reason: String| Error::InvalidSpecimen {
            id: id.clone(),
            field,
            reason,
        };
        for (field, value) in [
            ("length", length_l),
            ("width", width_w),
            ("thickness", thickness_t),
            ("gap", gap_g),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(field, format!("must be positive, got {value}")));
            }
        }
        if thickness_t >= length_l {
            return Err(invalid(
                "thickness",
                format!("must be smaller than the length ({thickness_t} >= {length_l})"),
            ));
        }
        if gap_g >= length_l {
            return Err(invalid(
                "gap",
                format!("must be smaller than the length ({gap_g} >= {length_l})"),
            ));
        }
        Ok(Self {
            id,
            length_l,
            width_w,
            thickness_t,
            gap_g,
            material,
            dimension_source,
            tolerances: Tolerances::default(),
        })
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    /// Same specimen with a different Young's modulus (Pa).
    pub fn with_young_modulus(&self, young_modulus: f64) -> Result<Self> {
        let material = Material::new(
            young_modulus,
            self.material.poisson_ratio,
            self.material.label.clone(),
        )?;
        Ok(Self {
            material,
            ..self.clone()
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Beam length along its axis (m).
    pub fn length(&self) -> f64 {
        self.length_l
    }

    /// Out-of-plane depth of beam and electrodes (m).
    pub fn width(&self) -> f64 {
        self.width_w
    }

    /// In-plane dimension in the bending direction (m).
    pub fn thickness(&self) -> f64 {
        self.thickness_t
    }

    /// Undeformed electrode separation (m).
    pub fn gap(&self) -> f64 {
        self.gap_g
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn dimension_source(&self) -> DimensionSource {
        self.dimension_source
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    /// Bending second moment of area `w t^3 / 12` (m^4).
    pub fn second_moment(&self) -> f64 {
        self.width_w * self.thickness_t.powi(3) / 12.0
    }

    /// Cross-section area `w t` (m^2).
    pub fn cross_section(&self) -> f64 {
        self.width_w * self.thickness_t
    }

    /// Bending rigidity `E w t^3 / 12` (N m^2).
    pub fn bending_rigidity(&self) -> f64 {
        self.material.young_modulus * self.second_moment()
    }
}

/// Dimensionless geometry quotients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AspectRatios {
    /// w / l
    pub r1: f64,
    /// g / l
    pub r2: f64,
    /// t / l
    pub r3: f64,
    /// t / w
    pub r4: f64,
}

impl AspectRatios {
    /// Ratios of raw dimensions; no cantilever-regime check is applied.
    pub fn from_dimensions(length: f64, width: f64, thickness: f64, gap: f64) -> Self {
        Self {
            r1: width / length,
            r2: gap / length,
            r3: thickness / length,
            r4: thickness / width,
        }
    }
}

pub fn aspect_ratios(spec: &Specimen) -> AspectRatios {
    AspectRatios::from_dimensions(spec.length_l, spec.width_w, spec.thickness_t, spec.gap_g)
}

/// Modelling warnings derived from the aspect ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BehaviourFlags {
    /// Wide beam: a plate model may be required.
    pub plate_model_warning: bool,
    /// Large gap relative to length: geometric nonlinearity expected.
    pub large_displacement_warning: bool,
    /// Slender, compliant beam.
    pub high_compliance: bool,
}

pub const PLATE_MODEL_R1: f64 = 0.10;
pub const LARGE_DISPLACEMENT_R2: f64 = 0.15;
pub const HIGH_COMPLIANCE_R3: f64 = 0.005;

pub fn classify(ratios: &AspectRatios) -> BehaviourFlags {
    BehaviourFlags {
        plate_model_warning: ratios.r1 >= PLATE_MODEL_R1,
        large_displacement_warning: ratios.r2 >= LARGE_DISPLACEMENT_R2,
        high_compliance: ratios.r3 <= HIGH_COMPLIANCE_R3,
    }
}

struct Layout {
    id: &'static str,
    nominal: [f64; 4],
    measured: [f64; 4],
    // length, thickness, gap
    tolerance: [f64; 3],
}

// l, w, t, g in micrometres.
const ST1: [Layout; 8] = [
    Layout { id: "ST1-1", nominal: [100.0, 15.0, 2.0, 5.0], measured: [101.0, 15.0, 1.8, 5.0], tolerance: [0.1, 0.02, 0.3] },
    Layout { id: "ST1-2", nominal: [100.0, 15.0, 2.0, 10.0], measured: [101.0, 15.0, 1.8, 10.0], tolerance: [0.1, 0.02, 0.3] },
    Layout { id: "ST1-3", nominal: [100.0, 15.0, 2.0, 20.0], measured: [101.0, 15.0, 1.8, 20.1], tolerance: [0.1, 0.02, 0.3] },
    Layout { id: "ST1-4", nominal: [200.0, 15.0, 2.0, 10.0], measured: [205.0, 15.0, 1.9, 10.0], tolerance: [0.2, 0.02, 0.3] },
    Layout { id: "ST1-5", nominal: [200.0, 15.0, 2.0, 20.0], measured: [205.0, 15.0, 1.9, 20.0], tolerance: [0.2, 0.02, 0.3] },
    Layout { id: "ST1-6", nominal: [800.0, 15.0, 2.0, 40.0], measured: [805.0, 15.0, 2.7, 39.6], tolerance: [0.5, 0.04, 0.3] },
    Layout { id: "ST1-7", nominal: [800.0, 15.0, 2.0, 200.0], measured: [805.0, 15.0, 2.7, 200.0], tolerance: [0.5, 0.04, 0.5] },
    Layout { id: "ST1-8", nominal: [800.0, 15.0, 2.0, 400.0], measured: [805.0, 15.0, 2.7, 400.0], tolerance: [0.5, 0.04, 0.5] },
];

fn from_micrometres(
    id: &str,
    [l, w, t, g]: [f64; 4],
    material: Material,
    source: DimensionSource,
) -> Result<Specimen> {
    Specimen::new(id, l * UM, w * UM, t * UM, g * UM, material, source)
}

/// The ST1 set: eight nominal layouts followed by their eight measured variants.
pub fn builtin_catalog() -> Vec<Specimen> {
    let nominal = ST1.iter().map(|layout| {
        from_micrometres(layout.id, layout.nominal, Material::polysilicon(), DimensionSource::Nominal)
    });
    let measured = ST1.iter().map(|layout| {
        let [l, t, g] = layout.tolerance;
        from_micrometres(layout.id, layout.measured, Material::polysilicon(), DimensionSource::Measured).map(
            |s| {
                s.with_tolerances(Tolerances {
                    length: Some(l * UM),
                    thickness: Some(t * UM),
                    gap: Some(g * UM),
                })
            },
        )
    });
    nominal
        .chain(measured)
        .collect::<Result<Vec<_>>>()
        .expect("builtin catalog satisfies the specimen invariants")
}

/// Looks up a builtin specimen by id and dimension source.
pub fn builtin_specimen(id: &str, source: DimensionSource) -> Option<Specimen> {
    builtin_catalog()
        .into_iter()
        .find(|s| s.id == id && s.dimension_source == source)
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecimenFile<R> {
    specimens: Vec<R>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: Option<String>,
    length_um: Option<f64>,
    width_um: Option<f64>,
    thickness_um: Option<f64>,
    gap_um: Option<f64>,
    young_modulus_gpa: Option<f64>,
    poisson_ratio: Option<f64>,
    dimension_source: Option<DimensionSource>,
    #[serde(default)]
    length_tol_um: Option<f64>,
    #[serde(default)]
    thickness_tol_um: Option<f64>,
    #[serde(default)]
    gap_tol_um: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Record<'a> {
    id: &'a str,
    length_um: f64,
    width_um: f64,
    thickness_um: f64,
    gap_um: f64,
    young_modulus_gpa: f64,
    poisson_ratio: f64,
    dimension_source: DimensionSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    length_tol_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thickness_tol_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_tol_um: Option<f64>,
}

fn require<T>(value: Option<T>, index: usize, field: &'static str, key: &'static str) -> Result<T> {
    value.ok_or(Error::MissingField { index, field, key })
}

// Trims conversion noise so that values survive a save/load cycle bit-exactly.
fn to_unit(value: f64, unit: f64) -> f64 {
    ((value / unit) * 1e9).round() / 1e9
}

/// Parses the JSON specimen document.
pub fn parse_specimens(text: &str) -> Result<Vec<Specimen>> {
    let file: SpecimenFile<RawRecord> = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.specimens
        .into_iter()
        .enumerate()
        .map(|(index, raw)| {
            let id = require(raw.id, index, "id", "id")?;
            let l = require(raw.length_um, index, "length_l", "length_um")?;
            let w = require(raw.width_um, index, "width_w", "width_um")?;
            let t = require(raw.thickness_um, index, "thickness_t", "thickness_um")?;
            let g = require(raw.gap_um, index, "gap_g", "gap_um")?;
            let e = require(raw.young_modulus_gpa, index, "young_modulus", "young_modulus_gpa")?;
            let nu = require(raw.poisson_ratio, index, "poisson_ratio", "poisson_ratio")?;
            let source = require(raw.dimension_source, index, "dimension_source", "dimension_source")?;
            let material = Material::new(e * GPA, nu, Material::polysilicon().label)?;
            let tolerances = Tolerances {
                length: raw.length_tol_um.map(|v| v * UM),
                thickness: raw.thickness_tol_um.map(|v| v * UM),
                gap: raw.gap_tol_um.map(|v| v * UM),
            };
            Ok(from_micrometres(&id, [l, w, t, g], material, source)?.with_tolerances(tolerances))
        })
        .collect()
}

pub fn load_specimens(path: impl AsRef<Path>) -> Result<Vec<Specimen>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_specimens(&text)
}

/// Serializes specimens in the same document format `parse_specimens` reads.
pub fn specimens_to_json(specimens: &[Specimen]) -> String {
    let records = specimens
        .iter()
        .map(|s| Record {
            id: &s.id,
            length_um: to_unit(s.length_l, UM),
            width_um: to_unit(s.width_w, UM),
            thickness_um: to_unit(s.thickness_t, UM),
            gap_um: to_unit(s.gap_g, UM),
            young_modulus_gpa: to_unit(s.material.young_modulus, GPA),
            poisson_ratio: s.material.poisson_ratio,
            dimension_source: s.dimension_source,
            length_tol_um: s.tolerances.length.map(|v| to_unit(v, UM)),
            thickness_tol_um: s.tolerances.thickness.map(|v| to_unit(v, UM)),
            gap_tol_um: s.tolerances.gap.map(|v| to_unit(v, UM)),
        })
        .collect();
    serde_json::to_string_pretty(&SpecimenFile { specimens: records })
        .expect("specimen records always serialize")
}

pub fn save_specimens(path: impl AsRef<Path>, specimens: &[Specimen]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, specimens_to_json(specimens)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measured(id: &str) -> Specimen {
        builtin_specimen(id, DimensionSource::Measured).unwrap()
    }

    #[test]
    fn catalog_has_sixteen_entries() {
        let cat = builtin_catalog();
        assert_eq!(cat.len(), 16);
        assert_eq!(cat.iter().filter(|s| s.dimension_source() == DimensionSource::Nominal).count(), 8);
    }

    #[test]
    fn st1_1_nominal_dimensions() {
        let s = builtin_specimen("ST1-1", DimensionSource::Nominal).unwrap();
        assert_eq!(s.length(), 100.0 * UM);
        assert_eq!(s.width(), 15.0 * UM);
        assert_eq!(s.thickness(), 2.0 * UM);
        assert_eq!(s.gap(), 5.0 * UM);
        assert_eq!(s.material().young_modulus(), 166e9);
        assert_eq!(s.material().poisson_ratio(), 0.23);
    }

    #[test]
    fn st1_6_measured_is_thicker() {
        let nominal = builtin_specimen("ST1-6", DimensionSource::Nominal).unwrap();
        assert_eq!(measured("ST1-6").thickness(), 2.7 * UM);
        assert_eq!(nominal.thickness(), 2.0 * UM);
        assert_eq!(measured("ST1-6").tolerances().thickness, Some(0.04 * UM));
    }

    #[test]
    fn st1_1_ratios() {
        let s = builtin_specimen("ST1-1", DimensionSource::Nominal).unwrap();
        let r = aspect_ratios(&s);
        for (got, want) in [(r.r1, 0.150), (r.r2, 0.050), (r.r3, 0.020), (r.r4, 0.133)] {
            assert!((got - want).abs() <= 0.001, "{got} vs {want}");
        }
    }

    #[test]
    fn degenerate_square_ratios_are_unity() {
        let r = AspectRatios::from_dimensions(3e-6, 3e-6, 3e-6, 3e-6);
        assert_eq!((r.r1, r.r2, r.r3, r.r4), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn st1_8_measured_gap_ratio() {
        assert!((aspect_ratios(&measured("ST1-8")).r2 - 0.497).abs() < 0.0005);
    }

    #[test]
    fn classification_examples() {
        assert!(classify(&aspect_ratios(&measured("ST1-3"))).large_displacement_warning);
        assert!(classify(&aspect_ratios(&measured("ST1-6"))).high_compliance);
        let tiny = AspectRatios { r1: 1e-6, r2: 1e-6, r3: 1e-6, r4: 1e-6 };
        assert_eq!(
            classify(&tiny),
            BehaviourFlags {
                plate_model_warning: false,
                large_displacement_warning: false,
                high_compliance: true
            }
        );
    }

    #[test]
    fn rejects_zero_thickness() {
        let err = Specimen::new("x", 1e-4, 1e-5, 0.0, 1e-6, Material::polysilicon(), DimensionSource::Nominal)
            .unwrap_err();
        assert!(err.to_string().contains("thickness"), "{err}");
    }

    #[test]
    fn rejects_gap_longer_than_beam() {
        let err = Specimen::new("x", 1e-5, 1e-5, 1e-6, 2e-5, Material::polysilicon(), DimensionSource::Nominal)
            .unwrap_err();
        assert!(err.to_string().contains("gap"), "{err}");
    }

    #[test]
    fn material_invariants() {
        assert!(Material::new(0.0, 0.2, "x").is_err());
        assert!(Material::new(1e9, 0.5, "x").is_err());
        assert!(Material::new(1e9, -0.1, "x").is_err());
        assert!(Material::new(1e9, 0.0, "x").is_ok());
    }

    #[test]
    fn missing_gap_names_field() {
        let text = r#"{"specimens":[{"id":"a","length_um":100,"width_um":15,"thickness_um":2,
            "young_modulus_gpa":166,"poisson_ratio":0.23,"dimension_source":"nominal"}]}"#;
        let err = parse_specimens(text).unwrap_err();
        assert!(matches!(err, Error::MissingField { field: "gap_g", .. }));
        assert!(err.to_string().contains("gap_g"));
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "{\"specimens\": [\n  {\"id\": \"a\",\n   \"length_um\": oops}]}";
        match parse_specimens(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_thickness_in_file_is_invariant_violation() {
        let text = r#"{"specimens":[{"id":"a","length_um":100,"width_um":15,"thickness_um":0,"gap_um":5,
            "young_modulus_gpa":166,"poisson_ratio":0.23,"dimension_source":"nominal"}]}"#;
        let err = parse_specimens(text).unwrap_err();
        assert!(matches!(err, Error::InvalidSpecimen { field: "thickness", .. }), "{err}");
    }

    #[test]
    fn catalog_round_trips_through_json() {
        let cat = builtin_catalog();
        assert_eq!(parse_specimens(&specimens_to_json(&cat)).unwrap(), cat);
    }
}
