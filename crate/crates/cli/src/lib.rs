//! `pullin` command-line front end.
//!
//! Units at this boundary are micrometres, volts and GPa; everything below it is SI.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pullin_core::analytic::osterberg_pull_in;
use pullin_core::coupled::{
    find_pull_in, modulus_band_sweep, solve_equilibrium, voltage_sweep, CouplingMode, PullInResult,
    SolverConfig, StructuralMode, SweepResult,
};
use pullin_core::electrostatics::{solve_field2d, LoadKind, LoadModelConfig, DEFAULT_FRINGING};
use pullin_core::specimen::{aspect_ratios, builtin_catalog, classify, load_specimens, DimensionSource, Specimen};
use pullin_core::Error;

const UM: f64 = 1e6;
const GPA: f64 = 1e9;

#[derive(Parser, Debug)]
#[command(name = "pullin", version, about = "Static pull-in analysis of electrostatic microcantilevers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List specimens.
    Catalog(Options),
    /// Aspect ratios and modelling warnings.
    Ratios(Options),
    /// Closed-form pull-in estimate.
    Analytic(Options),
    /// Tip displacement against voltage up to pull-in.
    Sweep(Options),
    /// Finite element pull-in voltage.
    Pullin(Options),
    /// Sweeps at the two ends of a Young's modulus band.
    Band(Options),
}

#[derive(Args, Debug, Clone)]
struct Options {
    /// Specimen identifier, e.g. ST1-1.
    #[arg(long)]
    id: Option<String>,
    /// Specimen JSON file instead of the built-in catalog.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Dimension set (built-in catalog default: measured).
    #[arg(long, value_enum)]
    dims: Option<Dims>,
    #[arg(long, value_enum, default_value_t = Model::Nonlinear)]
    model: Model,
    #[arg(long, value_enum, default_value_t = Load::Field2d)]
    load: Load,
    #[arg(long, value_enum, default_value_t = Coupling::Staggered)]
    coupling: Coupling,
    /// Young's modulus in GPa; two comma-separated values for `band`.
    #[arg(long = "E", value_delimiter = ',', value_name = "GPa")]
    young: Vec<f64>,
    /// Highest sweep voltage (default: 1.25 times the closed-form estimate).
    #[arg(long, value_name = "V")]
    vmax: Option<f64>,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    /// Fringing coefficient of the parallel-plate load.
    #[arg(long, default_value_t = DEFAULT_FRINGING)]
    fringing: f64,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the potential of the last stable equilibrium (field2d load) as CSV.
    #[arg(long, value_name = "path")]
    dump_field: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Dims {
    Nominal,
    Measured,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Model {
    Linear,
    Nonlinear,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Load {
    Plate,
    Field2d,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Coupling {
    Staggered,
    Monolithic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Solver(String),
    File(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Solver(_) => 3,
            Failure::File(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Solver(m) | Failure::File(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io { .. } | Error::Parse { .. } | Error::MissingField { .. } => Failure::File(msg),
            Error::NoPullIn { .. } | Error::NonConvergence { .. } | Error::GapClosure { .. } | Error::Singular { .. } => {
                Failure::Solver(msg)
            }
            Error::InvalidSpecimen { .. } | Error::InvalidMaterial { .. } | Error::MeshTooCoarse { .. } | Error::InvalidConfig(_) => {
                Failure::Usage(msg)
            }
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

/// Runs the CLI on `argv` (program name first) and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("pullin: {}", f.message());
            f.code()
        }
    }
}

fn execute(command: Command) -> Outcome {
    let (opts, text) = match command {
        Command::Catalog(o) => {
            let t = catalog(&o)?;
            (o, t)
        }
        Command::Ratios(o) => {
            let t = ratios(&o)?;
            (o, t)
        }
        Command::Analytic(o) => {
            let t = analytic(&o)?;
            (o, t)
        }
        Command::Sweep(o) => {
            let t = sweep(&o)?;
            (o, t)
        }
        Command::Pullin(o) => {
            let t = pullin(&o)?;
            (o, t)
        }
        Command::Band(o) => {
            let t = band(&o)?;
            (o, t)
        }
    };
    write_output(opts.out.as_deref(), &text)
}

fn write_output(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => File::create(p)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .map_err(|e| Failure::File(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::File(format!("cannot write to standard output: {e}"))),
    }
}

fn candidates(opts: &Options, default_dims: Option<Dims>) -> Outcome<Vec<Specimen>> {
    let (all, dims) = match &opts.file {
        Some(path) => (load_specimens(path)?, opts.dims),
        None => (builtin_catalog(), opts.dims.or(default_dims)),
    };
    let wanted = dims.map(|d| match d {
        Dims::Nominal => DimensionSource::Nominal,
        Dims::Measured => DimensionSource::Measured,
    });
    Ok(all
        .into_iter()
        .filter(|s| wanted.is_none_or(|w| s.dimension_source() == w))
        .filter(|s| opts.id.as_deref().is_none_or(|id| s.id() == id))
        .collect())
}

fn select(opts: &Options) -> Outcome<Specimen> {
    let mut found = candidates(opts, Some(Dims::Measured))?;
    let spec = match (found.len(), &opts.id) {
        (1, _) => found.remove(0),
        (0, Some(id)) => return Err(Failure::Usage(format!("unknown specimen id '{id}'"))),
        (0, None) => return Err(Failure::Usage("no specimen matches the selection".into())),
        (_, Some(id)) => return Err(Failure::Usage(format!("specimen id '{id}' is ambiguous, use --dims"))),
        (_, None) => return Err(Failure::Usage("select a specimen with --id".into())),
    };
    match opts.young.as_slice() {
        [] => Ok(spec),
        [e] => Ok(spec.with_young_modulus(e * GPA)?),
        _ => Err(Failure::Usage("--E takes a single modulus for this command".into())),
    }
}

fn solver_config(opts: &Options) -> SolverConfig {
    let kind = match opts.load {
        Load::Plate => LoadKind::ParallelPlate,
        Load::Field2d => LoadKind::Field2d,
    };
    SolverConfig {
        structural: match opts.model {
            Model::Linear => StructuralMode::Linear,
            Model::Nonlinear => StructuralMode::Nonlinear,
        },
        coupling: match opts.coupling {
            Coupling::Staggered => CouplingMode::Staggered,
            Coupling::Monolithic => CouplingMode::Monolithic,
        },
        load: LoadModelConfig {
            kind,
            fringing: opts.fringing,
            ..LoadModelConfig::default()
        },
        ..SolverConfig::default()
    }
}

/// `x` rounded to six significant digits, in plain decimal notation.
pub fn six_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let text = format!("{x:.decimals$}");
    // rounding can carry into a new leading digit (9.999996 -> 10.00000)
    let reparsed: f64 = text.parse().unwrap_or(x);
    if reparsed.abs().log10().floor() as i32 > magnitude && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        text
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output is serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct CatalogRow<'a> {
    id: &'a str,
    dims: String,
    length_um: f64,
    width_um: f64,
    thickness_um: f64,
    gap_um: f64,
    young_modulus_gpa: f64,
    poisson_ratio: f64,
}

fn catalog(opts: &Options) -> Outcome<String> {
    let specs = candidates(opts, None)?;
    if specs.is_empty() {
        return Err(match &opts.id {
            Some(id) => Failure::Usage(format!("unknown specimen id '{id}'")),
            None => Failure::Usage("no specimen matches the selection".into()),
        });
    }
    let rows: Vec<CatalogRow> = specs
        .iter()
        .map(|s| CatalogRow {
            id: s.id(),
            dims: s.dimension_source().to_string(),
            length_um: round_um(s.length()),
            width_um: round_um(s.width()),
            thickness_um: round_um(s.thickness()),
            gap_um: round_um(s.gap()),
            young_modulus_gpa: s.material().young_modulus() / GPA,
            poisson_ratio: s.material().poisson_ratio(),
        })
        .collect();
    if opts.format == Format::Json {
        return Ok(json(&rows));
    }
    let mut out = String::from("id,dims,length_um,width_um,thickness_um,gap_um,young_modulus_GPa,poisson_ratio\n");
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.id, r.dims, r.length_um, r.width_um, r.thickness_um, r.gap_um, r.young_modulus_gpa, r.poisson_ratio
        );
    }
    Ok(out)
}

fn round_um(x: f64) -> f64 {
    (x * UM * 1e6).round() / 1e6
}

#[derive(Serialize)]
struct RatioReport<'a> {
    id: &'a str,
    dims: String,
    r1: f64,
    r2: f64,
    r3: f64,
    r4: f64,
    warnings: Vec<&'static str>,
}

fn ratios(opts: &Options) -> Outcome<String> {
    let spec = select(opts)?;
    let r = aspect_ratios(&spec);
    let flags = classify(&r);
    let mut warnings = Vec::new();
    if flags.plate_model_warning {
        warnings.push("wide beam: a plate model may be required");
    }
    if flags.large_displacement_warning {
        warnings.push("large displacement expected: use the nonlinear model");
    }
    if flags.high_compliance {
        warnings.push("high compliance: slender beam");
    }
    let three = |x: f64| (x * 1e3).round() / 1e3;
    let report = RatioReport {
        id: spec.id(),
        dims: spec.dimension_source().to_string(),
        r1: three(r.r1),
        r2: three(r.r2),
        r3: three(r.r3),
        r4: three(r.r4),
        warnings,
    };
    if opts.format == Format::Json {
        return Ok(json(&report));
    }
    let mut out = String::from("id,dims,r1,r2,r3,r4\n");
    let _ = writeln!(
        out,
        "{},{},{:.3},{:.3},{:.3},{:.3}",
        report.id, report.dims, r.r1, r.r2, r.r3, r.r4
    );
    for w in &report.warnings {
        let _ = writeln!(out, "# warning: {w}");
    }
    Ok(out)
}

#[derive(Serialize)]
struct AnalyticReport<'a> {
    id: &'a str,
    method: &'static str,
    #[serde(rename = "pull_in_voltage_V")]
    pull_in_voltage_v: f64,
    pull_in_displacement_um: f64,
}

fn analytic(opts: &Options) -> Outcome<String> {
    let spec = select(opts)?;
    let est = osterberg_pull_in(&spec);
    let (v, d) = (six_significant(est.voltage), six_significant(est.displacement * UM));
    if opts.format == Format::Json {
        return Ok(json(&AnalyticReport {
            id: spec.id(),
            method: "osterberg",
            pull_in_voltage_v: v.parse().unwrap_or(est.voltage),
            pull_in_displacement_um: d.parse().unwrap_or(est.displacement * UM),
        }));
    }
    Ok(format!("id,method,pull_in_V,pull_in_displacement_um\n{},osterberg,{v},{d}\n", spec.id()))
}

fn default_vmax(spec: &Specimen, opts: &Options) -> f64 {
    opts.vmax.unwrap_or_else(|| 1.25 * osterberg_pull_in(spec).voltage)
}

/// Writes a sweep as CSV: header, one row per point, optional `# pull_in_V=` trailer.
pub fn emit_sweep_csv<W: Write>(result: &SweepResult, mut out: W) -> io::Result<()> {
    writeln!(out, "voltage_V,tip_displacement_um,converged,iterations")?;
    for p in &result.points {
        writeln!(
            out,
            "{},{},{},{}",
            p.voltage,
            six_significant(p.tip_displacement * UM),
            p.converged,
            p.iterations
        )?;
    }
    if let Some(pull_in) = &result.pull_in {
        writeln!(out, "# pull_in_V={}", pull_in.pull_in_voltage)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonPoint {
    #[serde(rename = "voltage_V")]
    voltage_v: f64,
    tip_displacement_um: f64,
    converged: bool,
    iterations: usize,
}

#[derive(Serialize)]
struct JsonSweep<'a> {
    id: &'a str,
    young_modulus_gpa: f64,
    points: Vec<JsonPoint>,
    #[serde(rename = "pull_in_V")]
    pull_in_v: Option<f64>,
}

fn sweep_json<'a>(spec: &'a Specimen, result: &SweepResult) -> JsonSweep<'a> {
    JsonSweep {
        id: spec.id(),
        young_modulus_gpa: spec.material().young_modulus() / GPA,
        points: result
            .points
            .iter()
            .map(|p| JsonPoint {
                voltage_v: p.voltage,
                tip_displacement_um: six_significant(p.tip_displacement * UM).parse().unwrap_or(f64::NAN),
                converged: p.converged,
                iterations: p.iterations,
            })
            .collect(),
        pull_in_v: result.pull_in.map(|p| p.pull_in_voltage),
    }
}

fn dump_field(spec: &Specimen, voltage: f64, cfg: &SolverConfig, path: &Path) -> Outcome {
    let eq = solve_equilibrium(spec, voltage, cfg)?;
    if !eq.converged {
        return Err(Failure::Solver(format!("no stable equilibrium at {voltage} V to dump")));
    }
    let field = solve_field2d(spec, &eq.deflection, voltage, &cfg.load)?;
    File::create(path)
        .and_then(|f| field.write_csv(io::BufWriter::new(f)))
        .map_err(|e| Failure::File(format!("cannot write {}: {e}", path.display())))
}

fn check_dump(opts: &Options, cfg: &SolverConfig) -> Outcome {
    if opts.dump_field.is_some() && cfg.load.kind != LoadKind::Field2d {
        return Err(Failure::Usage("--dump-field requires --load field2d".into()));
    }
    Ok(())
}

fn sweep(opts: &Options) -> Outcome<String> {
    let spec = select(opts)?;
    let cfg = solver_config(opts);
    check_dump(opts, &cfg)?;
    let result = voltage_sweep(&spec, default_vmax(&spec, opts), opts.steps, &cfg)?;
    if let Some(path) = &opts.dump_field {
        let last = result
            .converged()
            .last()
            .map(|p| p.voltage)
            .ok_or_else(|| Failure::Solver("sweep has no converged point".into()))?;
        dump_field(&spec, last, &cfg, path)?;
    }
    if opts.format == Format::Json {
        return Ok(json(&sweep_json(&spec, &result)));
    }
    let mut buf = Vec::new();
    emit_sweep_csv(&result, &mut buf).expect("writing to memory");
    Ok(String::from_utf8(buf).expect("CSV is UTF-8"))
}

#[derive(Serialize)]
struct PullInReport<'a> {
    id: &'a str,
    #[serde(rename = "pull_in_V")]
    pull_in_v: f64,
    #[serde(rename = "bracket_low_V")]
    bracket_low_v: f64,
    #[serde(rename = "bracket_high_V")]
    bracket_high_v: f64,
    last_stable_tip_um: f64,
}

fn pullin(opts: &Options) -> Outcome<String> {
    let spec = select(opts)?;
    let cfg = solver_config(opts);
    check_dump(opts, &cfg)?;
    let p: PullInResult = find_pull_in(&spec, &cfg)?;
    if let Some(path) = &opts.dump_field {
        dump_field(&spec, p.bracket_low, &cfg, path)?;
    }
    let tip = six_significant(p.last_stable_tip * UM);
    if opts.format == Format::Json {
        return Ok(json(&PullInReport {
            id: spec.id(),
            pull_in_v: p.pull_in_voltage,
            bracket_low_v: p.bracket_low,
            bracket_high_v: p.bracket_high,
            last_stable_tip_um: tip.parse().unwrap_or(f64::NAN),
        }));
    }
    Ok(format!(
        "id,pull_in_V,bracket_low_V,bracket_high_V,last_stable_tip_um\n{},{},{},{},{tip}\n",
        spec.id(),
        p.pull_in_voltage,
        p.bracket_low,
        p.bracket_high
    ))
}

fn band(opts: &Options) -> Outcome<String> {
    let (e_low, e_high) = match opts.young.as_slice() {
        [] => (150.0, 166.0),
        [a, b] => (*a, *b),
        _ => return Err(Failure::Usage("band needs --E <low>,<high> in GPa".into())),
    };
    if opts.dump_field.is_some() {
        return Err(Failure::Usage("--dump-field is not available for band".into()));
    }
    let base = select(&Options {
        young: Vec::new(),
        ..opts.clone()
    })?;
    let cfg = solver_config(opts);
    let vmax = default_vmax(&base.with_young_modulus(e_high.max(e_low) * GPA)?, opts);
    let (low, high) = modulus_band_sweep(&base, e_low * GPA, e_high * GPA, vmax, opts.steps, &cfg)?;
    let curves = [(e_low, low), (e_high, high)];
    if opts.format == Format::Json {
        let specs: Vec<Specimen> = curves
            .iter()
            .map(|(e, _)| base.with_young_modulus(e * GPA))
            .collect::<Result<_, _>>()?;
        let sweeps: Vec<JsonSweep> = specs.iter().zip(&curves).map(|(s, (_, r))| sweep_json(s, r)).collect();
        return Ok(json(&sweeps));
    }
    let mut out = String::from("E_GPa,voltage_V,tip_displacement_um,converged,iterations\n");
    for (e, r) in &curves {
        for p in &r.points {
            let _ = writeln!(
                out,
                "{e},{},{},{},{}",
                p.voltage,
                six_significant(p.tip_displacement * UM),
                p.converged,
                p.iterations
            );
        }
    }
    for (e, r) in &curves {
        if let Some(p) = &r.pull_in {
            let _ = writeln!(out, "# E_GPa={e} pull_in_V={}", p.pull_in_voltage);
        }
    }
    Ok(out)
}
