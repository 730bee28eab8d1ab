//! Command-line experiment runner. Flags override an optional TOML file;
//! everything is validated before the first solve.
//!
//! Exit status: 0 when every verdict is pass or floor-limited, 1 on a failed
//! verdict or a solver error (embedded in the report), 2 on a configuration error.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_quadrature, make_surface, perturb_surface, ParametricSurface, Profile, Shape};
use crate::oracle::{ellipsoid_capacity, sphere_capacity, sphere_np_eigenvalue};
use crate::sensitivity::{fit_loglog, np_spectrum_check, run_expansion_studies, StudyKind, StudyOptions, Verdict};
use crate::solver::{far_field_coefficient, gauss_integral, with_threads, BoundarySolver, FAR_FIELD_MIN_DIAMETERS};
use crate::DensityVector;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_EPS: [f64; 3] = [0.02, 0.04, 0.08];
pub const DEFAULT_RESOLUTION: usize = 64;
/// Capacity errors below this (relative) count as converged to roundoff.
pub const ROUNDOFF: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "capsense", version, about = "Capacity of a smooth conductor and its shape-perturbation expansions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Equilibrium density and capacity, checked against the oracle and the far field.
    Capacity(CommonArgs),
    /// Exterior Dirichlet problem with data `--h`, checked by Green reciprocity.
    Dirichlet(CommonArgs),
    /// ε-sweep of one or more first-order expansions.
    Study(StudyArgs),
    /// Leading eigenvalues of the discrete NP operator K*.
    Spectrum(SpectrumArgs),
    /// Capacity over three or more resolutions.
    Converge(CommonArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// `sphere:R`, `ellipsoid:a,b,c` or `star:R,l,m,c[,...]`
    #[arg(long)]
    pub shape: Option<String>,
    /// Perturbation profile (boundary data for `dirichlet`), e.g. `one`, `Y20`, `z`, `bump:0,0,1,0.3`
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub resolution: Option<Vec<usize>>,
    /// Companion resolution for the discretization floor of a study (0 disables it)
    #[arg(long)]
    pub floor_resolution: Option<usize>,
    /// Far-field sample radius (at least 50 diameters)
    #[arg(long, allow_negative_numbers = true)]
    pub radius: Option<f64>,
    /// JSON report path; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores); defaults to $CAPSENSE_THREADS
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write each table as `<out stem>.<table>.csv`
    #[arg(long)]
    pub csv: bool,
    /// Add wall-clock timings to the report
    #[arg(long)]
    pub timings: bool,
    /// TOML file with any of the above; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub kind: Option<Vec<StudyKind>>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub count: Option<usize>,
}

/// The config file: the same keys as the flags, plus `[tolerances]`.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    shape: Option<String>,
    h: Option<String>,
    eps: Option<Vec<f64>>,
    resolution: Option<Vec<usize>>,
    floor_resolution: Option<usize>,
    radius: Option<f64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    csv: Option<bool>,
    timings: Option<bool>,
    kind: Option<Vec<StudyKind>>,
    count: Option<usize>,
    #[serde(default)]
    tolerances: ToleranceOverrides,
}

#[derive(Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields)]
struct ToleranceOverrides {
    capacity: Option<f64>,
    reciprocity: Option<f64>,
    spectrum: Option<f64>,
    farfield: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Capacity,
    Dirichlet,
    Study,
    Spectrum,
    Converge,
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    /// Relative capacity error against the oracle; `None` when the shape has none.
    pub capacity: Option<f64>,
    /// Relative Green-reciprocity defect.
    pub reciprocity: f64,
    /// Absolute eigenvalue error.
    pub spectrum: f64,
    /// Far-field coefficient vs capacity, in units of `diameter / radius`.
    pub farfield: f64,
}

/// A fully resolved and validated run description.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub shape_spec: String,
    pub shape: Shape,
    pub h_spec: Option<String>,
    pub h: Option<Profile>,
    pub eps: Vec<f64>,
    pub resolutions: Vec<usize>,
    pub floor_resolution: Option<usize>,
    pub radius: f64,
    pub threads: usize,
    pub kinds: Vec<StudyKind>,
    pub count: usize,
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub csv: bool,
    #[serde(skip)]
    pub timings: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub version: String,
    pub config: ExperimentConfig,
    pub results: serde_json::Value,
    pub tables: BTreeMap<String, Table>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub verdict: Verdict,
    pub error: Option<String>,
    /// Only present with `--timings`; everything else is reproducible byte for byte.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match (self.verdict, &self.error) {
            (_, Some(_)) | (Verdict::Fail, _) => 1,
            _ => 0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// What one command produced, before it is wrapped into a report.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: serde_json::Value,
    pub tables: BTreeMap<String, Table>,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl Outcome {
    fn verdict(&mut self, name: impl Into<String>, ok: bool) {
        self.verdicts.insert(name.into(), if ok { Verdict::Pass } else { Verdict::Fail });
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn env_threads() -> Result<Option<usize>> {
    match std::env::var("CAPSENSE_THREADS") {
        Ok(s) if s.trim().is_empty() => Ok(None),
        Ok(s) => s.trim().parse().map(Some).map_err(|_| config_err(format!("CAPSENSE_THREADS: not a count: {s}"))),
        Err(_) => Ok(None),
    }
}

pub fn oracle_capacity(shape: &Shape) -> Option<Result<f64>> {
    match shape {
        Shape::Sphere { radius } => Some(sphere_capacity(*radius)),
        Shape::Ellipsoid { axes: [a, b, c] } => Some(ellipsoid_capacity(*a, *b, *c)),
        Shape::Star { radius, terms } if terms.iter().all(|t| t.2 == 0.0) => Some(sphere_capacity(*radius)),
        _ => None,
    }
}

fn default_capacity_tolerance(shape: &Shape) -> Option<f64> {
    match shape {
        Shape::Ellipsoid { .. } => Some(0.01),
        _ => oracle_capacity(shape).map(|_| 0.005),
    }
}

impl ExperimentConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let (command, common, kind, count) = match cli.command {
            Command::Capacity(c) => (CommandKind::Capacity, c, None, None),
            Command::Dirichlet(c) => (CommandKind::Dirichlet, c, None, None),
            Command::Study(s) => (CommandKind::Study, s.common, s.kind, None),
            Command::Spectrum(s) => (CommandKind::Spectrum, s.common, None, s.count),
            Command::Converge(c) => (CommandKind::Converge, c, None, None),
        };
        let file = match &common.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                toml::from_str::<FileConfig>(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => FileConfig::default(),
        };

        let shape_spec = common.shape.or(file.shape).unwrap_or_else(|| "sphere:1".into());
        let shape = Shape::parse(&shape_spec)?;
        let surface = make_surface(&shape)?;
        let h_spec = common.h.or(file.h).or_else(|| (command == CommandKind::Dirichlet).then(|| "z".into()));
        let h = h_spec.as_deref().map(Profile::parse).transpose()?;
        let eps = common.eps.or(file.eps).unwrap_or_else(|| DEFAULT_EPS.to_vec());
        let resolutions = common.resolution.or(file.resolution).unwrap_or_else(|| match command {
            CommandKind::Converge => vec![32, 64, 128],
            _ => vec![DEFAULT_RESOLUTION],
        });
        let threads = match common.threads.or(file.threads) {
            Some(t) => t,
            None => env_threads()?.unwrap_or(0),
        };
        let kinds = kind.or(file.kind).unwrap_or_else(|| {
            vec![StudyKind::Current, StudyKind::Capacity, StudyKind::Farfield, StudyKind::Eigenvector, StudyKind::Pairing]
        });
        let count = count.or(file.count).unwrap_or(10);
        let over = file.tolerances;
        let tolerances = Tolerances {
            capacity: over.capacity.or_else(|| default_capacity_tolerance(&shape)),
            reciprocity: over.reciprocity.unwrap_or(1e-3),
            spectrum: over.spectrum.unwrap_or(1e-3),
            farfield: over.farfield.unwrap_or(3.0),
        };

        if resolutions.is_empty() {
            return Err(config_err("empty resolution list"));
        }
        for &r in &resolutions {
            if r < 8 || r % 2 != 0 {
                return Err(config_err(format!("resolution must be even and at least 8, got {r}")));
            }
        }
        let minimum = FAR_FIELD_MIN_DIAMETERS * surface.diameter();
        let radius = match common.radius.or(file.radius) {
            Some(r) if !(r.is_finite() && r >= minimum * (1.0 - 1e-12)) => {
                return Err(Error::RadiusTooSmall { radius: r, minimum });
            }
            Some(r) => r,
            None => minimum,
        };
        for (name, t) in [
            ("capacity", tolerances.capacity.unwrap_or(1.0)),
            ("reciprocity", tolerances.reciprocity),
            ("spectrum", tolerances.spectrum),
            ("farfield", tolerances.farfield),
        ] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config_err(format!("tolerance {name} must be positive, got {t}")));
            }
        }
        let needs_eps = command == CommandKind::Study || (command == CommandKind::Spectrum && h.is_some());
        if needs_eps {
            if eps.is_empty() {
                return Err(config_err("empty ε list"));
            }
            if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
                return Err(config_err(format!("ε values must be positive, got {e}")));
            }
            let profile = h.as_ref().ok_or_else(|| config_err("a perturbation profile (--h) is required"))?;
            for &e in &eps {
                perturb_surface(&surface, profile, e)?;
            }
        }
        let floor_resolution = match common.floor_resolution.or(file.floor_resolution) {
            Some(0) => None,
            Some(f) if f < 8 || f % 2 != 0 => {
                return Err(config_err(format!("floor resolution must be even and at least 8, got {f}")));
            }
            Some(f) => Some(f),
            None => Some((resolutions[0] * 3 / 4) * 2),
        };
        if resolutions.len() > 1 && !matches!(command, CommandKind::Capacity | CommandKind::Converge) {
            return Err(config_err("this command takes a single resolution"));
        }
        if command == CommandKind::Study && kinds.is_empty() {
            return Err(config_err("no study kinds"));
        }
        if command == CommandKind::Converge {
            if resolutions.len() < 3 {
                return Err(config_err(format!("converge needs at least 3 resolutions, got {}", resolutions.len())));
            }
            if resolutions.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_err("converge resolutions must increase"));
            }
        }
        if command == CommandKind::Spectrum {
            let n = build_quadrature(&surface, resolutions[0])?.len();
            if count == 0 || count > n {
                return Err(config_err(format!("eigenvalue count {count} outside 1..={n}")));
            }
        }
        let out = common.out.or(file.out);
        let csv = common.csv || file.csv.unwrap_or(false);
        if let Some(p) = &out {
            if p.is_dir() {
                return Err(config_err(format!("output path {} is a directory", p.display())));
            }
            let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(config_err(format!("output directory {} does not exist", parent.display())));
            }
        } else if csv {
            return Err(config_err("--csv needs --out to name the CSV files"));
        }

        Ok(ExperimentConfig {
            command,
            shape_spec,
            shape,
            h_spec,
            h,
            eps,
            resolutions,
            floor_resolution,
            radius,
            threads,
            kinds,
            count,
            tolerances,
            out,
            csv,
            timings: common.timings || file.timings.unwrap_or(false),
        })
    }
}

fn capacity_command(cfg: &ExperimentConfig, surface: &ParametricSurface) -> Result<Outcome> {
    let mut out = Outcome::default();
    let oracle = oracle_capacity(&cfg.shape).transpose()?;
    let diameter = surface.diameter();
    let mut table = Table::new(&["resolution", "capacity", "rel_error"]);
    let mut results = vec![];
    for &res in &cfg.resolutions {
        let quad = build_quadrature(surface, res)?;
        let eq = BoundarySolver::new(&quad)?.equilibrium()?;
        let far = far_field_coefficient(&quad, &eq, cfg.radius)?;
        let rel_error = oracle.map(|c| (eq.capacity - c).abs() / c);
        let far_tol = cfg.tolerances.farfield * diameter / cfg.radius;
        let far_rel = (far - eq.capacity).abs() / eq.capacity.abs();
        if let (Some(e), Some(t)) = (rel_error, cfg.tolerances.capacity) {
            out.verdict(format!("capacity_oracle_{res}"), e <= t);
        }
        out.verdict(format!("farfield_route_{res}"), far_rel <= far_tol);
        out.verdict(format!("density_sign_{res}"), eq.density.values.iter().all(|&v| v < 0.0));
        table.rows.push(vec![res as f64, eq.capacity, rel_error.unwrap_or(f64::NAN)]);
        results.push(serde_json::json!({
            "resolution": res,
            "nodes": quad.len(),
            "area": quad.area(),
            "capacity": eq.capacity,
            "oracle": oracle,
            "rel_error": rel_error,
            "farfield_coefficient": far,
            "farfield_rel_difference": far_rel,
            "condition": eq.condition,
        }));
    }
    out.tables.insert("capacity".into(), table);
    out.results = serde_json::Value::Array(results);
    Ok(out)
}

/// Green's identity for two decaying exterior harmonics with traces `f` and 1:
/// `∫ f ∂u/∂n = ∫ ∂w/∂n`.
fn dirichlet_command(cfg: &ExperimentConfig, surface: &ParametricSurface) -> Result<Outcome> {
    let mut out = Outcome::default();
    let res = cfg.resolutions[0];
    let quad = build_quadrature(surface, res)?;
    let solver = BoundarySolver::new(&quad)?;
    let profile = cfg.h.as_ref().expect("dirichlet data defaults to z");
    let f = DensityVector::from_fn(&quad, |x| profile.eval(x));
    let sol = solver.dirichlet(&f)?;
    let eq = solver.equilibrium()?;
    let lhs = quad.inner(&f.values, &eq.density.values);
    let rhs = gauss_integral(&quad, &sol.density);
    let scale: f64 = quad.nodes.iter().zip(f.values.iter().zip(&eq.density.values)).map(|(n, (a, b))| n.weight * (a * b).abs()).sum();
    let defect = if scale > 0.0 { (lhs - rhs).abs() / scale } else { (lhs - rhs).abs() };
    out.verdict("green_reciprocity", defect <= cfg.tolerances.reciprocity);
    let far = far_field_coefficient(&quad, &sol, cfg.radius)?;
    let mut table = Table::new(&["x", "y", "z", "potential"]);
    for d in crate::solver::far_field_directions().iter().take(13) {
        let x = [3.0 * d[0], 3.0 * d[1], 3.0 * d[2]];
        let x = crate::geometry::vec3::scale(x, surface.diameter());
        table.rows.push(vec![x[0], x[1], x[2], crate::solver::eval_potential(&quad, &sol, x)?]);
    }
    out.tables.insert("samples".into(), table);
    out.results = serde_json::json!({
        "resolution": res,
        "nodes": quad.len(),
        "data": cfg.h_spec,
        "flux": rhs,
        "data_against_equilibrium": lhs,
        "reciprocity_defect": defect,
        "farfield_coefficient": far,
        "monopole": -rhs / (4.0 * PI),
        "condition": solver.condition,
    });
    Ok(out)
}

fn study_command(cfg: &ExperimentConfig, surface: &ParametricSurface) -> Result<Outcome> {
    let mut out = Outcome::default();
    let h = cfg.h.as_ref().expect("validated");
    let options = StudyOptions {
        resolution: cfg.resolutions[0],
        floor_resolutions: cfg.floor_resolution.map(|f| (cfg.resolutions[0], f)),
        radius: cfg.radius,
    };
    let reports = run_expansion_studies(&cfg.kinds, surface, h, &cfg.eps, &options)?;
    for r in &reports {
        let name = serde_json::to_value(r.kind)?.as_str().unwrap_or_default().to_string();
        let mut table = Table::new(&["eps", "predicted", "truth", "residual"]);
        for i in 0..r.eps.len() {
            table.rows.push(vec![r.eps[i], r.predicted[i], r.truth[i], r.residuals[i]]);
        }
        out.tables.insert(format!("study_{name}"), table);
        out.verdicts.insert(format!("study_{name}"), r.verdict);
    }
    out.results = serde_json::to_value(&reports)?;
    Ok(out)
}

/// Sphere eigenvalues `1/(2(2l+1))` with multiplicity `2l+1`, descending.
fn sphere_spectrum(count: usize) -> Result<Vec<f64>> {
    let mut v = vec![];
    let mut l = 0;
    while v.len() < count {
        let lambda = sphere_np_eigenvalue(l)?;
        v.extend(std::iter::repeat(lambda).take(2 * l as usize + 1));
        l += 1;
    }
    v.truncate(count);
    Ok(v)
}

fn spectrum_command(cfg: &ExperimentConfig, surface: &ParametricSurface) -> Result<Outcome> {
    let mut out = Outcome::default();
    let res = cfg.resolutions[0];
    let tol = cfg.tolerances.spectrum;
    let quad = build_quadrature(surface, res)?;
    let ops = crate::potential::BoundaryOperators::assemble(&quad)?;
    let base = np_spectrum_check(&quad, ops.kstar(&quad)?, cfg.count)?;
    drop(ops);
    out.verdict("spectrum_bounds", base.is_consistent(tol));
    let sphere = matches!(cfg.shape, Shape::Sphere { .. });
    let mut table = if sphere { Table::new(&["index", "eigenvalue", "expected"]) } else { Table::new(&["index", "eigenvalue"]) };
    if sphere {
        let expected = sphere_spectrum(cfg.count)?;
        let worst = base.leading.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.verdict("spectrum_sphere", worst <= tol);
        for (i, (a, b)) in base.leading.iter().zip(&expected).enumerate() {
            table.rows.push(vec![i as f64, *a, *b]);
        }
    } else {
        for (i, a) in base.leading.iter().enumerate() {
            table.rows.push(vec![i as f64, *a]);
        }
    }
    out.tables.insert("spectrum".into(), table);
    let mut perturbed = vec![];
    if let Some(h) = &cfg.h {
        let mut ptable = Table::new(&["eps", "top", "max_other"]);
        for &e in &cfg.eps {
            let s = perturb_surface(surface, h, e)?;
            let q = build_quadrature(&s, res)?;
            let ops = crate::potential::BoundaryOperators::assemble(&q)?;
            let sp = np_spectrum_check(&q, ops.kstar(&q)?, 1)?;
            out.verdict(format!("top_eigenvalue_eps_{e}"), (sp.top() - base.top()).abs() <= tol && sp.is_consistent(tol));
            ptable.rows.push(vec![e, sp.top(), sp.max_other]);
            perturbed.push(serde_json::json!({ "eps": e, "spectrum": sp }));
        }
        out.tables.insert("perturbed_top".into(), ptable);
    }
    out.results = serde_json::json!({ "resolution": res, "nodes": quad.len(), "spectrum": base, "perturbed": perturbed });
    Ok(out)
}

/// Capacity at increasing resolutions; errors against the oracle when there
/// is one, otherwise against the finest resolution.
pub fn convergence_study(shape: &Shape, resolutions: &[usize]) -> Result<Outcome> {
    if resolutions.len() < 3 {
        return Err(config_err(format!("converge needs at least 3 resolutions, got {}", resolutions.len())));
    }
    let surface = make_surface(shape)?;
    let mut caps = vec![];
    for &r in resolutions {
        caps.push(crate::solver::solve_equilibrium(&build_quadrature(&surface, r)?)?.capacity);
    }
    let oracle = oracle_capacity(shape).transpose()?;
    let (reference, measured) = match oracle {
        Some(c) => (c, resolutions.len()),
        None => (*caps.last().expect("nonempty"), resolutions.len() - 1),
    };
    let errors: Vec<f64> = caps.iter().map(|c| (c - reference).abs() / reference.abs()).collect();
    let res_f: Vec<f64> = resolutions.iter().map(|&r| r as f64).collect();
    let above: Vec<(f64, f64)> =
        res_f[..measured].iter().zip(&errors[..measured]).filter(|(_, e)| **e > ROUNDOFF).map(|(r, e)| (*r, *e)).collect();
    let (rx, ey): (Vec<f64>, Vec<f64>) = above.iter().copied().unzip();
    let rate = fit_loglog(&rx, &ey).map(|(s, _)| -s);
    let decreasing = ey.windows(2).all(|w| w[1] < w[0]);
    let mut out = Outcome::default();
    out.verdict("convergence", decreasing);
    let mut table = Table::new(&["resolution", "capacity", "rel_error"]);
    for i in 0..resolutions.len() {
        table.rows.push(vec![res_f[i], caps[i], if i < measured { errors[i] } else { f64::NAN }]);
    }
    out.tables.insert("convergence".into(), table);
    out.results = serde_json::json!({
        "reference": reference,
        "reference_kind": if oracle.is_some() { "oracle" } else { "finest resolution" },
        "capacities": caps,
        "rel_errors": &errors[..measured],
        "rate": rate,
        "roundoff_converged": above.is_empty(),
    });
    Ok(out)
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome> {
    let surface = make_surface(&cfg.shape)?;
    match cfg.command {
        CommandKind::Capacity => capacity_command(cfg, &surface),
        CommandKind::Dirichlet => dirichlet_command(cfg, &surface),
        CommandKind::Study => study_command(cfg, &surface),
        CommandKind::Spectrum => spectrum_command(cfg, &surface),
        CommandKind::Converge => convergence_study(&cfg.shape, &cfg.resolutions),
    }
}

/// Run a validated experiment. Solver failures land in `error`, not in a panic.
pub fn run(cfg: &ExperimentConfig) -> RunReport {
    let start = Instant::now();
    let outcome = with_threads(cfg.threads, || dispatch(cfg)).and_then(|r| r);
    let elapsed = start.elapsed().as_secs_f64();
    let (outcome, error) = match outcome {
        Ok(o) => (o, None),
        Err(e) => (Outcome::default(), Some(e.to_string())),
    };
    let verdict = if error.is_some() || outcome.verdicts.values().any(|v| *v == Verdict::Fail) {
        Verdict::Fail
    } else if outcome.verdicts.values().any(|v| *v == Verdict::FloorLimited) {
        Verdict::FloorLimited
    } else {
        Verdict::Pass
    };
    RunReport {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        results: outcome.results,
        tables: outcome.tables,
        verdicts: outcome.verdicts,
        verdict,
        error,
        timings: cfg.timings.then(|| BTreeMap::from([("total_s".to_string(), elapsed)])),
    }
}

/// One CSV per nonempty table, next to `path`: `<stem>.<table>.csv`.
pub fn emit_csv(report: &RunReport, path: &Path) -> Result<Vec<PathBuf>> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut written = vec![];
    for (name, table) in &report.tables {
        if table.rows.is_empty() {
            warn!("table {name} is empty; no CSV written");
            continue;
        }
        let file = dir.join(format!("{stem}.{name}.csv"));
        let mut w = csv::Writer::from_path(&file).map_err(csv_error)?;
        w.write_record(&table.columns).map_err(csv_error)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_error)?;
        }
        w.flush()?;
        written.push(file);
    }
    Ok(written)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Domain(format!("csv: {other:?}")),
    }
}

/// Parse, validate, run, write. Returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cfg = match ExperimentConfig::from_cli(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("capsense: {e}");
            return 2;
        }
    };
    let report = run(&cfg);
    if let Some(err) = &report.error {
        eprintln!("capsense: {err}");
    }
    let json = report.to_json();
    match &cfg.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &json) {
                eprintln!("capsense: cannot write {}: {e}", p.display());
                return 1;
            }
            if cfg.csv {
                if let Err(e) = emit_csv(&report, p) {
                    eprintln!("capsense: {e}");
                    return 1;
                }
            }
        }
        None => print!("{json}"),
    }
    report.exit_code()
}
