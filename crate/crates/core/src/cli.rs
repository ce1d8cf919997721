//! Command-line front end. Every run resolves a [`RunConfig`] from an
//! optional JSON config file overridden by flags, and emits
//! `{"config": …, "result": …}` as JSON.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acs::{validate_j, OrthoComplexStructure, TOL_ALG};
use crate::delta::{DeltaCache, DeltaConstant, DeltaParams};
use crate::error::{Error, Result};
use crate::holonomy::{
    catalog_by_name, holonomy_samples, loop_family, parallel_transport, HolonomySample, LoopKind, ManifoldChart,
    SmoothPath,
};
use crate::karcher::{karcher_mean, MeanResult, WeightedSampleSet};
use crate::linalg::Mat;
use crate::matrix_json::{mat_serde, MatrixJson};
use crate::prober::{auto_j, orbit, probe, DichotomyVerdict, JSpec, OrbitReport, ProbeConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Delta,
    Mean,
    Transport,
    Orbit,
    Probe,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub subcommand: Option<CommandName>,
    /// The `--config` file this run was resolved from, if any.
    pub config_file: Option<PathBuf>,
    /// Real dimension `2n` of the structure space.
    pub dim: Option<usize>,
    pub seed: u64,
    pub samples: usize,
    pub directions: usize,
    pub resolution: f64,
    pub refine_epsilon: bool,
    pub epsilon_override: Option<f64>,
    pub no_cache: bool,
    pub input: Option<PathBuf>,
    pub tol: f64,
    pub max_iter: usize,
    pub manifold: Option<String>,
    pub point: Option<Vec<f64>>,
    pub path: Option<PathBuf>,
    /// `auto` or a file holding a structure.
    pub j: Option<String>,
    pub samples_file: Option<PathBuf>,
    pub delta_file: Option<PathBuf>,
    pub loops: usize,
    pub loop_kind: LoopKind,
    pub loop_scale: f64,
    pub ode_steps: usize,
    pub word_length: usize,
    pub grid: usize,
    pub grid_steps: usize,
    pub refine: bool,
    pub mean_tol: f64,
    pub max_rounds: usize,
    pub fixed_tol: f64,
    pub path_tol: f64,
    pub certificate_tol: f64,
    pub csv: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub timestamp: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = DeltaParams::new(1, 0);
        let p = ProbeConfig::default();
        RunConfig {
            subcommand: None,
            config_file: None,
            dim: None,
            seed: 0,
            samples: d.num_samples,
            directions: d.num_directions,
            resolution: d.resolution,
            refine_epsilon: d.refine,
            epsilon_override: None,
            no_cache: false,
            input: None,
            tol: crate::karcher::DEFAULT_TOL,
            max_iter: crate::karcher::DEFAULT_MAX_ITER,
            manifold: None,
            point: None,
            path: None,
            j: None,
            samples_file: None,
            delta_file: None,
            loops: p.loops,
            loop_kind: p.loop_kind,
            loop_scale: p.loop_scale,
            ode_steps: p.ode_steps,
            word_length: p.word_length,
            grid: p.grid,
            grid_steps: p.grid_steps,
            refine: p.refine,
            mean_tol: p.mean_tol,
            max_rounds: p.max_rounds,
            fixed_tol: p.fixed_tol,
            path_tol: p.path_tol,
            certificate_tol: p.certificate_tol,
            csv: None,
            out: None,
            threads: None,
            timestamp: false,
        }
    }
}

impl RunConfig {
    pub fn delta_params(&self, n: usize) -> DeltaParams {
        DeltaParams {
            n,
            seed: self.seed,
            num_samples: self.samples,
            num_directions: self.directions,
            resolution: self.resolution,
            refine: self.refine_epsilon,
            epsilon_override: self.epsilon_override,
        }
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            loops: self.loops,
            loop_kind: self.loop_kind,
            loop_scale: self.loop_scale,
            ode_steps: self.ode_steps,
            word_length: self.word_length,
            seed: self.seed,
            grid: self.grid,
            grid_steps: self.grid_steps,
            mean_tol: self.mean_tol,
            max_rounds: self.max_rounds,
            fixed_tol: self.fixed_tol,
            path_tol: self.path_tol,
            certificate_tol: self.certificate_tol,
            refine: self.refine,
        }
    }
}

/// Comma-separated coordinates, kept as one clap value.
#[derive(Debug, Clone)]
struct Point(Vec<f64>);

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Point)
}

#[derive(Parser, Debug)]
#[command(
    name = "kahler-probe",
    version,
    about = "Holonomy dichotomy probe for almost complex structures"
)]
struct Cli {
    /// JSON file with the same keys as the resolved config; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Add a wall-clock timestamp to the output.
    #[arg(long, global = true, overrides_with = "no_timestamp")]
    timestamp: bool,
    /// Omit the timestamp (the default).
    #[arg(long, global = true, overrides_with = "timestamp")]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the dichotomy constant for structures on R^dim.
    Delta {
        /// Real dimension 2n (even, at least 4).
        #[arg(long)]
        dim: Option<usize>,
        /// Seed for curvature and injectivity sampling.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        delta: DeltaFlags,
    },
    /// Center of mass of a JSON array of structures.
    Mean {
        /// Structures as a JSON array, `{points, weights}`, or an `orbit` output.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Stop when the gradient norm falls below this.
        #[arg(long)]
        tol: Option<f64>,
        /// Descent iteration cap.
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Parallel transport along a path, or holonomy of a loop family.
    Transport {
        #[command(flatten)]
        hol: HolonomyFlags,
        /// JSON path; without it a loop family is sampled.
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Orbit of a structure under sampled holonomy.
    Orbit {
        #[command(flatten)]
        hol: HolonomyFlags,
        /// `auto` or a file holding a structure (matrix, `mean` or `probe` output).
        #[arg(long)]
        j: Option<String>,
        /// Holonomy samples emitted by `transport`.
        #[arg(long)]
        samples_file: Option<PathBuf>,
        /// Also write the distance table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Full dichotomy pipeline.
    Probe {
        #[command(flatten)]
        hol: HolonomyFlags,
        /// `auto` or a file holding a starting structure.
        #[arg(long)]
        j: Option<String>,
        /// Dimension for the δ estimate; must match the manifold.
        #[arg(long = "delta-dim")]
        dim: Option<usize>,
        /// Use the constant from a `delta` output instead of estimating it.
        #[arg(long)]
        delta_file: Option<PathBuf>,
        #[command(flatten)]
        delta: DeltaFlags,
        /// Grid points per axis for the certificates.
        #[arg(long)]
        grid: Option<usize>,
        /// RK4 steps per grid spacing when extending the structure.
        #[arg(long)]
        grid_steps: Option<usize>,
        /// Skip the refined-grid decay check.
        #[arg(long)]
        no_refine: bool,
        /// Gradient tolerance of each averaging step.
        #[arg(long)]
        mean_tol: Option<f64>,
        /// Cap on repeated averaging rounds.
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Required max displacement of the averaged structure.
        #[arg(long)]
        fixed_tol: Option<f64>,
        /// Allowed disagreement between transport orders.
        #[arg(long)]
        path_tol: Option<f64>,
        /// Bound on ∇J, Nijenhuis and dω residuals.
        #[arg(long)]
        certificate_tol: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct DeltaFlags {
    /// Random planes sampled for the curvature bound.
    #[arg(long)]
    samples: Option<usize>,
    /// Geodesic directions marched for the injectivity radius.
    #[arg(long)]
    directions: Option<usize>,
    /// Step of the injectivity march.
    #[arg(long)]
    resolution: Option<f64>,
    /// Use this curvature bound instead of estimating one.
    #[arg(long)]
    epsilon_override: Option<f64>,
    /// Recompute even when a cached value exists.
    #[arg(long)]
    no_cache: bool,
    /// Skip local refinement of sampled curvature planes.
    #[arg(long)]
    no_refine_epsilon: bool,
}

#[derive(Args, Debug)]
struct HolonomyFlags {
    /// flat_torus_4, round_sphere_2, round_sphere_4, fubini_study_cp2 or product_s2_s2.
    #[arg(long)]
    manifold: Option<String>,
    /// Base point, comma-separated chart coordinates.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    point: Option<Point>,
    /// Number of generating loops.
    #[arg(long)]
    loops: Option<usize>,
    /// coordinate_rectangles or fourier_random.
    #[arg(long)]
    loop_kind: Option<LoopKind>,
    /// Rectangle side, or Fourier coefficient scale.
    #[arg(long)]
    loop_scale: Option<f64>,
    /// RK4 steps per loop.
    #[arg(long)]
    ode_steps: Option<usize>,
    /// Close the samples under words up to this length.
    #[arg(long)]
    word_length: Option<usize>,
    /// Seed for random loops.
    #[arg(long)]
    seed: Option<u64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl DeltaFlags {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.samples, self.samples);
        set(&mut c.directions, self.directions);
        set(&mut c.resolution, self.resolution);
        set_opt(&mut c.epsilon_override, self.epsilon_override);
        c.no_cache |= self.no_cache;
        if self.no_refine_epsilon {
            c.refine_epsilon = false;
        }
    }
}

impl HolonomyFlags {
    fn apply(self, c: &mut RunConfig) {
        set_opt(&mut c.manifold, self.manifold);
        set_opt(&mut c.point, self.point.map(|p| p.0));
        set(&mut c.loops, self.loops);
        set(&mut c.loop_kind, self.loop_kind);
        set(&mut c.loop_scale, self.loop_scale);
        set(&mut c.ode_steps, self.ode_steps);
        set(&mut c.word_length, self.word_length);
        set(&mut c.seed, self.seed);
    }
}

/// Usage problems map to exit code 1, domain errors to 2.
enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn resolve(cli: Cli) -> std::result::Result<RunConfig, Failure> {
    let mut c = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    c.config_file = cli.config.clone();
    set_opt(&mut c.threads, cli.threads);
    set_opt(&mut c.out, cli.out);
    if cli.timestamp {
        c.timestamp = true;
    }
    if cli.no_timestamp {
        c.timestamp = false;
    }
    let name = match cli.command {
        Command::Delta { dim, seed, delta } => {
            set_opt(&mut c.dim, dim);
            set(&mut c.seed, seed);
            delta.apply(&mut c);
            CommandName::Delta
        }
        Command::Mean { input, tol, max_iter } => {
            set_opt(&mut c.input, input);
            set(&mut c.tol, tol);
            set(&mut c.max_iter, max_iter);
            CommandName::Mean
        }
        Command::Transport { hol, path } => {
            hol.apply(&mut c);
            set_opt(&mut c.path, path);
            CommandName::Transport
        }
        Command::Orbit {
            hol,
            j,
            samples_file,
            csv,
        } => {
            hol.apply(&mut c);
            set_opt(&mut c.j, j);
            set_opt(&mut c.samples_file, samples_file);
            set_opt(&mut c.csv, csv);
            CommandName::Orbit
        }
        Command::Probe {
            hol,
            j,
            dim,
            delta_file,
            delta,
            grid,
            grid_steps,
            no_refine,
            mean_tol,
            max_rounds,
            fixed_tol,
            path_tol,
            certificate_tol,
        } => {
            hol.apply(&mut c);
            delta.apply(&mut c);
            set_opt(&mut c.j, j);
            set_opt(&mut c.dim, dim);
            set_opt(&mut c.delta_file, delta_file);
            set(&mut c.grid, grid);
            set(&mut c.grid_steps, grid_steps);
            if no_refine {
                c.refine = false;
            }
            set(&mut c.mean_tol, mean_tol);
            set(&mut c.max_rounds, max_rounds);
            set(&mut c.fixed_tol, fixed_tol);
            set(&mut c.path_tol, path_tol);
            set(&mut c.certificate_tol, certificate_tol);
            CommandName::Probe
        }
    };
    if let Some(from_file) = c.subcommand {
        if from_file != name {
            return Err(usage(format!(
                "config file is for `{}` but `{}` was invoked",
                serde_json::to_string(&from_file).unwrap_or_default().trim_matches('"'),
                serde_json::to_string(&name).unwrap_or_default().trim_matches('"')
            )));
        }
    }
    c.subcommand = Some(name);
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaOutput {
    pub params: DeltaParams,
    pub cache_key: String,
    pub delta: DeltaConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportOutput {
    pub manifold: String,
    pub path: SmoothPath,
    #[serde(with = "mat_serde")]
    pub matrix: Mat,
    #[serde(with = "mat_serde")]
    pub coordinate_matrix: Mat,
    pub orthogonality_defect: f64,
    pub ode_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeOutput {
    /// Where δ came from: `estimate` (cached under `cache_key`) or `file`.
    pub delta_source: String,
    pub delta_params: Option<DeltaParams>,
    pub cache_key: Option<String>,
    pub verdict: DichotomyVerdict,
}

/// Reads a JSON file, unwrapping a CLI output envelope if present.
fn read_artifact(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)?;
    Ok(match v {
        Value::Object(mut m) if m.contains_key("result") && m.contains_key("config") => {
            m.remove("result").unwrap_or(Value::Null)
        }
        other => other,
    })
}

/// A bare matrix, a mean result, or a probe verdict carrying `j_prime`.
fn structure_from_value(v: Value) -> Result<OrthoComplexStructure> {
    if let Some(mean) = v.get("mean") {
        return structure_from_value(mean.clone());
    }
    if let Some(verdict) = v.get("verdict") {
        return match verdict.pointer("/evidence/j_prime") {
            Some(j) if !j.is_null() => structure_from_value(j.clone()),
            _ => Err(Error::InvalidInput("verdict carries no averaged structure".into())),
        };
    }
    let mj: MatrixJson = serde_json::from_value(v)?;
    validate_j(&mj.to_matrix()?, TOL_ALG)
}

/// Accepts a bare array of structures, `{points, weights}`, or an orbit report.
fn sample_set_from_value(v: Value) -> Result<WeightedSampleSet> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Weighted {
        points: Vec<OrthoComplexStructure>,
        weights: Option<Vec<f64>>,
    }
    if v.is_array() {
        let points: Vec<OrthoComplexStructure> = serde_json::from_value(v)?;
        return WeightedSampleSet::uniform(points);
    }
    if v.get("orbit").is_some() {
        let report: OrbitReport = serde_json::from_value(v)?;
        return WeightedSampleSet::uniform(report.orbit);
    }
    let w: Weighted = serde_json::from_value(v)?;
    match w.weights {
        Some(weights) => WeightedSampleSet::new(w.points, weights),
        None => WeightedSampleSet::uniform(w.points),
    }
}

fn delta_from_value(v: Value) -> Result<DeltaConstant> {
    if let Some(d) = v.pointer("/verdict/delta_used") {
        return Ok(serde_json::from_value(d.clone())?);
    }
    if let Some(d) = v.get("delta").filter(|d| d.is_object()) {
        return Ok(serde_json::from_value(d.clone())?);
    }
    Ok(serde_json::from_value(v)?)
}

fn require<T: Clone>(v: &Option<T>, flag: &str) -> std::result::Result<T, Failure> {
    v.clone().ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn chart_of(c: &RunConfig) -> std::result::Result<ManifoldChart, Failure> {
    Ok(catalog_by_name(&require(&c.manifold, "manifold")?)?)
}

fn structure_spec(c: &RunConfig) -> Result<JSpec> {
    match c.j.as_deref() {
        None | Some("auto") => Ok(JSpec::Auto),
        Some(path) => Ok(JSpec::Given(structure_from_value(read_artifact(Path::new(path))?)?)),
    }
}

fn delta_for(c: &RunConfig, n: usize) -> Result<(DeltaConstant, DeltaParams, String)> {
    let params = c.delta_params(n);
    let key = params.cache_key();
    let delta = if c.no_cache {
        params.estimate()?
    } else {
        DeltaCache::from_env().get_or_compute(&params, false)?
    };
    Ok((delta, params, key))
}

fn run_delta(c: &RunConfig) -> std::result::Result<Value, Failure> {
    let dim = require(&c.dim, "dim")?;
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::OddDimension { dim }.into());
    }
    let (delta, params, cache_key) = delta_for(c, dim / 2)?;
    to_value(&DeltaOutput {
        params,
        cache_key,
        delta,
    })
}

fn run_mean(c: &RunConfig) -> std::result::Result<Value, Failure> {
    let input = require(&c.input, "input")?;
    let set = sample_set_from_value(read_artifact(&input)?)?;
    let result: MeanResult = karcher_mean(&set, c.tol, c.max_iter)?;
    if !result.converged {
        return Err(Error::DidNotConverge {
            iterations: result.iterations,
            grad_norm: result.final_grad_norm,
        }
        .into());
    }
    to_value(&result)
}

fn sampled_holonomy(c: &RunConfig, chart: &ManifoldChart, p: &[f64]) -> Result<Vec<HolonomySample>> {
    let loops = loop_family(chart, p, c.loop_kind, c.loops, c.loop_scale, c.seed)?;
    holonomy_samples(chart, p, &loops, c.ode_steps, c.word_length)
}

fn run_transport(c: &RunConfig) -> std::result::Result<Value, Failure> {
    let chart = chart_of(c)?;
    match &c.path {
        Some(file) => {
            let mut raw = read_artifact(file)?;
            if let Some(inner) = raw.get("path").filter(|p| p.is_object()) {
                raw = inner.clone();
            }
            let path: SmoothPath = serde_json::from_value(raw).map_err(Error::from)?;
            let t = parallel_transport(&chart, &path, c.ode_steps)?;
            to_value(&TransportOutput {
                manifold: chart.name().to_string(),
                path,
                matrix: t.matrix,
                coordinate_matrix: t.coordinate,
                orthogonality_defect: t.defect,
                ode_steps: t.steps,
            })
        }
        None => {
            let p = require(&c.point, "point")?;
            to_value(&sampled_holonomy(c, &chart, &p)?)
        }
    }
}

fn run_orbit(c: &RunConfig) -> std::result::Result<Value, Failure> {
    let chart = chart_of(c)?;
    let samples: Vec<HolonomySample> = match &c.samples_file {
        Some(file) => serde_json::from_value(read_artifact(file)?).map_err(Error::from)?,
        None => {
            let p = require(&c.point, "point")?;
            sampled_holonomy(c, &chart, &p)?
        }
    };
    let p = match (&c.point, samples.first()) {
        (Some(p), _) => p.clone(),
        (None, Some(s)) => s.base_point.clone(),
        (None, None) => return Err(usage("missing required --point")),
    };
    let j = match structure_spec(c)? {
        JSpec::Auto => auto_j(&chart, &p)?,
        JSpec::Given(j) => j,
    };
    let report = orbit(&j, &samples)?;
    if let Some(csv) = &c.csv {
        let mut text = String::from("index,distance,word\n");
        for (i, (d, s)) in report.distances.iter().zip(&report.samples).enumerate() {
            let word: Vec<String> = s
                .word
                .iter()
                .map(|l| format!("{}{}", l.generator, if l.inverse { "'" } else { "" }))
                .collect();
            text.push_str(&format!("{i},{d:e},{}\n", word.join(" ")));
        }
        std::fs::write(csv, text).map_err(|e| Error::Io(format!("{}: {e}", csv.display())))?;
    }
    to_value(&report)
}

fn run_probe(c: &RunConfig) -> std::result::Result<Value, Failure> {
    let chart = chart_of(c)?;
    let p = require(&c.point, "point")?;
    if let Some(dim) = c.dim {
        if dim != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: dim,
            }
            .into());
        }
    }
    let (delta, delta_source, delta_params, cache_key) = match &c.delta_file {
        Some(file) => (delta_from_value(read_artifact(file)?)?, "file", None, None),
        None => {
            let (d, params, key) = delta_for(c, chart.dim() / 2)?;
            (d, "estimate", Some(params), Some(key))
        }
    };
    let verdict = probe(&chart, &p, &structure_spec(c)?, &delta, &c.probe_config())?;
    to_value(&ProbeOutput {
        delta_source: delta_source.to_string(),
        delta_params,
        cache_key,
        verdict,
    })
}

fn to_value<T: Serialize>(v: &T) -> std::result::Result<Value, Failure> {
    Ok(serde_json::to_value(v).map_err(Error::from)?)
}

fn dispatch(c: &RunConfig) -> std::result::Result<Value, Failure> {
    match c.subcommand {
        Some(CommandName::Delta) => run_delta(c),
        Some(CommandName::Mean) => run_mean(c),
        Some(CommandName::Transport) => run_transport(c),
        Some(CommandName::Orbit) => run_orbit(c),
        Some(CommandName::Probe) => run_probe(c),
        None => Err(usage("no subcommand")),
    }
}

fn emit(out: &mut dyn Write, text: &str) {
    // A closed stdout leaves nothing useful to report.
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

fn error_json(code: &str, detail: &str) -> String {
    let v = serde_json::json!({ "error": code, "detail": detail });
    format!("{}\n", serde_json::to_string_pretty(&v).unwrap_or_default())
}

/// Parses `args` (including the program name), runs the command and
/// writes JSON to `out` unless `--out` names a file. Returns the exit code.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                emit(out, &e.to_string());
            } else {
                emit(out, &error_json("usage", &e.to_string()));
            }
            return code;
        }
    };
    let config = match resolve(cli) {
        Ok(c) => c,
        Err(Failure::Usage(msg)) => {
            emit(out, &error_json("usage", &msg));
            return EXIT_USAGE;
        }
        Err(Failure::Domain(e)) => {
            emit(out, &error_json(e.code(), &e.to_string()));
            return EXIT_DOMAIN;
        }
    };
    run(&config, out)
}

/// Runs a resolved configuration.
pub fn run(config: &RunConfig, out: &mut dyn Write) -> i32 {
    let outcome = match config.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(config)),
            Err(e) => Err(usage(format!("cannot start {n} threads: {e}"))),
        },
        None => dispatch(config),
    };
    let result = match outcome {
        Ok(v) => v,
        Err(Failure::Usage(msg)) => {
            emit(out, &error_json("usage", &msg));
            return EXIT_USAGE;
        }
        Err(Failure::Domain(e)) => {
            emit(out, &error_json(e.code(), &e.to_string()));
            return EXIT_DOMAIN;
        }
    };
    let mut envelope = serde_json::json!({ "config": config, "result": result });
    if config.timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        envelope["timestamp_unix"] = Value::from(secs);
    }
    let text = match serde_json::to_string_pretty(&envelope) {
        Ok(t) => format!("{t}\n"),
        Err(e) => {
            emit(out, &error_json("invalid_input", &e.to_string()));
            return EXIT_DOMAIN;
        }
    };
    match &config.out {
        Some(path) => match std::fs::write(path, &text) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                emit(out, &error_json("io", &format!("{}: {e}", path.display())));
                EXIT_DOMAIN
            }
        },
        None => {
            emit(out, &text);
            EXIT_OK
        }
    }
}
