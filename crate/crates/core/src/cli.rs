//! Command-line front end: option resolution, experiment dispatch, CSV and
//! manifest output.
//!
//! Option precedence is flag, then config-file key, then default. Every run
//! writes `<subcommand>.csv` (except `word`, which writes `word.txt`) and
//! `manifest.json` into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::drive::{coin_sequence, decay_series, direct_delta_series, state_vector, DecayPoint, DriveRecipe, DriveSpec, GateRecipe, Ladder};
use crate::error::{Error, Result};
use crate::fit::{exp_fit, powerlaw_fit, FitWindow};
use crate::haar::{haar_moment_state, mc_haar_moment};
use crate::manybody::{
    deep_therm_series, haar_projected_reference, log_checkpoints, log_windows, manybody_delta_series, random_product_states,
    ChainPropagator, ChainSpec, WINDOWS_PER_DECADE,
};
use crate::precision::PrecisionPolicy;
use crate::stationary::{delta2_time_independent, HamiltonianSpec};
use crate::sweep::{gamma_map, random_states, AngleGrid, GammaOptions, QubitAngles};
use crate::words::{code_rotation, fib_word_concat};

pub const MANIFEST_VERSION: u32 = 1;

/// Column headers of every CSV the CLI writes.
pub mod columns {
    pub const WORD: &[&str] = &[];
    pub const HAAR_MOMENT: &[&str] = &["row", "col", "re", "im"];
    pub const TRACE_DISTANCE: &[&str] = &["t", "delta", "epsilon", "bits"];
    pub const GAMMA_MAP: &[&str] =
        &["theta1", "theta2", "theta3", "k", "gamma", "residual", "zeta", "converged", "final_delta", "bits", "flags"];
    pub const BOUND_CHECK: &[&str] = &["d", "delta", "dephased_bound", "bound", "margin"];
    pub const MANYBODY: &[&str] = &["t", "delta", "k", "L"];
    pub const DEEP_THERM: &[&str] = &["t", "delta_E", "k", "L", "N_A", "leakage"];
}

#[derive(Parser, Debug)]
#[command(name = "chse", version, about = "Fibonacci-driven quantum systems and their distance from Haar moments")]
pub struct Cli {
    /// TOML file of option values; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print a prefix of the generalized Fibonacci word.
    Word(WordFlags),
    /// Analytic k-th Haar moment, optionally checked by Monte Carlo.
    HaarMoment(HaarMomentFlags),
    /// Δ^(k)(S_n) of a Fibonacci drive with the precision ledger.
    TraceDistance(TraceDistanceFlags),
    /// Power-law exponent γ over a single-qubit angle grid.
    GammaMap(GammaMapFlags),
    /// Infinite-time Δ^(2) of random Hamiltonians against B(d).
    BoundCheck(BoundCheckFlags),
    /// Δ^(k)(T) of a coin-flip drive.
    CoinBaseline(CoinFlags),
    /// Full-system Δ^(k)(T) of a driven spin chain.
    Manybody(ManybodyFlags),
    /// Projected-ensemble Δ_E^(k)(t) of a driven spin chain.
    DeepTherm(DeepThermFlags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Word(_) => "word",
            Command::HaarMoment(_) => "haar-moment",
            Command::TraceDistance(_) => "trace-distance",
            Command::GammaMap(_) => "gamma-map",
            Command::BoundCheck(_) => "bound-check",
            Command::CoinBaseline(_) => "coin-baseline",
            Command::Manybody(_) => "manybody",
            Command::DeepTherm(_) => "deep-therm",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct WordFlags {
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    length: Option<usize>,
    /// Initial rotation phase; 0 gives the concatenation word.
    #[arg(long)]
    theta0: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WordConfig {
    pub m: u32,
    pub length: usize,
    pub theta0: f64,
}

impl Default for WordConfig {
    fn default() -> Self {
        Self { m: 1, length: 13, theta0: 0.0 }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct HaarMomentFlags {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Monte Carlo samples (0 skips the check).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HaarMomentConfig {
    pub d: usize,
    pub k: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for HaarMomentConfig {
    fn default() -> Self {
        Self { d: 2, k: 2, samples: 0, seed: 0 }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TraceDistanceFlags {
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Seed of Haar-random gates.
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of random initial states.
    #[arg(long)]
    state_seed: Option<u64>,
    /// `haar`, `xz` or `qubit`; all angles are in units of π.
    #[arg(long)]
    gates: Option<String>,
    #[arg(long)]
    theta_x: Option<f64>,
    #[arg(long)]
    theta_z: Option<f64>,
    #[arg(long)]
    theta1: Option<f64>,
    #[arg(long)]
    theta2: Option<f64>,
    #[arg(long)]
    theta3: Option<f64>,
    /// `random` or `zero-plus` (qubits only).
    #[arg(long)]
    states: Option<String>,
    #[arg(long)]
    n_states: Option<usize>,
    /// `double` or a bit count.
    #[arg(long)]
    precision: Option<String>,
    /// Fail on a ledger violation instead of doubling the precision.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_escalate: Option<bool>,
    #[arg(long)]
    max_bits: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceDistanceConfig {
    pub m: u32,
    pub d: usize,
    pub k: usize,
    pub n_max: usize,
    pub seed: u64,
    pub state_seed: u64,
    pub gates: String,
    pub theta_x: f64,
    pub theta_z: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub states: String,
    pub n_states: usize,
    pub precision: String,
    pub no_escalate: bool,
    pub max_bits: u32,
}

impl Default for TraceDistanceConfig {
    fn default() -> Self {
        Self {
            m: 1,
            d: 2,
            k: 2,
            n_max: 30,
            seed: 0,
            state_seed: 1,
            gates: "haar".into(),
            theta_x: 0.39,
            theta_z: 0.39,
            theta1: 0.3,
            theta2: 0.33,
            theta3: 0.5,
            states: "random".into(),
            n_states: 1,
            precision: "256".into(),
            no_escalate: false,
            max_bits: 8192,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GammaMapFlags {
    #[arg(long)]
    k: Option<usize>,
    // Angles in units of π.
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    theta1_min: Option<f64>,
    #[arg(long)]
    theta1_max: Option<f64>,
    #[arg(long)]
    theta1_steps: Option<usize>,
    #[arg(long)]
    theta2_min: Option<f64>,
    #[arg(long)]
    theta2_max: Option<f64>,
    #[arg(long)]
    theta2_steps: Option<usize>,
    #[arg(long)]
    theta3: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_states: Option<usize>,
    #[arg(long)]
    precision: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_escalate: Option<bool>,
    #[arg(long)]
    max_bits: Option<u32>,
    /// Index of the earlier fit entering ζ (default ⌊5 n_max / 6⌋).
    #[arg(long)]
    zeta_index: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaMapConfig {
    pub k: usize,
    pub n_max: usize,
    pub theta1_min: f64,
    pub theta1_max: f64,
    pub theta1_steps: usize,
    pub theta2_min: f64,
    pub theta2_max: f64,
    pub theta2_steps: usize,
    pub theta3: f64,
    pub seed: u64,
    pub n_states: usize,
    pub precision: String,
    pub no_escalate: bool,
    pub max_bits: u32,
    pub zeta_index: Option<usize>,
}

impl Default for GammaMapConfig {
    fn default() -> Self {
        Self {
            k: 2,
            n_max: 60,
            theta1_min: 0.0,
            theta1_max: 0.5,
            theta1_steps: 4,
            theta2_min: 0.0,
            theta2_max: 0.5,
            theta2_steps: 4,
            theta3: 0.5,
            seed: 0,
            n_states: 2,
            precision: "512".into(),
            no_escalate: false,
            max_bits: 8192,
            zeta_index: None,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct BoundCheckFlags {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundCheckConfig {
    pub d: usize,
    pub instances: usize,
    pub seed: u64,
}

impl Default for BoundCheckConfig {
    fn default() -> Self {
        Self { d: 2, instances: 100, seed: 0 }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct CoinFlags {
    /// Probability of symbol 1.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Seed of the Haar-random gate pair.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sequence_seed: Option<u64>,
    #[arg(long)]
    state_seed: Option<u64>,
    /// Initial states averaged over.
    #[arg(long)]
    n_states: Option<usize>,
    /// Reported times per decade.
    #[arg(long)]
    per_decade: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoinConfig {
    pub p: f64,
    pub t_max: usize,
    pub d: usize,
    pub k: usize,
    pub seed: u64,
    pub sequence_seed: u64,
    pub state_seed: u64,
    pub n_states: usize,
    pub per_decade: usize,
}

impl Default for CoinConfig {
    fn default() -> Self {
        Self { p: 0.5, t_max: 1000, d: 2, k: 2, seed: 0, sequence_seed: 1, state_seed: 2, n_states: 10, per_decade: 10 }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ManybodyFlags {
    #[arg(long = "L")]
    l: Option<usize>,
    /// Gate duration τ.
    #[arg(long)]
    tau: Option<f64>,
    /// Edge field coefficient on the last site.
    #[arg(long)]
    edge: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    t_min: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    n_states: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reported times per decade.
    #[arg(long)]
    per_decade: Option<usize>,
    /// Evolution windows per decade.
    #[arg(long)]
    windows_per_decade: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManybodyConfig {
    #[serde(rename = "L")]
    pub l: usize,
    pub tau: f64,
    pub edge: f64,
    pub k: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub n_states: usize,
    pub seed: u64,
    pub per_decade: usize,
    pub windows_per_decade: usize,
}

impl Default for ManybodyConfig {
    fn default() -> Self {
        Self { l: 8, tau: 1.0, edge: 0.1, k: 1, t_min: 10, t_max: 1000, n_states: 10, seed: 0, per_decade: 10, windows_per_decade: WINDOWS_PER_DECADE }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct DeepThermFlags {
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long = "N-A")]
    n_a: Option<usize>,
    /// Gate duration τ.
    #[arg(long)]
    tau: Option<f64>,
    /// Edge field coefficient on the last site.
    #[arg(long)]
    edge: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    n_states: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Haar-random samples for the plateau reference (0 skips it).
    #[arg(long)]
    reference_samples: Option<usize>,
    #[arg(long)]
    reference_seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepThermConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N_A")]
    pub n_a: usize,
    pub tau: f64,
    pub edge: f64,
    pub k: usize,
    pub t_max: usize,
    pub n_states: usize,
    pub seed: u64,
    pub reference_samples: usize,
    pub reference_seed: u64,
}

impl Default for DeepThermConfig {
    fn default() -> Self {
        Self { l: 8, n_a: 2, tau: 1.0, edge: 0.1, k: 1, t_max: 200, n_states: 10, seed: 0, reference_samples: 1000, reference_seed: 1 }
    }
}

/// Defaults, then `file`, then non-null `flags`.
fn resolve<F: Serialize, C: Serialize + DeserializeOwned + Default>(flags: &F, file: &Map<String, Value>) -> Result<C> {
    let mut merged = match serde_json::to_value(C::default())? {
        Value::Object(m) => m,
        _ => unreachable!("configs are structs"),
    };
    for (key, v) in file {
        if !merged.contains_key(key) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        merged.insert(key.clone(), v.clone());
    }
    if let Value::Object(f) = serde_json::to_value(flags)? {
        for (key, v) in f {
            if !v.is_null() {
                let key = if merged.contains_key(&key) { key } else { flag_key(&key, &merged) };
                merged.insert(key, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(e.to_string()))
}

/// Maps renamed fields (`l` → `L`, `n_a` → `N_A`).
fn flag_key(key: &str, merged: &Map<String, Value>) -> String {
    let upper = key.to_uppercase();
    if merged.contains_key(&upper) {
        upper
    } else {
        key.to_string()
    }
}

fn load_file(path: Option<&Path>) -> Result<Map<String, Value>> {
    let Some(path) = path else { return Ok(Map::new()) };
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    match serde_json::to_value(table)? {
        Value::Object(m) => Ok(m),
        _ => unreachable!("tables are objects"),
    }
}

fn parse_precision(s: &str) -> Result<PrecisionPolicy> {
    if s.eq_ignore_ascii_case("double") {
        return Ok(PrecisionPolicy::Double);
    }
    let bits: u32 = s.parse().map_err(|_| Error::Config(format!("precision `{s}` is neither `double` nor a bit count")))?;
    PrecisionPolicy::from_bits(bits).map_err(|e| Error::Config(e.to_string()))
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

/// What a subcommand produced, for the manifest.
#[derive(Default)]
struct RunOutput {
    files: Vec<String>,
    flags: Vec<Value>,
    extra: Map<String, Value>,
    /// Error to report after the manifest is written.
    failure: Option<Error>,
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn seeds_of(config: &Value) -> Value {
    let mut out = Map::new();
    if let Value::Object(m) = config {
        for (k, v) in m {
            if k.contains("seed") {
                out.insert(k.clone(), v.clone());
            }
        }
    }
    Value::Object(out)
}

/// Parses `args`, runs, and returns the process exit status.
pub fn run_from_args<I, T>(args: I) -> i32
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
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let mut file = load_file(cli.config.as_deref())?;
    let file_out = file.remove("out").and_then(|v| v.as_str().map(PathBuf::from));
    let file_threads = file.remove("threads").and_then(|v| v.as_u64());
    let out_dir = cli.out.clone().or(file_out).unwrap_or_else(|| PathBuf::from("out"));
    if let Some(n) = cli.threads.or(file_threads.map(|n| n as usize)) {
        require(n >= 1, "threads must be at least 1")?;
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    fs::create_dir_all(&out_dir)?;
    let name = cli.command.name();
    let (config, result) = match &cli.command {
        Command::Word(f) => dispatch(f, &file, |c| run_word(c, &out_dir))?,
        Command::HaarMoment(f) => dispatch(f, &file, |c| run_haar_moment(c, &out_dir))?,
        Command::TraceDistance(f) => dispatch(f, &file, |c| run_trace_distance(c, &out_dir))?,
        Command::GammaMap(f) => dispatch(f, &file, |c| run_gamma_map(c, &out_dir))?,
        Command::BoundCheck(f) => dispatch(f, &file, |c| run_bound_check(c, &out_dir))?,
        Command::CoinBaseline(f) => dispatch(f, &file, |c| run_coin(c, &out_dir))?,
        Command::Manybody(f) => dispatch(f, &file, |c| run_manybody(c, &out_dir))?,
        Command::DeepTherm(f) => dispatch(f, &file, |c| run_deep_therm(c, &out_dir))?,
    };
    let output = result.unwrap_or_else(|e| RunOutput { failure: Some(e), ..Default::default() });
    let mut manifest = json!({
        "version": MANIFEST_VERSION,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "subcommand": name,
        "config": config,
        "seeds": seeds_of(&config),
        "threads": rayon::current_num_threads(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "outputs": output.files,
        "flags": output.flags,
        "status": if output.failure.is_some() { "error" } else { "ok" },
    });
    if let Some(e) = &output.failure {
        manifest["error"] = json!({ "category": e.category(), "message": e.to_string() });
    }
    if let Value::Object(m) = &mut manifest {
        m.extend(output.extra);
    }
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    match output.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Resolves the config, then runs; config errors abort before any output.
fn dispatch<F, C>(flags: &F, file: &Map<String, Value>, body: impl FnOnce(&C) -> Result<RunOutput>) -> Result<(Value, Result<RunOutput>)>
where
    F: Serialize,
    C: Serialize + DeserializeOwned + Default,
{
    let config: C = resolve(flags, file)?;
    let value = serde_json::to_value(&config)?;
    Ok((value, body(&config)))
}

fn run_word(c: &WordConfig, out: &Path) -> Result<RunOutput> {
    require(c.m >= 1, "m must be at least 1")?;
    let word = if c.theta0 == 0.0 { fib_word_concat(c.m, c.length)? } else { code_rotation(c.m, c.theta0, c.length)? };
    let text = word.to_string();
    println!("{text}");
    fs::write(out.join("word.txt"), format!("{text}\n"))?;
    Ok(RunOutput { files: vec!["word.txt".into()], ..Default::default() })
}

fn run_haar_moment(c: &HaarMomentConfig, out: &Path) -> Result<RunOutput> {
    require(c.d >= 1 && c.k >= 1, "need d >= 1 and k >= 1")?;
    let rho = haar_moment_state::<f64>(c.d, c.k, &PrecisionPolicy::Double)?;
    let n = rho.matrix.rows();
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let z = rho.matrix.get(i, j);
            if z.re != 0.0 || z.im != 0.0 {
                rows.push(vec![i.to_string(), j.to_string(), z.re.to_string(), z.im.to_string()]);
            }
        }
    }
    write_csv(&out.join("haar-moment.csv"), columns::HAAR_MOMENT, &rows)?;
    let mut extra = Map::new();
    if c.samples > 0 {
        let mc = mc_haar_moment(c.d, c.k, c.samples, c.seed)?;
        extra.insert("mc_trace_distance".into(), json!(mc.trace_distance(&rho)?));
    }
    Ok(RunOutput { files: vec!["haar-moment.csv".into()], extra, ..Default::default() })
}

fn qubit_basis_states() -> Vec<Vec<(f64, f64)>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![vec![(1.0, 0.0), (0.0, 0.0)], vec![(s, 0.0), (s, 0.0)]]
}

fn trace_distance_recipe(c: &TraceDistanceConfig) -> Result<DriveRecipe> {
    let gates = match c.gates.as_str() {
        "haar" => GateRecipe::Haar { d: c.d, seed: c.seed },
        "xz" => GateRecipe::Xz { theta_x: c.theta_x, theta_z: c.theta_z },
        "qubit" => GateRecipe::Qubit(QubitAngles::new(c.theta1, c.theta2, c.theta3)?),
        g => return Err(Error::Config(format!("unknown gate family `{g}`"))),
    };
    require(gates.dim() == c.d, format!("gate family `{}` acts on d = {}, not {}", c.gates, gates.dim(), c.d))?;
    Ok(DriveRecipe { m: c.m, gates, theta0: 0.0 })
}

fn decay_rows(points: &[DecayPoint], ledger_eps: impl Fn(&DecayPoint) -> String) -> Vec<Vec<String>> {
    points.iter().map(|p| vec![p.t.to_string(), p.delta.clone(), ledger_eps(p), p.bits.to_string()]).collect()
}

fn run_trace_distance(c: &TraceDistanceConfig, out: &Path) -> Result<RunOutput> {
    require(c.d >= 2 && c.k >= 1 && c.n_max >= 1 && c.m >= 1, "need d >= 2, k >= 1, m >= 1, n_max >= 1")?;
    let recipe = trace_distance_recipe(c)?;
    let states = match c.states.as_str() {
        "random" => {
            require(c.n_states >= 1, "n_states must be at least 1")?;
            random_states(c.d, c.n_states, c.state_seed)
        }
        "zero-plus" => {
            require(c.d == 2, "zero-plus states need d = 2")?;
            qubit_basis_states()
        }
        s => return Err(Error::Config(format!("unknown state choice `{s}`"))),
    };
    let ladder = Ladder { start: parse_precision(&c.precision)?, escalate: !c.no_escalate, max_bits: c.max_bits };
    let series = decay_series(&recipe, c.k, &states, c.n_max, &ladder)?;
    let eps: std::collections::HashMap<usize, String> = series.ledger.entries.iter().map(|e| (e.n, e.epsilon.clone())).collect();
    let rows = decay_rows(&series.points, |p| p.n.and_then(|n| eps.get(&n).cloned()).unwrap_or_default());
    write_csv(&out.join("trace-distance.csv"), columns::TRACE_DISTANCE, &rows)?;
    let mut extra = Map::new();
    extra.insert("restarts".into(), json!(series.restarts));
    extra.insert("bits".into(), json!(series.bits));
    extra.insert("ledger_valid".into(), json!(series.ledger.valid()));
    if let Ok(fit) = powerlaw_fit(&series.points, FitWindow::default()) {
        extra.insert("fit".into(), serde_json::to_value(fit)?);
    }
    Ok(RunOutput { files: vec!["trace-distance.csv".into()], extra, ..Default::default() })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn run_gamma_map(c: &GammaMapConfig, out: &Path) -> Result<RunOutput> {
    require(c.k >= 1 && c.n_max >= 2 && c.n_states >= 1, "need k >= 1, n_max >= 2 and n_states >= 1")?;
    require(c.theta1_steps >= 1 && c.theta2_steps >= 1, "grid needs at least one step per axis")?;
    let grid = AngleGrid {
        theta1: linspace(c.theta1_min, c.theta1_max, c.theta1_steps),
        theta2: linspace(c.theta2_min, c.theta2_max, c.theta2_steps),
        theta3: c.theta3,
    };
    let mut opts = GammaOptions::new(c.k, c.n_max, c.seed);
    opts.n_states = c.n_states;
    opts.ladder = Ladder { start: parse_precision(&c.precision)?, escalate: !c.no_escalate, max_bits: c.max_bits };
    if let Some(z) = c.zeta_index {
        opts.zeta_index = z;
    }
    require(opts.zeta_index < c.n_max, "zeta_index must be below n_max")?;
    let points = gamma_map(&grid, &opts)?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.angles.theta1.to_string(),
                p.angles.theta2.to_string(),
                p.angles.theta3.to_string(),
                p.k.to_string(),
                opt_f64(p.fit.as_ref().map(|f| f.rate)),
                opt_f64(p.fit.as_ref().map(|f| f.residual)),
                opt_f64(p.zeta),
                p.converged.to_string(),
                p.final_delta.clone().unwrap_or_default(),
                p.bits.to_string(),
                p.flags.join(";"),
            ]
        })
        .collect();
    write_csv(&out.join("gamma-map.csv"), columns::GAMMA_MAP, &rows)?;
    let flags: Vec<Value> = points.iter().map(|p| json!({ "theta1": p.angles.theta1, "theta2": p.angles.theta2, "flags": p.flags })).collect();
    let failed: Vec<&str> = points
        .iter()
        .filter_map(|p| p.flags.iter().find(|f| ["config", "ledger", "resource", "numeric", "io"].contains(&f.as_str())))
        .map(String::as_str)
        .collect();
    let mut output = RunOutput { files: vec!["gamma-map.csv".into()], flags, ..Default::default() };
    output.extra.insert("failed_points".into(), json!(failed.len()));
    if !points.is_empty() && failed.len() == points.len() {
        output.failure = Some(match failed[0] {
            "ledger" => Error::LedgerViolation { n: 0, epsilon: f64::NAN, delta: f64::NAN, bits: opts.ladder.max_bits },
            "resource" => Error::ResourceLimit("every grid point hit a resource limit".into()),
            "config" => Error::Config("every grid point was rejected".into()),
            _ => Error::InvalidArgument("every grid point failed".into()),
        });
    }
    Ok(output)
}

fn run_bound_check(c: &BoundCheckConfig, out: &Path) -> Result<RunOutput> {
    require(c.d >= 2, "B(d) needs d >= 2")?;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(c.seed);
    let mut rows = Vec::with_capacity(c.instances);
    let mut worst = f64::INFINITY;
    for _ in 0..c.instances {
        let ham = HamiltonianSpec::random(c.d, &mut rng)?;
        let cert = delta2_time_independent(&ham)?;
        worst = worst.min(cert.margin());
        rows.push(vec![
            c.d.to_string(),
            cert.delta.to_string(),
            cert.dephased.to_string(),
            cert.bound.to_string(),
            cert.margin().to_string(),
        ]);
    }
    write_csv(&out.join("bound-check.csv"), columns::BOUND_CHECK, &rows)?;
    let mut extra = Map::new();
    extra.insert("min_margin".into(), json!(worst));
    Ok(RunOutput { files: vec!["bound-check.csv".into()], extra, ..Default::default() })
}

fn run_coin(c: &CoinConfig, out: &Path) -> Result<RunOutput> {
    require(c.d >= 2 && c.k >= 1 && c.t_max >= 1 && c.per_decade >= 1 && c.n_states >= 1, "need d >= 2, k >= 1, t_max >= 1, per_decade >= 1, n_states >= 1")?;
    let series = coin_delta_series(c)?;
    let rows: Vec<Vec<String>> =
        series.iter().map(|(t, delta)| vec![t.to_string(), delta.to_string(), String::new(), "53".into()]).collect();
    write_csv(&out.join("coin-baseline.csv"), columns::TRACE_DISTANCE, &rows)?;
    let mut extra = Map::new();
    let points: Vec<DecayPoint> = crate::manybody::decay_points(&series.iter().map(|&(t, d)| (t, vec![d])).collect::<Vec<_>>());
    if let Ok(fit) = powerlaw_fit(&points, FitWindow::default()) {
        extra.insert("fit".into(), serde_json::to_value(fit)?);
    }
    Ok(RunOutput { files: vec!["coin-baseline.csv".into()], extra, ..Default::default() })
}

/// Δ^(k)(T) of a Bernoulli(p) drive with Haar-random gates at log-spaced `T`,
/// averaged over `n_states` Haar-random initial states.
pub fn coin_delta_series(c: &CoinConfig) -> Result<Vec<(usize, f64)>> {
    let policy = PrecisionPolicy::Double;
    let (a0, a1) = GateRecipe::Haar { d: c.d, seed: c.seed }.build::<f64>(&policy)?;
    let word = coin_sequence(c.p, c.t_max, c.sequence_seed)?;
    let spec = DriveSpec::new(1, a0, a1)?.with_symbols(word.symbols);
    let times = log_checkpoints(1, c.t_max, c.per_decade);
    let mut mean = vec![0.0; times.len()];
    for psi in random_states(c.d, c.n_states, c.state_seed) {
        let psi = state_vector::<f64>(&psi, &policy)?;
        for (acc, (_, delta)) in mean.iter_mut().zip(direct_delta_series(&spec, c.k, &psi, &times)?) {
            *acc += delta / c.n_states as f64;
        }
    }
    Ok(times.into_iter().zip(mean).collect())
}

fn chain_spec(l: usize, tau: f64, edge: f64) -> Result<ChainSpec> {
    let spec = ChainSpec { l, tau, edge, m: 1 };
    spec.validate()?;
    Ok(spec)
}

fn run_manybody(c: &ManybodyConfig, out: &Path) -> Result<RunOutput> {
    require(c.k >= 1 && c.n_states >= 1 && c.t_min >= 1 && c.t_min <= c.t_max, "need k >= 1, n_states >= 1, 1 <= t_min <= t_max")?;
    let spec = chain_spec(c.l, c.tau, c.edge)?;
    let prop = ChainPropagator::new(spec, c.t_max)?;
    let states = random_product_states(c.l, c.n_states, c.seed);
    let checkpoints = log_checkpoints(c.t_min, c.t_max, c.per_decade);
    let windows = log_windows(c.t_max, c.windows_per_decade)?;
    let points = manybody_delta_series(&prop, c.k, &states, &checkpoints, &windows)?;
    let rows: Vec<Vec<String>> =
        points.iter().map(|p| vec![p.t.to_string(), p.delta.clone(), c.k.to_string(), c.l.to_string()]).collect();
    write_csv(&out.join("manybody.csv"), columns::MANYBODY, &rows)?;
    let mut extra = Map::new();
    extra.insert("windows".into(), json!(windows));
    if let Ok(fit) = powerlaw_fit(&points, FitWindow::Range { start: 0, end: points.len() }) {
        extra.insert("fit".into(), serde_json::to_value(fit)?);
    }
    Ok(RunOutput { files: vec!["manybody.csv".into()], extra, ..Default::default() })
}

fn run_deep_therm(c: &DeepThermConfig, out: &Path) -> Result<RunOutput> {
    require(c.k >= 1 && c.n_states >= 1, "need k >= 1 and n_states >= 1")?;
    let spec = chain_spec(c.l, c.tau, c.edge)?;
    require(c.n_a >= 1 && c.n_a < c.l, "need 1 <= N_A < L")?;
    let prop = ChainPropagator::new(spec, c.t_max)?;
    let states = random_product_states(c.l, c.n_states, c.seed);
    let series = deep_therm_series(&prop, c.k, c.n_a, &states, c.t_max)?;
    let rows: Vec<Vec<String>> = series
        .iter()
        .map(|p| {
            vec![
                p.t.to_string(),
                p.delta_e.to_string(),
                c.k.to_string(),
                c.l.to_string(),
                c.n_a.to_string(),
                p.leakage.to_string(),
            ]
        })
        .collect();
    write_csv(&out.join("deep-therm.csv"), columns::DEEP_THERM, &rows)?;
    let mut extra = Map::new();
    if c.reference_samples > 0 {
        let r = haar_projected_reference(1 << c.n_a, 1 << (c.l - c.n_a), c.k, c.reference_samples, c.reference_seed)?;
        extra.insert("haar_reference".into(), json!(r));
    }
    let rows: Vec<(usize, Vec<f64>)> = series.iter().filter(|p| p.t >= 1).map(|p| (p.t, vec![p.delta_e])).collect();
    let pts = crate::manybody::decay_points(&rows);
    let cut = pts.len().min(20);
    if let Ok(fit) = exp_fit(&pts[..cut], FitWindow::Range { start: 0, end: cut }) {
        extra.insert("exp_fit_first_20".into(), serde_json::to_value(fit)?);
    }
    Ok(RunOutput { files: vec!["deep-therm.csv".into()], extra, ..Default::default() })
}
