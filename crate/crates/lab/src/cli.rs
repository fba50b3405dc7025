//! Argument parsing, config merging and command dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use szego_core::dynamics::{Scheme, Trajectory};

use crate::error::{exit, LabError, LabResult};
use crate::experiments::{self, Horizon, Suite};
use crate::init::InitSpec;
use crate::output::{self, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "szego-lab",
    version,
    about = "Experiments for the NLS-Szegő equation on the circle"
)]
pub struct Cli {
    /// JSON file of parameters (or a previous manifest.json to replay);
    /// flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Skip plot.svg.
    #[arg(long, global = true)]
    pub no_plot: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one initial datum and monitor the conserved quantities.
    Simulate(SimulateArgs),
    /// Track the closed-form cubic Szegő solution under weak dispersion.
    Turbulence(TurbulenceArgs),
    /// Distance to the plane-wave orbit for perturbed plane waves.
    OrbitalStability(OrbitalArgs),
    /// Growth of small data over the stability window.
    SmallData(SmallDataArgs),
    /// Exact identities and numerical residual checks.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Turbulence(_) => "turbulence",
            Command::OrbitalStability(_) => "orbital-stability",
            Command::SmallData(_) => "small-data",
            Command::Verify(_) => "verify",
        }
    }
}

fn parse_init(text: &str) -> Result<InitSpec, String> {
    text.parse().map_err(|e: LabError| e.to_string())
}

fn parse_scheme(text: &str) -> Result<Scheme, String> {
    match text {
        "strang" => Ok(Scheme::Strang),
        "rk4-full" => Ok(Scheme::Rk4Full),
        _ => Err(format!("unknown scheme `{text}` (strang, rk4-full)")),
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Initial datum (required, on the command line or in the config).
    #[arg(long, value_parser = parse_init)]
    pub init: Option<InitSpec>,
    #[arg(long, default_value_t = 0.3)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, visible_alias = "N", default_value_t = 128)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Final time, or `auto:t_delta` for plane-plus data.
    #[arg(long = "T", visible_alias = "t-final", default_value = "10")]
    pub t_final: String,
    #[arg(long, value_parser = parse_scheme, default_value = "strang")]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// Sobolev index of the Hs column and the orbit distance.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Reference plane wave for the orbit distance (default: dominant mode).
    #[arg(long)]
    pub orbit_mode: Option<usize>,
    /// Pure cubic Szegő flow.
    #[arg(long)]
    pub dispersion_off: bool,
    /// Halve dt until the energy drift over [0, 1] is below 1e-8.
    #[arg(long)]
    pub auto_dt: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TurbulenceArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.3])]
    pub delta: Vec<f64>,
    /// The dispersion coefficient is nu^2.
    #[arg(long, default_value_t = 1e-3)]
    pub nu: f64,
    #[arg(long, visible_alias = "N", default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, value_parser = parse_scheme, default_value = "strang")]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OrbitalArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0])]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05])]
    pub eps_list: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    #[arg(long = "T", visible_alias = "t-final", default_value_t = 50.0)]
    pub t_final: f64,
    #[arg(long, visible_alias = "N", default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SmallDataArgs {
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.25])]
    pub eps_list: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// c in the window T = c / eps^(4 - alpha), or c / eps^2 for alpha > 2.
    #[arg(long, default_value_t = 0.5)]
    pub window_c: f64,
    #[arg(long, visible_alias = "N", default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 5e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    /// max ||u||_{H^s} / eps above this is flagged as unbounded.
    #[arg(long, default_value_t = 3.0)]
    pub bound: f64,
    /// Use data eps (e^{ix} + delta) up to t^delta / eps^2 instead.
    #[arg(long)]
    pub growth_delta: Option<f64>,
    /// Profile f of the data u0 = eps f (default: seeded, ||f||_{H^s} = 1).
    #[arg(long, value_parser = parse_init)]
    pub init: Option<InitSpec>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Plane-wave mode (homological suite; default: 0, 1 and 2).
    #[arg(long)]
    pub m: Option<u32>,
    /// Truncation (defaults: bracket 8, homological 32, resonance 16 or 12,
    /// lax 3072, normal-form-drift 16).
    #[arg(long, visible_alias = "N")]
    pub n: Option<u32>,
    /// exact, rational:p/q or float:<d>
    #[arg(long, default_value = "exact")]
    pub alpha_mode: String,
    #[arg(long, default_value_t = 4)]
    pub order: u32,
    #[arg(long, default_value_t = 0.3)]
    pub delta: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05])]
    pub eps_list: Vec<f64>,
    #[arg(long = "T", visible_alias = "t-final", default_value_t = 50.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 2e-3)]
    pub dt: f64,
}

const GLOBAL_KEYS: [&str; 4] = ["out_dir", "workers", "seed", "no_plot"];

fn normalise_key(key: &str) -> String {
    match key {
        "T" | "t-final" => "t_final".into(),
        "N" => "n".into(),
        other => other.replace('-', "_"),
    }
}

/// Overlays `config` onto `params` for every key the user did not give on
/// the command line. Unknown keys are rejected.
fn overlay(
    params: &mut Map<String, Value>,
    config: &Map<String, Value>,
    matches: &ArgMatches,
) -> LabResult<()> {
    for (key, value) in config {
        let key = normalise_key(key);
        if !params.contains_key(&key) {
            return Err(LabError::BadInput(format!("unknown config key `{key}`")));
        }
        if matches.value_source(&key) != Some(ValueSource::CommandLine) {
            params.insert(key, value.clone());
        }
    }
    Ok(())
}

fn merge<T: Serialize + for<'de> Deserialize<'de>>(
    args: &T,
    config: &Map<String, Value>,
    matches: &ArgMatches,
) -> LabResult<T> {
    let Value::Object(mut params) = serde_json::to_value(args).expect("arguments serialise") else {
        unreachable!("argument structs serialise to objects")
    };
    overlay(&mut params, config, matches)?;
    serde_json::from_value(Value::Object(params))
        .map_err(|e| LabError::BadInput(format!("config: {e}")))
}

/// The resolved invocation: global settings plus merged subcommand.
#[derive(Debug)]
pub struct Invocation {
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
    pub seed: u64,
    pub no_plot: bool,
    pub command: Command,
}

fn read_config(path: &Path) -> LabResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(LabError::BadInput(format!(
            "{}: expected a JSON object",
            path.display()
        ))),
        Err(e) => Err(LabError::BadInput(format!("{}: {e}", path.display()))),
    }
}

pub fn resolve(cli: Cli, matches: &ArgMatches) -> LabResult<Invocation> {
    let mut inv = Invocation {
        out_dir: cli.out_dir,
        workers: cli.workers,
        seed: cli.seed,
        no_plot: cli.no_plot,
        command: cli.command,
    };
    let Some(path) = cli.config else {
        return Ok(inv);
    };
    let mut config = read_config(&path)?;

    // a manifest replays its own parameters and seed
    if let (Some(Value::String(cmd)), Some(Value::Object(params))) =
        (config.get("command"), config.get("params"))
    {
        if cmd != inv.command.name() {
            return Err(LabError::BadInput(format!(
                "manifest is for `{cmd}`, not `{}`",
                inv.command.name()
            )));
        }
        let mut replay = params.clone();
        if let Some(seed) = config.get("seed") {
            replay.insert("seed".into(), seed.clone());
        }
        config = replay;
    }

    let mut sub = Map::new();
    for (key, value) in config {
        let norm = normalise_key(&key);
        if !GLOBAL_KEYS.contains(&norm.as_str()) {
            sub.insert(key, value);
            continue;
        }
        if matches.value_source(&norm) == Some(ValueSource::CommandLine) {
            continue;
        }
        let bad = |e: serde_json::Error| LabError::BadInput(format!("config `{key}`: {e}"));
        match norm.as_str() {
            "out_dir" => inv.out_dir = serde_json::from_value(value).map_err(bad)?,
            "workers" => inv.workers = serde_json::from_value(value).map_err(bad)?,
            "seed" => inv.seed = serde_json::from_value(value).map_err(bad)?,
            _ => inv.no_plot = serde_json::from_value(value).map_err(bad)?,
        }
    }

    let (_, sub_matches) = matches.subcommand().expect("a subcommand is required");
    inv.command = match &inv.command {
        Command::Simulate(a) => Command::Simulate(merge(a, &sub, sub_matches)?),
        Command::Turbulence(a) => Command::Turbulence(merge(a, &sub, sub_matches)?),
        Command::OrbitalStability(a) => Command::OrbitalStability(merge(a, &sub, sub_matches)?),
        Command::SmallData(a) => Command::SmallData(merge(a, &sub, sub_matches)?),
        Command::Verify(a) => Command::Verify(merge(a, &sub, sub_matches)?),
    };
    Ok(inv)
}

/// What a command hands back for writing.
struct Produced {
    report: Value,
    summary: Value,
    trajectories: Vec<(String, Trajectory)>,
    /// Error to report after the outputs are written.
    error: Option<LabError>,
}

impl Produced {
    fn from_outcome<R: Serialize>(
        result: experiments::RunResult<R>,
        summary: impl FnOnce(&R) -> Value,
    ) -> Self {
        match result {
            Ok(out) => Produced {
                report: serde_json::to_value(&out.report).expect("reports serialise"),
                summary: summary(&out.report),
                trajectories: out.trajectories,
                error: None,
            },
            Err(fail) => Produced {
                report: Value::Null,
                summary: Value::Null,
                trajectories: fail.trajectories,
                error: Some(fail.error),
            },
        }
    }
}

fn execute(command: &Command, seed: u64) -> Produced {
    match command {
        Command::Simulate(a) => {
            let init = a
                .init
                .clone()
                .ok_or_else(|| LabError::BadInput("simulate needs --init".into()));
            let spec = init.and_then(|init| {
                Horizon::parse(&a.t_final).map(|t_final| experiments::SimulateSpec {
                    init,
                    epsilon: a.eps,
                    alpha: a.alpha,
                    n: a.n,
                    dt: a.dt,
                    t_final,
                    scheme: a.scheme,
                    stride: a.stride,
                    s: a.s,
                    orbit_mode: a.orbit_mode,
                    dispersion_off: a.dispersion_off,
                    auto_dt: a.auto_dt,
                })
            });
            let result = match spec {
                Ok(spec) => experiments::simulate(&spec),
                Err(e) => Err(e.into()),
            };
            Produced::from_outcome(result, |r| {
                let mut s = json!({
                    "t_final": r.t_final,
                    "dt": r.dt,
                    "drift_Q": r.drift.q,
                    "drift_I": r.drift.i,
                    "drift_E": r.drift.e,
                    "final_H1": r.final_h1,
                    "final_Hs": r.final_hs,
                    "max_orbit_dist": r.max_orbit_dist,
                });
                if let Some(o) = &r.oracle {
                    s["oracle_H1"] = json!(o.oracle_h1);
                    s["oracle_rel_l2_error"] = json!(o.relative_l2_error);
                }
                s
            })
        }
        Command::Turbulence(a) => {
            let spec = experiments::TurbulenceSpec {
                deltas: a.delta.clone(),
                nu: a.nu,
                n: a.n,
                dt: a.dt,
                scheme: a.scheme,
                stride: a.stride,
            };
            Produced::from_outcome(experiments::turbulence(&spec), |r| {
                json!({
                    "ratios": r.cases.iter().map(|c| json!({"delta": c.delta, "H1": c.h1, "oracle_H1": c.oracle_h1, "ratio": c.ratio})).collect::<Vec<_>>(),
                    "h1_slope": r.h1_slope,
                })
            })
        }
        Command::OrbitalStability(a) => {
            let spec = experiments::OrbitalSpec {
                m: a.m,
                alphas: a.alpha.clone(),
                eps_list: a.eps_list.clone(),
                s: a.s,
                t_final: a.t_final,
                n: a.n,
                dt: a.dt,
                stride: a.stride,
                seed,
            };
            Produced::from_outcome(experiments::orbital_stability(&spec), |r| {
                json!({
                    "sup_distance": r.cases.iter().map(|c| json!({"alpha": c.alpha, "eps": c.epsilon, "sup": c.sup_distance})).collect::<Vec<_>>(),
                    "exponents": r.fits.iter().map(|f| json!({"alpha": f.alpha, "exponent": f.exponent, "predicted": f.predicted})).collect::<Vec<_>>(),
                })
            })
        }
        Command::SmallData(a) => {
            let spec = experiments::SmallDataSpec {
                alpha: a.alpha,
                eps_list: a.eps_list.clone(),
                s: a.s,
                window_c: a.window_c,
                n: a.n,
                dt: a.dt,
                stride: a.stride,
                seed,
                bound: a.bound,
                growth_delta: a.growth_delta,
                profile: a.init.clone(),
            };
            Produced::from_outcome(experiments::small_data(&spec), |r| {
                json!({
                    "max_ratio": r.cases.iter().map(|c| json!({"eps": c.epsilon, "T": c.t_final, "ratio": c.max_ratio, "final_H1_ratio": c.final_h1_ratio})).collect::<Vec<_>>(),
                    "ratio_spread": r.ratio_spread,
                    "all_bounded": r.all_bounded,
                })
            })
        }
        Command::Verify(a) => {
            let spec = experiments::VerifySpec {
                suite: a.suite,
                m: a.m,
                n: a.n,
                alpha_mode: a.alpha_mode.clone(),
                order: a.order,
                delta: a.delta,
                eps_list: a.eps_list.clone(),
                t_final: a.t_final,
                dt: a.dt,
                seed,
            };
            match experiments::verify(&spec) {
                Ok(report) => {
                    let passed = report.passed();
                    Produced {
                        report: serde_json::to_value(&report).expect("reports serialise"),
                        summary: json!({ "suite": a.suite, "passed": passed }),
                        trajectories: Vec::new(),
                        error: (!passed).then(|| {
                            LabError::Verification(format!("suite {} failed", suite_name(a.suite)))
                        }),
                    }
                }
                Err(error) => Produced {
                    report: Value::Null,
                    summary: json!({ "suite": a.suite, "passed": false }),
                    trajectories: Vec::new(),
                    error: Some(error),
                },
            }
        }
    }
}

fn suite_name(suite: Suite) -> String {
    use clap::ValueEnum;
    suite
        .to_possible_value()
        .map_or_else(String::new, |v| v.get_name().to_string())
}

fn params_of(command: &Command) -> Value {
    let value = match command {
        Command::Simulate(a) => serde_json::to_value(a),
        Command::Turbulence(a) => serde_json::to_value(a),
        Command::OrbitalStability(a) => serde_json::to_value(a),
        Command::SmallData(a) => serde_json::to_value(a),
        Command::Verify(a) => serde_json::to_value(a),
    };
    value.expect("arguments serialise")
}

/// Runs an invocation, writes its outputs and returns the manifest and the
/// process exit code.
pub fn run_invocation(inv: &Invocation) -> LabResult<(RunManifest, i32)> {
    std::fs::create_dir_all(&inv.out_dir).map_err(|source| LabError::Io {
        path: inv.out_dir.display().to_string(),
        source,
    })?;
    let start = Instant::now();
    let produced = match inv.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| LabError::BadInput(format!("worker pool: {e}")))?;
            pool.install(|| execute(&inv.command, inv.seed))
        }
        None => execute(&inv.command, inv.seed),
    };

    let mut outputs = Vec::new();
    for (label, traj) in &produced.trajectories {
        let name = output::csv_name(label);
        output::write_file(&inv.out_dir, &name, &traj.to_csv())?;
        outputs.push(name);
    }
    if !produced.report.is_null() {
        output::write_file(
            &inv.out_dir,
            output::REPORT,
            &output::to_json(&produced.report),
        )?;
        outputs.push(output::REPORT.into());
    }
    if !inv.no_plot && !produced.trajectories.is_empty() {
        output::write_file(
            &inv.out_dir,
            output::PLOT,
            &output::plot_svg(&produced.trajectories),
        )?;
        outputs.push(output::PLOT.into());
    }
    let code = produced
        .error
        .as_ref()
        .map_or(exit::OK, LabError::exit_code);
    let manifest = RunManifest {
        command: inv.command.name().into(),
        params: params_of(&inv.command),
        seed: inv.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
        summary: produced.summary,
        status: produced
            .error
            .as_ref()
            .map_or("ok", LabError::status)
            .into(),
        error: produced.error.as_ref().map(ToString::to_string),
    };
    output::write_file(&inv.out_dir, output::MANIFEST, &output::to_json(&manifest))?;
    Ok((manifest, code))
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::BAD_INPUT
            } else {
                exit::OK
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return exit::BAD_INPUT;
        }
    };
    let result = resolve(cli, &matches).and_then(|inv| run_invocation(&inv));
    match result {
        Ok((manifest, code)) => {
            match &manifest.error {
                Some(err) => eprintln!("szego-lab {}: {err}", manifest.command),
                None => println!(
                    "{}",
                    serde_json::to_string(&manifest.summary).expect("summary serialises")
                ),
            }
            code
        }
        Err(e) => {
            eprintln!("szego-lab: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> (Cli, ArgMatches) {
        let matches = Cli::command().try_get_matches_from(args).unwrap();
        (Cli::from_arg_matches(&matches).unwrap(), matches)
    }

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"eps": 0.2, "T": "3", "n": 16, "seed": 9}"#).unwrap();
        let cfg = cfg.to_str().unwrap();
        let (cli, m) = parse(&[
            "szego-lab",
            "simulate",
            "--init",
            "plane:m=1",
            "--n",
            "32",
            "--config",
            cfg,
        ]);
        let inv = resolve(cli, &m).unwrap();
        let Command::Simulate(a) = inv.command else {
            panic!()
        };
        assert_eq!((a.eps, a.t_final.as_str(), a.n), (0.2, "3", 32));
        assert_eq!(inv.seed, 9);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"epsilon": 0.2}"#).unwrap();
        let (cli, m) = parse(&[
            "szego-lab",
            "simulate",
            "--init",
            "plane:m=1",
            "--config",
            cfg.to_str().unwrap(),
        ]);
        assert!(matches!(resolve(cli, &m), Err(LabError::BadInput(_))));
    }

    #[test]
    fn list_flags_split_on_commas() {
        let (cli, _) = parse(&[
            "szego-lab",
            "orbital-stability",
            "--alpha",
            "0,1",
            "--eps-list",
            "0.2,0.1",
        ]);
        let Command::OrbitalStability(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.alpha, vec![0.0, 1.0]);
        assert_eq!(a.eps_list, vec![0.2, 0.1]);
    }
}
