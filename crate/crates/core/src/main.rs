use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use curvediff::brownian::{self, Event, SimulationConfig};
use curvediff::calculus::{self, geodesic_shoot_curve, probe_volume_growth};
use curvediff::check::{self, CheckOptions, PROPERTIES};
use curvediff::curve::{DiscreteCurve, MetricOrder, TangentVector};
use curvediff::io::{self, OutputDir, RunManifest, RunStatus};
use curvediff::rng::gaussian_block;
use curvediff::triangle::{self, ConformalMetric, TriangleBmConfig, TrianglePoint};
use curvediff::Error;

/// Runs with at least this many vertices, or at least this horizon, need
/// `--extended`.
const EXTENDED_VERTICES: usize = 100;
const EXTENDED_HORIZON: f64 = 1000.0;

#[derive(Parser, Debug)]
#[command(name = "curvediff", version, about = "Brownian motion on spaces of discrete closed curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one Brownian trajectory.
    Simulate(SimulateArgs),
    /// Simulate independent trajectories and aggregate statistics.
    Ensemble(EnsembleArgs),
    /// Run numerical property suites.
    Check(CheckArgs),
    /// Normalized triangle space: conformal grids, fits, radial lengths, BM.
    Triangle(TriangleArgs),
    /// Shoot a unit-speed geodesic in a random direction.
    Geodesic(GeodesicArgs),
    /// Probe the growth of the volume density along random geodesics.
    ProbeVolume(ProbeArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "curvediff-out")]
    out: PathBuf,
    /// JSON object of settings; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed (overridden by CURVEDIFF_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Allow large runs (n >= 100 or horizon >= 1000).
    #[arg(long)]
    extended: bool,
}

#[derive(Args, Debug, Clone)]
struct CurveArgs {
    /// circle, square or file.
    #[arg(long)]
    shape: Option<String>,
    /// Number of vertices for generated shapes.
    #[arg(long)]
    n: Option<usize>,
    /// Ambient dimension for generated circles.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    /// Curve file (JSON or point list) for --shape file.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Metric order.
    #[arg(long)]
    m: Option<u32>,
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Horizon; sets the number of steps to t_end / dt.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    edge_floor: Option<f64>,
    /// Also write an SVG of the recorded curves.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    curve: CurveArgs,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct EnsembleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    curve: CurveArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    /// Property to run (repeatable); all if omitted.
    #[arg(long)]
    property: Vec<String>,
    /// Restrict to one metric order.
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct TriangleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    m: Option<u32>,
    /// Conformal factor on a grid over [-2, 2]².
    #[arg(long)]
    grid: bool,
    /// Power-law fit of the factor near (1, 0).
    #[arg(long)]
    fit: bool,
    /// Length of the radial path into (1, 0).
    #[arg(long)]
    radial: bool,
    /// Brownian motion of the apex.
    #[arg(long)]
    bm: bool,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    clamp: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    edge_floor: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    y0: Option<f64>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct GeodesicArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    curve: CurveArgs,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    curve: CurveArgs,
    /// Comma-separated increasing radii.
    #[arg(long)]
    radii: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    /// Geodesic step size.
    #[arg(long)]
    step: Option<f64>,
}

/// Settings resolved from flags, the config file and defaults, in that order.
struct Settings {
    file: Map<String, Value>,
    resolved: Map<String, Value>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self, Error> {
        let file = match path {
            None => Map::new(),
            Some(p) => match serde_json::from_str::<Value>(&std::fs::read_to_string(p)?)? {
                Value::Object(m) => m,
                _ => return Err(Error::InvalidConfig("config file must hold a JSON object".into())),
            },
        };
        Ok(Self { file, resolved: Map::new() })
    }

    fn file_value<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>, Error> {
        let alt = key.replace('-', "_");
        for k in [key, alt.as_str()] {
            if let Some(v) = self.file.get(k) {
                return serde_json::from_value(v.clone())
                    .map(Some)
                    .map_err(|e| Error::InvalidConfig(format!("config key '{k}': {e}")));
            }
        }
        Ok(None)
    }

    fn opt<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, Error> {
        let file = self.file_value(key)?;
        let v = flag.or(file);
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), serde_json::to_value(v)?);
        }
        Ok(v)
    }

    fn get<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, Error> {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), serde_json::to_value(&v)?);
        Ok(v)
    }

    fn flag(&mut self, key: &str, set: bool) -> Result<bool, Error> {
        self.get(key, set.then_some(true), false)
    }

    /// Seed from CURVEDIFF_SEED, else the flag, else the config file, else 0.
    fn seed(&mut self, flag: Option<u64>) -> Result<u64, Error> {
        let env = match std::env::var("CURVEDIFF_SEED") {
            Ok(s) => Some(s.trim().parse::<u64>().map_err(|e| Error::InvalidConfig(format!("CURVEDIFF_SEED: {e}")))?),
            Err(_) => None,
        };
        self.get("seed", env.or(flag), 0)
    }

    /// Rejects config keys the command does not understand, before any work.
    fn reject_unknown(&self, known: &[&str]) -> Result<(), Error> {
        let unused: Vec<&String> = self
            .file
            .keys()
            .filter(|k| !known.contains(&k.replace('_', "-").as_str()))
            .collect();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("unknown config keys: {unused:?}")))
        }
    }
}

fn known_keys(command: &str) -> &'static [&'static str] {
    match command {
        "simulate" => &[
            "seed", "extended", "shape", "n", "d", "radius", "curve", "m", "dt", "steps", "t-end", "record-every",
            "edge-floor", "svg",
        ],
        "ensemble" => &[
            "seed", "extended", "shape", "n", "d", "radius", "curve", "m", "dt", "steps", "t-end", "record-every",
            "edge-floor", "svg", "runs",
        ],
        "check" => &["seed", "extended", "property", "m", "samples"],
        "triangle" => &[
            "seed", "extended", "m", "grid", "fit", "radial", "bm", "resolution", "clamp", "r-min", "r-max", "points",
            "r0", "runs", "dt", "steps", "t-end", "record-every", "edge-floor", "x0", "y0",
        ],
        "geodesic" => &["seed", "extended", "shape", "n", "d", "radius", "curve", "m", "t-end", "steps"],
        "probe-volume" => &["seed", "extended", "shape", "n", "d", "radius", "curve", "m", "radii", "samples", "step"],
        _ => &[],
    }
}

fn status_for(e: &Error) -> RunStatus {
    match e {
        Error::SingularMetric(_)
        | Error::EdgeCollapse { .. }
        | Error::GeodesicExit { .. }
        | Error::StepTooLarge { .. }
        | Error::RegularityViolation { .. } => RunStatus::NumericalFailure,
        _ => RunStatus::ConfigError,
    }
}

struct Run {
    settings: Settings,
    out: OutputDir,
    manifest: RunManifest,
    extended: bool,
}

type Outcome = Result<(RunStatus, Option<String>), Error>;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Simulate(a) => ("simulate", &a.common),
        Command::Ensemble(a) => ("ensemble", &a.common),
        Command::Check(a) => ("check", &a.common),
        Command::Triangle(a) => ("triangle", &a.common),
        Command::Geodesic(a) => ("geodesic", &a.common),
        Command::ProbeVolume(a) => ("probe-volume", &a.common),
    };
    let out = match OutputDir::create(&common.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create output directory {}: {e}", common.out.display());
            return ExitCode::from(RunStatus::ConfigError.exit_code() as u8);
        }
    };
    let manifest = RunManifest::new(argv, name);
    let settings = match Settings::load(common.config.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            return finish(out, manifest, Map::new(), Err(e));
        }
    };
    let mut run = Run { settings, out, manifest, extended: false };
    let outcome = (|| -> Outcome {
        run.settings.reject_unknown(known_keys(name))?;
        run.extended = run.settings.flag("extended", common.extended)?;
        match &cli.command {
            Command::Simulate(a) => cmd_simulate(&mut run, a),
            Command::Ensemble(a) => cmd_ensemble(&mut run, a),
            Command::Check(a) => cmd_check(&mut run, a),
            Command::Triangle(a) => cmd_triangle(&mut run, a),
            Command::Geodesic(a) => cmd_geodesic(&mut run, a),
            Command::ProbeVolume(a) => cmd_probe(&mut run, a),
        }
    })();
    let Run { settings, out, manifest, .. } = run;
    finish(out, manifest, settings.resolved, outcome)
}

fn finish(out: OutputDir, mut manifest: RunManifest, config: Map<String, Value>, outcome: Outcome) -> ExitCode {
    manifest.config = Value::Object(config);
    let (status, message) = match outcome {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            (status_for(&e), Some(e.to_string()))
        }
    };
    if let Some(m) = &message {
        if status == RunStatus::Ok {
            eprintln!("{m}");
        }
    }
    manifest.finish(status, message);
    if let Err(e) = out.write_manifest(&mut manifest) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(RunStatus::NumericalFailure.exit_code() as u8);
    }
    ExitCode::from(status.exit_code() as u8)
}

fn resolve_curve(run: &mut Run, a: &CurveArgs, default_n: usize) -> Result<(DiscreteCurve, MetricOrder), Error> {
    let s = &mut run.settings;
    let m = MetricOrder(s.get("m", a.m, 2)?);
    let shape: String = s.get("shape", a.shape.clone(), "circle".to_string())?;
    let c = match shape.as_str() {
        "circle" => {
            let n = s.get("n", a.n, default_n)?;
            let d = s.get("d", a.d, 2)?;
            let r = s.get("radius", a.radius, 1.0)?;
            DiscreteCurve::circle(n, r, d)?
        }
        "square" => DiscreteCurve::square(),
        "file" => {
            let p: PathBuf = s
                .opt("curve", a.curve.clone())?
                .ok_or_else(|| Error::InvalidConfig("--shape file needs --curve".into()))?;
            io::read_curve(&p)?
        }
        other => return Err(Error::InvalidConfig(format!("unknown shape '{other}' (circle, square, file)"))),
    };
    Ok((c, m))
}

fn resolve_steps(s: &mut Settings, dt: f64, steps: Option<usize>, t_end: Option<f64>, default: usize) -> Result<usize, Error> {
    let steps = s.opt("steps", steps)?;
    let t_end = s.opt("t-end", t_end)?;
    let n = match (steps, t_end) {
        (Some(n), None) => n,
        (None, None) => default,
        (steps, Some(t)) => {
            if !(t >= 0.0) {
                return Err(Error::InvalidConfig(format!("t-end = {t} must be non-negative")));
            }
            let n = (t / dt).round() as usize;
            if (n as f64 * dt - t).abs() > 1e-9 * t.max(1.0) {
                return Err(Error::InvalidConfig(format!("t-end = {t} is not a multiple of dt = {dt}")));
            }
            if steps.is_some_and(|s| s != n) {
                return Err(Error::InvalidConfig("--steps and --t-end disagree".into()));
            }
            n
        }
    };
    s.resolved.insert("steps".into(), n.into());
    Ok(n)
}

fn resolve_sim(run: &mut Run, curve: &CurveArgs, sim: &SimArgs, seed: Option<u64>) -> Result<(SimulationConfig, bool), Error> {
    let (c, m) = resolve_curve(run, curve, 12)?;
    let s = &mut run.settings;
    let mut cfg = SimulationConfig::new(c, m);
    cfg.dt = s.get("dt", sim.dt, brownian::DEFAULT_DT)?;
    cfg.n_steps = resolve_steps(s, cfg.dt, sim.steps, sim.t_end, 1000)?;
    cfg.record_every = s.get("record-every", sim.record_every, brownian::DEFAULT_RECORD_EVERY)?;
    cfg.edge_floor = s.get("edge-floor", sim.edge_floor, brownian::DEFAULT_EDGE_FLOOR)?;
    cfg.seed = s.seed(seed)?;
    let svg = s.flag("svg", sim.svg)?;
    run.manifest.seed = Some(cfg.seed);
    if (cfg.initial.n() >= EXTENDED_VERTICES || cfg.horizon() >= EXTENDED_HORIZON) && !run.extended {
        return Err(Error::InvalidConfig(format!(
            "n = {} and horizon {} are large; pass --extended to run them",
            cfg.initial.n(),
            cfg.horizon()
        )));
    }
    cfg.validate()?;
    Ok((cfg, svg))
}

fn events_json(events: &[Event]) -> Result<Vec<Value>, Error> {
    events.iter().map(|e| Ok(serde_json::to_value(e)?)).collect()
}

fn cmd_simulate(run: &mut Run, a: &SimulateArgs) -> Outcome {
    let (cfg, svg) = resolve_sim(run, &a.curve, &a.sim, a.common.seed)?;
    let rec = brownian::simulate(&cfg)?;
    run.out.write("trajectory.jsonl", io::trajectory_jsonl(&rec))?;
    run.out.write("stats.csv", io::stats_csv(&rec))?;
    run.out.write("initial.json", io::curve_to_json(&cfg.initial))?;
    if let Some(last) = rec.curves.last() {
        run.out.write("final.json", io::curve_to_json(last))?;
    }
    if svg {
        run.out.write("curves.svg", io::svg_polylines(&rec.curves))?;
    }
    run.manifest.events = events_json(&rec.events)?;
    if rec.terminated_early() {
        let msg = format!("run ended at step {} of {}", rec.completed_steps, cfg.n_steps);
        return Ok((RunStatus::NumericalFailure, Some(msg)));
    }
    Ok((RunStatus::Ok, None))
}

#[derive(Serialize)]
struct RunSummary {
    run: usize,
    completed_steps: usize,
    min_edge: f64,
    final_length: f64,
    events: Vec<Event>,
}

fn cmd_ensemble(run: &mut Run, a: &EnsembleArgs) -> Outcome {
    let (cfg, svg) = resolve_sim(run, &a.curve, &a.sim, a.common.seed)?;
    let runs = run.settings.get("runs", a.runs, 10)?;
    let result = brownian::ensemble(&cfg, runs)?;
    run.out.write("ensemble.csv", io::ensemble_csv(&result.stats))?;
    for (r, rec) in result.runs.iter().enumerate() {
        run.out.write(&format!("runs/run_{r:04}_stats.csv"), io::stats_csv(rec))?;
    }
    run.out.write("run_0000_trajectory.jsonl", io::trajectory_jsonl(&result.runs[0]))?;
    if svg {
        run.out.write("run_0000_curves.svg", io::svg_polylines(&result.runs[0].curves))?;
    }
    let summaries: Vec<RunSummary> = result
        .runs
        .iter()
        .enumerate()
        .map(|(r, rec)| RunSummary {
            run: r,
            completed_steps: rec.completed_steps,
            min_edge: rec.min_edge_overall(),
            final_length: rec.length_series.last().copied().unwrap_or(f64::NAN),
            events: rec.events.clone(),
        })
        .collect();
    run.out.write_json("runs.json", &summaries)?;
    run.manifest.events = result
        .events()
        .into_iter()
        .map(|(r, e)| {
            let mut v = serde_json::to_value(e)?;
            v["run"] = r.into();
            Ok(v)
        })
        .collect::<Result<_, Error>>()?;
    Ok((RunStatus::Ok, None))
}

fn cmd_check(run: &mut Run, a: &CheckArgs) -> Outcome {
    let s = &mut run.settings;
    let props: Vec<String> = s.get("property", (!a.property.is_empty()).then(|| a.property.clone()), Vec::new())?;
    let names: Vec<&str> = if props.is_empty() { PROPERTIES.to_vec() } else { props.iter().map(String::as_str).collect() };
    let m = s.opt("m", a.m)?;
    let opts = CheckOptions { orders: m.map(|m| vec![m]), samples: s.get("samples", a.samples, 100)?, seed: s.seed(a.common.seed)? };
    run.manifest.seed = Some(opts.seed);
    let report = check::run_checks(&names, &opts)?;
    run.out.write_json("check.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.passed {
        Ok((RunStatus::Ok, None))
    } else {
        Ok((RunStatus::CheckFailed, Some(format!("failing properties: {}", report.failing().join(", ")))))
    }
}

fn cmd_triangle(run: &mut Run, a: &TriangleArgs) -> Outcome {
    let s = &mut run.settings;
    let m = MetricOrder(s.get("m", a.m, 1)?);
    let grid = s.flag("grid", a.grid)?;
    let fit = s.flag("fit", a.fit)?;
    let radial = s.flag("radial", a.radial)?;
    let bm = s.flag("bm", a.bm)?;
    if !(grid || fit || radial || bm) {
        return Err(Error::InvalidConfig("choose at least one of --grid, --fit, --radial, --bm".into()));
    }
    let mut summary = Map::new();
    if grid {
        let res = s.get("resolution", a.resolution, triangle::GRID_RESOLUTION)?;
        let clamp = s.get("clamp", a.clamp, triangle::DEFAULT_GRID_CLAMP)?;
        let g = triangle::conformal_grid(m, res, clamp)?;
        run.out.write(&format!("grid_m{m}.csv"), io::grid_csv(&g))?;
        run.out.write_json(&format!("grid_m{m}.json"), &g.spec)?;
        summary.insert("grid".into(), serde_json::to_value(&g.spec)?);
    }
    if fit {
        let lo = s.get("r-min", a.r_min, 1e-5)?;
        let hi = s.get("r-max", a.r_max, 1e-2)?;
        let points = s.get("points", a.points, 13)?;
        if points < 2 || !(lo < hi) {
            return Err(Error::InvalidConfig("fit needs r-min < r-max and at least two points".into()));
        }
        let f = triangle::estimate_blowup_exponent(m, &triangle::log_radii(hi, lo, points))?;
        run.out.write_json(&format!("fit_m{m}.json"), &f)?;
        summary.insert("fit".into(), serde_json::json!({"exponent": f.exponent, "constant": f.constant, "closed_form": f.closed_form}));
    }
    if radial {
        let r0 = s.get("r0", a.r0, 0.5)?;
        let r = triangle::radial_length(m, r0)?;
        run.out.write_json(&format!("radial_m{m}.json"), &r)?;
        summary.insert("radial".into(), serde_json::to_value(r.classification)?);
    }
    if bm {
        let metric = ConformalMetric::sobolev(m)?;
        let v0 = TrianglePoint::new(s.get("x0", a.x0, 0.0)?, s.get("y0", a.y0, 1.0)?)?;
        let mut cfg = TriangleBmConfig::new(metric, v0);
        cfg.dt = s.get("dt", a.dt, brownian::DEFAULT_DT)?;
        cfg.n_steps = resolve_steps(s, cfg.dt, a.steps, a.t_end, 10_000)?;
        cfg.record_every = s.get("record-every", a.record_every, brownian::DEFAULT_RECORD_EVERY)?;
        cfg.edge_floor = s.get("edge-floor", a.edge_floor, brownian::DEFAULT_EDGE_FLOOR)?;
        cfg.seed = s.seed(a.common.seed)?;
        let runs = s.get("runs", a.runs, 100)?;
        run.manifest.seed = Some(cfg.seed);
        if cfg.dt * cfg.n_steps as f64 >= EXTENDED_HORIZON && !run.extended {
            return Err(Error::InvalidConfig("horizon >= 1000 needs --extended".into()));
        }
        let (report, trajectories) = triangle::triangle_bm_ensemble(&cfg, runs)?;
        run.out.write_json(&format!("triangle_bm_m{m}.json"), &report)?;
        run.out.write(&format!("triangle_bm_m{m}_run_0000.jsonl"), io::triangle_trajectory_jsonl(&trajectories[0]))?;
        run.manifest.events = trajectories
            .iter()
            .enumerate()
            .flat_map(|(r, t)| t.events.iter().map(move |e| (r, e)))
            .map(|(r, e)| {
                let mut v = serde_json::to_value(e)?;
                v["run"] = r.into();
                Ok(v)
            })
            .collect::<Result<_, Error>>()?;
        summary.insert(
            "bm".into(),
            serde_json::json!({"runs": runs, "approach_count": report.approach_count, "approach_fraction": report.approach_fraction}),
        );
    }
    println!("{}", serde_json::to_string_pretty(&Value::Object(summary))?);
    Ok((RunStatus::Ok, None))
}

#[derive(Serialize)]
struct GeodesicSummary {
    m: u32,
    t_end: f64,
    steps: usize,
    relative_energy_drift: f64,
    /// max over states and edges of |log(|e_i(t)| / |e_i(0)|)| · 2^{m-1} / t
    max_edge_log_ratio_rate: f64,
}

fn cmd_geodesic(run: &mut Run, a: &GeodesicArgs) -> Outcome {
    let (c, m) = resolve_curve(run, &a.curve, 12)?;
    let s = &mut run.settings;
    let t_end = s.get("t-end", a.t_end, 1.0)?;
    let steps = s.get("steps", a.steps, (t_end / calculus::DEFAULT_GEODESIC_STEP).round().max(1.0) as usize)?;
    let seed = s.seed(a.common.seed)?;
    run.manifest.seed = Some(seed);
    let raw = TangentVector::new(c.d(), gaussian_block(seed, 0, 0, c.dim()))?;
    let h = calculus::normalize_tangent(&c, &raw, m)?;
    let path = geodesic_shoot_curve(&c, &h, t_end, steps, m)?;

    let mut text = String::new();
    let lens0 = c.edge_lengths();
    let mut rate: f64 = 0.0;
    for (k, st) in path.iter().enumerate() {
        let ck = st.curve(c.d())?;
        let mut line = io::curve_to_json(&ck);
        line.truncate(line.trim_end().len() - 1);
        let body = line.trim_start_matches('{');
        text.push_str(&format!(
            "{{\"step\":{k},\"t\":{},\"hamiltonian\":{},{body}}}\n",
            io::fmt_f64(st.t),
            io::fmt_f64(st.hamiltonian)
        ));
        if st.t > 0.0 {
            for (l, l0) in ck.edge_lengths().iter().zip(&lens0) {
                rate = rate.max((l / l0).ln().abs() * 2f64.powi(m.get() as i32 - 1) / st.t);
            }
        }
    }
    run.out.write("geodesic.jsonl", text)?;
    let h0 = path[0].hamiltonian;
    let drift = path.iter().map(|s| ((s.hamiltonian - h0) / h0).abs()).fold(0.0, f64::max);
    let summary = GeodesicSummary { m: m.get(), t_end, steps, relative_energy_drift: drift, max_edge_log_ratio_rate: rate };
    run.out.write_json("geodesic_summary.json", &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok((RunStatus::Ok, None))
}

fn cmd_probe(run: &mut Run, a: &ProbeArgs) -> Outcome {
    let (c, m) = resolve_curve(run, &a.curve, 5)?;
    let s = &mut run.settings;
    let radii_text = s.get("radii", a.radii.clone(), "0.5,1,1.5,2,2.5,3".to_string())?;
    let radii = radii_text
        .split(',')
        .map(|r| r.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidConfig(format!("radii: {e}")))?;
    let samples = s.get("samples", a.samples, 16)?;
    let step = s.get("step", a.step, 1e-2)?;
    let seed = s.seed(a.common.seed)?;
    run.manifest.seed = Some(seed);
    let report = probe_volume_growth(&c, m, &radii, samples, seed, step)?;
    run.out.write_json("growth.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok((RunStatus::Ok, None))
}
