//! Experiment config files.
//!
//! Grammar: `[section]` headers, `key = value` lines, `#` starts a comment,
//! lists are comma separated, grid cells are written `x:y`. Sections `env`,
//! `solver` and `run` are required, `output` is optional. Unknown sections
//! and keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::baselines::FpPopulation;
use crate::envs::{GridSpec, IslandsSpec};
use crate::error::{Error, Result};
use crate::sampled::{QEstimator, Restart};
use crate::schedule::StepSchedule;
use crate::trace::EvalCadence;

#[derive(Clone, Debug, PartialEq)]
pub enum EnvSpec {
    Grid(GridSpec),
    Islands(IslandsSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub spec: EnvSpec,
    pub gamma: f64,
    /// Islands move probabilities come from the run seed unless pinned here.
    pub islands_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    ExactMftrpo,
    SampledMftrpo,
    ExactFixedPoint,
    FictitiousPlay,
    OnlineMirrorDescent,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::ExactMftrpo,
        Algorithm::SampledMftrpo,
        Algorithm::ExactFixedPoint,
        Algorithm::FictitiousPlay,
        Algorithm::OnlineMirrorDescent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ExactMftrpo => "exact-mftrpo",
            Algorithm::SampledMftrpo => "sampled-mftrpo",
            Algorithm::ExactFixedPoint => "exact-fixed-point",
            Algorithm::FictitiousPlay => "fp",
            Algorithm::OnlineMirrorDescent => "omd",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    /// Inner TRPO iterations `L`.
    pub inner_iters: usize,
    /// Outer iterations `K`.
    pub outer_iters: usize,
    pub beta: StepSchedule,
    /// `M`.
    pub pushforward_steps: usize,
    /// `I` per inner iteration.
    pub samples: usize,
    /// `P`.
    pub trajectories: usize,
    /// Rollout horizon `T`; derived from `epsilon` when absent.
    pub horizon: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub grow_samples: bool,
    pub estimator: QEstimator,
    pub restart: Restart,
    pub warm_start: bool,
    pub learning_rate: f64,
    pub fp_population: FpPopulation,
}

impl SolverConfig {
    /// Table defaults for `algorithm`: `L = 10, beta = 0.01, M = 1` for the
    /// exact family and `L = 100, beta = 0.1, I = P = 3e5, M = 100` for the
    /// sampled one. `eta = 0.05` throughout.
    pub fn defaults(algorithm: Algorithm, outer_iters: usize) -> Self {
        let sampled = algorithm == Algorithm::SampledMftrpo;
        SolverConfig {
            algorithm,
            eta: 0.05,
            inner_iters: if sampled { 100 } else { 10 },
            outer_iters,
            beta: StepSchedule::Constant(if sampled { 0.1 } else { 0.01 }),
            pushforward_steps: if sampled { 100 } else { 1 },
            samples: 300_000,
            trajectories: 300_000,
            horizon: None,
            epsilon: 0.1,
            delta: 0.05,
            grow_samples: false,
            estimator: QEstimator::default(),
            restart: Restart::default(),
            warm_start: true,
            learning_rate: 1.0,
            fp_population: FpPopulation::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub snapshot_steps: Vec<usize>,
    pub snapshot_every: Option<usize>,
    pub heatmaps: bool,
    pub eval: EvalCadence,
    pub unregularized: bool,
    /// Write real wall-clock times; off by default so reruns are byte-identical.
    pub timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            snapshot_steps: vec![0],
            snapshot_every: None,
            heatmaps: true,
            eval: EvalCadence::Auto,
            unregularized: true,
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub seeds: Vec<u64>,
}

const SECTIONS: [&str; 4] = ["env", "solver", "output", "run"];
const REQUIRED: [&str; 3] = ["env", "solver", "run"];

const ENV_KEYS: &[&str] = &[
    "family",
    "layout",
    "width",
    "height",
    "walls",
    "target",
    "start",
    "kappa",
    "slipperiness",
    "mu_floor",
    "gamma",
    "initial_state",
    "seed",
];
const SOLVER_KEYS: &[&str] = &[
    "algorithm",
    "eta",
    "inner_iters",
    "outer_iters",
    "beta",
    "pushforward_steps",
    "samples",
    "trajectories",
    "horizon",
    "epsilon",
    "delta",
    "grow_samples",
    "estimator",
    "restart",
    "warm_start",
    "learning_rate",
    "fp_population",
];
const OUTPUT_KEYS: &[&str] = &[
    "directory",
    "snapshot_steps",
    "snapshot_every",
    "heatmaps",
    "eval_every",
    "unregularized",
    "timing",
];
const RUN_KEYS: &[&str] = &["seeds"];

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

struct Parsed<'a> {
    path: &'a str,
    sections: BTreeMap<String, Section>,
}

fn allowed_keys(section: &str) -> &'static [&'static str] {
    match section {
        "env" => ENV_KEYS,
        "solver" => SOLVER_KEYS,
        "output" => OUTPUT_KEYS,
        _ => RUN_KEYS,
    }
}

fn err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn tokenize<'a>(path: &'a str, text: &str) -> Result<Parsed<'a>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(path, line, "section header is missing ']'"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(err(path, line, format!("unknown section [{name}]")));
            }
            if sections.contains_key(name) {
                return Err(err(path, line, format!("duplicate section [{name}]")));
            }
            sections.insert(name.to_string(), Section { line, ..Section::default() });
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| err(path, line, format!("expected `key = value`, got `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let Some(section) = current.as_deref() else {
            return Err(err(path, line, format!("key `{key}` appears before any section")));
        };
        if key.is_empty() {
            return Err(err(path, line, "empty key"));
        }
        if !allowed_keys(section).contains(&key) {
            return Err(err(path, line, format!("unknown key `{key}` in [{section}]")));
        }
        let sec = sections.get_mut(section).expect("section was inserted");
        if sec.entries.contains_key(key) {
            return Err(err(path, line, format!("duplicate key `{key}`")));
        }
        sec.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    for name in REQUIRED {
        if !sections.contains_key(name) {
            let last = text.lines().count();
            return Err(err(path, last, format!("missing required section [{name}]")));
        }
    }
    Ok(Parsed { path, sections })
}

/// Typed access to one section, tracking line numbers for errors.
struct View<'p> {
    path: &'p str,
    name: &'static str,
    section: Option<&'p Section>,
}

impl View<'_> {
    fn entry(&self, key: &str) -> Option<&Entry> {
        self.section.and_then(|s| s.entries.get(key))
    }

    fn header_line(&self) -> usize {
        self.section.map_or(0, |s| s.line)
    }

    fn bad(&self, e: &Entry, key: &str, what: &str) -> Error {
        err(self.path, e.line, format!("[{}] {key}: expected {what}, got `{}`", self.name, e.value))
    }

    fn get<T>(&self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).ok_or_else(|| self.bad(e, key, what)),
        }
    }

    fn require<T>(&self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
        self.get(key, what, parse)?.ok_or_else(|| {
            err(
                self.path,
                self.header_line(),
                format!("[{}] is missing required key `{key}`", self.name),
            )
        })
    }

    fn check(&self, key: &str, ok: bool, what: &str) -> Result<()> {
        match self.entry(key) {
            Some(e) if !ok => Err(self.bad(e, key, what)),
            _ => Ok(()),
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_count(s: &str) -> Option<usize> {
    // accepts 300000, 3e5, 3.0e5
    if let Ok(n) = s.parse::<usize>() {
        return Some(n);
    }
    let x: f64 = s.parse().ok()?;
    (x >= 0.0 && x.fract() == 0.0 && x <= 1e15).then_some(x as usize)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "on" => Some(true),
        "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|t| item(t.trim())).collect()
}

fn parse_cell(s: &str) -> Option<(usize, usize)> {
    let (x, y) = s.split_once(':')?;
    Some((x.trim().parse().ok()?, y.trim().parse().ok()?))
}

fn parse_schedule(s: &str) -> Option<StepSchedule> {
    match s.split_once(':') {
        Some(("harmonic", c)) => parse_f64(c.trim()).map(StepSchedule::Harmonic),
        Some(_) => None,
        None => parse_f64(s).map(StepSchedule::Constant),
    }
}

fn parse_env(v: &View) -> Result<EnvConfig> {
    let family = v.require("family", "grid or islands", |s| {
        matches!(s, "grid" | "islands").then(|| s.to_string())
    })?;
    let gamma = v.get("gamma", "a number", parse_f64)?.unwrap_or(0.9);
    v.check("gamma", (0.0..1.0).contains(&gamma), "a discount in [0, 1)")?;
    let kappa = v.get("kappa", "a number", parse_f64)?;
    let mu_floor = v.get("mu_floor", "a number", parse_f64)?;
    if let Some(f) = mu_floor {
        v.check("mu_floor", f > 0.0, "a positive floor")?;
    }
    let grid_only = ["layout", "width", "height", "walls", "target", "start", "slipperiness"];
    let islands_only = ["initial_state", "seed"];
    let (foreign, family_name) = if family == "grid" {
        (&islands_only[..], "grid")
    } else {
        (&grid_only[..], "islands")
    };
    for key in foreign {
        if let Some(e) = v.entry(key) {
            return Err(err(
                v.path,
                e.line,
                format!("[env] key `{key}` does not apply to family {family_name}"),
            ));
        }
    }
    let spec = if family == "grid" {
        let layout = v.get("layout", "five-by-five, four-rooms or open", |s| {
            matches!(s, "five-by-five" | "four-rooms" | "open").then(|| s.to_string())
        })?;
        let mut spec = match layout.as_deref().unwrap_or("five-by-five") {
            "four-rooms" => GridSpec::four_rooms(false),
            "open" => {
                let w = v.require("width", "a positive integer", parse_count)?;
                let h = v.require("height", "a positive integer", parse_count)?;
                GridSpec::open(w, h)
            }
            _ => GridSpec::five_by_five(false),
        };
        if layout.as_deref() != Some("open") {
            for key in ["width", "height"] {
                if let Some(e) = v.entry(key) {
                    return Err(err(v.path, e.line, format!("[env] `{key}` needs layout = open")));
                }
            }
        }
        if let Some(walls) = v.get("walls", "a list of x:y cells", |s| parse_list(s, parse_cell))? {
            spec.walls = walls;
        }
        if let Some(t) = v.get("target", "an x:y cell or none", |s| match s {
            "none" => Some(None),
            _ => parse_cell(s).map(Some),
        })? {
            spec.target = t;
        }
        if let Some(c) = v.get("start", "an x:y cell", parse_cell)? {
            spec.initial_cell = c;
        }
        if let Some(p) = v.get("slipperiness", "a number", parse_f64)? {
            v.check("slipperiness", (0.0..=1.0).contains(&p), "a probability")?;
            spec.slipperiness = p;
        }
        if let Some(k) = kappa {
            spec.kappa = k;
        }
        if let Some(f) = mu_floor {
            spec.mu_floor = f;
        }
        EnvSpec::Grid(spec)
    } else {
        let mut spec = IslandsSpec::default();
        if let Some(k) = kappa {
            spec.crowd_kappa = k;
        }
        if let Some(f) = mu_floor {
            spec.mu_floor = f;
        }
        if let Some(s) = v.get("initial_state", "a state index", parse_count)? {
            spec.initial_state = s;
        }
        EnvSpec::Islands(spec)
    };
    let islands_seed = v.get("seed", "an unsigned integer", |s| s.parse::<u64>().ok())?;
    Ok(EnvConfig {
        spec,
        gamma,
        islands_seed,
    })
}

fn parse_solver(v: &View) -> Result<SolverConfig> {
    let algorithm = v.require(
        "algorithm",
        "exact-mftrpo, sampled-mftrpo, exact-fixed-point, fp or omd",
        Algorithm::parse,
    )?;
    let outer_iters = v.require("outer_iters", "a positive integer", parse_count)?;
    v.check("outer_iters", outer_iters >= 1, "a positive integer")?;
    let mut c = SolverConfig::defaults(algorithm, outer_iters);
    if let Some(x) = v.get("eta", "a number", parse_f64)? {
        v.check("eta", x > 0.0, "a positive number")?;
        c.eta = x;
    }
    if let Some(x) = v.get("inner_iters", "a positive integer", parse_count)? {
        v.check("inner_iters", x >= 1, "a positive integer")?;
        c.inner_iters = x;
    }
    if let Some(b) = v.get("beta", "a step size in [0, 1] or harmonic:c", parse_schedule)? {
        v.check("beta", b.validate().is_ok(), "a step size in [0, 1] or harmonic:c")?;
        c.beta = b;
    }
    if let Some(x) = v.get("pushforward_steps", "a positive integer", parse_count)? {
        v.check("pushforward_steps", x >= 1, "a positive integer")?;
        c.pushforward_steps = x;
    }
    if let Some(x) = v.get("samples", "a positive integer", parse_count)? {
        v.check("samples", x >= 1, "a positive integer")?;
        c.samples = x;
    }
    if let Some(x) = v.get("trajectories", "a positive integer", parse_count)? {
        v.check("trajectories", x >= 1, "a positive integer")?;
        c.trajectories = x;
    }
    c.horizon = v.get("horizon", "a positive integer or auto", |s| match s {
        "auto" => Some(None),
        _ => parse_count(s).filter(|&t| t >= 1).map(Some),
    })?
    .flatten();
    if let Some(x) = v.get("epsilon", "a number", parse_f64)? {
        v.check("epsilon", x > 0.0, "a positive number")?;
        c.epsilon = x;
    }
    if let Some(x) = v.get("delta", "a number", parse_f64)? {
        v.check("delta", x > 0.0 && x < 1.0, "a number in (0, 1)")?;
        c.delta = x;
    }
    if let Some(x) = v.get("grow_samples", "true or false", parse_bool)? {
        c.grow_samples = x;
    }
    if let Some(x) = v.get("estimator", "importance-weighted or action-mean", |s| match s {
        "importance-weighted" => Some(QEstimator::ImportanceWeighted),
        "action-mean" => Some(QEstimator::ActionMean),
        _ => None,
    })? {
        c.estimator = x;
    }
    if let Some(x) = v.get("restart", "oracle or mean-field", |s| match s {
        "oracle" => Some(Restart::Oracle),
        "mean-field" => Some(Restart::MeanField),
        _ => None,
    })? {
        c.restart = x;
    }
    if let Some(x) = v.get("warm_start", "true or false", parse_bool)? {
        c.warm_start = x;
    }
    if let Some(x) = v.get("learning_rate", "a number", parse_f64)? {
        v.check("learning_rate", x >= 0.0, "a non-negative number")?;
        c.learning_rate = x;
    }
    if let Some(x) = v.get("fp_population", "pushforward or stationary", |s| match s {
        "pushforward" => Some(FpPopulation::PushForward),
        "stationary" => Some(FpPopulation::Stationary),
        _ => None,
    })? {
        c.fp_population = x;
    }
    Ok(c)
}

fn parse_output(v: &View) -> Result<OutputConfig> {
    let mut o = OutputConfig::default();
    if let Some(d) = v.get("directory", "a path", |s| (!s.is_empty()).then(|| PathBuf::from(s)))? {
        o.directory = d;
    }
    if let Some(s) = v.get("snapshot_steps", "a list of iterations", |s| parse_list(s, parse_count))? {
        o.snapshot_steps = s;
    }
    o.snapshot_every = v
        .get("snapshot_every", "a non-negative integer", parse_count)?
        .filter(|&n| n > 0);
    if let Some(x) = v.get("heatmaps", "true or false", parse_bool)? {
        o.heatmaps = x;
    }
    if let Some(x) = v.get("eval_every", "auto, never or a positive integer", |s| match s {
        "auto" => Some(EvalCadence::Auto),
        "never" => Some(EvalCadence::Never),
        _ => parse_count(s).filter(|&n| n >= 1).map(EvalCadence::Every),
    })? {
        o.eval = x;
    }
    if let Some(x) = v.get("unregularized", "true or false", parse_bool)? {
        o.unregularized = x;
    }
    if let Some(x) = v.get("timing", "true or false", parse_bool)? {
        o.timing = x;
    }
    Ok(o)
}

/// Parses config text; `path` only labels error messages.
pub fn parse_config_str(text: &str, path: &str) -> Result<ExperimentConfig> {
    let parsed = tokenize(path, text)?;
    let view = |name: &'static str| View {
        path: parsed.path,
        name,
        section: parsed.sections.get(name),
    };
    let env = parse_env(&view("env"))?;
    let solver = parse_solver(&view("solver"))?;
    let output = parse_output(&view("output"))?;
    let run = view("run");
    let seeds = run.require("seeds", "a list of unsigned integers", |s| {
        parse_list(s, |t| t.parse::<u64>().ok()).filter(|l| !l.is_empty())
    })?;
    if let Some(e) = run.entry("seeds") {
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(err(path, e.line, "[run] seeds: duplicate seed"));
        }
    }
    Ok(ExperimentConfig {
        env,
        solver,
        output,
        seeds,
    })
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_config_str(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[env]\nfamily = grid\n[solver]\nalgorithm = exact-mftrpo\nouter_iters = 10\n[run]\nseeds = 1\n";

    fn line_of(e: Error) -> usize {
        match e {
            Error::Config { line, .. } => line,
            other => panic!("not a config error: {other}"),
        }
    }

    #[test]
    fn minimal_file_uses_table_defaults() {
        let c = parse_config_str(MINIMAL, "t").unwrap();
        assert_eq!(c.env.gamma, 0.9);
        assert_eq!(c.solver.eta, 0.05);
        assert_eq!(c.solver.inner_iters, 10);
        assert_eq!(c.solver.beta, StepSchedule::Constant(0.01));
        assert_eq!(c.seeds, vec![1]);
        match c.env.spec {
            EnvSpec::Grid(g) => assert_eq!(g, GridSpec::five_by_five(false)),
            _ => panic!(),
        }
    }

    #[test]
    fn empty_file_names_env() {
        let e = parse_config_str("", "t").unwrap_err();
        assert!(e.to_string().contains("[env]"), "{e}");
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = MINIMAL.replace("outer_iters = 10", "outer_iters = 10\nlr = 3");
        assert_eq!(line_of(parse_config_str(&text, "t").unwrap_err()), 6);
    }

    #[test]
    fn bad_value_reports_its_line() {
        let text = MINIMAL.replace("family = grid", "family = grid\ntarget = 4;4");
        let e = parse_config_str(&text, "t").unwrap_err();
        assert!(e.to_string().contains("x:y"), "{e}");
        assert_eq!(line_of(e), 3);
    }

    #[test]
    fn cells_lists_and_schedules() {
        let text = MINIMAL
            .replace("family = grid", "family = grid\nwalls = 1:1, 2:1\ntarget = 4:4 # poi")
            .replace("outer_iters = 10", "outer_iters = 3e3\nbeta = harmonic:1");
        let c = parse_config_str(&text, "t").unwrap();
        let EnvSpec::Grid(g) = c.env.spec else { panic!() };
        assert_eq!(g.walls, vec![(1, 1), (2, 1)]);
        assert_eq!(g.target, Some((4, 4)));
        assert_eq!(c.solver.outer_iters, 3000);
        assert_eq!(c.solver.beta, StepSchedule::Harmonic(1.0));
    }

    #[test]
    fn islands_rejects_grid_keys() {
        let text = MINIMAL.replace("family = grid", "family = islands\nwalls = 1:1");
        assert_eq!(line_of(parse_config_str(&text, "t").unwrap_err()), 3);
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let text = MINIMAL.replace("seeds = 1", "seeds = 1, 2, 1");
        assert!(parse_config_str(&text, "t").is_err());
    }
}
