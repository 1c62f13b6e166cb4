use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{Algorithm, EnvConfig, EnvSpec, ExperimentConfig};
use super::output::{heatmap_svg, metrics_csv, mu_csv, policy_csv, read_mu_csv, read_policy_csv, summary_csv};
use crate::baselines::{run_baseline, Baseline, BaselineConfig};
use crate::dynamics::EXACT_TOL;
use crate::envs::{GridCrowd, TwoIslands};
use crate::error::{Error, Result};
use crate::eval::{
    exploitability, exploitability_unregularized, mfne_residual, mixing_profile, monotonicity_probe,
    pinsker_bound_check,
};
use crate::exact::{exact_fixed_point_trace, exact_mftrpo, ExactTrpoConfig, MftrpoConfig};
use crate::mdp::MfMdp;
use crate::sampled::{make_oracle, sample_based_mftrpo, SampledMftrpoConfig, SampledTrpoConfig};
use crate::trace::{IterRecord, RunTrace, TraceOptions};
use crate::types::Dist;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "MFG_TRPO_THREADS";

/// A constructed benchmark: the model, its start distribution and, for grids,
/// the layout (for heatmaps).
#[derive(Clone, Debug)]
pub struct BuiltEnv {
    pub mdp: MfMdp,
    pub nu: Dist,
    pub grid: Option<GridCrowd>,
}

/// Builds the configured environment. `seed` only matters for the islands
/// family, whose move probabilities are random.
pub fn build_env(env: &EnvConfig, seed: u64) -> Result<BuiltEnv> {
    match &env.spec {
        EnvSpec::Grid(spec) => {
            let grid = GridCrowd::new(spec.clone())?;
            let nu = grid.nu();
            let mdp = grid.clone().into_mdp(env.gamma)?;
            Ok(BuiltEnv {
                mdp,
                nu,
                grid: Some(grid),
            })
        }
        EnvSpec::Islands(spec) => {
            let mut spec = spec.clone();
            spec.seed = env.islands_seed.unwrap_or(seed);
            let islands = TwoIslands::new(spec)?;
            let nu = islands.nu();
            Ok(BuiltEnv {
                mdp: islands.into_mdp(env.gamma)?,
                nu,
                grid: None,
            })
        }
    }
}

fn trace_options(cfg: &ExperimentConfig) -> TraceOptions {
    TraceOptions {
        cadence: cfg.output.eval,
        snapshot_steps: cfg.output.snapshot_steps.clone(),
        snapshot_every: cfg.output.snapshot_every,
        unregularized: cfg.output.unregularized,
        tol: EXACT_TOL,
    }
}

/// Runs the configured solver for one seed.
pub fn run_seed(cfg: &ExperimentConfig, built: &BuiltEnv, seed: u64) -> Result<RunTrace> {
    let s = &cfg.solver;
    let mdp = &built.mdp;
    let trace = trace_options(cfg);
    match s.algorithm {
        Algorithm::ExactMftrpo => {
            let mut c = MftrpoConfig::new(
                ExactTrpoConfig::new(s.eta, s.inner_iters),
                s.outer_iters,
                s.beta,
                s.pushforward_steps,
                built.nu.clone(),
            );
            c.warm_start = s.warm_start;
            c.trace = trace;
            exact_mftrpo(mdp, &c)
        }
        Algorithm::SampledMftrpo => {
            let env = make_oracle(mdp, &built.nu)?;
            let mut t = SampledTrpoConfig::new(s.eta, s.inner_iters, s.samples, seed);
            t.epsilon = s.epsilon;
            t.delta = s.delta;
            t.horizon = s.horizon;
            t.grow_samples = s.grow_samples;
            t.estimator = s.estimator;
            t.restart = s.restart;
            let mut c = SampledMftrpoConfig::new(t, s.outer_iters, s.beta, s.pushforward_steps, s.trajectories, seed);
            c.mu0 = Some(built.nu.clone());
            c.warm_start = s.warm_start;
            c.trace = trace;
            sample_based_mftrpo(&env, &c, Some(mdp))
        }
        Algorithm::ExactFixedPoint => {
            exact_fixed_point_trace(mdp, &built.nu, s.beta, s.pushforward_steps, s.outer_iters, s.eta, &trace)
        }
        Algorithm::FictitiousPlay | Algorithm::OnlineMirrorDescent => {
            let algo = if s.algorithm == Algorithm::FictitiousPlay {
                Baseline::FictitiousPlay
            } else {
                Baseline::OnlineMirrorDescent
            };
            let mut c = BaselineConfig::new(algo, s.outer_iters, s.eta, built.nu.clone());
            c.learning_rate = s.learning_rate;
            c.beta = s.beta;
            c.pushforward_steps = s.pushforward_steps;
            c.fp_population = s.fp_population;
            c.trace = trace;
            run_baseline(mdp, &c)
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    /// Replaces the config's seed list with this single seed.
    pub seed_override: Option<u64>,
    /// Worker threads; the global pool when absent.
    pub threads: Option<usize>,
}

/// Reads [`THREADS_ENV`]; unset or empty means the default pool.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .map(Some)
            .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        _ => Ok(None),
    }
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    pub trace: RunTrace,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub runs: Vec<SeedResult>,
    /// Every file written, in write order.
    pub files: Vec<PathBuf>,
}

/// Collects written paths so a failed run can delete them.
struct Writer {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
}

impl Writer {
    fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        std::fs::write(&path, contents).map_err(Error::io(&path))
    }

    fn rollback(self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

fn run_info(seed: u64, trace: &RunTrace) -> String {
    let mut out = String::from("key,value\n");
    let _ = writeln!(out, "seed,{seed}");
    let _ = writeln!(out, "algorithm,{}", trace.algorithm);
    let _ = writeln!(
        out,
        "final_exploitability,{}",
        trace.final_exploitability.map(|x| x.to_string()).unwrap_or_default()
    );
    for (k, v) in &trace.notes {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

fn write_seed(w: &mut Writer, cfg: &ExperimentConfig, built: &BuiltEnv, run: &SeedResult) -> Result<()> {
    let seed = run.seed;
    let tr = &run.trace;
    w.write(&format!("metrics_{seed}.csv"), &metrics_csv(tr.all_records(), cfg.output.timing))?;
    for (k, mu) in &tr.mu_snapshots {
        w.write(&format!("mu_{seed}_{k}.csv"), &mu_csv(mu, built.grid.as_ref()))?;
        if let (true, Some(g)) = (cfg.output.heatmaps, built.grid.as_ref()) {
            w.write(&format!("mu_{seed}_{k}.svg"), &heatmap_svg(g, mu, &format!("seed {seed}, step {k}")))?;
        }
    }
    w.write(&format!("mu_{seed}_final.csv"), &mu_csv(&tr.final_mu, built.grid.as_ref()))?;
    w.write(&format!("policy_{seed}.csv"), &policy_csv(&tr.final_policy))?;
    w.write(&format!("run_{seed}.csv"), &run_info(seed, tr))
}

/// Runs every seed and writes `metrics_<seed>.csv`, `mu_<seed>_<k>.csv`
/// (plus `.svg` for grids), `mu_<seed>_final.csv`, `policy_<seed>.csv`,
/// `run_<seed>.csv` and `summary.csv`. On failure nothing is left behind.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutput> {
    let seeds = match opts.seed_override {
        Some(s) => vec![s],
        None => cfg.seeds.clone(),
    };
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds to run"));
    }
    let dir = opts.out_dir.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let runs = with_threads(opts.threads, || {
        seeds
            .par_iter()
            .map(|&seed| -> Result<(BuiltEnv, SeedResult)> {
                let built = build_env(&cfg.env, seed)?;
                let trace = run_seed(cfg, &built, seed)?;
                Ok((built, SeedResult { seed, trace }))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut w = Writer::open(&dir)?;
    let written = (|| -> Result<()> {
        for (built, run) in &runs {
            write_seed(&mut w, cfg, built, run)?;
        }
        let per_seed: Vec<Vec<IterRecord>> = runs
            .iter()
            .map(|(_, r)| r.trace.all_records().cloned().collect())
            .collect();
        w.write("summary.csv", &summary_csv(&per_seed, cfg.output.timing)?)
    })();
    match written {
        Ok(()) => Ok(ExperimentOutput {
            dir,
            runs: runs.into_iter().map(|(_, r)| r).collect(),
            files: w.files,
        }),
        Err(e) => {
            w.rollback();
            Err(e)
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalSummary {
    pub exploitability: f64,
    pub exploitability_unreg: f64,
    pub value_gap: f64,
    pub fixed_point_gap: f64,
    pub pinsker_passed: bool,
    pub pinsker_min_slack: f64,
}

impl EvalSummary {
    pub fn to_lines(&self) -> String {
        format!(
            "exploitability_reg={}\nexploitability_unreg={}\nvalue_gap={}\nfixed_point_gap={}\npinsker={} min_slack={}\n",
            self.exploitability,
            self.exploitability_unreg,
            self.value_gap,
            self.fixed_point_gap,
            if self.pinsker_passed { "pass" } else { "fail" },
            self.pinsker_min_slack
        )
    }
}

/// Diagnostics of a stored `(policy, mu)` pair on the configured environment
/// (first seed).
pub fn evaluate_files(cfg: &ExperimentConfig, policy: &Path, mu: &Path) -> Result<EvalSummary> {
    let built = build_env(&cfg.env, cfg.seeds[0])?;
    let pi = read_policy_csv(policy)?;
    let mu = read_mu_csv(mu)?;
    let eta = cfg.solver.eta;
    let phi = exploitability(&built.mdp, &pi, &mu, eta, EXACT_TOL)?.phi;
    let phi0 = exploitability_unregularized(&built.mdp, &pi, &mu, EXACT_TOL)?.phi;
    let res = mfne_residual(&built.mdp, &pi, &mu, eta)?;
    let pinsker = pinsker_bound_check(&built.mdp, &pi, &mu, eta)?;
    Ok(EvalSummary {
        exploitability: phi,
        exploitability_unreg: phi0,
        value_gap: res.value_gap,
        fixed_point_gap: res.fixed_point_gap,
        pinsker_passed: pinsker.passed,
        pinsker_min_slack: pinsker.min_slack,
    })
}

/// Number of random pairs drawn by [`check_assumptions`].
pub const PROBE_SAMPLES: usize = 64;
/// Steps of the mixing profile.
pub const MIXING_HORIZON: usize = 200;
/// Profile entries below this are round-off and left out of the fit.
const MIXING_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct MixingFit {
    /// Fitted geometric rate.
    pub rho: f64,
    pub r_squared: f64,
    /// Profile points used by the fit.
    pub points: usize,
}

/// Least-squares fit of `ln tv_t = a + t ln rho` over entries above the
/// round-off floor. `None` when fewer than two points remain (the chain is
/// already stationary).
pub fn fit_geometric_decay(profile: &[f64]) -> Option<MixingFit> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > MIXING_FLOOR)
        .map(|(t, &v)| (t as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(MixingFit {
        rho: slope.exp(),
        r_squared,
        points: pts.len(),
    })
}

#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub eta: f64,
    pub big_m: usize,
    pub probe_samples: usize,
    /// `None` for a single-state game.
    pub max_ratio: Option<f64>,
    /// `None` when the chain starts stationary.
    pub mixing: Option<MixingFit>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn monotone_verdict(&self) -> &'static str {
        match self.max_ratio {
            None => "degenerate",
            Some(r) if r < 1.0 => "pass",
            Some(_) => "warn",
        }
    }

    pub fn mixing_verdict(&self) -> &'static str {
        match &self.mixing {
            None => "trivial",
            Some(f) if f.rho < 1.0 && f.r_squared >= 0.9 => "pass",
            Some(_) => "warn",
        }
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from("check,value,verdict\n");
        let _ = writeln!(out, "eta,{},", self.eta);
        let _ = writeln!(out, "pushforward_steps,{},", self.big_m);
        let _ = writeln!(out, "probe_samples,{},", self.probe_samples);
        let _ = writeln!(out, "monotonicity_max_ratio,{},{}", opt(self.max_ratio), self.monotone_verdict());
        let v = self.mixing_verdict();
        let _ = writeln!(out, "mixing_rho,{},{v}", opt(self.mixing.as_ref().map(|f| f.rho)));
        let _ = writeln!(out, "mixing_r_squared,{},{v}", opt(self.mixing.as_ref().map(|f| f.r_squared)));
        out
    }
}

/// Monotonicity probe and a mixing fit for the configured `(eta, M)`. The
/// mixing profile is `TV(nu K^t, stationary)` for the kernel of the best
/// response to `nu`.
pub fn check_assumptions(cfg: &ExperimentConfig) -> Result<AssumptionReport> {
    let seed = cfg.seeds[0];
    let built = build_env(&cfg.env, seed)?;
    let (eta, big_m) = (cfg.solver.eta, cfg.solver.pushforward_steps);
    let probe = monotonicity_probe(&built.mdp, eta, big_m, PROBE_SAMPLES, seed)?;
    let frozen = built.mdp.freeze(&built.nu)?;
    let (_, br) = frozen.soft_value_iteration(eta, EXACT_TOL)?;
    let kernel = frozen.induced_kernel(&br)?;
    let mixing = fit_geometric_decay(&mixing_profile(&kernel, &built.nu, MIXING_HORIZON)?);
    let mut notes = Vec::new();
    if probe.degenerate {
        notes.push("single state: no distinct pairs, monotonicity ratio undefined".to_string());
    }
    if mixing.is_none() {
        notes.push("start distribution is already stationary: trivially mixing".to_string());
    }
    Ok(AssumptionReport {
        eta,
        big_m,
        probe_samples: probe.samples,
        max_ratio: (!probe.degenerate).then_some(probe.max_ratio),
        mixing,
        notes,
    })
}

/// [`check_assumptions`] plus `assumptions.csv` in `dir`.
pub fn write_assumptions(cfg: &ExperimentConfig, dir: &Path) -> Result<AssumptionReport> {
    let report = check_assumptions(cfg)?;
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let path = dir.join("assumptions.csv");
    std::fs::write(&path, report.to_csv()).map_err(Error::io(&path))?;
    Ok(report)
}
