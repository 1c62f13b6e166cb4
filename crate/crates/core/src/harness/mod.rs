//! Config-driven experiment runs.
//!
//! A run reads an [`ExperimentConfig`], builds the environment once per
//! seed, runs the solver and writes CSV metrics, distribution snapshots and
//! SVG heatmaps. Seeds run in parallel; file contents do not depend on the
//! number of worker threads.

mod config;
mod output;
mod run;

pub use config::{
    parse_config, parse_config_str, Algorithm, EnvConfig, EnvSpec, ExperimentConfig, OutputConfig, SolverConfig,
};
pub use output::{
    heatmap_svg, metrics_csv, mu_csv, policy_csv, read_mu_csv, read_policy_csv, summary_csv, HEAT_HIGH, HEAT_LOW,
    METRICS_HEADER,
};
pub use run::{
    build_env, check_assumptions, evaluate_files, fit_geometric_decay, run_experiment, run_seed, threads_from_env,
    with_threads, write_assumptions, AssumptionReport, BuiltEnv, EvalSummary, ExperimentOutput, MixingFit,
    RunOptions, SeedResult, MIXING_HORIZON, PROBE_SAMPLES, THREADS_ENV,
};

/// Bundled configs: `(name, text)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("grid5-exact", include_str!("../../presets/grid5-exact.cfg")),
    ("grid5-exact-eta03", include_str!("../../presets/grid5-exact-eta03.cfg")),
    ("grid5-sampled", include_str!("../../presets/grid5-sampled.cfg")),
    ("grid5-sampled-desk", include_str!("../../presets/grid5-sampled-desk.cfg")),
    ("four-rooms-exact", include_str!("../../presets/four-rooms-exact.cfg")),
    ("islands-exact", include_str!("../../presets/islands-exact.cfg")),
    ("grid5-fp", include_str!("../../presets/grid5-fp.cfg")),
    ("grid5-omd", include_str!("../../presets/grid5-omd.cfg")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// First comment line of a preset.
pub fn preset_summary(text: &str) -> &str {
    text.lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .map(str::trim)
        .unwrap_or("")
}

pub fn load_preset(name: &str) -> crate::Result<ExperimentConfig> {
    let text = preset(name).ok_or_else(|| crate::Error::invalid(format!("unknown preset `{name}`")))?;
    parse_config_str(text, &format!("preset:{name}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_parse() {
        for (name, _) in PRESETS {
            load_preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
