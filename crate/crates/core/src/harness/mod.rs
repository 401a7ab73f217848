//! Declarative experiments: a TOML config expands into one run per
//! (instance, method, seed). Every run writes its own trace CSV, and a
//! manifest lists the outputs together with a digest of the config.

mod compare;
mod config;
mod plan;
mod validate;

pub use compare::{
    compare_manifest, format_table, summarize, write_summary_csv, SummaryRow, SUMMARY_HEADER,
};
pub use config::{
    ExperimentConfig, LambdaChoice, LambdaRule, MethodConfig, ProblemConfig, ScheduleKind,
    SolverKind, SplitConfig,
};
pub use plan::{
    build_instance, build_problem, resolve_method, split_constants, Instance, ResolvedMethod,
};
pub use validate::{run_checks, CheckOutcome, ValidateOptions};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config, Result, VfosaError};
use crate::par::{parallel_map, with_threads};
use crate::solvers::{run_solver, RunSpec};
use crate::trace::write_trace_csv;

pub const MANIFEST_FILE: &str = "manifest.toml";

/// One line of the manifest. `file` is relative to the manifest directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub label: String,
    pub solver: String,
    pub estimator: String,
    pub problem: String,
    pub instance: usize,
    pub seed: u64,
    pub file: String,
    pub iterations: u64,
    pub oracle_calls: u64,
    pub diverged: bool,
    pub final_rel_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_bound_min_slack: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    /// SHA-256 of the canonical TOML form of the config.
    pub config_digest: String,
    pub epochs: f64,
    pub runs: Vec<ManifestRun>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read manifest {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| config(format!("manifest {}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| VfosaError::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn config_digest(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = cfg.to_toml()?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// `label__i{instance}__s{seed}.csv`
pub fn trace_file_name(label: &str, instance: usize, seed: u64) -> String {
    format!("{label}__i{instance:02}__s{seed}.csv")
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

/// Builds every instance and resolves every method first, so a gate violation
/// aborts before any trace is written. Runs then go to a worker pool of
/// `threads` workers (0 = default). The run stream index is the instance
/// index, so methods sharing a seed start from the same `x⁰`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<ExperimentOutput> {
    cfg.check()?;
    let instances = (0..cfg.instance_count())
        .map(|i| build_instance(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    for inst in &instances {
        for m in &inst.methods {
            for w in &m.warnings {
                log::warn!("{} on instance {}: {w}", m.label, inst.index);
            }
        }
    }
    std::fs::create_dir_all(out_dir)?;

    let jobs: Vec<(usize, usize, u64)> = instances
        .iter()
        .flat_map(|inst| {
            (0..inst.methods.len())
                .flat_map(move |m| cfg.seeds.iter().map(move |&s| (inst.index, m, s)))
        })
        .collect();
    log::info!(
        "{}: {} runs on {} instance(s)",
        cfg.name,
        jobs.len(),
        instances.len()
    );

    let results = with_threads(threads, || {
        parallel_map(jobs.len(), |j| -> Result<ManifestRun> {
            let (i, m, seed) = jobs[j];
            let inst = &instances[i];
            let rm = &inst.methods[m];
            let mut spec = RunSpec::new(
                rm.method,
                rm.estimator.clone(),
                inst.constants.lambda,
                cfg.epochs,
            );
            spec.seed = seed;
            spec.run_index = i as u64;
            spec.init = inst.init.clone();
            spec.metric_every = cfg.metric_every;
            spec.max_iterations = cfg.max_iterations;
            spec.debug = rm.debug;
            let mut res = run_solver(&inst.problem, &spec)?;
            res.trace.meta.method = rm.label.clone();
            let file = trace_file_name(&rm.label, i, seed);
            write_trace_csv(&res.trace, &out_dir.join(&file))?;
            log::debug!("{file}: {} iterations", res.iterations);
            Ok(ManifestRun {
                label: rm.label.clone(),
                solver: rm.method.name().to_string(),
                estimator: spec.estimator_name().to_string(),
                problem: inst.problem.tag().to_string(),
                instance: i,
                seed,
                file,
                iterations: res.iterations,
                oracle_calls: res.oracle_calls,
                diverged: res.diverged,
                final_rel_residual: res.trace.final_residual().unwrap_or(1.0),
                error_bound_min_slack: res.error_bound_min_slack,
            })
        })
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        name: cfg.name.clone(),
        config_digest: config_digest(cfg)?,
        epochs: cfg.epochs,
        runs,
    };
    std::fs::write(out_dir.join("config.toml"), cfg.to_toml()?)?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    manifest.write(&manifest_path)?;
    Ok(ExperimentOutput {
        manifest,
        manifest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::read_trace_csv;

    const CFG: &str = r#"
name = "tiny"
epochs = 3
seeds = [1, 2, 3]
instances = 2

[problem]
kind = "matrix_game"
p1 = 4
samples = 12

[[methods]]
solver = "vfosa_plus"
estimator = "lsvrg"

[[methods]]
solver = "og"
"#;

    #[test]
    fn writes_one_trace_per_run_and_a_manifest() {
        let cfg = ExperimentConfig::from_toml(CFG).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&cfg, dir.path(), 2).unwrap();
        assert_eq!(out.manifest.runs.len(), 2 * 2 * 3);
        for r in &out.manifest.runs {
            let t = read_trace_csv(&dir.path().join(&r.file)).unwrap();
            assert_eq!(t.meta.method, r.label);
            assert_eq!(t.rows[0].rel_residual, 1.0);
            assert!(t
                .rows
                .windows(2)
                .all(|w| w[0].oracle_units < w[1].oracle_units));
        }
        let back = Manifest::read(&out.manifest_path).unwrap();
        assert_eq!(back, out.manifest);
        assert_eq!(back.config_digest.len(), 64);
    }

    #[test]
    fn rerun_is_deterministic_across_thread_counts() {
        let cfg = ExperimentConfig::from_toml(CFG).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = run_experiment(&cfg, a.path(), 1).unwrap().manifest;
        let mb = run_experiment(&cfg, b.path(), 4).unwrap().manifest;
        assert_eq!(ma, mb);
        for r in &ma.runs {
            let ta = read_trace_csv(&a.path().join(&r.file)).unwrap();
            let tb = read_trace_csv(&b.path().join(&r.file)).unwrap();
            assert_eq!(ta.numeric_columns(), tb.numeric_columns());
        }
    }

    #[test]
    fn methods_sharing_a_seed_share_the_start() {
        let text = CFG.replace(
            "solver = \"og\"",
            "solver = \"vfosa_plus\"\nestimator = \"lsvrg\"\nlabel = \"twin\"",
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = run_experiment(&cfg, dir.path(), 0).unwrap().manifest;
        for r in m.runs.iter().filter(|r| r.label == "twin") {
            let twin = read_trace_csv(&dir.path().join(&r.file)).unwrap();
            let orig = read_trace_csv(&dir.path().join(trace_file_name(
                "vfosa_plus-lsvrg",
                r.instance,
                r.seed,
            )))
            .unwrap();
            assert_eq!(twin.numeric_columns(), orig.numeric_columns());
        }
    }

    #[test]
    fn gate_failure_writes_nothing() {
        let text = CFG.replace("[problem]", "[params]\nlambda = 1e9\n\n[problem]");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let e = run_experiment(&cfg, &out, 1).unwrap_err();
        assert!(e.to_string().contains("params"), "{e}");
        assert!(!out.exists());
    }

    #[test]
    fn digest_tracks_content() {
        let a = ExperimentConfig::from_toml(CFG).unwrap();
        let b = ExperimentConfig::from_toml(&CFG.replace("epochs = 3", "epochs = 4")).unwrap();
        assert_eq!(
            config_digest(&a).unwrap(),
            config_digest(&a.clone()).unwrap()
        );
        assert_ne!(config_digest(&a).unwrap(), config_digest(&b).unwrap());
    }
}
