use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constants::{compute_split_constants, default_zeta, SplitConstants};
use crate::data::{make_ambiguous, parse_libsvm, SparseDataset};
use crate::error::{config, Result, VfosaError};
use crate::estimators::{
    build_schedule, practical_preset, EstimatorConfig, EstimatorKind, Schedule, ScheduleConstants,
};
use crate::problem::GeProblem;
use crate::problems::{
    build_logistic_minimax, build_matrix_game, build_synthetic_linear, MatrixGameSpec, RegKind,
    SyntheticLinearSpec,
};
use crate::solvers::{AccelParams, InitialPoint, Method, DEFAULT_MU};

use super::config::{
    ExperimentConfig, LambdaChoice, LambdaRule, MethodConfig, ProblemConfig, ScheduleKind,
    SolverKind,
};

/// A method with every step size fixed for one problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedMethod {
    pub label: String,
    pub method: Method,
    pub estimator: EstimatorConfig,
    pub debug: bool,
    /// Violated schedule lower bounds; the run still proceeds.
    pub warnings: Vec<String>,
}

/// A built problem instance together with its resolved methods.
pub struct Instance {
    pub index: usize,
    pub problem: GeProblem,
    pub constants: SplitConstants,
    pub init: InitialPoint,
    pub methods: Vec<ResolvedMethod>,
}

fn problem_rng(seed: u64, instance: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(instance as u64);
    rng
}

/// Generates instance `instance` of the configured problem family.
pub fn build_problem(
    problem: &ProblemConfig,
    problem_seed: u64,
    instance: usize,
) -> Result<GeProblem> {
    let mut rng = problem_rng(problem_seed, instance);
    match problem {
        ProblemConfig::Logistic {
            reg,
            reg_weight,
            samples,
            features,
            copies,
            noise,
            dataset,
        } => {
            let ds = match dataset {
                Some(path) => parse_libsvm(path)?,
                None => SparseDataset::synthetic(*samples, *features, &mut rng)?,
            }
            .preprocess();
            let amb = make_ambiguous(&ds, *copies, *noise, &mut rng)?;
            build_logistic_minimax(Arc::new(amb), &ds.labels, *reg, *reg_weight)
        }
        ProblemConfig::MatrixGame {
            p1,
            samples,
            theta,
            noise_variance,
            epsilon,
        } => {
            let spec = MatrixGameSpec {
                p1: *p1,
                samples: *samples,
                theta: *theta,
                noise_variance: *noise_variance,
                epsilon: *epsilon,
            };
            Ok(build_matrix_game(&spec, &mut rng)?.0)
        }
        ProblemConfig::SyntheticLinear {
            spectrum_f,
            spectrum_t,
            rho,
            shift,
            components,
            component_spread,
        } => {
            let spec = SyntheticLinearSpec {
                spectrum_f: spectrum_f.clone(),
                spectrum_t: spectrum_t.clone(),
                rho_target: *rho,
                shift: shift.clone(),
                components: *components,
                component_spread: *component_spread,
            };
            build_synthetic_linear(&spec, &mut rng)
        }
    }
}

/// Family presets: logistic runs use `λ = 1/(2L)`, `ζ = 0`, `x⁰ = 0.25·N(0, I)`
/// and ignore the SCAD `ρ` in the step-size gates; matrix games use `λ = 1/L`,
/// `ζ = 0`, `x⁰ = (2/p)·1`; synthetic linear problems use `λ = 1/L̂` with the
/// library `ζ` and `x⁰ = 0`.
struct FamilyDefaults {
    lambda: LambdaRule,
    zeta: Option<f64>,
    gate_rho: Option<f64>,
    init: InitialPoint,
    halpern_eta_factor: f64,
}

fn family_defaults(problem: &ProblemConfig, dim: usize) -> FamilyDefaults {
    match problem {
        ProblemConfig::Logistic { reg, .. } => FamilyDefaults {
            lambda: LambdaRule::HalfInverseL,
            zeta: Some(0.0),
            gate_rho: (*reg == RegKind::Scad).then_some(0.0),
            init: InitialPoint::Gaussian { scale: 0.25 },
            halpern_eta_factor: 0.5,
        },
        ProblemConfig::MatrixGame { .. } => FamilyDefaults {
            lambda: LambdaRule::InverseL,
            zeta: Some(0.0),
            gate_rho: None,
            init: InitialPoint::Constant {
                value: 2.0 / dim as f64,
            },
            halpern_eta_factor: 0.25,
        },
        ProblemConfig::SyntheticLinear { .. } => FamilyDefaults {
            lambda: LambdaRule::InverseLHat,
            zeta: None,
            gate_rho: None,
            init: InitialPoint::Zeros,
            halpern_eta_factor: 0.5,
        },
    }
}

/// Splitting constants for `problem` under the config's `[params]`, with the
/// family presets filling unset fields. Errors name the violated inequality.
pub fn split_constants(cfg: &ExperimentConfig, problem: &GeProblem) -> Result<SplitConstants> {
    let fam = family_defaults(&cfg.problem, problem.dim());
    let l = problem.lipschitz();
    let zeta = cfg
        .params
        .zeta
        .or(fam.zeta)
        .unwrap_or_else(|| default_zeta(l));
    let rho = cfg.params.rho.or(fam.gate_rho).unwrap_or(problem.rho());
    let lambda = match cfg.params.lambda.unwrap_or(LambdaChoice::Rule(fam.lambda)) {
        LambdaChoice::Value(v) => v,
        LambdaChoice::Rule(LambdaRule::InverseLHat) => 1.0 / (l + zeta),
        LambdaChoice::Rule(LambdaRule::InverseL) => 1.0 / l,
        LambdaChoice::Rule(LambdaRule::HalfInverseL) => 0.5 / l,
    };
    compute_split_constants(l, rho, zeta, Some(lambda)).map_err(|e| prefix("params", e))
}

fn prefix(field: &str, e: VfosaError) -> VfosaError {
    match e {
        VfosaError::Config(m) => config(format!("{field}: {m}")),
        other => other,
    }
}

fn estimator_for(
    m: &MethodConfig,
    n: usize,
    mu: f64,
    r: f64,
) -> Result<(EstimatorConfig, Vec<String>)> {
    if m.solver.is_deterministic() {
        return Ok((EstimatorConfig::full_batch(), Vec::new()));
    }
    let kind = m.estimator_kind();
    let (mut est, warnings) = match m.schedule {
        ScheduleKind::Practical => (practical_preset(kind, n, mu, r), Vec::new()),
        ScheduleKind::Theory => {
            let c = ScheduleConstants {
                c_p: m.c_p.unwrap_or(1.0),
                c_b: m.c_b.unwrap_or(1.0),
                r,
                mu,
            };
            let built = build_schedule(kind, n, m.omega.unwrap_or(1.0 / 3.0), c)?;
            (built.config, built.warnings)
        }
    };
    if let Some(b) = m.batch {
        est.batch = Schedule::constant(b);
    }
    if let Some(p) = m.probability {
        est.probability = Schedule::constant(p);
    }
    if m.halved {
        est = est.halved();
    }
    if kind == EstimatorKind::FullBatch {
        est = EstimatorConfig::full_batch();
    }
    Ok((est, warnings))
}

/// Fixes step sizes for one method. Baseline defaults: OG and FKM `η = 1/L`
/// (FKM `α = 3`); VrHalpern `η = 1/(2L)` on logistic and linear problems and
/// `1/(4L)` on matrix games; VrEG `η = 0.99√p/L`; VrFRBS
/// `η = 0.99(1 − √(1 − p))/(2L)`, with `p` the refresh probability at `k = 1`.
pub fn resolve_method(
    cfg: &ExperimentConfig,
    m: &MethodConfig,
    problem: &GeProblem,
    constants: &SplitConstants,
) -> Result<ResolvedMethod> {
    let fam = family_defaults(&cfg.problem, problem.dim());
    let l = problem.lipschitz();
    let mu = cfg.params.mu.unwrap_or(DEFAULT_MU);
    let r = cfg.params.r.unwrap_or(2.0 + 1.0 / mu);
    let (estimator, warnings) = estimator_for(m, problem.n(), mu, r)?;
    let accel = || -> Result<AccelParams> {
        match m.beta {
            Some(beta) => AccelParams::new(mu, r, beta, constants),
            None => AccelParams::theory(constants, Some(mu), Some(r)),
        }
    };
    let p = estimator.probability_at(1);
    let method = match m.solver {
        SolverKind::VfosaPlus => Method::VfosaPlus { params: accel()? },
        SolverKind::VfosaMinus => Method::VfosaMinus { params: accel()? },
        SolverKind::Og => Method::Og {
            eta: m.eta.unwrap_or(1.0 / l),
        },
        SolverKind::Fkm => Method::Fkm {
            eta: m.eta.unwrap_or(1.0 / l),
            alpha: m.alpha.unwrap_or(3.0),
        },
        SolverKind::VrHalpern => Method::VrHalpern {
            eta: m.eta.unwrap_or(fam.halpern_eta_factor / l),
        },
        SolverKind::VrEg => Method::VrEg {
            eta: m.eta.unwrap_or(0.99 * p.sqrt() / l),
        },
        SolverKind::VrFrbs => Method::VrFrbs {
            eta: m.eta.unwrap_or(0.99 * (1.0 - (1.0 - p).sqrt()) / (2.0 * l)),
        },
    };
    Ok(ResolvedMethod {
        label: m.label(),
        method,
        estimator,
        debug: m.debug,
        warnings,
    })
}

/// Builds instance `index` and resolves every method against it.
pub fn build_instance(cfg: &ExperimentConfig, index: usize) -> Result<Instance> {
    let problem = build_problem(&cfg.problem, cfg.problem_seed, index)?;
    let constants = split_constants(cfg, &problem)?;
    let fam = family_defaults(&cfg.problem, problem.dim());
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(i, m)| {
            resolve_method(cfg, m, &problem, &constants)
                .map_err(|e| prefix(&format!("methods[{i}]"), e))
        })
        .collect::<Result<Vec<_>>>()?;
    let init = cfg.params.init.clone().unwrap_or(fam.init);
    Ok(Instance {
        index,
        problem,
        constants,
        init,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::MethodConfig;

    fn game_cfg(p1: usize, samples: usize) -> ExperimentConfig {
        ExperimentConfig {
            name: "g".into(),
            epochs: 2.0,
            seeds: vec![0],
            instances: Some(2),
            problem_seed: 5,
            output_dir: None,
            metric_every: None,
            max_iterations: None,
            problem: ProblemConfig::MatrixGame {
                p1,
                samples,
                theta: 0.8,
                noise_variance: 0.05,
                epsilon: 1e-8,
            },
            params: Default::default(),
            methods: vec![
                MethodConfig::new(SolverKind::VfosaPlus, Some(EstimatorKind::Lsvrg)),
                MethodConfig::new(SolverKind::VrEg, None),
                MethodConfig::new(SolverKind::VrFrbs, None),
                MethodConfig::new(SolverKind::VrHalpern, None),
                MethodConfig::new(SolverKind::Og, None),
            ],
        }
    }

    #[test]
    fn game_presets() {
        let cfg = game_cfg(100, 1000);
        let inst = build_instance(&cfg, 0).unwrap();
        let l = inst.problem.lipschitz();
        assert!((inst.constants.lambda - 1.0 / l).abs() <= 1e-15 / l);
        assert!((inst.constants.beta_bar - 3.0 / (4.0 * l)).abs() <= 1e-12 / l);
        match &inst.init {
            InitialPoint::Constant { value } => assert_eq!(*value, 0.01),
            other => panic!("{other:?}"),
        }
        let est = &inst.methods[0].estimator;
        assert_eq!(est.batch_size(1, 1000), 50);
        assert!((est.probability_at(1) - 1.0 / (2.0 * 1000f64.cbrt())).abs() < 1e-15);
        let p = est.probability_at(1);
        assert_eq!(
            inst.methods[1].method,
            Method::VrEg {
                eta: 0.99 * p.sqrt() / l
            }
        );
        assert_eq!(
            inst.methods[2].method,
            Method::VrFrbs {
                eta: 0.99 * (1.0 - (1.0 - p).sqrt()) / (2.0 * l)
            }
        );
        assert_eq!(inst.methods[3].method, Method::VrHalpern { eta: 0.25 / l });
        assert_eq!(inst.methods[4].method, Method::Og { eta: 1.0 / l });
        assert_eq!(inst.methods[4].estimator, EstimatorConfig::full_batch());
    }

    #[test]
    fn halved_variant_halves_both() {
        let mut cfg = game_cfg(10, 1000);
        cfg.methods[0].halved = true;
        cfg.methods[0].estimator = Some(EstimatorKind::Lsarah);
        let inst = build_instance(&cfg, 0).unwrap();
        let est = &inst.methods[0].estimator;
        assert_eq!(est.batch_size(1, 1000), 7);
        assert!((est.probability_at(1) - 0.25 / 1000f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn instances_differ_and_replay() {
        let cfg = game_cfg(6, 10);
        let a = build_instance(&cfg, 0).unwrap();
        let b = build_instance(&cfg, 1).unwrap();
        let a2 = build_instance(&cfg, 0).unwrap();
        assert_ne!(a.problem.lipschitz(), b.problem.lipschitz());
        assert_eq!(a.problem.lipschitz(), a2.problem.lipschitz());
    }

    #[test]
    fn gate_violation_names_params() {
        let mut cfg = game_cfg(6, 10);
        cfg.params.lambda = Some(LambdaChoice::Value(100.0));
        let e = build_instance(&cfg, 0).err().unwrap().to_string();
        assert!(e.contains("params") && e.contains("sqrt"), "{e}");
        let mut cfg = game_cfg(6, 10);
        cfg.methods[0].beta = Some(10.0);
        let e = build_instance(&cfg, 0).err().unwrap().to_string();
        assert!(e.contains("methods[0]") && e.contains("beta"), "{e}");
    }

    #[test]
    fn logistic_presets() {
        let cfg = ExperimentConfig {
            problem: ProblemConfig::Logistic {
                reg: RegKind::Scad,
                reg_weight: 5e-3,
                samples: 50,
                features: 6,
                copies: 3,
                noise: 0.05,
                dataset: None,
            },
            methods: vec![MethodConfig::new(
                SolverKind::VfosaMinus,
                Some(EstimatorKind::Hsgd),
            )],
            ..game_cfg(3, 3)
        };
        let inst = build_instance(&cfg, 0).unwrap();
        let l = inst.problem.lipschitz();
        assert_eq!(inst.problem.dim(), 7 + 3);
        assert!((inst.constants.lambda - 0.5 / l).abs() <= 1e-15 / l);
        let lam = inst.constants.lambda;
        assert!((inst.constants.beta_bar - lam * (4.0 - l * lam) / 4.0).abs() <= 1e-15 * lam);
        assert_eq!(inst.init, InitialPoint::Gaussian { scale: 0.25 });
    }
}
