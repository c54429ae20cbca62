//! Subcommand implementations. Each one writes a single CSV table.

use quartamp::amp::{
    em_learn_coeffs, optimal_for, run_bamp, run_baseline_amp, spectral_pca, AmpTrace, BampMode, PreprocessCoeffs,
};
use quartamp::exec::Exec;
use quartamp::linalg::SymMatrix;
use quartamp::replica::{baseline_fixed_point, bo_fixed_point, mismatched_fixed_point, pca_cosine};
use quartamp::sampling::{
    haar_orthogonal, mix_seed, noise_from_basis, sample_eigenvalues, stream, SeedScheme, SpikedInstance,
};
use quartamp::se::{required_kmax, se_run, MomentSource, SeConfig, SeTrajectory};
use quartamp::spectrum::{density as rho, EnsembleParams, FreeCumulants};

use crate::config::{CoeffSpec, ExperimentConfig, SeMoments};
use crate::error::CliError;
use crate::output::{fmt_num, Table};

type CliResult = Result<(), CliError>;

/// Replica overlap guess used to seed the Bayes-optimal solver.
const REPLICA_INIT_M: f64 = 0.99;
const REPLICA_DAMPING: f64 = 0.5;

fn params(cfg: &ExperimentConfig) -> Result<EnsembleParams, CliError> {
    Ok(EnsembleParams::from_mu(cfg.mu)?)
}

fn coeffs_for(cfg: &ExperimentConfig, p: &EnsembleParams, lambda: f64) -> Result<PreprocessCoeffs, CliError> {
    Ok(match &cfg.coeffs {
        CoeffSpec::Optimal => optimal_for(p, lambda)?,
        CoeffSpec::Explicit(c) => PreprocessCoeffs::new(c.clone())?,
    })
}

fn cumulants_for(cfg: &ExperimentConfig, p: &EnsembleParams, k: usize) -> FreeCumulants {
    FreeCumulants::for_ensemble(p, cfg.kmax.max(required_kmax(k, cfg.t)))
}

fn se_source(cfg: &ExperimentConfig, lambda: f64) -> MomentSource {
    match cfg.se_moments {
        SeMoments::Quadrature => MomentSource::Quadrature,
        SeMoments::MonteCarlo => MomentSource::MonteCarlo {
            samples: cfg.mc_samples,
            seed: mix_seed(cfg.seed, lambda.to_bits(), stream::MONTE_CARLO),
        },
    }
}

fn solve_bamp_se(
    cfg: &ExperimentConfig,
    p: &EnsembleParams,
    cum: &FreeCumulants,
    lambda: f64,
) -> Result<SeTrajectory, CliError> {
    let coeffs = coeffs_for(cfg, p, lambda)?;
    let sc = SeConfig {
        lambda,
        prior: cfg.prior,
        coeffs: coeffs.c,
        epsilon: cfg.epsilon,
        t_max: cfg.t,
        source: se_source(cfg, lambda),
        exec: Exec::default(),
    };
    Ok(se_run(&sc, cum)?)
}

fn finish(table: Table, cfg: &ExperimentConfig, command: &str, failures: usize) -> CliResult {
    table.write(&cfg.output_path(&format!("{command}.csv")), cfg, command)?;
    if failures > 0 {
        return Err(CliError::Numerical(quartamp::Error::Instability(format!(
            "{failures} row(s) failed; see the status column"
        ))));
    }
    Ok(())
}

fn status(ok: bool) -> String {
    if ok { "ok" } else { "failed" }.into()
}

pub fn density(cfg: &ExperimentConfig) -> CliResult {
    let p = params(cfg)?;
    let (lo, hi) = p.support();
    let mut t = Table::new(&["x", "rho"]);
    for i in 0..cfg.points {
        let x = lo + (hi - lo) * i as f64 / (cfg.points - 1) as f64;
        t.push(vec![fmt_num(x), fmt_num(rho(x, &p))]);
    }
    finish(t, cfg, "density", 0)
}

pub fn cumulants(cfg: &ExperimentConfig) -> CliResult {
    let p = params(cfg)?;
    let c = FreeCumulants::for_ensemble(&p, cfg.kmax);
    let mut t = Table::new(&["k", "moment", "cumulant"]);
    for k in 1..=cfg.kmax {
        t.push(vec![k.to_string(), fmt_num(p.exact_moment(k)), fmt_num(c.kappa(k))]);
    }
    finish(t, cfg, "cumulants", 0)
}

/// Noise, eigenvalues and signal of one trial; shared by every λ.
struct TrialNoise {
    seeds: SeedScheme,
    z: SymMatrix,
    d: Vec<f64>,
    x: Vec<f64>,
}

fn trial_noise(cfg: &ExperimentConfig, p: &EnsembleParams, trial: usize) -> TrialNoise {
    let seeds = SeedScheme::new(cfg.seed, trial as u64);
    let d = sample_eigenvalues(cfg.n, p, &mut seeds.rng(stream::EIGENVALUES));
    let o = haar_orthogonal(cfg.n, &mut seeds.rng(stream::BASIS));
    let x = cfg.prior.sample(cfg.n, &mut seeds.rng(stream::PRIOR));
    let z = noise_from_basis(&o, &d, Exec::default());
    TrialNoise { seeds, z, d, x }
}

impl TrialNoise {
    fn instance(&self, lambda: f64) -> SpikedInstance {
        SpikedInstance::from_noise(self.z.clone(), self.d.clone(), self.x.clone(), lambda)
    }
}

pub fn spectrum(cfg: &ExperimentConfig) -> CliResult {
    let p = params(cfg)?;
    let lambda = cfg.lambdas[0];
    let coeffs = coeffs_for(cfg, &p, lambda)?;
    let inst = trial_noise(cfg, &p, 0).instance(lambda);
    let mut ey = inst.y.eigenvalues();
    let mut ej: Vec<f64> = ey.iter().map(|&s| coeffs.apply_scalar(s)).collect();
    ey.sort_by(|a, b| b.total_cmp(a));
    ej.sort_by(|a, b| b.total_cmp(a));
    let mut t = Table::new(&["rank", "eig_y", "eig_j"]);
    for (i, (a, b)) in ey.iter().zip(&ej).enumerate() {
        t.push(vec![(i + 1).to_string(), fmt_num(*a), fmt_num(*b)]);
    }
    finish(t, cfg, "spectrum", 0)
}

pub fn replica(cfg: &ExperimentConfig) -> CliResult {
    let p = params(cfg)?;
    let mut t = Table::new(&["lambda", "m", "kappa", "tilde_v", "hat_m", "mmse", "iterations", "residual", "status"]);
    let mut failures = 0;
    for &l in &cfg.lambdas {
        match bo_fixed_point(l, cfg.prior, &p, REPLICA_INIT_M, REPLICA_DAMPING) {
            Ok(s) => t.push(vec![
                fmt_num(l),
                fmt_num(s.m),
                fmt_num(s.kappa),
                fmt_num(s.tilde_v),
                fmt_num(s.hat_m),
                fmt_num(s.mmse),
                s.iterations.to_string(),
                fmt_num(s.residual),
                status(true),
            ]),
            Err(_) => {
                failures += 1;
                let mut row = vec![fmt_num(l)];
                row.extend(std::iter::repeat("NaN".to_string()).take(7));
                row.push(status(false));
                t.push(row);
            }
        }
    }
    finish(t, cfg, "replica", failures)
}

pub fn baseline_se(cfg: &ExperimentConfig) -> CliResult {
    let p = params(cfg)?;
    let cum = FreeCumulants::for_ensemble(&p, cfg.kmax);
    let mut t = Table::new(&["lambda", "delta", "sigma", "mse", "iterations", "status"]);
    let mut failures = 0;
    for &l in &cfg.lambdas {
        match baseline_fixed_point(l, cfg.prior, &cum) {
            Ok(s) => t.push(vec![
                fmt_num(l),
                fmt_num(s.delta_star),
                fmt_num(s.sigma_star),
                fmt_num(s.mse),
                s.iterations.to_string(),
                status(true),
            ]),
            Err(_) => {
                failures += 1;
                t.push(vec![fmt_num(l), "NaN".into(), "NaN".into(), "NaN".into(), "0".into(), status(false)]);
            }
        }
    }
    finish(t, cfg, "baseline-se", failures)
}

pub fn bamp_se(cfg: &ExperimentConfig) -> CliResult {
    let p = params(cfg)?;
    let k = coeffs_for(cfg, &p, cfg.lambdas[0])?.k();
    let cum = cumulants_for(cfg, &p, k);
    let mut t = Table::new(&["lambda", "t", "mu_t", "sigma_t2", "overlap", "mse", "diverged", "status"]);
    let mut tables = Table::new(&["lambda", "t", "kind", "j", "value"]);
    let mut failures = 0;
    for &l in &cfg.lambdas {
        match solve_bamp_se(cfg, &p, &cum, l) {
            Ok(tr) => {
                for r in &tr.records {
                    t.push(vec![
                        fmt_num(l),
                        r.t.to_string(),
                        fmt_num(r.mu_t),
                        fmt_num(r.sigma_t2),
                        fmt_num(r.overlap),
                        fmt_num(r.mse),
                        tr.diverged.to_string(),
                        status(true),
                    ]);
                }
                for (ti, (theta, ons)) in tr.state.theta.iter().zip(&tr.state.onsager).enumerate() {
                    for (kind, row) in [("theta", theta), ("onsager", ons)] {
                        for (j, v) in row.iter().enumerate() {
                            tables.push(vec![
                                fmt_num(l),
                                (ti + 1).to_string(),
                                kind.into(),
                                (j + 1).to_string(),
                                fmt_num(*v),
                            ]);
                        }
                    }
                }
            }
            Err(_) => {
                failures += 1;
                t.push(vec![
                    fmt_num(l),
                    "0".into(),
                    "NaN".into(),
                    "NaN".into(),
                    "NaN".into(),
                    "NaN".into(),
                    "true".into(),
                    status(false),
                ]);
            }
        }
    }
    let path = cfg.output_path("bamp-se.csv");
    if path.as_os_str() != "-" {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "bamp-se".into());
        tables.write(&path.with_file_name(format!("{stem}.tables.csv")), cfg, "bamp-se tables")?;
    }
    finish(t, cfg, "bamp-se", failures)
}

pub fn mismatch(cfg: &ExperimentConfig) -> CliResult {
    let p = params(cfg)?;
    let mut t = Table::new(&["lambda", "m", "q", "v", "hat_q", "hat_q_check", "mse", "iterations", "status"]);
    let mut failures = 0;
    for &l in &cfg.lambdas {
        match mismatched_fixed_point(l, cfg.prior, &p) {
            Ok(s) => t.push(vec![
                fmt_num(l),
                fmt_num(s.m),
                fmt_num(s.q),
                fmt_num(s.v),
                fmt_num(s.hat_q),
                fmt_num(s.hat_q_check),
                fmt_num(s.mse),
                s.iterations.to_string(),
                status(true),
            ]),
            Err(_) => {
                failures += 1;
                let mut row = vec![fmt_num(l)];
                row.extend(std::iter::repeat("NaN".to_string()).take(7));
                row.push(status(false));
                t.push(row);
            }
        }
    }
    finish(t, cfg, "mismatch", failures)
}

/// Outcome of one algorithm on one trial at one λ.
#[derive(Debug, Clone)]
struct TrialOutcome {
    lambda: f64,
    trial: usize,
    method: String,
    mse: f64,
    overlap: f64,
    iterations: usize,
    converged: bool,
    flags: String,
}

fn trace_flags(tr: &AmpTrace) -> String {
    let f = &tr.flags;
    let names = [
        (f.non_finite, "non-finite"),
        (f.norm_blowup, "norm-blowup"),
        (f.mse_rising, "mse-rising"),
        (f.not_settled, "not-settled"),
    ];
    names.iter().filter(|(on, _)| *on).map(|(_, n)| *n).collect::<Vec<_>>().join("|")
}

/// Per-λ theory needed by the simulations.
struct LambdaSetup {
    lambda: f64,
    coeffs: PreprocessCoeffs,
    se: Option<Result<SeTrajectory, String>>,
}

fn simulate(cfg: &ExperimentConfig) -> Result<Vec<TrialOutcome>, CliError> {
    let p = params(cfg)?;
    let mut setups = Vec::with_capacity(cfg.lambdas.len());
    let mut kmax_k = 1;
    for &l in &cfg.lambdas {
        let coeffs = coeffs_for(cfg, &p, l)?;
        kmax_k = kmax_k.max(coeffs.k());
        setups.push(LambdaSetup { lambda: l, coeffs, se: None });
    }
    let cum = cumulants_for(cfg, &p, kmax_k);
    if cfg.algorithms.iter().any(|a| a == "bamp") {
        for s in setups.iter_mut() {
            s.se = Some(solve_bamp_se(cfg, &p, &cum, s.lambda).map_err(|e| e.to_string()));
        }
    }
    let per_trial = Exec::default().map(cfg.trials, |trial| {
        let noise = trial_noise(cfg, &p, trial);
        let mut out = Vec::new();
        for s in &setups {
            let inst = noise.instance(s.lambda);
            for alg in &cfg.algorithms {
                out.push(run_algorithm(cfg, &cum, &inst, &noise.seeds, s, alg, trial));
            }
        }
        out
    });
    let mut rows: Vec<TrialOutcome> = per_trial.into_iter().flatten().collect();
    let order = |m: &str| cfg.algorithms.iter().position(|a| a == m).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        a.lambda.total_cmp(&b.lambda).then(order(&a.method).cmp(&order(&b.method))).then(a.trial.cmp(&b.trial))
    });
    Ok(rows)
}

fn run_algorithm(
    cfg: &ExperimentConfig,
    cum: &FreeCumulants,
    inst: &SpikedInstance,
    seeds: &SeedScheme,
    setup: &LambdaSetup,
    alg: &str,
    trial: usize,
) -> TrialOutcome {
    let exec = Exec::default();
    let mut rng = seeds.rng(stream::AMP_INIT);
    let failed = |flags: String| TrialOutcome {
        lambda: setup.lambda,
        trial,
        method: alg.to_string(),
        mse: f64::NAN,
        overlap: f64::NAN,
        iterations: 0,
        converged: false,
        flags,
    };
    let from_trace = |tr: &AmpTrace| TrialOutcome {
        lambda: setup.lambda,
        trial,
        method: alg.to_string(),
        mse: tr.final_mse(),
        overlap: tr.final_overlap(),
        iterations: tr.records.len(),
        converged: tr.converged,
        flags: trace_flags(tr),
    };
    let res = match alg {
        "pca" => {
            return match spectral_pca(inst, cum, None, exec) {
                Ok(r) => TrialOutcome {
                    lambda: setup.lambda,
                    trial,
                    method: alg.into(),
                    mse: r.mse,
                    overlap: r.overlap_sq.sqrt(),
                    iterations: 1,
                    converged: true,
                    flags: String::new(),
                },
                Err(_) => failed("error".into()),
            }
        }
        "amp" => run_baseline_amp(inst, cfg.prior, cum, cfg.t, cfg.epsilon, &mut rng, exec),
        "bamp" => match &setup.se {
            Some(Ok(tr)) => {
                run_bamp(inst, &setup.coeffs, cfg.prior, cum, cfg.t, cfg.epsilon, &mut rng, BampMode::Theory(tr), exec)
            }
            _ => return failed("se-failed".into()),
        },
        "bamp-empirical" => {
            run_bamp(inst, &setup.coeffs, cfg.prior, cum, cfg.t, cfg.epsilon, &mut rng, BampMode::Empirical, exec)
        }
        "em" => {
            em_learn_coeffs(inst, cfg.prior, cum, &setup.coeffs, cfg.em_steps, cfg.zeta, cfg.epsilon, &mut rng, exec)
                .map(|r| r.trace)
        }
        _ => return failed("unknown".into()),
    };
    match res {
        Ok(tr) => from_trace(&tr),
        Err(_) => failed("error".into()),
    }
}

pub fn run(cfg: &ExperimentConfig) -> CliResult {
    let rows = simulate(cfg)?;
    let mut t = Table::new(&["lambda", "trial", "method", "mse", "overlap", "iterations", "converged", "flags"]);
    for r in &rows {
        t.push(vec![
            fmt_num(r.lambda),
            r.trial.to_string(),
            r.method.clone(),
            fmt_num(r.mse),
            fmt_num(r.overlap),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.flags.clone(),
        ]);
    }
    finish(t, cfg, "run", 0)
}

/// One aggregated sweep row.
struct Summary {
    lambda: f64,
    method: String,
    mean_mse: f64,
    std_mse: f64,
    mean_overlap: f64,
    n_converged: usize,
    n_diverged: usize,
}

fn theory_row(lambda: f64, method: &str, r: Result<(f64, f64, bool), CliError>) -> Summary {
    match r {
        Ok((mse, overlap, ok)) => Summary {
            lambda,
            method: method.into(),
            mean_mse: mse,
            std_mse: 0.0,
            mean_overlap: overlap,
            n_converged: ok as usize,
            n_diverged: (!ok) as usize,
        },
        Err(_) => Summary {
            lambda,
            method: method.into(),
            mean_mse: f64::NAN,
            std_mse: f64::NAN,
            mean_overlap: f64::NAN,
            n_converged: 0,
            n_diverged: 1,
        },
    }
}

fn theory_summaries(cfg: &ExperimentConfig) -> Result<Vec<Summary>, CliError> {
    let p = params(cfg)?;
    let k =
        cfg.lambdas.iter().map(|&l| coeffs_for(cfg, &p, l).map(|c| c.k())).try_fold(1, |a, k| k.map(|k| a.max(k)))?;
    let cum = cumulants_for(cfg, &p, k);
    let mut out = Vec::new();
    for &l in &cfg.lambdas {
        for th in &cfg.theory {
            let r: Result<(f64, f64, bool), CliError> = match th.as_str() {
                "replica" => bo_fixed_point(l, cfg.prior, &p, REPLICA_INIT_M, REPLICA_DAMPING)
                    .map(|s| (s.mmse, s.m.max(0.0).sqrt(), true))
                    .map_err(CliError::from),
                "baseline-se" => baseline_fixed_point(l, cfg.prior, &cum)
                    .map(|s| (s.mse, s.delta_star.max(0.0).sqrt(), true))
                    .map_err(CliError::from),
                "bamp-se" => solve_bamp_se(cfg, &p, &cum, l).map(|tr| {
                    let last = tr.records.last().copied();
                    let (mse, ov) = last.map(|r| (r.mse, r.overlap)).unwrap_or((0.5, 0.0));
                    (mse, ov, !tr.diverged)
                }),
                "mismatch" => mismatched_fixed_point(l, cfg.prior, &p)
                    .map(|s| (s.mse, if s.q > 0.0 { s.m / s.q.sqrt() } else { 0.0 }, true))
                    .map_err(CliError::from),
                "pca-formula" => {
                    let c = pca_cosine(l, &cum);
                    Ok((0.5 * (1.0 - c * c), c.sqrt(), true))
                }
                _ => Err(CliError::Config(format!("unknown theory '{th}'"))),
            };
            out.push(theory_row(l, th, r));
        }
    }
    Ok(out)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

pub fn sweep(cfg: &ExperimentConfig) -> CliResult {
    let mut summaries = theory_summaries(cfg)?;
    let rows = simulate(cfg)?;
    for &l in &cfg.lambdas {
        for alg in &cfg.algorithms {
            let group: Vec<&TrialOutcome> = rows.iter().filter(|r| r.lambda == l && &r.method == alg).collect();
            // Flagged trials are counted but kept out of the averages.
            let ok: Vec<&&TrialOutcome> = group.iter().filter(|r| r.converged).collect();
            let (mean_mse, std_mse) = mean_std(&ok.iter().map(|r| r.mse).collect::<Vec<_>>());
            let (mean_overlap, _) = mean_std(&ok.iter().map(|r| r.overlap).collect::<Vec<_>>());
            summaries.push(Summary {
                lambda: l,
                method: alg.clone(),
                mean_mse,
                std_mse,
                mean_overlap,
                n_converged: ok.len(),
                n_diverged: group.len() - ok.len(),
            });
        }
    }
    summaries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut t = Table::new(&["lambda", "method", "mean_mse", "std_mse", "mean_overlap", "n_converged", "n_diverged"]);
    for s in &summaries {
        t.push(vec![
            fmt_num(s.lambda),
            s.method.clone(),
            fmt_num(s.mean_mse),
            fmt_num(s.std_mse),
            fmt_num(s.mean_overlap),
            s.n_converged.to_string(),
            s.n_diverged.to_string(),
        ]);
    }
    finish(t, cfg, "sweep", 0)
}

pub fn em(cfg: &ExperimentConfig) -> CliResult {
    let p = params(cfg)?;
    let mut setups = Vec::new();
    for &l in &cfg.lambdas {
        setups.push((l, coeffs_for(cfg, &p, l)?));
    }
    let k = setups.iter().map(|(_, c)| c.k()).max().unwrap_or(1);
    let cum = cumulants_for(cfg, &p, k);
    let per_trial = Exec::default().map(cfg.trials, |trial| {
        let noise = trial_noise(cfg, &p, trial);
        let mut rows = Vec::new();
        let mut failures = 0;
        for (l, init) in &setups {
            let inst = noise.instance(*l);
            let mut rng = noise.seeds.rng(stream::AMP_INIT);
            match em_learn_coeffs(
                &inst,
                cfg.prior,
                &cum,
                init,
                cfg.em_steps,
                cfg.zeta,
                cfg.epsilon,
                &mut rng,
                Exec::default(),
            ) {
                Ok(res) => {
                    for s in &res.steps {
                        for (j, (c, g)) in s.coeffs.iter().zip(&s.gradient).enumerate() {
                            rows.push(vec![
                                fmt_num(*l),
                                trial.to_string(),
                                s.t.to_string(),
                                (j + 1).to_string(),
                                fmt_num(*c),
                                fmt_num(*g),
                                fmt_num(s.zeta),
                                fmt_num(s.v_bar),
                                fmt_num(s.chi_bar),
                                fmt_num(s.mse),
                                fmt_num(s.overlap),
                            ]);
                        }
                    }
                }
                Err(_) => failures += 1,
            }
        }
        (rows, failures)
    });
    let mut t =
        Table::new(&["lambda", "trial", "t", "k", "coeff", "gradient", "zeta", "v_bar", "chi_bar", "mse", "overlap"]);
    let mut failures = 0;
    for (rows, f) in per_trial {
        failures += f;
        for r in rows {
            t.push(r);
        }
    }
    finish(t, cfg, "em", failures)
}
