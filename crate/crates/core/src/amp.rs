//! Finite-N algorithms: pre-processing, baseline AMP, BAMP, spectral PCA, EM.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::exec::Exec;
use crate::linalg::{dot, norm2, top_eigenvector, SymMatrix};
use crate::priors::{Denoiser, Prior};
use crate::sampling::SpikedInstance;
use crate::se::{se_init, BampSE, RowKind, SeTrajectory};
use crate::spectrum::{EnsembleParams, FreeCumulants};
use crate::{Error, Result};

/// Iterates whose norm per `√N` exceeds this are flagged as diverged.
pub const NORM_LIMIT: f64 = 1e3;
/// A run counts as converged when the last MSE step is below this.
pub const CONVERGENCE_TOL: f64 = 1e-3;

/// Polynomial pre-processing `J(Y) = Σ_k c_k Y^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessCoeffs {
    pub c: Vec<f64>,
}

impl PreprocessCoeffs {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::domain("pre-processing needs degree at least 1"));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("pre-processing coefficients must be finite"));
        }
        Ok(Self { c })
    }

    pub fn k(&self) -> usize {
        self.c.len()
    }

    /// Scalar polynomial `J(x)`.
    pub fn apply_scalar(&self, x: f64) -> f64 {
        poly(&self.c, x)
    }
}

/// `(μλ, −γλ², γλ)`.
pub fn optimal_coeffs(mu: f64, gamma: f64, lambda: f64) -> Result<PreprocessCoeffs> {
    if !(mu.is_finite() && gamma.is_finite() && lambda.is_finite()) || lambda < 0.0 {
        return Err(Error::domain("optimal coefficients need finite inputs and lambda >= 0"));
    }
    PreprocessCoeffs::new(vec![mu * lambda, -gamma * lambda * lambda, gamma * lambda])
}

/// Forms `J(Y)` explicitly by repeated multiplication.
pub fn preprocess(y: &SymMatrix, coeffs: &PreprocessCoeffs, exec: Exec) -> SymMatrix {
    let n = y.n();
    let mut out = SymMatrix::zeros(n);
    let mut power = y.clone();
    for (k, &c) in coeffs.c.iter().enumerate() {
        if k > 0 {
            power = power.mul_commuting(y, exec);
        }
        if c != 0.0 {
            out = out.add_scaled(c, &power);
        }
    }
    out
}

/// `u¹ = εx* + √(1−ε²) w`, rescaled to unit empirical second moment.
pub fn amp_init<R: Rng + ?Sized>(x_star: &[f64], epsilon: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let c = (1.0 - epsilon * epsilon).max(0.0).sqrt();
    let mut u: Vec<f64> = x_star
        .iter()
        .map(|&x| {
            let w: f64 = rng.sample(StandardNormal);
            epsilon * x + c * w
        })
        .collect();
    let scale = (u.len() as f64).sqrt() / norm2(&u);
    if !scale.is_finite() {
        return Err(Error::ZeroVector);
    }
    for v in u.iter_mut() {
        *v *= scale;
    }
    Ok(u)
}

/// `(overlap, mse)` between an estimate and the signal, without forming `uuᵀ`.
pub fn metrics(u: &[f64], x_star: &[f64]) -> Result<(f64, f64)> {
    if u.len() != x_star.len() {
        return Err(Error::domain("metrics need equal lengths"));
    }
    let n = u.len() as f64;
    let uu = dot(u, u);
    let xx = dot(x_star, x_star);
    if uu == 0.0 || xx == 0.0 {
        return Err(Error::ZeroVector);
    }
    let ux = dot(u, x_star);
    let overlap = ux.abs() / (uu * xx).sqrt();
    let mse = 0.5 * (xx * xx - 2.0 * ux * ux + uu * uu) / (n * n);
    Ok((overlap, mse))
}

/// Standardized fourth moment of `f − μ x*`.
pub fn noise_kurtosis(f: &[f64], x_star: &[f64], mu: f64) -> f64 {
    let n = f.len() as f64;
    let r: Vec<f64> = f.iter().zip(x_star).map(|(a, x)| a - mu * x).collect();
    let m = r.iter().sum::<f64>() / n;
    let m2 = r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = r.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpRecord {
    pub t: usize,
    pub overlap: f64,
    pub mse: f64,
    /// `‖u^{t+1}‖ / √N`.
    pub norm: f64,
    /// Onsager row `c_{t,1..t}` subtracted at this step.
    pub onsager: Vec<f64>,
    pub mu_t: f64,
    pub sigma_t2: f64,
    pub noise_kurtosis: f64,
}

/// Why a trial was flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialFlags {
    pub non_finite: bool,
    pub norm_blowup: bool,
    /// MSE increased over three consecutive steps.
    pub mse_rising: bool,
    /// Last MSE step at least [`CONVERGENCE_TOL`].
    pub not_settled: bool,
}

impl TrialFlags {
    pub fn diverged(&self) -> bool {
        self.non_finite || self.norm_blowup || self.mse_rising
    }

    pub fn any(&self) -> bool {
        self.diverged() || self.not_settled
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpTrace {
    pub records: Vec<AmpRecord>,
    pub converged: bool,
    pub flags: TrialFlags,
    pub estimate: Vec<f64>,
}

impl AmpTrace {
    pub fn final_mse(&self) -> f64 {
        self.records.last().map(|r| r.mse).unwrap_or(0.5)
    }

    pub fn final_overlap(&self) -> f64 {
        self.records.last().map(|r| r.overlap).unwrap_or(0.0)
    }
}

/// Where BAMP takes its Onsager coefficients and channel parameters from.
#[derive(Debug, Clone, Copy)]
pub enum BampMode<'a> {
    /// Re-estimated from the iterates as the algorithm runs.
    Empirical,
    /// Read off a state-evolution trajectory with the same coefficients.
    Theory(&'a SeTrajectory),
}

/// Records and flags shared by the AMP drivers.
struct Tracker {
    records: Vec<AmpRecord>,
    flags: TrialFlags,
    rises: usize,
}

impl Tracker {
    fn new() -> Self {
        Self { records: Vec::new(), flags: TrialFlags::default(), rises: 0 }
    }

    /// Returns false when the run must stop.
    fn push(&mut self, rec: AmpRecord) -> bool {
        if !rec.mse.is_finite() || !rec.norm.is_finite() {
            self.flags.non_finite = true;
        }
        if rec.norm > NORM_LIMIT {
            self.flags.norm_blowup = true;
        }
        if let Some(prev) = self.records.last() {
            if rec.mse > prev.mse + CONVERGENCE_TOL {
                self.rises += 1;
                if self.rises >= 3 {
                    self.flags.mse_rising = true;
                }
            } else {
                self.rises = 0;
            }
        }
        self.records.push(rec);
        !(self.flags.non_finite || self.flags.norm_blowup)
    }

    fn finish(mut self, estimate: Vec<f64>) -> AmpTrace {
        let n = self.records.len();
        if n >= 2 {
            let d = (self.records[n - 1].mse - self.records[n - 2].mse).abs();
            self.flags.not_settled = !(d < CONVERGENCE_TOL);
        }
        let converged = !self.flags.any();
        AmpTrace { records: self.records, converged, flags: self.flags, estimate }
    }
}

fn check_iteration(t_max: usize, k: usize) -> Result<()> {
    if t_max == 0 {
        return Err(Error::domain("T must be at least 1"));
    }
    if k == 0 {
        return Err(Error::domain("pre-processing needs degree at least 1"));
    }
    Ok(())
}

/// Stacks `Y^ℓ u` for `ℓ = 1..=K`.
fn krylov(y: &SymMatrix, u: &[f64], k: usize, exec: Exec) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut prev = u.to_vec();
    for _ in 0..k {
        let next = y.matvec(&prev, exec);
        out.push(next.clone());
        prev = next;
    }
    out
}

/// Empirical state of BAMP: the SE bookkeeping fed with data averages.
struct EmpiricalTracker {
    se: BampSE,
    /// Surrogate vectors for each auxiliary row.
    rows: Vec<Vec<f64>>,
    n: f64,
}

impl EmpiricalTracker {
    fn new(u1: &[f64], epsilon: f64, lambda: f64, cumulants: &FreeCumulants, coeffs: &[f64]) -> Result<Self> {
        Ok(Self { se: se_init(epsilon, lambda, cumulants, coeffs)?, rows: vec![u1.to_vec()], n: u1.len() as f64 })
    }

    fn gram_row(&self, v: &[f64]) -> Vec<f64> {
        let mut row: Vec<f64> = self.rows.iter().map(|r| dot(v, r) / self.n).collect();
        row.push(dot(v, v) / self.n);
        row
    }

    fn push_linear(&mut self, v: Vec<f64>) -> Result<()> {
        let phi = self.se.linear_phi_row();
        let e = self.se.linear_e();
        let delta = self.gram_row(&v);
        self.se.push_row(RowKind::Linear, e, delta, phi)?;
        self.se.coeff_update();
        self.rows.push(v);
        Ok(())
    }

    /// The Nishimori identity gives `E[g X*] = E[g²]` for the matched posterior mean.
    fn push_denoised(&mut self, u: Vec<f64>, mean_deriv: f64) -> Result<()> {
        let delta = self.gram_row(&u);
        let e = *delta.last().unwrap();
        self.se.push_denoised(e, delta, mean_deriv)?;
        self.rows.push(u);
        Ok(())
    }
}

fn combine(coeffs: &[f64], powers: &[Vec<f64>], onsager: &[f64], iterates: &[Vec<f64>]) -> Vec<f64> {
    let n = powers[0].len();
    let mut f = vec![0.0; n];
    for (c, p) in coeffs.iter().zip(powers) {
        if *c != 0.0 {
            for (fi, pi) in f.iter_mut().zip(p) {
                *fi += c * pi;
            }
        }
    }
    for (c, u) in onsager.iter().zip(iterates) {
        for (fi, ui) in f.iter_mut().zip(u) {
            *fi -= c * ui;
        }
    }
    f
}

fn apply_denoiser(den: &Denoiser, f: &[f64]) -> (Vec<f64>, f64) {
    let u: Vec<f64> = f.iter().map(|&v| den.eval(v)).collect();
    let d = f.iter().map(|&v| den.deriv(v)).sum::<f64>() / f.len() as f64;
    (u, d)
}

/// BAMP on `J(Y)` from a given `u¹`.
#[allow(clippy::too_many_arguments)]
pub fn run_bamp_from(
    instance: &SpikedInstance,
    coeffs: &PreprocessCoeffs,
    prior: Prior,
    cumulants: &FreeCumulants,
    u1: Vec<f64>,
    epsilon: f64,
    t_max: usize,
    mode: BampMode<'_>,
    exec: Exec,
) -> Result<AmpTrace> {
    check_iteration(t_max, coeffs.k())?;
    let k = coeffs.k();
    let mut tracker = Tracker::new();
    let mut iterates = vec![u1.clone()];
    let mut emp = match mode {
        BampMode::Empirical => Some(EmpiricalTracker::new(&u1, epsilon, instance.lambda, cumulants, &coeffs.c)?),
        BampMode::Theory(traj) if traj.state.lambda == 0.0 => {
            // no signal: the posterior mean is zero from the first step on
            let mut tracker = Tracker::new();
            let zero = vec![0.0; instance.n];
            let (overlap, mse) = metrics(&zero, &instance.x_star).unwrap_or((0.0, 0.5));
            tracker.push(AmpRecord {
                t: 1,
                overlap,
                mse,
                norm: 0.0,
                onsager: vec![0.0],
                mu_t: 0.0,
                sigma_t2: f64::INFINITY,
                noise_kurtosis: f64::NAN,
            });
            return Ok(tracker.finish(zero));
        }
        BampMode::Theory(traj) => {
            if traj.state.denoisers.len() < t_max || traj.state.k != k {
                return Err(Error::domain("state-evolution trajectory does not match the requested run"));
            }
            None
        }
    };
    let mut u = u1;
    for t in 1..=t_max {
        if t > 1 && u.iter().all(|&v| v == 0.0) {
            // the denoiser returned the prior mean: nothing left to iterate
            break;
        }
        let powers = krylov(&instance.y, &u, k, exec);
        let (mu, s2, ons, den) = match (&mut emp, mode) {
            (Some(em), _) => {
                for v in powers.iter().take(k - 1) {
                    em.push_linear(v.clone())?;
                }
                let den = em.se.record_emission(prior)?;
                (den.mu_eff, den.sigma2, em.se.onsager[t - 1].clone(), den)
            }
            (None, BampMode::Theory(traj)) => {
                let st = &traj.state;
                let den = st.denoisers[t - 1];
                (st.mu_t[t - 1], st.sigma_t2[t - 1], st.onsager[t - 1].clone(), den)
            }
            _ => unreachable!(),
        };
        let f = combine(&coeffs.c, &powers, &ons, &iterates);
        let (next, mean_deriv) = apply_denoiser(&den, &f);
        let (overlap, mse) = metrics(&next, &instance.x_star).unwrap_or((0.0, 0.5));
        let rec = AmpRecord {
            t,
            overlap,
            mse,
            norm: norm2(&next) / (next.len() as f64).sqrt(),
            onsager: ons,
            mu_t: mu,
            sigma_t2: s2,
            noise_kurtosis: noise_kurtosis(&f, &instance.x_star, mu),
        };
        let go_on = tracker.push(rec);
        if let Some(em) = &mut emp {
            if go_on {
                if em.push_denoised(next.clone(), mean_deriv).is_err() {
                    tracker.flags.non_finite = true;
                    u = next;
                    break;
                }
            }
        }
        iterates.push(next.clone());
        u = next;
        if !go_on {
            break;
        }
    }
    Ok(tracker.finish(u))
}

/// BAMP with a Gaussian-perturbed initialization of correlation `ε`.
#[allow(clippy::too_many_arguments)]
pub fn run_bamp<R: Rng + ?Sized>(
    instance: &SpikedInstance,
    coeffs: &PreprocessCoeffs,
    prior: Prior,
    cumulants: &FreeCumulants,
    t_max: usize,
    epsilon: f64,
    rng: &mut R,
    mode: BampMode<'_>,
    exec: Exec,
) -> Result<AmpTrace> {
    let u1 = amp_init(&instance.x_star, epsilon, rng)?;
    run_bamp_from(instance, coeffs, prior, cumulants, u1, epsilon, t_max, mode, exec)
}

/// AMP on `Y` with single-step posterior-mean denoisers and empirically
/// tracked channel parameters.
pub fn run_baseline_amp<R: Rng + ?Sized>(
    instance: &SpikedInstance,
    prior: Prior,
    cumulants: &FreeCumulants,
    t_max: usize,
    epsilon: f64,
    rng: &mut R,
    exec: Exec,
) -> Result<AmpTrace> {
    let coeffs = PreprocessCoeffs::new(vec![1.0])?;
    run_bamp(instance, &coeffs, prior, cumulants, t_max, epsilon, rng, BampMode::Empirical, exec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// `√(N·C)·ν`, with `C = max(0, 1 − R′(1/λ)/λ²)`.
    pub estimate: Vec<f64>,
    /// Measured `(νᵀx*)²/N`.
    pub overlap_sq: f64,
    /// Predicted `C`.
    pub overlap_sq_theory: f64,
    /// `½‖x*x*ᵀ − uuᵀ‖²/N²` of the estimate.
    pub mse: f64,
    /// `1 − C`, the error of the rank-one estimate per unit signal.
    pub mse_theory_unit: f64,
    pub top_eigenvalue: f64,
}

/// Top-eigenvector estimator of the spike.
///
/// The sign is aligned with `side` when given, otherwise with `x*`.
pub fn spectral_pca(
    instance: &SpikedInstance,
    cumulants: &FreeCumulants,
    side: Option<&[f64]>,
    exec: Exec,
) -> Result<PcaResult> {
    let n = instance.n;
    let lambda = instance.lambda;
    let c = if lambda > 0.0 {
        let r = cumulants.r_prime(1.0 / lambda).unwrap_or(f64::INFINITY);
        (1.0 - r / (lambda * lambda)).max(0.0)
    } else {
        0.0
    };
    let shift = match cumulants.source() {
        Some(p) => p.edge() + 1.0,
        None => (0..n).map(|j| norm2(instance.y.col(j))).fold(0.0, f64::max),
    };
    let start: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let (mut v, top) = match top_eigenvector(&instance.y, shift, &start, 1e-10, 20_000, exec) {
        Ok((v, rq, _)) => (v, rq),
        Err(_) => {
            let (vals, vecs) = instance.y.eigh();
            let j = n - 1;
            ((0..n).map(|i| vecs[(i, j)]).collect(), vals[j])
        }
    };
    let reference = side.unwrap_or(&instance.x_star);
    if dot(&v, reference) < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    let proj = dot(&v, &instance.x_star);
    let overlap_sq = proj * proj / n as f64;
    let scale = (n as f64 * c).sqrt();
    let estimate: Vec<f64> = v.iter().map(|x| x * scale).collect();
    let mse = if c > 0.0 {
        metrics(&estimate, &instance.x_star)?.1
    } else {
        0.5 * (dot(&instance.x_star, &instance.x_star) / n as f64).powi(2)
    };
    Ok(PcaResult { estimate, overlap_sq, overlap_sq_theory: c, mse, mse_theory_unit: 1.0 - c, top_eigenvalue: top })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmStep {
    pub t: usize,
    pub coeffs: Vec<f64>,
    pub gradient: Vec<f64>,
    pub zeta: f64,
    pub overlap: f64,
    pub mse: f64,
    /// `V̄`, the summed Onsager row.
    pub v_bar: f64,
    /// `χ̄`, the mean posterior variance.
    pub chi_bar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmResult {
    pub coeffs: PreprocessCoeffs,
    pub steps: Vec<EmStep>,
    pub trace: AmpTrace,
}

/// TAP posterior mean for field `h` and tilt `½V̄x²`.
fn tap_mean(prior: Prior, h: f64, v_bar: f64) -> f64 {
    match prior {
        Prior::Rademacher => h.tanh(),
        Prior::Gaussian => h / (1.0 - v_bar),
    }
}

/// Gradient of the free-entropy estimate in the coefficients, per component.
#[allow(clippy::too_many_arguments)]
pub fn em_gradient(
    y: &SymMatrix,
    eigenvalues: &[f64],
    coeffs: &[f64],
    m: &[f64],
    v_bar: f64,
    chi_bar: f64,
    prior: Prior,
    exec: Exec,
) -> Result<Vec<f64>> {
    let n = m.len() as f64;
    let k = coeffs.len();
    let powers = krylov(y, m, k, exec);
    let jm = combine(coeffs, &powers, &[], &[]);
    let eta: Vec<f64> = jm.iter().zip(m).map(|(j, mi)| tap_mean(prior, j - v_bar * mi, v_bar)).collect();
    let target: Vec<f64> = m.iter().zip(&eta).map(|(mi, ei)| 0.5 * mi - ei).collect();
    let omega = v_bar + 1.0 / chi_bar;
    let mut trace = vec![0.0; k];
    for &s in eigenvalues {
        let denom = omega - poly(coeffs, s);
        if !(denom > 0.0) {
            return Err(Error::Instability(format!("Omega - J has a non-positive eigenvalue {denom:.3e}")));
        }
        let mut p = s;
        for tr in trace.iter_mut() {
            *tr += p / denom;
            p *= s;
        }
    }
    Ok((0..k).map(|i| (dot(&powers[i], &target) - 0.5 * trace[i]) / n).collect())
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    let mut p = x;
    let mut s = 0.0;
    for c in coeffs {
        s += c * p;
        p *= x;
    }
    s
}

/// BAMP in empirical mode with one gradient-ascent step on the coefficients
/// after every iteration.
#[allow(clippy::too_many_arguments)]
pub fn em_learn_coeffs<R: Rng + ?Sized>(
    instance: &SpikedInstance,
    prior: Prior,
    cumulants: &FreeCumulants,
    init: &PreprocessCoeffs,
    steps: usize,
    zeta: f64,
    epsilon: f64,
    rng: &mut R,
    exec: Exec,
) -> Result<EmResult> {
    if !(zeta >= 0.0) {
        return Err(Error::domain("zeta must be nonnegative"));
    }
    check_iteration(steps, init.k())?;
    let k = init.k();
    let eigenvalues = instance.y.eigenvalues();
    let u1 = amp_init(&instance.x_star, epsilon, rng)?;
    let mut emp = EmpiricalTracker::new(&u1, epsilon, instance.lambda, cumulants, &init.c)?;
    let mut coeffs = init.c.clone();
    let mut tracker = Tracker::new();
    let mut iterates = vec![u1.clone()];
    let mut u = u1;
    // Before the first denoising step the residual variance of u¹ stands in for χ̄.
    let mut chi_bar = 1.0 - epsilon * epsilon;
    let mut zeta = zeta;
    let mut out_steps = Vec::with_capacity(steps);
    for t in 1..=steps {
        if t > 1 && u.iter().all(|&v| v == 0.0) {
            break;
        }
        emp.se.coeffs = coeffs.clone();
        let powers = krylov(&instance.y, &u, k, exec);
        for v in powers.iter().take(k - 1) {
            emp.push_linear(v.clone())?;
        }
        let den = emp.se.record_emission(prior)?;
        let ons = emp.se.onsager[t - 1].clone();
        let v_bar: f64 = ons.iter().sum();
        let mut gradient = vec![0.0; k];
        if zeta > 0.0 && chi_bar > 0.0 {
            match em_gradient(&instance.y, &eigenvalues, &coeffs, &u, v_bar, chi_bar, prior, exec) {
                Ok(g) => {
                    gradient = g;
                    for _ in 0..30 {
                        let trial: Vec<f64> = coeffs.iter().zip(&gradient).map(|(c, g)| c + zeta * g).collect();
                        let omega = v_bar + 1.0 / chi_bar;
                        if eigenvalues.iter().all(|&s| omega - poly(&trial, s) > 0.0) {
                            coeffs = trial;
                            break;
                        }
                        zeta *= 0.5;
                    }
                }
                Err(_) => zeta *= 0.5,
            }
        }
        let f = combine(&emp.se.coeffs, &powers, &ons, &iterates);
        let (next, mean_deriv) = apply_denoiser(&den, &f);
        chi_bar = f.iter().map(|&v| den.variance(v)).sum::<f64>() / f.len() as f64;
        let (overlap, mse) = metrics(&next, &instance.x_star).unwrap_or((0.0, 0.5));
        out_steps.push(EmStep { t, coeffs: coeffs.clone(), gradient, zeta, overlap, mse, v_bar, chi_bar });
        let rec = AmpRecord {
            t,
            overlap,
            mse,
            norm: norm2(&next) / (next.len() as f64).sqrt(),
            onsager: ons,
            mu_t: den.mu_eff,
            sigma_t2: den.sigma2,
            noise_kurtosis: noise_kurtosis(&f, &instance.x_star, den.mu_eff),
        };
        let go_on = tracker.push(rec);
        if go_on {
            emp.push_denoised(next.clone(), mean_deriv)?;
        }
        iterates.push(next.clone());
        u = next;
        if !go_on {
            break;
        }
    }
    Ok(EmResult { coeffs: PreprocessCoeffs::new(coeffs)?, steps: out_steps, trace: tracker.finish(u) })
}

/// Quartic-optimal coefficients for an ensemble.
pub fn optimal_for(params: &EnsembleParams, lambda: f64) -> Result<PreprocessCoeffs> {
    optimal_coeffs(params.mu, params.gamma, lambda)
}
