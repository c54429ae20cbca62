//! Scalar fixed points of the replica and state-evolution systems.

use crate::priors::{mmse, Prior};
use crate::quad::normal_legendre;
use crate::spectrum::{stieltjes, stieltjes_deriv, EnsembleParams, FreeCumulants, SpectralGrid, GRID_NODES};
use crate::{Error, Result};

/// Iteration controls shared by the fixed-point solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-10, max_iter: 10_000 }
    }
}

/// Bayes-optimal replica fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaSolution {
    pub m: f64,
    pub kappa: f64,
    pub tilde_v: f64,
    pub hat_m: f64,
    /// Decoupled auxiliary parameter `m̂ − m/(1−m)`, diagnostics only.
    pub tilde_q: f64,
    pub mmse: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Mismatched Gaussian-likelihood replica fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchedSolution {
    pub m: f64,
    pub q: f64,
    pub v: f64,
    pub hat_m: f64,
    pub hat_q: f64,
    pub hat_v: f64,
    pub tilde_q: f64,
    pub tilde_v: f64,
    /// `q λ² R′(λ(v−q))`, the cancellation-free form of `hat_q`.
    pub hat_q_check: f64,
    pub mse: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Fixed point `(Δ*, Σ*)` of the single-memory AMP state evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineFixedPoint {
    pub delta_star: f64,
    pub sigma_star: f64,
    pub mse: f64,
    pub iterations: usize,
}

/// Overlap `E X₀⟨X⟩` of the scalar channel at signal-to-noise ratio `snr`.
fn overlap_of_snr(snr: f64, prior: Prior) -> f64 {
    1.0 - mmse(snr, prior)
}

/// `c(D) = μλD − γλ²D² + γλD³`, so that `H = (Ṽ − c(D))⁻¹`.
#[inline]
fn cubic(d: f64, lambda: f64, p: &EnsembleParams) -> f64 {
    lambda * d * (p.mu - p.gamma * lambda * d + p.gamma * d * d)
}

/// Maximum of the cubic over the support.
fn cubic_max(lambda: f64, p: &EnsembleParams) -> f64 {
    let e = p.edge();
    let mut best = cubic(e, lambda, p).max(cubic(-e, lambda, p));
    if p.gamma > 0.0 {
        // c′(D) ∝ μ − 2γλD + 3γD²
        let disc = 4.0 * p.gamma * p.gamma * lambda * lambda - 12.0 * p.gamma * p.mu;
        if disc >= 0.0 {
            for sgn in [-1.0, 1.0] {
                let d = (2.0 * p.gamma * lambda + sgn * disc.sqrt()) / (6.0 * p.gamma);
                if d.abs() <= e {
                    best = best.max(cubic(d, lambda, p));
                }
            }
        }
    }
    best
}

fn mean_h(tv: f64, cs: &[f64], grid: &SpectralGrid) -> f64 {
    cs.iter().zip(&grid.weights).map(|(&c, &w)| w / (tv - c)).sum()
}

fn solve_tilde_v_on(m: f64, cs: &[f64], cmax: f64, grid: &SpectralGrid) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::domain(format!("m must lie in [0, 1), got {m}")));
    }
    let target = 1.0 - m;
    let mut lo = cmax + 1e-9;
    if mean_h(lo, cs, grid) < target {
        return Err(Error::NotBracketed(format!("E[H] stays below 1-m = {target:.3e} above the spectrum edge")));
    }
    let mut width = 10.0;
    let mut hi = cmax + width;
    let mut doublings = 0;
    while mean_h(hi, cs, grid) > target {
        lo = hi;
        width *= 2.0;
        hi = cmax + width;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NotBracketed("search window exhausted".into()));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mean_h(mid, cs, grid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root `Ṽ` of `E[(Ṽ − μλD + γλ²D² − γλD³)⁻¹] = 1 − m` above the spectrum of the cubic.
pub fn solve_tilde_v(m: f64, lambda: f64, params: &EnsembleParams) -> Result<f64> {
    let grid = SpectralGrid::new(params, GRID_NODES);
    let cs: Vec<f64> = grid.nodes.iter().map(|&d| cubic(d, lambda, params)).collect();
    solve_tilde_v_on(m, &cs, cubic_max(lambda, params), &grid)
}

/// Bayes-optimal replica fixed point with default solver options.
pub fn bo_fixed_point(
    lambda: f64,
    prior: Prior,
    params: &EnsembleParams,
    init_m: f64,
    damping: f64,
) -> Result<ReplicaSolution> {
    bo_fixed_point_with(lambda, prior, params, init_m, SolverOptions { damping, ..Default::default() })
}

pub fn bo_fixed_point_with(
    lambda: f64,
    prior: Prior,
    params: &EnsembleParams,
    init_m: f64,
    opts: SolverOptions,
) -> Result<ReplicaSolution> {
    if !(lambda >= 0.0) {
        return Err(Error::domain("lambda must be nonnegative"));
    }
    if !(init_m > 0.0 && init_m < 1.0) {
        return Err(Error::domain("init_m must lie in (0, 1)"));
    }
    if lambda == 0.0 {
        return Ok(ReplicaSolution {
            m: 0.0,
            kappa: 0.0,
            tilde_v: 1.0,
            hat_m: 0.0,
            tilde_q: 0.0,
            mmse: 0.5,
            iterations: 0,
            residual: 0.0,
        });
    }
    let grid = SpectralGrid::new(params, GRID_NODES);
    let (mu, g) = (params.mu, params.gamma);
    let cs: Vec<f64> = grid.nodes.iter().map(|&d| cubic(d, lambda, params)).collect();
    let cmax = cubic_max(lambda, params);
    let l2 = lambda * lambda;

    let mut m = init_m;
    let mut kappa = 0.0;
    let mut last = None;
    for it in 1..=opts.max_iter {
        let tv = solve_tilde_v_on(m, &cs, cmax, &grid)?;
        let h: Vec<f64> = cs.iter().map(|&c| 1.0 / (tv - c)).collect();
        let e = |f: &dyn Fn(f64, f64) -> f64| -> f64 {
            grid.nodes.iter().zip(&grid.weights).zip(&h).map(|((&d, &w), &hh)| w * f(d, hh)).sum()
        };
        let om = 1.0 - m;
        let tilde_m = g * l2 / om * e(&|d, hh| d * (m * d + kappa) * hh) - m / om;
        let q = |d: f64| g * m * l2 * d * d + g * l2 * kappa * d - tilde_m;
        let hat_m = g * l2 * e(&|d, hh| hh * d * ((m * d + kappa) / om + d * q(d))) + mu * l2 * m;
        let kappa_new = e(&|d, hh| d * q(d) * hh);
        let m_new = overlap_of_snr(hat_m.max(0.0), prior);
        let residual = (m_new - m).abs().max((kappa_new - kappa).abs());
        let sol = ReplicaSolution {
            m,
            kappa,
            tilde_v: tv,
            hat_m,
            tilde_q: hat_m - m / om,
            mmse: 0.5 * (1.0 - m * m),
            iterations: it,
            residual,
        };
        if !residual.is_finite() {
            return Err(Error::Instability("replica iteration produced non-finite values".into()));
        }
        if residual < opts.tol {
            return Ok(sol);
        }
        last = Some(sol);
        m = (1.0 - opts.damping) * m_new + opts.damping * m;
        kappa = (1.0 - opts.damping) * kappa_new + opts.damping * kappa;
        m = m.clamp(0.0, 1.0 - 1e-15);
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual: last.map(|s| s.residual).unwrap_or(f64::NAN) })
}

/// Baseline AMP fixed point from an informative start `Δ₀ = 0.99`.
pub fn baseline_fixed_point(lambda: f64, prior: Prior, cumulants: &FreeCumulants) -> Result<BaselineFixedPoint> {
    baseline_fixed_point_from(lambda, prior, cumulants, 0.99, SolverOptions::default())
}

/// Damped alternating solution of `1 − Δ = mmse(λ²Δ²/Σ)`, `Σ = Δ R′(λΔ(1−Δ)/Σ)`.
pub fn baseline_fixed_point_from(
    lambda: f64,
    prior: Prior,
    cumulants: &FreeCumulants,
    init_delta: f64,
    opts: SolverOptions,
) -> Result<BaselineFixedPoint> {
    if !(lambda >= 0.0) {
        return Err(Error::domain("lambda must be nonnegative"));
    }
    let trivial = |it| BaselineFixedPoint { delta_star: 0.0, sigma_star: 0.0, mse: 0.5, iterations: it };
    if lambda == 0.0 {
        return Ok(trivial(0));
    }
    let mut delta = init_delta;
    let mut sigma = init_delta * cumulants.kappa(2);
    for it in 1..=opts.max_iter {
        if delta < 1e-13 {
            return Ok(trivial(it));
        }
        let d_new = overlap_of_snr(lambda * lambda * delta * delta / sigma, prior);
        // inner solve for Σ at fixed Δ
        let mut s = sigma;
        for _ in 0..200 {
            let s_new = d_new * cumulants.r_prime(lambda * d_new * (1.0 - d_new) / s)?;
            if !(s_new > 0.0) {
                return Err(Error::Instability(format!("nonpositive Sigma {s_new}")));
            }
            let done = (s_new - s).abs() < 1e-15 * s.max(1e-300);
            s = s_new;
            if done {
                break;
            }
        }
        let residual = (d_new - delta).abs().max((s - sigma).abs());
        delta = (1.0 - opts.damping) * d_new + opts.damping * delta;
        sigma = (1.0 - opts.damping) * s + opts.damping * sigma;
        if !residual.is_finite() {
            return Err(Error::Instability("baseline iteration produced non-finite values".into()));
        }
        if residual < opts.tol.min(1e-12) {
            if delta < 1e-9 {
                return Ok(trivial(it));
            }
            return Ok(BaselineFixedPoint {
                delta_star: delta,
                sigma_star: sigma,
                mse: 0.5 * (1.0 - delta * delta),
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual: f64::NAN })
}

/// Moments `(E X₀⟨X⟩, E⟨X⟩², E⟨X²⟩)` of the local measure
/// `∝ P_X(x) exp(√q̂ Z x + m̂ X₀ x − (q̂+v̂) x²/2)`.
fn local_moments(prior: Prior, hat_m: f64, hat_q: f64, hat_vq: f64) -> Result<(f64, f64, f64)> {
    match prior {
        Prior::Rademacher => {
            if !(hat_q >= 0.0) {
                return Err(Error::Instability(format!("negative hat_q {hat_q}")));
            }
            let r = normal_legendre();
            let s = hat_q.sqrt();
            let (mut m, mut q) = (0.0, 0.0);
            for (&z, &w) in r.nodes.iter().zip(&r.weights) {
                let t = (hat_m + s * z).tanh();
                m += w * t;
                q += w * t * t;
            }
            Ok((m, q, 1.0))
        }
        Prior::Gaussian => {
            let a = 1.0 + hat_vq;
            if !(a > 0.0) {
                return Err(Error::Instability(format!("local measure not normalisable (1+hat_v+hat_q = {a})")));
            }
            let m = hat_m / a;
            let q = (hat_q + hat_m * hat_m) / (a * a);
            Ok((m, q, q + 1.0 / a))
        }
    }
}

/// Largest tolerated ratio between the two terms of `q̂ = q/(v−q)² + q̃` and the result.
pub const HAT_Q_CONDITION_LIMIT: f64 = 1e8;

/// Mismatched replica system from `m₀ = q₀ = 0.9`, `v₀ = 1`.
pub fn mismatched_fixed_point(lambda: f64, prior: Prior, params: &EnsembleParams) -> Result<MismatchedSolution> {
    mismatched_fixed_point_from(lambda, prior, params, (0.9, 0.9, 1.0), SolverOptions::default())
}

pub fn mismatched_fixed_point_from(
    lambda: f64,
    prior: Prior,
    params: &EnsembleParams,
    init: (f64, f64, f64),
    opts: SolverOptions,
) -> Result<MismatchedSolution> {
    if !(lambda >= 0.0) {
        return Err(Error::domain("lambda must be nonnegative"));
    }
    if lambda == 0.0 {
        return Ok(MismatchedSolution {
            m: 0.0,
            q: 0.0,
            v: 1.0,
            hat_m: 0.0,
            hat_q: 0.0,
            hat_v: 0.0,
            tilde_q: 0.0,
            tilde_v: 0.0,
            hat_q_check: 0.0,
            mse: 0.5,
            iterations: 0,
            residual: 0.0,
        });
    }
    let e = params.edge();
    let s_edge = stieltjes(e * (1.0 + 1e-15), params).unwrap_or(0.5 * e * (params.mu + params.gamma * e * e));
    let l2 = lambda * lambda;
    let (mut m, mut q, mut v) = init;
    let mut residual = f64::NAN;
    for it in 1..=opts.max_iter {
        let gap = v - q;
        if !(gap > 0.0) {
            return Err(Error::Instability(format!("v - q = {gap} is not positive")));
        }
        // E[(Ṽ − λD)⁻¹] = S(Ṽ/λ)/λ
        let target = lambda * gap;
        if target > s_edge {
            return Err(Error::NotBracketed(format!("lambda (v-q) = {target:.4} exceeds S(2a) = {s_edge:.4}")));
        }
        let z = invert_stieltjes(target, params)?;
        let tilde_v = lambda * z;
        let e2 = -stieltjes_deriv(z, params)? / l2; // E[(Ṽ − λD)⁻²]
        let tilde_q = -q / e2;
        let direct = q / (gap * gap);
        let hat_q = direct + tilde_q;
        if direct.abs() > HAT_Q_CONDITION_LIMIT * hat_q.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Instability(format!(
                "hat_q cancellation: q/(v-q)^2 = {direct:.3e} against hat_q = {hat_q:.3e}"
            )));
        }
        let hat_m = l2 * m;
        let hat_vq = l2 * v + 1.0 / gap - tilde_v;
        let (m_new, q_new, v_new) = local_moments(prior, hat_m, hat_q, hat_vq)?;
        residual = (m_new - m).abs().max((q_new - q).abs()).max((v_new - v).abs());
        if !residual.is_finite() {
            return Err(Error::Instability("mismatched iteration produced non-finite values".into()));
        }
        if residual < opts.tol {
            let hat_q_check = q * l2 * r_prime_at(target, params)?;
            return Ok(MismatchedSolution {
                m,
                q,
                v,
                hat_m,
                hat_q,
                hat_v: hat_vq - hat_q,
                tilde_q,
                tilde_v,
                hat_q_check,
                mse: 0.5 * (1.0 - 2.0 * m * m + q * q),
                iterations: it,
                residual,
            });
        }
        let d = opts.damping;
        m = (1.0 - d) * m_new + d * m;
        q = (1.0 - d) * q_new + d * q;
        v = (1.0 - d) * v_new + d * v;
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual })
}

/// `R′(s)` of the ensemble, closed form for the semicircle.
fn r_prime_at(s: f64, params: &EnsembleParams) -> Result<f64> {
    if params.gamma > 0.0 {
        crate::spectrum::r_transform_deriv_exact(s, params)
    } else {
        Ok(1.0)
    }
}

/// `z > 2a` with `S(z) = s`, for `0 < s ≤ S(2a)`.
fn invert_stieltjes(s: f64, params: &EnsembleParams) -> Result<f64> {
    let e = params.edge();
    let mut lo = e * (1.0 + 1e-15);
    let mut hi = e + 1.0;
    while stieltjes(hi, params)? > s {
        hi = e + 2.0 * (hi - e);
        if hi > 1e12 {
            return Err(Error::NotBracketed("Stieltjes inversion".into()));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if stieltjes(mid, params)? > s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Spectral PCA limits: `overlap² = C²` and the stated `mse = 1 − C²`,
/// where `C = 1 − R′(1/λ)/λ²`. Below the threshold (`C ≤ 0`) returns `(0, 1)`.
pub fn pca_overlap_and_mse(lambda: f64, cumulants: &FreeCumulants) -> (f64, f64) {
    let c = pca_cosine(lambda, cumulants);
    (c * c, 1.0 - c * c)
}

/// `max(0, 1 − R′(1/λ)/λ²)`; the squared cosine between the top eigenvector and the signal.
pub fn pca_cosine(lambda: f64, cumulants: &FreeCumulants) -> f64 {
    if !(lambda > 0.0) {
        return 0.0;
    }
    match cumulants.r_prime(1.0 / lambda) {
        Ok(r) => (1.0 - r / (lambda * lambda)).max(0.0),
        // beyond S(2a): the spike does not detach
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_max_matches_dense_scan() {
        let p = EnsembleParams::from_mu(0.0).unwrap();
        for &l in &[0.5, 1.5, 2.5, 4.0] {
            let e = p.edge();
            let scan = (0..=20000).map(|i| cubic(-e + 2.0 * e * i as f64 / 20000.0, l, &p)).fold(f64::MIN, f64::max);
            assert!((cubic_max(l, &p) - scan).abs() < 1e-6);
        }
    }

    #[test]
    fn tilde_v_root_residual() {
        let p = EnsembleParams::from_mu(0.5).unwrap();
        let tv = solve_tilde_v(0.7, 2.0, &p).unwrap();
        let grid = SpectralGrid::new(&p, GRID_NODES);
        let r = grid.expect(|d| 1.0 / (tv - cubic(d, 2.0, &p))) - 0.3;
        assert!(r.abs() < 1e-9);
    }
}
