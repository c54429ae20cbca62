//! Spectral objects of the quartic ensemble `V(x) = μx²/2 + γx⁴/4`.

use std::f64::consts::PI;

use num_bigint::BigInt;

use crate::fixed::{moments_to_cumulants, Fixed};
use crate::quad::{gauss_legendre, legendre64, Rule};
use crate::{Error, Result};

/// Default node count of [`SpectralGrid`].
pub const GRID_NODES: usize = 400;

/// Quartic weight γ on the unit-variance curve.
pub fn gamma_of_mu(mu: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::domain(format!("mu must lie in [0, 1], got {mu}")));
    }
    let disc = 64.0 - 144.0 * mu + 108.0 * mu * mu - 27.0 * mu * mu * mu;
    Ok(((8.0 - 9.0 * mu + disc.max(0.0).sqrt()) / 27.0).max(0.0))
}

/// Squared half-edge `a²` of the support `[-2a, 2a]`.
pub fn edge_a2(mu: f64, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !mu.is_finite() || !gamma.is_finite() {
        return Err(Error::domain(format!("invalid potential (mu={mu}, gamma={gamma})")));
    }
    if mu < 0.0 {
        return Err(Error::domain("negative mu is not supported"));
    }
    if gamma == 0.0 {
        if mu == 0.0 {
            return Err(Error::domain("mu and gamma cannot both vanish"));
        }
        return Ok(1.0 / mu);
    }
    // rationalised form of (√(μ²+12γ) − μ)/(6γ), stable as γ → 0
    Ok(2.0 / (mu + (mu * mu + 12.0 * gamma).sqrt()))
}

/// Parameters of the quartic ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams {
    pub mu: f64,
    pub gamma: f64,
    pub a2: f64,
}

impl EnsembleParams {
    /// Unit-variance ensemble with `γ = γ(μ)`.
    pub fn from_mu(mu: f64) -> Result<Self> {
        Self::new(mu, gamma_of_mu(mu)?)
    }

    pub fn new(mu: f64, gamma: f64) -> Result<Self> {
        let a2 = edge_a2(mu, gamma)?;
        Ok(Self { mu, gamma, a2 })
    }

    /// Right edge `2a` of the support.
    pub fn edge(&self) -> f64 {
        2.0 * self.a2.sqrt()
    }

    pub fn support(&self) -> (f64, f64) {
        (-self.edge(), self.edge())
    }

    fn c0(&self) -> f64 {
        self.mu + 2.0 * self.a2 * self.gamma
    }

    /// Closed-form moment `m_k`.
    pub fn exact_moment(&self, k: usize) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        let j = k / 2;
        let cat = |n: usize| -> f64 {
            let mut c = 1.0;
            for i in 0..n {
                c = c * 2.0 * (2 * i + 1) as f64 / (i + 2) as f64;
            }
            c
        };
        self.c0() * self.a2.powi(j as i32 + 1) * cat(j) + self.gamma * self.a2.powi(j as i32 + 2) * cat(j + 1)
    }

    /// Cumulative distribution function of ρ.
    pub fn cdf(&self, x: f64) -> f64 {
        let e = self.edge();
        if x <= -e {
            return 0.0;
        }
        if x >= e {
            return 1.0;
        }
        let th = (x / e).asin();
        let i1 = 0.5 * (th + PI / 2.0 + th.sin() * th.cos());
        let i2 = (th + PI / 2.0) / 8.0 - (4.0 * th).sin() / 32.0;
        (4.0 * self.a2 / (2.0 * PI) * (self.c0() * i1 + 4.0 * self.a2 * self.gamma * i2)).clamp(0.0, 1.0)
    }
}

/// Spectral density ρ(x).
pub fn density(x: f64, params: &EnsembleParams) -> f64 {
    let e = params.edge();
    let r = (e - x.abs()) * (e + x.abs());
    if r <= 0.0 || !x.is_finite() {
        return 0.0;
    }
    (params.c0() + params.gamma * x * x) * r.sqrt() / (2.0 * PI)
}

fn check_outside(z: f64, params: &EnsembleParams) -> Result<f64> {
    let r = z * z - 4.0 * params.a2;
    if !(r > 0.0) {
        return Err(Error::domain(format!("z={z} lies inside the support")));
    }
    Ok(z.signum() * r.sqrt())
}

/// Beyond `FAR_FIELD · 2a` the transforms are evaluated by quadrature.
const FAR_FIELD: f64 = 2.0;

/// Stieltjes transform `S(z) = ∫ρ(x)/(z−x) dx` for `|z| > 2a`.
pub fn stieltjes(z: f64, params: &EnsembleParams) -> Result<f64> {
    let root = check_outside(z, params)?;
    let EnsembleParams { mu, gamma, .. } = *params;
    if z.abs() > FAR_FIELD * params.edge() {
        // the closed form cancels badly away from the support
        let g = SpectralGrid::from_rule(params, legendre64());
        return Ok(g.expect(|x| 1.0 / (z - x)));
    }
    Ok(0.5 * (mu * z + gamma * z * z * z - (params.c0() + gamma * z * z) * root))
}

/// Derivative `S′(z)` for `|z| > 2a`.
pub fn stieltjes_deriv(z: f64, params: &EnsembleParams) -> Result<f64> {
    let root = check_outside(z, params)?;
    let EnsembleParams { mu, gamma, .. } = *params;
    if z.abs() > FAR_FIELD * params.edge() {
        let g = SpectralGrid::from_rule(params, legendre64());
        return Ok(-g.expect(|x| 1.0 / ((z - x) * (z - x))));
    }
    Ok(0.5 * (mu + 3.0 * gamma * z * z - 2.0 * gamma * z * root - (params.c0() + gamma * z * z) * z / root))
}

/// Gauss–Legendre quadrature of `ρ(x) dx` under `x = 2a sin θ`.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(params: &EnsembleParams, n: usize) -> Self {
        Self::from_rule(params, &gauss_legendre(n))
    }

    /// Grid from a Legendre rule on `[−1, 1]`.
    pub fn from_rule(params: &EnsembleParams, rule: &Rule) -> Self {
        let n = rule.nodes.len();
        let e = params.edge();
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let th = 0.5 * PI * t;
            let x = e * th.sin();
            let c = th.cos();
            // ρ(x)·dx/dθ with √(4a²−x²) = 2a cos θ
            let rho = (params.c0() + params.gamma * x * x) * e * c / (2.0 * PI);
            nodes.push(x);
            weights.push(rho * e * c * 0.5 * PI * w);
        }
        Self { nodes, weights }
    }

    /// `∫ f(x) ρ(x) dx`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Quadrature moments; `v[k-1] = m_k` for `k = 1..=kmax`.
pub fn moments(params: &EnsembleParams, kmax: usize) -> Vec<f64> {
    let g = SpectralGrid::new(params, GRID_NODES);
    (1..=kmax).map(|k| if k % 2 == 1 { 0.0 } else { g.expect(|x| x.powi(k as i32)) }).collect()
}

/// Free cumulants `κ̄_1..κ̄_kmax`; orders above `kmax` read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeCumulants {
    kappa: Vec<f64>,
    source: Option<EnsembleParams>,
}

impl FreeCumulants {
    pub fn from_vec(kappa: Vec<f64>) -> Self {
        Self { kappa, source: None }
    }

    /// Semicircle law: only `κ̄₂ = 1`.
    pub fn semicircle(kmax: usize) -> Self {
        let mut kappa = vec![0.0; kmax];
        if kmax >= 2 {
            kappa[1] = 1.0;
        }
        Self { kappa, source: EnsembleParams::from_mu(1.0).ok() }
    }

    /// Cumulants of the quartic ensemble from exact moments in
    /// big-integer fixed point, accurate at every order.
    pub fn for_ensemble(params: &EnsembleParams, kmax: usize) -> Self {
        if kmax == 0 {
            return Self { kappa: vec![], source: Some(*params) };
        }
        let bits = 256 + 12 * kmax as u64;
        let mu = Fixed::from_f64(params.mu, bits);
        let gamma = Fixed::from_f64(params.gamma, bits);
        let a2 = if params.gamma == 0.0 {
            Fixed::from_int(1, bits).div(&mu)
        } else {
            let disc = mu.mul(&mu).add(&Fixed::from_int(12, bits).mul(&gamma));
            Fixed::from_int(2, bits).div(&mu.add(&disc.sqrt()))
        };
        let c0 = mu.add(&Fixed::from_int(2, bits).mul(&a2).mul(&gamma));
        let zero = Fixed::zero(bits);
        let mut m = Vec::with_capacity(kmax);
        let mut cat = BigInt::from(1); // C_j
        let mut a_pow = a2.clone(); // (a²)^{j+1}
        for k in 1..=kmax {
            if k % 2 == 1 {
                m.push(zero.clone());
                continue;
            }
            let j = k / 2;
            // advance C_{j-1} → C_j and (a²)^j → (a²)^{j+1}
            cat = cat * BigInt::from(2 * (2 * j - 1)) / BigInt::from(j + 1);
            a_pow = a_pow.mul(&a2);
            let cat_next = &cat * BigInt::from(2 * (2 * j + 1)) / BigInt::from(j + 2);
            let t1 = c0.mul(&a_pow).mul(&Fixed::from_bigint(cat.clone(), bits));
            let t2 = gamma.mul(&a_pow).mul(&a2).mul(&Fixed::from_bigint(cat_next, bits));
            m.push(t1.add(&t2));
        }
        let k = moments_to_cumulants(&m);
        Self { kappa: k.iter().map(|v| v.to_f64()).collect(), source: Some(*params) }
    }

    /// Ensemble these cumulants were computed from, if known.
    pub fn source(&self) -> Option<&EnsembleParams> {
        self.source.as_ref()
    }

    /// `R′(s)`: the truncated series well inside its convergence radius,
    /// functional inversion of the Stieltjes transform beyond it when the
    /// source ensemble is known.
    pub fn r_prime(&self, s: f64) -> Result<f64> {
        let radius = self.series_radius();
        // geometric estimate of the first omitted term
        let tail = (s.abs() / radius).powi(self.kmax() as i32 - 1);
        if tail < 1e-13 {
            return Ok(r_transform_deriv(s, self));
        }
        match &self.source {
            Some(p) if p.gamma > 0.0 => r_transform_deriv_exact(s, p),
            Some(_) => Ok(r_transform_deriv(s, self)),
            None if s.abs() < radius => Ok(r_transform_deriv(s, self)),
            None => Err(Error::domain(format!("R-series evaluated at {s}, beyond its estimated radius {radius:.3}"))),
        }
    }

    pub fn kmax(&self) -> usize {
        self.kappa.len()
    }

    /// `κ̄_k` (1-indexed); zero beyond the truncation order.
    pub fn kappa(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.kappa.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.kappa
    }

    /// Root-test estimate of the convergence radius of the R-series,
    /// from the highest nonzero orders available.
    pub fn series_radius(&self) -> f64 {
        let mut est = f64::INFINITY;
        let mut seen = 0;
        for k in (3..=self.kmax()).rev() {
            let c = self.kappa(k).abs();
            if c > 1e-300 {
                est = est.min(c.powf(-1.0 / (k - 1) as f64));
                seen += 1;
                if seen == 4 {
                    break;
                }
            }
        }
        est
    }
}

/// Moment → free-cumulant recursion in f64. Well conditioned up to order ~12.
pub fn free_cumulants(moments: &[f64]) -> FreeCumulants {
    FreeCumulants::from_vec(moments_to_cumulants(moments))
}

/// Free cumulants → moments `m_1..m_kmax`.
pub fn cumulants_to_moments(c: &FreeCumulants, kmax: usize) -> Vec<f64> {
    let mut m: Vec<f64> = Vec::with_capacity(kmax);
    for n in 1..=kmax {
        // power table of M(z) = 1 + Σ_{j<n} m_j z^j, coefficients up to z^{n-1}
        let mut mc = vec![1.0];
        mc.extend_from_slice(&m);
        let mut pw = mc.clone();
        let mut acc = c.kappa(n);
        for s in 1..n {
            acc += c.kappa(s) * pw[n - s];
            let mut next = vec![0.0; n];
            for j in 0..n {
                next[j] = (0..=j).map(|i| pw[i] * mc[j - i]).sum();
            }
            pw = next;
        }
        m.push(acc);
    }
    m
}

/// R-transform `R(s) = Σ_{k≥0} κ̄_{k+1} s^k`, truncated.
pub fn r_transform(s: f64, c: &FreeCumulants) -> f64 {
    c.as_slice().iter().rev().fold(0.0, |acc, &k| acc * s + k)
}

/// `R′(s) = Σ_{k≥1} k κ̄_{k+1} s^{k−1}`, truncated at `kmax`.
pub fn r_transform_deriv(s: f64, c: &FreeCumulants) -> f64 {
    let n = c.kmax();
    let mut acc = 0.0;
    for k in (1..n).rev() {
        acc = acc * s + k as f64 * c.kappa(k + 1);
    }
    acc
}

/// `R′(s)` through functional inversion of the Stieltjes transform:
/// `R′(s) = 1/S′(z) + 1/s²` with `S(z) = s`, valid for `0 < |s| ≤ S(2a)`.
pub fn r_transform_deriv_exact(s: f64, params: &EnsembleParams) -> Result<f64> {
    if s == 0.0 {
        return Ok(1.0);
    }
    let sign = s.signum();
    let s = s.abs();
    let e = params.edge();
    let smax = 0.5 * e * (params.mu + params.gamma * e * e);
    if s > smax {
        return Err(Error::domain(format!("R-transform argument {s} exceeds S(2a) = {smax}")));
    }
    if s < 1e-4 {
        // cancellation in 1/S′ + 1/s²; the series converges fast here
        return Ok(r_transform_deriv(sign * s, &FreeCumulants::for_ensemble(params, 16)));
    }
    // S is decreasing on (2a, ∞): bracket z with S(z) = s
    let mut lo = e * (1.0 + 1e-15);
    let mut hi = e + 1.0;
    while stieltjes(hi, params)? > s {
        hi = e + 2.0 * (hi - e);
    }
    if stieltjes(lo, params)? <= s {
        lo = e;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if stieltjes(mid, params)? > s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    let z = 0.5 * (lo + hi);
    Ok(1.0 / stieltjes_deriv(z, params)? + 1.0 / (s * s))
}
