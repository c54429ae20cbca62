//! Multi-stage state evolution of BAMP.
//!
//! The engine tracks an auxiliary sequence `Ũ_1, Ũ_2, …` where rows
//! `K(t−1)+1` carry the BAMP iterates `u^t` and the rows in between carry the
//! surrogates of `Y^ℓ u^t`. Each new row extends `μ̃`, `Δ̃`, `Φ̃` and the
//! matrices `B̃ = Σ κ̄_{j+1} Φ̃^j`, `Σ̃ = Σ κ̄_{a+b+2} Φ̃^a Δ̃ (Φ̃ᵀ)^b` are rebuilt.
//!
//! Indices are 0-based internally: row `r` is the auxiliary index `r + 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::exec::Exec;
use crate::linalg::{min_eigenvalue, psd_sqrt};
use crate::priors::{channel_moments, pair_moment, Denoiser, Prior};
use crate::sampling::mix_seed;
use crate::spectrum::{EnsembleParams, FreeCumulants};
use crate::{Error, Result};

/// Default Monte-Carlo sample count.
pub const DEFAULT_MC_SAMPLES: usize = 200_000;
/// Default number of outer iterations.
pub const DEFAULT_T: usize = 10;
/// Tolerated negative eigenvalue of `Σ̃`, relative to its largest.
pub const PSD_TOL: f64 = 1e-8;
/// Monte-Carlo rows carry sampling error, so `Σ̃` is only PSD up to
/// sampling noise; the clamp tolerance is `MC_PSD_SCALE / √samples`.
pub const MC_PSD_SCALE: f64 = 1.0;

/// Sampling-noise multiple used by the divergence flag in Monte Carlo mode.
pub const MC_RISE_SCALE: f64 = 3.0;
const MC_CHUNK: usize = 4096;

/// How the expectations of newly added rows are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentSource {
    /// Joint Monte-Carlo draws of `(X*, U₁, Z̃)`, antithetic in `X*`.
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact recursions with Gauss–Hermite rules for the denoised rows.
    Quadrature,
}

impl Default for MomentSource {
    fn default() -> Self {
        MomentSource::MonteCarlo { samples: DEFAULT_MC_SAMPLES, seed: 0 }
    }
}

/// Role of an auxiliary row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowKind {
    /// `Ũ₁ = U₁ = εX* + √(1−ε²) G`.
    Init,
    /// Linear row built from the previous row of `B̃`.
    Linear,
    /// `Ũ = g_{t+1}(F_t)` for outer step `t` (1-based).
    Denoised { t: usize },
}

/// Growing state of the recursion.
#[derive(Debug, Clone)]
pub struct BampSE {
    pub k: usize,
    pub lambda: f64,
    pub epsilon: f64,
    /// Pre-processing coefficients `c_1..c_K`.
    pub coeffs: Vec<f64>,
    pub cumulants: FreeCumulants,
    /// Completed outer steps.
    pub t: usize,
    pub kinds: Vec<RowKind>,
    pub tilde_mu: Vec<f64>,
    /// `E[Ũ_r X*]` per row.
    pub e: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub b_mat: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma_coef: Vec<f64>,
    pub mu_t: Vec<f64>,
    pub sigma_t2: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub onsager: Vec<Vec<f64>>,
    /// Denoiser used for each `Denoised` row, by outer step.
    pub denoisers: Vec<Denoiser>,
    /// Smallest eigenvalue of `Σ̃` seen so far.
    pub min_sigma_eig: f64,
}

fn get(m: &[Vec<f64>], i: usize, j: usize) -> f64 {
    m.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// `E[Ũ₁ = U₁]` and the initial state.
pub fn se_init(epsilon: f64, lambda: f64, cumulants: &FreeCumulants, coeffs: &[f64]) -> Result<BampSE> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if coeffs.is_empty() {
        return Err(Error::domain("pre-processing needs at least one coefficient"));
    }
    Ok(BampSE {
        k: coeffs.len(),
        lambda,
        epsilon,
        coeffs: coeffs.to_vec(),
        cumulants: cumulants.clone(),
        t: 0,
        kinds: vec![RowKind::Init],
        tilde_mu: vec![lambda * epsilon],
        e: vec![epsilon],
        delta: vec![vec![1.0]],
        phi: vec![vec![0.0]],
        b_mat: vec![vec![cumulants.kappa(1)]],
        sigma: vec![vec![cumulants.kappa(2)]],
        alpha: vec![vec![0.0]],
        beta: vec![vec![1.0]],
        gamma_coef: vec![0.0],
        mu_t: vec![],
        sigma_t2: vec![],
        theta: vec![],
        onsager: vec![],
        denoisers: vec![],
        min_sigma_eig: cumulants.kappa(2),
    })
}

impl BampSE {
    /// Number of auxiliary rows so far.
    pub fn n(&self) -> usize {
        self.e.len()
    }

    /// Largest cumulant order the matrices have consumed.
    pub fn cumulant_order_needed(&self) -> usize {
        2 * self.n()
    }

    /// `Φ̃` row of the next linear row: `δ_{n−1,j} + Σ_i B̃_{n−1,i} Φ̃_{i,j}`.
    pub fn linear_phi_row(&self) -> Vec<f64> {
        let n = self.n();
        let last = n - 1;
        (0..n)
            .map(|j| {
                let mut v = if j == last { 1.0 } else { 0.0 };
                for i in 0..n {
                    v += self.b_mat[last][i] * self.phi[i][j];
                }
                v
            })
            .collect()
    }

    /// `E[Ũ_new X*] = μ̃_{n−1} + Σ_i B̃_{n−1,i} e_i` for the next linear row.
    pub fn linear_e(&self) -> f64 {
        let last = self.n() - 1;
        self.tilde_mu[last] + (0..self.n()).map(|i| self.b_mat[last][i] * self.e[i]).sum::<f64>()
    }

    /// Exact `Δ̃` row (length `n+1`) of the next linear row, by Stein's lemma.
    pub fn linear_delta_row(&self, phi_new: &[f64], e_new: f64) -> Vec<f64> {
        let n = self.n();
        let last = n - 1;
        let stein = |phi_row: &[f64]| -> f64 {
            (0..n).map(|k| self.sigma[last][k] * phi_row.get(k).copied().unwrap_or(0.0)).sum()
        };
        let mut row = vec![0.0; n + 1];
        for j in 0..n {
            let mut v = stein(&self.phi[j]) + self.tilde_mu[last] * self.e[j];
            for i in 0..n {
                v += self.b_mat[last][i] * self.delta[i][j];
            }
            row[j] = v;
        }
        let mut d = stein(phi_new) + self.tilde_mu[last] * e_new;
        for i in 0..n {
            d += self.b_mat[last][i] * row[i];
        }
        row[n] = d;
        row
    }

    /// Appends a row and rebuilds `B̃` and `Σ̃`.
    pub fn push_row(&mut self, kind: RowKind, e: f64, delta_row: Vec<f64>, phi_row: Vec<f64>) -> Result<()> {
        let n = self.n();
        assert_eq!(delta_row.len(), n + 1);
        assert_eq!(phi_row.len(), n);
        self.kinds.push(kind);
        self.e.push(e);
        self.tilde_mu.push(self.lambda * e);
        for (j, row) in self.delta.iter_mut().enumerate() {
            row.push(delta_row[j]);
        }
        self.delta.push(delta_row);
        for row in self.phi.iter_mut() {
            row.push(0.0);
        }
        let mut p = phi_row;
        p.push(0.0);
        self.phi.push(p);
        self.rebuild_matrices()
    }

    fn rebuild_matrices(&mut self) -> Result<()> {
        let n = self.n();
        let c = &self.cumulants;
        let mut powers: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
        let mut id = vec![vec![0.0; n]; n];
        for (i, row) in id.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        powers.push(id);
        for a in 1..n {
            let next = matmul(&powers[a - 1], &self.phi);
            powers.push(next);
        }
        let mut b = vec![vec![0.0; n]; n];
        for (j, p) in powers.iter().enumerate() {
            let kj = c.kappa(j + 1);
            if kj == 0.0 {
                continue;
            }
            for r in 0..n {
                for s in 0..n {
                    b[r][s] += kj * p[r][s];
                }
            }
        }
        let mut sigma = vec![vec![0.0; n]; n];
        for a in 0..n {
            // Q_a = Σ_b κ̄_{a+b+2} Φ̃^b
            let mut q = vec![vec![0.0; n]; n];
            let mut any = false;
            for (bidx, p) in powers.iter().enumerate() {
                let kab = c.kappa(a + bidx + 2);
                if kab == 0.0 {
                    continue;
                }
                any = true;
                for r in 0..n {
                    for s in 0..n {
                        q[r][s] += kab * p[r][s];
                    }
                }
            }
            if !any {
                continue;
            }
            let pd = matmul(&powers[a], &self.delta);
            for r in 0..n {
                for s in 0..n {
                    let mut v = 0.0;
                    for m in 0..n {
                        v += pd[r][m] * q[s][m];
                    }
                    sigma[r][s] += v;
                }
            }
        }
        for r in 0..n {
            for s in 0..r {
                let v = 0.5 * (sigma[r][s] + sigma[s][r]);
                sigma[r][s] = v;
                sigma[s][r] = v;
            }
        }
        if sigma.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Instability("non-finite entries in Sigma".into()));
        }
        let min = min_eigenvalue(&sigma);
        self.min_sigma_eig = self.min_sigma_eig.min(min);
        self.b_mat = b;
        self.sigma = sigma;
        Ok(())
    }

    /// `α`, `β`, `γ` of the newest linear row from row `n−2` of `B̃`,
    /// skipping `i ≡ 1 (mod K)` in the inner sums.
    pub fn coeff_update(&mut self) {
        let n = self.n();
        let src = n - 2;
        let k = self.k;
        let skip = |i: usize| i % k == 0;
        let brow = &self.b_mat[src];
        let mut alpha = vec![0.0; n];
        for (j, a) in alpha.iter_mut().enumerate().take(src + 1) {
            let mut v = if j == src { 1.0 } else { 0.0 };
            for i in 0..=src {
                if !skip(i) {
                    v += get(&self.alpha, i, j) * brow[i];
                }
            }
            *a = v;
        }
        let outer = self.t + 1;
        let mut beta = vec![0.0; outer];
        for (j, bv) in beta.iter_mut().enumerate() {
            let mut v = brow.get(k * j).copied().unwrap_or(0.0);
            for i in 0..=src {
                if !skip(i) {
                    v += get(&self.beta, i, j) * brow[i];
                }
            }
            *bv = v;
        }
        let mut gamma = self.tilde_mu[src];
        for i in 0..=src {
            if !skip(i) {
                gamma += brow[i] * self.gamma_coef[i];
            }
        }
        self.alpha.push(alpha);
        self.beta.push(beta);
        self.gamma_coef.push(gamma);
    }

    /// Adds the `K − 1` linear rows of the current outer step with the exact recursions.
    fn intermediate_exact(&mut self) -> Result<()> {
        let phi = self.linear_phi_row();
        let e = self.linear_e();
        let delta = self.linear_delta_row(&phi, e);
        self.push_row(RowKind::Linear, e, delta, phi)?;
        self.coeff_update();
        Ok(())
    }

    /// `(μ_t, θ_t, c_t)` for the next outer step `t = self.t + 1`.
    pub fn emit(&self) -> (f64, Vec<f64>, Vec<f64>) {
        let t = self.t + 1;
        let k = self.k;
        let n = k * t;
        assert!(self.n() >= n, "intermediate rows missing");
        let mut mu = 0.0;
        let mut theta = vec![0.0; n];
        let mut ons = vec![0.0; t];
        for (i, &ci) in self.coeffs.iter().enumerate() {
            let r = k * (t - 1) + i;
            let brow = &self.b_mat[r];
            let mut m = self.tilde_mu[r];
            for kk in 0..=r {
                m += self.gamma_coef[kk] * brow[kk];
            }
            mu += ci * m;
            for (j, th) in theta.iter_mut().enumerate() {
                let mut v = if j == r { 1.0 } else { 0.0 };
                for kk in 0..=r {
                    v += get(&self.alpha, kk, j) * brow[kk];
                }
                *th += ci * v;
            }
            for (j, o) in ons.iter_mut().enumerate() {
                let mut v = 0.0;
                for kk in 0..=r {
                    v += get(&self.beta, kk, j) * brow[kk];
                }
                *o += ci * v;
            }
        }
        (mu, theta, ons)
    }

    /// `θᵀ Σ̃ θ`.
    pub fn quad_sigma(&self, theta: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, &ti) in theta.iter().enumerate() {
            for (j, &tj) in theta.iter().enumerate() {
                s += ti * self.sigma[i][j] * tj;
            }
        }
        s
    }

    /// Records the emission of outer step `t` and returns its denoiser.
    pub fn record_emission(&mut self, prior: Prior) -> Result<Denoiser> {
        let (mu, theta, ons) = self.emit();
        let s2 = self.quad_sigma(&theta);
        let den = Denoiser::new(prior, mu, s2)
            .map_err(|_| Error::Instability(format!("effective noise variance {s2:.3e} is not positive")))?;
        self.mu_t.push(mu);
        self.sigma_t2.push(s2);
        self.theta.push(theta);
        self.onsager.push(ons);
        self.denoisers.push(den);
        Ok(den)
    }

    /// Appends the denoised row `Kt+1` with the given moments and sets its
    /// coefficients: `β_{Kt+1, t+1} = 1`, everything else zero.
    pub fn push_denoised(&mut self, e: f64, delta_row: Vec<f64>, dg: f64) -> Result<()> {
        let t = self.t + 1;
        let theta = self.theta[t - 1].clone();
        let n = self.n();
        let phi: Vec<f64> = (0..n).map(|j| theta.get(j).copied().unwrap_or(0.0) * dg).collect();
        self.push_row(RowKind::Denoised { t }, e, delta_row, phi)?;
        self.alpha.push(vec![0.0; n + 1]);
        let mut beta = vec![0.0; t + 1];
        beta[t] = 1.0;
        self.beta.push(beta);
        self.gamma_coef.push(0.0);
        self.t = t;
        Ok(())
    }

    /// Exact `Δ̃` row of the denoised row for step `t` via scalar and pair quadrature.
    fn denoised_row_exact(&self, den: &Denoiser) -> (f64, Vec<f64>, f64) {
        let t = self.t + 1;
        let theta = &self.theta[t - 1];
        let mu = self.mu_t[t - 1];
        let s2 = self.sigma_t2[t - 1];
        let cm = channel_moments(den, mu, s2);
        let n = self.n();
        // E[g Z̃_k] = Σ_m Σ̃_{km} θ_m E[g′]
        let gz: Vec<f64> =
            (0..n).map(|kk| (0..theta.len()).map(|m| self.sigma[kk][m] * theta[m]).sum::<f64>() * cm.dg).collect();
        let mut row = vec![0.0; n + 1];
        for j in 0..n {
            row[j] = match self.kinds[j] {
                RowKind::Init => self.epsilon * cm.gx,
                RowKind::Linear => {
                    let src = j - 1;
                    let mut v = gz[src] + self.tilde_mu[src] * cm.gx;
                    for i in 0..j {
                        v += self.b_mat[src][i] * row[i];
                    }
                    v
                }
                RowKind::Denoised { t: s } => {
                    let th_s = &self.theta[s - 1];
                    let cross = self.cross_sigma(theta, th_s);
                    pair_moment(den, mu, &self.denoisers[s - 1], self.mu_t[s - 1], s2, cross, self.sigma_t2[s - 1])
                }
            };
        }
        row[n] = cm.gg;
        (cm.gx, row, cm.dg)
    }

    fn cross_sigma(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                s += ai * self.sigma[i][j] * bj;
            }
        }
        s
    }

    /// Overlap and MSE of the latest iterate row.
    pub fn latest_metrics(&self) -> (f64, f64) {
        let r = self.n() - 1;
        let e = self.e[r];
        let d = self.delta[r][r];
        let overlap = if d > 0.0 { e.abs() / d.sqrt() } else { 0.0 };
        (overlap, 0.5 * (1.0 - 2.0 * e * e + d * d))
    }

    /// Monte-Carlo estimate of `(E[Ũ_new X*], E[Ũ_new Ũ_j]_j)` for a candidate row.
    fn monte_carlo_row(
        &self,
        new: &NewRow,
        samples: usize,
        seed: u64,
        prior: Prior,
        exec: Exec,
    ) -> Result<(f64, Vec<f64>)> {
        let n = self.n();
        let tol = PSD_TOL.max(MC_PSD_SCALE / (samples as f64).sqrt());
        let (root, _) = psd_sqrt(&self.sigma, tol)?;
        let pairs = samples.div_ceil(2);
        // Every row reuses the same draws per sample index (common random
        // numbers), so consecutive rows of Δ̃ share their sampling error.
        let base_seed = mix_seed(seed, 0, "se-monte-carlo");
        let width = n + 2;
        let eps = self.epsilon;
        let eps_c = (1.0 - eps * eps).max(0.0).sqrt();
        let sums = exec.block_sum(pairs, MC_CHUNK, width, |range| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
            let mut acc = vec![0.0; width];
            let mut xi = vec![0.0; n];
            let mut z = vec![0.0; n];
            let mut u = vec![0.0; n + 1];
            for idx in range {
                rng.set_stream(idx as u64);
                rng.set_word_pos(0);
                let x0: f64 = match prior {
                    Prior::Rademacher => {
                        if rng.gen::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    Prior::Gaussian => rng.sample(StandardNormal),
                };
                let g: f64 = rng.sample(StandardNormal);
                for v in xi.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for (i, zi) in z.iter_mut().enumerate() {
                    *zi = root[i].iter().zip(&xi).map(|(a, b)| a * b).sum();
                }
                for x in [x0, -x0] {
                    for r in 0..=n {
                        let kind = if r < n { None } else { Some(new) };
                        u[r] = self.sample_row(r, kind, x, g, &z, &u, eps, eps_c);
                    }
                    acc[0] += u[n] * x;
                    for j in 0..=n {
                        acc[1 + j] += u[n] * u[j];
                    }
                }
            }
            acc
        });
        let m = (2 * pairs) as f64;
        let e = sums[0] / m;
        let row = sums[1..].iter().map(|v| v / m).collect();
        Ok((e, row))
    }

    #[allow(clippy::too_many_arguments)]
    fn sample_row(
        &self,
        r: usize,
        new: Option<&NewRow>,
        x: f64,
        g: f64,
        z: &[f64],
        u: &[f64],
        eps: f64,
        eps_c: f64,
    ) -> f64 {
        let linear = |src: usize| -> f64 {
            let mut v = z[src] + self.tilde_mu[src] * x;
            for i in 0..=src {
                v += self.b_mat[src][i] * u[i];
            }
            v
        };
        let denoised = |t: usize| -> f64 {
            let th = &self.theta[t - 1];
            let f = self.mu_t[t - 1] * x + th.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            self.denoisers[t - 1].eval(f)
        };
        match new {
            Some(NewRow::Linear) => linear(r - 1),
            Some(NewRow::Denoised) => denoised(self.t + 1),
            None => match self.kinds[r] {
                RowKind::Init => eps * x + eps_c * g,
                RowKind::Linear => linear(r - 1),
                RowKind::Denoised { t } => denoised(t),
            },
        }
    }
}

enum NewRow {
    Linear,
    Denoised,
}

/// Configuration of a state-evolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeConfig {
    pub lambda: f64,
    pub prior: Prior,
    pub coeffs: Vec<f64>,
    pub epsilon: f64,
    pub t_max: usize,
    pub source: MomentSource,
    pub exec: Exec,
}

/// One outer step of a state-evolution trajectory; metrics refer to `u^{t+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeRecord {
    pub t: usize,
    pub mu_t: f64,
    pub sigma_t2: f64,
    pub overlap: f64,
    pub mse: f64,
}

#[derive(Debug, Clone)]
pub struct SeTrajectory {
    pub records: Vec<SeRecord>,
    pub state: BampSE,
    /// MSE increased over three consecutive steps.
    pub diverged: bool,
}

impl SeTrajectory {
    pub fn final_mse(&self) -> f64 {
        self.records.last().map(|r| r.mse).unwrap_or(0.5)
    }
}

/// Intermediate step `ℓ` of the current outer step.
pub fn se_intermediate_step(state: &mut BampSE, source: MomentSource, prior: Prior, exec: Exec) -> Result<()> {
    match source {
        MomentSource::Quadrature => state.intermediate_exact(),
        MomentSource::MonteCarlo { samples, seed } => {
            let phi = state.linear_phi_row();
            let (e, delta) = state.monte_carlo_row(&NewRow::Linear, samples, seed, prior, exec)?;
            state.push_row(RowKind::Linear, e, delta, phi)?;
            state.coeff_update();
            Ok(())
        }
    }
}

/// Emits `(μ_t, θ_t, c_t)` and appends the denoised row `Kt+1`.
pub fn se_g_step(state: &mut BampSE, source: MomentSource, prior: Prior, exec: Exec) -> Result<()> {
    let den = state.record_emission(prior)?;
    match source {
        MomentSource::Quadrature => {
            let (e, row, dg) = state.denoised_row_exact(&den);
            state.push_denoised(e, row, dg)
        }
        MomentSource::MonteCarlo { samples, seed } => {
            let t = state.t + 1;
            let cm = channel_moments(&den, state.mu_t[t - 1], state.sigma_t2[t - 1]);
            let (e, row) = state.monte_carlo_row(&NewRow::Denoised, samples, seed, prior, exec)?;
            state.push_denoised(e, row, cm.dg)
        }
    }
}

/// Increase in mse below which a Monte Carlo step is not counted as a rise.
fn rise_floor(source: MomentSource, mse: f64) -> f64 {
    match source {
        MomentSource::Quadrature => 0.0,
        MomentSource::MonteCarlo { samples, .. } => MC_RISE_SCALE * mse.max(0.0).sqrt() / (samples as f64).sqrt(),
    }
}

/// Cumulant order required by a run of `t_max` steps with degree `k`.
pub fn required_kmax(k: usize, t_max: usize) -> usize {
    2 * k * t_max + 2
}

/// Full state-evolution run.
pub fn se_run(cfg: &SeConfig, cumulants: &FreeCumulants) -> Result<SeTrajectory> {
    if cfg.t_max == 0 {
        return Err(Error::domain("T must be at least 1"));
    }
    let k = cfg.coeffs.len();
    let need = required_kmax(k, cfg.t_max);
    let semicircle = cumulants.source().map(|p| p.gamma == 0.0).unwrap_or(false);
    if cumulants.kmax() < need && !semicircle {
        return Err(Error::domain(format!(
            "state evolution with K={k}, T={} needs free cumulants up to order {need}, got {}",
            cfg.t_max,
            cumulants.kmax()
        )));
    }
    let mut st = se_init(cfg.epsilon, cfg.lambda, cumulants, &cfg.coeffs)?;
    if cfg.lambda == 0.0 {
        // No signal: every posterior mean is zero.
        let records = (1..=cfg.t_max)
            .map(|t| SeRecord { t, mu_t: 0.0, sigma_t2: f64::INFINITY, overlap: 0.0, mse: 0.5 })
            .collect();
        return Ok(SeTrajectory { records, state: st, diverged: false });
    }
    let mut records = Vec::with_capacity(cfg.t_max);
    let mut rises = 0;
    let mut diverged = false;
    for t in 1..=cfg.t_max {
        for _ in 1..k {
            se_intermediate_step(&mut st, cfg.source, cfg.prior, cfg.exec)?;
        }
        se_g_step(&mut st, cfg.source, cfg.prior, cfg.exec)?;
        let (overlap, mse) = st.latest_metrics();
        if let Some(prev) = records.last().map(|r: &SeRecord| r.mse) {
            if mse > prev + rise_floor(cfg.source, prev) {
                rises += 1;
                if rises >= 3 {
                    diverged = true;
                }
            } else {
                rises = 0;
            }
        }
        records.push(SeRecord { t, mu_t: st.mu_t[t - 1], sigma_t2: st.sigma_t2[t - 1], overlap, mse });
    }
    Ok(SeTrajectory { records, state: st, diverged })
}

/// State evolution of BAMP with the quartic-optimal pre-processing.
pub fn se_run_optimal(
    lambda: f64,
    prior: Prior,
    params: &EnsembleParams,
    epsilon: f64,
    t_max: usize,
    source: MomentSource,
) -> Result<SeTrajectory> {
    let coeffs = vec![params.mu * lambda, -params.gamma * lambda * lambda, params.gamma * lambda];
    let cum = FreeCumulants::for_ensemble(params, required_kmax(3, t_max));
    se_run(&SeConfig { lambda, prior, coeffs, epsilon, t_max, source, exec: Exec::default() }, &cum)
}
