//! Random generation of noise spectra, Haar bases and spiked instances.

use std::f64::consts::PI;

use faer::linalg::matmul::triangular::{matmul as tri_matmul, BlockStructure};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::exec::Exec;
use crate::linalg::{parallelism, SymMatrix};
use crate::priors::Prior;
use crate::spectrum::EnsembleParams;

/// Node count of the inverse-CDF table.
pub const CDF_TABLE_NODES: usize = 10_000;

/// Stream labels used for per-trial seeding.
pub mod stream {
    pub const EIGENVALUES: &str = "eigenvalues";
    pub const BASIS: &str = "basis";
    pub const PRIOR: &str = "prior";
    pub const AMP_INIT: &str = "amp-init";
    pub const MONTE_CARLO: &str = "monte-carlo";
}

/// SplitMix64 output function applied to `x + φ`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for one `(master, trial, label)` triple:
///
/// ```text
/// s = splitmix64(splitmix64(splitmix64(master) ^ trial) ^ fnv1a64(label))
/// ```
pub fn mix_seed(master: u64, trial: u64, label: &str) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ trial) ^ fnv1a64(label.as_bytes()))
}

/// Reproducible per-trial random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedScheme {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl SeedScheme {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        Self { master_seed, trial_index }
    }

    pub fn seed(&self, label: &str) -> u64 {
        mix_seed(self.master_seed, self.trial_index, label)
    }

    pub fn rng(&self, label: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed(label))
    }
}

/// Tabulated inverse CDF of ρ with monotone linear interpolation.
#[derive(Debug, Clone)]
pub struct EigenvalueSampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl EigenvalueSampler {
    pub fn new(params: &EnsembleParams) -> Self {
        let n = CDF_TABLE_NODES;
        let e = params.edge();
        let mut xs = Vec::with_capacity(n);
        let mut cdf = Vec::with_capacity(n);
        for i in 0..n {
            let th = -0.5 * PI + PI * i as f64 / (n - 1) as f64;
            let x = if i == 0 {
                -e
            } else if i == n - 1 {
                e
            } else {
                e * th.sin()
            };
            xs.push(x);
            cdf.push(if i == 0 {
                0.0
            } else if i == n - 1 {
                1.0
            } else {
                params.cdf(x)
            });
        }
        // the closed form is monotone; guard against rounding
        for i in 1..n {
            if cdf[i] < cdf[i - 1] {
                cdf[i] = cdf[i - 1];
            }
        }
        Self { xs, cdf }
    }

    /// Quantile at `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u);
        if i == 0 {
            return self.xs[0];
        }
        if i >= self.cdf.len() {
            return *self.xs.last().unwrap();
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.xs[i - 1] + t * (self.xs[i] - self.xs[i - 1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.gen::<f64>())).collect()
    }
}

/// `n` i.i.d. draws from ρ.
pub fn sample_eigenvalues<R: Rng + ?Sized>(n: usize, params: &EnsembleParams, rng: &mut R) -> Vec<f64> {
    EigenvalueSampler::new(params).sample(n, rng)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// columns of `Q` rescaled so that `diag(R) > 0`.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<f64> {
    let mut g = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            g.write(i, j, rng.sample(StandardNormal));
        }
    }
    let qr = g.qr();
    let mut q = qr.compute_q();
    let r = qr.compute_r();
    for j in 0..n {
        if r.read(j, j) < 0.0 {
            for i in 0..n {
                q.write(i, j, -q.read(i, j));
            }
        }
    }
    q
}

/// `Oᵀ diag(d) O`.
pub fn noise_from_basis(o: &Mat<f64>, d: &[f64], exec: Exec) -> SymMatrix {
    let n = o.nrows();
    assert_eq!(d.len(), n);
    let mut dox = o.to_owned();
    for j in 0..n {
        for i in 0..n {
            dox.write(i, j, d[i] * o.read(i, j));
        }
    }
    let mut acc = Mat::<f64>::zeros(n, n);
    tri_matmul(
        acc.as_mut(),
        BlockStructure::TriangularLower,
        o.transpose(),
        BlockStructure::Rectangular,
        dox.as_ref(),
        BlockStructure::Rectangular,
        None,
        1.0,
        parallelism(exec),
    );
    SymMatrix::from_faer_lower(acc)
}

/// Rank-one spiked observation `Y = (λ/N) x* x*ᵀ + Oᵀ D O`.
#[derive(Debug, Clone)]
pub struct SpikedInstance {
    pub n: usize,
    pub lambda: f64,
    pub y: SymMatrix,
    pub x_star: Vec<f64>,
    pub eigenvalues_d: Vec<f64>,
}

impl SpikedInstance {
    /// Adds the spike to a noise matrix.
    pub fn from_noise(mut z: SymMatrix, eigenvalues_d: Vec<f64>, x_star: Vec<f64>, lambda: f64) -> Self {
        let n = z.n();
        assert_eq!(x_star.len(), n);
        z.add_rank_one(lambda / n as f64, &x_star);
        Self { n, lambda, y: z, x_star, eigenvalues_d }
    }
}

/// Draws a complete instance from a single generator.
pub fn make_instance<R: Rng + ?Sized>(
    n: usize,
    lambda: f64,
    prior: Prior,
    params: &EnsembleParams,
    rng: &mut R,
) -> SpikedInstance {
    let d = sample_eigenvalues(n, params, rng);
    let o = haar_orthogonal(n, rng);
    let x = prior.sample(n, rng);
    SpikedInstance::from_noise(noise_from_basis(&o, &d, Exec::default()), d, x, lambda)
}

/// Draws an instance with each ingredient taken from its own labelled stream.
pub fn make_instance_seeded(
    n: usize,
    lambda: f64,
    prior: Prior,
    params: &EnsembleParams,
    seeds: &SeedScheme,
    exec: Exec,
) -> SpikedInstance {
    let d = sample_eigenvalues(n, params, &mut seeds.rng(stream::EIGENVALUES));
    let o = haar_orthogonal(n, &mut seeds.rng(stream::BASIS));
    let x = prior.sample(n, &mut seeds.rng(stream::PRIOR));
    SpikedInstance::from_noise(noise_from_basis(&o, &d, exec), d, x, lambda)
}
