//! Signal priors and their scalar Gaussian-channel quantities.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::quad::{gauss_legendre, hermite61, normal_legendre, Rule};
use crate::{Error, Result};

/// Unit-second-moment signal prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prior {
    Rademacher,
    Gaussian,
}

impl Prior {
    /// Draws `n` i.i.d. entries.
    pub fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Prior::Rademacher => (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect(),
            Prior::Gaussian => (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Prior::Rademacher => "rademacher",
            Prior::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Prior {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rademacher" | "rad" | "pm1" => Ok(Prior::Rademacher),
            "gaussian" | "gauss" | "normal" => Ok(Prior::Gaussian),
            other => Err(Error::domain(format!("unknown prior '{other}'"))),
        }
    }
}

/// Posterior-mean denoiser for the channel `F = μ_eff X + √σ² Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Denoiser {
    pub prior: Prior,
    pub mu_eff: f64,
    pub sigma2: f64,
}

impl Denoiser {
    pub fn new(prior: Prior, mu_eff: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::domain(format!("sigma2 must be positive, got {sigma2}")));
        }
        if !mu_eff.is_finite() {
            return Err(Error::domain("mu_eff must be finite"));
        }
        Ok(Self { prior, mu_eff, sigma2 })
    }

    #[inline]
    pub fn eval(&self, f: f64) -> f64 {
        match self.prior {
            Prior::Rademacher => (f * self.mu_eff / self.sigma2).tanh(),
            Prior::Gaussian => f * self.mu_eff / (self.mu_eff * self.mu_eff + self.sigma2),
        }
    }

    #[inline]
    pub fn deriv(&self, f: f64) -> f64 {
        match self.prior {
            Prior::Rademacher => {
                let s = self.mu_eff / self.sigma2;
                let t = (f * s).tanh();
                s * (1.0 - t * t)
            }
            Prior::Gaussian => self.mu_eff / (self.mu_eff * self.mu_eff + self.sigma2),
        }
    }

    /// Posterior variance `Var[X | F = f]`.
    #[inline]
    pub fn variance(&self, f: f64) -> f64 {
        match self.prior {
            Prior::Rademacher => {
                let t = (f * self.mu_eff / self.sigma2).tanh();
                1.0 - t * t
            }
            Prior::Gaussian => self.sigma2 / (self.mu_eff * self.mu_eff + self.sigma2),
        }
    }

    /// Effective signal-to-noise ratio `μ_eff²/σ²`.
    pub fn snr(&self) -> f64 {
        self.mu_eff * self.mu_eff / self.sigma2
    }
}

/// `E[X | μ_eff X + √σ² Z = f]`.
pub fn denoise(f: f64, mu_eff: f64, sigma2: f64, prior: Prior) -> Result<f64> {
    Ok(Denoiser::new(prior, mu_eff, sigma2)?.eval(f))
}

/// Derivative of [`denoise`] in `f`.
pub fn denoise_deriv(f: f64, mu_eff: f64, sigma2: f64, prior: Prior) -> Result<f64> {
    Ok(Denoiser::new(prior, mu_eff, sigma2)?.deriv(f))
}

fn wide_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(400))
}

/// Scalar-channel mmse at signal-to-noise ratio `snr`.
///
/// For the Rademacher prior `1 − E tanh(snr + √snr Z) = E sech²(snr + √snr Z)`.
/// The Hermite rule is used up to `snr = 0.5`; above that the integrand is
/// resolved on a Legendre grid in `y = snr + √snr Z`, where a fixed Hermite
/// rule loses accuracy.
pub fn mmse(snr: f64, prior: Prior) -> f64 {
    if !(snr > 0.0) {
        return 1.0;
    }
    match prior {
        Prior::Gaussian => 1.0 / (1.0 + snr),
        Prior::Rademacher => {
            if snr <= 0.5 {
                let r = hermite61();
                let s = snr.sqrt();
                let e: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(&z, &w)| {
                        let c = 1.0 / (snr + s * z).cosh();
                        w * c * c
                    })
                    .sum();
                e
            } else {
                let r = wide_rule();
                let half = 40.0;
                let norm = half / (2.0 * std::f64::consts::PI * snr).sqrt();
                r.nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(&t, &w)| {
                        let y = half * t;
                        let q = (-2.0 * y.abs()).exp();
                        let expo = y - y * y / (2.0 * snr) - 0.5 * snr - 2.0 * y.abs();
                        w * 4.0 / ((1.0 + q) * (1.0 + q)) * expo.exp()
                    })
                    .sum::<f64>()
                    * norm
            }
        }
    }
}

/// Moments of the matched posterior-mean output `g(F)`, `F = μX + σZ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMoments {
    /// `E[g X]`
    pub gx: f64,
    /// `E[g²]`
    pub gg: f64,
    /// `E[g′]`
    pub dg: f64,
}

/// Scalar-channel moments of `g` with the signal drawn from `prior`.
pub fn channel_moments(den: &Denoiser, mu: f64, sigma2: f64) -> ChannelMoments {
    let r = normal_legendre();
    let s = sigma2.max(0.0).sqrt();
    let matched = den.mu_eff == mu && den.sigma2 == sigma2;
    match den.prior {
        Prior::Rademacher if matched => {
            let mm = mmse(den.snr(), Prior::Rademacher);
            ChannelMoments { gx: 1.0 - mm, gg: 1.0 - mm, dg: mu / sigma2 * mm }
        }
        Prior::Rademacher => {
            // g is odd, so X = +1 suffices
            let mut m = ChannelMoments { gx: 0.0, gg: 0.0, dg: 0.0 };
            for (&z, &w) in r.nodes.iter().zip(&r.weights) {
                let f = mu + s * z;
                let g = den.eval(f);
                m.gx += w * g;
                m.gg += w * g * g;
                m.dg += w * den.deriv(f);
            }
            m
        }
        Prior::Gaussian => {
            let a = den.eval(1.0);
            ChannelMoments { gx: a * mu, gg: a * a * (mu * mu + sigma2), dg: a }
        }
    }
}

/// `E[g_a(μ_a X + Z_a) g_b(μ_b X + Z_b)]` for jointly Gaussian `(Z_a, Z_b)`
/// with covariance `[[saa, sab], [sab, sbb]]`, independent of `X`.
pub fn pair_moment(ga: &Denoiser, mu_a: f64, gb: &Denoiser, mu_b: f64, saa: f64, sab: f64, sbb: f64) -> f64 {
    let r = normal_legendre();
    match (ga.prior, gb.prior) {
        (Prior::Gaussian, Prior::Gaussian) => ga.eval(1.0) * gb.eval(1.0) * (mu_a * mu_b + sab),
        _ => {
            let la = saa.max(0.0).sqrt();
            let (c, d) = if la > 0.0 {
                let c = sab / la;
                (c, (sbb - c * c).max(0.0).sqrt())
            } else {
                (0.0, sbb.max(0.0).sqrt())
            };
            // both denoisers are odd, so X = +1 suffices for the Rademacher prior
            let mut acc = 0.0;
            for (&z1, &w1) in r.nodes.iter().zip(&r.weights) {
                let va = ga.eval(mu_a + la * z1);
                let base = mu_b + c * z1;
                let inner: f64 = r.nodes.iter().zip(&r.weights).map(|(&z2, &w2)| w2 * gb.eval(base + d * z2)).sum();
                acc += w1 * va * inner;
            }
            acc
        }
    }
}
