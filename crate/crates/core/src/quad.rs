//! Gauss–Legendre and Gauss–Hermite rules.
//!
//! Nodes come from Newton iteration on the three-term recurrences, started
//! from the usual asymptotic guesses.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre rule on [-1, 1]; weights sum to 2.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        // recompute the derivative at the converged node
        let (mut p1, mut p2) = (1.0, 0.0);
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
        }
        if z * z != 1.0 {
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// Gauss–Hermite rule for the standard normal law: `E f(Z) ≈ Σ w_i f(z_i)`,
/// weights sum to 1.
pub fn gauss_hermite_normal(n: usize) -> Rule {
    assert!(n >= 1);
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 1.0;
        for it in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-14 * z1.abs().max(1.0) && it > 0 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let s = PI.sqrt();
    let mut nodes: Vec<f64> = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let mut weights: Vec<f64> = w.iter().map(|v| v / s).collect();
    nodes.reverse();
    weights.reverse();
    Rule { nodes, weights }
}

/// The order-61 Gauss–Hermite rule used for scalar Gaussian expectations.
pub fn hermite61() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite_normal(61))
}

/// 64-node Gauss–Legendre rule, for smooth integrands evaluated in inner loops.
pub fn legendre64() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(64))
}

/// Standard-normal rule from 400 Legendre nodes on `[−12, 12]`.
///
/// Its nodes are evenly dense, so integrands with a sharp transition far in
/// the tail (such as `tanh(snr + √snr z)` at large `snr`) stay resolved.
pub fn normal_legendre() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let half = 12.0;
        let base = gauss_legendre(400);
        let c = half / (2.0 * std::f64::consts::PI).sqrt();
        let nodes: Vec<f64> = base.nodes.iter().map(|t| half * t).collect();
        let weights = nodes.iter().zip(&base.weights).map(|(z, w)| w * c * (-0.5 * z * z).exp()).collect();
        Rule { nodes, weights }
    })
}

/// `E f(Z)` for `Z ~ N(0, 1)` with the order-61 Gauss–Hermite rule.
pub fn normal_expect(f: impl Fn(f64) -> f64) -> f64 {
    let r = hermite61();
    r.nodes.iter().zip(&r.weights).map(|(&z, &w)| w * f(z)).sum()
}
