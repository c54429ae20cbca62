#![allow(dead_code)]

use std::f64::consts::PI;

use quartamp::spectrum::{density, EnsembleParams};

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `∫ g(x) ρ(x) dx` under `x = 2a sin θ`, which removes the square-root edges.
pub fn against_density(p: &EnsembleParams, g: impl Fn(f64) -> f64) -> f64 {
    let e = p.edge();
    simpson(
        |th: f64| {
            let x = e * th.sin();
            g(x) * density(x, p) * e * th.cos()
        },
        -PI / 2.0,
        PI / 2.0,
        4000,
    )
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn central_moment(v: &[f64], k: i32) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(k)).sum::<f64>() / v.len() as f64
}
