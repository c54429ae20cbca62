use quartamp::exec::Exec;
use quartamp::linalg::min_eigenvalue;
use quartamp::priors::{channel_moments, mmse, Prior};
use quartamp::replica::{baseline_fixed_point, bo_fixed_point};
use quartamp::se::*;
use quartamp::spectrum::{EnsembleParams, FreeCumulants};

const Q: MomentSource = MomentSource::Quadrature;
const SEQ: Exec = Exec::Sequential;

fn ens(mu: f64) -> EnsembleParams {
    EnsembleParams::from_mu(mu).unwrap()
}

fn at(m: &[Vec<f64>], i: usize, j: usize) -> f64 {
    m.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)
}

fn run(mu: f64, lambda: f64, coeffs: Vec<f64>, eps: f64, t_max: usize, source: MomentSource) -> SeTrajectory {
    let cum = FreeCumulants::for_ensemble(&ens(mu), required_kmax(coeffs.len(), t_max));
    let cfg = SeConfig { lambda, prior: Prior::Rademacher, coeffs, epsilon: eps, t_max, source, exec: Exec::default() };
    se_run(&cfg, &cum).unwrap()
}

fn optimal(mu: f64, lambda: f64) -> Vec<f64> {
    let p = ens(mu);
    vec![p.mu * lambda, -p.gamma * lambda * lambda, p.gamma * lambda]
}

#[test]
fn initial_state() {
    let c = FreeCumulants::for_ensemble(&ens(0.0), 8);
    let s = se_init(0.3, 2.5, &c, &[1.0, 2.0]).unwrap();
    assert!((s.tilde_mu[0] - 0.75).abs() < 1e-15);
    assert_eq!(s.delta, vec![vec![1.0]]);
    assert_eq!(s.phi, vec![vec![0.0]]);
    assert_eq!(s.b_mat[0][0], c.kappa(1));
    assert_eq!(s.b_mat[0][0], 0.0);
    assert!((s.sigma[0][0] - 1.0).abs() < 1e-12);
    assert_eq!((s.alpha[0][0], s.beta[0][0], s.gamma_coef[0]), (0.0, 1.0, 0.0));
    assert!(se_init(0.0, 1.0, &c, &[1.0]).is_err());
    assert!(se_init(1.1, 1.0, &c, &[1.0]).is_err());
}

#[test]
fn base_case_coefficients() {
    let c = FreeCumulants::for_ensemble(&ens(0.0), 20);
    let mut s = se_init(0.4, 2.0, &c, &optimal(0.0, 2.0)).unwrap();
    se_intermediate_step(&mut s, Q, Prior::Rademacher, SEQ).unwrap();
    assert_eq!(s.phi[1][0], 1.0);
    assert_eq!(s.alpha[1][0], 1.0);
    assert_eq!(s.beta[1][0], s.b_mat[0][0]);
    assert_eq!(s.gamma_coef[1], s.tilde_mu[0]);
    se_intermediate_step(&mut s, Q, Prior::Rademacher, SEQ).unwrap();
    assert!((s.alpha[2][0] - s.b_mat[1][1]).abs() < 1e-15);
    assert_eq!(s.alpha[2][1], 1.0);
    for i in 0..s.n() {
        assert!(s.delta[i][i] >= 0.0);
    }
}

#[test]
fn denoised_row_coefficients() {
    let c = FreeCumulants::for_ensemble(&ens(0.0), 20);
    let mut s = se_init(0.4, 2.0, &c, &optimal(0.0, 2.0)).unwrap();
    se_intermediate_step(&mut s, Q, Prior::Rademacher, SEQ).unwrap();
    se_intermediate_step(&mut s, Q, Prior::Rademacher, SEQ).unwrap();
    se_g_step(&mut s, Q, Prior::Rademacher, SEQ).unwrap();
    // the denoised iterate of step t is the g-row indexed t (the init row is g-row 0)
    let r = 3;
    assert!(s.alpha[r].iter().all(|&v| v == 0.0));
    assert_eq!(s.gamma_coef[r], 0.0);
    assert_eq!(s.beta[r], vec![0.0, 1.0]);
}

#[test]
fn degree_one_has_no_intermediate_rows() {
    let traj = run(1.0, 2.0, vec![2.0], 0.5, 4, Q);
    assert_eq!(traj.state.n(), 5);
    assert!(traj.state.kinds.iter().all(|k| !matches!(k, RowKind::Linear)));
}

/// Coefficients of `Z̃_0..`, of the g-rows and of `X*` in each auxiliary row,
/// unrolled directly from `Ũ_{r+1} = Z̃_r + μ̃_r X* + Σ_i B̃_{r,i} Ũ_i`.
struct Symbolic {
    z: Vec<f64>,
    g: Vec<f64>,
    x: f64,
}

fn unroll(s: &BampSE, rows: usize, width: usize, outer: usize) -> Vec<Symbolic> {
    let mut out: Vec<Symbolic> = Vec::new();
    for r in 0..rows {
        if r % s.k == 0 {
            let mut g = vec![0.0; outer];
            g[r / s.k] = 1.0;
            out.push(Symbolic { z: vec![0.0; width], g, x: 0.0 });
        } else {
            out.push(next_linear(s, &out, r - 1, width, outer));
        }
    }
    out
}

fn next_linear(s: &BampSE, sym: &[Symbolic], src: usize, width: usize, outer: usize) -> Symbolic {
    let mut v = Symbolic { z: vec![0.0; width], g: vec![0.0; outer], x: s.tilde_mu[src] };
    v.z[src] += 1.0;
    for (i, si) in sym.iter().enumerate().take(src + 1) {
        let b = s.b_mat[src][i];
        for (a, c) in v.z.iter_mut().zip(&si.z) {
            *a += b * c;
        }
        for (a, c) in v.g.iter_mut().zip(&si.g) {
            *a += b * c;
        }
        v.x += b * si.x;
    }
    v
}

#[test]
fn brute_force_unrolling_for_cubic_preprocessing() {
    let lambda = 2.5;
    let coeffs = optimal(0.0, lambda);
    let k = coeffs.len();
    let c = FreeCumulants::for_ensemble(&ens(0.0), 40);
    let mut s = se_init(0.5, lambda, &c, &coeffs).unwrap();
    for t in 1..=2 {
        for _ in 1..k {
            se_intermediate_step(&mut s, Q, Prior::Rademacher, SEQ).unwrap();
        }
        let rows = s.n();
        let width = rows + 1;
        let sym = unroll(&s, rows, width, t + 1);
        for (r, v) in sym.iter().enumerate() {
            for j in 0..width {
                assert!((at(&s.alpha, r, j) - v.z[j]).abs() < 1e-12, "alpha[{r}][{j}]");
            }
            for j in 0..=t {
                assert!((at(&s.beta, r, j) - v.g[j]).abs() < 1e-12, "beta[{r}][{j}]");
            }
            assert!((s.gamma_coef[r] - v.x).abs() < 1e-12, "gamma[{r}]");
        }
        // F_t = Σ_i c_i Ũ^{next}_{K(t−1)+i}
        let (mu, theta, ons) = s.emit();
        let mut f = Symbolic { z: vec![0.0; width], g: vec![0.0; t + 1], x: 0.0 };
        for (i, ci) in coeffs.iter().enumerate() {
            let v = next_linear(&s, &sym, k * (t - 1) + i, width, t + 1);
            for (a, b) in f.z.iter_mut().zip(&v.z) {
                *a += ci * b;
            }
            for (a, b) in f.g.iter_mut().zip(&v.g) {
                *a += ci * b;
            }
            f.x += ci * v.x;
        }
        assert!((mu - f.x).abs() < 1e-12);
        assert_eq!(theta.len(), k * t);
        for j in 0..width {
            assert!((theta.get(j).copied().unwrap_or(0.0) - f.z[j]).abs() < 1e-12, "theta[{j}]");
        }
        assert_eq!(ons.len(), t);
        for j in 0..t {
            assert!((ons[j] - f.g[j]).abs() < 1e-12, "c[{j}]");
        }
        // the current iterate carries no Onsager weight on itself beyond κ̄₁ = 0
        assert!(f.g[t].abs() < 1e-12);
        se_g_step(&mut s, Q, Prior::Rademacher, SEQ).unwrap();
    }
}

#[test]
fn wigner_emission_reduces_to_classical_onsager() {
    let lambda = 2.2;
    let traj = run(1.0, lambda, vec![lambda], 0.5, 5, Q);
    let s = &traj.state;
    assert_eq!(s.theta[0], vec![lambda]);
    for t in 1..=5 {
        assert!((s.theta[t - 1][t - 1] - lambda).abs() < 1e-12);
        let ons = &s.onsager[t - 1];
        if t == 1 {
            assert!(ons.iter().all(|v| v.abs() < 1e-15));
            continue;
        }
        // only the previous iterate is subtracted, with weight λ²E[g′]
        let den = s.denoisers[t - 2];
        let dg = channel_moments(&den, s.mu_t[t - 2], s.sigma_t2[t - 2]).dg;
        for (j, &c) in ons.iter().enumerate() {
            let want = if j == t - 2 { lambda * lambda * dg } else { 0.0 };
            assert!((c - want).abs() < 1e-10, "t={t} j={j}: {c} vs {want}");
        }
    }
}

#[test]
fn first_emission_of_degree_one() {
    let c = FreeCumulants::for_ensemble(&ens(0.5), 8);
    let s = se_init(0.3, 2.0, &c, &[1.7]).unwrap();
    let (mu, theta, ons) = s.emit();
    assert_eq!(theta, vec![1.7]);
    assert!((mu - 1.7 * (s.tilde_mu[0] + s.gamma_coef[0] * s.b_mat[0][0])).abs() < 1e-15);
    assert_eq!(ons.len(), 1);
}

#[test]
fn zero_snr_stream() {
    let traj = run(0.0, 0.0, vec![1.0; 3], 0.5, 4, Q);
    assert!(traj.records.iter().all(|r| r.mu_t == 0.0 && r.overlap == 0.0 && r.mse == 0.5));
}

#[test]
fn overlap_follows_the_scalar_channel() {
    let traj = run(0.0, 2.5, optimal(0.0, 2.5), 0.5, 6, Q);
    for (t, r) in traj.records.iter().enumerate() {
        let row = 3 * (t + 1);
        let want = 1.0 - mmse(r.mu_t * r.mu_t / r.sigma_t2, Prior::Rademacher);
        assert!((traj.state.e[row] - want).abs() < 1e-10, "t={t}");
        assert!(r.sigma_t2 > 0.0 && (0.0..=1.0).contains(&r.overlap));
    }
}

#[test]
fn growth_keeps_the_leading_blocks() {
    for source in [Q, MomentSource::MonteCarlo { samples: 20_000, seed: 3 }] {
        let c = FreeCumulants::for_ensemble(&ens(0.0), 40);
        let mut s = se_init(0.5, 2.5, &c, &optimal(0.0, 2.5)).unwrap();
        let mut prev: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = None;
        for _ in 0..3 {
            for _ in 0..2 {
                se_intermediate_step(&mut s, source, Prior::Rademacher, SEQ).unwrap();
            }
            se_g_step(&mut s, source, Prior::Rademacher, SEQ).unwrap();
            if let Some((b, sg)) = &prev {
                for i in 0..b.len() {
                    for j in 0..b.len() {
                        assert!((s.b_mat[i][j] - b[i][j]).abs() < 1e-12);
                        assert!((s.sigma[i][j] - sg[i][j]).abs() < 1e-10 * sg[i][j].abs().max(1.0));
                    }
                }
            }
            for (i, row) in s.phi.iter().enumerate() {
                assert!(row[i..].iter().all(|&v| v == 0.0));
            }
            prev = Some((s.b_mat.clone(), s.sigma.clone()));
        }
    }
}

#[test]
fn sigma_stays_psd_with_exact_moments() {
    for mu in [0.0, 0.5, 1.0] {
        for l in [2.0, 2.5, 3.0] {
            let traj = run(mu, l, optimal(mu, l), 0.9, 10, Q);
            assert!(traj.state.min_sigma_eig >= -1e-8, "mu={mu} l={l}: {}", traj.state.min_sigma_eig);
            assert!(min_eigenvalue(&traj.state.sigma) >= -1e-8);
        }
    }
}

#[test]
fn wigner_matches_baseline_fixed_point() {
    let cum = FreeCumulants::for_ensemble(&ens(1.0), 12);
    for l in [2.0, 2.5, 3.0] {
        let b = baseline_fixed_point(l, Prior::Rademacher, &cum).unwrap();
        for source in [Q, MomentSource::default()] {
            let traj = run(1.0, l, vec![l], 0.9, 10, source);
            assert!((traj.final_mse() - b.mse).abs() < 1e-3, "l={l} {source:?}: {} vs {}", traj.final_mse(), b.mse);
        }
        // single-matrix reduction: the last overlap is Δ and σ² = λ²Σ
        let traj = run(1.0, l, vec![l], 0.9, 30, Q);
        let s = &traj.state;
        let last = traj.records.last().unwrap();
        assert!((s.e[s.n() - 1] - b.delta_star).abs() < 1e-3);
        assert!((last.sigma_t2 / (l * l) - b.sigma_star).abs() < 1e-3);
    }
}

#[test]
fn quartic_bamp_reaches_the_replica_mmse() {
    let bo = bo_fixed_point(3.5, Prior::Rademacher, &ens(0.0), 0.99, 0.5).unwrap();
    for source in [Q, MomentSource::default()] {
        let traj = run(0.0, 3.5, optimal(0.0, 3.5), 0.9, 10, source);
        assert!((traj.final_mse() - bo.mmse).abs() < 0.02);
        assert!(!traj.diverged);
    }
}

#[test]
fn informative_start() {
    let traj = run(0.0, 3.0, optimal(0.0, 3.0), 0.999, 10, Q);
    let bo = bo_fixed_point(3.0, Prior::Rademacher, &ens(0.0), 0.99, 0.5).unwrap();
    assert!(traj.records[0].overlap > bo.m - 0.05);
    for w in traj.records.windows(2) {
        assert!(w[1].mse <= w[0].mse + 1e-12);
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let src = MomentSource::MonteCarlo { samples: 50_000, seed: 17 };
    let a = run(0.0, 2.5, optimal(0.0, 2.5), 0.9, 4, src);
    let cum = FreeCumulants::for_ensemble(&ens(0.0), required_kmax(3, 4));
    let cfg = SeConfig {
        lambda: 2.5,
        prior: Prior::Rademacher,
        coeffs: optimal(0.0, 2.5),
        epsilon: 0.9,
        t_max: 4,
        source: src,
        exec: Exec::Sequential,
    };
    let b = se_run(&cfg, &cum).unwrap();
    assert_eq!(a.records, b.records);
    let other = run(0.0, 2.5, optimal(0.0, 2.5), 0.9, 4, MomentSource::MonteCarlo { samples: 50_000, seed: 18 });
    assert_ne!(a.records, other.records);
}

#[test]
fn doubling_samples_barely_moves_the_fixed_point() {
    for (mu, l) in [(0.0, 2.5), (1.0, 2.5)] {
        let a = run(mu, l, optimal(mu, l), 0.9, 10, MomentSource::MonteCarlo { samples: 200_000, seed: 0 });
        let b = run(mu, l, optimal(mu, l), 0.9, 10, MomentSource::MonteCarlo { samples: 400_000, seed: 0 });
        assert!((a.final_mse() - b.final_mse()).abs() < 2e-3, "mu={mu}");
    }
}

#[test]
fn rejects_short_cumulant_tables() {
    let cum = FreeCumulants::for_ensemble(&ens(0.0), 12);
    let cfg = SeConfig {
        lambda: 2.5,
        prior: Prior::Rademacher,
        coeffs: optimal(0.0, 2.5),
        epsilon: 0.9,
        t_max: 10,
        source: Q,
        exec: SEQ,
    };
    assert!(se_run(&cfg, &cum).is_err());
    assert!(se_run(&SeConfig { t_max: 0, ..cfg }, &cum).is_err());
}
