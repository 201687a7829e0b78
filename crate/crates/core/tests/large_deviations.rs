mod common;

use common::half_space_boundary_scan;
use fracpoisson::large_deviations::*;
use fracpoisson::model::{covariance_matrix, ModelParams};
use fracpoisson::sampling::stream_rng;
use fracpoisson::ExtendedReal;
use rand::Rng;

fn params(nu: f64) -> ModelParams {
    ModelParams::new(nu, vec![0.6, 0.9]).unwrap()
}

fn rate(p: &ModelParams, x: &[f64]) -> f64 {
    rate_ld(p, x).unwrap().value.to_f64()
}

#[test]
fn lambda_is_the_limit_of_the_scaled_log_mgf() {
    let p = params(0.7);
    let th = [0.3, -0.2];
    let scaled = |t: f64| p.at(t).unwrap().log_mgf(&th).unwrap() / t;
    // The correction is O(1/t); remove it by Richardson extrapolation.
    let extrapolated = 2.0 * scaled(200.0) - scaled(100.0);
    let limit = lambda_limit(&p, &th).unwrap();
    assert!((extrapolated - limit).abs() < 1e-3);
    assert!((scaled(50.0) - limit).abs() < 0.05);
}

#[test]
fn closed_form_against_legendre_oracle_on_grid() {
    let cfg = LegendreConfig::default();
    for nu in [0.7, 0.35, 1.0] {
        let p = params(nu);
        for i in 1..=10 {
            for j in 1..=10 {
                let x = [0.3 * i as f64, 0.3 * j as f64];
                let o = legendre_oracle(&p, &x, &cfg).unwrap().to_f64();
                assert!((o - rate(&p, &x)).abs() <= 1e-7, "nu={nu} x={x:?}");
            }
        }
    }
}

#[test]
fn maximizer_attains_the_supremum() {
    let p = params(0.7);
    let mut rng = stream_rng(3, 0, 0);
    for _ in 0..50 {
        let x = [rng.random_range(0.01..=3.0), rng.random_range(0.01..=3.0)];
        let r = rate_ld(&p, &x).unwrap();
        let th: Vec<f64> = r.maximizer.unwrap().iter().map(|v| v.to_f64()).collect();
        let plug = th[0] * x[0] + th[1] * x[1] - lambda_limit(&p, &th).unwrap();
        assert!((plug - r.value.to_f64()).abs() < 1e-10);
        let grad = lambda_gradient(&p, &th).unwrap();
        assert!((grad[0] - x[0]).abs() < 1e-12 * x[0].max(1.0));
    }
}

#[test]
fn special_points() {
    let p = params(0.7);
    assert!(rate(&p, &gradient_at_zero(&p)) <= 1e-10);
    assert_eq!(rate(&p, &[0.0, 0.0]), p.lambda_sum_root());
    assert!(rate_ld(&p, &[0.5, -1e-9]).unwrap().value.is_pos_infinity());
    let cfg = LegendreConfig::default();
    let at_mean = legendre_oracle(&p, &gradient_at_zero(&p), &cfg)
        .unwrap()
        .to_f64();
    assert!(at_mean.abs() <= 1e-9);
    assert!(legendre_oracle(&p, &[-0.1, 0.5], &cfg)
        .unwrap()
        .is_pos_infinity());
}

#[test]
fn entropy_decomposition() {
    let p = params(0.7);
    let mut rng = stream_rng(4, 0, 0);
    for _ in 0..100 {
        let x = [rng.random_range(1e-6..=3.0), rng.random_range(1e-6..=3.0)];
        let e = rate_ld_entropy_form(&p, &x).unwrap();
        assert!((e - rate(&p, &x)).abs() <= 1e-12, "{x:?}");
    }
    assert_eq!(
        rate_ld_entropy_form(&p, &[0.0, 0.0]).unwrap(),
        p.lambda_sum_root()
    );
}

#[test]
fn nu_one_is_additive() {
    let p = params(1.0);
    let mut rng = stream_rng(5, 0, 0);
    for _ in 0..100 {
        let x = [rng.random_range(0.0..=3.0), rng.random_range(0.0..=3.0)];
        let sum: f64 = x
            .iter()
            .zip(p.lambda())
            .map(|(&xi, &l)| {
                if xi == 0.0 {
                    l
                } else {
                    xi * (xi / l).ln() - xi + l
                }
            })
            .sum();
        assert!((rate(&p, &x) - sum).abs() <= 1e-12);
    }
}

#[test]
fn one_dimensional_reduction() {
    let (nu, l) = (0.7f64, 1.5f64);
    let p = ModelParams::new(nu, vec![l]).unwrap();
    for x in [0.0, 0.1, 1.0, 2.0, 7.5] {
        let formula = if x == 0.0 {
            l.powf(1.0 / nu)
        } else {
            x * ((nu * x).powf(nu) / l).ln() - nu * x + l.powf(1.0 / nu)
        };
        let r = rate(&p, &[x]);
        assert_eq!(r, univariate_rate(nu, l, x).unwrap().to_f64());
        assert!((r - formula).abs() <= 1e-14 * formula.max(1.0));
    }
}

#[test]
fn fenchel_inequality() {
    let p = params(0.7);
    let mut rng = stream_rng(6, 0, 0);
    for _ in 0..200 {
        let th = [rng.random_range(-3.0..=3.0), rng.random_range(-3.0..=3.0)];
        let x = [rng.random_range(0.0..=4.0), rng.random_range(0.0..=4.0)];
        let lower = th[0] * x[0] + th[1] * x[1] - lambda_limit(&p, &th).unwrap();
        assert!(rate(&p, &x) >= lower - 1e-12);
    }
}

#[test]
fn zero_only_at_the_mean() {
    let p = params(0.7);
    let g = gradient_at_zero(&p);
    for i in 0..=60 {
        for j in 0..=60 {
            let x = [0.05 * i as f64, 0.05 * j as f64];
            let d = ((x[0] - g[0]).powi(2) + (x[1] - g[1]).powi(2)).sqrt();
            if d > 1e-3 {
                assert!(rate(&p, &x) > 0.0, "{x:?}");
            }
        }
    }
}

#[test]
fn lambda_is_midpoint_convex() {
    let p = params(0.7);
    let mut rng = stream_rng(7, 0, 0);
    for _ in 0..200 {
        let a = [rng.random_range(-3.0..=3.0), rng.random_range(-3.0..=3.0)];
        let b = [rng.random_range(-3.0..=3.0), rng.random_range(-3.0..=3.0)];
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let lhs = lambda_limit(&p, &mid).unwrap();
        let rhs = (lambda_limit(&p, &a).unwrap() + lambda_limit(&p, &b).unwrap()) / 2.0;
        assert!(lhs <= rhs + 1e-12);
    }
}

#[test]
fn rate_grows_along_rays() {
    let p = params(0.7);
    for angle in [0.0, 0.3, 0.785, 1.2, std::f64::consts::FRAC_PI_2] {
        let u = [f64::cos(angle), f64::sin(angle)];
        let values: Vec<f64> = (0..=300)
            .map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 300.0))
            .map(|r| rate(&p, &[r * u[0], r * u[1]]))
            .collect();
        let argmin = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(
            values[argmin..].windows(2).all(|w| w[1] > w[0]),
            "angle {angle}"
        );
        assert!(*values.last().unwrap() > 1e3);
    }
}

#[test]
fn moderate_deviation_rate() {
    let p = params(0.7);
    let x = [0.2, -0.1];
    // Independent supremum of <theta, x> - <theta, C theta>/2 by gradient ascent.
    let c = covariance_matrix(&p);
    let mut th = [0.0, 0.0];
    for _ in 0..20_000 {
        let g = [
            x[0] - c.get(0, 0) * th[0] - c.get(0, 1) * th[1],
            x[1] - c.get(1, 0) * th[0] - c.get(1, 1) * th[1],
        ];
        th = [th[0] + 0.3 * g[0], th[1] + 0.3 * g[1]];
    }
    let sup = th[0] * x[0] + th[1] * x[1] - md_lambda(&p, &th).unwrap();
    assert!((rate_md(&p, &x).unwrap().to_f64() - sup).abs() < 1e-7);
    assert_eq!(rate_md(&p, &[0.0, 0.0]).unwrap(), ExtendedReal::ZERO);
    let q = params(1.0);
    assert!((rate_md(&q, &[0.3, 0.3]).unwrap().to_f64() - 0.125).abs() < 1e-15);
    // Finite off the orthant as well: the quadratic form is used everywhere.
    assert!((rate_md(&q, &[-0.3, 0.3]).unwrap().to_f64() - 0.125).abs() < 1e-15);
}

#[test]
fn half_space_dual_matches_boundary_scan() {
    for nu in [0.7, 0.45, 1.0] {
        let p = params(nu);
        let g = gradient_at_zero(&p);
        for (u, factor) in [
            ([1.0, 1.0], 1.15),
            ([1.0, 1.0], 1.5),
            ([1.0, 0.3], 1.3),
            ([0.2, 1.0], 2.0),
        ] {
            let c = factor * (u[0] * g[0] + u[1] * g[1]);
            let dual = ld_half_space_infimum(&p, &u, c).unwrap().to_f64();
            let scan = half_space_boundary_scan(&p, u, c);
            assert!(
                (dual - scan).abs() < 1e-9 * scan.max(1.0),
                "nu={nu} u={u:?}: {dual} vs {scan}"
            );
        }
    }
}

#[test]
fn md_half_space_matches_direct_minimization() {
    let p = params(0.7);
    let u = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
    let c = 0.4;
    let closed = md_half_space_infimum(&p, &u, c).unwrap().to_f64();
    // Minimize the quadratic rate along the boundary line <u, x> = c.
    let best = (0..=20_000)
        .map(|i| -5.0 + 10.0 * i as f64 / 20_000.0)
        .map(|s| {
            let x = [c * u[0] + s * u[1], c * u[1] - s * u[0]];
            rate_md(&p, &x).unwrap().to_f64()
        })
        .fold(f64::INFINITY, f64::min);
    assert!((closed - best).abs() < 1e-7, "{closed} vs {best}");
}
