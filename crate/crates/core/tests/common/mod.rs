//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use fracpoisson::large_deviations::rate_ld;
use fracpoisson::model::{compositions, LatticePoint, ModelParams};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct OracleFile {
    pub digits: u32,
    pub grid: Vec<OraclePoint>,
    pub cases: BTreeMap<String, OracleCase>,
}

#[derive(Debug, Deserialize)]
pub struct OraclePoint {
    pub alpha: f64,
    pub beta: f64,
    pub z: f64,
    pub log_value: String,
    pub method: String,
}

#[derive(Debug, Deserialize)]
pub struct OracleCase {
    pub log_value: Option<String>,
    pub value: Option<String>,
    pub z: Option<String>,
}

impl OraclePoint {
    pub fn log(&self) -> f64 {
        self.log_value.parse().unwrap()
    }
}

impl OracleCase {
    pub fn log(&self) -> f64 {
        self.log_value.as_deref().unwrap().parse().unwrap()
    }

    pub fn linear(&self) -> f64 {
        self.value.as_deref().unwrap().parse().unwrap()
    }

    pub fn argument(&self) -> f64 {
        self.z.as_deref().unwrap().parse().unwrap()
    }
}

/// Mittag-Leffler values from a 60-digit mpmath run of
/// `tests/oracle/gen_ml_oracle.py`.
pub fn ml_oracle() -> OracleFile {
    let text = include_str!("../data/ml_oracle.json");
    serde_json::from_str(text).unwrap()
}

pub fn rel_err(got: f64, expected: f64) -> f64 {
    if expected == 0.0 {
        got.abs()
    } else {
        ((got - expected) / expected).abs()
    }
}

/// Lattice law of `M(t)` built from scratch: Poisson weights reweighted by
/// `h!/Gamma(nu h + 1)` and normalized by brute-force summation over
/// `s(k) <= max_total`, with every term in log space.
pub struct BruteLattice {
    pub points: Vec<LatticePoint>,
    pub log_pmf: Vec<f64>,
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn ln_fact(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

impl BruteLattice {
    pub fn new(p: &ModelParams, t: f64, max_total: u64) -> Self {
        let nu = p.nu();
        let mut points = Vec::new();
        let mut unnorm = Vec::new();
        for h in 0..=max_total {
            for k in compositions(h, p.dim()) {
                let mut lw = ln_fact(h) - ln_gamma(nu * h as f64 + 1.0);
                for (&ki, &li) in k.counts().iter().zip(p.lambda()) {
                    lw += ki as f64 * (li * t.powf(nu)).ln() - ln_fact(ki);
                }
                points.push(k);
                unnorm.push(lw);
            }
        }
        let max = unnorm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = unnorm.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        let log_pmf = unnorm.iter().map(|v| v - norm).collect();
        Self { points, log_pmf }
    }

    pub fn expectation(&self, f: impl Fn(&LatticePoint) -> f64) -> f64 {
        let mut terms: Vec<f64> = self
            .points
            .iter()
            .zip(&self.log_pmf)
            .map(|(k, lp)| f(k) * lp.exp())
            .collect();
        terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        terms.iter().sum()
    }
}

/// Golden-section minimum of a unimodal function on `[a, b]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `inf { Lambda*(x) : s(x) = total }` for `m = 2`, by golden section over
/// the segment `x = (w total, (1 - w) total)`, `0 <= w <= 1`.
pub fn simplex_rate_min(p: &ModelParams, total: f64) -> f64 {
    assert_eq!(p.dim(), 2);
    let f = |w: f64| {
        rate_ld(p, &[w * total, (1.0 - w) * total])
            .unwrap()
            .value
            .to_f64()
    };
    let (_, v) = golden_min(f, 0.0, 1.0, 200);
    v.min(f(0.0)).min(f(1.0))
}

/// `inf { Lambda*(x) : <u, x> >= c }` for `m = 2` by scanning the boundary
/// line `<u, x> = c` inside the orthant (`u` with positive entries).
pub fn half_space_boundary_scan(p: &ModelParams, u: [f64; 2], c: f64) -> f64 {
    let f = |w: f64| {
        let x = [w * c / u[0], (1.0 - w) * c / u[1]];
        rate_ld(p, &x).unwrap().value.to_f64()
    };
    let (_, v) = golden_min(f, 0.0, 1.0, 200);
    v.min(f(0.0)).min(f(1.0))
}

/// Central second differences of `f` at the origin.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, m: usize, h: f64) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; m]; m];
    let at = |shifts: &[(usize, f64)]| {
        let mut x = vec![0.0; m];
        for &(i, s) in shifts {
            x[i] += s;
        }
        f(&x)
    };
    for j in 0..m {
        for k in 0..m {
            out[j][k] = if j == k {
                (at(&[(j, h)]) - 2.0 * at(&[]) + at(&[(j, -h)])) / (h * h)
            } else {
                (at(&[(j, h), (k, h)]) - at(&[(j, h), (k, -h)]) - at(&[(j, -h), (k, h)])
                    + at(&[(j, -h), (k, -h)]))
                    / (4.0 * h * h)
            };
        }
    }
    out
}
