//! Exact draws of `M(t)`: the total by inverse CDF over its marginal law,
//! then a multinomial split into components by sequential binomials, each
//! drawn by inverse CDF from a precomputed table.
//!
//! Streams are keyed by `(seed, stream, index)` and mixed with SplitMix64
//! into a seed for `Xoshiro256PlusPlus`, so parallel replications with
//! disjoint indices are reproducible regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{LatticePoint, ModelParams, Snapshot};
use crate::numeric::{ln_factorial, CompensatedSum};

pub type StreamRng = Xoshiro256PlusPlus;

/// The sampling table keeps mass down to this tail, far below what any
/// experiment can resolve; the remaining mass is renormalized away.
pub const TABLE_TAIL: f64 = 1e-17;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `index` of stream `stream` under the master `seed`.
pub fn stream_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}

pub fn stream_rng(seed: u64, stream: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(seed, stream, index))
}

/// Inverse-CDF sampler for `s(M(t))`.
#[derive(Debug, Clone)]
pub struct SumSampler {
    cdf: Vec<f64>,
}

impl SumSampler {
    pub fn new(p: &ModelParams, t: f64) -> Result<Self> {
        Self::from_snapshot(&p.at(t)?)
    }

    pub fn from_snapshot(snap: &Snapshot<'_>) -> Result<Self> {
        let top = snap.truncation_bound_with(TABLE_TAIL)?;
        let mut acc = CompensatedSum::new();
        let mut cdf = Vec::with_capacity(top as usize + 1);
        for h in 0..=top {
            acc.add(snap.marginal_log_pmf(h).exp());
            cdf.push(acc.value());
        }
        let total = acc.value();
        for c in &mut cdf {
            *c /= total;
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { cdf })
    }

    /// Largest total the sampler can return.
    pub fn support_max(&self) -> u64 {
        self.cdf.len() as u64 - 1
    }

    /// `P(s(M(t)) <= h)` as tabulated.
    pub fn cdf(&self, h: u64) -> f64 {
        self.cdf.get(h as usize).copied().unwrap_or(1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u) as u64
    }
}

/// Binomial terms below `max - BINOMIAL_LOG_WINDOW` in log scale are
/// dropped; their relative mass is below `1e-17`.
const BINOMIAL_LOG_WINDOW: f64 = 40.0;

/// Inverse-CDF table of `Binomial(n, q)` restricted to its non-negligible range.
#[derive(Debug, Clone)]
struct BinomialTable {
    offset: u64,
    cdf: Vec<f64>,
}

impl BinomialTable {
    fn new(n: u64, q: f64) -> Self {
        if q >= 1.0 || n == 0 {
            return Self {
                offset: n,
                cdf: vec![1.0],
            };
        }
        let (lq, lr) = (q.ln(), (-q).ln_1p());
        let lnf = ln_factorial(n);
        let log_pmf = |k: u64| {
            lnf - ln_factorial(k) - ln_factorial(n - k) + k as f64 * lq + (n - k) as f64 * lr
        };
        let mode = (((n + 1) as f64) * q).floor().min(n as f64) as u64;
        let floor = log_pmf(mode) - BINOMIAL_LOG_WINDOW;
        let mut lo = mode;
        while lo > 0 && log_pmf(lo - 1) >= floor {
            lo -= 1;
        }
        let mut hi = mode;
        while hi < n && log_pmf(hi + 1) >= floor {
            hi += 1;
        }
        let mut acc = CompensatedSum::new();
        let mut cdf: Vec<f64> = (lo..=hi)
            .map(|k| {
                acc.add(log_pmf(k).exp());
                acc.value()
            })
            .collect();
        let total = acc.value();
        for c in &mut cdf {
            *c /= total;
        }
        *cdf.last_mut().unwrap() = 1.0;
        Self { offset: lo, cdf }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        self.offset + self.cdf.partition_point(|&c| c <= u) as u64
    }
}

/// Multinomial split of a total with probabilities `lambda_i / s(lambda)`.
#[derive(Debug, Clone)]
pub struct VectorSampler {
    sums: SumSampler,
    /// `tables[i][n]`: law of component `i` given `n` counts left after
    /// components `1..i`, i.e. `Binomial(n, lambda_i / (lambda_i + ... + lambda_m))`.
    tables: Vec<Vec<BinomialTable>>,
    conditional: Vec<f64>,
}

impl VectorSampler {
    pub fn new(p: &ModelParams, t: f64) -> Result<Self> {
        let sums = SumSampler::new(p, t)?;
        let lambda = p.lambda();
        let top = sums.support_max();
        let mut tail: f64 = lambda.iter().sum();
        let mut tables = Vec::with_capacity(lambda.len() - 1);
        let mut conditional = Vec::with_capacity(lambda.len() - 1);
        for &l in &lambda[..lambda.len() - 1] {
            let q = (l / tail).min(1.0);
            tables.push((0..=top).map(|n| BinomialTable::new(n, q)).collect());
            conditional.push(q);
            tail -= l;
        }
        Ok(Self {
            sums,
            tables,
            conditional,
        })
    }

    pub fn sum_sampler(&self) -> &SumSampler {
        &self.sums
    }

    pub fn dim(&self) -> usize {
        self.tables.len() + 1
    }

    /// Splits `total` into `out`, which must have length `dim()`.
    ///
    /// # Panics
    /// If `out` has the wrong length.
    pub fn split_into<R: Rng + ?Sized>(&self, total: u64, rng: &mut R, out: &mut [u64]) {
        assert_eq!(
            out.len(),
            self.dim(),
            "output length must equal the dimension"
        );
        let mut left = total;
        for (i, tables) in self.tables.iter().enumerate() {
            let k = match tables.get(left as usize) {
                Some(table) => table.sample(rng),
                // A total beyond the tabulated support (explicit `split` calls).
                None => BinomialTable::new(left, self.conditional[i]).sample(rng),
            };
            out[i] = k;
            left -= k;
        }
        out[self.dim() - 1] = left;
    }

    /// Splits `total` into components.
    pub fn split<R: Rng + ?Sized>(&self, total: u64, rng: &mut R) -> LatticePoint {
        let mut counts = vec![0u64; self.dim()];
        self.split_into(total, rng, &mut counts);
        LatticePoint::new(counts)
    }

    /// One draw written into `out`; avoids allocating in hot loops.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [u64]) {
        let total = self.sums.sample(rng);
        self.split_into(total, rng, out);
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticePoint {
        let total = self.sums.sample(rng);
        self.split(total, rng)
    }
}

/// One draw of `s(M(t))`. Builds the table on every call; use
/// [`SumSampler`] for repeated draws.
pub fn sample_sum<R: Rng + ?Sized>(p: &ModelParams, t: f64, rng: &mut R) -> Result<u64> {
    Ok(SumSampler::new(p, t)?.sample(rng))
}

/// One draw of `M(t)`. Builds the table on every call; use
/// [`VectorSampler`] for repeated draws.
pub fn sample_vector<R: Rng + ?Sized>(
    p: &ModelParams,
    t: f64,
    rng: &mut R,
) -> Result<LatticePoint> {
    Ok(VectorSampler::new(p, t)?.sample(rng))
}

/// `n` draws of `M(t)` from stream `(seed, 0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub params: ModelParams,
    pub t: f64,
    pub seed: u64,
    pub draws: Vec<LatticePoint>,
}

impl SampleBatch {
    pub fn generate(params: &ModelParams, t: f64, seed: u64, n: usize) -> Result<Self> {
        let sampler = VectorSampler::new(params, t)?;
        let mut rng = stream_rng(seed, 0, 0);
        let draws = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        Ok(Self {
            params: params.clone(),
            t,
            seed,
            draws,
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}
