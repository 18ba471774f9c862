//! Full-space lattice Green's function and the exact small-scale sampler.
//!
//! `G(0, x) = int_0^inf prod_j e^{-t/d} I_{x_j}(t/d) dt`, evaluated after the
//! substitution `t = e^s` by the trapezoid rule (exponentially convergent for
//! this analytic, doubly decaying integrand) plus an analytic large-`t` tail.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::bessel::scaled_bessel_i;
use crate::error::{Error, Result};
use crate::lattice::LatticePoint;
use crate::linalg::smallest_eigenvalue;
use crate::seeding::stream_rng;

/// Largest point set accepted by the dense sampler by default.
pub const DEFAULT_POINT_CAP: usize = 4000;

const S_LO: f64 = -30.0;
const S_HI: f64 = 32.0;
const TARGET: f64 = 1e-9;
const ACCEPTABLE: f64 = 1e-6;

/// `G(0, x)` on `Z^d`, `d >= 3`.
pub fn fullspace_green(x: &LatticePoint) -> Result<f64> {
    let d = x.dim();
    if d < 3 {
        return Err(Error::InvalidParameter(format!(
            "full-space Green's function needs d >= 3, got {d}"
        )));
    }
    let mut orders: Vec<u32> = x.coords().iter().map(|c| c.unsigned_abs() as u32).collect();
    orders.sort_unstable();
    let df = d as f64;
    let integrand = |s: f64| {
        let t = s.exp();
        let mut prod = t;
        let mut i = 0;
        while i < orders.len() {
            let mut j = i;
            while j < orders.len() && orders[j] == orders[i] {
                j += 1;
            }
            prod *= scaled_bessel_i(orders[i], t / df).powi((j - i) as i32);
            i = j;
        }
        prod
    };

    // large-t tail: prod_j I~_{n_j}(t/d) = (2 pi t/d)^{-d/2} (1 - c1/t + O(t^-2))
    let big_t = S_HI.exp();
    let c1 = df / 8.0
        * orders
            .iter()
            .map(|&n| 4.0 * (n as f64).powi(2) - 1.0)
            .sum::<f64>();
    let half = df / 2.0;
    let tail = (2.0 * std::f64::consts::PI / df).powf(-half)
        * (big_t.powf(1.0 - half) / (half - 1.0) - c1 * big_t.powf(-half) / half);

    let mut h = 0.125;
    let mut nodes = ((S_HI - S_LO) / h).round() as usize;
    let mut sum = 0.5 * (integrand(S_LO) + integrand(S_HI))
        + (1..nodes)
            .map(|i| integrand(S_LO + i as f64 * h))
            .sum::<f64>();
    let mut estimate = h * sum + tail;
    let mut change = f64::INFINITY;
    for _ in 0..4 {
        let mids: f64 = (0..nodes)
            .map(|i| integrand(S_LO + (i as f64 + 0.5) * h))
            .sum();
        sum += mids;
        h *= 0.5;
        nodes *= 2;
        let refined = h * sum + tail;
        change = ((refined - estimate) / refined).abs();
        estimate = refined;
        if change < TARGET {
            return Ok(estimate);
        }
    }
    if change < ACCEPTABLE {
        Ok(estimate)
    } else {
        Err(Error::Quadrature { achieved: change })
    }
}

/// Memoised `G(0, x)` keyed by the sorted absolute coordinates.
#[derive(Clone, Debug)]
pub struct FullspaceGreen {
    dim: usize,
    cache: HashMap<Vec<u32>, f64>,
}

impl FullspaceGreen {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidParameter(format!(
                "d must be at least 3, got {dim}"
            )));
        }
        Ok(Self {
            dim,
            cache: HashMap::new(),
        })
    }

    pub fn get(&mut self, x: &LatticePoint) -> Result<f64> {
        let mut key: Vec<u32> = x.coords().iter().map(|c| c.unsigned_abs() as u32).collect();
        key.sort_unstable();
        if let Some(&g) = self.cache.get(&key) {
            return Ok(g);
        }
        let g = fullspace_green(&LatticePoint::new(key.iter().map(|&k| k as i64).collect()))?;
        self.cache.insert(key, g);
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Values of the full-space field at an arbitrary finite point set.
#[derive(Clone, Debug)]
pub struct PointFieldSample {
    pub points: Vec<LatticePoint>,
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Exact full-space sampler on a fixed point set via a dense Cholesky factor
/// of the Green's matrix.
pub struct FullspaceSampler {
    points: Vec<LatticePoint>,
    factor: DMatrix<f64>,
}

impl FullspaceSampler {
    pub fn new(points: Vec<LatticePoint>) -> Result<Self> {
        Self::with_cap(points, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(points: Vec<LatticePoint>, cap: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty point set".into()));
        }
        if points.len() > cap {
            return Err(Error::ResourceLimit {
                what: format!(
                    "dense full-space sampler on {} points (cap {cap})",
                    points.len()
                ),
                required: (points.len() as u128).pow(2) * 8,
                budget: (cap as u128).pow(2) * 8,
            });
        }
        let dim = points[0].dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidParameter("points of mixed dimension".into()));
        }
        let mut green = FullspaceGreen::new(dim)?;
        let n = points.len();
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let g = green.get(&points[i].sub(&points[j]))?;
                cov[(i, j)] = g;
                cov[(j, i)] = g;
            }
        }
        let factor = match cov.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                return Err(Error::Factorization {
                    smallest_eigenvalue: smallest_eigenvalue(&cov),
                })
            }
        };
        Ok(Self { points, factor })
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn sample(&self, seed: u64) -> PointFieldSample {
        let mut rng = stream_rng(seed);
        let n = self.points.len();
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let values = (0..n)
            .map(|i| (0..=i).map(|j| self.factor[(i, j)] * g[j]).sum())
            .collect();
        PointFieldSample {
            points: self.points.clone(),
            values,
            seed,
        }
    }
}

pub fn sample_fullspace_gff_exact(
    points: Vec<LatticePoint>,
    seed: u64,
) -> Result<PointFieldSample> {
    Ok(FullspaceSampler::new(points)?.sample(seed))
}
