//! Exact sampling of the discrete GFF on `B(M)` with zero boundary values.
//!
//! The walk kernel killed outside `B(M)` is diagonal in the separable sine
//! basis `psi_k(x) = prod_j sin(pi k_j (x_j + M + 1) / (2M + 2))` with
//! eigenvalues `mu_k = (1/d) sum_j cos(pi k_j / (2M + 2))`, so
//!
//! ```text
//! phi = sum_k g_k psi_k / sqrt((1 - mu_k) (M + 1)^d)
//! ```
//!
//! with i.i.d. standard normals `g_k`. The sum is evaluated one axis at a time
//! with a type-I discrete sine transform. After each axis only the rows inside
//! the requested observation window are kept, so later axes touch less data.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, Fft, FftPlanner};

use super::{FieldSample, SamplerKind};
use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, LatticePoint};
use crate::seeding::stream_rng;

/// Axes shorter than this use the dense sine matrix by default.
pub const DENSE_AXIS_THRESHOLD: usize = 64;

/// Default memory budget for one sample's working buffers.
pub const DEFAULT_MEMORY_BUDGET: u128 = 4 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    Fft,
    Dense,
}

enum Transform {
    Fft(Arc<dyn Fft<f64>>),
    Dense(Vec<f64>),
}

/// Reusable sampler for one `(d, M, window)` triple; cheap to share between
/// threads.
pub struct DirichletSampler {
    domain: BoxRegion,
    window: u32,
    transform: Transform,
    /// `cos(pi k / (2M + 2))` for `k = 1..=2M+1`.
    cosines: Vec<f64>,
}

impl DirichletSampler {
    /// Sampler for the full box.
    pub fn new(dim: usize, radius: u32) -> Result<Self> {
        Self::with_window(dim, radius, radius)
    }

    /// Sampler returning only the values on `B(window)`.
    pub fn with_window(dim: usize, radius: u32, window: u32) -> Result<Self> {
        let side = 2 * radius as usize + 1;
        let kind = if side < DENSE_AXIS_THRESHOLD {
            TransformKind::Dense
        } else {
            TransformKind::Fft
        };
        Self::build(dim, radius, window, kind, DEFAULT_MEMORY_BUDGET)
    }

    pub fn build(
        dim: usize,
        radius: u32,
        window: u32,
        kind: TransformKind,
        budget: u128,
    ) -> Result<Self> {
        let domain = BoxRegion::centered(dim, radius)?;
        if window > radius {
            return Err(Error::InvalidParameter(format!(
                "window {window} exceeds box radius {radius}"
            )));
        }
        let side = domain.side();
        // input buffer plus the first (largest) output buffer
        let required = (side as u128).pow(dim as u32) * 8 * 2;
        if required > budget {
            return Err(Error::ResourceLimit {
                what: format!("Dirichlet sampler d={dim} M={radius}"),
                required,
                budget,
            });
        }
        let n = side + 1;
        let cosines = (1..=side)
            .map(|k| (std::f64::consts::PI * k as f64 / n as f64).cos())
            .collect();
        let transform = match kind {
            TransformKind::Fft => Transform::Fft(FftPlanner::new().plan_fft_forward(2 * n)),
            TransformKind::Dense => {
                let mut sin = vec![0.0; side * side];
                for m in 0..side {
                    for k in 0..side {
                        sin[m * side + k] =
                            (std::f64::consts::PI * ((m + 1) * (k + 1)) as f64 / n as f64).sin();
                    }
                }
                Transform::Dense(sin)
            }
        };
        Ok(Self {
            domain,
            window,
            transform,
            cosines,
        })
    }

    pub fn domain(&self) -> &BoxRegion {
        &self.domain
    }

    pub fn window(&self) -> BoxRegion {
        self.domain
            .shrink_to(self.window)
            .expect("window fits by construction")
    }

    pub fn transform_kind(&self) -> TransformKind {
        match self.transform {
            Transform::Fft(_) => TransformKind::Fft,
            Transform::Dense(_) => TransformKind::Dense,
        }
    }

    /// One exact sample. Normals are drawn in row-major order of the mode
    /// index `k` from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, seed: u64) -> FieldSample {
        let dim = self.domain.dim();
        let side = self.domain.side();
        let mut rng = stream_rng(seed);
        let norm = ((self.domain.radius() + 1) as f64).powi(dim as i32);

        let total = side.pow(dim as u32);
        let mut coeffs = Vec::with_capacity(total);
        let rows = total / side;
        let mut digits = vec![0usize; dim];
        for _ in 0..rows {
            let prefix: f64 = digits[..dim - 1].iter().map(|&k| self.cosines[k]).sum();
            for &c in &self.cosines {
                let mu = (prefix + c) / dim as f64;
                let g: f64 = rng.sample(StandardNormal);
                coeffs.push(g / ((1.0 - mu) * norm).sqrt());
            }
            for j in (0..dim - 1).rev() {
                digits[j] += 1;
                if digits[j] < side {
                    break;
                }
                digits[j] = 0;
            }
        }

        let values = self.synthesize(coeffs);
        FieldSample {
            region: self.window(),
            domain_radius: Some(self.domain.radius()),
            values,
            seed,
            sampler_kind: SamplerKind::DirichletSpectral,
        }
    }

    /// Apply the separable sine synthesis to a full coefficient array and
    /// return the window values in row-major order.
    pub(crate) fn synthesize(&self, coeffs: Vec<f64>) -> Vec<f64> {
        let dim = self.domain.dim();
        let side = self.domain.side();
        let mut dims = vec![side; dim];
        let mut data = coeffs;
        for axis in 0..dim {
            data = self.transform_axis(&data, &dims, axis);
            dims[axis] = 2 * self.window as usize + 1;
        }
        data
    }

    fn transform_axis(&self, input: &[f64], dims: &[usize], axis: usize) -> Vec<f64> {
        let side = dims[axis];
        let w = 2 * self.window as usize + 1;
        let lo = (self.domain.radius() - self.window) as usize;
        let outer: usize = dims[..axis].iter().product();
        let inner: usize = dims[axis + 1..].iter().product();
        let mut out = vec![0.0; outer * w * inner];
        let mut kernel = LineKernel::new(&self.transform, side, w, lo);

        if inner == 1 {
            // contiguous lines
            let mut o = 0;
            while o < outer {
                let count = (outer - o).min(LineKernel::BATCH);
                kernel.load_contiguous(&input[o * side..(o + count) * side], count);
                kernel.run(count);
                for b in 0..count {
                    out[(o + b) * w..(o + b + 1) * w].copy_from_slice(kernel.result(b));
                }
                o += count;
            }
        } else {
            for o in 0..outer {
                let base_in = o * side * inner;
                let base_out = o * w * inner;
                let mut i0 = 0;
                while i0 < inner {
                    let count = (inner - i0).min(LineKernel::BATCH);
                    kernel.load_strided(&input[base_in..base_in + side * inner], inner, i0, count);
                    kernel.run(count);
                    for r in 0..w {
                        let row =
                            &mut out[base_out + r * inner + i0..base_out + r * inner + i0 + count];
                        for (b, v) in row.iter_mut().enumerate() {
                            *v = kernel.result(b)[r];
                        }
                    }
                    i0 += count;
                }
            }
        }
        out
    }

    /// `sum_k psi_k(x)^2 / ((1 - mu_k)(M + 1)^d)` by direct summation.
    pub fn analytic_variance(&self, x: &LatticePoint) -> Result<f64> {
        self.analytic_covariance(x, x)
    }

    /// `sum_k psi_k(x) psi_k(y) / ((1 - mu_k)(M + 1)^d)` by direct summation.
    pub fn analytic_covariance(&self, x: &LatticePoint, y: &LatticePoint) -> Result<f64> {
        let dim = self.domain.dim();
        self.domain.linear_index(x)?;
        self.domain.linear_index(y)?;
        let side = self.domain.side();
        let n = (side + 1) as f64;
        let m = self.domain.radius() as i64;
        let phase =
            |c: i64, k: usize| (std::f64::consts::PI * k as f64 * (c + m + 1) as f64 / n).sin();
        let modes: Vec<Vec<f64>> = x
            .coords()
            .iter()
            .zip(y.coords())
            .map(|(&a, &b)| (1..=side).map(|k| phase(a, k) * phase(b, k)).collect())
            .collect();
        let norm = ((self.domain.radius() + 1) as f64).powi(dim as i32);
        let mut digits = vec![0usize; dim];
        let mut total = 0.0;
        loop {
            let mu: f64 = digits.iter().map(|&k| self.cosines[k]).sum::<f64>() / dim as f64;
            let psi2: f64 = digits
                .iter()
                .enumerate()
                .map(|(j, &k)| modes[j][k])
                .product();
            total += psi2 / ((1.0 - mu) * norm);
            let mut j = dim;
            loop {
                if j == 0 {
                    return Ok(total);
                }
                j -= 1;
                digits[j] += 1;
                if digits[j] < side {
                    break;
                }
                digits[j] = 0;
            }
        }
    }
}

/// Applies the type-I sine transform to a batch of lines and keeps `w`
/// outputs starting at `lo`.
struct LineKernel<'a> {
    transform: &'a Transform,
    side: usize,
    w: usize,
    lo: usize,
    lines: Vec<f64>,
    results: Vec<f64>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl<'a> LineKernel<'a> {
    const BATCH: usize = 16;

    fn new(transform: &'a Transform, side: usize, w: usize, lo: usize) -> Self {
        let (buf, scratch) = match transform {
            Transform::Fft(fft) => (
                vec![Complex::new(0.0, 0.0); 2 * (side + 1)],
                vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()],
            ),
            Transform::Dense(_) => (Vec::new(), Vec::new()),
        };
        Self {
            transform,
            side,
            w,
            lo,
            lines: vec![0.0; Self::BATCH * side],
            results: vec![0.0; Self::BATCH * w],
            buf,
            scratch,
        }
    }

    fn load_contiguous(&mut self, data: &[f64], count: usize) {
        self.lines[..count * self.side].copy_from_slice(&data[..count * self.side]);
    }

    /// Lines `i0..i0+count` of a block laid out as `[m * inner + i]`.
    fn load_strided(&mut self, block: &[f64], inner: usize, i0: usize, count: usize) {
        for m in 0..self.side {
            let row = &block[m * inner + i0..m * inner + i0 + count];
            for (b, &v) in row.iter().enumerate() {
                self.lines[b * self.side + m] = v;
            }
        }
    }

    fn result(&self, b: usize) -> &[f64] {
        &self.results[b * self.w..(b + 1) * self.w]
    }

    fn run(&mut self, count: usize) {
        let side = self.side;
        let (w, lo) = (self.w, self.lo);
        match self.transform {
            Transform::Dense(sin) => {
                for b in 0..count {
                    let line = &self.lines[b * side..(b + 1) * side];
                    for r in 0..w {
                        let row = &sin[(lo + r) * side..(lo + r + 1) * side];
                        self.results[b * w + r] = row.iter().zip(line).map(|(s, v)| s * v).sum();
                    }
                }
            }
            Transform::Fft(fft) => {
                let n = side + 1;
                let mut b = 0;
                while b < count {
                    let pair = b + 1 < count;
                    self.buf[0] = Complex::new(0.0, 0.0);
                    self.buf[n] = Complex::new(0.0, 0.0);
                    for m in 1..=side {
                        let re = self.lines[b * side + m - 1];
                        let im = if pair {
                            self.lines[(b + 1) * side + m - 1]
                        } else {
                            0.0
                        };
                        self.buf[m] = Complex::new(re, im);
                        self.buf[2 * n - m] = Complex::new(-re, -im);
                    }
                    fft.process_with_scratch(&mut self.buf, &mut self.scratch);
                    // FFT of the odd extension of a + i b is 2 S[b] - 2 i S[a]
                    for r in 0..w {
                        let y = self.buf[lo + r + 1];
                        self.results[b * w + r] = -0.5 * y.im;
                        if pair {
                            self.results[(b + 1) * w + r] = 0.5 * y.re;
                        }
                    }
                    b += 2;
                }
            }
        }
    }
}

/// Convenience wrapper: one exact sample on `B(M)` centred at the origin.
pub fn sample_dirichlet_gff(dim: usize, radius: u32, seed: u64) -> Result<FieldSample> {
    Ok(DirichletSampler::new(dim, radius)?.sample(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::green::dirichlet_green;

    #[test]
    fn fft_and_dense_transforms_agree() {
        for (dim, m, win) in [(3, 5, 5), (3, 7, 3), (4, 3, 2)] {
            let fft =
                DirichletSampler::build(dim, m, win, TransformKind::Fft, DEFAULT_MEMORY_BUDGET)
                    .unwrap();
            let dense =
                DirichletSampler::build(dim, m, win, TransformKind::Dense, DEFAULT_MEMORY_BUDGET)
                    .unwrap();
            let a = fft.sample(11);
            let b = dense.sample(11);
            assert_eq!(a.values.len(), (2 * win as usize + 1).pow(dim as u32));
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn window_is_restriction_of_full_sample() {
        let full = DirichletSampler::new(3, 6).unwrap().sample(5);
        let win = DirichletSampler::with_window(3, 6, 2).unwrap().sample(5);
        for p in win.region.points() {
            let a = full.value_at(&p).unwrap();
            let b = win.value_at(&p).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_vertex_box_has_unit_variance() {
        let s = DirichletSampler::new(3, 0).unwrap();
        assert!((s.analytic_variance(&LatticePoint::origin(3)).unwrap() - 1.0).abs() < 1e-14);
        assert!(
            (dirichlet_green(
                &BoxRegion::centered(3, 0).unwrap(),
                &LatticePoint::origin(3),
                &LatticePoint::origin(3)
            )
            .unwrap()
                - 1.0)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn same_seed_same_bits() {
        let s = DirichletSampler::new(3, 4).unwrap();
        let a = s.sample(99);
        let b = s.sample(99);
        assert!(a
            .values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a.values, s.sample(100).values);
    }

    #[test]
    fn analytic_variance_matches_green_small() {
        let s = DirichletSampler::new(3, 2).unwrap();
        let bx = s.domain().clone();
        for p in bx.points() {
            let v = s.analytic_variance(&p).unwrap();
            let g = crate::gff::green::dirichlet_green_tol(&bx, &p, &p, 1e-13).unwrap();
            assert!((v - g).abs() < 1e-10);
        }
    }

    #[test]
    fn memory_budget_is_checked_before_allocation() {
        match DirichletSampler::build(5, 200, 10, TransformKind::Fft, 1 << 30) {
            Err(Error::ResourceLimit { required, .. }) => assert!(required > 1 << 30),
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("expected a resource error"),
        }
    }
}
