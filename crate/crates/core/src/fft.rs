//! Multi-dimensional complex FFTs on cubes, built from 1-D rustfft plans.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct FftNd {
    m: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftNd {
    pub(crate) fn new(m: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            dim,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform including the `1/m^d` normalisation.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.len());
        let m = self.m;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // last axis is contiguous
        plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        for axis in 0..self.dim.saturating_sub(1) {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            let outer = self.len() / (m * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * m * stride + inner;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }
}

/// Copies an `n^d` block into the low corner of a zeroed `m^d` array.
pub(crate) fn pad(src: &[Complex64], n: usize, m: usize, dim: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m.pow(dim as u32)];
    let rows = src.len() / n;
    for r in 0..rows {
        let mut dst = 0;
        let mut rem = r;
        for axis in (0..dim - 1).rev() {
            let idx = rem % n;
            rem /= n;
            dst += idx * m.pow((dim - 1 - axis) as u32);
        }
        out[dst..dst + n].copy_from_slice(&src[r * n..(r + 1) * n]);
    }
    out
}

/// Inverse of [`pad`]: extracts the low `n^d` corner.
pub(crate) fn crop(src: &[Complex64], n: usize, m: usize, dim: usize) -> Vec<Complex64> {
    let total = n.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    for r in 0..total / n {
        let mut from = 0;
        let mut rem = r;
        for axis in (0..dim - 1).rev() {
            let idx = rem % n;
            rem /= n;
            from += idx * m.pow((dim - 1 - axis) as u32);
        }
        out.extend_from_slice(&src[from..from + n]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], m: usize, dim: usize) -> Vec<Complex64> {
        let total = m.pow(dim as u32);
        let idx = |mut i: usize| {
            let mut v = vec![0; dim];
            for a in (0..dim).rev() {
                v[a] = i % m;
                i /= m;
            }
            v
        };
        (0..total)
            .map(|k| {
                let kk = idx(k);
                (0..total)
                    .map(|j| {
                        let jj = idx(j);
                        let phase: f64 = kk.iter().zip(&jj).map(|(a, b)| (a * b) as f64).sum();
                        data[j]
                            * Complex64::from_polar(
                                1.0,
                                -2.0 * std::f64::consts::PI * phase / m as f64,
                            )
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_and_inverts() {
        for dim in 1..=3 {
            let m: usize = 4;
            let total = m.pow(dim as u32);
            let data: Vec<Complex64> = (0..total)
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos()))
                .collect();
            let plan = FftNd::new(m, dim);
            let mut x = data.clone();
            plan.forward(&mut x);
            let y = naive_dft(&data, m, dim);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).norm() < 1e-12);
            }
            plan.inverse(&mut x);
            for (a, b) in x.iter().zip(&data) {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn pad_crop_roundtrip() {
        for dim in 1..=3 {
            let n: usize = 3;
            let src: Vec<Complex64> = (0..n.pow(dim as u32))
                .map(|i| Complex64::new(i as f64, 0.0))
                .collect();
            let p = pad(&src, n, 6, dim as usize);
            assert_eq!(
                p.iter().map(|v| v.re).sum::<f64>(),
                src.iter().map(|v| v.re).sum::<f64>()
            );
            assert_eq!(crop(&p, n, 6, dim as usize), src);
        }
    }
}
