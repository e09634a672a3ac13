//! Multi-dimensional complex FFT on a periodic row-major grid.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::GridSpec;

/// Per-axis FFT plans for one grid shape; safe to share across threads.
#[derive(Clone)]
pub struct FftPlan {
    sizes: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    scratch_len: usize,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("sizes", &self.sizes).finish()
    }
}

impl FftPlan {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let sizes = grid.sizes().to_vec();
        let forward: Vec<_> = sizes.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse: Vec<_> = sizes.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let scratch_len = forward
            .iter()
            .chain(inverse.iter())
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            sizes,
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform, `X_k = sum_x f_x e^{-2 pi i k.x}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1/M` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        let dim = self.sizes.len();
        let mut block = Vec::new();
        for axis in 0..dim {
            let n = self.sizes[axis];
            let inner: usize = self.sizes[axis + 1..].iter().product();
            if inner == 1 {
                plans[axis].process_with_scratch(data, &mut scratch);
                continue;
            }
            block.resize(n * inner, Complex64::default());
            for chunk in data.chunks_exact_mut(n * inner) {
                transpose(chunk, &mut block, n, inner);
                plans[axis].process_with_scratch(&mut block, &mut scratch);
                transpose(&block, chunk, inner, n);
            }
        }
    }
}

/// Writes the transpose of the `rows x cols` matrix `src` into `dst`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 32;
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(data: &[Complex64], sizes: &[usize]) -> Vec<Complex64> {
        let grid = GridSpec::small(sizes).unwrap();
        let m = data.len();
        (0..m)
            .map(|k| {
                let kc = grid.coords(k);
                (0..m)
                    .map(|x| {
                        let xc = grid.coords(x);
                        let phase: f64 = kc
                            .iter()
                            .zip(&xc)
                            .zip(sizes)
                            .map(|((&k, &x), &n)| (k * x) as f64 / n as f64)
                            .sum();
                        data[x] * Complex64::from_polar(1.0, -2.0 * PI * phase)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_2d_and_3d() {
        for sizes in [vec![4, 6], vec![3, 4, 5]] {
            let grid = GridSpec::small(&sizes).unwrap();
            let m = grid.len();
            let data: Vec<Complex64> = (0..m)
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
                .collect();
            let expected = naive_dft(&data, &sizes);
            let plan = FftPlan::new(&grid);
            let mut out = data.clone();
            plan.forward(&mut out);
            for (a, b) in out.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-10);
            }
            plan.inverse(&mut out);
            for (a, b) in out.iter().zip(&data) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
