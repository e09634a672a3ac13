//! Two-Gaussian kernel convolutions: per-phase smoothing at the two time
//! scales and the comparison functions built from them.

use num_complex::Complex64;

use crate::error::Result;
use crate::field::{check_relaxed_partition, GridSpec, PhaseSmoother, PhaseStack, ScalarField};
use crate::kernel::KernelCoefficients;

/// `G_{gamma h} * u_j` and `G_{beta h} * u_j` for every phase `j`.
#[derive(Debug, Clone)]
pub struct Smoothed {
    pub gamma: PhaseStack,
    pub beta: PhaseStack,
}

/// The scaled kernels `K^h_ij = a_ij G_{gamma h} + b_ij G_{beta h}` on one grid.
pub struct KernelOperator {
    smoother: PhaseSmoother,
    coeffs: KernelCoefficients,
    h: f64,
}

impl KernelOperator {
    pub fn new(grid: &GridSpec, coeffs: &KernelCoefficients, h: f64) -> Result<Self> {
        let smoother = PhaseSmoother::new(grid, &[coeffs.gamma * h, coeffs.beta * h])?;
        Ok(Self {
            smoother,
            coeffs: coeffs.clone(),
            h,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.smoother.grid()
    }

    pub fn coeffs(&self) -> &KernelCoefficients {
        &self.coeffs
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// One forward transform per pair of phases, two inverse per phase pair.
    pub fn smooth(&self, u: &PhaseStack) -> Smoothed {
        let mut outs = self.smoother.smooth(u);
        let beta = outs.pop().expect("two time scales");
        let gamma = outs.pop().expect("two time scales");
        Smoothed { gamma, beta }
    }

    /// `psi_i = sum_{j != i} a_ij phi_gamma_j + b_ij phi_beta_j` for all `i`.
    pub fn comparisons(&self, s: &Smoothed) -> PhaseStack {
        let n = s.gamma.num_phases;
        let m = s.gamma.cells;
        let mut psi = PhaseStack::zeros(n, m);
        gemm_accumulate(self.coeffs.a.as_slice(), &s.gamma, &mut psi, 0.0);
        gemm_accumulate(self.coeffs.b.as_slice(), &s.beta, &mut psi, 1.0);
        psi
    }

    /// Single-multiplier route: `psi_i` from the combined symbol
    /// `a_ij e^{-4 pi^2 gamma h |k|^2} + b_ij e^{-4 pi^2 beta h |k|^2}`.
    pub fn comparisons_combined(&self, u: &PhaseStack) -> PhaseStack {
        let n = u.num_phases;
        let m = u.cells;
        let plan = self.smoother.plan();
        let (g_gamma, g_beta) = (self.smoother.multiplier(0), self.smoother.multiplier(1));
        let spectra: Vec<Vec<Complex64>> = (0..n)
            .map(|j| {
                let mut z: Vec<Complex64> =
                    u.phase(j).iter().map(|&v| Complex64::new(v, 0.0)).collect();
                plan.forward(&mut z);
                z
            })
            .collect();
        let mut psi = PhaseStack::zeros(n, m);
        let mut acc = vec![Complex64::default(); m];
        for i in 0..n {
            acc.iter_mut().for_each(|z| *z = Complex64::default());
            for (j, spectrum) in spectra.iter().enumerate() {
                if j == i {
                    continue;
                }
                let (a, b) = (self.coeffs.a[(i, j)], self.coeffs.b[(i, j)]);
                for (((z, s), &gg), &gb) in acc.iter_mut().zip(spectrum).zip(g_gamma).zip(g_beta) {
                    *z += s * (a * gg + b * gb);
                }
            }
            plan.inverse(&mut acc);
            for (o, z) in psi.phase_mut(i).iter_mut().zip(&acc) {
                *o = z.re;
            }
        }
        psi
    }
}

/// `out = coeffs * fields + keep * out` with `coeffs` an `N x N` row-major matrix.
fn gemm_accumulate(coeffs: &[f64], fields: &PhaseStack, out: &mut PhaseStack, keep: f64) {
    let n = fields.num_phases;
    let m = fields.cells;
    assert_eq!(coeffs.len(), n * n);
    assert_eq!(out.data.len(), n * m);
    // SAFETY: all three buffers are dense row-major with the dimensions and
    // strides passed here, checked by the assertions above.
    unsafe {
        matrixmultiply::dgemm(
            n,
            n,
            m,
            1.0,
            coeffs.as_ptr(),
            n as isize,
            1,
            fields.data.as_ptr(),
            m as isize,
            1,
            keep,
            out.data.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

/// Comparison function `psi_i` of phase `i` for relaxed phase fields.
pub fn weighted_kernel_convolve(
    fields: &[ScalarField],
    coeffs: &KernelCoefficients,
    h: f64,
    i: usize,
) -> Result<ScalarField> {
    let stack = PhaseStack::from_fields(fields)?;
    check_relaxed_partition(&stack)?;
    if i >= stack.num_phases {
        return Err(crate::error::Error::PhaseIndex {
            phase: i,
            num_phases: stack.num_phases,
        });
    }
    let grid = fields[0].grid().clone();
    let op = KernelOperator::new(&grid, coeffs, h)?;
    let psi = op.comparisons(&op.smooth(&stack));
    Ok(ScalarField::from_raw(grid, psi.phase(i).to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::LabelField;
    use crate::kernel::{compute_coefficients, MaterialSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coeffs3() -> KernelCoefficients {
        let spec = MaterialSpec::from_rows(
            &[
                vec![0.0, 1.0, 1.2],
                vec![1.0, 0.0, 0.9],
                vec![1.2, 0.9, 0.0],
            ],
            &[
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 0.5],
                vec![2.0, 0.5, 0.0],
            ],
        )
        .unwrap();
        compute_coefficients(&spec, 4.0, 0.2).unwrap()
    }

    #[test]
    fn empty_opposing_phase_gives_zero() {
        let grid = GridSpec::square(16).unwrap();
        let spec = MaterialSpec::uniform(2, 1.0, 1.0).unwrap();
        let c = compute_coefficients(&spec, 2.0, 0.5).unwrap();
        let u = LabelField::uniform(grid.clone(), 2, 0).unwrap().indicators();
        let psi0 = weighted_kernel_convolve(&u, &c, 1e-3, 0).unwrap();
        assert!(psi0.values().iter().all(|&v| v.abs() < 1e-15));
        // psi_1 sees phase 0 everywhere: the full kernel mass.
        let psi1 = weighted_kernel_convolve(&u, &c, 1e-3, 1).unwrap();
        let mass = c.kernel_mass(0, 1);
        assert!(psi1.values().iter().all(|&v| (v - mass).abs() < 1e-14));
    }

    #[test]
    fn rejects_non_partition() {
        let grid = GridSpec::square(8).unwrap();
        let c = coeffs3();
        let u = vec![ScalarField::constant(grid.clone(), 0.5); 3];
        assert!(weighted_kernel_convolve(&u, &c, 1e-3, 0).is_err());
    }

    #[test]
    fn two_gaussian_route_matches_combined_symbol() {
        let grid = GridSpec::new(&[16, 12]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let labels: Vec<u8> = (0..grid.len()).map(|_| rng.random_range(0..3)).collect();
        let lf = LabelField::new(grid.clone(), 3, labels).unwrap();
        let op = KernelOperator::new(&grid, &coeffs3(), 2e-3).unwrap();
        let u = PhaseStack::from_labels(&lf);
        let split = op.comparisons(&op.smooth(&u));
        let combined = op.comparisons_combined(&u);
        for (a, b) in split.data.iter().zip(&combined.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn comparisons_match_direct_sums() {
        let grid = GridSpec::new(&[8, 8]).unwrap();
        let c = coeffs3();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let labels: Vec<u8> = (0..grid.len()).map(|_| rng.random_range(0..3)).collect();
        let lf = LabelField::new(grid.clone(), 3, labels).unwrap();
        let h = 5e-3;
        let op = KernelOperator::new(&grid, &c, h).unwrap();
        let psi = op.comparisons(&op.smooth(&PhaseStack::from_labels(&lf)));
        let ind = lf.indicators();
        for i in 0..3 {
            let mut expected = vec![0.0; grid.len()];
            for (j, f) in ind.iter().enumerate() {
                if j == i {
                    continue;
                }
                let g1 = crate::field::gaussian_convolve(f, c.gamma * h).unwrap();
                let g2 = crate::field::gaussian_convolve(f, c.beta * h).unwrap();
                for (e, (x, y)) in expected.iter_mut().zip(g1.values().iter().zip(g2.values())) {
                    *e += c.a[(i, j)] * x + c.b[(i, j)] * y;
                }
            }
            for (a, b) in psi.phase(i).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }
}
