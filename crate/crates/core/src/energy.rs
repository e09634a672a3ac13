//! Approximate interfacial energy `E_h`, the induced distance `d_h`, the
//! minimizing-movement objective, and the per-step dissipation ledger.
//!
//! Sums run over ordered pairs `(i, j)`, so each physical interface is counted
//! twice. Integrals over the unit torus are grid averages.

use num_complex::Complex64;

use crate::convolution::{KernelOperator, Smoothed};
use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::field::{
    check_relaxed_partition, heat_multiplier, GridSpec, LabelField, PhaseStack, ScalarField,
};
use crate::kernel::{KernelCoefficients, PhaseMatrix};

/// Quadratic forms below this are reported as an error rather than clamped.
pub const NEGATIVE_SQUARE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    pub total: f64,
    /// Ordered-pair terms `e_ij = h^{-1/2} int u_i K^h_ij * u_j`.
    pub per_pair: PhaseMatrix,
}

impl EnergyBreakdown {
    fn from_pairs(per_pair: PhaseMatrix) -> Self {
        Self {
            total: per_pair.as_slice().iter().sum(),
            per_pair,
        }
    }
}

/// Spectral evaluator of the symmetric form
/// `(u, v) = h^{-1/2} sum_ij int u_i K^h_ij * v_j` on one grid.
pub struct EnergyEvaluator {
    grid: GridSpec,
    plan: FftPlan,
    g_gamma: Vec<f64>,
    g_beta: Vec<f64>,
    coeffs: KernelCoefficients,
    h: f64,
}

impl EnergyEvaluator {
    pub fn new(grid: &GridSpec, coeffs: &KernelCoefficients, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::NonpositiveTime(h));
        }
        Ok(Self {
            grid: grid.clone(),
            plan: FftPlan::new(grid),
            g_gamma: heat_multiplier(grid, coeffs.gamma * h),
            g_beta: heat_multiplier(grid, coeffs.beta * h),
            coeffs: coeffs.clone(),
            h,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn spectra(&self, u: &PhaseStack) -> Vec<Vec<Complex64>> {
        let scale = 1.0 / u.cells as f64;
        (0..u.num_phases)
            .map(|i| {
                let mut z: Vec<Complex64> =
                    u.phase(i).iter().map(|&v| Complex64::new(v * scale, 0.0)).collect();
                self.plan.forward(&mut z);
                z
            })
            .collect()
    }

    /// Ordered-pair matrix of `h^{-1/2} int u_i K^h_ij * v_j` via Parseval.
    pub fn pair_form(&self, u: &PhaseStack, v: &PhaseStack) -> PhaseMatrix {
        let su = self.spectra(u);
        let sv = if std::ptr::eq(u, v) {
            None
        } else {
            Some(self.spectra(v))
        };
        let sv = sv.as_ref().unwrap_or(&su);
        let n = u.num_phases;
        let inv_sqrt_h = 1.0 / self.h.sqrt();
        let mut out = PhaseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (mut sg, mut sb) = (0.0, 0.0);
                for (((x, y), &gg), &gb) in su[i].iter().zip(&sv[j]).zip(&self.g_gamma).zip(&self.g_beta)
                {
                    let p = (x.conj() * y).re;
                    sg += gg * p;
                    sb += gb * p;
                }
                out[(i, j)] = inv_sqrt_h * (self.coeffs.a[(i, j)] * sg + self.coeffs.b[(i, j)] * sb);
            }
        }
        out
    }

    /// `E_h(u)` with its ordered-pair breakdown; `u` need not be a partition.
    pub fn energy(&self, u: &PhaseStack) -> EnergyBreakdown {
        EnergyBreakdown::from_pairs(self.pair_form(u, u))
    }

    /// `d_h^2(u, v) = -2h E_h(u - v)`, unclamped.
    pub fn distance_sq_raw(&self, u: &PhaseStack, v: &PhaseStack) -> f64 {
        -2.0 * self.h * self.energy(&u.minus(v)).total
    }

    /// `d_h^2` checked against the negative-square tolerance.
    pub fn distance_sq(&self, u: &PhaseStack, v: &PhaseStack) -> Result<f64> {
        let d2 = self.distance_sq_raw(u, v);
        if d2 < -NEGATIVE_SQUARE_TOL {
            return Err(Error::NegativeSquare(d2));
        }
        Ok(d2)
    }

    /// `2 sqrt(h) int |G_{gamma h/2} * w|_A^2 + |G_{beta h/2} * w|_B^2` with
    /// `w = u - v`, `A = (-a_ij)`, `B = (-b_ij)`, evaluated in real space.
    pub fn distance_sq_half_time(&self, u: &PhaseStack, v: &PhaseStack) -> f64 {
        let w = u.minus(v);
        let n = w.num_phases;
        let m = w.cells;
        let mut total = 0.0;
        for (weights, t) in [
            (&self.coeffs.a, self.coeffs.gamma * self.h / 2.0),
            (&self.coeffs.b, self.coeffs.beta * self.h / 2.0),
        ] {
            let g = heat_multiplier(&self.grid, t);
            let smoothed: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut z: Vec<Complex64> =
                        w.phase(i).iter().map(|&x| Complex64::new(x, 0.0)).collect();
                    self.plan.forward(&mut z);
                    for (z, &gk) in z.iter_mut().zip(&g) {
                        *z *= gk;
                    }
                    self.plan.inverse(&mut z);
                    z.iter().map(|z| z.re).collect()
                })
                .collect();
            let mut integral = 0.0;
            for c in 0..m {
                let mut q = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            q -= weights[(i, j)] * smoothed[i][c] * smoothed[j][c];
                        }
                    }
                }
                integral += q;
            }
            total += integral / m as f64;
        }
        2.0 * self.h.sqrt() * total
    }
}

fn stacks(u: &[ScalarField], v: &[ScalarField]) -> Result<(PhaseStack, PhaseStack, GridSpec)> {
    let su = PhaseStack::from_fields(u)?;
    let sv = PhaseStack::from_fields(v)?;
    if su.num_phases != sv.num_phases || u[0].grid() != v[0].grid() {
        return Err(Error::Dimension("phase fields differ in shape".into()));
    }
    check_relaxed_partition(&su)?;
    check_relaxed_partition(&sv)?;
    Ok((su, sv, u[0].grid().clone()))
}

fn check_phase_count(stack: &PhaseStack, coeffs: &KernelCoefficients) -> Result<()> {
    if stack.num_phases != coeffs.num_phases() {
        return Err(Error::Dimension(format!(
            "{} phase fields but {} phases in the coefficients",
            stack.num_phases,
            coeffs.num_phases()
        )));
    }
    Ok(())
}

/// `E_h(u)` for relaxed phase fields `u`.
pub fn approximate_energy(
    u: &[ScalarField],
    coeffs: &KernelCoefficients,
    h: f64,
) -> Result<EnergyBreakdown> {
    let stack = PhaseStack::from_fields(u)?;
    check_phase_count(&stack, coeffs)?;
    check_relaxed_partition(&stack)?;
    Ok(EnergyEvaluator::new(u[0].grid(), coeffs, h)?.energy(&stack))
}

/// `d_h(u, v)`.
pub fn distance(
    u: &[ScalarField],
    v: &[ScalarField],
    coeffs: &KernelCoefficients,
    h: f64,
) -> Result<f64> {
    let (su, sv, grid) = stacks(u, v)?;
    check_phase_count(&su, coeffs)?;
    let d2 = EnergyEvaluator::new(&grid, coeffs, h)?.distance_sq(&su, &sv)?;
    Ok(d2.max(0.0).sqrt())
}

/// Minimizing-movement objective `(1/2h) d_h^2(u, prev) + E_h(u)` by two routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementObjective {
    /// Quadratic route: distance and energy evaluated separately.
    pub quadratic: f64,
    /// Linear route: `2 (prev, u) - (prev, prev)`.
    pub linear: f64,
}

/// Evaluates the objective of one thresholding step at the candidate `u`.
pub struct ObjectiveEvaluator {
    energy: EnergyEvaluator,
    prev: PhaseStack,
    /// Comparison functions of `prev`, so `(prev, u) = h^{-1/2} sum_j int u_j psi_j`.
    psi: PhaseStack,
    prev_self: f64,
}

impl ObjectiveEvaluator {
    pub fn new(prev: &LabelField, coeffs: &KernelCoefficients, h: f64) -> Result<Self> {
        let energy = EnergyEvaluator::new(prev.grid(), coeffs, h)?;
        let op = KernelOperator::new(prev.grid(), coeffs, h)?;
        let prev = PhaseStack::from_labels(prev);
        check_phase_count(&prev, coeffs)?;
        let psi = op.comparisons(&op.smooth(&prev));
        let mut me = Self {
            energy,
            prev,
            psi,
            prev_self: 0.0,
        };
        me.prev_self = me.pairing_with_prev(&me.prev.clone());
        Ok(me)
    }

    fn pairing_with_prev(&self, u: &PhaseStack) -> f64 {
        let m = u.cells as f64;
        let s: f64 = (0..u.num_phases)
            .map(|j| {
                u.phase(j)
                    .iter()
                    .zip(self.psi.phase(j))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .sum();
        s / (m * self.energy.h().sqrt())
    }

    pub fn quadratic(&self, u: &PhaseStack) -> Result<f64> {
        let d2 = self.energy.distance_sq(u, &self.prev)?;
        Ok(d2 / (2.0 * self.energy.h()) + self.energy.energy(u).total)
    }

    pub fn linear(&self, u: &PhaseStack) -> f64 {
        2.0 * self.pairing_with_prev(u) - self.prev_self
    }

    pub fn evaluate(&self, u: &PhaseStack) -> Result<MovementObjective> {
        Ok(MovementObjective {
            quadratic: self.quadratic(u)?,
            linear: self.linear(u),
        })
    }
}

pub fn movement_objective(
    u: &[ScalarField],
    prev: &LabelField,
    coeffs: &KernelCoefficients,
    h: f64,
) -> Result<MovementObjective> {
    let stack = PhaseStack::from_fields(u)?;
    check_relaxed_partition(&stack)?;
    if u[0].grid() != prev.grid() || stack.num_phases != prev.num_phases() {
        return Err(Error::Dimension("candidate and previous state differ in shape".into()));
    }
    ObjectiveEvaluator::new(prev, coeffs, h)?.evaluate(&stack)
}

/// `E_h` of a hard labelling from its smoothed indicators, in `O(N M)`.
pub fn label_energy(
    labels: &LabelField,
    smoothed: &Smoothed,
    coeffs: &KernelCoefficients,
    h: f64,
) -> EnergyBreakdown {
    let n = labels.num_phases();
    let m = labels.grid().len();
    let mut sum_gamma = PhaseMatrix::zeros(n);
    let mut sum_beta = PhaseMatrix::zeros(n);
    let lab = labels.labels();
    for j in 0..n {
        let (pg, pb) = (smoothed.gamma.phase(j), smoothed.beta.phase(j));
        for c in 0..m {
            let i = lab[c] as usize;
            sum_gamma[(i, j)] += pg[c];
            sum_beta[(i, j)] += pb[c];
        }
    }
    let scale = 1.0 / (m as f64 * h.sqrt());
    let per_pair = PhaseMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            scale * (coeffs.a[(i, j)] * sum_gamma[(i, j)] + coeffs.b[(i, j)] * sum_beta[(i, j)])
        }
    });
    EnergyBreakdown::from_pairs(per_pair)
}

/// `d_h^2` between consecutive hard labellings from their comparison functions.
///
/// With `w = next - prev`, linearity gives
/// `E_h(w) = h^{-1/2} sum_i int w_i (psi_i(next) - psi_i(prev))`, and `w` is
/// supported on the cells that changed.
pub fn label_distance_sq(
    prev: &LabelField,
    next: &LabelField,
    psi_prev: &PhaseStack,
    psi_next: &PhaseStack,
    h: f64,
) -> f64 {
    let m = prev.grid().len();
    let mut form = 0.0;
    for (c, (&p, &q)) in prev.labels().iter().zip(next.labels()).enumerate() {
        if p != q {
            let (p, q) = (p as usize, q as usize);
            let dq = psi_next.phase(q)[c] - psi_prev.phase(q)[c];
            let dp = psi_next.phase(p)[c] - psi_prev.phase(p)[c];
            form += dq - dp;
        }
    }
    let energy_of_difference = form / (m as f64 * h.sqrt());
    -2.0 * h * energy_of_difference
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    VanishedPhase(usize),
}

/// Bookkeeping for step `n`, which maps `chi^{n-1}` to `chi^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub energy_before: EnergyBreakdown,
    pub energy_after: EnergyBreakdown,
    /// `d_h^2(chi^n, chi^{n-1})`.
    pub dist_sq: f64,
    /// `E_h(chi^n) + sum_{k <= n} d_h^2(chi^k, chi^{k-1}) / (2h)`.
    pub ledger_lhs: f64,
    /// `E_h(chi^0)`.
    pub ledger_rhs: f64,
    pub phase_volumes: Vec<usize>,
    pub events: Vec<Event>,
}

impl StepReport {
    /// Per-step comparison with staying put, relative slack `rtol`.
    pub fn step_inequality_holds(&self, h: f64, rtol: f64) -> bool {
        let lhs = self.energy_after.total + self.dist_sq / (2.0 * h);
        lhs <= self.energy_before.total + rtol * self.energy_before.total.abs()
    }

    pub fn ledger_holds(&self, rtol: f64) -> bool {
        self.ledger_lhs <= self.ledger_rhs * (1.0 + rtol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{compute_coefficients, MaterialSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_coeffs(n: usize) -> KernelCoefficients {
        compute_coefficients(&MaterialSpec::uniform(n, 1.0, 1.0).unwrap(), 2.0, 0.5).unwrap()
    }

    fn random_relaxed(grid: &GridSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<ScalarField> {
        let mut cols = vec![Vec::with_capacity(grid.len()); n];
        for _ in 0..grid.len() {
            let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            let s: f64 = w.iter().sum();
            for (col, x) in cols.iter_mut().zip(&w) {
                col.push(x / s);
            }
        }
        cols.into_iter()
            .map(|v| ScalarField::new(grid.clone(), v).unwrap())
            .collect()
    }

    #[test]
    fn single_phase_has_zero_energy() {
        let grid = GridSpec::square(16).unwrap();
        let u = LabelField::uniform(grid, 3, 1).unwrap().indicators();
        let e = approximate_energy(&u, &uniform_coeffs(3), 1e-3).unwrap();
        assert!(e.total.abs() < 1e-14);
    }

    #[test]
    fn per_pair_symmetric_and_sums_to_total() {
        let grid = GridSpec::new(&[16, 8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = compute_coefficients(
            &MaterialSpec::from_rows(
                &[
                    vec![0.0, 1.0, 1.3],
                    vec![1.0, 0.0, 0.8],
                    vec![1.3, 0.8, 0.0],
                ],
                &[
                    vec![0.0, 1.0, 2.0],
                    vec![1.0, 0.0, 0.5],
                    vec![2.0, 0.5, 0.0],
                ],
            )
            .unwrap(),
            8.0,
            0.1,
        )
        .unwrap();
        let u = random_relaxed(&grid, 3, &mut rng);
        let e = approximate_energy(&u, &c, 2e-3).unwrap();
        let sum: f64 = e.per_pair.as_slice().iter().sum();
        assert!((sum - e.total).abs() < 1e-13 * e.total.abs());
        for i in 0..3 {
            for j in 0..3 {
                let (x, y) = (e.per_pair[(i, j)], e.per_pair[(j, i)]);
                assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300));
            }
        }
    }

    #[test]
    fn distance_identities() {
        let grid = GridSpec::square(16).unwrap();
        let c = uniform_coeffs(3);
        let h = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_relaxed(&grid, 3, &mut rng);
        let v = random_relaxed(&grid, 3, &mut rng);
        assert_eq!(distance(&u, &u, &c, h).unwrap(), 0.0);
        let duv = distance(&u, &v, &c, h).unwrap();
        let dvu = distance(&v, &u, &c, h).unwrap();
        assert!(duv > 0.0);
        assert!((duv - dvu).abs() <= 1e-12 * duv);
        let ev = EnergyEvaluator::new(&grid, &c, h).unwrap();
        let (su, sv) = (PhaseStack::from_fields(&u).unwrap(), PhaseStack::from_fields(&v).unwrap());
        let a = ev.distance_sq_raw(&su, &sv);
        let b = ev.distance_sq_half_time(&su, &sv);
        assert!((a - b).abs() <= 1e-10 * a.abs());
    }

    #[test]
    fn objective_at_prev_is_energy_and_routes_agree() {
        let grid = GridSpec::square(16).unwrap();
        let c = uniform_coeffs(3);
        let h = 2e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels: Vec<u8> = (0..grid.len()).map(|_| rng.random_range(0..3)).collect();
        let prev = LabelField::new(grid.clone(), 3, labels).unwrap();
        let at_prev = movement_objective(&prev.indicators(), &prev, &c, h).unwrap();
        let e = approximate_energy(&prev.indicators(), &c, h).unwrap().total;
        assert!((at_prev.quadratic - e).abs() <= 1e-12 * e);
        assert!((at_prev.linear - e).abs() <= 1e-10 * e);
        let u = random_relaxed(&grid, 3, &mut rng);
        let obj = movement_objective(&u, &prev, &c, h).unwrap();
        assert!((obj.quadratic - obj.linear).abs() <= 1e-10 * obj.quadratic.abs().max(1.0));
    }

    #[test]
    fn label_fast_paths_match_spectral() {
        let grid = GridSpec::square(32).unwrap();
        let c = uniform_coeffs(4);
        let h = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = LabelField::new(
            grid.clone(),
            4,
            (0..grid.len()).map(|_| rng.random_range(0..4)).collect(),
        )
        .unwrap();
        let mut b_labels = a.labels().to_vec();
        for l in b_labels.iter_mut().step_by(7) {
            *l = (*l + 1) % 4;
        }
        let b = LabelField::new(grid.clone(), 4, b_labels).unwrap();
        let op = KernelOperator::new(&grid, &c, h).unwrap();
        let (sa, sb) = (PhaseStack::from_labels(&a), PhaseStack::from_labels(&b));
        let (sma, smb) = (op.smooth(&sa), op.smooth(&sb));
        let ev = EnergyEvaluator::new(&grid, &c, h).unwrap();
        let fast = label_energy(&a, &sma, &c, h);
        let spectral = ev.energy(&sa);
        assert!((fast.total - spectral.total).abs() <= 1e-12 * spectral.total);
        let d_fast = label_distance_sq(&a, &b, &op.comparisons(&sma), &op.comparisons(&smb), h);
        let d_spec = ev.distance_sq_raw(&sb, &sa);
        assert!((d_fast - d_spec).abs() <= 1e-10 * d_spec);
    }

    #[test]
    fn negative_square_reported() {
        // gamma below sigma*mu makes b_12 negative and the symbol negative at
        // high frequencies, so rough differences have negative squared distance.
        let spec = MaterialSpec::uniform(2, 1.0, 1.0).unwrap();
        let c = compute_coefficients(&spec, 0.8, 0.2).unwrap();
        let grid = GridSpec::square(16).unwrap();
        // Stripes two cells wide against their complement: the difference sits at
        // a frequency where the gamma part has decayed but the beta part has not.
        let stripe = |flip: bool| {
            LabelField::from_fn(grid.clone(), 2, move |x| {
                u8::from((((x[0] * 16.0) as usize / 2) % 2 == 0) != flip)
            })
            .unwrap()
        };
        let (u, checker) = (stripe(false), stripe(true));
        let r = distance(&u.indicators(), &checker.indicators(), &c, 0.05);
        assert!(matches!(r, Err(Error::NegativeSquare(_))), "{r:?}");
    }
}
