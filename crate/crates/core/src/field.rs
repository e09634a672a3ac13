//! Periodic grid fields on the unit torus `[0,1)^d` and spectral Gaussian
//! convolution.
//!
//! Cells are stored row-major with the first axis slowest. Values are sampled
//! at cell centers. Convolution with the heat kernel `G_t` multiplies the
//! discrete Fourier coefficient at integer frequency `k` by
//! `exp(-4 pi^2 t |k|^2)`, which is the periodized heat kernel restricted to
//! the resolved frequencies.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftPlan;

/// Smallest cell count per axis accepted for simulation grids.
pub const MIN_AXIS_CELLS: usize = 8;

/// Shape of a periodic grid on `[0,1)^d`, `d` in {2, 3}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridSpec {
    sizes: Vec<usize>,
}

impl GridSpec {
    /// Simulation grid: 2 or 3 axes, each with at least [`MIN_AXIS_CELLS`] cells.
    pub fn new(sizes: &[usize]) -> Result<Self> {
        let grid = Self::small(sizes)?;
        if let Some(&n) = sizes.iter().find(|&&n| n < MIN_AXIS_CELLS) {
            return Err(Error::Grid(format!(
                "axis with {n} cells; simulation grids need at least {MIN_AXIS_CELLS} per axis"
            )));
        }
        Ok(grid)
    }

    /// Grid without the per-axis minimum, for exhaustive oracle cases.
    pub fn small(sizes: &[usize]) -> Result<Self> {
        if !(2..=3).contains(&sizes.len()) {
            return Err(Error::UnsupportedDimension(sizes.len()));
        }
        if sizes.contains(&0) {
            return Err(Error::Grid("axis with zero cells".into()));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
        })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(&[n, n])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.sizes[axis] as f64
    }

    pub fn max_spacing(&self) -> f64 {
        1.0 / *self.sizes.iter().min().expect("non-empty") as f64
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Multi-index of a flat cell index.
    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            c[axis] = idx % self.sizes[axis];
            idx /= self.sizes[axis];
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&c, &n)| acc * n + c)
    }

    /// Flat index of the cell at `coords + offset`, wrapping periodically.
    pub fn wrapped_index(&self, coords: &[usize], offset: &[isize]) -> usize {
        coords
            .iter()
            .zip(offset)
            .zip(&self.sizes)
            .fold(0, |acc, ((&c, &o), &n)| {
                acc * n + (c as isize + o).rem_euclid(n as isize) as usize
            })
    }

    /// Cell center in `[0,1)^d`.
    pub fn center(&self, idx: usize) -> Vec<f64> {
        self.coords(idx)
            .iter()
            .zip(&self.sizes)
            .map(|(&c, &n)| (c as f64 + 0.5) / n as f64)
            .collect()
    }

    /// Squared integer frequency `|k|^2` for every coefficient slot.
    pub fn frequency_norms(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self
            .sizes
            .iter()
            .map(|&n| (0..n).map(|i| signed_frequency(i, n).powi(2)).collect())
            .collect();
        (0..self.len())
            .map(|idx| {
                self.coords(idx)
                    .iter()
                    .zip(&per_axis)
                    .map(|(&c, k2)| k2[c])
                    .sum()
            })
            .collect()
    }
}

/// Integer frequency of DFT slot `i` on an axis with `n` cells, in `(-n/2, n/2]`.
pub fn signed_frequency(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Fourier multiplier of `G_t`: `exp(-4 pi^2 t |k|^2)` per coefficient slot.
pub fn heat_multiplier(grid: &GridSpec, t: f64) -> Vec<f64> {
    // Factorization of the heat kernel across axes.
    let per_axis: Vec<Vec<f64>> = grid
        .sizes()
        .iter()
        .map(|&n| {
            (0..n)
                .map(|i| (-4.0 * PI * PI * t * signed_frequency(i, n).powi(2)).exp())
                .collect()
        })
        .collect();
    let mut out = vec![1.0; grid.len()];
    for (idx, v) in out.iter_mut().enumerate() {
        for (c, factors) in grid.coords(idx).iter().zip(&per_axis) {
            *v *= factors[*c];
        }
    }
    out
}

/// Periodic phase labelling, one phase index per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelField {
    grid: GridSpec,
    num_phases: usize,
    labels: Vec<u8>,
}

/// Largest phase count representable by one byte per cell.
pub const MAX_PHASES: usize = 256;

impl LabelField {
    pub fn new(grid: GridSpec, num_phases: usize, labels: Vec<u8>) -> Result<Self> {
        if !(1..=MAX_PHASES).contains(&num_phases) {
            return Err(Error::Dimension(format!(
                "phase count {num_phases} outside 1..={MAX_PHASES}"
            )));
        }
        if labels.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} labels for a grid of {} cells",
                labels.len(),
                grid.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= num_phases) {
            return Err(Error::PhaseIndex {
                phase: l as usize,
                num_phases,
            });
        }
        Ok(Self {
            grid,
            num_phases,
            labels,
        })
    }

    pub fn uniform(grid: GridSpec, num_phases: usize, phase: u8) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, num_phases, vec![phase; n])
    }

    pub fn from_fn(
        grid: GridSpec,
        num_phases: usize,
        mut f: impl FnMut(&[f64]) -> u8,
    ) -> Result<Self> {
        let labels = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        Self::new(grid, num_phases, labels)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn num_phases(&self) -> usize {
        self.num_phases
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, idx: usize) -> usize {
        self.labels[idx] as usize
    }

    /// Cell counts per phase.
    pub fn volumes(&self) -> Vec<usize> {
        let mut v = vec![0; self.num_phases];
        for &l in &self.labels {
            v[l as usize] += 1;
        }
        v
    }

    /// Periodic translation by a whole number of cells per axis.
    pub fn shifted(&self, offset: &[isize]) -> Self {
        let mut labels = vec![0; self.labels.len()];
        for (idx, &l) in self.labels.iter().enumerate() {
            labels[self.grid.wrapped_index(&self.grid.coords(idx), offset)] = l;
        }
        Self {
            labels,
            ..self.clone()
        }
    }

    /// Relabels every cell: old phase `k` becomes `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            labels: self.labels.iter().map(|&l| perm[l as usize] as u8).collect(),
            ..self.clone()
        }
    }

    /// Per-phase indicator fields, which sum to one in every cell.
    pub fn indicators(&self) -> Vec<ScalarField> {
        (0..self.num_phases)
            .map(|p| indicator_unchecked(self, p))
            .collect()
    }
}

/// `1_{Omega_phase}` sampled per cell.
pub fn indicator(field: &LabelField, phase: usize) -> Result<ScalarField> {
    if phase >= field.num_phases {
        return Err(Error::PhaseIndex {
            phase,
            num_phases: field.num_phases,
        });
    }
    Ok(indicator_unchecked(field, phase))
}

fn indicator_unchecked(field: &LabelField, phase: usize) -> ScalarField {
    ScalarField {
        grid: field.grid.clone(),
        values: field
            .labels
            .iter()
            .map(|&l| if l as usize == phase { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// Real grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite field value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![c; n],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Grid average, i.e. the integral over the unit torus.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `int f g` by the midpoint rule.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn shifted(&self, offset: &[isize]) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for (idx, &v) in self.values.iter().enumerate() {
            values[self.grid.wrapped_index(&self.grid.coords(idx), offset)] = v;
        }
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn to_spectral(&self) -> SpectralField {
        SpectralField::from_scalar(self, &FftPlan::new(&self.grid))
    }
}

/// Normalized discrete Fourier coefficients of a real field: slot `k` holds
/// `(1/M) sum_x f(x) e^{-2 pi i k.x}`, so slot 0 is the grid mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn from_scalar(f: &ScalarField, plan: &FftPlan) -> Self {
        let mut coeffs: Vec<Complex64> =
            f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plan.forward(&mut coeffs);
        let scale = 1.0 / coeffs.len() as f64;
        for z in &mut coeffs {
            *z *= scale;
        }
        Self {
            grid: f.grid.clone(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn scale_by(&mut self, multiplier: &[f64]) {
        for (z, &m) in self.coeffs.iter_mut().zip(multiplier) {
            *z *= m;
        }
    }

    /// Back to real space; the imaginary round-off is discarded.
    pub fn to_scalar(&self, plan: &FftPlan) -> ScalarField {
        let mut buf: Vec<Complex64> = self.coeffs.iter().map(|z| z * self.len() as f64).collect();
        plan.inverse(&mut buf);
        ScalarField::from_raw(self.grid.clone(), buf.iter().map(|z| z.re).collect())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `int f g` by Parseval, `sum_k conj(f_k) g_k`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Largest violation of `f_{-k} = conj(f_k)`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let sizes = self.grid.sizes();
        (0..self.len())
            .map(|idx| {
                let c = self.grid.coords(idx);
                let neg: Vec<usize> = c.iter().zip(sizes).map(|(&k, &n)| (n - k) % n).collect();
                (self.coeffs[self.grid.index(&neg)] - self.coeffs[idx].conj()).norm()
            })
            .fold(0.0, f64::max)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::NonpositiveTime(t))
    }
}

/// `G_t * f` on the torus.
pub fn gaussian_convolve(f: &ScalarField, t: f64) -> Result<ScalarField> {
    check_time(t)?;
    let plan = FftPlan::new(&f.grid);
    let mut spec = SpectralField::from_scalar(f, &plan);
    spec.scale_by(&heat_multiplier(&f.grid, t));
    Ok(spec.to_scalar(&plan))
}

/// Phase-major stack of `N` real fields over one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStack {
    pub(crate) num_phases: usize,
    pub(crate) cells: usize,
    pub(crate) data: Vec<f64>,
}

impl PhaseStack {
    pub fn zeros(num_phases: usize, cells: usize) -> Self {
        Self {
            num_phases,
            cells,
            data: vec![0.0; num_phases * cells],
        }
    }

    pub fn from_labels(labels: &LabelField) -> Self {
        let cells = labels.grid.len();
        let mut s = Self::zeros(labels.num_phases, cells);
        for (c, &l) in labels.labels.iter().enumerate() {
            s.data[l as usize * cells + c] = 1.0;
        }
        s
    }

    pub fn from_fields(fields: &[ScalarField]) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::Dimension("no phase fields".into()))?;
        let cells = first.values.len();
        if fields.iter().any(|f| f.grid != first.grid) {
            return Err(Error::Dimension("phase fields on different grids".into()));
        }
        Ok(Self {
            num_phases: fields.len(),
            cells,
            data: fields.iter().flat_map(|f| f.values.iter().copied()).collect(),
        })
    }

    pub fn num_phases(&self) -> usize {
        self.num_phases
    }

    pub fn phase(&self, i: usize) -> &[f64] {
        &self.data[i * self.cells..(i + 1) * self.cells]
    }

    pub fn phase_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cells..(i + 1) * self.cells]
    }

    pub fn to_fields(&self, grid: &GridSpec) -> Vec<ScalarField> {
        (0..self.num_phases)
            .map(|i| ScalarField::from_raw(grid.clone(), self.phase(i).to_vec()))
            .collect()
    }

    /// Largest deviation of the per-cell phase sum from one.
    pub fn partition_defect(&self) -> f64 {
        (0..self.cells)
            .map(|c| {
                let s: f64 = (0..self.num_phases).map(|i| self.data[i * self.cells + c]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Pointwise difference `self - other`.
    pub fn minus(&self, other: &PhaseStack) -> PhaseStack {
        PhaseStack {
            num_phases: self.num_phases,
            cells: self.cells,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Tolerance on `sum_i u_i = 1` for relaxed phase fields.
pub const PARTITION_TOL: f64 = 1e-9;

pub(crate) fn check_relaxed_partition(stack: &PhaseStack) -> Result<()> {
    let defect = stack.partition_defect();
    if defect > PARTITION_TOL {
        return Err(Error::NotAPartition(format!(
            "phase fields sum to one only within {defect:.3e}"
        )));
    }
    let lo = stack.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = stack.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo < -PARTITION_TOL || hi > 1.0 + PARTITION_TOL {
        return Err(Error::NotAPartition(format!(
            "phase values span [{lo}, {hi}], outside [0, 1]"
        )));
    }
    Ok(())
}

/// Heat-kernel smoothing of every phase at the two kernel time scales.
///
/// Two real phases share one complex transform (`u_j + i u_{j+1}`); the real
/// even multiplier keeps the real and imaginary parts separate.
pub struct PhaseSmoother {
    grid: GridSpec,
    plan: FftPlan,
    multipliers: Vec<Vec<f64>>,
}

impl PhaseSmoother {
    pub fn new(grid: &GridSpec, times: &[f64]) -> Result<Self> {
        for &t in times {
            check_time(t)?;
        }
        Ok(Self {
            grid: grid.clone(),
            plan: FftPlan::new(grid),
            multipliers: times.iter().map(|&t| heat_multiplier(grid, t)).collect(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn plan(&self) -> &FftPlan {
        &self.plan
    }

    pub fn multiplier(&self, which: usize) -> &[f64] {
        &self.multipliers[which]
    }

    /// One output stack per configured time, `out[s].phase(j) = G_{t_s} * u_j`.
    pub fn smooth(&self, input: &PhaseStack) -> Vec<PhaseStack> {
        let n = input.num_phases;
        let m = input.cells;
        let mut outs: Vec<PhaseStack> = (0..self.multipliers.len())
            .map(|_| PhaseStack::zeros(n, m))
            .collect();
        let mut spectrum = vec![Complex64::default(); m];
        let mut work = vec![Complex64::default(); m];
        for j in (0..n).step_by(2) {
            let re = input.phase(j);
            if j + 1 < n {
                let im = input.phase(j + 1);
                for ((z, &a), &b) in spectrum.iter_mut().zip(re).zip(im) {
                    *z = Complex64::new(a, b);
                }
            } else {
                for (z, &a) in spectrum.iter_mut().zip(re) {
                    *z = Complex64::new(a, 0.0);
                }
            }
            self.plan.forward(&mut spectrum);
            for (mult, out) in self.multipliers.iter().zip(outs.iter_mut()) {
                for ((w, z), &g) in work.iter_mut().zip(&spectrum).zip(mult) {
                    *w = z * g;
                }
                self.plan.inverse(&mut work);
                for (o, w) in out.phase_mut(j).iter_mut().zip(&work) {
                    *o = w.re;
                }
                if j + 1 < n {
                    for (o, w) in out.phase_mut(j + 1).iter_mut().zip(&work) {
                        *o = w.im;
                    }
                }
            }
        }
        outs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &GridSpec, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::new(grid.clone(), (0..grid.len()).map(|_| rng.random()).collect()).unwrap()
    }

    #[test]
    fn grid_guards() {
        assert!(GridSpec::new(&[8, 8]).is_ok());
        assert!(GridSpec::new(&[4, 8]).is_err());
        assert!(GridSpec::new(&[8]).is_err());
        assert!(GridSpec::new(&[8, 8, 8, 8]).is_err());
        assert!(GridSpec::small(&[2, 2]).is_ok());
        let g = GridSpec::new(&[8, 10, 12]).unwrap();
        assert_eq!(g.len(), 960);
        for idx in [0, 1, 17, 959] {
            assert_eq!(g.index(&g.coords(idx)), idx);
        }
    }

    #[test]
    fn indicator_examples() {
        let grid = GridSpec::square(16).unwrap();
        let all0 = LabelField::uniform(grid.clone(), 2, 0).unwrap();
        assert!(indicator(&all0, 0).unwrap().values().iter().all(|&v| v == 1.0));
        assert!(indicator(&all0, 1).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            indicator(&all0, 2),
            Err(Error::PhaseIndex { phase: 2, .. })
        ));
        let stripe = LabelField::from_fn(grid, 2, |x| u8::from(x[0] >= 0.5)).unwrap();
        let ind = indicator(&stripe, 1).unwrap();
        for (idx, &v) in ind.values().iter().enumerate() {
            assert_eq!(v, stripe.get(idx) as f64);
        }
        let sum: Vec<f64> = (0..stripe.grid().len())
            .map(|c| stripe.indicators().iter().map(|f| f.values()[c]).sum())
            .collect();
        assert!(sum.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn constant_is_fixed() {
        let grid = GridSpec::square(16).unwrap();
        let f = ScalarField::constant(grid, 0.7);
        for t in [1e-5, 0.01, 3.0] {
            let g = gaussian_convolve(&f, t).unwrap();
            assert!(g.values().iter().all(|v| (v - 0.7).abs() < 1e-15));
        }
    }

    #[test]
    fn rejects_nonpositive_time() {
        let f = ScalarField::constant(GridSpec::square(8).unwrap(), 1.0);
        assert!(matches!(gaussian_convolve(&f, 0.0), Err(Error::NonpositiveTime(_))));
        assert!(matches!(gaussian_convolve(&f, -1.0), Err(Error::NonpositiveTime(_))));
    }

    /// Periodized Gaussian evaluated by image sums, applied by the midpoint rule.
    fn realspace_convolve_1d_axis(f: &ScalarField, t: f64) -> ScalarField {
        let grid = f.grid().clone();
        let n0 = grid.sizes()[0];
        let kernel: Vec<f64> = (0..n0)
            .map(|o| {
                let x = o as f64 / n0 as f64;
                (-20..=20)
                    .map(|m| {
                        let z = x + m as f64;
                        (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
                    })
                    .sum::<f64>()
                    / n0 as f64
            })
            .collect();
        let mut out = vec![0.0; grid.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let c = grid.coords(idx);
            *o = (0..n0)
                .map(|s| {
                    let src = grid.wrapped_index(&c, &[-(s as isize), 0]);
                    kernel[s] * f.values()[src]
                })
                .sum();
        }
        ScalarField::new(grid, out).unwrap()
    }

    #[test]
    fn plane_wave_decays_by_heat_factor() {
        let grid = GridSpec::square(32).unwrap();
        let f = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).cos());
        let t = 0.01;
        let g = gaussian_convolve(&f, t).unwrap();
        let quad = realspace_convolve_1d_axis(&f, t);
        let factor = (-4.0 * PI * PI * t).exp();
        assert!((factor - 0.67377).abs() < 1e-4);
        for ((a, b), q) in g.values().iter().zip(f.values()).zip(quad.values()) {
            assert!((a - factor * b).abs() < 1e-12);
            assert!((a - q).abs() < 1e-12);
        }
    }

    #[test]
    fn semigroup_property() {
        let grid = GridSpec::new(&[16, 24]).unwrap();
        let f = random_field(&grid, 3);
        let (s, t) = (0.002, 0.005);
        let two = gaussian_convolve(&gaussian_convolve(&f, s).unwrap(), t).unwrap();
        let one = gaussian_convolve(&f, s + t).unwrap();
        for (a, b) in two.values().iter().zip(one.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_and_range_preserved() {
        let grid = GridSpec::new(&[16, 16, 8]).unwrap();
        let f = random_field(&grid, 11);
        let g = gaussian_convolve(&f, 1e-3).unwrap();
        assert!((g.mean() - f.mean()).abs() < 1e-14);
        assert!(g.min() >= f.min() - 1e-12 && g.max() <= f.max() + 1e-12);
    }

    #[test]
    fn parseval_and_conjugate_symmetry() {
        let grid = GridSpec::new(&[16, 12]).unwrap();
        let f = random_field(&grid, 5);
        let g = random_field(&grid, 6);
        let (fs, gs) = (f.to_spectral(), g.to_spectral());
        assert!((fs.coeffs()[0].re - f.mean()).abs() < 1e-15);
        assert!(fs.conjugate_symmetry_defect() < 1e-15);
        let direct = f.inner(&g);
        assert!((fs.inner(&gs) - direct).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn packed_smoothing_matches_single_fields() {
        let grid = GridSpec::new(&[16, 8]).unwrap();
        let fields: Vec<ScalarField> = (0..3).map(|s| random_field(&grid, s)).collect();
        let stack = PhaseStack::from_fields(&fields).unwrap();
        let smoother = PhaseSmoother::new(&grid, &[0.001, 0.004]).unwrap();
        let outs = smoother.smooth(&stack);
        for (s, t) in [0.001, 0.004].into_iter().enumerate() {
            for (j, f) in fields.iter().enumerate() {
                let single = gaussian_convolve(f, t).unwrap();
                for (a, b) in outs[s].phase(j).iter().zip(single.values()) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn shift_and_permutation_helpers() {
        let grid = GridSpec::square(8).unwrap();
        let f = LabelField::from_fn(grid, 3, |x| (x[0] * 3.0) as u8).unwrap();
        let s = f.shifted(&[3, -2]);
        assert_eq!(s.volumes(), f.volumes());
        assert_eq!(s.shifted(&[-3, 2]), f);
        let p = f.permuted(&[2, 0, 1]);
        assert_eq!(p.volumes(), vec![f.volumes()[1], f.volumes()[2], f.volumes()[0]]);
    }
}
