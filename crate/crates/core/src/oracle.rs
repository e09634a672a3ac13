//! Exhaustive checks of the minimizing-movement property on tiny grids, and
//! an independent real-space evaluation of `E_h` and `d_h`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::energy::{EnergyEvaluator, ObjectiveEvaluator};
use crate::error::{Error, Result};
use crate::field::{GridSpec, LabelField, PhaseStack, ScalarField};
use crate::kernel::{compute_coefficients, suggest_scales, validate, KernelCoefficients, MaterialSpec, PhaseMatrix};
use crate::scheme::threshold_step;

pub const MAX_ORACLE_CELLS: usize = 16;
pub const MAX_ORACLE_PHASES: usize = 3;
pub const MAX_ENUMERATION: u128 = 100_000;
pub const MAX_REALSPACE_CELLS: usize = 4096;

/// Absolute Gaussian tail below which image sources are dropped.
const IMAGE_TAIL: f64 = 1e-16;

/// Optimality slack relative to `1 + |best|`.
pub const GAP_TOL: f64 = 1e-10;

/// Objective values this close (relative to `1 + |best|`) count as tied minima.
const TIE_TOL: f64 = 1e-12;

/// One thresholding step small enough to enumerate.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub prev: LabelField,
    pub coeffs: KernelCoefficients,
    pub h: f64,
}

impl OracleCase {
    pub fn new(prev: LabelField, coeffs: KernelCoefficients, h: f64) -> Result<Self> {
        let cells = prev.grid().len();
        let n = prev.num_phases();
        if cells > MAX_ORACLE_CELLS {
            return Err(Error::Grid(format!(
                "oracle grids hold at most {MAX_ORACLE_CELLS} cells, got {cells}"
            )));
        }
        if n > MAX_ORACLE_PHASES {
            return Err(Error::Dimension(format!(
                "oracle cases use at most {MAX_ORACLE_PHASES} phases, got {n}"
            )));
        }
        if coeffs.num_phases() != n {
            return Err(Error::Dimension(format!(
                "labels have {n} phases, coefficients {}",
                coeffs.num_phases()
            )));
        }
        let count = enumeration_count(n, cells);
        if count > MAX_ENUMERATION {
            return Err(Error::EnumerationTooLarge {
                count,
                limit: MAX_ENUMERATION,
            });
        }
        Ok(Self { prev, coeffs, h })
    }

    pub fn enumeration_count(&self) -> u128 {
        enumeration_count(self.prev.num_phases(), self.prev.grid().len())
    }
}

fn enumeration_count(n: usize, cells: usize) -> u128 {
    (n as u128).checked_pow(cells as u32).unwrap_or(u128::MAX)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleVerdict {
    pub best_value: f64,
    /// Every labelling attaining the minimum, in lexicographic order.
    pub best_configs: Vec<Vec<u8>>,
    pub threshold: Vec<u8>,
    pub threshold_value: f64,
    pub is_minimizer: bool,
    /// `threshold_value - best_value`.
    pub gap: f64,
}

/// Labelling number `k` in lexicographic order, cell 0 most significant.
fn config(mut k: u128, n: usize, cells: usize) -> Vec<u8> {
    let mut out = vec![0u8; cells];
    for slot in out.iter_mut().rev() {
        *slot = (k % n as u128) as u8;
        k /= n as u128;
    }
    out
}

/// Minimizes `d_h^2(u, prev) / 2h + E_h(u)` over every hard labelling `u`,
/// evaluating the objective through the energy and distance directly, and
/// compares the minimum with the thresholded successor of `prev`.
pub fn exhaustive_minimize(case: &OracleCase) -> Result<OracleVerdict> {
    let grid = case.prev.grid().clone();
    let n = case.prev.num_phases();
    let cells = grid.len();
    let eval = ObjectiveEvaluator::new(&case.prev, &case.coeffs, case.h)?;
    let objective = |labels: Vec<u8>| -> Result<f64> {
        let lf = LabelField::new(grid.clone(), n, labels)?;
        eval.quadratic(&PhaseStack::from_labels(&lf))
    };
    let count = case.enumeration_count();
    let mut values = Vec::with_capacity(count as usize);
    for k in 0..count {
        values.push(objective(config(k, n, cells))?);
    }
    let best_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tie = TIE_TOL * (1.0 + best_value.abs());
    let best_configs = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v - best_value <= tie)
        .map(|(k, _)| config(k as u128, n, cells))
        .collect();
    let (next, _) = threshold_step(&case.prev, &case.coeffs, case.h)?;
    let threshold = next.labels().to_vec();
    let threshold_value = objective(threshold.clone())?;
    let gap = threshold_value - best_value;
    Ok(OracleVerdict {
        best_value,
        best_configs,
        threshold,
        threshold_value,
        is_minimizer: gap <= GAP_TOL * (1.0 + best_value.abs()),
        gap,
    })
}

/// Largest amount by which a random relaxed candidate beats the thresholded
/// successor, or 0 when none does. Candidates take a uniform point of the
/// probability simplex in every cell.
pub fn relaxed_sampling_check(case: &OracleCase, samples: usize, rng: &mut impl Rng) -> Result<f64> {
    let n = case.prev.num_phases();
    let cells = case.prev.grid().len();
    let eval = ObjectiveEvaluator::new(&case.prev, &case.coeffs, case.h)?;
    let (next, _) = threshold_step(&case.prev, &case.coeffs, case.h)?;
    let threshold_value = eval.quadratic(&PhaseStack::from_labels(&next))?;
    let mut violation: f64 = 0.0;
    for _ in 0..samples {
        let mut u = PhaseStack::zeros(n, cells);
        for c in 0..cells {
            let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = e.iter().sum();
            for (i, x) in e.iter().enumerate() {
                u.phase_mut(i)[c] = x / total;
            }
        }
        violation = violation.max(threshold_value - eval.quadratic(&u)?);
    }
    Ok(violation)
}

/// Real-space and spectral evaluations of the same energies and distances.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub energy_realspace: f64,
    pub energy_spectral: f64,
    /// `-2h E_h(u - v)` by direct summation.
    pub dist_sq_realspace: f64,
    /// `-2h E_h(u - v)` through Parseval.
    pub dist_sq_spectral: f64,
    /// Half-time form of the distance.
    pub dist_sq_half_time: f64,
}

impl CrossCheck {
    /// Largest relative disagreement among the energy pair and the three distances.
    pub fn max_relative_error(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        let d = [self.dist_sq_realspace, self.dist_sq_spectral, self.dist_sq_half_time];
        let mut worst = rel(self.energy_realspace, self.energy_spectral);
        for x in 0..3 {
            for y in x + 1..3 {
                worst = worst.max(rel(d[x], d[y]));
            }
        }
        worst
    }
}

/// Periodized heat kernel `sum_n G_t(z + n)` sampled at every grid
/// displacement and weighted by the cell volume.
fn periodized_kernel(grid: &GridSpec, t: f64) -> Vec<f64> {
    let d = grid.dim();
    let reach = (4.0 * t * (1.0 / IMAGE_TAIL).ln()).sqrt().ceil() as i64 + 1;
    let norm = (4.0 * PI * t).powf(-(d as f64) / 2.0);
    let images: Vec<Vec<i64>> = (0..d).fold(vec![vec![]], |acc, _| {
        acc.into_iter()
            .flat_map(|p| {
                (-reach..=reach).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect()
    });
    (0..grid.len())
        .map(|idx| {
            let c = grid.coords(idx);
            let z: Vec<f64> = (0..d).map(|a| c[a] as f64 / grid.sizes()[a] as f64).collect();
            let sum: f64 = images
                .iter()
                .map(|img| {
                    let r2: f64 = (0..d).map(|a| (z[a] + img[a] as f64).powi(2)).sum();
                    (-r2 / (4.0 * t)).exp()
                })
                .sum();
            norm * sum * grid.cell_volume()
        })
        .collect()
}

/// `h^{-1/2} sum_ij int u_i K^h_ij * v_j` by a double sum over cells.
fn realspace_form(
    grid: &GridSpec,
    u: &PhaseStack,
    v: &PhaseStack,
    coeffs: &KernelCoefficients,
    h: f64,
    kg: &[f64],
    kb: &[f64],
) -> f64 {
    let n = u.num_phases;
    let m = grid.len();
    let dim = grid.dim();
    let coords: Vec<Vec<usize>> = (0..m).map(|c| grid.coords(c)).collect();
    let mut pair_g = PhaseMatrix::zeros(n);
    let mut pair_b = PhaseMatrix::zeros(n);
    for x in 0..m {
        for y in 0..m {
            let delta: Vec<usize> = (0..dim)
                .map(|a| (coords[x][a] + grid.sizes()[a] - coords[y][a]) % grid.sizes()[a])
                .collect();
            let k = grid.index(&delta);
            for i in 0..n {
                let ui = u.phase(i)[x];
                if ui == 0.0 {
                    continue;
                }
                for j in 0..n {
                    if i != j {
                        let w = ui * v.phase(j)[y];
                        pair_g[(i, j)] += w * kg[k];
                        pair_b[(i, j)] += w * kb[k];
                    }
                }
            }
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += coeffs.a[(i, j)] * pair_g[(i, j)] + coeffs.b[(i, j)] * pair_b[(i, j)];
        }
    }
    total * grid.cell_volume() / h.sqrt()
}

/// Evaluates `E_h(u)` and `d_h^2(u, v)` by real-space summation against the
/// image-sum kernel and compares with the spectral routes.
///
/// The two routes agree only when the kernel is wide enough on the grid that
/// spectral aliasing is negligible, roughly `beta h n^2 >= 3` for `n` cells
/// per axis.
pub fn realspace_crosscheck(
    u: &[ScalarField],
    v: &[ScalarField],
    coeffs: &KernelCoefficients,
    h: f64,
) -> Result<CrossCheck> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::NonpositiveTime(h));
    }
    let su = PhaseStack::from_fields(u)?;
    let sv = PhaseStack::from_fields(v)?;
    let grid = u[0].grid().clone();
    if v[0].grid() != &grid || su.num_phases != sv.num_phases || su.num_phases != coeffs.num_phases() {
        return Err(Error::Dimension("cross-check inputs differ in shape".into()));
    }
    if grid.len() > MAX_REALSPACE_CELLS {
        return Err(Error::Grid(format!(
            "real-space cross-check holds at most {MAX_REALSPACE_CELLS} cells, got {}",
            grid.len()
        )));
    }
    let kg = periodized_kernel(&grid, coeffs.gamma * h);
    let kb = periodized_kernel(&grid, coeffs.beta * h);
    let w = su.minus(&sv);
    let spectral = EnergyEvaluator::new(&grid, coeffs, h)?;
    Ok(CrossCheck {
        energy_realspace: realspace_form(&grid, &su, &su, coeffs, h, &kg, &kb),
        energy_spectral: spectral.energy(&su).total,
        dist_sq_realspace: -2.0 * h * realspace_form(&grid, &w, &w, coeffs, h, &kg, &kb),
        dist_sq_spectral: spectral.distance_sq_raw(&su, &sv),
        dist_sq_half_time: spectral.distance_sq_half_time(&su, &sv),
    })
}

/// Random symmetric material with entries drawn from `sigma_range` and
/// `mu_range`, resampled until suggested scales validate.
pub fn random_material(
    rng: &mut impl Rng,
    num_phases: usize,
    sigma_range: (f64, f64),
    mu_range: (f64, f64),
) -> Result<(MaterialSpec, KernelCoefficients)> {
    const ATTEMPTS: usize = 10_000;
    for _ in 0..ATTEMPTS {
        let mut sigma = PhaseMatrix::zeros(num_phases);
        let mut mu = PhaseMatrix::zeros(num_phases);
        for i in 0..num_phases {
            for j in i + 1..num_phases {
                let s = rng.random_range(sigma_range.0..sigma_range.1);
                let m = rng.random_range(mu_range.0..mu_range.1);
                sigma[(i, j)] = s;
                sigma[(j, i)] = s;
                mu[(i, j)] = m;
                mu[(j, i)] = m;
            }
        }
        let spec = MaterialSpec::new(sigma, mu)?;
        let Ok((gamma, beta)) = suggest_scales(&spec) else {
            continue;
        };
        let coeffs = compute_coefficients(&spec, gamma, beta)?;
        if validate(&spec, &coeffs).all_pass() {
            return Ok((spec, coeffs));
        }
    }
    Err(Error::InadmissibleMaterial {
        reason: format!("no admissible material found in {ATTEMPTS} draws"),
        report: None,
    })
}

/// Random oracle case on `sizes` with `num_phases` phases; `h` puts
/// `sqrt(beta h)` at 1.5 grid spacings.
pub fn random_case(rng: &mut impl Rng, sizes: &[usize], num_phases: usize) -> Result<OracleCase> {
    let grid = GridSpec::small(sizes)?;
    let (_, coeffs) = random_material(rng, num_phases, (0.5, 1.5), (0.5, 2.0))?;
    let h = (1.5 * grid.max_spacing()).powi(2) / coeffs.beta;
    let labels = (0..grid.len())
        .map(|_| rng.random_range(0..num_phases) as u8)
        .collect();
    OracleCase::new(LabelField::new(grid, num_phases, labels)?, coeffs, h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub cases: usize,
    pub failures: usize,
    pub max_gap: f64,
}

impl std::fmt::Display for OracleSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "cases={} failures={} max_gap={:.3e}",
            self.cases, self.failures, self.max_gap
        )
    }
}

/// Runs `cases` random cases; case `k` draws from its own stream `seed + k`,
/// so the result does not depend on scheduling.
pub fn run_suite(
    cases: usize,
    sizes: &[usize],
    num_phases: usize,
    seed: u64,
) -> Result<(OracleSummary, Vec<OracleVerdict>)> {
    use rand::SeedableRng;
    let verdicts = (0..cases)
        .into_par_iter()
        .map(|k| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            exhaustive_minimize(&random_case(&mut rng, sizes, num_phases)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = OracleSummary {
        cases,
        failures: verdicts.iter().filter(|v| !v.is_minimizer).count(),
        max_gap: verdicts.iter().map(|v| v.gap).fold(0.0, f64::max),
    };
    Ok((summary, verdicts))
}
