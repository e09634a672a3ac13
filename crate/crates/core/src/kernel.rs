//! Kernel synthesis: surface tensions and mobilities to two-Gaussian kernel
//! coefficients, plus the admissibility checks the scheme depends on.
//!
//! For every pair `i != j` the kernel is `K_ij = a_ij G_gamma + b_ij G_beta`,
//! with `(a_ij, b_ij)` the unique solution of
//!
//! ```text
//! sigma_ij  = a_ij sqrt(gamma)/sqrt(pi)      + b_ij sqrt(beta)/sqrt(pi)
//! 1/mu_ij   = a_ij /(sqrt(pi) sqrt(gamma))   + b_ij /(sqrt(pi) sqrt(beta))
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Minimal eigenvalue (on the complement of constants) that counts as strictly positive.
pub const EIGEN_TOL: f64 = 1e-10;

const SYMMETRY_RTOL: f64 = 1e-12;

/// Dense row-major `N x N` matrix indexed by phase pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl PhaseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds from nested rows; fails unless the input is square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != n) {
            return Err(Error::Dimension(format!(
                "row {r} has {} entries, expected {n}",
                row.len()
            )));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// `P M P^T` for the relabeling `new index = perm[old index]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(perm[i], perm[j])] = self[(i, j)];
            }
        }
        out
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

impl Index<(usize, usize)> for PhaseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for PhaseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Surface tensions `sigma` and mobilities `mu` of an `N`-phase system.
///
/// Both matrices are symmetric with zero diagonal and strictly positive
/// off-diagonal entries. The inverse-mobility matrix uses the convention
/// `(1/mu)_ii = 0`. Triangle-inequality admissibility is reported, not enforced,
/// see [`MaterialSpec::sigma_triangle`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSpec {
    sigma: PhaseMatrix,
    mu: PhaseMatrix,
}

impl MaterialSpec {
    pub fn new(sigma: PhaseMatrix, mu: PhaseMatrix) -> Result<Self> {
        let n = sigma.size();
        if n < 2 {
            return Err(Error::Dimension(format!("need at least 2 phases, got {n}")));
        }
        if mu.size() != n {
            return Err(Error::Dimension(format!(
                "sigma is {n}x{n} but mu is {m}x{m}",
                m = mu.size()
            )));
        }
        check_material_matrix("sigma", &sigma)?;
        check_material_matrix("mu", &mu)?;
        Ok(Self { sigma, mu })
    }

    pub fn from_rows(sigma: &[Vec<f64>], mu: &[Vec<f64>]) -> Result<Self> {
        Self::new(PhaseMatrix::from_rows(sigma)?, PhaseMatrix::from_rows(mu)?)
    }

    /// All pairs share the same tension and mobility.
    pub fn uniform(num_phases: usize, sigma: f64, mu: f64) -> Result<Self> {
        let off = |v: f64| move |i: usize, j: usize| if i == j { 0.0 } else { v };
        Self::new(
            PhaseMatrix::from_fn(num_phases, off(sigma)),
            PhaseMatrix::from_fn(num_phases, off(mu)),
        )
    }

    pub fn num_phases(&self) -> usize {
        self.sigma.size()
    }

    pub fn sigma(&self) -> &PhaseMatrix {
        &self.sigma
    }

    pub fn mu(&self) -> &PhaseMatrix {
        &self.mu
    }

    /// Entrywise inverse mobilities with zero diagonal.
    pub fn inv_mu(&self) -> PhaseMatrix {
        PhaseMatrix::from_fn(self.num_phases(), |i, j| {
            if i == j {
                0.0
            } else {
                1.0 / self.mu[(i, j)]
            }
        })
    }

    pub fn sigma_triangle(&self) -> TriangleCheck {
        TriangleCheck::of(&self.sigma)
    }

    pub fn inv_mu_triangle(&self) -> TriangleCheck {
        TriangleCheck::of(&self.inv_mu())
    }

    /// Relabels phases: old phase `k` becomes `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            sigma: self.sigma.permuted(perm),
            mu: self.mu.permuted(perm),
        }
    }

    fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.num_phases();
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    fn sigma_mu_range(&self) -> (f64, f64) {
        self.off_diagonal()
            .map(|(i, j)| self.sigma[(i, j)] * self.mu[(i, j)])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }
}

fn check_material_matrix(name: &'static str, m: &PhaseMatrix) -> Result<()> {
    let n = m.size();
    for i in 0..n {
        let d = m[(i, i)];
        if d != 0.0 {
            return Err(Error::MaterialEntry {
                name,
                i,
                j: i,
                value: d,
                reason: "diagonal must be zero",
            });
        }
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = m[(i, j)];
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::MaterialEntry {
                    name,
                    i,
                    j,
                    value: v,
                    reason: "off-diagonal entries must be positive and finite",
                });
            }
            let w = m[(j, i)];
            if (v - w).abs() > SYMMETRY_RTOL * v.abs().max(w.abs()) {
                return Err(Error::Asymmetric {
                    name,
                    i,
                    j,
                    a: v,
                    b: w,
                });
            }
        }
    }
    Ok(())
}

/// Strict triangle inequality `m_ik + m_kj > m_ij` over all distinct triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleCheck {
    pub pass: bool,
    /// Smallest `m_ik + m_kj - m_ij`; `+inf` when there is no distinct triple.
    pub min_margin: f64,
    /// Largest `m_ik + m_kj - m_ij`; `-inf` when there is no distinct triple.
    pub max_margin: f64,
    /// Triple `(i, k, j)` attaining the minimal margin.
    pub worst: Option<(usize, usize, usize)>,
}

impl TriangleCheck {
    pub fn of(m: &PhaseMatrix) -> Self {
        let n = m.size();
        let mut min_margin = f64::INFINITY;
        let mut max_margin = f64::NEG_INFINITY;
        let mut worst = None;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    let margin = m[(i, k)] + m[(k, j)] - m[(i, j)];
                    if margin < min_margin {
                        min_margin = margin;
                        worst = Some((i, k, j));
                    }
                    max_margin = max_margin.max(margin);
                }
            }
        }
        Self {
            pass: min_margin > 0.0,
            min_margin,
            max_margin,
            worst,
        }
    }
}

/// Gaussian time scales and the pairwise weights of the two-Gaussian kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCoefficients {
    pub gamma: f64,
    pub beta: f64,
    pub a: PhaseMatrix,
    pub b: PhaseMatrix,
}

impl KernelCoefficients {
    pub fn num_phases(&self) -> usize {
        self.a.size()
    }

    /// `sigma_ij` recovered from `(a_ij, b_ij)` through the linear system.
    pub fn reconstructed_sigma(&self, i: usize, j: usize) -> f64 {
        (self.a[(i, j)] * self.gamma.sqrt() + self.b[(i, j)] * self.beta.sqrt()) / PI.sqrt()
    }

    /// `1/mu_ij` recovered from `(a_ij, b_ij)` through the linear system.
    pub fn reconstructed_inv_mu(&self, i: usize, j: usize) -> f64 {
        (self.a[(i, j)] / self.gamma.sqrt() + self.b[(i, j)] / self.beta.sqrt()) / PI.sqrt()
    }

    /// Total mass `a_ij + b_ij` of `K_ij` (both Gaussians integrate to one).
    pub fn kernel_mass(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)] + self.b[(i, j)]
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            gamma: self.gamma,
            beta: self.beta,
            a: self.a.permuted(perm),
            b: self.b.permuted(perm),
        }
    }
}

/// Solves the two-by-two system for every pair.
pub fn compute_coefficients(
    spec: &MaterialSpec,
    gamma: f64,
    beta: f64,
) -> Result<KernelCoefficients> {
    if !(gamma.is_finite() && beta.is_finite() && beta > 0.0 && gamma > beta) {
        return Err(Error::ScaleOrder { gamma, beta });
    }
    let n = spec.num_phases();
    let sqrt_pi = PI.sqrt();
    let denom = gamma - beta;
    let inv_mu = spec.inv_mu();
    let a = PhaseMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            sqrt_pi * gamma.sqrt() / denom * (spec.sigma[(i, j)] - beta * inv_mu[(i, j)])
        }
    });
    let b = PhaseMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            sqrt_pi * beta.sqrt() / denom * (gamma * inv_mu[(i, j)] - spec.sigma[(i, j)])
        }
    });
    Ok(KernelCoefficients { gamma, beta, a, b })
}

/// Smallest eigenvalue of `-m` restricted to the complement of constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinitenessCheck {
    pub pass: bool,
    pub min_eigenvalue: f64,
}

impl DefinitenessCheck {
    fn of_negated(m: &PhaseMatrix) -> Self {
        let min_eigenvalue = conditional_eigenvalues(&negated(m))
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        Self {
            pass: min_eigenvalue > EIGEN_TOL,
            min_eigenvalue,
        }
    }
}

fn negated(m: &PhaseMatrix) -> PhaseMatrix {
    PhaseMatrix::from_fn(m.size(), |i, j| -m[(i, j)])
}

/// Orthonormal basis of `(1, ..., 1)^perp` (Helmert vectors), as columns.
pub fn constant_complement_basis(n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n - 1);
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for r in 0..k {
            q[(r, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    q
}

/// The `N - 1` eigenvalues of `J M J` belonging to `(1, ..., 1)^perp`,
/// sorted ascending. `J M J` and `Q^T M Q` share them for the Helmert basis `Q`.
pub fn conditional_eigenvalues(m: &PhaseMatrix) -> Vec<f64> {
    let q = constant_complement_basis(m.size());
    let restricted = q.transpose() * m.to_dmatrix() * &q;
    let mut eig: Vec<f64> = SymmetricEigen::new(restricted)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Kernel Fourier positivity: `gamma > max sigma mu` and `beta < min sigma mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCheck {
    pub pass: bool,
    pub gamma_lower_bound: f64,
    pub beta_upper_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeCoefficient {
    pub matrix: char,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub triangle_a: TriangleCheck,
    pub triangle_b: TriangleCheck,
    pub posdef_a: DefinitenessCheck,
    pub posdef_b: DefinitenessCheck,
    pub fourier_positive: FourierCheck,
    /// Warnings only.
    pub coefficient_signs: Vec<NegativeCoefficient>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.triangle_a.pass
            && self.triangle_b.pass
            && self.posdef_a.pass
            && self.posdef_b.pass
            && self.fourier_positive.pass
    }

    /// Required for the distance to be a metric and the scheme to be variational.
    pub fn definiteness_pass(&self) -> bool {
        self.posdef_a.pass && self.posdef_b.pass
    }
}

fn pass_str(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, check) in [("triangle_a", &self.triangle_a), ("triangle_b", &self.triangle_b)] {
            write!(f, "{name} {} margin={:.6e}", pass_str(check.pass), check.min_margin)?;
            if let Some((i, k, j)) = check.worst {
                write!(f, " worst=({i},{k},{j})")?;
            }
            writeln!(f)?;
        }
        for (name, check) in [("posdef_a", &self.posdef_a), ("posdef_b", &self.posdef_b)] {
            writeln!(
                f,
                "{name} {} margin={:.6e}",
                pass_str(check.pass),
                check.min_eigenvalue
            )?;
        }
        let fc = &self.fourier_positive;
        writeln!(
            f,
            "fourier_positive {} gamma_bound={:.6e} beta_bound={:.6e}",
            pass_str(fc.pass),
            fc.gamma_lower_bound,
            fc.beta_upper_bound
        )?;
        if self.coefficient_signs.is_empty() {
            write!(f, "coefficient_signs PASS negative=0")
        } else {
            write!(
                f,
                "coefficient_signs WARN negative={}",
                self.coefficient_signs.len()
            )?;
            for c in &self.coefficient_signs {
                write!(f, " {}[{}][{}]={:.6e}", c.matrix, c.i, c.j, c.value)?;
            }
            Ok(())
        }
    }
}

/// Runs every admissibility check by direct computation.
pub fn validate(spec: &MaterialSpec, coeffs: &KernelCoefficients) -> ValidationReport {
    let (min_sm, max_sm) = spec.sigma_mu_range();
    let n = spec.num_phases();
    let mut coefficient_signs = Vec::new();
    for (name, m) in [('a', &coeffs.a), ('b', &coeffs.b)] {
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)] < 0.0 {
                    coefficient_signs.push(NegativeCoefficient {
                        matrix: name,
                        i,
                        j,
                        value: m[(i, j)],
                    });
                }
            }
        }
    }
    ValidationReport {
        triangle_a: TriangleCheck::of(&coeffs.a),
        triangle_b: TriangleCheck::of(&coeffs.b),
        posdef_a: DefinitenessCheck::of_negated(&coeffs.a),
        posdef_b: DefinitenessCheck::of_negated(&coeffs.b),
        fourier_positive: FourierCheck {
            pass: coeffs.gamma > max_sm && coeffs.beta < min_sm,
            gamma_lower_bound: max_sm,
            beta_upper_bound: min_sm,
        },
        coefficient_signs,
    }
}

/// The coefficient conditions the scheme itself relies on: strict triangle
/// inequality for `a` and `b`, and conditional positive definiteness of
/// `A = (-a_ij)` and `B = (-b_ij)`.
pub fn check_scheme_coefficients(coeffs: &KernelCoefficients) -> Result<()> {
    let mut failures = Vec::new();
    for (name, check) in [
        ("triangle_a", TriangleCheck::of(&coeffs.a)),
        ("triangle_b", TriangleCheck::of(&coeffs.b)),
    ] {
        if !check.pass {
            failures.push(format!("{name} margin={:.3e}", check.min_margin));
        }
    }
    for (name, check) in [
        ("posdef_a", DefinitenessCheck::of_negated(&coeffs.a)),
        ("posdef_b", DefinitenessCheck::of_negated(&coeffs.b)),
    ] {
        if !check.pass {
            failures.push(format!("{name} min_eigenvalue={:.3e}", check.min_eigenvalue));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::InadmissibleCoefficients(failures.join(", ")))
    }
}

/// Admissible `(gamma, beta)` two-fold beyond the sufficient bounds.
///
/// With `m`, `M` the extreme triangle margins, the bounds are
/// `beta < m_sigma / M_{1/mu}` and `gamma > M_sigma / m_{1/mu}`, combined with the
/// Fourier positivity bounds `gamma > max sigma mu`, `beta < min sigma mu`.
/// Two-phase systems have no triples and only the Fourier bounds bind.
pub fn suggest_scales(spec: &MaterialSpec) -> Result<(f64, f64)> {
    let (min_sm, max_sm) = spec.sigma_mu_range();
    let mut gamma_bound = max_sm;
    let mut beta_bound = min_sm;
    if spec.num_phases() >= 3 {
        let ts = spec.sigma_triangle();
        let tm = spec.inv_mu_triangle();
        if ts.min_margin <= 0.0 {
            return Err(Error::InadmissibleMaterial {
                reason: format!(
                    "surface tensions violate the strict triangle inequality (m_sigma = {})",
                    ts.min_margin
                ),
                report: None,
            });
        }
        if tm.min_margin <= 0.0 {
            return Err(Error::InadmissibleMaterial {
                reason: format!(
                    "inverse mobilities violate the strict triangle inequality (m_1/mu = {})",
                    tm.min_margin
                ),
                report: None,
            });
        }
        gamma_bound = gamma_bound.max(ts.max_margin / tm.min_margin);
        beta_bound = beta_bound.min(ts.min_margin / tm.max_margin);
    }
    let gamma = 2.0 * gamma_bound;
    let beta = 0.5 * beta_bound;
    let coeffs = compute_coefficients(spec, gamma, beta)?;
    let report = validate(spec, &coeffs);
    if !report.all_pass() {
        return Err(Error::InadmissibleMaterial {
            reason: format!("validation fails at suggested scales gamma={gamma}, beta={beta}"),
            report: Some(Box::new(report)),
        });
    }
    Ok((gamma, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, rtol: f64) -> bool {
        (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1e-300)
    }

    fn three_phase(s: [f64; 3], m: [f64; 3]) -> MaterialSpec {
        // entries ordered (01, 02, 12)
        let mat = |v: [f64; 3]| {
            vec![
                vec![0.0, v[0], v[1]],
                vec![v[0], 0.0, v[2]],
                vec![v[1], v[2], 0.0],
            ]
        };
        MaterialSpec::from_rows(&mat(s), &mat(m)).unwrap()
    }

    #[test]
    fn uniform_unit_material_coefficients() {
        let spec = MaterialSpec::uniform(3, 1.0, 1.0).unwrap();
        let c = compute_coefficients(&spec, 4.0, 0.25).unwrap();
        let expected = 0.4 * PI.sqrt();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(close(c.a[(i, j)], expected, 1e-14));
                    assert!(close(c.b[(i, j)], expected, 1e-14));
                    assert!(close(c.reconstructed_sigma(i, j), 1.0, 1e-12));
                    assert!(close(c.reconstructed_inv_mu(i, j), 1.0, 1e-12));
                } else {
                    assert_eq!(c.a[(i, j)], 0.0);
                    assert_eq!(c.b[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn mobility_two_coefficients() {
        let spec = MaterialSpec::uniform(3, 1.0, 2.0).unwrap();
        let c = compute_coefficients(&spec, 4.0, 0.25).unwrap();
        assert!(close(c.a[(0, 1)], 7.0 / 15.0 * PI.sqrt(), 1e-14));
        assert!(close(c.b[(0, 1)], 2.0 / 15.0 * PI.sqrt(), 1e-14));
        assert!((c.a[(0, 1)] - 0.82720).abs() < 1e-4);
        assert!((c.b[(0, 1)] - 0.23633).abs() < 1e-5);
        assert!(close(c.reconstructed_sigma(1, 2), 1.0, 1e-12));
        assert!(close(c.reconstructed_inv_mu(1, 2), 0.5, 1e-12));
    }

    #[test]
    fn equal_scales_rejected() {
        let spec = MaterialSpec::uniform(3, 1.0, 1.0).unwrap();
        assert!(matches!(
            compute_coefficients(&spec, 1.0, 1.0),
            Err(Error::ScaleOrder { .. })
        ));
        assert!(matches!(
            compute_coefficients(&spec, 0.5, 1.0),
            Err(Error::ScaleOrder { .. })
        ));
    }

    #[test]
    fn malformed_materials_rejected() {
        let asym = MaterialSpec::from_rows(
            &[vec![0.0, 1.0], vec![1.5, 0.0]],
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
        );
        assert!(matches!(asym, Err(Error::Asymmetric { name: "sigma", .. })));
        let ragged = MaterialSpec::from_rows(
            &[vec![0.0, 1.0], vec![1.0]],
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
        );
        assert!(matches!(ragged, Err(Error::Dimension(_))));
        let mismatch = MaterialSpec::from_rows(
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
            &[vec![0.0]],
        );
        assert!(matches!(mismatch, Err(Error::Dimension(_))));
        let diag = MaterialSpec::from_rows(
            &[vec![1.0, 1.0], vec![1.0, 0.0]],
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
        );
        assert!(matches!(diag, Err(Error::MaterialEntry { .. })));
    }

    #[test]
    fn uniform_validation_passes() {
        let spec = MaterialSpec::uniform(3, 1.0, 1.0).unwrap();
        let c = compute_coefficients(&spec, 4.0, 0.25).unwrap();
        let r = validate(&spec, &c);
        assert!(r.all_pass(), "{r}");
        // -A = 0.4 sqrt(pi) (11^T - I); on 1^perp it acts as 0.4 sqrt(pi) * I.
        assert!(close(r.posdef_a.min_eigenvalue, 0.4 * PI.sqrt(), 1e-12));
        assert!(r.coefficient_signs.is_empty());
    }

    #[test]
    fn wetting_material_fails_triangles_for_all_scales() {
        let spec = three_phase([1.0, 1.0, 2.5], [1.0, 1.0, 1.0]);
        let t = spec.sigma_triangle();
        assert!(!t.pass);
        assert!(close(t.min_margin, -0.5, 1e-14));
        for (gamma, beta) in [(2.0, 0.5), (10.0, 0.01), (100.0, 0.1), (3.0, 2.0)] {
            let c = compute_coefficients(&spec, gamma, beta).unwrap();
            let r = validate(&spec, &c);
            assert!(!r.triangle_a.pass || !r.triangle_b.pass, "{gamma} {beta}");
            // sigma is a positive combination of a and b, so they cannot both
            // satisfy the inequality when sigma does not.
            assert!(!r.all_pass());
        }
        assert!(matches!(
            suggest_scales(&spec),
            Err(Error::InadmissibleMaterial { .. })
        ));
    }

    #[test]
    fn two_phase_checks_reduce_to_signs() {
        let spec = MaterialSpec::uniform(2, 1.0, 3.0).unwrap();
        let c = compute_coefficients(&spec, 6.0, 1.5).unwrap();
        let r = validate(&spec, &c);
        assert!(r.triangle_a.pass && r.triangle_b.pass);
        assert!(r.triangle_a.worst.is_none());
        assert!(close(r.posdef_a.min_eigenvalue, c.a[(0, 1)], 1e-12));
        assert!(close(r.posdef_b.min_eigenvalue, c.b[(0, 1)], 1e-12));
        // beta > sigma mu makes a negative.
        let bad = compute_coefficients(&spec, 6.0, 4.0).unwrap();
        let r = validate(&spec, &bad);
        assert!(!r.posdef_a.pass);
        assert!(!r.fourier_positive.pass);
        assert_eq!(r.coefficient_signs.len(), 1);
        assert_eq!(r.coefficient_signs[0].matrix, 'a');
    }

    #[test]
    fn suggested_scales_examples() {
        let spec = MaterialSpec::uniform(3, 1.0, 1.0).unwrap();
        assert_eq!(suggest_scales(&spec).unwrap(), (2.0, 0.5));
        let spec = MaterialSpec::uniform(2, 1.0, 3.0).unwrap();
        assert_eq!(suggest_scales(&spec).unwrap(), (6.0, 1.5));
        let spec = MaterialSpec::uniform(2, 1.0, 1.0).unwrap();
        assert_eq!(suggest_scales(&spec).unwrap(), (2.0, 0.5));
    }

    #[test]
    fn permutation_conjugates_coefficients() {
        let spec = three_phase([1.0, 1.3, 0.8], [2.0, 0.7, 1.1]);
        let (g, b) = (5.0, 0.2);
        let c = compute_coefficients(&spec, g, b).unwrap();
        let perm = [2, 0, 1];
        let cp = compute_coefficients(&spec.permuted(&perm), g, b).unwrap();
        assert_eq!(cp.a, c.a.permuted(&perm));
        assert_eq!(cp.b, c.b.permuted(&perm));
    }

    #[test]
    fn coefficients_affine_in_sigma() {
        let s1 = three_phase([1.0, 1.3, 0.8], [2.0, 0.7, 1.1]);
        let s2 = three_phase([2.0, 2.6, 1.6], [2.0, 0.7, 1.1]);
        let (g, b) = (5.0, 0.2);
        let c1 = compute_coefficients(&s1, g, b).unwrap();
        let c2 = compute_coefficients(&s2, g, b).unwrap();
        let slope = PI.sqrt() * g.sqrt() / (g - b);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let ds = s2.sigma()[(i, j)] - s1.sigma()[(i, j)];
            assert!(close(c2.a[(i, j)] - c1.a[(i, j)], slope * ds, 1e-12));
            assert!(close(c2.reconstructed_sigma(i, j), 2.0 * c1.reconstructed_sigma(i, j), 1e-12));
        }
    }

    #[test]
    fn eigenvalue_check_agrees_with_random_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(2..6);
            let m = {
                let mut m = PhaseMatrix::zeros(n);
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = rng.random_range(-0.5..2.0);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                m
            };
            let check = DefinitenessCheck::of_negated(&m);
            let q = constant_complement_basis(n);
            let neg = negated(&m).to_dmatrix();
            let mut min_form = f64::INFINITY;
            for _ in 0..10_000 {
                let w = nalgebra::DVector::from_fn(n - 1, |_, _| rng.random_range(-1.0..1.0));
                let v = &q * w;
                let v = &v / v.norm();
                min_form = min_form.min(v.dot(&(&neg * &v)));
            }
            // Sampled minimum bounds the smallest eigenvalue from above.
            assert!(min_form >= check.min_eigenvalue - 1e-10);
            if check.min_eigenvalue.abs() > 1e-3 {
                assert_eq!(min_form > EIGEN_TOL, check.pass, "n={n} {min_form} {check:?}");
            }
        }
    }
}
