//! Composite creation/annihilation operators, the deviation operators
//! `Delta` and `epsilon`, ladder states, and number operators.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::dsf::{rational_to_f64, StructureFunctionSpec};
use crate::error::{Error, Result};
use crate::fock::{is_fermionic, number_operator_mode, Constituents, Family, FockSpace, SparseOperator};
use crate::phi::{deformation_parameter, one_hot_position, CMatrix, PhiFamily};
use crate::residual::ResidualSet;
use crate::sparse::{inner, vec_norm, CsrMatrix};

/// Default Gram-eigenvalue threshold, relative to the largest eigenvalue of
/// a level.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Pass threshold of the chi checks evaluated in floating point.
const CHI_TOL: f64 = 1e-10;

/// `A^dag_alpha` and its adjoint.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub alpha: usize,
    pub a: SparseOperator,
    pub a_dag: SparseOperator,
}

/// Builds composite operators on one space, reusing the constituent
/// ladder operators.
#[derive(Debug, Clone)]
pub struct Assembler<'s> {
    space: &'s FockSpace,
    cons: Constituents,
}

impl<'s> Assembler<'s> {
    pub fn new(space: &'s FockSpace) -> Result<Self> {
        Ok(Self { space, cons: Constituents::new(space)? })
    }

    pub fn space(&self) -> &'s FockSpace {
        self.space
    }

    pub fn constituents(&self) -> &Constituents {
        &self.cons
    }

    fn check_shape(&self, phi: &CMatrix) -> Result<()> {
        let spec = self.space.spec();
        if phi.nrows() != spec.d_a || phi.ncols() != spec.d_b {
            return Err(Error::Contract(format!(
                "Phi is {}x{} but the space has d_a = {}, d_b = {}",
                phi.nrows(),
                phi.ncols(),
                spec.d_a,
                spec.d_b
            )));
        }
        Ok(())
    }

    /// `sum_ij coeff(i, j) left_i right_j`, skipping vanishing coefficients.
    fn bilinear(
        &self,
        left: &[SparseOperator],
        right: &[SparseOperator],
        coeff: impl Fn(usize, usize) -> Complex64,
    ) -> CsrMatrix {
        let one = Complex64::new(1.0, 0.0);
        let mut acc = CsrMatrix::zeros(self.space.dim());
        for (i, l) in left.iter().enumerate() {
            for (j, r) in right.iter().enumerate() {
                let c = coeff(i, j);
                if c == Complex64::zero() {
                    continue;
                }
                acc = acc.lincomb(one, &l.matrix().matmul(r.matrix()), c);
            }
        }
        acc
    }

    /// `A^dag = sum Phi^{mu nu} a^dag_mu b^dag_nu`.
    pub fn pair(&self, phi: &CMatrix, alpha: usize) -> Result<OperatorPair> {
        self.check_shape(phi)?;
        let m = self.bilinear(&self.cons.a_dag, &self.cons.b_dag, |mu, nu| phi[(mu, nu)]);
        let a_dag = self.space.wrap(m, Some(format!("A{}^dag", alpha + 1)));
        let a = a_dag.adjoint().named(format!("A{}", alpha + 1));
        Ok(OperatorPair { alpha, a, a_dag })
    }

    pub fn pairs(&self, family: &PhiFamily) -> Result<Vec<OperatorPair>> {
        family
            .matrices()
            .iter()
            .enumerate()
            .map(|(alpha, phi)| self.pair(phi, alpha))
            .collect()
    }

    fn require_fermionic(&self, what: &str) -> Result<()> {
        if !is_fermionic(self.space.q()) {
            return Err(Error::Contract(format!(
                "{what} is defined for q = 1 constituents only (q = {}); compute [A_a, A_b^dag] directly instead",
                self.space.q()
            )));
        }
        Ok(())
    }

    /// `Delta_ab = sum conj(Phi_a^{mu nu}) Phi_b^{mu' nu} a^dag_mu' a_mu
    ///           + sum conj(Phi_a^{mu nu}) Phi_b^{mu nu'} b^dag_nu' b_nu`.
    pub fn delta(&self, phi_a: &CMatrix, phi_b: &CMatrix) -> Result<SparseOperator> {
        self.require_fermionic("Delta")?;
        self.check_shape(phi_a)?;
        self.check_shape(phi_b)?;
        let k_a = phi_b * phi_a.adjoint();
        let k_b = phi_b.transpose() * phi_a.conjugate();
        let part_a = self.bilinear(&self.cons.a_dag, &self.cons.a, |i, j| k_a[(i, j)]);
        let part_b = self.bilinear(&self.cons.b_dag, &self.cons.b, |i, j| k_b[(i, j)]);
        Ok(self.space.wrap(part_a.add(&part_b), Some("Delta".into())))
    }

    /// `epsilon = 1 - Delta_aa = [A, A^dag]`.
    pub fn epsilon(&self, phi: &CMatrix) -> Result<SparseOperator> {
        let d = self.delta(phi, phi)?;
        Ok(d.scale_re(-1.0).shift(Complex64::new(1.0, 0.0)).named("epsilon"))
    }

    /// `N = Delta / f`, the number operator for fermionic constituents.
    pub fn number_q1(&self, phi: &CMatrix) -> Result<SparseOperator> {
        let f = deformation_parameter(phi).f;
        if f.abs() < 1e-12 {
            return Err(Error::Domain("f = 0: no number operator Delta/f".into()));
        }
        Ok(self.delta(phi, phi)?.scale_re(1.0 / f).named("N"))
    }

    /// Occupancy of the `a` constituent at the one-hot position of `phi`.
    pub fn number_qlt1(&self, phi: &CMatrix) -> Result<SparseOperator> {
        if is_fermionic(self.space.q()) {
            return Err(Error::Contract("constituent-count number operator needs q < 1".into()));
        }
        self.check_shape(phi)?;
        let (mu, _) = one_hot_position(phi)
            .ok_or_else(|| Error::Contract("constituent-count number operator needs a one-hot Phi".into()))?;
        Ok(number_operator_mode(self.space, Family::A, mu)?.named("N"))
    }

    /// Total `a`-constituent count over the rows `phi` touches; the number
    /// of pairs on states built from this mode alone.
    pub fn pair_count(&self, phi: &CMatrix) -> Result<SparseOperator> {
        self.check_shape(phi)?;
        let mut acc = self.space.zero_operator();
        for mu in 0..phi.nrows() {
            if (0..phi.ncols()).any(|nu| phi[(mu, nu)] != Complex64::zero()) {
                acc = &acc + &number_operator_mode(self.space, Family::A, mu)?;
            }
        }
        Ok(acc.named("N"))
    }
}

pub fn build_quasiboson(space: &FockSpace, phi: &CMatrix) -> Result<OperatorPair> {
    Assembler::new(space)?.pair(phi, 0)
}

pub fn delta_operator(space: &FockSpace, phi_a: &CMatrix, phi_b: &CMatrix) -> Result<SparseOperator> {
    Assembler::new(space)?.delta(phi_a, phi_b)
}

pub fn epsilon_operator(space: &FockSpace, phi: &CMatrix) -> Result<SparseOperator> {
    Assembler::new(space)?.epsilon(phi)
}

pub fn number_operator_q1(space: &FockSpace, phi: &CMatrix) -> Result<SparseOperator> {
    Assembler::new(space)?.number_q1(phi)
}

pub fn number_operator_qlt1(space: &FockSpace, phi: &CMatrix) -> Result<SparseOperator> {
    Assembler::new(space)?.number_qlt1(phi)
}

/// One product `A^dag_{g1} ... A^dag_{gn} |O>`.
#[derive(Debug, Clone)]
pub struct LadderState {
    /// Nondecreasing mode labels `g1 <= ... <= gn`.
    pub word: Vec<usize>,
    pub vector: Vec<Complex64>,
    pub norm: f64,
    /// Vanishes within the rank tolerance (Pauli blocking).
    pub null: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderLevel {
    pub n: usize,
    pub size: usize,
    pub rank: usize,
    pub max_eigenvalue: f64,
}

impl LadderLevel {
    pub fn is_null(&self) -> bool {
        self.rank == 0
    }
}

#[derive(Debug, Clone)]
pub struct LadderBasis {
    pub states: Vec<LadderState>,
    pub levels: Vec<LadderLevel>,
    pub rank_tol: f64,
}

impl LadderBasis {
    pub fn level(&self, n: usize) -> impl Iterator<Item = &LadderState> {
        self.states.iter().filter(move |s| s.word.len() == n)
    }

    pub fn live(&self) -> impl Iterator<Item = &LadderState> {
        self.states.iter().filter(|s| !s.null)
    }
}

/// Largest ladder level whose states keep every occupancy within the
/// interior of the space, or `None` if unlimited (q = 1).
pub fn interior_level_bound(space: &FockSpace) -> Option<usize> {
    if is_fermionic(space.q()) {
        None
    } else {
        Some(space.cutoff() as usize - 1)
    }
}

/// Errors unless levels up to `n_max` (and one more for `A A^dag`) stay
/// inside the truncation.
pub fn check_interior(space: &FockSpace, n_max: usize) -> Result<()> {
    match interior_level_bound(space) {
        Some(bound) if n_max > bound => Err(Error::Contract(format!(
            "n_max = {n_max} needs cutoff >= {} (have {})",
            n_max + 1,
            space.cutoff()
        ))),
        _ => Ok(()),
    }
}

/// All nondecreasing words of length `n` over `0..modes`, in lexicographic order.
pub fn words(modes: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(modes: usize, n: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for g in start..modes {
            cur.push(g);
            rec(modes, n, g, cur, out);
            cur.pop();
        }
    }
    if modes > 0 || n == 0 {
        rec(modes, n, 0, &mut cur, &mut out);
    }
    out
}

/// Hermitian Gram matrix eigenvalues, ascending.
fn gram_eigenvalues(vectors: &[&[Complex64]]) -> Vec<f64> {
    let k = vectors.len();
    if k == 0 {
        return Vec::new();
    }
    let g = DMatrix::from_fn(k, k, |i, j| inner(vectors[i], vectors[j]));
    let mut ev: Vec<f64> = g.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn ladder_basis(
    space: &FockSpace,
    pairs: &[OperatorPair],
    n_max: usize,
    rank_tol: f64,
) -> Result<LadderBasis> {
    check_interior(space, n_max)?;
    let mut states: Vec<LadderState> = Vec::new();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut levels = Vec::new();
    for n in 0..=n_max {
        let level_start = states.len();
        for word in words(pairs.len(), n) {
            let vector = if n == 0 {
                space.vacuum()
            } else {
                let tail = &states[index[&word[1..]]].vector;
                pairs[word[0]].a_dag.apply(tail)
            };
            let norm = vec_norm(&vector);
            index.insert(word.clone(), states.len());
            states.push(LadderState { word, vector, norm, null: false });
        }
        let level = &mut states[level_start..];
        let eig = gram_eigenvalues(&level.iter().map(|s| s.vector.as_slice()).collect::<Vec<_>>());
        let max_eigenvalue = eig.last().copied().unwrap_or(0.0).max(0.0);
        let floor = rank_tol * max_eigenvalue.max(1.0);
        let rank = eig.iter().filter(|&&e| e > floor).count();
        for s in level.iter_mut() {
            s.null = s.norm * s.norm <= floor;
        }
        levels.push(LadderLevel { n, size: level.len(), rank, max_eigenvalue });
    }
    Ok(LadderBasis { states, levels, rank_tol })
}

fn bracket_pair(values: &[f64], k: usize) -> (f64, f64) {
    (values[k], values[k + 1])
}

/// Smallest `k` with `(phi(k), phi(k+1)) = (x, y)`; the chi of an
/// oscillator whose structure function is only known by its values.
fn lookup_chi(values: &[f64], x: f64, y: f64) -> Option<usize> {
    (0..values.len() - 1).find(|&k| {
        let (a, b) = bracket_pair(values, k);
        (a - x).abs() <= CHI_TOL * (1.0 + x.abs()) && (b - y).abs() <= CHI_TOL * (1.0 + y.abs())
    })
}

/// Roots of `phi(r) = x` for `phi(r) = r (m + 1 - r) / m`, larger first.
fn quadratic_inverse_roots(m: f64, x: f64) -> (f64, f64) {
    let disc = ((m + 1.0) * (m + 1.0) - 4.0 * m * x).max(0.0).sqrt();
    (((m + 1.0) + disc) / 2.0, ((m + 1.0) - disc) / 2.0)
}

fn quadratic(m: f64, r: f64) -> f64 {
    r * (m + 1.0 - r) / m
}

/// Root of `phi(r) = target` whose neighbour `phi(r + shift)` is closest to
/// `companion`.
fn branch_resolved(m: f64, target: f64, shift: f64, companion: f64) -> f64 {
    let (hi, lo) = quadratic_inverse_roots(m, target);
    let miss = |r: f64| (quadratic(m, r + shift) - companion).abs();
    if miss(hi) <= miss(lo) {
        hi
    } else {
        lo
    }
}

/// Residuals of the condition that makes `chi(A^dag A, epsilon)` a number
/// operator. For the fermionic quadratic family: `chi(n - s_n f, 1 - n f) = n`
/// with `s_n = n(n-1)/2`, for the implemented `chi = (1 - y)/f` (exact
/// rationals) and for the inverse-function alternatives. Otherwise: unit
/// differences `chi(phi(n+1), phi(n+2)) - chi(phi(n), phi(n+1)) = 1` for the
/// value-lookup chi.
pub fn check_chi_condition(spec: &StructureFunctionSpec, n_max: u32) -> Result<ResidualSet> {
    spec.validate()?;
    let mut set = ResidualSet::new(
        "quasiboson/chi-condition",
        "chi(A^dag A, epsilon) acts as the level index on ladder states",
    );
    if let StructureFunctionSpec::FermionicQuadratic { m } = spec {
        let m_big = BigRational::from_integer((*m).into());
        let f = BigRational::from_integer(2.into()) / &m_big;
        let one = BigRational::one();
        for n in 0..=n_max {
            let nr = BigRational::from_integer(n.into());
            let sigma = BigRational::from_integer((n * n.saturating_sub(1) / 2).into());
            let x = &nr - &sigma * &f;
            let y = &one - &nr * &f;
            let chi = (&one - &y) / &f;
            let res = rational_to_f64(&(chi - &nr));
            set.push(format!("chi = (1-y)/f, n={n}"), res, 0.0);

            let (xf, yf, mf, nf) = (rational_to_f64(&x), rational_to_f64(&y), *m as f64, n as f64);
            let inv_x = branch_resolved(mf, xf, 1.0, xf + yf);
            let inv_xy = branch_resolved(mf, xf + yf, -1.0, xf) - 1.0;
            set.push(format!("chi = phi^-1(x), n={n}"), inv_x - nf, CHI_TOL);
            set.push(format!("chi = phi^-1(x+y) - 1, n={n}"), inv_xy - nf, CHI_TOL);
            set.push(format!("chi = p-blend p=0.5, n={n}"), 0.5 * inv_x + 0.5 * inv_xy - nf, CHI_TOL);

            let (_, principal) = quadratic_inverse_roots(mf, xf);
            if (principal - nf).abs() > CHI_TOL {
                set.push_structural(
                    format!("phi^-1(x) principal branch, n={n}"),
                    format!(
                        "smaller root {principal} differs from n by {:.3}; phi(r) = phi(m+1-r) needs the companion value to pick the branch",
                        (principal - nf).abs()
                    ),
                );
            }
        }
    } else {
        let top = n_max as usize + 2;
        let values = match spec.max_index() {
            Some(k) if (k as usize) < top => {
                return Err(Error::Range(format!("chi check up to n = {n_max} needs phi up to {top}")))
            }
            _ => spec.table(top as u32)?,
        };
        for n in 0..n_max as usize {
            let lo = lookup_chi(&values, values[n], values[n + 1]);
            let hi = lookup_chi(&values, values[n + 1], values[n + 2]);
            let label = format!("chi difference, n={n}");
            match (lo, hi) {
                (Some(a), Some(b)) => {
                    set.push(label, b as f64 - a as f64 - 1.0, CHI_TOL);
                }
                _ => set.push_failure(label, "value pair not found in table"),
            }
        }
    }
    Ok(set)
}
