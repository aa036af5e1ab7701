//! Truncated Fock spaces for two mutually anticommuting families of
//! q-fermion modes, and their ladder operators as explicit matrices.
//!
//! Modes are laid out on one canonical chain `a_1 .. a_{d_a}, b_1 .. b_{d_b}`.
//! A single-mode operator is dressed with the parity string
//! `prod (-1)^{n_i}` over every mode earlier in the chain, which makes
//! operators of distinct modes anticommute regardless of family.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::residual::ResidualSet;
use crate::sparse::CsrMatrix;

/// Default upper bound on the total Fock dimension.
pub const DEFAULT_DIM_CAP: usize = 1_000_000;

/// Tolerance used when comparing the deformation parameter to 1.
const Q_ONE_EPS: f64 = 1e-15;

/// `[n]_{-q} = (1 - (-q)^n) / (1 + q)`, the q-fermion structure function.
pub fn q_bracket(n: u32, q: f64) -> Result<f64> {
    check_q(q)?;
    let n = i32::try_from(n).map_err(|_| Error::Range(format!("bracket index {n} too large")))?;
    Ok((1.0 - (-q).powi(n)) / (1.0 + q))
}

/// `prod_{j=1..k} [j]_{-q}`, the squared norm of `(a^dag)^k |0>`.
pub fn ladder_norm_sq(k: u32, q: f64) -> Result<f64> {
    (1..=k).try_fold(1.0, |acc, j| Ok(acc * q_bracket(j, q)?))
}

fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q > -1.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("deformation q = {q} outside (-1, 1]")))
    }
}

/// True when `q` is the undeformed fermionic point.
pub fn is_fermionic(q: f64) -> bool {
    (q - 1.0).abs() <= Q_ONE_EPS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    A,
    B,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::A => write!(f, "a"),
            Family::B => write!(f, "b"),
        }
    }
}

/// Mode content and truncation of a two-family q-fermion space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub d_a: usize,
    pub d_b: usize,
    pub q: f64,
    /// Maximum occupancy per mode.
    pub cutoff: u32,
}

impl ModeSpec {
    /// Validates the mode layout. At `q = 1` the cutoff is forced to 1,
    /// since higher occupancies vanish identically.
    pub fn new(d_a: usize, d_b: usize, q: f64, cutoff: u32) -> Result<Self> {
        let spec = Self { d_a, d_b, q, cutoff };
        spec.validated()
    }

    /// Re-checks a spec that may have come from deserialization.
    pub fn validated(mut self) -> Result<Self> {
        if self.d_a == 0 || self.d_b == 0 {
            return Err(Error::Domain(format!(
                "need at least one mode per family, got d_a = {}, d_b = {}",
                self.d_a, self.d_b
            )));
        }
        if self.cutoff == 0 {
            return Err(Error::Domain("cutoff must be at least 1".into()));
        }
        check_q(self.q)?;
        if is_fermionic(self.q) {
            self.q = 1.0;
            self.cutoff = 1;
        }
        Ok(self)
    }

    pub fn n_modes(&self) -> usize {
        self.d_a + self.d_b
    }

    pub fn is_fermionic(&self) -> bool {
        is_fermionic(self.q)
    }
}

/// Identifies the space an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceId(u64);

impl SpaceId {
    fn of(spec: &ModeSpec) -> Self {
        // FNV-1a over the defining fields
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for word in [spec.d_a as u64, spec.d_b as u64, spec.cutoff as u64, spec.q.to_bits()] {
            for byte in word.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        SpaceId(h)
    }
}

/// Enumerated occupation-number basis of a truncated two-family space.
///
/// Basis states are ordered lexicographically over occupancy tuples with
/// the first mode of the chain most significant.
#[derive(Debug, Clone)]
pub struct FockSpace {
    spec: ModeSpec,
    dim: usize,
    id: SpaceId,
    /// `strides[p]` is the index offset of one quantum in chain position `p`.
    strides: Vec<usize>,
}

impl FockSpace {
    pub fn new(spec: ModeSpec) -> Result<Self> {
        build_space_with_cap(spec, DEFAULT_DIM_CAP)
    }

    pub fn spec(&self) -> &ModeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn q(&self) -> f64 {
        self.spec.q
    }

    pub fn cutoff(&self) -> u32 {
        self.spec.cutoff
    }

    fn local_dim(&self) -> usize {
        self.spec.cutoff as usize + 1
    }

    /// Position of a mode in the canonical chain.
    pub fn chain_position(&self, family: Family, mode: usize) -> Result<usize> {
        let (count, offset) = match family {
            Family::A => (self.spec.d_a, 0),
            Family::B => (self.spec.d_b, self.spec.d_a),
        };
        if mode >= count {
            return Err(Error::Range(format!(
                "mode {family}{mode} out of range (family has {count} modes, indices are 0-based)"
            )));
        }
        Ok(offset + mode)
    }

    pub fn occupancies(&self, index: usize) -> Vec<u32> {
        assert!(index < self.dim, "basis index {index} out of range");
        let base = self.local_dim();
        self.strides
            .iter()
            .map(|&s| ((index / s) % base) as u32)
            .collect()
    }

    pub fn index_of(&self, occupancies: &[u32]) -> Result<usize> {
        if occupancies.len() != self.spec.n_modes() {
            return Err(Error::Range(format!(
                "expected {} occupancies, got {}",
                self.spec.n_modes(),
                occupancies.len()
            )));
        }
        occupancies
            .iter()
            .zip(&self.strides)
            .try_fold(0usize, |acc, (&n, &s)| {
                if n > self.spec.cutoff {
                    Err(Error::Range(format!("occupancy {n} above cutoff {}", self.spec.cutoff)))
                } else {
                    Ok(acc + n as usize * s)
                }
            })
    }

    fn occupancy_at(&self, index: usize, position: usize) -> u32 {
        ((index / self.strides[position]) % self.local_dim()) as u32
    }

    /// Sum of occupancies of the chain positions before `position`.
    fn parity_prefix(&self, index: usize, position: usize) -> u32 {
        (0..position).map(|p| self.occupancy_at(index, p)).sum()
    }

    pub fn vacuum(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim];
        v[0] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn identity(&self) -> SparseOperator {
        self.wrap(CsrMatrix::identity(self.dim), Some("1".into()))
    }

    pub fn zero_operator(&self) -> SparseOperator {
        self.wrap(CsrMatrix::zeros(self.dim), None)
    }

    pub fn wrap(&self, matrix: CsrMatrix, name: Option<String>) -> SparseOperator {
        assert_eq!(matrix.dim(), self.dim, "matrix does not match space dimension");
        SparseOperator { space: self.id, matrix, name }
    }

    /// Flags the basis states whose every occupancy is at most
    /// `cutoff - headroom`. At `q = 1` the truncation is exact and the whole
    /// space is returned.
    pub fn headroom_mask(&self, headroom: u32) -> Vec<bool> {
        if self.spec.is_fermionic() {
            return vec![true; self.dim];
        }
        let top = self.spec.cutoff.saturating_sub(headroom);
        (0..self.dim)
            .map(|i| self.occupancies(i).iter().all(|&n| n <= top))
            .collect()
    }

    /// The interior subspace: all occupancies at most `cutoff - 1`.
    pub fn interior_mask(&self) -> Vec<bool> {
        self.headroom_mask(1)
    }
}

/// Builds the basis for `spec` with the default dimension cap.
pub fn build_space(spec: ModeSpec) -> Result<FockSpace> {
    FockSpace::new(spec)
}

pub fn build_space_with_cap(spec: ModeSpec, cap: usize) -> Result<FockSpace> {
    let spec = spec.validated()?;
    let base = spec.cutoff as usize + 1;
    let n_modes = spec.n_modes();
    let too_big = || Error::Capacity {
        requested: format!("{base}^{n_modes}"),
        cap,
    };
    let exp = u32::try_from(n_modes).map_err(|_| too_big())?;
    let dim = base.checked_pow(exp).ok_or_else(too_big)?;
    if dim > cap {
        return Err(Error::Capacity {
            requested: dim.to_string(),
            cap,
        });
    }
    let strides = (0..n_modes)
        .map(|p| base.pow((n_modes - 1 - p) as u32))
        .collect();
    Ok(FockSpace {
        id: SpaceId::of(&spec),
        spec,
        dim,
        strides,
    })
}

/// A complex sparse matrix bound to a particular Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    space: SpaceId,
    matrix: CsrMatrix,
    name: Option<String>,
}

impl SparseOperator {
    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn same_space(&self, other: &Self) {
        assert_eq!(self.space, other.space, "operators live on different spaces");
    }

    fn with(&self, matrix: CsrMatrix) -> Self {
        Self { space: self.space, matrix, name: None }
    }

    pub fn adjoint(&self) -> Self {
        let name = self.name.as_ref().map(|n| format!("({n})^dag"));
        Self { space: self.space, matrix: self.matrix.adjoint(), name }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.with(self.matrix.scale(s))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.same_space(other);
        self.with(self.matrix.commutator(&other.matrix))
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        self.same_space(other);
        self.with(self.matrix.anticommutator(&other.matrix))
    }

    pub fn pow(&self, k: u32) -> Self {
        self.with(self.matrix.pow(k))
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.matrix.mul_vec(v)
    }

    pub fn restrict_columns(&self, keep: &[bool]) -> Self {
        self.with(self.matrix.restrict_columns(keep))
    }

    pub fn spectral_norm(&self) -> f64 {
        self.matrix.spectral_norm()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.is_zero()
    }

    /// Adds `s` times the identity.
    pub fn shift(&self, s: Complex64) -> Self {
        let id = CsrMatrix::identity(self.dim());
        self.with(self.matrix.lincomb(Complex64::new(1.0, 0.0), &id, s))
    }
}

impl Add for &SparseOperator {
    type Output = SparseOperator;
    fn add(self, rhs: Self) -> SparseOperator {
        self.same_space(rhs);
        self.with(self.matrix.add(&rhs.matrix))
    }
}

impl Sub for &SparseOperator {
    type Output = SparseOperator;
    fn sub(self, rhs: Self) -> SparseOperator {
        self.same_space(rhs);
        self.with(self.matrix.sub(&rhs.matrix))
    }
}

impl Mul for &SparseOperator {
    type Output = SparseOperator;
    fn mul(self, rhs: Self) -> SparseOperator {
        self.same_space(rhs);
        self.with(self.matrix.matmul(&rhs.matrix))
    }
}

/// Creation operator of one mode, with `a^dag |n> = sqrt([n+1]_{-q}) |n+1>`
/// locally and the parity string over all earlier chain positions.
pub fn creation_operator(space: &FockSpace, family: Family, mode: usize) -> Result<SparseOperator> {
    let pos = space.chain_position(family, mode)?;
    let q = space.q();
    let cutoff = space.cutoff();
    let amplitudes = (1..=cutoff)
        .map(|n| q_bracket(n, q).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let stride = space.strides[pos];
    let triplets = (0..space.dim()).filter_map(|col| {
        let n = space.occupancy_at(col, pos);
        if n >= cutoff {
            return None;
        }
        let sign = if space.parity_prefix(col, pos).is_multiple_of(2) { 1.0 } else { -1.0 };
        Some((col + stride, col, Complex64::new(sign * amplitudes[n as usize], 0.0)))
    });
    let matrix = CsrMatrix::from_triplets(space.dim(), triplets);
    Ok(space.wrap(matrix, Some(format!("{family}{mode}^dag"))))
}

pub fn annihilation_operator(space: &FockSpace, family: Family, mode: usize) -> Result<SparseOperator> {
    Ok(creation_operator(space, family, mode)?
        .adjoint()
        .named(format!("{family}{mode}")))
}

/// Diagonal occupancy of one mode.
pub fn number_operator_mode(space: &FockSpace, family: Family, mode: usize) -> Result<SparseOperator> {
    let pos = space.chain_position(family, mode)?;
    let diag: Vec<Complex64> = (0..space.dim())
        .map(|i| Complex64::new(space.occupancy_at(i, pos) as f64, 0.0))
        .collect();
    Ok(space.wrap(CsrMatrix::from_diagonal(&diag), Some(format!("n_{family}{mode}"))))
}

/// Ladder operators of every constituent mode, built once per space.
#[derive(Debug, Clone)]
pub struct Constituents {
    pub a_dag: Vec<SparseOperator>,
    pub a: Vec<SparseOperator>,
    pub b_dag: Vec<SparseOperator>,
    pub b: Vec<SparseOperator>,
}

impl Constituents {
    pub fn new(space: &FockSpace) -> Result<Self> {
        let spec = space.spec();
        let build = |family, count| -> Result<(Vec<_>, Vec<_>)> {
            let dag = (0..count)
                .map(|m| creation_operator(space, family, m))
                .collect::<Result<Vec<_>>>()?;
            let ann = dag
                .iter()
                .enumerate()
                .map(|(m, op)| op.adjoint().named(format!("{family}{m}")))
                .collect();
            Ok((dag, ann))
        };
        let (a_dag, a) = build(Family::A, spec.d_a)?;
        let (b_dag, b) = build(Family::B, spec.d_b)?;
        Ok(Self { a_dag, a, b_dag, b })
    }

    /// `(family, mode, creation, annihilation)` for every mode in chain order.
    fn all(&self) -> impl Iterator<Item = (Family, usize, &SparseOperator, &SparseOperator)> {
        let a = self
            .a_dag
            .iter()
            .zip(&self.a)
            .enumerate()
            .map(|(m, (c, d))| (Family::A, m, c, d));
        let b = self
            .b_dag
            .iter()
            .zip(&self.b)
            .enumerate()
            .map(|(m, (c, d))| (Family::B, m, c, d));
        a.chain(b)
    }
}

/// Which part of the space a relation check is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Occupancies at most `cutoff - 1` (everything at `q = 1`).
    Interior,
    Full,
}

/// Residuals of the defining q-fermion relations over all mode pairs,
/// evaluated on the interior subspace.
pub fn verify_mode_relations(space: &FockSpace) -> Result<ResidualSet> {
    verify_mode_relations_on(space, Region::Interior)
}

pub fn verify_mode_relations_on(space: &FockSpace, region: Region) -> Result<ResidualSet> {
    let ops = Constituents::new(space)?;
    let mask = match region {
        Region::Interior => space.interior_mask(),
        Region::Full => vec![true; space.dim()],
    };
    let q = space.q();
    let id = space.identity();
    let modes: Vec<_> = ops.all().collect();

    let mut q_commutation = 0.0f64;
    let mut anti_ann = 0.0f64;
    let mut anti_cre = 0.0f64;
    let mut anti_mixed = 0.0f64;
    for (i, &(_, _, ci, ai)) in modes.iter().enumerate() {
        for (j, &(_, _, cj, aj)) in modes.iter().enumerate() {
            let norm = |op: SparseOperator| op.restrict_columns(&mask).spectral_norm();
            if i == j {
                // a a^dag + q a^dag a - 1
                let r = &(&(ai * ci) + &(ci * ai).scale_re(q)) - &id;
                q_commutation = q_commutation.max(norm(r));
            } else {
                // distinct modes anticommute, within a family and across
                anti_mixed = anti_mixed.max(norm(ai.anticommutator(cj)));
                if i < j {
                    anti_ann = anti_ann.max(norm(ai.anticommutator(aj)));
                    anti_cre = anti_cre.max(norm(ci.anticommutator(cj)));
                }
            }
        }
    }
    let region_label = match region {
        Region::Interior => "interior",
        Region::Full => "full",
    };
    let mut set = ResidualSet::new(
        format!("mode-relations/{region_label}"),
        "q-fermion relations a a^dag + q^delta a^dag a = delta; distinct modes anticommute",
    );
    let tol = 1e-12;
    let states = mask.iter().filter(|&&k| k).count();
    set.push_probed("same-mode q-commutator", q_commutation, tol, states);
    set.push_probed("distinct-mode {x, y^dag}", anti_mixed, tol, states);
    set.push_probed("distinct-mode {x, y}", anti_ann, tol, states);
    set.push_probed("distinct-mode {x^dag, y^dag}", anti_cre, tol, states);
    Ok(set)
}

/// Outcome of a nilpotency probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Nilpotency {
    /// `(a^dag)^k` is the zero matrix.
    pub vanishes: bool,
    /// The power vanishes only because the ladder was truncated.
    pub truncation_artifact: bool,
}

/// Whether `(x^dag)^k` vanishes for one mode, with `k <= cutoff + 1`.
pub fn check_nilpotency(space: &FockSpace, family: Family, mode: usize, k: u32) -> Result<Nilpotency> {
    if k > space.cutoff() + 1 {
        return Err(Error::Range(format!(
            "power {k} exceeds cutoff + 1 = {}",
            space.cutoff() + 1
        )));
    }
    let c = creation_operator(space, family, mode)?;
    let vanishes = c.pow(k).is_zero();
    let truncation_artifact = vanishes && !space.spec().is_fermionic() && k == space.cutoff() + 1;
    Ok(Nilpotency { vanishes, truncation_artifact })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(d_a: usize, d_b: usize, q: f64, cutoff: u32) -> FockSpace {
        build_space(ModeSpec::new(d_a, d_b, q, cutoff).unwrap()).unwrap()
    }

    #[test]
    fn q_bracket_values() {
        assert_eq!(q_bracket(0, 0.5).unwrap(), 0.0);
        for q in [-0.7, 0.0, 0.3, 1.0] {
            assert!((q_bracket(1, q).unwrap() - 1.0).abs() < 1e-15);
        }
        // (1 - q^2) / (1 + q) = 1 - q
        assert!((q_bracket(2, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(q_bracket(2, 1.0).unwrap(), 0.0);
        assert_eq!(q_bracket(3, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn q_bracket_rejects_out_of_range() {
        assert!(matches!(q_bracket(2, 1.5), Err(Error::Domain(_))));
        assert!(matches!(q_bracket(2, -1.0), Err(Error::Domain(_))));
        assert!(matches!(q_bracket(2, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn ladder_norms() {
        assert_eq!(ladder_norm_sq(0, 0.3).unwrap(), 1.0);
        assert_eq!(ladder_norm_sq(2, 1.0).unwrap(), 0.0);
        // [1][2][3] at q = 1/2: 1 * 0.5 * 0.75
        assert!((ladder_norm_sq(3, 0.5).unwrap() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn dimensions() {
        assert_eq!(space(1, 1, 1.0, 1).dim(), 4);
        assert_eq!(space(2, 2, 0.5, 3).dim(), 256);
        assert_eq!(space(4, 4, 1.0, 1).dim(), 256);
    }

    #[test]
    fn fermionic_point_forces_unit_cutoff() {
        let spec = ModeSpec::new(1, 2, 1.0, 4).unwrap();
        assert_eq!(spec.cutoff, 1);
        assert_eq!(build_space(spec).unwrap().dim(), 8);
    }

    #[test]
    fn spec_validation() {
        assert!(ModeSpec::new(0, 1, 0.5, 2).is_err());
        assert!(ModeSpec::new(1, 0, 0.5, 2).is_err());
        assert!(ModeSpec::new(1, 1, 0.5, 0).is_err());
        assert!(ModeSpec::new(1, 1, -1.2, 2).is_err());
        assert!(ModeSpec::new(1, 1, 1.01, 2).is_err());
    }

    #[test]
    fn capacity_guard() {
        let spec = ModeSpec::new(4, 4, 0.5, 9).unwrap();
        assert!(matches!(build_space(spec), Err(Error::Capacity { .. })));
        assert!(build_space_with_cap(ModeSpec::new(2, 2, 0.5, 3).unwrap(), 255).is_err());
    }

    #[test]
    fn basis_ordering_is_lexicographic_a_first() {
        let s = space(1, 2, 0.5, 2);
        assert_eq!(s.occupancies(0), vec![0, 0, 0]);
        assert_eq!(s.occupancies(1), vec![0, 0, 1]);
        assert_eq!(s.occupancies(3), vec![0, 1, 0]);
        assert_eq!(s.occupancies(9), vec![1, 0, 0]);
        assert_eq!(s.index_of(&[2, 2, 2]).unwrap(), 26);
        assert!(s.index_of(&[3, 0, 0]).is_err());
    }

    #[test]
    fn q1_single_mode_raising_matrix() {
        let s = space(1, 1, 1.0, 1);
        let a = creation_operator(&s, Family::A, 0).unwrap();
        // |n_a, n_b>: index 2 n_a + n_b
        assert_eq!(a.matrix().get(2, 0), Complex64::new(1.0, 0.0));
        assert_eq!(a.matrix().get(3, 1), Complex64::new(1.0, 0.0));
        assert_eq!(a.matrix().nnz(), 2);
        assert!(a.pow(2).is_zero());
    }

    #[test]
    fn raising_amplitude_follows_bracket() {
        let s = space(1, 1, 0.5, 3);
        let a = creation_operator(&s, Family::A, 0).unwrap();
        let one = s.index_of(&[1, 0]).unwrap();
        let two = s.index_of(&[2, 0]).unwrap();
        assert!((a.matrix().get(two, one).re - 0.5f64.sqrt()).abs() < 1e-15);
        let ann = annihilation_operator(&s, Family::A, 0).unwrap();
        assert!((ann.matrix().get(one, two).re - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(ann.matrix(), a.adjoint().matrix());
    }

    #[test]
    fn annihilation_on_vacuum_and_unit_norm() {
        let s = space(1, 1, 1.0, 1);
        let a = annihilation_operator(&s, Family::A, 0).unwrap();
        let c = creation_operator(&s, Family::A, 0).unwrap();
        let vac = s.vacuum();
        assert!(a.apply(&vac).iter().all(|z| z.norm() == 0.0));
        assert_eq!((&a * &c).apply(&vac), vac);
    }

    #[test]
    fn number_operator_counts() {
        let s = space(1, 1, 0.5, 3);
        let n = number_operator_mode(&s, Family::A, 0).unwrap();
        let c = creation_operator(&s, Family::A, 0).unwrap();
        let vac = s.vacuum();
        assert!(n.apply(&vac).iter().all(|z| z.norm() == 0.0));
        let v2 = c.pow(2).apply(&vac);
        let nv = n.apply(&v2);
        for (x, y) in nv.iter().zip(&v2) {
            assert!((x - 2.0 * y).norm() < 1e-15);
        }
        let r = &n.commutator(&c) - &c;
        assert!(r.restrict_columns(&s.interior_mask()).spectral_norm() < 1e-15);
    }

    #[test]
    fn relations_exact_at_q1() {
        let s = space(2, 2, 1.0, 1);
        let set = verify_mode_relations(&s).unwrap();
        assert!(set.max() == 0.0, "{set:?}");
    }

    #[test]
    fn relations_on_interior_for_q_half() {
        let s = space(1, 1, 0.5, 4);
        let set = verify_mode_relations(&s).unwrap();
        assert!(set.passed() && set.max() < 1e-12, "{set:?}");
    }

    #[test]
    fn truncation_defect_on_full_space() {
        // at the top level a a^dag vanishes, leaving q [c] - 1 = -[c+1]
        let s = space(1, 1, 0.5, 4);
        let full = verify_mode_relations_on(&s, Region::Full).unwrap();
        let defect = full.value("same-mode q-commutator").unwrap();
        let expected = q_bracket(5, 0.5).unwrap();
        assert!((defect - expected).abs() < 1e-12, "{defect} vs {expected}");
        assert!(defect >= 0.5 * q_bracket(4, 0.5).unwrap());
    }

    #[test]
    fn nilpotency_table() {
        let s1 = space(1, 1, 1.0, 1);
        let n = check_nilpotency(&s1, Family::A, 0, 2).unwrap();
        assert!(n.vanishes && !n.truncation_artifact);
        let s = space(1, 1, 0.9, 4);
        for k in 2..=4 {
            assert!(!check_nilpotency(&s, Family::B, 0, k).unwrap().vanishes);
        }
        let top = check_nilpotency(&s, Family::A, 0, 5).unwrap();
        assert!(top.vanishes && top.truncation_artifact);
        assert!(check_nilpotency(&s, Family::A, 0, 6).is_err());
        assert!(check_nilpotency(&s, Family::A, 3, 2).is_err());
    }
}
