//! Wavefunction matrices `Phi_alpha` of composite modes: constraint
//! checks, the block-unitary generator, the one-hot structure required for
//! q < 1 constituents, and realizability classification.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::is_fermionic;
use crate::residual::{ResidualSet, DEFAULT_TOL};

pub type CMatrix = DMatrix<Complex64>;

/// Relative threshold below which a matrix entry counts as zero.
pub const ONE_HOT_REL_TOL: f64 = 1e-9;

/// Maximum deviation from unitarity accepted by the generator.
pub const UNITARY_TOL: f64 = 1e-10;

/// Below this `f` the family is treated as the excluded `f = 0` case.
const F_ZERO_TOL: f64 = 1e-12;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// An ordered set of `d_a x d_b` matrices, one per composite mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiFamily {
    d_a: usize,
    d_b: usize,
    /// Deformation of the constituents the family is meant for.
    q: f64,
    matrices: Vec<CMatrix>,
}

impl PhiFamily {
    /// Checks shapes only; the algebraic constraints are left to the checkers.
    pub fn new(d_a: usize, d_b: usize, q: f64, matrices: Vec<CMatrix>) -> Result<Self> {
        if d_a == 0 || d_b == 0 {
            return Err(Error::Contract("Phi matrices need d_a, d_b >= 1".into()));
        }
        if let Some((i, m)) = matrices
            .iter()
            .enumerate()
            .find(|(_, m)| m.nrows() != d_a || m.ncols() != d_b)
        {
            return Err(Error::Contract(format!(
                "Phi_{} has shape {}x{}, expected {d_a}x{d_b}",
                i + 1,
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { d_a, d_b, q, matrices })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Deformation parameter of the first mode, taken as the family's `f`.
    pub fn f(&self) -> Option<f64> {
        self.matrices.first().map(|m| deformation_parameter(m).f)
    }

    /// Multiplies `Phi_alpha` by `exp(i theta)`.
    pub fn with_phase(&self, alpha: usize, theta: f64) -> Self {
        let mut out = self.clone();
        let phase = Complex64::from_polar(1.0, theta);
        out.matrices[alpha] *= phase;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeformationParameter {
    pub f: f64,
    /// Magnitude of the imaginary part of `2 Tr(Phi^dag Phi Phi^dag Phi)`.
    pub imag: f64,
}

impl DeformationParameter {
    /// `m = 2/f`.
    pub fn rank_estimate(&self) -> f64 {
        2.0 / self.f
    }
}

/// `f = 2 Tr(Phi^dag Phi Phi^dag Phi)`.
pub fn deformation_parameter(phi: &CMatrix) -> DeformationParameter {
    let g = phi.adjoint() * phi;
    let t = (&g * &g).trace() * 2.0;
    DeformationParameter { f: t.re, imag: t.im.abs() }
}

/// Largest entry modulus.
pub fn max_modulus(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn frob(m: &CMatrix) -> f64 {
    m.norm()
}

fn same_shape(family: &PhiFamily) -> Result<()> {
    if family
        .matrices
        .iter()
        .any(|m| m.nrows() != family.d_a || m.ncols() != family.d_b)
    {
        return Err(Error::Contract("Phi matrices do not share one shape".into()));
    }
    Ok(())
}

/// Residuals of the q = 1 system: normalization `Tr(Phi_a Phi_b^dag) = delta`,
/// the cubic relation `Phi Phi^dag Phi = (f/2) Phi` with the family `f`, and
/// mode independence `Phi_b Phi_a^dag Phi_c + Phi_c Phi_a^dag Phi_b = 0`
/// for `a != b`.
pub fn check_constraint_system(family: &PhiFamily) -> Result<ResidualSet> {
    same_shape(family)?;
    let mut set = ResidualSet::new(
        "phi/constraint-system",
        "Tr(Phi_a Phi_b^dag) = delta_ab; Phi Phi^dag Phi = (f/2) Phi; Phi_b Phi_a^dag Phi_c + Phi_c Phi_a^dag Phi_b = 0",
    );
    let ms = &family.matrices;
    let f = family.f().unwrap_or(0.0);

    let mut norm_res = 0.0f64;
    for (a, pa) in ms.iter().enumerate() {
        for (b, pb) in ms.iter().enumerate() {
            let t = (pa * pb.adjoint()).trace();
            let target = if a == b { c(1.0) } else { c(0.0) };
            norm_res = norm_res.max((t - target).norm());
        }
    }
    set.push("normalization", norm_res, DEFAULT_TOL);

    let mut cubic = 0.0f64;
    let mut cubic_own = 0.0f64;
    for p in ms {
        let ppp = p * p.adjoint() * p;
        cubic = cubic.max(frob(&(&ppp - p * c(f / 2.0))));
        let own = deformation_parameter(p).f;
        cubic_own = cubic_own.max(frob(&(&ppp - p * c(own / 2.0))));
    }
    set.push("cubic", cubic, DEFAULT_TOL);
    set.push("cubic (own trace)", cubic_own, DEFAULT_TOL);

    let mut indep = 0.0f64;
    for (a, pa) in ms.iter().enumerate() {
        let pa_dag = pa.adjoint();
        for (b, pb) in ms.iter().enumerate() {
            if a == b {
                continue;
            }
            for pc in ms {
                let r = pb * &pa_dag * pc + pc * &pa_dag * pb;
                indep = indep.max(frob(&r));
            }
        }
    }
    if ms.len() > 1 {
        set.push("independence", indep, DEFAULT_TOL);
    }
    Ok(set)
}

/// Haar-distributed unitary from a QR factorization of a complex Gaussian
/// matrix, with the phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { c(1.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let id = CMatrix::identity(u.nrows(), u.ncols());
    max_modulus(&(u.adjoint() * u - id))
}

fn check_unitary(u: &CMatrix, d: usize, what: &str) -> Result<()> {
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::Contract(format!(
            "{what} must be {d}x{d}, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let defect = unitarity_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::Contract(format!("{what} deviates from unitarity by {defect:e}")));
    }
    Ok(())
}

/// Builds `Phi_alpha = U1 diag(0, U_alpha / sqrt(m), 0) U2^dag`, the block of
/// mode `alpha` (0-based) sitting at rows and columns `[alpha m, (alpha+1) m)`.
pub fn generate_family(
    d_a: usize,
    d_b: usize,
    m: usize,
    n_modes: usize,
    u1: &CMatrix,
    u2: &CMatrix,
    blocks: &[CMatrix],
) -> Result<PhiFamily> {
    if m == 0 || n_modes == 0 {
        return Err(Error::Domain("need m >= 1 and at least one mode".into()));
    }
    let capacity = d_a.min(d_b);
    if n_modes.checked_mul(m).is_none_or(|total| total > capacity) {
        return Err(Error::EmptySolution { modes: n_modes, m, capacity });
    }
    check_unitary(u1, d_a, "U1")?;
    check_unitary(u2, d_b, "U2")?;
    if blocks.len() != n_modes {
        return Err(Error::Contract(format!(
            "expected {n_modes} block unitaries, got {}",
            blocks.len()
        )));
    }
    for (i, b) in blocks.iter().enumerate() {
        check_unitary(b, m, &format!("block {}", i + 1))?;
    }
    let scale = c(1.0 / (m as f64).sqrt());
    let u2_dag = u2.adjoint();
    let matrices = blocks
        .iter()
        .enumerate()
        .map(|(alpha, block)| {
            let mut d = CMatrix::zeros(d_a, d_b);
            d.view_mut((alpha * m, alpha * m), (m, m)).copy_from(&(block * scale));
            u1 * d * &u2_dag
        })
        .collect();
    PhiFamily::new(d_a, d_b, 1.0, matrices)
}

/// Generator with identity unitaries (`seed = None`) or seeded Haar ones.
/// Draw order: `U1`, `U2`, then the blocks in mode order.
pub fn generate_family_seeded(
    d_a: usize,
    d_b: usize,
    m: usize,
    n_modes: usize,
    seed: Option<u64>,
) -> Result<PhiFamily> {
    let capacity = d_a.min(d_b);
    if m == 0 || n_modes == 0 {
        return Err(Error::Domain("need m >= 1 and at least one mode".into()));
    }
    if n_modes.checked_mul(m).is_none_or(|total| total > capacity) {
        return Err(Error::EmptySolution { modes: n_modes, m, capacity });
    }
    let (u1, u2, blocks) = match seed {
        None => (
            CMatrix::identity(d_a, d_a),
            CMatrix::identity(d_b, d_b),
            vec![CMatrix::identity(m, m); n_modes],
        ),
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let u1 = haar_unitary(d_a, &mut rng);
            let u2 = haar_unitary(d_b, &mut rng);
            let blocks = (0..n_modes).map(|_| haar_unitary(m, &mut rng)).collect();
            (u1, u2, blocks)
        }
    };
    generate_family(d_a, d_b, m, n_modes, &u1, &u2, &blocks)
}

fn nonzero_threshold(phi: &CMatrix) -> f64 {
    ONE_HOT_REL_TOL * max_modulus(phi)
}

/// Position of the single structurally nonzero entry, if there is exactly one.
pub fn one_hot_position(phi: &CMatrix) -> Option<(usize, usize)> {
    let thr = nonzero_threshold(phi);
    if max_modulus(phi) == 0.0 {
        return None;
    }
    let mut found = None;
    for j in 0..phi.ncols() {
        for i in 0..phi.nrows() {
            if phi[(i, j)].norm() > thr {
                if found.is_some() {
                    return None;
                }
                found = Some((i, j));
            }
        }
    }
    found
}

/// Residuals of the q < 1 structure conditions: the two cross-mode
/// factorization identities, the three within-matrix pair products (same
/// row, same column, distinct rows and columns), cross-mode disjointness of
/// rows and columns, and the one-hot unit-modulus shape of every matrix.
pub fn check_q_structure(family: &PhiFamily) -> Result<ResidualSet> {
    same_shape(family)?;
    let mut set = ResidualSet::new(
        "phi/q-structure",
        "cross-mode factorization; no two nonzero entries per row, per column or off-line; one-hot |Phi| = 1",
    );
    let ms = &family.matrices;
    let (da, db) = (family.d_a, family.d_b);

    if ms.len() > 1 {
        let mut rows = 0.0f64;
        let mut cols = 0.0f64;
        let mut disjoint = 0.0f64;
        for (a, pa) in ms.iter().enumerate() {
            for (b, pb) in ms.iter().enumerate() {
                if a == b {
                    continue;
                }
                for mu in 0..da {
                    for nu in 0..db {
                        for nu2 in 0..db {
                            let r = pa[(mu, nu)] * pb[(mu, nu2)] - pa[(mu, nu2)] * pb[(mu, nu)];
                            rows = rows.max(r.norm());
                        }
                        for mu2 in 0..da {
                            let r = pa[(mu, nu)] * pb[(mu2, nu)] - pa[(mu2, nu)] * pb[(mu, nu)];
                            cols = cols.max(r.norm());
                        }
                        for mu2 in 0..da {
                            for nu2 in 0..db {
                                if mu == mu2 || nu == nu2 {
                                    disjoint = disjoint.max(pa[(mu, nu)].norm() * pb[(mu2, nu2)].norm());
                                }
                            }
                        }
                    }
                }
            }
        }
        set.push("factorization (rows)", rows, DEFAULT_TOL);
        set.push("factorization (columns)", cols, DEFAULT_TOL);
        set.push("disjoint rows and columns", disjoint, DEFAULT_TOL);
    }

    let mut same_row = 0.0f64;
    let mut same_col = 0.0f64;
    let mut off_line = 0.0f64;
    for p in ms {
        for mu in 0..da {
            for nu in 0..db {
                let x = p[(mu, nu)].norm();
                for mu2 in 0..da {
                    for nu2 in 0..db {
                        if (mu, nu) >= (mu2, nu2) {
                            continue;
                        }
                        let prod = x * p[(mu2, nu2)].norm();
                        match (mu == mu2, nu == nu2) {
                            (true, false) => same_row = same_row.max(prod),
                            (false, true) => same_col = same_col.max(prod),
                            (false, false) => off_line = off_line.max(prod),
                            (true, true) => {}
                        }
                    }
                }
            }
        }
    }
    set.push("pairs in one row", same_row, DEFAULT_TOL);
    set.push("pairs in one column", same_col, DEFAULT_TOL);
    set.push("pairs in distinct rows and columns", off_line, DEFAULT_TOL);

    for (a, p) in ms.iter().enumerate() {
        let label = format!("one-hot unit modulus, mode {}", a + 1);
        match one_hot_position(p) {
            Some(pos) => {
                set.push(label, p[pos].norm() - 1.0, DEFAULT_TOL);
            }
            None => {
                let thr = nonzero_threshold(p);
                let count = p.iter().filter(|z| z.norm() > thr && max_modulus(p) > 0.0).count();
                set.push_failure(label, format!("{count} structurally nonzero entries"));
            }
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Realizability {
    /// Fermionic constituents; `f = 2/m`. `nondegenerate` marks the single
    /// square invertible (scaled unitary) case.
    RealizableQ1 { m: u32, nondegenerate: bool },
    /// q < 1 constituents; one (row, column) position per mode, 1-based as
    /// in family files.
    RealizableQlt1 { positions: Vec<(usize, usize)> },
    NotRealizable { reasons: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizabilityVerdict {
    pub verdict: Realizability,
    pub evidence: ResidualSet,
}

impl RealizabilityVerdict {
    pub fn is_realizable(&self) -> bool {
        !matches!(self.verdict, Realizability::NotRealizable { .. })
    }
}

fn failure_reasons(set: &ResidualSet) -> Vec<String> {
    set.failures()
        .map(|r| match &r.note {
            Some(n) => format!("{} ({n})", r.label),
            None => format!("{} (residual {:e})", r.label, r.value),
        })
        .collect()
}

/// Decides whether the family can realize independent deformed oscillators
/// on constituents with deformation `q`.
pub fn classify(family: &PhiFamily, q: f64) -> Result<RealizabilityVerdict> {
    let not = |reasons: Vec<String>, evidence| RealizabilityVerdict {
        verdict: Realizability::NotRealizable { reasons },
        evidence,
    };
    if family.is_empty() {
        return Ok(not(vec!["empty family".into()], ResidualSet::new("phi/classify", "family is empty")));
    }
    let zero_f: Vec<String> = family
        .matrices
        .iter()
        .enumerate()
        .filter(|(_, p)| deformation_parameter(p).f.abs() < F_ZERO_TOL)
        .map(|(a, _)| format!("mode {}: f = 0, the pure boson case is unsuitable", a + 1))
        .collect();

    if is_fermionic(q) {
        let evidence = check_constraint_system(family)?;
        let mut reasons = zero_f;
        reasons.extend(failure_reasons(&evidence));
        if !reasons.is_empty() {
            return Ok(not(reasons, evidence));
        }
        let f = family.f().unwrap_or(0.0);
        let m = 2.0 / f;
        if (m - m.round()).abs() > 1e-9 || m.round() < 1.0 {
            return Ok(not(vec![format!("2/f = {m} is not a positive integer")], evidence));
        }
        let m = m.round() as u32;
        let nondegenerate = family.len() == 1 && family.d_a == family.d_b && family.d_a == m as usize;
        Ok(RealizabilityVerdict {
            verdict: Realizability::RealizableQ1 { m, nondegenerate },
            evidence,
        })
    } else {
        let evidence = check_q_structure(family)?;
        let mut reasons = zero_f;
        reasons.extend(failure_reasons(&evidence));
        if !reasons.is_empty() {
            return Ok(not(reasons, evidence));
        }
        let positions = family
            .matrices
            .iter()
            .map(|p| {
                let (i, j) = one_hot_position(p).expect("checked one-hot");
                (i + 1, j + 1)
            })
            .collect();
        Ok(RealizabilityVerdict {
            verdict: Realizability::RealizableQlt1 { positions },
            evidence,
        })
    }
}

/// JSON layout of a family file. Mode and matrix indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiFile {
    pub d_a: usize,
    pub d_b: usize,
    pub q: f64,
    pub modes: Vec<PhiFileMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiFileMode {
    pub alpha: usize,
    pub entries: Vec<PhiFileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiFileEntry {
    pub mu: usize,
    pub nu: usize,
    pub re: f64,
    pub im: f64,
}

impl PhiFile {
    pub fn from_family(family: &PhiFamily) -> Self {
        let modes = family
            .matrices
            .iter()
            .enumerate()
            .map(|(a, p)| PhiFileMode {
                alpha: a + 1,
                entries: (0..family.d_a)
                    .flat_map(|mu| (0..family.d_b).map(move |nu| (mu, nu)))
                    .filter(|&(mu, nu)| p[(mu, nu)] != c(0.0))
                    .map(|(mu, nu)| PhiFileEntry {
                        mu: mu + 1,
                        nu: nu + 1,
                        re: p[(mu, nu)].re,
                        im: p[(mu, nu)].im,
                    })
                    .collect(),
            })
            .collect();
        Self { d_a: family.d_a, d_b: family.d_b, q: family.q, modes }
    }

    pub fn to_family(&self) -> Result<PhiFamily> {
        let mut modes: Vec<&PhiFileMode> = self.modes.iter().collect();
        modes.sort_by_key(|m| m.alpha);
        for (i, m) in modes.iter().enumerate() {
            if m.alpha != i + 1 {
                return Err(Error::Contract(format!(
                    "mode labels must be 1..={} without gaps, found alpha = {}",
                    modes.len(),
                    m.alpha
                )));
            }
        }
        let matrices = modes
            .iter()
            .map(|m| {
                let mut p = CMatrix::zeros(self.d_a, self.d_b);
                let mut seen = vec![false; self.d_a * self.d_b];
                for e in &m.entries {
                    if e.mu == 0 || e.mu > self.d_a || e.nu == 0 || e.nu > self.d_b {
                        return Err(Error::Range(format!(
                            "entry ({}, {}) of mode {} outside 1..={} x 1..={}",
                            e.mu, e.nu, m.alpha, self.d_a, self.d_b
                        )));
                    }
                    let k = (e.mu - 1) * self.d_b + (e.nu - 1);
                    if std::mem::replace(&mut seen[k], true) {
                        return Err(Error::Contract(format!(
                            "duplicate entry ({}, {}) in mode {}",
                            e.mu, e.nu, m.alpha
                        )));
                    }
                    if !(e.re.is_finite() && e.im.is_finite()) {
                        return Err(Error::Domain(format!("non-finite entry in mode {}", m.alpha)));
                    }
                    p[(e.mu - 1, e.nu - 1)] = Complex64::new(e.re, e.im);
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        PhiFamily::new(self.d_a, self.d_b, self.q, matrices)
    }
}

pub fn read_family(path: &Path) -> Result<PhiFamily> {
    let text = std::fs::read_to_string(path)?;
    let file: PhiFile = serde_json::from_str(&text)?;
    file.to_family()
}

pub fn write_family(family: &PhiFamily, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&PhiFile::from_family(family))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// `d_a x d_b` matrix with the given 0-based entries.
pub fn matrix_from_entries(d_a: usize, d_b: usize, entries: &[(usize, usize, Complex64)]) -> CMatrix {
    let mut p = CMatrix::zeros(d_a, d_b);
    for &(i, j, v) in entries {
        p[(i, j)] += v;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d_a: usize, d_b: usize, i: usize, j: usize) -> CMatrix {
        matrix_from_entries(d_a, d_b, &[(i, j, c(1.0))])
    }

    #[test]
    fn one_hot_f_is_two() {
        let p = deformation_parameter(&e(2, 2, 0, 0));
        assert!((p.f - 2.0).abs() < 1e-15);
        assert!((p.rank_estimate() - 1.0).abs() < 1e-15);
        assert_eq!(deformation_parameter(&CMatrix::zeros(2, 2)).f, 0.0);
    }

    #[test]
    fn scaled_unitary_block() {
        let fam = generate_family_seeded(4, 4, 2, 1, Some(3)).unwrap();
        let p = deformation_parameter(&fam.matrices()[0]);
        assert!((p.f - 1.0).abs() < 1e-12 && p.imag < 1e-12);
    }

    #[test]
    fn identity_generator_places_unit_entries() {
        let fam = generate_family_seeded(2, 2, 1, 2, None).unwrap();
        assert_eq!(fam.matrices()[0], e(2, 2, 0, 0));
        assert_eq!(fam.matrices()[1], e(2, 2, 1, 1));
    }

    #[test]
    fn generated_families_satisfy_system() {
        let fam = generate_family_seeded(4, 4, 2, 2, Some(11)).unwrap();
        let set = check_constraint_system(&fam).unwrap();
        assert!(set.max() < 1e-12, "{set:?}");
    }

    #[test]
    fn capacity_condition() {
        assert!(matches!(
            generate_family_seeded(4, 4, 2, 3, Some(1)),
            Err(Error::EmptySolution { modes: 3, m: 2, capacity: 4 })
        ));
    }

    #[test]
    fn generator_rejects_non_unitary_input() {
        let bad = CMatrix::identity(2, 2) * c(1.1);
        let id = CMatrix::identity(2, 2);
        assert!(matches!(
            generate_family(2, 2, 1, 1, &bad, &id, &[CMatrix::identity(1, 1)]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn unitary_over_sqrt_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = haar_unitary(3, &mut rng);
        assert!(unitarity_defect(&u) < 1e-13);
        let fam = PhiFamily::new(3, 3, 1.0, vec![u * c(1.0 / 3f64.sqrt())]).unwrap();
        assert!(check_constraint_system(&fam).unwrap().max() < 1e-13);
        assert!((fam.f().unwrap() - 2.0 / 3.0).abs() < 1e-13);
        let v = classify(&fam, 1.0).unwrap();
        assert_eq!(v.verdict, Realizability::RealizableQ1 { m: 3, nondegenerate: true });
    }

    #[test]
    fn gaussian_pair_violates_cubic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut draw = || {
            let m = CMatrix::from_fn(3, 3, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let n = m.norm();
            m / c(n)
        };
        let fam = PhiFamily::new(3, 3, 1.0, vec![draw(), draw()]).unwrap();
        let set = check_constraint_system(&fam).unwrap();
        assert!(set.value("cubic (own trace)").unwrap() > 0.01);
    }

    #[test]
    fn q_structure_examples() {
        let good = PhiFamily::new(2, 2, 0.5, vec![e(2, 2, 0, 0) * Complex64::from_polar(1.0, 0.7), e(2, 2, 1, 1)]).unwrap();
        let set = check_q_structure(&good).unwrap();
        assert!(set.passed() && set.max() < 1e-15, "{set:?}");

        let h = c(std::f64::consts::FRAC_1_SQRT_2);
        let row = PhiFamily::new(2, 2, 0.5, vec![(e(2, 2, 0, 0) + e(2, 2, 0, 1)) * h]).unwrap();
        let set = check_q_structure(&row).unwrap();
        assert!((set.value("pairs in one row").unwrap() - 0.5).abs() < 1e-15);

        let diag = PhiFamily::new(2, 2, 0.5, vec![(e(2, 2, 0, 0) + e(2, 2, 1, 1)) * h]).unwrap();
        let set = check_q_structure(&diag).unwrap();
        assert!((set.value("pairs in distinct rows and columns").unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(set.value("pairs in one row"), Some(0.0));
        assert_eq!(set.value("pairs in one column"), Some(0.0));
    }

    #[test]
    fn shared_row_across_modes_is_flagged() {
        let fam = PhiFamily::new(2, 2, 0.5, vec![e(2, 2, 0, 0), e(2, 2, 0, 1)]).unwrap();
        let set = check_q_structure(&fam).unwrap();
        assert!(!set.passed());
        assert_eq!(set.value("factorization (rows)"), Some(1.0));
    }

    #[test]
    fn classification() {
        let gen = generate_family_seeded(4, 4, 2, 2, Some(7)).unwrap();
        assert_eq!(
            classify(&gen, 1.0).unwrap().verdict,
            Realizability::RealizableQ1 { m: 2, nondegenerate: false }
        );
        assert!(!classify(&gen, 0.5).unwrap().is_realizable());

        let hot = PhiFamily::new(2, 2, 0.5, vec![e(2, 2, 0, 1), e(2, 2, 1, 0)]).unwrap();
        assert_eq!(
            classify(&hot, 0.5).unwrap().verdict,
            Realizability::RealizableQlt1 { positions: vec![(1, 2), (2, 1)] }
        );
        // q = 1 takes precedence for one-hot families
        assert_eq!(
            classify(&hot, 1.0).unwrap().verdict,
            Realizability::RealizableQ1 { m: 1, nondegenerate: false }
        );

        let zero = PhiFamily::new(2, 2, 1.0, vec![CMatrix::zeros(2, 2)]).unwrap();
        match classify(&zero, 1.0).unwrap().verdict {
            Realizability::NotRealizable { reasons } => assert!(reasons[0].contains("pure boson")),
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn mixed_rank_is_not_realizable() {
        let h = c(std::f64::consts::FRAC_1_SQRT_2);
        let fam = PhiFamily::new(
            3,
            3,
            1.0,
            vec![e(3, 3, 0, 0), (e(3, 3, 1, 1) + e(3, 3, 2, 2)) * h],
        )
        .unwrap();
        assert!(!classify(&fam, 1.0).unwrap().is_realizable());
    }

    #[test]
    fn file_round_trip() {
        let fam = generate_family_seeded(3, 4, 1, 2, Some(21)).unwrap();
        let file = PhiFile::from_family(&fam);
        let text = serde_json::to_string(&file).unwrap();
        let back: PhiFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_family().unwrap(), fam);
        assert_eq!(file.modes[0].alpha, 1);
    }

    #[test]
    fn file_validation() {
        let bad = PhiFile {
            d_a: 2,
            d_b: 2,
            q: 0.5,
            modes: vec![PhiFileMode { alpha: 1, entries: vec![PhiFileEntry { mu: 3, nu: 1, re: 1.0, im: 0.0 }] }],
        };
        assert!(matches!(bad.to_family(), Err(Error::Range(_))));
        let gap = PhiFile { d_a: 2, d_b: 2, q: 0.5, modes: vec![PhiFileMode { alpha: 2, entries: vec![] }] };
        assert!(gap.to_family().is_err());
        assert!(PhiFamily::new(2, 2, 1.0, vec![CMatrix::zeros(2, 3)]).is_err());
    }
}
