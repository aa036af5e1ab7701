//! Combinatorics of powers of a composite creation operator for q-deformed
//! constituents: the integer coefficient table `P_n^{kl}(j)`, its closed
//! forms, the two-mode coefficients `C_n^{kl}`, the normal-ordered expansion
//! of `A (A^dag)^n`, and the one- and two-mode worked examples.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::fock::{is_fermionic, q_bracket, FockSpace, ModeSpec, SparseOperator};
use crate::phi::CMatrix;
use crate::quasiboson::Assembler;
use crate::residual::{ResidualSet, DEFAULT_TOL};
use crate::sparse::{vec_norm, vec_sub, CsrMatrix};

/// Exact coefficients `P_n^{kl}(j)` for `n <= n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PTable {
    n_max: u32,
    entries: HashMap<(u32, u32, u32, u32), BigInt>,
}

/// Admissible `j` range for `(n, k, l)`, empty when `k` or `l` exceeds `n`.
fn j_range(n: u32, k: u32, l: u32) -> std::ops::RangeInclusive<u32> {
    if k > n || l > n {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    (k + l).saturating_sub(n)..=k.min(l)
}

fn sign(e: u32) -> i32 {
    if e.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

impl PTable {
    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Zero outside the stored range, as the boundary rule prescribes.
    pub fn get(&self, n: u32, k: u32, l: u32, j: u32) -> BigInt {
        self.entries.get(&(n, k, l, j)).cloned().unwrap_or_else(BigInt::zero)
    }

    /// Signed lookup allowing negative indices (which are zero).
    fn at(&self, n: u32, k: i64, l: i64, j: i64) -> BigInt {
        if k < 0 || l < 0 || j < 0 {
            return BigInt::zero();
        }
        self.get(n, k as u32, l as u32, j as u32)
    }

    pub fn get_f64(&self, n: u32, k: u32, l: u32, j: u32) -> f64 {
        self.get(n, k, l, j).to_f64().unwrap_or(f64::NAN)
    }

    /// All stored entries ordered by `(n, k, l, j)`.
    pub fn entries(&self) -> Vec<((u32, u32, u32, u32), BigInt)> {
        let sorted: BTreeMap<_, _> = self.entries.iter().map(|(k, v)| (*k, v.clone())).collect();
        sorted.into_iter().collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,k,l,j,value")?;
        for ((n, k, l, j), v) in self.entries() {
            writeln!(out, "{n},{k},{l},{j},{v}")?;
        }
        Ok(())
    }
}

/// Builds the table level by level from `P_0^{00}(0) = 1` with the five
/// recurrence branches.
pub fn p_table(n_max: u32) -> Result<PTable> {
    if n_max == 0 {
        return Err(Error::Domain("coefficient table needs n_max >= 1".into()));
    }
    let mut t = PTable { n_max, entries: HashMap::new() };
    t.entries.insert((0, 0, 0, 0), BigInt::one());
    for n in 0..n_max {
        let m = n + 1;
        let mut level = Vec::new();
        for k in 0..=m {
            for l in 0..=m {
                for j in j_range(m, k, l) {
                    let (ki, li, ji) = (k as i64, l as i64, j as i64);
                    let v = if k == 0 && l == 0 {
                        BigInt::one()
                    } else if k == 0 {
                        t.at(n, 0, li, 0) + sign(n + l - 1) * t.at(n, 0, li - 1, 0)
                    } else if l == 0 {
                        t.at(n, ki, 0, 0) + sign(n + k - 1) * t.at(n, ki - 1, 0, 0)
                    } else if k == m {
                        t.at(n, n as i64, li, li) + sign(n + l - 1) * t.at(n, n as i64, li - 1, li - 1)
                    } else if l == m {
                        t.at(n, ki, n as i64, ki) + sign(n + k - 1) * t.at(n, ki - 1, n as i64, ki - 1)
                    } else {
                        t.at(n, ki, li, ji)
                            + sign(n + k - 1) * t.at(n, ki - 1, li, ji)
                            + sign(n + l - 1) * t.at(n, ki, li - 1, ji)
                            + sign(k + l) * t.at(n, ki - 1, li - 1, ji - 1)
                    };
                    level.push(((m, k, l, j), v));
                }
            }
        }
        t.entries.extend(level);
    }
    Ok(t)
}

/// The `(k, l, j)` patterns with a known closed form.
pub const CLOSED_FORM_PATTERNS: [(u32, u32, u32); 13] = [
    (0, 1, 0),
    (1, 0, 0),
    (1, 1, 0),
    (1, 1, 1),
    (0, 2, 0),
    (2, 0, 0),
    (1, 2, 0),
    (2, 1, 0),
    (1, 2, 1),
    (2, 1, 1),
    (2, 2, 0),
    (2, 2, 1),
    (2, 2, 2),
];

fn rat(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

/// `(1 - (-1)^n) / 2`.
fn odd(n: i64) -> BigRational {
    rat(n.rem_euclid(2), 1)
}

/// `(1 + (-1)^n) / 2`.
fn even(n: i64) -> BigRational {
    rat(1 - n.rem_euclid(2), 1)
}

/// Closed-form value of `P_n^{kl}(j)` on the covered patterns.
pub fn p_closed_form(n: u32, k: u32, l: u32, j: u32) -> Result<BigInt> {
    let not_covered = Error::NotCovered { n, k, l, j };
    let ni = n as i64;
    // forms stated for index n + 1 use m = n - 1
    let m = ni - 1;
    let value = match (k, l, j) {
        (0, 1, 0) | (1, 0, 0) => odd(ni),
        (1, 1, 0) => rat(-ni, 1) + odd(ni),
        (1, 1, 1) => rat(ni, 1),
        (0, 2, 0) | (2, 0, 0) => rat(ni, 2) + rat(if ni % 2 == 0 { 0 } else { -2 }, 4),
        _ if n == 0 => return Err(not_covered),
        (1, 2, 0) | (2, 1, 0) => rat(3 * m, 2) * even(m),
        (1, 2, 1) | (2, 1, 1) => rat(-m, 1) * even(m),
        (2, 2, 0) => (rat(3, 4) - rat(3 * m, 2)) * even(m) + rat(3 * m * m, 4) - rat(3, 4),
        (2, 2, 1) => rat(m - 1, 1) * even(m) - rat(m * m, 1) + rat(1, 1),
        (2, 2, 2) => rat(m * (m + 1), 2),
        _ => return Err(not_covered),
    };
    if !value.is_integer() {
        return Err(Error::Domain(format!("closed form of P_{n}^{{{k}{l}}}({j}) is not an integer: {value}")));
    }
    Ok(value.to_integer())
}

/// Coefficients `C_n^{kl}(Phi)` of a 2x2 wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct CTable {
    n_max: u32,
    values: HashMap<(u32, u32, u32), Complex64>,
}

impl CTable {
    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Zero for `k` or `l` outside `0..=n`.
    pub fn get(&self, n: u32, k: u32, l: u32) -> Complex64 {
        self.values.get(&(n, k, l)).copied().unwrap_or_else(Complex64::zero)
    }
}

fn check_two_by_two(phi: &CMatrix) -> Result<()> {
    if phi.nrows() != 2 || phi.ncols() != 2 {
        return Err(Error::Contract(format!("expected a 2x2 Phi, got {}x{}", phi.nrows(), phi.ncols())));
    }
    Ok(())
}

/// `C_n^{kl} = sum_j P_n^{kl}(j) (Phi22)^j (Phi21)^{k-j} (Phi12)^{l-j} (Phi11)^{n-k-l+j}`
/// (indices 1-based as in the matrix entries `Phi^{mu nu}`).
pub fn c_table_with(phi: &CMatrix, table: &PTable, n_max: u32) -> Result<CTable> {
    check_two_by_two(phi)?;
    if n_max > table.n_max() {
        return Err(Error::Range(format!("P table reaches n = {}, need {n_max}", table.n_max())));
    }
    let (p11, p12, p21, p22) = (phi[(0, 0)], phi[(0, 1)], phi[(1, 0)], phi[(1, 1)]);
    let mut values = HashMap::new();
    for n in 0..=n_max {
        for k in 0..=n {
            for l in 0..=n {
                let c: Complex64 = j_range(n, k, l)
                    .map(|j| {
                        table.get_f64(n, k, l, j)
                            * p22.powu(j)
                            * p21.powu(k - j)
                            * p12.powu(l - j)
                            * p11.powu(n + j - k - l)
                    })
                    .sum();
                values.insert((n, k, l), c);
            }
        }
    }
    Ok(CTable { n_max, values })
}

pub fn c_table(phi: &CMatrix, n_max: u32) -> Result<CTable> {
    let table = p_table(n_max.max(1))?;
    c_table_with(phi, &table, n_max)
}

/// Normal-ordered `a_mu prod_r a^dag_{mu_r}` for one constituent family:
/// `sum_i (-1)^{i-1} delta q^{#(s<i, mu_s=mu)} prod_{r!=i} a^dag_{mu_r}
///  + (-1)^n q^{#(mu_s=mu)} prod_r a^dag_{mu_r} a_mu`.
fn moved_annihilator(
    creators: &[SparseOperator],
    annihilator: &SparseOperator,
    target: usize,
    word: &[usize],
    q: f64,
    identity: &CsrMatrix,
) -> CsrMatrix {
    let one = Complex64::new(1.0, 0.0);
    let product = |skip: Option<usize>| {
        word.iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .fold(identity.clone(), |acc, (_, &mu)| acc.matmul(creators[mu].matrix()))
    };
    let n = word.len();
    let mut acc = CsrMatrix::zeros(identity.dim());
    let mut same = 0;
    for (i, &mu) in word.iter().enumerate() {
        if mu == target {
            let c = sign(i as u32) as f64 * q.powi(same);
            acc = acc.lincomb(one, &product(Some(i)), Complex64::new(c, 0.0));
            same += 1;
        }
    }
    let tail = sign(n as u32) as f64 * q.powi(same);
    acc.lincomb(one, &product(None).matmul(annihilator.matrix()), Complex64::new(tail, 0.0))
}

fn tuples(choices: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|w| {
                choices.iter().map(move |&c| {
                    let mut v = w.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

/// Compares `A (A^dag)^n` multiplied out with its normal-ordered expansion,
/// in spectral norm on the columns with at least `n` free slots per mode.
pub fn expand_annihilation_product(space: &FockSpace, phi: &CMatrix, n: u32) -> Result<ResidualSet> {
    if !is_fermionic(space.q()) && n > space.cutoff() {
        return Err(Error::Contract(format!(
            "expansion at n = {n} needs cutoff >= {n} (have {})",
            space.cutoff()
        )));
    }
    let asm = Assembler::new(space)?;
    let pair = asm.pair(phi, 0)?;
    let cons = asm.constituents();
    let q = space.q();
    let id = CsrMatrix::identity(space.dim());

    let direct = (&pair.a * &pair.a_dag.pow(n)).matrix().clone();

    let rows: Vec<usize> = (0..phi.nrows())
        .filter(|&mu| (0..phi.ncols()).any(|nu| phi[(mu, nu)] != Complex64::zero()))
        .collect();
    let cols: Vec<usize> = (0..phi.ncols())
        .filter(|&nu| (0..phi.nrows()).any(|mu| phi[(mu, nu)] != Complex64::zero()))
        .collect();
    let one = Complex64::new(1.0, 0.0);
    let mut expanded = CsrMatrix::zeros(space.dim());
    let mut a_cache: HashMap<(usize, Vec<usize>), CsrMatrix> = HashMap::new();
    let mut b_cache: HashMap<(usize, Vec<usize>), CsrMatrix> = HashMap::new();
    let mu_words = tuples(&rows, n as usize);
    let nu_words = tuples(&cols, n as usize);
    for mu in 0..phi.nrows() {
        for nu in 0..phi.ncols() {
            let outer = phi[(mu, nu)].conj();
            if outer == Complex64::zero() {
                continue;
            }
            for mw in &mu_words {
                // sum over nu-words with the pair weights fixed by mw
                let mut b_part = CsrMatrix::zeros(space.dim());
                for nw in &nu_words {
                    let w: Complex64 = mw.iter().zip(nw).map(|(&m, &v)| phi[(m, v)]).product();
                    if w == Complex64::zero() {
                        continue;
                    }
                    let xb = b_cache
                        .entry((nu, nw.clone()))
                        .or_insert_with(|| moved_annihilator(&cons.b_dag, &cons.b[nu], nu, nw, q, &id));
                    b_part = b_part.lincomb(one, xb, w);
                }
                if b_part.is_zero() {
                    continue;
                }
                let xa = a_cache
                    .entry((mu, mw.clone()))
                    .or_insert_with(|| moved_annihilator(&cons.a_dag, &cons.a[mu], mu, mw, q, &id));
                expanded = expanded.lincomb(one, &xa.matmul(&b_part), outer);
            }
        }
    }
    let overall = sign(n.saturating_sub(1) / 2) as f64;
    let expanded = expanded.scale(Complex64::new(overall, 0.0));

    let mask = space.headroom_mask(n);
    let diff = direct.sub(&expanded).restrict_columns(&mask);
    let mut set = ResidualSet::new(
        "expansion/annihilation-product",
        "A (A^dag)^n equals its normal-ordered expansion with q-power weights",
    );
    set.push_probed(format!("A (A^dag)^n expansion, n={n}"), diff.spectral_norm(), DEFAULT_TOL, mask.iter().filter(|&&k| k).count());
    Ok(set)
}

fn single_mode_space(q: f64, cutoff: u32) -> Result<FockSpace> {
    crate::fock::build_space(ModeSpec::new(1, 1, q, cutoff)?)
}

/// `A A^dag (A^dag)^n |O> = [n+1]^2 (A^dag)^n |O>` for one constituent mode
/// per family, `n <= cutoff - 1`; also returns the recovered eigenvalues.
pub fn example1_eigenvalues(q: f64, cutoff: u32) -> Result<Vec<(f64, f64)>> {
    if is_fermionic(q) {
        return Err(Error::Contract("the one-mode example assumes q < 1".into()));
    }
    let space = single_mode_space(q, cutoff)?;
    let pair = crate::quasiboson::build_quasiboson(&space, &CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)))?;
    let aad = &pair.a * &pair.a_dag;
    let mut v = space.vacuum();
    let mut out = Vec::new();
    for n in 0..cutoff {
        let w = aad.apply(&v);
        let norm = vec_norm(&v);
        let eig = crate::sparse::inner(&v, &w).re / (norm * norm);
        let target = q_bracket(n + 1, q)?.powi(2);
        let scaled: Vec<Complex64> = v.iter().map(|x| x * target).collect();
        out.push((eig, vec_norm(&vec_sub(&w, &scaled)) / norm));
        v = pair.a_dag.apply(&v);
    }
    Ok(out)
}

pub fn check_example1(q: f64, cutoff: u32) -> Result<ResidualSet> {
    let mut set = ResidualSet::new(
        "expansion/example-one-mode",
        "A A^dag (A^dag)^n |O> = [n+1]^2_{-q} (A^dag)^n |O> with one constituent mode each",
    );
    for (n, (_, res)) in example1_eigenvalues(q, cutoff)?.into_iter().enumerate() {
        set.push(format!("A A^dag eigenvalue n={n}"), res, DEFAULT_TOL);
    }
    Ok(set)
}

/// Structure function forced by the `k = l = 0` equations, for `Phi11 != 0`.
pub fn example2_structure_function(phi: &CMatrix, q: f64, n: u32) -> Result<Complex64> {
    check_two_by_two(phi)?;
    let (p11, p12, p21, p22) = (phi[(0, 0)], phi[(0, 1)], phi[(1, 0)], phi[(1, 1)]);
    if p11 == Complex64::zero() {
        return Err(Error::Contract("the two-mode example is normalized on Phi11 != 0".into()));
    }
    let nf = n as f64;
    let o = (n % 2) as f64;
    let b = q_bracket(n, q)?;
    Ok((o - nf) * p22.conj() * p21 * p12 / p11
        + nf * p22.norm_sqr()
        + o * b * p21.norm_sqr()
        + o * b * p12.norm_sqr()
        + b * b * p11.norm_sqr())
}

/// Left side of the two-mode system at `(n, k, l)` for given `phi(n+1)`.
pub fn example2_system(ct: &CTable, phi: &CMatrix, q: f64, n: u32, k: u32, l: u32, phi_next: Complex64) -> Result<Complex64> {
    let (p11, p12, p21, p22) = (phi[(0, 0)], phi[(0, 1)], phi[(1, 0)], phi[(1, 1)]);
    let br = |m: u32| q_bracket(m, q);
    let s = |e: u32| sign(e) as f64;
    Ok(br(k + 1)? * br(l + 1)? * p22.conj() * ct.get(n + 1, k + 1, l + 1)
        + s(l) * br(k + 1)? * br(n + 1 - l)? * p21.conj() * ct.get(n + 1, k + 1, l)
        + s(k) * br(n + 1 - k)? * br(l + 1)? * p12.conj() * ct.get(n + 1, k, l + 1)
        + s(k + l) * br(n + 1 - k)? * br(n + 1 - l)? * p11.conj() * ct.get(n + 1, k, l)
        - phi_next * ct.get(n, k, l))
}

/// Coefficient functions of the `k = 1, l = 0` equation, computed from the
/// table.
pub fn f_coefficients(t: &PTable, q: f64, n: u32) -> Result<[f64; 6]> {
    let p = |n, k, l, j| t.get_f64(n, k, l, j);
    let (b2, bn, bn1) = (q_bracket(2, q)?, q_bracket(n, q)?, q_bracket(n + 1, q)?);
    Ok([
        b2 * p(n + 1, 2, 1, 0) - p(n, 1, 0, 0) * p(n + 1, 1, 1, 0),
        b2 * p(n + 1, 2, 1, 1) - p(n, 1, 0, 0) * p(n + 1, 1, 1, 1),
        -bn * p(n + 1, 1, 1, 0) - bn1 * p(n, 1, 0, 0) * p(n + 1, 0, 1, 0),
        -bn * p(n + 1, 1, 1, 1),
        b2 * bn1 * p(n + 1, 2, 0, 0) - bn1 * p(n, 1, 0, 0) * p(n + 1, 1, 0, 0),
        -bn * bn1 * p(n + 1, 1, 0, 0) - bn1 * bn1 * p(n, 1, 0, 0),
    ])
}

/// Coefficient functions `g_1..g_9` of the `k = l = 1` equation.
pub fn g_coefficients(t: &PTable, q: f64, n: u32) -> Result<[f64; 9]> {
    let p = |n, k, l, j| t.get_f64(n, k, l, j);
    let (b2, bn, bn1) = (q_bracket(2, q)?, q_bracket(n, q)?, q_bracket(n + 1, q)?);
    let g1 = b2 * b2 * p(n + 1, 2, 2, 0) - p(n + 1, 1, 1, 0) * p(n, 1, 1, 0);
    let g2 = b2 * b2 * p(n + 1, 2, 2, 1) - p(n + 1, 1, 1, 0) * p(n, 1, 1, 1) - p(n + 1, 1, 1, 1) * p(n, 1, 1, 0);
    let g3 = b2 * b2 * p(n + 1, 2, 2, 2) - p(n + 1, 1, 1, 1) * p(n, 1, 1, 1);
    let g4 = -b2 * bn * p(n + 1, 2, 1, 0) - bn1 * p(n + 1, 1, 0, 0) * p(n, 1, 1, 0);
    let g5 = -b2 * bn * p(n + 1, 2, 1, 1) - bn1 * p(n + 1, 1, 0, 0) * p(n, 1, 1, 1);
    let g8 = bn * bn * p(n + 1, 1, 1, 0) - bn1 * bn1 * p(n, 1, 1, 0);
    let g9 = bn * bn * p(n + 1, 1, 1, 1) - bn1 * bn1 * p(n, 1, 1, 1);
    Ok([g1, g2, g3, g4, g5, g4, g5, g8, g9])
}

/// The `k = 1, l = 0` equation after dividing by `Phi11^{n-2}`.
pub fn example2_eq2(t: &PTable, phi: &CMatrix, q: f64, n: u32) -> Result<Complex64> {
    let (p11, p12, p21, p22) = (phi[(0, 0)], phi[(0, 1)], phi[(1, 0)], phi[(1, 1)]);
    let f = f_coefficients(t, q, n)?;
    Ok(f[0] * p22.conj() * p12 * p21 * p21
        + f[1] * p22.conj() * p22 * p21 * p11
        + f[2] * p12.conj() * p12 * p21 * p11
        + f[3] * p12.conj() * p22 * p11 * p11
        + f[4] * p21.conj() * p21 * p21 * p11
        + f[5] * p11.conj() * p21 * p11 * p11)
}

/// The `k = l = 1` equation after dividing by `Phi11^{n-3}`.
pub fn example2_eq3(t: &PTable, phi: &CMatrix, q: f64, n: u32) -> Result<Complex64> {
    let (p11, p12, p21, p22) = (phi[(0, 0)], phi[(0, 1)], phi[(1, 0)], phi[(1, 1)]);
    let g = g_coefficients(t, q, n)?;
    Ok(g[0] * p22.conj() * p21 * p21 * p12 * p12
        + g[1] * p22.conj() * p22 * p21 * p12 * p11
        + g[2] * p22.conj() * p22 * p22 * p11 * p11
        + g[3] * p21.conj() * p21 * p21 * p12 * p11
        + g[4] * p21.conj() * p22 * p21 * p11 * p11
        + g[5] * p12.conj() * p21 * p12 * p12 * p11
        + g[6] * p12.conj() * p22 * p12 * p11 * p11
        + g[7] * p11.conj() * p21 * p12 * p11 * p11
        + g[8] * p11.conj() * p22 * p11 * p11 * p11)
}

/// The `k = l = 1` equation with the off-diagonal entries set to zero.
pub fn example2_eq4(t: &PTable, phi: &CMatrix, q: f64, n: u32) -> Result<Complex64> {
    let (p11, p22) = (phi[(0, 0)], phi[(1, 1)]);
    let g = g_coefficients(t, q, n)?;
    Ok(g[2] * p22.conj() * p22 * p22 * p11 * p11 + g[8] * p11.conj() * p22 * p11 * p11 * p11)
}

/// Evaluates the two-mode realization system for `1 <= n <= n_max`, all
/// `k, l <= n`, with the structure function it forces, plus the reduced
/// equations that pin `Phi21`, `Phi12` and `Phi22` to zero.
pub fn check_example2(phi: &CMatrix, q: f64, n_max: u32) -> Result<ResidualSet> {
    if is_fermionic(q) {
        return Err(Error::Contract("the two-mode example assumes q < 1".into()));
    }
    check_two_by_two(phi)?;
    if n_max == 0 {
        return Err(Error::Domain("need n_max >= 1".into()));
    }
    let t = p_table(n_max + 1)?;
    let ct = c_table_with(phi, &t, n_max + 1)?;
    let phi_t = phi.transpose();
    let p11 = phi[(0, 0)];
    let mut set = ResidualSet::new(
        "expansion/example-two-mode",
        "A (A^dag)^{n+1} |O> = phi(n+1) (A^dag)^n |O> with two constituent modes each; forces Phi = one-hot and phi(n) = [n]^2_{-q}",
    );
    let sf = (1..=n_max + 1)
        .map(|n| example2_structure_function(phi, q, n))
        .collect::<Result<Vec<_>>>()?;
    for n in 1..=n_max + 1 {
        let target = q_bracket(n, q)?.powi(2);
        set.push(format!("recovered phi n={n}"), (sf[n as usize - 1] - target).norm(), DEFAULT_TOL);
    }
    for n in 1..=n_max {
        for k in 0..=n {
            for l in 0..=n {
                let v = example2_system(&ct, phi, q, n, k, l, sf[n as usize])?;
                set.push(format!("system n={n} k={k} l={l}"), v.norm(), DEFAULT_TOL);
            }
        }
    }
    for n in 1..=n_max {
        let ni = n as i32;
        let eq2 = example2_eq2(&t, phi, q, n)?;
        let eq2t = example2_eq2(&t, &phi_t, q, n)?;
        let eq3 = example2_eq3(&t, phi, q, n)?;
        let full10 = example2_system(&ct, phi, q, n, 1, 0, sf[n as usize])?;
        let full11 = example2_system(&ct, phi, q, n, 1, 1, sf[n as usize])?;
        set.push(format!("reduction k=1 l=0 n={n}"), (full10 - eq2 * p11.powi(ni - 2)).norm(), DEFAULT_TOL);
        set.push(format!("reduction k=l=1 n={n}"), (full11 - eq3 * p11.powi(ni - 3)).norm(), DEFAULT_TOL);
        set.push(format!("reduced k=1 l=0 n={n}"), eq2.norm(), DEFAULT_TOL);
        set.push(format!("reduced k=0 l=1 n={n}"), eq2t.norm(), DEFAULT_TOL);
        set.push(format!("reduced k=l=1 n={n}"), eq3.norm(), DEFAULT_TOL);
        set.push(format!("reduced diagonal n={n}"), example2_eq4(&t, phi, q, n)?.norm(), DEFAULT_TOL);
    }
    Ok(set)
}

/// The three sequences `n - odd(n)`, `([n] - odd(n))^2`, `odd(n) ([n] - 1)`
/// over `n = 2..=8`, as columns.
pub fn f_function_matrix(q: f64) -> Result<DMatrix<f64>> {
    let ns: Vec<u32> = (2..=8).collect();
    let mut m = DMatrix::zeros(ns.len(), 3);
    for (i, &n) in ns.iter().enumerate() {
        let o = (n % 2) as f64;
        let b = q_bracket(n, q)?;
        m[(i, 0)] = n as f64 - o;
        m[(i, 1)] = (b - o).powi(2);
        m[(i, 2)] = o * (b - 1.0);
    }
    Ok(m)
}

/// Rank deficit of the three-sequence Gram matrix (zero when independent).
pub fn check_f_independence(q: f64) -> Result<ResidualSet> {
    let m = f_function_matrix(q)?;
    let gram = m.transpose() * &m;
    let sv = gram.singular_values();
    let top = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * top).count();
    let mut set = ResidualSet::new(
        "expansion/f-independence",
        "the three coefficient sequences are linearly independent over n = 2..8",
    );
    set.push(format!("gram rank deficit q={q}"), (3 - rank) as f64, 0.0).note =
        Some(format!("smallest singular value {:e}", sv.min()));
    Ok(set)
}

/// Checks `p_table` against every closed form for `n <= n_max` before use.
pub fn cross_check_closed_forms(t: &PTable) -> Result<Vec<(u32, u32, u32, u32)>> {
    let mut bad = Vec::new();
    for n in 0..=t.n_max() {
        for &(k, l, j) in &CLOSED_FORM_PATTERNS {
            match p_closed_form(n, k, l, j) {
                Ok(v) => {
                    if v != t.get(n, k, l, j) {
                        bad.push((n, k, l, j));
                    }
                }
                Err(Error::NotCovered { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(bad)
}

/// Largest absolute entry of the table, for sanity reporting.
pub fn largest_coefficient(t: &PTable) -> BigInt {
    t.entries.values().map(|v| v.abs()).max().unwrap_or_else(BigInt::zero)
}
