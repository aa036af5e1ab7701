//! Deformation structure functions `phi(n)`, their recurrences and the
//! associated energy ladder `E_n = (phi(n) + phi(n+1)) / 2`.
//!
//! Recurrence residuals are computed in exact rational arithmetic: inputs
//! given as `f64` are converted exactly, so a residual only reflects the
//! table itself and never cancellation inside the binomial sums.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{is_fermionic, q_bracket};
use crate::residual::ResidualSet;

/// Tolerance for the boundary values `phi(0) = 0`, `phi(1) = 1`.
const BOUNDARY_TOL: f64 = 1e-12;

/// Default tolerance of the recurrence checks.
pub const RECURRENCE_TOL: f64 = 1e-12;

/// A structure-function family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum StructureFunctionSpec {
    /// `(1 + 1/m) n - n^2 / m`, i.e. deformation parameter `f = 2/m`.
    FermionicQuadratic { m: u32 },
    /// `[n]_{-q}^2`.
    QFermionSquare { q: f64 },
    /// Three-parameter form that contains `[n]_{-q}^2` at `(1, 1, 2)`.
    Parameterized { q: f64, p1: f64, p2: f64, p3: f64 },
    /// Explicit values `phi(0), phi(1), ...`.
    Tabulated { values: Vec<f64> },
}

impl StructureFunctionSpec {
    /// Checks parameter domains and the boundary values `phi(0) = 0`,
    /// `phi(1) = 1`.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::FermionicQuadratic { m } => {
                if *m == 0 {
                    return Err(Error::Domain("fermionic structure function needs m >= 1".into()));
                }
            }
            Self::QFermionSquare { q } | Self::Parameterized { q, .. } => check_open_q(*q)?,
            Self::Tabulated { values } => {
                if values.len() < 2 {
                    return Err(Error::Domain("tabulated structure function needs phi(0) and phi(1)".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain("tabulated values must be finite".into()));
                }
            }
        }
        if let Self::Parameterized { p1, p2, p3, .. } = self {
            if ![p1, p2, p3].iter().all(|p| p.is_finite()) {
                return Err(Error::Domain("parameters p1, p2, p3 must be finite".into()));
            }
        }
        let (phi0, phi1) = (self.eval(0)?, self.eval(1)?);
        if phi0.abs() > BOUNDARY_TOL || (phi1 - 1.0).abs() > BOUNDARY_TOL {
            return Err(Error::Domain(format!(
                "structure function must satisfy phi(0) = 0 and phi(1) = 1, got {phi0} and {phi1}"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, n: u32) -> Result<f64> {
        match self {
            Self::FermionicQuadratic { m } => fermionic_dsf(*m, n),
            Self::QFermionSquare { q } => qfermionic_dsf(*q, n),
            Self::Parameterized { q, p1, p2, p3 } => parameterized_dsf(*q, *p1, *p2, *p3, n),
            Self::Tabulated { values } => values.get(n as usize).copied().ok_or_else(|| {
                Error::Range(format!("phi({n}) beyond table of length {}", values.len()))
            }),
        }
    }

    /// Exact value; families evaluated in floating point are converted exactly.
    pub fn eval_exact(&self, n: u32) -> Result<BigRational> {
        match self {
            Self::FermionicQuadratic { m } => fermionic_dsf_exact(*m, n),
            _ => exact_from_f64(self.eval(n)?),
        }
    }

    /// `phi(0..=n_max)`.
    pub fn table(&self, n_max: u32) -> Result<Vec<f64>> {
        (0..=n_max).map(|n| self.eval(n)).collect()
    }

    pub fn table_exact(&self, n_max: u32) -> Result<Vec<BigRational>> {
        (0..=n_max).map(|n| self.eval_exact(n)).collect()
    }

    /// Deformation of the constituents this family belongs to, if fixed.
    pub fn constituent_q(&self) -> Option<f64> {
        match self {
            Self::FermionicQuadratic { .. } => Some(1.0),
            Self::QFermionSquare { q } | Self::Parameterized { q, .. } => Some(*q),
            Self::Tabulated { .. } => None,
        }
    }

    /// `f = 2/m` for the quadratic family.
    pub fn deformation_f(&self) -> Option<f64> {
        match self {
            Self::FermionicQuadratic { m } => Some(2.0 / *m as f64),
            _ => None,
        }
    }

    /// Largest `n` for which `eval` succeeds, if bounded.
    pub fn max_index(&self) -> Option<u32> {
        match self {
            Self::Tabulated { values } => Some(values.len() as u32 - 1),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::FermionicQuadratic { m } => format!("fermionic quadratic, m = {m}"),
            Self::QFermionSquare { q } => format!("q-fermion square, q = {q}"),
            Self::Parameterized { q, p1, p2, p3 } => {
                format!("parameterized, q = {q}, p = ({p1}, {p2}, {p3})")
            }
            Self::Tabulated { values } => format!("tabulated, {} values", values.len()),
        }
    }
}

fn check_open_q(q: f64) -> Result<()> {
    if is_fermionic(q) {
        return Err(Error::Domain(
            "the q-fermion square form does not apply at q = 1; use the fermionic quadratic family".into(),
        ));
    }
    if !(q.is_finite() && q > -1.0 && q < 1.0) {
        return Err(Error::Domain(format!("q = {q} outside (-1, 1)")));
    }
    Ok(())
}

pub fn exact_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("non-finite value {x}")))
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `(1 + 1/m) n - n^2 / m = n (m + 1 - n) / m`.
pub fn fermionic_dsf(m: u32, n: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let num = n as i64 * (m as i64 + 1 - n as i64);
    Ok(num as f64 / m as f64)
}

pub fn fermionic_dsf_exact(m: u32, n: u32) -> Result<BigRational> {
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let num = BigInt::from(n) * (BigInt::from(m) + 1 - BigInt::from(n));
    Ok(BigRational::new(num, BigInt::from(m)))
}

/// `[n]_{-q}^2`; at `q = 0` this is the step function `theta(n)`.
pub fn qfermionic_dsf(q: f64, n: u32) -> Result<f64> {
    check_open_q(q)?;
    if q == 0.0 {
        return Ok(if n == 0 { 0.0 } else { 1.0 });
    }
    Ok(q_bracket(n, q)?.powi(2))
}

/// Three-parameter form
/// `n - (n - o) p1 + ([n] - o)^2 p2 + o ([n] - 1) p3` with `o = (1 - (-1)^n) / 2`.
pub fn parameterized_dsf(q: f64, p1: f64, p2: f64, p3: f64, n: u32) -> Result<f64> {
    check_open_q(q)?;
    let nf = n as f64;
    let odd = (n % 2) as f64;
    let br = q_bracket(n, q)?;
    Ok(nf - (nf - odd) * p1 + (br - odd).powi(2) * p2 + odd * (br - 1.0) * p3)
}

/// Dispatches on the family; the unified form of the two realizable branches.
pub fn unified_dsf(spec: &StructureFunctionSpec, n: u32) -> Result<f64> {
    spec.eval(n)
}

/// Exact binomial coefficient.
pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn sign(e: u32) -> BigInt {
    if e.is_multiple_of(2) {
        BigInt::one()
    } else {
        -BigInt::one()
    }
}

/// `sum_{k=0}^{n} (-1)^{n-k} C(n+1, k) phi(k)`, the value the binomial
/// recurrence predicts for `phi(n+1)`.
pub fn binomial_prediction(values: &[BigRational], n: u32) -> BigRational {
    (0..=n).fold(BigRational::zero(), |acc, k| {
        acc + &values[k as usize] * BigRational::from_integer(sign(n - k) * binomial(n + 1, k))
    })
}

fn need(values_len: usize, needed: u32) -> Result<()> {
    if values_len <= needed as usize {
        return Err(Error::Range(format!(
            "need phi(0..={needed}), table has {values_len} values"
        )));
    }
    Ok(())
}

/// Residuals of `phi(n+1) = sum_{k<=n} (-1)^{n-k} C(n+1,k) phi(k)` for
/// `2 <= n <= n_max`. Values are converted to rationals exactly.
pub fn check_binomial_recurrence(values: &[f64], n_max: u32) -> Result<ResidualSet> {
    let exact = values.iter().map(|&v| exact_from_f64(v)).collect::<Result<Vec<_>>>()?;
    check_binomial_recurrence_exact(&exact, n_max)
}

pub fn check_binomial_recurrence_exact(values: &[BigRational], n_max: u32) -> Result<ResidualSet> {
    need(values.len(), n_max + 1)?;
    let mut set = ResidualSet::new(
        "dsf/binomial-recurrence",
        "phi(n+1) = sum_{k=0}^{n} (-1)^{n-k} C(n+1,k) phi(k), n >= 2",
    );
    for n in 2..=n_max {
        let r = &values[n as usize + 1] - binomial_prediction(values, n);
        set.push(format!("n={n}"), rational_to_f64(&r.abs()), RECURRENCE_TOL);
    }
    Ok(set)
}

/// `E_n = (phi(n) + phi(n+1)) / 2`.
pub fn energy(values: &[f64], n: u32) -> Result<f64> {
    need(values.len(), n + 1)?;
    Ok(0.5 * (values[n as usize] + values[n as usize + 1]))
}

fn energy_exact(values: &[BigRational], n: usize) -> BigRational {
    (&values[n] + &values[n + 1]) / BigRational::from_integer(BigInt::from(2))
}

fn int(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// Three-term recurrences for `phi` (for `2 <= n <= n_max`) and for the
/// energies (for `1 <= n <= n_max`). Needs `phi(0..=n_max+2)`.
pub fn check_three_term(values: &[f64], n_max: u32) -> Result<ResidualSet> {
    let exact = values.iter().map(|&v| exact_from_f64(v)).collect::<Result<Vec<_>>>()?;
    check_three_term_exact(&exact, n_max)
}

pub fn check_three_term_exact(values: &[BigRational], n_max: u32) -> Result<ResidualSet> {
    need(values.len(), n_max + 2)?;
    let mut set = ResidualSet::new(
        "dsf/three-term",
        "phi(n+1) = 2(n+1)/n phi(n) - (n+1)/(n-1) phi(n-1); quasi-Fibonacci energy recurrence",
    );
    if n_max >= 1 {
        set.push_structural("phi n=1", "skipped: denominator n - 1 vanishes");
    }
    for n in 2..=n_max as i64 {
        let i = n as usize;
        let pred = int(2 * (n + 1)) / int(n) * &values[i] - int(n + 1) / int(n - 1) * &values[i - 1];
        let r = &values[i + 1] - pred;
        set.push(format!("phi n={n}"), rational_to_f64(&r.abs()), RECURRENCE_TOL);
    }
    for n in 1..=n_max as i64 {
        let i = n as usize;
        let den = int(2 * n * n - 1);
        let pred = int(4 * n * n + 4 * n - 4) / &den * energy_exact(values, i)
            - int(2 * n * n + 4 * n + 1) / &den * energy_exact(values, i - 1);
        let r = energy_exact(values, i + 1) - pred;
        set.push(format!("energy n={n}"), rational_to_f64(&r.abs()), RECURRENCE_TOL);
    }
    Ok(set)
}

/// Extends `phi(0) = 0, phi(1) = 1, phi(2) = c` by the binomial recurrence.
pub fn solve_binomial_recurrence(c: &BigRational, n_max: u32) -> Vec<BigRational> {
    let mut values = vec![BigRational::zero(), BigRational::one(), c.clone()];
    values.truncate(n_max as usize + 1);
    while values.len() <= n_max as usize {
        let n = values.len() as u32 - 1;
        let next = binomial_prediction(&values, n);
        values.push(next);
    }
    values
}

/// One row of an exported structure-function table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub n: u32,
    pub phi: f64,
    pub energy: f64,
    pub binomial_residual: Option<f64>,
    pub three_term_residual: Option<f64>,
    pub energy_residual: Option<f64>,
}

/// Rows `0..=n_max` with recurrence residuals where they are defined.
pub fn table_rows(spec: &StructureFunctionSpec, n_max: u32) -> Result<Vec<TableRow>> {
    spec.validate()?;
    let exact = spec.table_exact(n_max + 2)?;
    let mut rows = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let i = n as usize;
        // residual of the equation that determines phi(n)
        let binomial_residual = (n >= 3).then(|| {
            rational_to_f64(&(&exact[i] - binomial_prediction(&exact, n - 1)).abs())
        });
        let three_term_residual = (n >= 3).then(|| {
            let k = n as i64 - 1;
            let pred = int(2 * (k + 1)) / int(k) * &exact[i - 1] - int(k + 1) / int(k - 1) * &exact[i - 2];
            rational_to_f64(&(&exact[i] - pred).abs())
        });
        let energy_residual = (n >= 2).then(|| {
            let k = n as i64 - 1;
            let den = int(2 * k * k - 1);
            let pred = int(4 * k * k + 4 * k - 4) / &den * energy_exact(&exact, i - 1)
                - int(2 * k * k + 4 * k + 1) / &den * energy_exact(&exact, i - 2);
            rational_to_f64(&(energy_exact(&exact, i) - pred).abs())
        });
        rows.push(TableRow {
            n,
            phi: rational_to_f64(&exact[i]),
            energy: rational_to_f64(&energy_exact(&exact, i)),
            binomial_residual,
            three_term_residual,
            energy_residual,
        });
    }
    Ok(rows)
}

/// Writes the table as CSV with columns
/// `n,phi,energy,binomial_residual,three_term_residual,energy_residual`.
pub fn write_table_csv<W: Write>(rows: &[TableRow], mut out: W) -> Result<()> {
    writeln!(out, "n,phi,energy,binomial_residual,three_term_residual,energy_residual")?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n,
            r.phi,
            r.energy,
            opt(r.binomial_residual),
            opt(r.three_term_residual),
            opt(r.energy_residual)
        )?;
    }
    Ok(())
}
