//! Weak-equality checks on ladder states, the brute-force structure
//! function oracle, commutator identities, and the run report.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsf::{check_binomial_recurrence_exact, check_three_term_exact, StructureFunctionSpec};
use crate::error::{Error, Result};
use crate::expansion::{check_example1, check_example2, check_f_independence, expand_annihilation_product};
use crate::fock::{build_space, is_fermionic, FockSpace, ModeSpec, SparseOperator};
use crate::phi::{
    classify, deformation_parameter, generate_family_seeded, max_modulus, CMatrix, PhiFamily, PhiFile,
    PhiFileMode, Realizability,
};
use crate::quasiboson::{
    check_chi_condition, check_interior, ladder_basis, Assembler, OperatorPair, DEFAULT_RANK_TOL,
};
use crate::residual::{ResidualSet, DEFAULT_TOL};
use crate::sparse::{vec_axpy, vec_norm, vec_scale, vec_sub};

/// Environment variable that sets the worker count of a report run.
pub const THREADS_ENV: &str = "QBOSON_THREADS";

/// Pass threshold and Gram rank threshold used by the suites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub tol: f64,
    pub rank_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, rank_tol: DEFAULT_RANK_TOL }
    }
}

/// `g(N)` on vectors where `N` has eigenvalues among the nodes
/// `0..values.len()`, through the Newton form of the interpolant.
#[derive(Debug, Clone)]
pub struct NumberFunction {
    coeffs: Vec<f64>,
}

impl NumberFunction {
    /// `values[k] = g(k)`.
    pub fn new(values: &[f64]) -> Self {
        let mut diffs = values.to_vec();
        let mut coeffs = Vec::with_capacity(values.len());
        let mut factorial = 1.0;
        for j in 0..values.len() {
            if j > 0 {
                factorial *= j as f64;
                for i in 0..values.len() - j {
                    diffs[i] = diffs[i + 1] - diffs[i];
                }
            }
            coeffs.push(diffs[0] / factorial);
        }
        Self { coeffs }
    }

    /// `phi(N + shift)` over nodes `0..nodes`.
    pub fn of_spec(spec: &StructureFunctionSpec, shift: u32, nodes: usize) -> Result<Self> {
        let values = (0..nodes as u32).map(|k| spec.eval(k + shift)).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(&values))
    }

    pub fn apply(&self, number: &SparseOperator, v: &[Complex64]) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); v.len()];
        let mut w = v.to_vec();
        for (j, &c) in self.coeffs.iter().enumerate() {
            vec_axpy(Complex64::new(c, 0.0), &w, &mut acc);
            if j + 1 < self.coeffs.len() {
                let mut next = number.apply(&w);
                vec_axpy(Complex64::new(-(j as f64), 0.0), &w, &mut next);
                w = next;
            }
        }
        acc
    }
}

/// Number operator of one mode: `Delta/f` at q = 1, the constituent count
/// at the one-hot position for q < 1, else the pair count over the rows
/// `phi` touches.
pub fn mode_number(asm: &Assembler<'_>, phi: &CMatrix) -> Result<SparseOperator> {
    if is_fermionic(asm.space().q()) {
        asm.number_q1(phi)
    } else {
        asm.number_qlt1(phi).or_else(|_| asm.pair_count(phi))
    }
}

fn choose(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn rel(x: &SparseOperator, scale: f64) -> f64 {
    x.spectral_norm() / scale.max(1.0)
}

/// Running maximum of one relation over the states of a level.
#[derive(Default)]
struct Worst {
    value: f64,
    states: usize,
}

impl Worst {
    fn add(&mut self, r: f64) {
        // NaN must surface
        self.value = if r.is_nan() || self.value.is_nan() { f64::NAN } else { self.value.max(r) };
        self.states += 1;
    }

    fn push(&self, set: &mut ResidualSet, label: String, tol: f64) {
        if self.states > 0 {
            set.push_probed(label, self.value, tol, self.states);
        }
    }
}

pub fn weak_equality_suite(
    space: &FockSpace,
    family: &PhiFamily,
    spec: &StructureFunctionSpec,
    n_max: u32,
) -> Result<ResidualSet> {
    weak_equality_suite_with(space, family, spec, n_max, Tolerances::default())
}

/// Oscillator relations on every non-null ladder state up to level
/// `n_max`, each normalized by the state norm and reported as the maximum
/// over states and modes per level.
pub fn weak_equality_suite_with(
    space: &FockSpace,
    family: &PhiFamily,
    spec: &StructureFunctionSpec,
    n_max: u32,
    tols: Tolerances,
) -> Result<ResidualSet> {
    let n_max = n_max as usize;
    check_interior(space, n_max)?;
    let asm = Assembler::new(space)?;
    let pairs = asm.pairs(family)?;
    let numbers = family.matrices().iter().map(|p| mode_number(&asm, p)).collect::<Result<Vec<_>>>()?;
    let nodes = n_max + 2;
    let phi_n = NumberFunction::of_spec(spec, 0, nodes)?;
    let phi_n1 = NumberFunction::of_spec(spec, 1, nodes)?;
    let basis = ladder_basis(space, &pairs, n_max, tols.rank_tol)?;
    let tol = tols.tol;

    let mut set = ResidualSet::new(
        "verify/weak-equality",
        "A^dag A = phi(N), A A^dag = phi(N+1), [N, A^dag] = A^dag and independent modes on all ladder states",
    );
    for n in 0..=n_max {
        let live: Vec<_> = basis.level(n).filter(|s| !s.null).collect();
        if live.is_empty() {
            let predicted: f64 = (1..=n as u32).map(|k| spec.eval(k)).product::<Result<f64>>()?;
            if predicted.abs() <= tol {
                set.push_structural(format!("null level n={n}"), "Pauli-blocked; phi predicts zero norm");
            } else {
                set.push_failure(
                    format!("null level n={n}"),
                    format!("level is Pauli-blocked but the structure function predicts norm^2 {predicted}"),
                );
            }
            continue;
        }
        let (mut lower, mut raise, mut count, mut cross, mut create) =
            (Worst::default(), Worst::default(), Worst::default(), Worst::default(), Worst::default());
        for s in &live {
            let v = &s.vector;
            for (a, pa) in pairs.iter().enumerate() {
                let up = pa.a_dag.apply(v);
                let aad = pa.a.apply(&up);
                raise.add(vec_norm(&vec_sub(&aad, &phi_n1.apply(&numbers[a], v))) / s.norm);
                let ada = pa.a_dag.apply(&pa.a.apply(v));
                lower.add(vec_norm(&vec_sub(&ada, &phi_n.apply(&numbers[a], v))) / s.norm);
                let mut c = vec_sub(&numbers[a].apply(&up), &pa.a_dag.apply(&numbers[a].apply(v)));
                vec_axpy(Complex64::new(-1.0, 0.0), &up, &mut c);
                count.add(vec_norm(&c) / s.norm);
                for (b, pb) in pairs.iter().enumerate() {
                    if b == a {
                        continue;
                    }
                    let ab = vec_sub(&pa.a.apply(&pb.a_dag.apply(v)), &pb.a_dag.apply(&pa.a.apply(v)));
                    cross.add(vec_norm(&ab) / s.norm);
                    if b > a && n < n_max {
                        let dd = vec_sub(&pa.a_dag.apply(&pb.a_dag.apply(v)), &pb.a_dag.apply(&up));
                        create.add(vec_norm(&dd) / s.norm);
                    }
                }
            }
        }
        lower.push(&mut set, format!("A^dag A - phi(N), n={n}"), tol);
        raise.push(&mut set, format!("A A^dag - phi(N+1), n={n}"), tol);
        count.push(&mut set, format!("[N, A^dag] - A^dag, n={n}"), tol);
        cross.push(&mut set, format!("[A_a, A^dag_b] a != b, n={n}"), tol);
        create.push(&mut set, format!("[A^dag_a, A^dag_b], n={n}"), tol);
    }
    for n in 1..=n_max {
        let predicted: f64 = (1..=n as u32).map(|k| spec.eval(k)).product::<Result<f64>>()?;
        let mut norm_law = Worst::default();
        for a in 0..pairs.len() {
            let word = vec![a; n];
            if let Some(s) = basis.level(n).find(|s| s.word == word) {
                norm_law.add((s.norm * s.norm - predicted).abs() / predicted.abs().max(1.0));
            }
        }
        norm_law.push(&mut set, format!("ladder norm law, n={n}"), tol);
    }
    Ok(set)
}

/// One level of the empirical structure function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OracleLevel {
    /// `phi(n) = ||(A^dag)^n|O>||^2 / ||(A^dag)^(n-1)|O>||^2`, with the
    /// part of `A (A^dag)^n |O>` not parallel to `(A^dag)^(n-1)|O>`.
    Resolved { n: u32, phi: f64, defect: f64 },
    /// `(A^dag)^n |O>` vanishes: Pauli blocking, `phi(n) = 0`.
    Null { n: u32, defect: f64 },
    /// An earlier level is null, so the ratio is undefined.
    Exhausted { n: u32 },
}

impl OracleLevel {
    pub fn n(&self) -> u32 {
        match *self {
            Self::Resolved { n, .. } | Self::Null { n, .. } | Self::Exhausted { n } => n,
        }
    }

    pub fn phi(&self) -> Option<f64> {
        match *self {
            Self::Resolved { phi, .. } => Some(phi),
            Self::Null { .. } => Some(0.0),
            Self::Exhausted { .. } => None,
        }
    }

    pub fn defect(&self) -> Option<f64> {
        match *self {
            Self::Resolved { defect, .. } | Self::Null { defect, .. } => Some(defect),
            Self::Exhausted { .. } => None,
        }
    }
}

/// Empirical `phi(1..=n_max)` from single-mode ladder states.
pub fn brute_force_phi(
    space: &FockSpace,
    pair: &OperatorPair,
    n_max: u32,
    rank_tol: f64,
) -> Result<Vec<OracleLevel>> {
    if n_max > 0 {
        check_interior(space, n_max as usize - 1)?;
    }
    let mut out = Vec::with_capacity(n_max as usize);
    let mut prev = space.vacuum();
    let mut prev_norm = 1.0;
    let mut exhausted = false;
    for n in 1..=n_max {
        if exhausted {
            out.push(OracleLevel::Exhausted { n });
            continue;
        }
        let cur = pair.a_dag.apply(&prev);
        let norm = vec_norm(&cur);
        let down = pair.a.apply(&cur);
        if norm * norm <= rank_tol * (norm * norm).max(1.0) {
            out.push(OracleLevel::Null { n, defect: vec_norm(&down) / prev_norm });
            exhausted = true;
            continue;
        }
        let phi = (norm * norm) / (prev_norm * prev_norm);
        let defect = vec_norm(&vec_sub(&down, &vec_scale(Complex64::new(phi, 0.0), &prev))) / prev_norm;
        out.push(OracleLevel::Resolved { n, phi, defect });
        prev = cur;
        prev_norm = norm;
    }
    Ok(out)
}

/// Empirical structure function of every mode against `spec`.
pub fn oracle_suite(
    space: &FockSpace,
    family: &PhiFamily,
    spec: &StructureFunctionSpec,
    n_max: u32,
    tols: Tolerances,
) -> Result<ResidualSet> {
    let asm = Assembler::new(space)?;
    let mut set = ResidualSet::new(
        "verify/oracle",
        "A (A^dag)^n |O> = phi(n) (A^dag)^(n-1) |O>, measured per mode",
    );
    for pair in asm.pairs(family)? {
        let mode = pair.alpha + 1;
        for level in brute_force_phi(space, &pair, n_max, tols.rank_tol)? {
            let n = level.n();
            let predicted = spec.eval(n)?;
            match level {
                OracleLevel::Resolved { phi, defect, .. } => {
                    set.push(
                        format!("mode {mode}: phi({n})"),
                        (phi - predicted).abs() / predicted.abs().max(1.0),
                        tols.tol,
                    );
                    set.push(format!("mode {mode}: parallelism defect n={n}"), defect, tols.tol);
                }
                OracleLevel::Null { .. } if predicted.abs() <= tols.tol => {
                    set.push_structural(format!("mode {mode}: phi({n})"), "Pauli-null level, phi = 0");
                }
                OracleLevel::Null { .. } => set.push_failure(
                    format!("mode {mode}: phi({n})"),
                    format!("Pauli-null level but the structure function gives {predicted}"),
                ),
                OracleLevel::Exhausted { .. } => {
                    set.push_structural(format!("mode {mode}: phi({n})"), "beyond a null level");
                }
            }
        }
    }
    Ok(set)
}

fn require_q1(space: &FockSpace, what: &str) -> Result<()> {
    if !is_fermionic(space.q()) {
        return Err(Error::Contract(format!("{what} needs q = 1 constituents (q = {})", space.q())));
    }
    Ok(())
}

pub fn commutator_cascade_suite(
    space: &FockSpace,
    phi: &CMatrix,
    spec: &StructureFunctionSpec,
    n_max: u32,
) -> Result<ResidualSet> {
    commutator_cascade_suite_with(space, phi, spec, n_max, Tolerances::default())
}

/// Commutators of `F = Delta - 1 + phi(N+1) - phi(N)` with `A^dag`. `F`
/// vanishes weakly for a realization; its nested commutators with `A^dag`
/// must then annihilate the vacuum.
pub fn commutator_cascade_suite_with(
    space: &FockSpace,
    phi: &CMatrix,
    spec: &StructureFunctionSpec,
    n_max: u32,
    tols: Tolerances,
) -> Result<ResidualSet> {
    require_q1(space, "the commutator cascade")?;
    let tol = tols.tol;
    let asm = Assembler::new(space)?;
    let pair = asm.pair(phi, 0)?;
    let delta = asm.delta(phi, phi)?;
    let number = asm.number_q1(phi)?;
    let psi = phi * phi.adjoint() * phi;
    let cubic = asm.pair(&psi, 0)?;
    let mut set = ResidualSet::new(
        "verify/commutator-cascade",
        "[A^dag A, Delta], [F, A^dag] and nested commutators of F with A^dag on the vacuum",
    );

    let ada = &pair.a_dag * &pair.a;
    let lhs = ada.commutator(&delta);
    let rhs = (&(&pair.a_dag * &cubic.a) - &(&cubic.a_dag * &pair.a)).scale_re(2.0);
    set.push("[A^dag A, Delta] expansion (strong)", rel(&(&lhs - &rhs), rhs.spectral_norm()), tol);
    set.push("[A^dag A, Delta] (strong)", rel(&lhs, ada.spectral_norm() * delta.spectral_norm()), tol);

    let nodes = n_max as usize + 3;
    let values = (0..nodes as u32 + 2).map(|k| spec.eval(k)).collect::<Result<Vec<_>>>()?;
    let gap = NumberFunction::new(&(0..nodes).map(|k| values[k + 1] - values[k] - 1.0).collect::<Vec<_>>());
    let curvature = NumberFunction::new(
        &(0..nodes).map(|k| values[k + 2] - 2.0 * values[k + 1] + values[k]).collect::<Vec<_>>(),
    );
    let apply_f = |v: &[Complex64]| {
        let mut out = delta.apply(v);
        vec_axpy(Complex64::new(1.0, 0.0), &gap.apply(&number, v), &mut out);
        out
    };

    let mut ladder = vec![space.vacuum()];
    for _ in 0..=n_max {
        let next = pair.a_dag.apply(ladder.last().expect("nonempty"));
        ladder.push(next);
    }
    for k in 0..n_max as usize {
        let v = &ladder[k];
        let norm = vec_norm(v);
        if norm * norm <= tols.rank_tol {
            continue;
        }
        let lhs = vec_sub(&apply_f(&ladder[k + 1]), &pair.a_dag.apply(&apply_f(v)));
        let mut rhs = vec_scale(Complex64::new(2.0, 0.0), &cubic.a_dag.apply(v));
        vec_axpy(Complex64::new(1.0, 0.0), &pair.a_dag.apply(&curvature.apply(&number, v)), &mut rhs);
        set.push(format!("[F, A^dag] weak, n={k}"), vec_norm(&vec_sub(&lhs, &rhs)) / norm, tol);
    }
    for n in 1..=n_max {
        let mut acc = vec![Complex64::new(0.0, 0.0); space.dim()];
        for j in 0..=n {
            let mut term = apply_f(&ladder[(n - j) as usize]);
            for _ in 0..j {
                term = pair.a_dag.apply(&term);
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            vec_axpy(Complex64::new(sign * choose(n, j), 0.0), &term, &mut acc);
        }
        set.push(
            format!("cascade n={n}"),
            vec_norm(&acc) / vec_norm(&ladder[n as usize]).max(1.0),
            tol,
        );
    }
    Ok(set)
}

pub fn propositions_suite(space: &FockSpace, phi: &CMatrix, n_max: u32) -> Result<ResidualSet> {
    propositions_suite_with(space, phi, n_max, Tolerances::default())
}

/// Strong identities of `Delta`, `epsilon = 1 - Delta` and `N = Delta/f`
/// with the composite operators, as spectral-norm residuals.
pub fn propositions_suite_with(
    space: &FockSpace,
    phi: &CMatrix,
    n_max: u32,
    tols: Tolerances,
) -> Result<ResidualSet> {
    require_q1(space, "the number-operator identities")?;
    let tol = tols.tol;
    let f = deformation_parameter(phi).f;
    let asm = Assembler::new(space)?;
    let pair = asm.pair(phi, 0)?;
    let (a, ad) = (&pair.a, &pair.a_dag);
    let delta = asm.delta(phi, phi)?;
    let eps = asm.epsilon(phi)?;
    let number = asm.number_q1(phi)?;
    let ada = ad * a;
    let fad = ad.scale_re(f);
    let mut set = ResidualSet::new(
        "verify/propositions",
        "commutators of Delta, epsilon and N with A, A^dag; powers of A^dag A and epsilon; nested commutators of N",
    );

    set.push("[Delta, A^dag] - f A^dag", rel(&(&delta.commutator(ad) - &fad), fad.spectral_norm()), tol);
    set.push(
        "[Delta, A] + f A",
        rel(&(&delta.commutator(a) + &a.scale_re(f)), fad.spectral_norm()),
        tol,
    );
    set.push("[epsilon, A^dag] + f A^dag", rel(&(&eps.commutator(ad) + &fad), fad.spectral_norm()), tol);
    set.push("Delta - Delta^dag", rel(&(&delta - &delta.adjoint()), delta.spectral_norm()), tol);
    set.push("[Delta, N]", rel(&delta.commutator(&number), delta.spectral_norm()), tol);
    set.push("[A, A^dag] - epsilon", rel(&(&a.commutator(ad) - &eps), eps.spectral_norm()), tol);
    set.push("[N, A^dag] - A^dag", rel(&(&number.commutator(ad) - ad), ad.spectral_norm()), tol);
    set.push("[A^dag A, epsilon]", rel(&ada.commutator(&eps), ada.spectral_norm()), tol);

    let shifted = &ada + &eps;
    let eps_f = eps.shift(Complex64::new(-f, 0.0));
    for n in 0..=n_max {
        let p = ada.pow(n);
        let rhs = ad * &(&shifted.pow(n) - &p);
        set.push(
            format!("[(A^dag A)^n, A^dag], n={n}"),
            rel(&(&p.commutator(ad) - &rhs), rhs.spectral_norm()),
            tol,
        );
        let e = eps.pow(n);
        let rhs = ad * &(&eps_f.pow(n) - &e);
        set.push(
            format!("[epsilon^n, A^dag], n={n}"),
            rel(&(&e.commutator(ad) - &rhs), rhs.spectral_norm()),
            tol,
        );
    }

    // L_0 = N, L_{n+1} = [L_n, A^dag]; closed form with chi(x, y) = (1 - y)/f,
    // where chi(A^dag A + n eps - s_n f, eps - n f) = N + n.
    let vacuum = space.vacuum();
    let mut nested = vec![number.clone()];
    for n in 1..=n_max {
        let next = nested.last().expect("nonempty").commutator(ad);
        let mut closed = &ad.pow(n) * &number.shift(Complex64::new(n as f64, 0.0));
        for (k, l) in nested.iter().enumerate() {
            let k = k as u32;
            closed = &closed - &(&ad.pow(n - k) * l).scale_re(choose(n, k));
        }
        set.push(
            format!("nested commutator closed form, n={n}"),
            rel(&(&next - &closed), closed.spectral_norm()),
            tol,
        );
        let on_vacuum = next.apply(&vacuum);
        if n == 1 {
            set.push("L_1|O> - A^dag|O>", vec_norm(&vec_sub(&on_vacuum, &ad.apply(&vacuum))), tol);
        } else {
            set.push(format!("L_n|O>, n={n}"), vec_norm(&on_vacuum), tol);
        }
        nested.push(next);
    }
    Ok(set)
}

/// Where the `Phi` family of a run comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSource {
    /// A family file; relative paths resolve against the config file.
    File { path: PathBuf },
    /// Block family with identity (`seed` absent) or seeded Haar unitaries.
    Generate {
        m: usize,
        modes: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Entries given in the config, 1-based as in family files.
    Inline { modes: Vec<PhiFileMode> },
}

/// One verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: ModeSpec,
    pub phi: PhiSource,
    pub dsf: StructureFunctionSpec,
    pub n_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    /// Report destination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl RunConfig {
    /// Parses a config file and resolves relative family and report paths
    /// against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let PhiSource::File { path: p } = &mut config.phi {
            resolve(p);
        }
        if let Some(p) = &mut config.output {
            resolve(p);
        }
        Ok(config)
    }

    pub fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances { tol: self.tol.unwrap_or(d.tol), rank_tol: self.rank_tol.unwrap_or(d.rank_tol) }
    }

    /// Checks the run for internal consistency and returns the effective
    /// mode spec.
    pub fn validate(&self) -> Result<ModeSpec> {
        let space = self.space.validated().map_err(|e| config_err(format!("space: {e}")))?;
        self.dsf.validate().map_err(|e| config_err(format!("dsf: {e}")))?;
        let q = space.q;
        match (&self.dsf, is_fermionic(q)) {
            (StructureFunctionSpec::FermionicQuadratic { .. }, false) => {
                return Err(config_err(format!(
                    "dsf: fermionic_quadratic needs q = 1 constituents but space.q = {q}; q < 1 constituents use q_fermion_square"
                )))
            }
            (spec, _) => {
                if let Some(dq) = spec.constituent_q() {
                    if dq != q {
                        return Err(config_err(format!(
                            "dsf: structure function is for q = {dq} but space.q = {q}"
                        )));
                    }
                }
            }
        }
        if self.n_max == 0 {
            return Err(config_err("n_max: must be at least 1"));
        }
        if !is_fermionic(q) && self.n_max + 1 > space.cutoff {
            return Err(config_err(format!(
                "n_max: {} needs space.cutoff >= {} (have {})",
                self.n_max,
                self.n_max + 1,
                space.cutoff
            )));
        }
        for (name, v) in [("tol", self.tol), ("rank_tol", self.rank_tol)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(config_err(format!("{name}: must be a positive number, got {v}")));
                }
            }
        }
        Ok(space)
    }

    /// Loads or generates the family for the validated space.
    pub fn family(&self, space: &ModeSpec) -> Result<PhiFamily> {
        let family = match &self.phi {
            PhiSource::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_err(format!("phi.path: cannot read {}: {e}", path.display())))?;
                let file: PhiFile = serde_json::from_str(&text)
                    .map_err(|e| config_err(format!("phi.path: {}: {e}", path.display())))?;
                if file.q != space.q {
                    return Err(config_err(format!(
                        "phi.path: family file has q = {} but space.q = {}",
                        file.q, space.q
                    )));
                }
                file.to_family().map_err(|e| config_err(format!("phi.path: {e}")))?
            }
            PhiSource::Generate { m, modes, seed } => {
                let generated = generate_family_seeded(space.d_a, space.d_b, *m, *modes, *seed)
                    .map_err(|e| config_err(format!("phi: {e}")))?;
                PhiFamily::new(space.d_a, space.d_b, space.q, generated.matrices().to_vec())?
            }
            PhiSource::Inline { modes } => {
                let file = PhiFile { d_a: space.d_a, d_b: space.d_b, q: space.q, modes: modes.clone() };
                file.to_family().map_err(|e| config_err(format!("phi.modes: {e}")))?
            }
        };
        if family.is_empty() {
            return Err(config_err("phi: family has no modes"));
        }
        if family.d_a() != space.d_a || family.d_b() != space.d_b {
            return Err(config_err(format!(
                "phi: family is {}x{} but the space has d_a = {}, d_b = {}",
                family.d_a(),
                family.d_b(),
                space.d_a,
                space.d_b
            )));
        }
        Ok(family)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpaceSummary {
    pub d_a: usize,
    pub d_b: usize,
    pub q: f64,
    pub cutoff: u32,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub modes: usize,
    /// `f = 2 Tr(Phi^dag Phi Phi^dag Phi)` per mode.
    pub deformation: Vec<f64>,
    pub realizability: Realizability,
}

#[derive(Debug, Clone, Serialize)]
pub struct DsfSummary {
    pub spec: StructureFunctionSpec,
    pub description: String,
    /// `phi(0..=n_max+1)`, where defined.
    pub values: Vec<f64>,
}

/// Probed range; nothing beyond it is certified.
#[derive(Debug, Clone, Serialize)]
pub struct ProbedRange {
    pub n_max: u32,
    pub tol: f64,
    pub rank_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub config: RunConfig,
    pub space: SpaceSummary,
    pub family: FamilySummary,
    pub dsf: DsfSummary,
    pub probed: ProbedRange,
    pub suites: Vec<ResidualSet>,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.suites
            .iter()
            .flat_map(|s| s.failures().map(move |r| (s.name.as_str(), r.label.as_str())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

type Suite<'a> = Box<dyn Fn() -> Result<ResidualSet> + Send + Sync + 'a>;

fn per_mode(
    name: &str,
    anchor: &str,
    family: &PhiFamily,
    run: impl Fn(&CMatrix) -> Result<ResidualSet>,
) -> Result<ResidualSet> {
    let mut set = ResidualSet::new(name, anchor);
    for (a, phi) in family.matrices().iter().enumerate() {
        set.extend(run(phi)?.prefixed(&format!("mode {}: ", a + 1)));
    }
    Ok(set)
}

/// Moves the largest entry of a 2x2 `Phi` to the corner by relabelling
/// constituent modes.
fn pivot_to_corner(phi: &CMatrix) -> CMatrix {
    let top = max_modulus(phi);
    let (i, j) = (0..phi.nrows())
        .flat_map(|i| (0..phi.ncols()).map(move |j| (i, j)))
        .find(|&(i, j)| phi[(i, j)].norm() == top)
        .unwrap_or((0, 0));
    let mut p = phi.clone();
    p.swap_rows(0, i);
    p.swap_columns(0, j);
    p
}

fn consistency_suite(family: &PhiFamily, spec: &StructureFunctionSpec, tol: f64) -> Result<ResidualSet> {
    let mut set = ResidualSet::new(
        "verify/consistency",
        "deformation parameter of every mode equals 2 - phi(2)",
    );
    let expected = 2.0 - spec.eval(2)?;
    for (a, phi) in family.matrices().iter().enumerate() {
        let d = deformation_parameter(phi);
        set.push(format!("mode {}: f - (2 - phi(2))", a + 1), (d.f - expected).abs() + d.imag, tol);
    }
    Ok(set)
}

fn worker_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| config_err(format!("{THREADS_ENV} = {v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

/// Runs every suite that applies to the configured space, family and
/// structure function. Config problems are errors; failed relations are
/// recorded in the report.
pub fn full_report(config: &RunConfig) -> Result<VerificationReport> {
    let mode_spec = config.validate()?;
    let family = config.family(&mode_spec)?;
    let space = build_space(mode_spec).map_err(|e| config_err(format!("space: {e}")))?;
    let tols = config.tolerances();
    let (q, n_max, spec) = (mode_spec.q, config.n_max, &config.dsf);
    let realizability = classify(&family, q)?;

    let mut suites: Vec<Suite<'_>> = Vec::new();
    let evidence = realizability.clone();
    suites.push(Box::new(move || {
        let mut set = evidence.evidence.clone();
        set.name = "phi/realizability".into();
        if let Realizability::NotRealizable { reasons } = &evidence.verdict {
            set.push_failure("realizable", reasons.join("; "));
        }
        Ok(set)
    }));
    let (sp, fam) = (&space, &family);
    suites.push(Box::new(move || weak_equality_suite_with(sp, fam, spec, n_max, tols)));
    suites.push(Box::new(move || oracle_suite(sp, fam, spec, n_max, tols)));
    suites.push(Box::new(move || check_chi_condition(spec, n_max)));
    if is_fermionic(q) {
        suites.push(Box::new(move || consistency_suite(fam, spec, tols.tol)));
        suites.push(Box::new(move || {
            per_mode("verify/commutator-cascade", "nested commutators of F with A^dag", fam, |p| {
                commutator_cascade_suite_with(sp, p, spec, n_max, tols)
            })
        }));
        suites.push(Box::new(move || {
            per_mode("verify/propositions", "identities of Delta, epsilon and N", fam, |p| {
                propositions_suite_with(sp, p, n_max, tols)
            })
        }));
        let rec_n = n_max.max(2);
        suites.push(Box::new(move || check_binomial_recurrence_exact(&spec.table_exact(rec_n + 1)?, rec_n)));
        suites.push(Box::new(move || check_three_term_exact(&spec.table_exact(rec_n + 2)?, rec_n)));
    } else {
        let cutoff = mode_spec.cutoff;
        suites.push(Box::new(move || {
            per_mode("expansion/annihilation-product", "A (A^dag)^n reordered into normal form", fam, |p| {
                let mut set = ResidualSet::new("", "");
                for n in 1..=n_max.min(cutoff) {
                    set.extend(expand_annihilation_product(sp, p, n)?);
                }
                Ok(set)
            })
        }));
        suites.push(Box::new(move || check_example1(q, cutoff)));
        if mode_spec.d_a == 2 && mode_spec.d_b == 2 {
            suites.push(Box::new(move || {
                per_mode("expansion/two-by-two", "2x2 Phi reduced system", fam, |p| {
                    check_example2(&pivot_to_corner(p), q, n_max)
                })
            }));
        }
        suites.push(Box::new(move || check_f_independence(q)));
    }

    let run = || -> Vec<ResidualSet> {
        suites
            .par_iter()
            .enumerate()
            .map(|(i, suite)| {
                suite().unwrap_or_else(|e| {
                    let mut set = ResidualSet::new(format!("suite {}", i + 1), "suite could not run");
                    set.push_failure("error", e.to_string());
                    set
                })
            })
            .collect()
    };
    let mut sets = match worker_count()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(config_err)?
            .install(run),
        None => run(),
    };
    if tols.tol != DEFAULT_TOL {
        for set in &mut sets {
            set.retolerance(DEFAULT_TOL, tols.tol);
        }
    }

    let values = (0..=n_max + 1).map_while(|n| spec.eval(n).ok()).collect();
    let verdict = if sets.iter().all(ResidualSet::passed) { Verdict::Pass } else { Verdict::Fail };
    Ok(VerificationReport {
        config: config.clone(),
        space: SpaceSummary {
            d_a: mode_spec.d_a,
            d_b: mode_spec.d_b,
            q,
            cutoff: mode_spec.cutoff,
            dim: space.dim(),
        },
        family: FamilySummary {
            modes: family.len(),
            deformation: family.matrices().iter().map(|p| deformation_parameter(p).f).collect(),
            realizability: realizability.verdict,
        },
        dsf: DsfSummary { spec: spec.clone(), description: spec.describe(), values },
        probed: ProbedRange { n_max, tol: tols.tol, rank_tol: tols.rank_tol },
        suites: sets,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsf::{fermionic_dsf, qfermionic_dsf};
    use crate::phi::matrix_from_entries;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn q1_space(d: usize) -> FockSpace {
        build_space(ModeSpec::new(d, d, 1.0, 1).unwrap()).unwrap()
    }

    fn m2_family() -> PhiFamily {
        generate_family_seeded(4, 4, 2, 2, Some(11)).unwrap()
    }

    fn one_hot(q: f64) -> PhiFamily {
        let e = |i, j| matrix_from_entries(2, 2, &[(i, j, c(1.0))]);
        PhiFamily::new(2, 2, q, vec![e(0, 0), e(1, 1)]).unwrap()
    }

    #[test]
    fn newton_form_reproduces_values() {
        let space = build_space(ModeSpec::new(1, 1, 0.5, 4).unwrap()).unwrap();
        let asm = Assembler::new(&space).unwrap();
        let number = asm.number_qlt1(&matrix_from_entries(1, 1, &[(0, 0, c(1.0))])).unwrap();
        let values: Vec<f64> = (0..5).map(|k| qfermionic_dsf(0.5, k).unwrap()).collect();
        let g = NumberFunction::new(&values);
        for k in 0..5u32 {
            let idx = space.index_of(&[k, 0]).unwrap();
            let mut v = vec![c(0.0); space.dim()];
            v[idx] = c(1.0);
            let out = g.apply(&number, &v);
            assert!((out[idx].re - values[k as usize]).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn fermionic_block_family_is_weakly_an_oscillator() {
        let space = q1_space(4);
        let spec = StructureFunctionSpec::FermionicQuadratic { m: 2 };
        let set = weak_equality_suite(&space, &m2_family(), &spec, 2).unwrap();
        assert!(set.passed(), "{set:#?}");
        assert!(set.max() < 1e-10);
        assert!(set.get("[A_a, A^dag_b] a != b, n=1").is_some());
        // the m = 1 structure function is wrong for rank-2 blocks
        let wrong = StructureFunctionSpec::FermionicQuadratic { m: 1 };
        assert!(!weak_equality_suite(&space, &m2_family(), &wrong, 2).unwrap().passed());
    }

    #[test]
    fn one_hot_family_realizes_q_square() {
        let space = build_space(ModeSpec::new(2, 2, 0.5, 4).unwrap()).unwrap();
        let spec = StructureFunctionSpec::QFermionSquare { q: 0.5 };
        let set = weak_equality_suite(&space, &one_hot(0.5), &spec, 3).unwrap();
        assert!(set.passed(), "{set:#?}");
        assert!(matches!(
            weak_equality_suite(&space, &one_hot(0.5), &spec, 4),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn row_sharing_phi_defeats_every_candidate() {
        let space = build_space(ModeSpec::new(2, 2, 0.5, 3).unwrap()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = matrix_from_entries(2, 2, &[(0, 0, c(s)), (0, 1, c(s))]);
        let family = PhiFamily::new(2, 2, 0.5, vec![phi]).unwrap();
        let candidates = [
            StructureFunctionSpec::QFermionSquare { q: 0.5 },
            StructureFunctionSpec::FermionicQuadratic { m: 1 },
            StructureFunctionSpec::FermionicQuadratic { m: 2 },
            StructureFunctionSpec::Parameterized { q: 0.5, p1: 1.0, p2: 1.0, p3: 1.0 },
        ];
        for spec in candidates {
            let set = weak_equality_suite(&space, &family, &spec, 2).unwrap();
            let r = set.max_matching("A A^dag - phi(N+1)").unwrap();
            assert!(r > 0.05, "{spec:?}: {r}");
        }
    }

    #[test]
    fn oracle_matches_fermionic_and_q_structure_functions() {
        let space = q1_space(4);
        let asm = Assembler::new(&space).unwrap();
        let pair = asm.pair(&m2_family().matrices()[0], 0).unwrap();
        let levels = brute_force_phi(&space, &pair, 4, DEFAULT_RANK_TOL).unwrap();
        for n in 1..=2 {
            let phi = levels[n - 1].phi().unwrap();
            assert!((phi - fermionic_dsf(2, n as u32).unwrap()).abs() < 1e-10);
        }
        assert!(matches!(levels[2], OracleLevel::Null { n: 3, .. }));
        assert!(matches!(levels[3], OracleLevel::Exhausted { n: 4 }));

        let space = build_space(ModeSpec::new(2, 2, 0.5, 5).unwrap()).unwrap();
        let asm = Assembler::new(&space).unwrap();
        let pair = asm.pair(&one_hot(0.5).matrices()[1], 1).unwrap();
        let levels = brute_force_phi(&space, &pair, 5, DEFAULT_RANK_TOL).unwrap();
        for l in &levels {
            let want = qfermionic_dsf(0.5, l.n()).unwrap();
            assert!((l.phi().unwrap() - want).abs() < 1e-10, "{l:?}");
            assert!(l.defect().unwrap() < 1e-12);
        }
    }

    #[test]
    fn nondegenerate_unitary_gives_phi2_one() {
        let space = q1_space(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = matrix_from_entries(2, 2, &[(0, 0, c(s)), (1, 1, c(s))]);
        let pair = build_quasiboson_pair(&space, &phi);
        let levels = brute_force_phi(&space, &pair, 3, DEFAULT_RANK_TOL).unwrap();
        assert!((levels[1].phi().unwrap() - 1.0).abs() < 1e-12);
        assert!((2.0 - deformation_parameter(&phi).f - 1.0).abs() < 1e-12);
    }

    fn build_quasiboson_pair(space: &FockSpace, phi: &CMatrix) -> OperatorPair {
        Assembler::new(space).unwrap().pair(phi, 0).unwrap()
    }

    #[test]
    fn cascade_vanishes_and_detects_corruption() {
        let space = q1_space(4);
        let family = m2_family();
        let phi = &family.matrices()[0];
        let spec = StructureFunctionSpec::FermionicQuadratic { m: 2 };
        let set = commutator_cascade_suite(&space, phi, &spec, 3).unwrap();
        assert!(set.max() < 1e-11, "{set:#?}");

        let mut values: Vec<f64> = (0..10).map(|n| fermionic_dsf(2, n).unwrap()).collect();
        values[3] += 0.1;
        let bad = StructureFunctionSpec::Tabulated { values };
        let set = commutator_cascade_suite(&space, phi, &bad, 3).unwrap();
        assert!(set.value("cascade n=2").unwrap() > 0.05);
        assert!(set.value("cascade n=1").unwrap() < 1e-11);

        let q = build_space(ModeSpec::new(2, 2, 0.5, 3).unwrap()).unwrap();
        assert!(matches!(
            commutator_cascade_suite(&q, &one_hot(0.5).matrices()[0], &spec, 2),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn cubic_violation_breaks_strong_commutator() {
        // rank-2 Phi with unequal singular values
        let space = q1_space(2);
        let phi = matrix_from_entries(2, 2, &[(0, 0, c(0.8)), (1, 1, c(0.6))]);
        let spec = StructureFunctionSpec::FermionicQuadratic { m: 2 };
        let set = commutator_cascade_suite(&space, &phi, &spec, 2).unwrap();
        assert!(set.value("[A^dag A, Delta] expansion (strong)").unwrap() < 1e-12);
        assert!(set.value("[A^dag A, Delta] (strong)").unwrap() > 1e-2);
    }

    #[test]
    fn propositions_hold_strongly() {
        let space = q1_space(4);
        for phi in m2_family().matrices() {
            let set = propositions_suite(&space, phi, 4).unwrap();
            assert!(set.max() < 1e-11, "{set:#?}");
            assert!(set.get("[epsilon^n, A^dag], n=2").is_some());
            assert!(set.get("L_n|O>, n=2").is_some());
        }
    }

    fn q1_config() -> RunConfig {
        RunConfig {
            space: ModeSpec { d_a: 4, d_b: 4, q: 1.0, cutoff: 1 },
            phi: PhiSource::Generate { m: 2, modes: 2, seed: Some(7) },
            dsf: StructureFunctionSpec::FermionicQuadratic { m: 2 },
            n_max: 3,
            tol: None,
            rank_tol: None,
            output: None,
        }
    }

    #[test]
    fn valid_q1_run_passes_and_is_deterministic() {
        let report = full_report(&q1_config()).unwrap();
        let failed: Vec<_> = report.failures().collect();
        assert!(report.passed(), "{failed:?}");
        assert_eq!(report.to_json().unwrap(), full_report(&q1_config()).unwrap().to_json().unwrap());
    }

    #[test]
    fn wrong_rank_fails() {
        let mut cfg = q1_config();
        cfg.dsf = StructureFunctionSpec::FermionicQuadratic { m: 1 };
        let report = full_report(&cfg).unwrap();
        assert!(!report.passed());
        assert!(report.failures().any(|(s, _)| s == "verify/oracle"));
    }

    #[test]
    fn q_below_one_run_passes() {
        let cfg = RunConfig {
            space: ModeSpec { d_a: 2, d_b: 2, q: 0.5, cutoff: 4 },
            phi: PhiSource::Generate { m: 1, modes: 2, seed: None },
            dsf: StructureFunctionSpec::QFermionSquare { q: 0.5 },
            n_max: 3,
            tol: None,
            rank_tol: None,
            output: None,
        };
        let report = full_report(&cfg).unwrap();
        let failed: Vec<_> = report.failures().collect();
        assert!(report.passed(), "{failed:?}");
    }

    #[test]
    fn config_conflicts_are_reported() {
        let mut cfg = q1_config();
        cfg.space.q = 0.5;
        cfg.space.cutoff = 4;
        let err = full_report(&cfg).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("fermionic_quadratic")), "{err}");

        let mut cfg = q1_config();
        cfg.phi = PhiSource::Inline { modes: vec![] };
        assert!(matches!(full_report(&cfg), Err(Error::Config(m)) if m.contains("no modes")));

        let mut cfg = q1_config();
        cfg.phi = PhiSource::Generate { m: 3, modes: 2, seed: None };
        assert!(matches!(full_report(&cfg), Err(Error::Config(_))));

        let mut cfg = q1_config();
        cfg.dsf = StructureFunctionSpec::QFermionSquare { q: 0.5 };
        assert!(matches!(full_report(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn config_round_trips() {
        let cfg = q1_config();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        let err = serde_json::from_str::<RunConfig>(r#"{"space":{"d_a":1,"d_b":1,"q":1,"cutoff":1}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("phi"), "{err}");
    }

    #[test]
    fn pivot_moves_largest_entry() {
        let p = matrix_from_entries(2, 2, &[(1, 1, c(1.0))]);
        assert_eq!(pivot_to_corner(&p)[(0, 0)], c(1.0));
    }
}
