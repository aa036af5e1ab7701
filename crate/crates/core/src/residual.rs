use serde::{Deserialize, Serialize};

/// Default pass threshold for scale-aware residuals.
pub const DEFAULT_TOL: f64 = 1e-10;

/// One checked relation: a non-negative residual and the threshold it is
/// judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub label: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub states: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

/// A named group of residuals tied to one family of relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSet {
    pub name: String,
    /// Which relation family the entries probe.
    pub paper_ref: String,
    pub residuals: Vec<Residual>,
}

impl ResidualSet {
    pub fn new(name: impl Into<String>, anchor: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            paper_ref: anchor.into(),
            residuals: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, value: f64, tol: f64) -> &mut Residual {
        self.push_probed(label, value, tol, 0)
    }

    pub fn push_probed(
        &mut self,
        label: impl Into<String>,
        value: f64,
        tol: f64,
        states: usize,
    ) -> &mut Residual {
        let value = value.abs();
        self.residuals.push(Residual {
            label: label.into(),
            value,
            tol,
            // NaN never passes
            pass: value <= tol,
            states,
            note: None,
        });
        self.residuals.last_mut().expect("just pushed")
    }

    /// Records a relation that holds for structural reasons (e.g. a
    /// Pauli-blocked level predicted by the structure function).
    pub fn push_structural(&mut self, label: impl Into<String>, note: impl Into<String>) {
        self.residuals.push(Residual {
            label: label.into(),
            value: 0.0,
            tol: 0.0,
            pass: true,
            states: 0,
            note: Some(note.into()),
        });
    }

    /// Records a failed precondition or unexpected structural fact.
    pub fn push_failure(&mut self, label: impl Into<String>, note: impl Into<String>) {
        self.residuals.push(Residual {
            label: label.into(),
            value: f64::INFINITY,
            tol: 0.0,
            pass: false,
            states: 0,
            note: Some(note.into()),
        });
    }

    pub fn extend(&mut self, other: ResidualSet) {
        self.residuals.extend(other.residuals);
    }

    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|r| r.pass)
    }

    pub fn get(&self, label: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.label == label)
    }

    /// Value of the entry with exactly this label.
    pub fn value(&self, label: &str) -> Option<f64> {
        self.get(label).map(|r| r.value)
    }

    /// Largest residual over all entries (structural entries count as zero).
    pub fn max(&self) -> f64 {
        self.residuals.iter().map(|r| r.value).fold(0.0, f64::max)
    }

    /// Largest residual among entries whose label starts with `prefix`.
    pub fn max_matching(&self, prefix: &str) -> Option<f64> {
        self.residuals
            .iter()
            .filter(|r| r.label.starts_with(prefix))
            .map(|r| r.value)
            .reduce(f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Residual> {
        self.residuals.iter().filter(|r| !r.pass)
    }

    /// Re-judges every entry whose threshold is `from` against `to`.
    pub fn retolerance(&mut self, from: f64, to: f64) {
        for r in self.residuals.iter_mut().filter(|r| r.tol == from) {
            r.tol = to;
            r.pass = r.value <= to;
        }
    }

    /// Prefixes every label, e.g. with the mode it was measured on.
    pub fn prefixed(mut self, prefix: &str) -> Self {
        for r in &mut self.residuals {
            r.label = format!("{prefix}{}", r.label);
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }
}
