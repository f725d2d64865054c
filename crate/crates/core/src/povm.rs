//! Optimal unambiguous discrimination of the nonorthogonal pair left on
//! particle 5, for both channel families.
//!
//! With `x₁ = a/√(a²+b²)` and `y₁ = b/√(a²+b²)`:
//!
//! - set A discriminates `x₁|1⟩ ± y₁|0⟩` (used after a Φ± Bell outcome),
//! - set B discriminates `x₁|0⟩ ± y₁|1⟩` (used after a Ψ± Bell outcome).
//!
//! All matrices are written in `(|0⟩, |1⟩)` row/column order.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::channel::ChannelParams;
use crate::qsim::{Operator, QsimError, StateVector, EIG_FLOOR, EQ_TOL, NORM_TOL};

/// Label of the particle the POVM acts on.
pub const POVM_LABEL: &str = "5";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PovmError {
    #[error("discrimination parameters invalid: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminationParams {
    x1: f64,
    y1: f64,
}

impl DiscriminationParams {
    /// Requires `x₁² + y₁² = 1` (within 1e-10; rescaled exactly), `x₁ ≥ y₁ ≥ 0`, `x₁ > 0`.
    pub fn new(x1: f64, y1: f64) -> Result<Self, PovmError> {
        if !x1.is_finite() || !y1.is_finite() {
            return Err(PovmError::InvalidParams("non-finite value".into()));
        }
        let sum = x1 * x1 + y1 * y1;
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(PovmError::InvalidParams(format!("x1^2 + y1^2 = {sum}")));
        }
        if y1 < 0.0 || x1 < y1 || x1 <= 0.0 {
            return Err(PovmError::InvalidParams(format!(
                "need x1 >= y1 >= 0 and x1 > 0 (x1 = {x1}, y1 = {y1})"
            )));
        }
        let n = sum.sqrt();
        Ok(Self { x1: x1 / n, y1: y1 / n })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }
}

/// `(x₁, y₁) = (a, b)/√(a² + b²)`.
pub fn derive_params(p: &ChannelParams) -> DiscriminationParams {
    let r = p.a().hypot(p.b());
    // a > 0 and a ≥ b are guaranteed by ChannelParams
    DiscriminationParams {
        x1: p.a() / r,
        y1: p.b() / r,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PovmVariant {
    A,
    B,
}

/// Three effects `[E₁, E₂, E₃]`: conclusive for ψ₊, conclusive for ψ₋, inconclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    variant: PovmVariant,
    effects: [Operator; 3],
    targets: [StateVector; 2],
}

fn real_state(amp0: f64, amp1: f64) -> StateVector {
    StateVector::new(
        &[POVM_LABEL],
        vec![Complex64::new(amp0, 0.0), Complex64::new(amp1, 0.0)],
    )
    .expect("finite amplitudes")
}

pub fn build_set_a(d: &DiscriminationParams) -> PovmSet {
    let (x, y) = (d.x1, d.y1);
    let k = 1.0 / (2.0 * x * x);
    let m = |rows: [[f64; 2]; 2]| Operator::real_2x2(rows).expect("finite entries");
    PovmSet {
        variant: PovmVariant::A,
        effects: [
            m([[k * x * x, k * x * y], [k * x * y, k * y * y]]),
            m([[k * x * x, -k * x * y], [-k * x * y, k * y * y]]),
            m([[0.0, 0.0], [0.0, 1.0 - (y * y) / (x * x)]]),
        ],
        targets: [real_state(y, x), real_state(-y, x)],
    }
}

pub fn build_set_b(d: &DiscriminationParams) -> PovmSet {
    let (x, y) = (d.x1, d.y1);
    let k = 1.0 / (2.0 * x * x);
    let m = |rows: [[f64; 2]; 2]| Operator::real_2x2(rows).expect("finite entries");
    PovmSet {
        variant: PovmVariant::B,
        effects: [
            m([[k * y * y, k * x * y], [k * x * y, k * x * x]]),
            m([[k * y * y, -k * x * y], [-k * x * y, k * x * x]]),
            m([[1.0 - (y * y) / (x * x), 0.0], [0.0, 0.0]]),
        ],
        targets: [real_state(x, y), real_state(x, -y)],
    }
}

impl PovmSet {
    pub fn variant(&self) -> PovmVariant {
        self.variant
    }

    pub fn effects(&self) -> &[Operator; 3] {
        &self.effects
    }

    /// The discriminated pair `[ψ₊, ψ₋]` on particle 5.
    pub fn targets(&self) -> &[StateVector; 2] {
        &self.targets
    }

    /// Copy with one effect replaced; the result is not re-validated.
    pub fn with_effect(&self, index: usize, effect: Operator) -> Self {
        let mut out = self.clone();
        out.effects[index] = effect;
        out
    }

    /// Copy with `ψ₊ ↔ ψ₋` and `E₁ ↔ E₂` exchanged.
    pub fn swapped(&self) -> Self {
        let [e1, e2, e3] = self.effects.clone();
        let [t1, t2] = self.targets.clone();
        Self {
            variant: self.variant,
            effects: [e2, e1, e3],
            targets: [t2, t1],
        }
    }

    fn quadratic(&self, effect: usize, target: usize) -> f64 {
        self.effects[effect]
            .expectation(self.targets[target].amps())
            .expect("2x2 effect")
            .re
    }
}

/// `⟨ψ₊|E₁|ψ₊⟩`, which equals `2y₁²` for both variants.
pub fn conclusive_probability(set: &PovmSet) -> f64 {
    set.quadratic(0, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PovmValidation {
    pub completeness_residual: f64,
    pub min_eigenvalue: f64,
    pub unambiguity_residual: f64,
    pub conclusive_probability: f64,
    pub hermiticity_residual: f64,
    pub passed: bool,
}

impl PovmValidation {
    pub fn completeness_ok(&self) -> bool {
        self.completeness_residual <= EQ_TOL
    }

    pub fn positivity_ok(&self) -> bool {
        self.min_eigenvalue >= EIG_FLOOR
    }

    pub fn unambiguity_ok(&self) -> bool {
        self.unambiguity_residual <= EQ_TOL
    }

    pub fn hermiticity_ok(&self) -> bool {
        self.hermiticity_residual <= NORM_TOL
    }
}

/// Completeness, positivity and unambiguity residuals of a POVM set.
pub fn validate(set: &PovmSet) -> PovmValidation {
    let sum = set
        .effects
        .iter()
        .skip(1)
        .fold(set.effects[0].clone(), |acc, e| acc.add(e).expect("2x2 effects"));
    let completeness_residual = sum
        .max_abs_diff(&Operator::identity(2).expect("dim 2"))
        .expect("2x2 effects");
    let min_eigenvalue = set
        .effects
        .iter()
        .map(|e| e.eigenvalues_2x2().expect("2x2 effect").0)
        .fold(f64::INFINITY, f64::min);
    let unambiguity_residual = set.quadratic(0, 1).abs().max(set.quadratic(1, 0).abs());
    let hermiticity_residual = set
        .effects
        .iter()
        .map(Operator::hermiticity_residual)
        .fold(0.0, f64::max);
    let mut report = PovmValidation {
        completeness_residual,
        min_eigenvalue,
        unambiguity_residual,
        conclusive_probability: conclusive_probability(set),
        hermiticity_residual,
        passed: false,
    };
    report.passed =
        report.completeness_ok() && report.positivity_ok() && report.unambiguity_ok() && report.hermiticity_ok();
    report
}
