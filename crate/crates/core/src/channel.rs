//! The W-class channel `a|001⟩ + b|010⟩ + c|100⟩` on particles (1,2,3) and the
//! unknown input `α|00⟩ + β|11⟩` on particles (4,5).

use num_complex::Complex64;
use thiserror::Error;

use crate::qsim::{self, StateVector, NORM_TOL};

pub const CHANNEL_LABELS: [&str; 3] = ["1", "2", "3"];
pub const INPUT_LABELS: [&str; 2] = ["4", "5"];
pub const COMPOSITE_LABELS: [&str; 5] = ["1", "2", "3", "4", "5"];
pub const ANCILLA: &str = "A";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter {name} is not finite")]
    NonFinite { name: &'static str },
    #[error("parameter {name} = {value} must be nonnegative")]
    Negative { name: &'static str, value: f64 },
    #[error("channel normalization a^2 + b^2 + c^2 = 1 violated (sum = {sum})")]
    ChannelNorm { sum: f64 },
    #[error("ordering constraint {constraint} violated ({detail})")]
    Ordering { constraint: &'static str, detail: String },
    #[error("leading amplitude a must be positive")]
    ZeroLeading,
    #[error("input normalization |alpha|^2 + |beta|^2 = 1 violated (sum = {sum})")]
    InputNorm { sum: f64 },
}

/// Real channel amplitudes with `a ≥ b ≥ c ≥ 0`, `a > 0`, `a² + b² + c² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    a: f64,
    b: f64,
    c: f64,
}

impl ChannelParams {
    /// Validates and stores the amplitudes. Inputs within `1e-10` of unit norm
    /// are rescaled to unit norm at full precision.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, ParamError> {
        for (name, value) in [("a", a), ("b", b), ("c", c)] {
            if !value.is_finite() {
                return Err(ParamError::NonFinite { name });
            }
            if value < 0.0 {
                return Err(ParamError::Negative { name, value });
            }
        }
        let sum = a * a + b * b + c * c;
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(ParamError::ChannelNorm { sum });
        }
        if a < b {
            return Err(ParamError::Ordering {
                constraint: "a >= b",
                detail: format!("a = {a}, b = {b}"),
            });
        }
        if b < c {
            return Err(ParamError::Ordering {
                constraint: "b >= c",
                detail: format!("b = {b}, c = {c}"),
            });
        }
        if a <= 0.0 {
            return Err(ParamError::ZeroLeading);
        }
        let n = sum.sqrt();
        Ok(Self {
            a: a / n,
            b: b / n,
            c: c / n,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Input amplitudes with `|α|² + |β|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputState {
    alpha: Complex64,
    beta: Complex64,
}

impl InputState {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self, ParamError> {
        for (name, z) in [("alpha", alpha), ("beta", beta)] {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(ParamError::NonFinite { name });
            }
        }
        let sum = alpha.norm_sqr() + beta.norm_sqr();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(ParamError::InputNorm { sum });
        }
        let n = sum.sqrt();
        Ok(Self {
            alpha: alpha / n,
            beta: beta / n,
        })
    }

    pub fn real(alpha: f64, beta: f64) -> Result<Self, ParamError> {
        Self::new(Complex64::new(alpha, 0.0), Complex64::new(beta, 0.0))
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    /// `α|00⟩ + β|11⟩` on the given pair of labels.
    pub fn target_state(&self, labels: [&str; 2]) -> StateVector {
        StateVector::from_terms(&labels, &[("00", self.alpha), ("11", self.beta)]).expect("two-qubit register")
    }
}

pub fn build_channel(p: &ChannelParams) -> StateVector {
    let r = |x: f64| Complex64::new(x, 0.0);
    StateVector::from_terms(&CHANNEL_LABELS, &[("001", r(p.a)), ("010", r(p.b)), ("100", r(p.c))])
        .expect("three-qubit register")
}

pub fn build_input(s: &InputState) -> StateVector {
    s.target_state(INPUT_LABELS)
}

pub fn build_composite(p: &ChannelParams, s: &InputState) -> StateVector {
    qsim::tensor(&build_channel(p), &build_input(s)).expect("disjoint registers")
}
