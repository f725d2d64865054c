//! The teleportation pipeline, one step per function.
//!
//! Particles 3, 4, 5 are Alice's; 1, 2 and the ancilla `A` are Bob's. A run is
//!
//! 1. Alice projects (3,4) onto the Bell basis,
//! 2. Bob measures particle 1 in the computational basis (outcome 1 fails),
//! 3. Bob attaches `A` (|1⟩ after Φ±, |0⟩ after Ψ±) and applies C-NOT 2→A,
//! 4. Alice discriminates the two nonorthogonal states of particle 5,
//! 5. Bob applies the correction picked by (Bell outcome, conclusive result).
//!
//! Branch states are carried unnormalized so that their squared norm is the
//! joint probability of the outcomes observed so far.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use thiserror::Error;

use crate::channel::{self, ChannelParams, InputState, ANCILLA, COMPOSITE_LABELS};
use crate::povm::{self, DiscriminationParams, PovmError, PovmSet, POVM_LABEL};
use crate::qsim::{self, DensityMatrix, Operator, QsimError, StateVector, NORM_TOL};

pub const BELL_LABELS: [&str; 2] = ["3", "4"];
pub const AFTER_BELL_LABELS: [&str; 3] = ["1", "2", "5"];
pub const AFTER_VN_LABELS: [&str; 2] = ["2", "5"];
pub const BOB_REGISTER: [&str; 3] = ["2", "5", "A"];
pub const OUTPUT_LABELS: [&str; 2] = ["2", "A"];

/// Required purity of Bob's (2,A) state once particle 5 is traced out.
pub const PURITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Povm(#[from] PovmError),
    #[error("inconsistent outcome path: {0}")]
    InconsistentPath(String),
    #[error("step applied to a failed branch")]
    FailedBranch,
    #[error("protocol logic error: {0}")]
    Logic(String),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BellFamily {
    Phi,
    Psi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BellOutcome {
    pub family: BellFamily,
    pub sign: Sign,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome {
            family: BellFamily::Phi,
            sign: Sign::Plus,
        },
        BellOutcome {
            family: BellFamily::Phi,
            sign: Sign::Minus,
        },
        BellOutcome {
            family: BellFamily::Psi,
            sign: Sign::Plus,
        },
        BellOutcome {
            family: BellFamily::Psi,
            sign: Sign::Minus,
        },
    ];

    /// `Φ± = (|00⟩ ± |11⟩)/√2`, `Ψ± = (|01⟩ ± |10⟩)/√2` on particles (3,4).
    pub fn state(&self) -> StateVector {
        let (first, second) = match self.family {
            BellFamily::Phi => ("00", "11"),
            BellFamily::Psi => ("01", "10"),
        };
        let amp = Complex64::new(FRAC_1_SQRT_2, 0.0);
        StateVector::from_terms(&BELL_LABELS, &[(first, amp), (second, amp * self.sign.factor())])
            .expect("two-qubit register")
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|b| b == self).expect("listed")
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.family {
            BellFamily::Phi => "Phi",
            BellFamily::Psi => "Psi",
        };
        write!(f, "{name}{}", self.sign.symbol())
    }
}

pub fn bell_basis() -> [(BellOutcome, StateVector); 4] {
    BellOutcome::ALL.map(|b| (b, b.state()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmOutcome {
    Conclusive1,
    Conclusive2,
    Inconclusive,
}

impl PovmOutcome {
    pub const ALL: [PovmOutcome; 3] = [
        PovmOutcome::Conclusive1,
        PovmOutcome::Conclusive2,
        PovmOutcome::Inconclusive,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PovmOutcome::Conclusive1 => "conclusive1",
            PovmOutcome::Conclusive2 => "conclusive2",
            PovmOutcome::Inconclusive => "inconclusive",
        }
    }
}

/// One complete outcome path. `povm` is present exactly when `vonneumann == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StepOutcomes {
    bell: BellOutcome,
    vonneumann: u8,
    povm: Option<PovmOutcome>,
}

impl StepOutcomes {
    pub fn new(bell: BellOutcome, vonneumann: u8, povm: Option<PovmOutcome>) -> Result<Self> {
        match (vonneumann, povm) {
            (0, Some(_)) | (1, None) => Ok(Self { bell, vonneumann, povm }),
            (0, None) => Err(ProtocolError::InconsistentPath(
                "von Neumann outcome 0 requires a POVM outcome".into(),
            )),
            (1, Some(_)) => Err(ProtocolError::InconsistentPath(
                "POVM outcome given after failed von Neumann measurement".into(),
            )),
            (other, _) => Err(ProtocolError::InconsistentPath(format!(
                "von Neumann outcome must be 0 or 1, got {other}"
            ))),
        }
    }

    pub fn bell(&self) -> BellOutcome {
        self.bell
    }

    pub fn vonneumann(&self) -> u8 {
        self.vonneumann
    }

    pub fn povm(&self) -> Option<PovmOutcome> {
        self.povm
    }

    pub fn classification(&self) -> Classification {
        match self.povm {
            None => Classification::FailVonNeumann,
            Some(PovmOutcome::Inconclusive) => Classification::FailInconclusive,
            Some(_) => Classification::Success,
        }
    }

    /// All 16 paths: per Bell outcome, the three POVM leaves then the failed one.
    pub fn all() -> Vec<StepOutcomes> {
        let mut out = Vec::with_capacity(16);
        for bell in BellOutcome::ALL {
            for povm in PovmOutcome::ALL {
                out.push(StepOutcomes {
                    bell,
                    vonneumann: 0,
                    povm: Some(povm),
                });
            }
            out.push(StepOutcomes {
                bell,
                vonneumann: 1,
                povm: None,
            });
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Success,
    FailVonNeumann,
    FailInconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Success => "success",
            Classification::FailVonNeumann => "fail_vonneumann",
            Classification::FailInconclusive => "fail_inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    /// Two classical bits.
    Bell(BellOutcome),
    /// One bit.
    VonNeumann(u8),
    /// One trit.
    Povm(PovmOutcome),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub from: Party,
    pub to: Party,
    pub payload: Payload,
}

/// Classical messages exchanged along one outcome path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<Message>,
}

impl Transcript {
    pub fn for_outcomes(outcomes: &StepOutcomes) -> Self {
        let mut messages = vec![
            Message {
                from: Party::Alice,
                to: Party::Bob,
                payload: Payload::Bell(outcomes.bell),
            },
            Message {
                from: Party::Bob,
                to: Party::Alice,
                payload: Payload::VonNeumann(outcomes.vonneumann),
            },
        ];
        if let Some(p) = outcomes.povm {
            messages.push(Message {
                from: Party::Alice,
                to: Party::Bob,
                payload: Payload::Povm(p),
            });
        }
        Self { messages }
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Alice→Bob Bell bits, Bob→Alice von Neumann bit, then (only after outcome 0)
    /// Alice→Bob POVM result.
    pub fn is_well_ordered(&self) -> bool {
        use Party::{Alice, Bob};
        matches!(
            self.messages.as_slice(),
            [
                Message {
                    from: Alice,
                    to: Bob,
                    payload: Payload::Bell(_)
                },
                Message {
                    from: Bob,
                    to: Alice,
                    payload: Payload::VonNeumann(1)
                },
            ] | [
                Message {
                    from: Alice,
                    to: Bob,
                    payload: Payload::Bell(_)
                },
                Message {
                    from: Bob,
                    to: Alice,
                    payload: Payload::VonNeumann(0)
                },
                Message {
                    from: Alice,
                    to: Bob,
                    payload: Payload::Povm(_)
                },
            ]
        )
    }
}

/// One replayed leaf. `final_state` and `fidelity` are present for every
/// Success leaf of nonzero probability.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub outcomes: StepOutcomes,
    pub classification: Classification,
    pub probability: f64,
    pub final_state: Option<DensityMatrix>,
    pub fidelity: Option<f64>,
    pub transcript: Transcript,
}

/// A measurement branch: outcome, probability and post-measurement state.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<O> {
    pub outcome: O,
    pub probability: f64,
    pub state: StateVector,
}

/// Alice's Bell measurement on (3,4). Residuals live on (1,2,5).
pub fn alice_bell_measure(composite: &StateVector) -> Result<[Branch<BellOutcome>; 4]> {
    let composite = composite.permuted(&COMPOSITE_LABELS)?;
    let mut out = Vec::with_capacity(4);
    for (outcome, bra) in bell_basis() {
        let (probability, state) = qsim::project(&composite, &BELL_LABELS, &bra)?;
        out.push(Branch {
            outcome,
            probability,
            state,
        });
    }
    Ok(out.try_into().expect("four Bell outcomes"))
}

/// Bob's computational-basis measurement of particle 1. Residuals live on (2,5).
pub fn bob_vonneumann(residual: &StateVector) -> Result<[Branch<u8>; 2]> {
    let residual = residual.permuted(&AFTER_BELL_LABELS)?;
    let mut out = Vec::with_capacity(2);
    for (outcome, bits) in [(0u8, "0"), (1u8, "1")] {
        let bra = StateVector::basis(&["1"], bits)?;
        let (probability, state) = qsim::project(&residual, &["1"], &bra)?;
        out.push(Branch {
            outcome,
            probability,
            state,
        });
    }
    Ok(out.try_into().expect("two outcomes"))
}

/// Ancilla preparation (|1⟩ for Φ±, |0⟩ for Ψ±) followed by C-NOT 2→A.
pub fn bob_attach_and_cnot(branch: &Branch<u8>, bell: BellOutcome) -> Result<StateVector> {
    if branch.outcome != 0 {
        return Err(ProtocolError::FailedBranch);
    }
    let residual = branch.state.permuted(&AFTER_VN_LABELS)?;
    let ancilla_bit = match bell.family {
        BellFamily::Phi => "1",
        BellFamily::Psi => "0",
    };
    let ancilla = StateVector::basis(&[ANCILLA], ancilla_bit)?;
    let joint = qsim::tensor(&residual, &ancilla)?;
    Ok(qsim::apply(&Operator::cnot(), &["2", ANCILLA], &joint)?)
}

/// The pair of (2,A) states paired with `ψ₊`/`ψ₋` on particle 5 after the C-NOT.
fn bob_pair_states(bell: BellOutcome, input: &InputState) -> [StateVector; 2] {
    let s = bell.sign.factor();
    let (alpha, beta) = (input.alpha(), input.beta());
    [1.0, -1.0].map(|k| {
        let terms = match bell.family {
            BellFamily::Phi => [("01", beta * s), ("10", alpha * k)],
            BellFamily::Psi => [("00", alpha * s), ("11", beta * k)],
        };
        StateVector::from_terms(&OUTPUT_LABELS, &terms).expect("two-qubit register")
    })
}

/// Rebuilds the post-C-NOT state as
/// `√(a²+b²)/(2√2) · [u₊ ⊗ ψ₊ + u₋ ⊗ ψ₋]` and returns the largest entrywise
/// deviation from `state`.
pub fn decompose_check(state: &StateVector, bell: BellOutcome, p: &ChannelParams, input: &InputState) -> Result<f64> {
    let d = povm::derive_params(p);
    let set = povm_set_for(bell, &d);
    let prefactor = Complex64::new(p.a().hypot(p.b()) / (2.0 * std::f64::consts::SQRT_2), 0.0);
    let pairs = bob_pair_states(bell, input);
    let mut amps = vec![Complex64::new(0.0, 0.0); 8];
    for (u, psi) in pairs.iter().zip(set.targets()) {
        let term = qsim::tensor(u, psi)?;
        for (acc, z) in amps.iter_mut().zip(term.amps()) {
            *acc += prefactor * z;
        }
    }
    let labels: Vec<&str> = OUTPUT_LABELS.iter().copied().chain([POVM_LABEL]).collect();
    let expected = StateVector::new(&labels, amps)?;
    Ok(state.max_abs_diff(&expected)?)
}

/// Set A after Φ±, set B after Ψ±.
pub fn povm_set_for(bell: BellOutcome, d: &DiscriminationParams) -> PovmSet {
    match bell.family {
        BellFamily::Phi => povm::build_set_a(d),
        BellFamily::Psi => povm::build_set_b(d),
    }
}

/// Alice's discrimination POVM on particle 5.
///
/// Probabilities are conditional on the branch (the input is normalized
/// first). Outcomes of zero probability carry no post-measurement state.
pub fn alice_povm(
    state: &StateVector,
    bell: BellOutcome,
    d: &DiscriminationParams,
) -> Result<[(PovmOutcome, f64, Option<StateVector>); 3]> {
    let state = state.permuted(&BOB_REGISTER)?.normalized()?;
    let set = povm_set_for(bell, d);
    let validation = povm::validate(&set);
    if !validation.passed {
        return Err(PovmError::InvalidParams(format!("POVM set failed validation: {validation:?}")).into());
    }
    let probs = qsim::povm_probabilities(set.effects(), POVM_LABEL, &state)?;
    let mut out = Vec::with_capacity(3);
    for outcome in PovmOutcome::ALL {
        let p = probs[outcome.index()].max(0.0);
        let collapsed = if p > 0.0 {
            match qsim::povm_collapse(set.effects(), outcome.index(), POVM_LABEL, &state) {
                Ok(s) => Some(s),
                Err(QsimError::ZeroProbability(_)) => None,
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        out.push((outcome, p, collapsed));
    }
    Ok(out.try_into().expect("three outcomes"))
}

/// One row of the correction table: Bob's unitary on particle 2 for a given
/// Bell outcome and conclusive POVM result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Correction {
    pub bell: BellOutcome,
    pub conclusive: PovmOutcome,
}

impl Correction {
    fn conclusive_sign(&self) -> f64 {
        match self.conclusive {
            PovmOutcome::Conclusive2 => -1.0,
            _ => 1.0,
        }
    }

    /// Φ±: `(s|0⟩⟨1| + k|1⟩⟨0|)₂`; Ψ±: `(s|0⟩⟨0| + k|1⟩⟨1|)₂`, with `s` the Bell
    /// sign and `k = ±1` for conclusive outcome 1/2.
    pub fn unitary(&self) -> Operator {
        let s = self.bell.sign.factor();
        let k = self.conclusive_sign();
        let rows = match self.bell.family {
            BellFamily::Phi => [[0.0, s], [k, 0.0]],
            BellFamily::Psi => [[s, 0.0], [0.0, k]],
        };
        Operator::real_2x2(rows).expect("finite entries")
    }

    /// The (2,A) state this row expects, e.g. `−β|01⟩ + α|10⟩` for (Φ−, conclusive 1).
    pub fn source_state(&self, input: &InputState) -> StateVector {
        let [plus, minus] = bob_pair_states(self.bell, input);
        match self.conclusive {
            PovmOutcome::Conclusive2 => minus,
            _ => plus,
        }
    }
}

/// The eight corrections, in table order.
pub const CORRECTIONS: [Correction; 8] = {
    use BellFamily::{Phi, Psi};
    use PovmOutcome::{Conclusive1, Conclusive2};
    use Sign::{Minus, Plus};
    const fn row(family: BellFamily, sign: Sign, conclusive: PovmOutcome) -> Correction {
        Correction {
            bell: BellOutcome { family, sign },
            conclusive,
        }
    }
    [
        row(Phi, Plus, Conclusive1),
        row(Phi, Minus, Conclusive1),
        row(Phi, Plus, Conclusive2),
        row(Phi, Minus, Conclusive2),
        row(Psi, Plus, Conclusive1),
        row(Psi, Minus, Conclusive1),
        row(Psi, Plus, Conclusive2),
        row(Psi, Minus, Conclusive2),
    ]
};

pub fn correction_for(bell: BellOutcome, conclusive: PovmOutcome) -> Result<Correction> {
    CORRECTIONS
        .iter()
        .copied()
        .find(|c| c.bell == bell && c.conclusive == conclusive)
        .ok_or_else(|| ProtocolError::Logic(format!("no correction for {bell} / {}", conclusive.as_str())))
}

/// Applies the correction for `(bell, conclusive)` to Bob's (2,A) state.
pub fn bob_correct(state2a: &StateVector, bell: BellOutcome, conclusive: PovmOutcome) -> Result<StateVector> {
    let state = state2a.permuted(&OUTPUT_LABELS)?;
    let row = correction_for(bell, conclusive)?;
    let support: [&str; 2] = match bell.family {
        BellFamily::Phi => ["01", "10"],
        BellFamily::Psi => ["00", "11"],
    };
    let on_support: f64 = support
        .iter()
        .map(|bits| state.amp(bits).map(|z| z.norm_sqr()))
        .sum::<std::result::Result<f64, _>>()?;
    let total = state.norm_sqr();
    if total <= 0.0 || on_support / total < 1.0 - NORM_TOL {
        return Err(ProtocolError::Logic(format!(
            "state of particles 2 and A does not match any correction row for {bell}"
        )));
    }
    Ok(qsim::apply(&row.unitary(), &["2"], &state)?)
}

/// Traces out particle 5 from a conclusive post-POVM state, applies Bob's
/// correction and returns his final (2,A) density matrix and its fidelity
/// with `α|00⟩ + β|11⟩`.
pub fn finish_success(
    collapsed: &StateVector,
    bell: BellOutcome,
    conclusive: PovmOutcome,
    input: &InputState,
) -> Result<(DensityMatrix, f64)> {
    let rho = qsim::discard(collapsed, &[POVM_LABEL])?;
    let purity = rho.purity() / (rho.trace() * rho.trace());
    if purity < 1.0 - PURITY_TOL {
        return Err(ProtocolError::Logic(format!(
            "particles 2 and A are not in a pure state after the POVM (purity {purity})"
        )));
    }
    let row = correction_for(bell, conclusive)?;
    let expected = qsim::fidelity(&rho, &row.source_state(input))?;
    if expected < 1.0 - NORM_TOL {
        return Err(ProtocolError::Logic(format!(
            "post-POVM state does not match its correction row (overlap {expected})"
        )));
    }
    let state2a = rho.pure_state(PURITY_TOL)?;
    let corrected = bob_correct(&state2a, bell, conclusive)?;
    let final_state = DensityMatrix::from_pure(&corrected);
    let fidelity = qsim::fidelity(&final_state, &input.target_state(OUTPUT_LABELS))?;
    Ok((final_state, fidelity))
}

/// Deterministic replay of one outcome path, with its exact joint probability.
pub fn run_branch(p: &ChannelParams, input: &InputState, outcomes: &StepOutcomes) -> Result<TrialResult> {
    let outcomes = StepOutcomes::new(outcomes.bell, outcomes.vonneumann, outcomes.povm)?;
    let composite = channel::build_composite(p, input);
    let bell = alice_bell_measure(&composite)?
        .into_iter()
        .find(|b| b.outcome == outcomes.bell)
        .expect("all Bell outcomes enumerated");
    let vn = bob_vonneumann(&bell.state)?
        .into_iter()
        .find(|b| b.outcome == outcomes.vonneumann)
        .expect("both outcomes enumerated");

    let mut result = TrialResult {
        outcomes,
        classification: outcomes.classification(),
        probability: vn.probability,
        final_state: None,
        fidelity: None,
        transcript: Transcript::for_outcomes(&outcomes),
    };
    let Some(povm_outcome) = outcomes.povm else {
        return Ok(result);
    };
    if vn.probability <= 0.0 {
        result.probability = 0.0;
        return Ok(result);
    }
    let register = bob_attach_and_cnot(&vn, outcomes.bell)?;
    let d = povm::derive_params(p);
    let (_, conditional, collapsed) = alice_povm(&register, outcomes.bell, &d)?
        .into_iter()
        .find(|(o, _, _)| *o == povm_outcome)
        .expect("all POVM outcomes enumerated");
    result.probability = vn.probability * conditional;
    if result.classification == Classification::Success {
        if let Some(collapsed) = collapsed {
            let (rho, fid) = finish_success(&collapsed, outcomes.bell, povm_outcome, input)?;
            result.final_state = Some(rho);
            result.fidelity = Some(fid);
        } else {
            result.probability = 0.0;
        }
    }
    Ok(result)
}
