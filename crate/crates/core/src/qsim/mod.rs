//! Dense state-vector engine for small labeled qubit registers.
//!
//! Registers are addressed by string labels rather than positional indices so
//! that protocol code can talk about particles `"1"`, `"2"`, `"5"`, `"A"`
//! directly. Every function here is pure: inputs are borrowed, results are new
//! values.

mod density;
mod operator;
mod state;

use num_complex::Complex64;
use thiserror::Error;

pub use density::DensityMatrix;
pub use operator::Operator;
pub use state::StateVector;

/// Tolerance for normalization and Hermiticity checks.
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance for equality assertions between computed quantities.
pub const EQ_TOL: f64 = 1e-12;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const EIG_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QsimError {
    #[error("duplicate qubit label `{0}`")]
    DuplicateLabel(String),
    #[error("qubit label `{0}` is present in both registers")]
    OverlappingLabel(String),
    #[error("unknown qubit label `{0}`")]
    UnknownLabel(String),
    #[error("label mismatch: expected {expected:?}, found {found:?}")]
    LabelMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operator must be square with power-of-two dimension (got {0} entries)")]
    BadOperator(usize),
    #[error("invalid bit character {0:?} in bitstring")]
    BadBit(char),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("zero vector has no direction")]
    ZeroNorm,
    #[error("operator is not positive semidefinite (eigenvalue {0})")]
    NotPositive(f64),
    #[error("measurement outcome {0} has zero probability")]
    ZeroProbability(usize),
    #[error("outcome index {index} out of range for {count} effects")]
    OutcomeOutOfRange { index: usize, count: usize },
    #[error("cannot discard every qubit of the register")]
    DiscardAll,
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("density matrix is not pure (purity {0})")]
    NotPure(f64),
}

pub type Result<T> = std::result::Result<T, QsimError>;

/// Bit positions of `targets` and of the remaining labels within `labels`.
fn split_positions<L: AsRef<str>>(labels: &[String], targets: &[L]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut tpos = Vec::with_capacity(targets.len());
    for t in targets {
        let t = t.as_ref();
        let p = labels
            .iter()
            .position(|l| l == t)
            .ok_or_else(|| QsimError::UnknownLabel(t.to_string()))?;
        if tpos.contains(&p) {
            return Err(QsimError::DuplicateLabel(t.to_string()));
        }
        tpos.push(p);
    }
    let rpos = (0..labels.len()).filter(|p| !tpos.contains(p)).collect();
    Ok((tpos, rpos))
}

/// Places the bits of `sub` (big-endian over `positions`) into an `n`-bit index.
fn scatter(n: usize, positions: &[usize], sub: usize) -> usize {
    let m = positions.len();
    positions
        .iter()
        .enumerate()
        .fold(0, |idx, (j, &p)| idx | (((sub >> (m - 1 - j)) & 1) << (n - 1 - p)))
}

fn scatter_all(n: usize, positions: &[usize]) -> Vec<usize> {
    (0..1usize << positions.len())
        .map(|sub| scatter(n, positions, sub))
        .collect()
}

/// `s1 ⊗ s2` with `s1` on the more significant bits.
pub fn tensor(s1: &StateVector, s2: &StateVector) -> Result<StateVector> {
    if let Some(l) = s1.labels().iter().find(|l| s2.labels().contains(l)) {
        return Err(QsimError::OverlappingLabel(l.clone()));
    }
    let labels: Vec<&String> = s1.labels().iter().chain(s2.labels()).collect();
    let amps = s1
        .amps()
        .iter()
        .flat_map(|x| s2.amps().iter().map(move |y| x * y))
        .collect();
    StateVector::new(&labels, amps)
}

/// Applies `op` to the qubits `targets` of `s`; the order of `targets` fixes
/// the basis order of `op`.
pub fn apply<L: AsRef<str>>(op: &Operator, targets: &[L], s: &StateVector) -> Result<StateVector> {
    let expected = 1usize << targets.len();
    if op.dim() != expected {
        return Err(QsimError::DimensionMismatch {
            expected,
            found: op.dim(),
        });
    }
    let n = s.num_qubits();
    let (tpos, rpos) = split_positions(s.labels(), targets)?;
    let offsets = scatter_all(n, &tpos);
    let bases = scatter_all(n, &rpos);
    let src = s.amps();
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for base in bases {
        for (row, &ro) in offsets.iter().enumerate() {
            out[base | ro] = offsets
                .iter()
                .enumerate()
                .map(|(col, &co)| op.get(row, col) * src[base | co])
                .sum();
        }
    }
    StateVector::new(s.labels(), out)
}

/// Partial inner product `⟨bra|s⟩` over `targets`.
///
/// Returns the squared norm of the residual together with the unnormalized
/// residual on the remaining labels (kept in the order they have in `s`).
pub fn project<L: AsRef<str>>(s: &StateVector, targets: &[L], bra: &StateVector) -> Result<(f64, StateVector)> {
    let bra = bra.permuted(targets)?;
    bra.ensure_normalized()?;
    let n = s.num_qubits();
    let (tpos, rpos) = split_positions(s.labels(), targets)?;
    let offsets = scatter_all(n, &tpos);
    let bases = scatter_all(n, &rpos);
    let src = s.amps();
    let amps: Vec<Complex64> = bases
        .iter()
        .map(|&base| {
            offsets
                .iter()
                .zip(bra.amps())
                .map(|(&off, b)| b.conj() * src[base | off])
                .sum()
        })
        .collect();
    let rest: Vec<&String> = rpos.iter().map(|&p| &s.labels()[p]).collect();
    let residual = StateVector::new(&rest, amps)?;
    Ok((residual.norm_sqr(), residual))
}

fn check_effects(effects: &[Operator]) -> Result<()> {
    if effects.is_empty() {
        return Err(QsimError::InvalidPovm("no effects".into()));
    }
    if let Some(e) = effects.iter().find(|e| e.dim() != 2) {
        return Err(QsimError::InvalidPovm(format!(
            "effect of dimension {} on a single qubit",
            e.dim()
        )));
    }
    let mut sum = Operator::zero(2)?;
    for e in effects {
        if e.hermiticity_residual() > NORM_TOL {
            return Err(QsimError::InvalidPovm("effect is not Hermitian".into()));
        }
        let (lo, _) = e.eigenvalues_2x2()?;
        if lo < EIG_FLOOR {
            return Err(QsimError::InvalidPovm(format!("effect has eigenvalue {lo}")));
        }
        sum = sum.add(e)?;
    }
    let residual = sum.max_abs_diff(&Operator::identity(2)?)?;
    if residual > NORM_TOL {
        return Err(QsimError::InvalidPovm(format!(
            "effects sum to identity only within {residual:e}"
        )));
    }
    Ok(())
}

/// Outcome probabilities `⟨s|E_i ⊗ I|s⟩` of a single-qubit POVM on `target`.
pub fn povm_probabilities(effects: &[Operator], target: &str, s: &StateVector) -> Result<Vec<f64>> {
    check_effects(effects)?;
    s.ensure_normalized()?;
    let n = s.num_qubits();
    let (tpos, rpos) = split_positions(s.labels(), &[target])?;
    let offsets = scatter_all(n, &tpos);
    let bases = scatter_all(n, &rpos);
    let src = s.amps();
    Ok(effects
        .iter()
        .map(|e| {
            bases
                .iter()
                .map(|&base| {
                    let v = [src[base | offsets[0]], src[base | offsets[1]]];
                    e.expectation(&v).expect("2x2 effect").re
                })
                .sum()
        })
        .collect())
}

/// Post-measurement state for `outcome`, using the Kraus operator `√E`, renormalized.
pub fn povm_collapse(effects: &[Operator], outcome: usize, target: &str, s: &StateVector) -> Result<StateVector> {
    let effect = effects.get(outcome).ok_or(QsimError::OutcomeOutOfRange {
        index: outcome,
        count: effects.len(),
    })?;
    let kraus = effect.sqrt_psd_2x2()?;
    let post = apply(&kraus, &[target], s)?;
    if post.norm_sqr() <= 0.0 {
        return Err(QsimError::ZeroProbability(outcome));
    }
    post.normalized()
}

/// Reduced density matrix after tracing out `drop`.
pub fn discard<L: AsRef<str>>(s: &StateVector, drop: &[L]) -> Result<DensityMatrix> {
    let n = s.num_qubits();
    let (dpos, kpos) = split_positions(s.labels(), drop)?;
    if kpos.is_empty() {
        return Err(QsimError::DiscardAll);
    }
    let kept = scatter_all(n, &kpos);
    let dropped = scatter_all(n, &dpos);
    let src = s.amps();
    let d = kept.len();
    let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
    for (i, &ki) in kept.iter().enumerate() {
        for (j, &kj) in kept.iter().enumerate() {
            entries[i * d + j] = dropped.iter().map(|&off| src[ki | off] * src[kj | off].conj()).sum();
        }
    }
    let labels: Vec<&String> = kpos.iter().map(|&p| &s.labels()[p]).collect();
    DensityMatrix::new(&labels, entries)
}

/// `⟨target|ρ|target⟩`, blind to the global phase of `target`.
pub fn fidelity(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    let target = target.permuted(rho.labels())?;
    target.ensure_normalized()?;
    let tr = rho.trace();
    if (tr - 1.0).abs() > NORM_TOL {
        return Err(QsimError::NotNormalized(tr));
    }
    let v = target.amps();
    let d = v.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += v[i].conj() * rho.get(i, j) * v[j];
        }
    }
    Ok(acc.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn bell_phi_plus(labels: [&str; 2]) -> StateVector {
        StateVector::from_terms(&labels, &[("00", c(FRAC_1_SQRT_2)), ("11", c(FRAC_1_SQRT_2))]).unwrap()
    }

    #[test]
    fn tensor_of_basis_states() {
        let s = tensor(
            &StateVector::basis(&["x"], "0").unwrap(),
            &StateVector::basis(&["y"], "1").unwrap(),
        )
        .unwrap();
        assert_eq!(s.labels(), ["x", "y"]);
        assert_eq!(s.amps(), [c(0.0), c(1.0), c(0.0), c(0.0)]);
    }

    #[test]
    fn tensor_rejects_overlap() {
        let x = StateVector::basis(&["x"], "0").unwrap();
        assert_eq!(tensor(&x, &x), Err(QsimError::OverlappingLabel("x".into())));
    }

    #[test]
    fn apply_x_and_identity() {
        let zero = StateVector::basis(&["q"], "0").unwrap();
        let one = apply(&Operator::pauli_x(), &["q"], &zero).unwrap();
        assert_eq!(one, StateVector::basis(&["q"], "1").unwrap());
        let same = apply(&Operator::identity(2).unwrap(), &["q"], &one).unwrap();
        assert_eq!(same, one);
    }

    #[test]
    fn apply_errors() {
        let s = StateVector::basis(&["p", "q"], "00").unwrap();
        assert!(matches!(
            apply(&Operator::cnot(), &["p"], &s),
            Err(QsimError::DimensionMismatch { .. })
        ));
        assert_eq!(
            apply(&Operator::pauli_x(), &["z"], &s),
            Err(QsimError::UnknownLabel("z".into()))
        );
    }

    #[test]
    fn cnot_target_order_matters() {
        let s = StateVector::basis(&["p", "q"], "10").unwrap();
        let flipped = apply(&Operator::cnot(), &["p", "q"], &s).unwrap();
        assert_eq!(flipped.amp("11").unwrap(), c(1.0));
        let untouched = apply(&Operator::cnot(), &["q", "p"], &s).unwrap();
        assert_eq!(untouched, s);
    }

    #[test]
    fn project_orthogonal_gives_zero() {
        let one = StateVector::basis(&["q"], "1").unwrap();
        let bra = StateVector::basis(&["q"], "0").unwrap();
        let (p, residual) = project(&one, &["q"], &bra).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(residual.num_qubits(), 0);
        assert_eq!(residual.amps(), [c(0.0)]);
    }

    #[test]
    fn project_requires_normalized_bra() {
        let s = StateVector::basis(&["q"], "1").unwrap();
        let bra = StateVector::new(&["q"], vec![c(1.0), c(1.0)]).unwrap();
        assert!(matches!(project(&s, &["q"], &bra), Err(QsimError::NotNormalized(_))));
        let other = StateVector::basis(&["z"], "0").unwrap();
        assert!(matches!(
            project(&s, &["q"], &other),
            Err(QsimError::LabelMismatch { .. })
        ));
    }

    #[test]
    fn discard_half_of_bell_pair() {
        let rho = discard(&bell_phi_plus(["x", "y"]), &["y"]).unwrap();
        assert!((rho.get(0, 0).re - 0.5).abs() < 1e-15);
        assert!((rho.get(1, 1).re - 0.5).abs() < 1e-15);
        assert!(rho.get(0, 1).norm() < 1e-15);
        assert!((fidelity(&rho, &StateVector::basis(&["x"], "0").unwrap()).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn discard_everything_fails() {
        let s = StateVector::basis(&["x"], "0").unwrap();
        assert_eq!(discard(&s, &["x"]), Err(QsimError::DiscardAll));
    }

    #[test]
    fn fidelity_phase_blind() {
        let psi = StateVector::new(&["x"], vec![c(0.6), Complex64::new(0.0, 0.8)]).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        let rotated = psi.scaled(Complex64::from_polar(1.0, 1.234));
        assert!((fidelity(&rho, &psi).unwrap() - 1.0).abs() < 1e-15);
        assert!((fidelity(&rho, &rotated).unwrap() - 1.0).abs() < 1e-15);
        let wrong = StateVector::basis(&["y"], "0").unwrap();
        assert!(matches!(fidelity(&rho, &wrong), Err(QsimError::LabelMismatch { .. })));
    }

    #[test]
    fn collapse_with_identity_effect_keeps_state() {
        let psi = StateVector::new(&["x"], vec![c(0.6), c(0.8)]).unwrap();
        let effects = [Operator::identity(2).unwrap()];
        let post = povm_collapse(&effects, 0, "x", &psi).unwrap();
        assert!(post.max_abs_diff(&psi).unwrap() < 1e-15);
    }

    #[test]
    fn collapse_zero_probability_outcome() {
        let one = StateVector::basis(&["x"], "1").unwrap();
        let effects = [
            Operator::real_2x2([[1.0, 0.0], [0.0, 0.0]]).unwrap(),
            Operator::real_2x2([[0.0, 0.0], [0.0, 1.0]]).unwrap(),
        ];
        assert_eq!(
            povm_collapse(&effects, 0, "x", &one),
            Err(QsimError::ZeroProbability(0))
        );
    }

    #[test]
    fn povm_probabilities_reject_incomplete_set() {
        let s = StateVector::basis(&["x"], "1").unwrap();
        let effects = [Operator::real_2x2([[1.0, 0.0], [0.0, 0.0]]).unwrap()];
        assert!(matches!(
            povm_probabilities(&effects, "x", &s),
            Err(QsimError::InvalidPovm(_))
        ));
    }

    fn arb_state(n: usize) -> impl Strategy<Value = StateVector> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
            .prop_filter("non-zero", |v| v.iter().any(|(r, i)| r.abs() + i.abs() > 1e-3))
            .prop_map(move |v| {
                let labels: Vec<String> = (0..n).map(|k| format!("q{k}")).collect();
                let amps = v.into_iter().map(|(r, i)| Complex64::new(r, i)).collect();
                StateVector::new(&labels, amps).unwrap().normalized().unwrap()
            })
    }

    proptest! {
        #[test]
        fn projection_conserves_probability(s in arb_state(4)) {
            let bell = [
                StateVector::from_terms(&["q1", "q3"], &[("00", c(FRAC_1_SQRT_2)), ("11", c(FRAC_1_SQRT_2))]).unwrap(),
                StateVector::from_terms(&["q1", "q3"], &[("00", c(FRAC_1_SQRT_2)), ("11", c(-FRAC_1_SQRT_2))]).unwrap(),
                StateVector::from_terms(&["q1", "q3"], &[("01", c(FRAC_1_SQRT_2)), ("10", c(FRAC_1_SQRT_2))]).unwrap(),
                StateVector::from_terms(&["q1", "q3"], &[("01", c(FRAC_1_SQRT_2)), ("10", c(-FRAC_1_SQRT_2))]).unwrap(),
            ];
            let total: f64 = bell.iter().map(|b| project(&s, &["q1", "q3"], b).unwrap().0).sum();
            prop_assert!((total - s.norm_sqr()).abs() <= EQ_TOL);
        }

        #[test]
        fn cnot_preserves_norm_and_is_involutive(s in arb_state(3)) {
            let once = apply(&Operator::cnot(), &["q2", "q0"], &s).unwrap();
            prop_assert!((once.norm_sqr() - 1.0).abs() <= EQ_TOL);
            let twice = apply(&Operator::cnot(), &["q2", "q0"], &once).unwrap();
            prop_assert!(twice.max_abs_diff(&s).unwrap() <= EQ_TOL);
        }

        #[test]
        fn discard_then_fidelity_recovers_factor(f in arb_state(2), g in arb_state(1)) {
            let g = StateVector::new(&["z"], g.amps().to_vec()).unwrap();
            let joint = tensor(&f, &g).unwrap();
            let rho = discard(&joint, &["z"]).unwrap();
            prop_assert!((fidelity(&rho, &f).unwrap() - 1.0).abs() <= EQ_TOL);
        }

        #[test]
        fn tensor_norm_is_multiplicative(f in arb_state(2), g in arb_state(1)) {
            let g = StateVector::new(&["z"], g.amps().iter().map(|x| x * 0.5).collect()).unwrap();
            let joint = tensor(&f, &g).unwrap();
            prop_assert!((joint.norm_sqr() - f.norm_sqr() * g.norm_sqr()).abs() <= EQ_TOL);
        }
    }
}
