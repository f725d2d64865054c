use num_complex::Complex64;

use super::{QsimError, Result, NORM_TOL};

/// Pure state of a labeled qubit register.
///
/// Amplitudes are indexed big-endian in label order: `labels[0]` is the most
/// significant bit of the basis index. A state does not have to be normalized;
/// branch states produced by [`project`](super::project) carry their branch
/// probability as squared norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    labels: Vec<String>,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new<L: AsRef<str>>(labels: &[L], amps: Vec<Complex64>) -> Result<Self> {
        let labels = checked_labels(labels)?;
        let dim = 1usize << labels.len();
        if amps.len() != dim {
            return Err(QsimError::DimensionMismatch {
                expected: dim,
                found: amps.len(),
            });
        }
        if let Some(i) = amps.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QsimError::NonFinite(i));
        }
        Ok(Self { labels, amps })
    }

    /// All-zero vector on the given register.
    pub fn zero<L: AsRef<str>>(labels: &[L]) -> Result<Self> {
        let labels = checked_labels(labels)?;
        let dim = 1usize << labels.len();
        Ok(Self {
            labels,
            amps: vec![Complex64::new(0.0, 0.0); dim],
        })
    }

    /// Computational basis state `|bits⟩`, with `bits` written in label order.
    pub fn basis<L: AsRef<str>>(labels: &[L], bits: &str) -> Result<Self> {
        Self::from_terms(labels, &[(bits, Complex64::new(1.0, 0.0))])
    }

    /// Builds a state from `(bitstring, amplitude)` terms. Repeated bitstrings add.
    pub fn from_terms<L: AsRef<str>>(labels: &[L], terms: &[(&str, Complex64)]) -> Result<Self> {
        let mut state = Self::zero(labels)?;
        for (bits, amp) in terms {
            let idx = state.index_of(bits)?;
            state.amps[idx] += amp;
        }
        if let Some(i) = state.amps.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QsimError::NonFinite(i));
        }
        Ok(state)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    /// Position of `label` in the register, which is also its bit significance
    /// counted from the most significant end.
    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| QsimError::UnknownLabel(label.to_string()))
    }

    /// Basis index of a bitstring written in label order.
    pub fn index_of(&self, bits: &str) -> Result<usize> {
        let n = self.labels.len();
        if bits.chars().count() != n {
            return Err(QsimError::DimensionMismatch {
                expected: n,
                found: bits.chars().count(),
            });
        }
        let mut idx = 0usize;
        for ch in bits.chars() {
            idx <<= 1;
            match ch {
                '0' => {}
                '1' => idx |= 1,
                other => return Err(QsimError::BadBit(other)),
            }
        }
        Ok(idx)
    }

    /// Amplitude of the basis state `|bits⟩` (label order).
    pub fn amp(&self, bits: &str) -> Result<Complex64> {
        Ok(self.amps[self.index_of(bits)?])
    }

    /// Value of the bit belonging to the label at `position` within basis index `idx`.
    pub fn bit(&self, idx: usize, position: usize) -> u8 {
        let n = self.labels.len();
        ((idx >> (n - 1 - position)) & 1) as u8
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub(crate) fn ensure_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(QsimError::NotNormalized(self.norm_sqr()))
        }
    }

    /// Rescaled copy with unit norm. A zero vector cannot be normalized.
    pub fn normalized(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 <= 0.0 {
            return Err(QsimError::ZeroNorm);
        }
        Ok(self.scaled(Complex64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            labels: self.labels.clone(),
            amps: self.amps.iter().map(|z| z * factor).collect(),
        }
    }

    /// Same state expressed in a different label order.
    pub fn permuted<L: AsRef<str>>(&self, order: &[L]) -> Result<Self> {
        let order = checked_labels(order)?;
        if !same_label_set(&self.labels, &order) {
            return Err(QsimError::LabelMismatch {
                expected: self.labels.clone(),
                found: order,
            });
        }
        let n = order.len();
        // source bit position for each destination position
        let src: Vec<usize> = order
            .iter()
            .map(|l| self.labels.iter().position(|x| x == l).unwrap())
            .collect();
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (dst_idx, slot) in amps.iter_mut().enumerate() {
            let mut src_idx = 0usize;
            for (k, &s) in src.iter().enumerate() {
                let bit = (dst_idx >> (n - 1 - k)) & 1;
                src_idx |= bit << (n - 1 - s);
            }
            *slot = self.amps[src_idx];
        }
        Ok(Self { labels: order, amps })
    }

    /// `⟨self|other⟩`. The two registers must carry the same labels, in any order.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        let other = other.permuted(&self.labels)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(x, y)| x.conj() * y).sum())
    }

    /// Largest entrywise deviation `max |self_k − other_k|` after aligning label order.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        let other = other.permuted(&self.labels)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn checked_labels<L: AsRef<str>>(labels: &[L]) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::with_capacity(labels.len());
    for l in labels {
        let l = l.as_ref();
        if out.iter().any(|x| x == l) {
            return Err(QsimError::DuplicateLabel(l.to_string()));
        }
        out.push(l.to_string());
    }
    Ok(out)
}

pub(crate) fn same_label_set(a: &[String], b: &[String]) -> bool {
    a.len() == b.len() && a.iter().all(|l| b.contains(l))
}
