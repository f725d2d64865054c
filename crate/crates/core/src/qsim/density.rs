use num_complex::Complex64;

use super::state::checked_labels;
use super::{QsimError, Result, StateVector, NORM_TOL};

/// Density matrix on a labeled register, row-major, same bit convention as
/// [`StateVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    labels: Vec<String>,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn new<L: AsRef<str>>(labels: &[L], entries: Vec<Complex64>) -> Result<Self> {
        let labels = checked_labels(labels)?;
        let dim = 1usize << labels.len();
        if entries.len() != dim * dim {
            return Err(QsimError::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if let Some(i) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QsimError::NonFinite(i));
        }
        Ok(Self { labels, entries })
    }

    /// `|ψ⟩⟨ψ|`, keeping the norm of `ψ` as the trace.
    pub fn from_pure(state: &StateVector) -> Self {
        let amps = state.amps();
        let d = amps.len();
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                entries.push(amps[i] * amps[j].conj());
            }
        }
        Self {
            labels: state.labels().to_vec(),
            entries,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        1 << self.labels.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.get(k, k).re).sum()
    }

    /// `tr(ρ²)`, assuming Hermiticity so that `tr(ρ²) = Σ |ρ_ij|²`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_residual() <= NORM_TOL
    }

    /// Recovers `|ψ⟩` (up to global phase) from a rank-one `ρ = |ψ⟩⟨ψ|`.
    ///
    /// Uses the column of the largest diagonal entry: `ρ e_j / √ρ_jj`.
    /// Fails when `1 − purity/trace²` exceeds `tolerance`.
    pub fn pure_state(&self, tolerance: f64) -> Result<StateVector> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(QsimError::ZeroNorm);
        }
        let purity = self.purity() / (tr * tr);
        if 1.0 - purity > tolerance {
            return Err(QsimError::NotPure(purity));
        }
        let d = self.dim();
        let j = (0..d)
            .max_by(|&x, &y| self.get(x, x).re.total_cmp(&self.get(y, y).re))
            .expect("non-empty");
        let scale = 1.0 / self.get(j, j).re.sqrt();
        let amps = (0..d).map(|i| self.get(i, j) * scale).collect();
        StateVector::new(&self.labels, amps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_state_recovers_vector_up_to_phase() {
        let psi = StateVector::new(
            &["x", "y"],
            vec![
                Complex64::new(0.6, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.8),
            ],
        )
        .unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        assert!((rho.trace() - 1.0).abs() < 1e-15);
        assert!((rho.purity() - 1.0).abs() < 1e-15);
        let back = rho.pure_state(1e-12).unwrap();
        assert!((psi.inner(&back).unwrap().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_state_is_not_pure() {
        let half = Complex64::new(0.5, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let rho = DensityMatrix::new(&["x"], vec![half, zero, zero, half]).unwrap();
        assert!(matches!(rho.pure_state(1e-12), Err(QsimError::NotPure(_))));
    }
}
