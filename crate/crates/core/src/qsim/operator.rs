use num_complex::Complex64;

use super::{QsimError, Result};

/// Square matrix acting on `log2(dim)` qubits, stored row-major.
///
/// Rows and columns follow the same big-endian basis order as
/// [`StateVector`](super::StateVector): for a two-qubit operator applied to
/// targets `[p, q]`, index 1 is `|0⟩_p|1⟩_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<Complex64>,
}

impl Operator {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || !dim.is_power_of_two() || entries.len() != dim * dim {
            return Err(QsimError::BadOperator(entries.len()));
        }
        if let Some(i) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QsimError::NonFinite(i));
        }
        Ok(Self { dim, entries })
    }

    /// Real 2×2 matrix from rows in `(|0⟩, |1⟩)` order.
    pub fn real_2x2(rows: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(2, rows.iter().flatten().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for k in 0..dim {
            entries[k * dim + k] = Complex64::new(1.0, 0.0);
        }
        Self::new(dim, entries)
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(dim, vec![Complex64::new(0.0, 0.0); dim * dim])
    }

    pub fn pauli_x() -> Self {
        Self::real_2x2([[0.0, 1.0], [1.0, 0.0]]).expect("static matrix")
    }

    /// Controlled-NOT with the first target as control and the second as target.
    pub fn cnot() -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); 16];
        for (row, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            entries[row * 4 + col] = Complex64::new(1.0, 0.0);
        }
        Self::new(4, entries).expect("static matrix")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    fn check_same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim != other.dim {
            return Err(QsimError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_same_dim(other)?;
        Ok(Operator {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(x, y)| x + y).collect(),
        })
    }

    pub fn scale(&self, factor: Complex64) -> Operator {
        Operator {
            dim: self.dim,
            entries: self.entries.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        self.check_same_dim(other)?;
        let d = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let lhs = self.entries[i * d + k];
                if lhs == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    entries[i * d + j] += lhs * other.entries[k * d + j];
                }
            }
        }
        Ok(Operator { dim: d, entries })
    }

    pub fn adjoint(&self) -> Operator {
        let d = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                entries[j * d + i] = self.entries[i * d + j].conj();
            }
        }
        Operator { dim: d, entries }
    }

    /// Kronecker product `self ⊗ other`; `self` acts on the more significant qubits.
    pub fn kron(&self, other: &Operator) -> Operator {
        let (m, n) = (self.dim, other.dim);
        let d = m * n;
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for i1 in 0..m {
            for j1 in 0..m {
                let x = self.entries[i1 * m + j1];
                for i2 in 0..n {
                    for j2 in 0..n {
                        entries[(i1 * n + i2) * d + (j1 * n + j2)] = x * other.entries[i2 * n + j2];
                    }
                }
            }
        }
        Operator { dim: d, entries }
    }

    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }

    /// `max |A − A†|` entrywise.
    pub fn hermiticity_residual(&self) -> f64 {
        self.max_abs_diff(&self.adjoint()).expect("same dimension")
    }

    /// `⟨v|A|v⟩` for a plain amplitude vector of length `dim`.
    pub fn expectation(&self, v: &[Complex64]) -> Result<Complex64> {
        if v.len() != self.dim {
            return Err(QsimError::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let d = self.dim;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, vi) in v.iter().enumerate() {
            let row: Complex64 = self.entries[i * d..(i + 1) * d].iter().zip(v).map(|(m, x)| m * x).sum();
            acc += vi.conj() * row;
        }
        Ok(acc)
    }

    fn require_2x2(&self) -> Result<()> {
        if self.dim != 2 {
            return Err(QsimError::DimensionMismatch {
                expected: 2,
                found: self.dim,
            });
        }
        Ok(())
    }

    /// Eigenvalues `(λ_min, λ_max)` of the Hermitian part of a 2×2 operator,
    /// in closed form from trace and determinant.
    pub fn eigenvalues_2x2(&self) -> Result<(f64, f64)> {
        self.require_2x2()?;
        let p = self.get(0, 0).re;
        let s = self.get(1, 1).re;
        let q = (self.get(0, 1) + self.get(1, 0).conj()) * 0.5;
        let mean = 0.5 * (p + s);
        let radius = (0.5 * (p - s)).hypot(q.norm());
        Ok((mean - radius, mean + radius))
    }

    /// Principal square root of a positive semidefinite Hermitian 2×2 operator:
    /// `√A = (A + √det·I) / √(tr + 2√det)`.
    pub fn sqrt_psd_2x2(&self) -> Result<Operator> {
        self.require_2x2()?;
        let (lo, _) = self.eigenvalues_2x2()?;
        if lo < super::EIG_FLOOR {
            return Err(QsimError::NotPositive(lo));
        }
        let det = (self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0)).re;
        let s = det.max(0.0).sqrt();
        let t = (self.get(0, 0).re + self.get(1, 1).re + 2.0 * s).max(0.0).sqrt();
        if t == 0.0 {
            return Operator::zero(2);
        }
        let shifted = self.add(&Operator::identity(2)?.scale(Complex64::new(s, 0.0)))?;
        Ok(shifted.scale(Complex64::new(1.0 / t, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cnot_squares_to_identity() {
        let c = Operator::cnot();
        let id = Operator::identity(4).unwrap();
        assert_eq!(c.matmul(&c).unwrap().max_abs_diff(&id).unwrap(), 0.0);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = Operator::real_2x2([[0.5, 0.3], [0.3, 0.2]]).unwrap();
        let r = a.sqrt_psd_2x2().unwrap();
        assert!(r.matmul(&r).unwrap().max_abs_diff(&a).unwrap() < 1e-14);

        // rank one
        let p = Operator::real_2x2([[0.36, 0.48], [0.48, 0.64]]).unwrap();
        let r = p.sqrt_psd_2x2().unwrap();
        assert!(r.matmul(&r).unwrap().max_abs_diff(&p).unwrap() < 1e-14);

        let z = Operator::zero(2).unwrap();
        assert_eq!(z.sqrt_psd_2x2().unwrap(), z);
    }

    #[test]
    fn sqrt_rejects_negative() {
        let a = Operator::real_2x2([[1.0, 0.0], [0.0, -0.5]]).unwrap();
        assert!(matches!(a.sqrt_psd_2x2(), Err(QsimError::NotPositive(_))));
    }

    #[test]
    fn eigenvalues_of_pauli_x() {
        let (lo, hi) = Operator::pauli_x().eigenvalues_2x2().unwrap();
        assert_eq!((lo, hi), (-1.0, 1.0));
    }

    #[test]
    fn kron_ordering() {
        let x = Operator::pauli_x();
        let id = Operator::identity(2).unwrap();
        let xi = x.kron(&id);
        // X on the high qubit maps |00⟩ (row 0) from |10⟩ (col 2)
        assert_eq!(xi.get(0, 2), Complex64::new(1.0, 0.0));
        assert_eq!(xi.get(0, 1), Complex64::new(0.0, 0.0));
    }
}
