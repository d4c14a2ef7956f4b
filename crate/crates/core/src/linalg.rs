//! Dense complex Hermitian matrices and their eigendecomposition.
//!
//! General matrices go through nalgebra's Hermitian eigensolver
//! (Householder tridiagonalization plus implicit QR). Diagonal matrices,
//! which is what the synthesized operators are, take an exact path: the
//! eigenvalues are the sorted diagonal and the eigenvectors a permutation.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::SpectrumSeq;

pub type CMatrix = DMatrix<Complex64>;

/// Relative Hermiticity tolerance accepted on input.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `max |M - M^†| / max |M|`, zero for the zero matrix.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    worst / scale
}

/// `max |U^† U - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

/// A square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl HermitianMatrix {
    /// Validates shape and Hermiticity within [`HERMITIAN_TOL`] relative.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(Error::invalid("matrix must have dimension at least 1"));
        }
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let defect = hermiticity_defect(&m);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
        Ok(HermitianMatrix { m })
    }

    /// Wraps a matrix that is Hermitian by construction.
    pub(crate) fn from_parts(m: CMatrix) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        HermitianMatrix { m }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::invalid("matrix must have dimension at least 1"));
        }
        let d = diag.len();
        Ok(HermitianMatrix {
            m: CMatrix::from_fn(d, d, |j, k| {
                if j == k {
                    Complex64::new(diag[j], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        })
    }

    /// Builds from a real row-major array; symmetry is validated.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: rows.len(),
            });
        }
        Self::new(CMatrix::from_fn(dim, dim, |j, k| {
            Complex64::new(rows[j * dim + k], 0.0)
        }))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.m)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.m)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|k| j == k || self.m[(j, k)] == Complex64::new(0.0, 0.0)))
    }

    /// Real parts of the diagonal.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.m[(j, j)].re).collect()
    }

    /// `V M V^†`. The result is symmetrized, which changes it only at the
    /// rounding level.
    pub fn conjugate_by(&self, v: &CMatrix) -> Result<HermitianMatrix> {
        if v.nrows() != self.dim() || v.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.nrows(),
            });
        }
        let p = v * &self.m * v.adjoint();
        let sym = (&p + p.adjoint()).scale(0.5);
        Ok(HermitianMatrix { m: sym })
    }

    pub fn to_json_value(&self) -> MatrixJson {
        let n = self.dim();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                re.push(self.m[(j, k)].re);
                im.push(self.m[(j, k)].im);
            }
        }
        MatrixJson { dim: n, re, im }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("finite matrix serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MatrixJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

/// Wire form `{dim, re, im}` with row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl TryFrom<MatrixJson> for HermitianMatrix {
    type Error = Error;

    fn try_from(raw: MatrixJson) -> Result<Self> {
        let n = raw.dim;
        if n == 0 {
            return Err(Error::invalid("matrix JSON: dim must be at least 1"));
        }
        let expected = n.checked_mul(n).ok_or_else(|| Error::capacity("matrix JSON: dim too large"))?;
        for (name, v) in [("re", &raw.re), ("im", &raw.im)] {
            if v.len() != expected {
                return Err(Error::invalid(format!(
                    "matrix JSON: '{name}' has {} entries, expected {expected}",
                    v.len()
                )));
            }
        }
        HermitianMatrix::new(CMatrix::from_fn(n, n, |j, k| {
            Complex64::new(raw.re[j * n + k], raw.im[j * n + k])
        }))
    }
}

/// Ascending eigenvalues with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: SpectrumSeq,
    pub vectors: CMatrix,
}

/// Rotates each column so its largest-modulus entry (first one on ties) is
/// real and positive.
pub fn normalize_phases(v: &mut CMatrix) {
    for mut col in v.column_iter_mut() {
        let mut best = 0;
        let mut best_norm = -1.0;
        for (i, z) in col.iter().enumerate() {
            let r = z.norm();
            if r > best_norm {
                best_norm = r;
                best = i;
            }
        }
        if best_norm > 0.0 {
            let phase = col[best].conj() / best_norm;
            col.iter_mut().for_each(|z| *z *= phase);
            col[best] = Complex64::new(col[best].re, 0.0);
        }
    }
}

pub fn eigendecompose(h: &HermitianMatrix) -> Result<Eigen> {
    let n = h.dim();
    let (values, vectors) = if h.is_diagonal() {
        let diag = h.diagonal();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
        let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for (col, &row) in order.iter().enumerate() {
            vectors[(row, col)] = Complex64::new(1.0, 0.0);
        }
        (values, vectors)
    } else {
        let eig = SymmetricEigen::new(h.matrix().clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .total_cmp(&eig.eigenvalues[b])
                .then(a.cmp(&b))
        });
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(src));
        }
        normalize_phases(&mut vectors);
        (values, vectors)
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigensolver produced non-finite eigenvalues".into()));
    }
    Ok(Eigen {
        values: SpectrumSeq::new(values)?,
        vectors,
    })
}

/// Haar-distributed unitary from the QR factorization of a complex Ginibre
/// matrix, with the diagonal phases of `R` folded back into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let norm = rjj.norm();
        if norm > 0.0 {
            let phase = rjj / norm;
            q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
        }
    }
    q
}

/// [`random_unitary`] driven by `ChaCha8Rng::seed_from_u64(seed)`.
pub fn seeded_unitary(d: usize, seed: u64) -> CMatrix {
    use rand::SeedableRng;
    random_unitary(d, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
}
