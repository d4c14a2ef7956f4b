//! Truncated Fock-space operators: number operators on a graded-lex basis,
//! single-mode position/momentum, and the synthesized `A = f(N_1, ..., N_n)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianMatrix};
use crate::pairing::{self, MultiIndex};
use crate::spectra::SpectrumSeq;

/// The first `d` graded-lex multi-indices of dimension `n`, one per basis
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationBasis {
    n: usize,
    indices: Vec<MultiIndex>,
}

impl TruncationBasis {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("number of modes must be at least 1"));
        }
        Ok(TruncationBasis {
            n,
            indices: pairing::enumerate_first(d, n)?,
        })
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Quantum numbers of mode `mode` (1-based) along the basis.
    pub fn quantum_numbers(&self, mode: usize) -> Result<Vec<u64>> {
        self.check_mode(mode)?;
        Ok(self.indices.iter().map(|i| i.get(mode - 1)).collect())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode == 0 || mode > self.n {
            return Err(Error::invalid(format!(
                "mode {mode} out of range 1..={}",
                self.n
            )));
        }
        Ok(())
    }
}

/// `N_mode` on the basis: diagonal with the mode's quantum numbers.
pub fn number_operator(basis: &TruncationBasis, mode: usize) -> Result<HermitianMatrix> {
    let diag: Vec<f64> = basis
        .quantum_numbers(mode)?
        .into_iter()
        .map(|q| q as f64)
        .collect();
    HermitianMatrix::from_real_diagonal(&diag)
}

/// Single-mode `X = (a + a†)/√2` and `P = i(a† − a)/√2` truncated to `K`
/// levels.
pub fn ladder_xp(cutoff: usize) -> Result<(HermitianMatrix, HermitianMatrix)> {
    if cutoff < 2 {
        return Err(Error::invalid(format!("cutoff must be at least 2, got {cutoff}")));
    }
    let mut x = CMatrix::zeros(cutoff, cutoff);
    let mut p = CMatrix::zeros(cutoff, cutoff);
    for k in 0..cutoff - 1 {
        let amp = ((k + 1) as f64 / 2.0).sqrt();
        x[(k, k + 1)] = Complex64::new(amp, 0.0);
        x[(k + 1, k)] = Complex64::new(amp, 0.0);
        p[(k, k + 1)] = Complex64::new(0.0, -amp);
        p[(k + 1, k)] = Complex64::new(0.0, amp);
    }
    Ok((HermitianMatrix::from_parts(x), HermitianMatrix::from_parts(p)))
}

/// `(X² + P² − 1)/2` at cutoff `K`. Matches `diag(0, ..., K−2)` on the first
/// `K − 1` entries; the last entry is `(K − 2)/2` instead of `K − 1`.
pub fn number_from_xp(cutoff: usize) -> Result<CMatrix> {
    let (x, p) = ladder_xp(cutoff)?;
    let x2 = x.matrix() * x.matrix();
    let p2 = p.matrix() * p.matrix();
    Ok((x2 + p2 - CMatrix::identity(cutoff, cutoff)).scale(0.5))
}

/// Diagonal `A` with `E_{encode(I)}` at the basis position of `I`.
pub fn synthesize(seq: &SpectrumSeq, basis: &TruncationBasis) -> Result<HermitianMatrix> {
    let d = basis.dim();
    if seq.len() < d {
        return Err(Error::invalid(format!(
            "spectrum has {} entries but the basis needs {d}",
            seq.len()
        )));
    }
    let diag = basis
        .indices()
        .iter()
        .map(|idx| {
            let rank = pairing::encode(idx)?;
            Ok(seq.as_slice()[rank as usize])
        })
        .collect::<Result<Vec<f64>>>()?;
    HermitianMatrix::from_real_diagonal(&diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, eigendecompose, max_abs};

    fn diag_of(h: &HermitianMatrix) -> Vec<f64> {
        assert!(h.is_diagonal());
        h.diagonal()
    }

    #[test]
    fn number_operator_examples() {
        let b = TruncationBasis::new(3, 1).unwrap();
        assert_eq!(diag_of(&number_operator(&b, 1).unwrap()), vec![0.0, 1.0, 2.0]);
        let b = TruncationBasis::new(3, 2).unwrap();
        assert_eq!(diag_of(&number_operator(&b, 1).unwrap()), vec![0.0, 0.0, 1.0]);
        assert_eq!(diag_of(&number_operator(&b, 2).unwrap()), vec![0.0, 1.0, 0.0]);
        assert!(number_operator(&b, 0).is_err());
        assert!(number_operator(&b, 3).is_err());
    }

    #[test]
    fn ladder_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (x, p) = ladder_xp(2).unwrap();
        assert_eq!(x.matrix()[(0, 1)], Complex64::new(s, 0.0));
        assert_eq!(x.matrix()[(1, 0)], Complex64::new(s, 0.0));
        assert_eq!(p.matrix()[(0, 1)], Complex64::new(0.0, -s));
        assert_eq!(p.matrix()[(1, 0)], Complex64::new(0.0, s));
        assert_eq!(x.hermiticity_defect(), 0.0);
        assert_eq!(p.hermiticity_defect(), 0.0);
        assert!(ladder_xp(1).is_err());

        let (x, p) = ladder_xp(3).unwrap();
        let sum = x.matrix() * x.matrix() + p.matrix() * p.matrix();
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        assert!(max_abs(&(sum - expected)) < 1e-14);
    }

    #[test]
    fn truncation_defect_sits_in_last_entry() {
        for k in 2..=12 {
            let n = number_from_xp(k).unwrap();
            for j in 0..k {
                for l in 0..k {
                    let want = match (j == l, j + 1 == k) {
                        (true, false) => j as f64,
                        (true, true) => (k as f64 - 2.0) / 2.0,
                        _ => 0.0,
                    };
                    assert!((n[(j, l)] - Complex64::new(want, 0.0)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn synthesize_examples() {
        let seq = SpectrumSeq::new(vec![5.0, 7.0, 7.0]).unwrap();
        let a = synthesize(&seq, &TruncationBasis::new(3, 1).unwrap()).unwrap();
        assert_eq!(diag_of(&a), vec![5.0, 7.0, 7.0]);

        let seq = SpectrumSeq::new(vec![5.0, 7.0, 9.0]).unwrap();
        let b = TruncationBasis::new(3, 2).unwrap();
        let a = synthesize(&seq, &b).unwrap();
        assert_eq!(diag_of(&a), vec![5.0, 7.0, 9.0]);
        for mode in 1..=2 {
            let n = number_operator(&b, mode).unwrap();
            assert_eq!(max_abs(&commutator(a.matrix(), n.matrix())), 0.0);
        }

        let a = synthesize(&seq, &TruncationBasis::new(1, 3).unwrap()).unwrap();
        assert_eq!(a.dim(), 1);
        assert_eq!(diag_of(&a), vec![5.0]);

        assert!(synthesize(&seq, &TruncationBasis::new(4, 2).unwrap()).is_err());
    }

    #[test]
    fn synthesized_spectrum_is_sorted_prefix() {
        let seq = SpectrumSeq::new(vec![3.5, -1.0, 2.0, 2.0, 0.0, 9.0, -1.0]).unwrap();
        let b = TruncationBasis::new(6, 3).unwrap();
        let a = synthesize(&seq, &b).unwrap();
        let e = eigendecompose(&a).unwrap();
        assert_eq!(e.values, seq.prefix(6).unwrap().sorted());
    }
}
