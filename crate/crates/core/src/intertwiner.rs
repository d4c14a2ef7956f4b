//! The unitary `U` with `U H = A U` and the first integrals `T_i = U^† N_i U`.
//!
//! `U = Σ_k ê_k e_k^†` pairs the k-th eigenvector of `H` with the k-th of `A`
//! (both ascending). Inside a degenerate cluster the solver's eigenvector
//! order is used as is; any choice intertwines.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fockspace::{self, TruncationBasis};
use crate::linalg::{self, eigendecompose, CMatrix, HermitianMatrix};
use crate::spectra::{self, IsospectralReport, SpectrumSeq};

/// Relative commutator tolerance: norms are compared against
/// `COMMUTATOR_TOL · (‖H‖_F + Σ ‖T_i‖_F)`.
pub const COMMUTATOR_TOL: f64 = 1e-8;
/// Two joint eigenvalue tuples closer than this in every component count as
/// equal.
pub const JOINT_TOL: f64 = 1e-6;
/// Eigenvalues of `H` closer than `CLUSTER_TOL · ‖H‖_F` form one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Intertwiner {
    pub u: CMatrix,
    pub eigenvalues: SpectrumSeq,
    pub isospectral: IsospectralReport,
}

/// Builds `U = V_A V_H^†` after checking that `H` and `A` have the same
/// spectrum within `tol`.
///
/// `‖U H − A U‖_F ≤ √d · max_k |λ_k(H) − λ_k(A)| + r`, where `r` is the sum of
/// the two eigensolver residuals (`O(ε ‖H‖_F)`), so with isospectral inputs
/// the bound is `c · tol` with `c = √d` plus rounding.
pub fn build_unitary(h: &HermitianMatrix, a: &HermitianMatrix, tol: f64) -> Result<Intertwiner> {
    if h.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: a.dim(),
        });
    }
    let eh = eigendecompose(h)?;
    let ea = eigendecompose(a)?;
    let report = spectra::completely_isospectral(&eh.values, &ea.values, tol)?;
    if !report.isospectral {
        return Err(Error::NotIsospectral(Box::new(report)));
    }
    Ok(Intertwiner {
        u: &ea.vectors * eh.vectors.adjoint(),
        eigenvalues: eh.values,
        isospectral: report,
    })
}

/// `T_i = U^† N_i U` for every mode of `basis`.
pub fn first_integrals(u: &CMatrix, basis: &TruncationBasis) -> Result<Vec<HermitianMatrix>> {
    first_integrals_with(u, basis, Exec::default())
}

pub fn first_integrals_with(u: &CMatrix, basis: &TruncationBasis, exec: Exec) -> Result<Vec<HermitianMatrix>> {
    if u.nrows() != basis.dim() || u.ncols() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: u.nrows(),
        });
    }
    let modes: Vec<Vec<u64>> = (1..=basis.modes())
        .map(|m| basis.quantum_numbers(m))
        .collect::<Result<_>>()?;
    Ok(exec.map_range(modes.len(), |i| {
        // N_i U scales row r of U by the r-th quantum number
        let mut nu = u.clone();
        for (r, &q) in modes[i].iter().enumerate() {
            let s = Complex64::new(q as f64, 0.0);
            nu.row_mut(r).iter_mut().for_each(|z| *z *= s);
        }
        HermitianMatrix::from_parts(u.adjoint() * nu)
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub isospectral: f64,
    pub commutator_relative: f64,
    pub joint_separation: f64,
    pub hermiticity: f64,
    pub cluster_relative: f64,
}

/// Outcome of the integrability check. Matrices are kept in memory but not
/// serialized.
#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityCertificate {
    pub dim: usize,
    pub modes: usize,
    pub passes: bool,
    #[serde(skip)]
    pub u: CMatrix,
    #[serde(skip)]
    pub integrals: Vec<HermitianMatrix>,
    pub unitarity_defect: f64,
    /// `‖U H − A U‖_F`.
    pub intertwining_residual: f64,
    /// Largest `‖[T_i, T_j]‖_F`, `i < j`.
    pub max_commutator_integrals: f64,
    /// Largest `‖[H, T_i]‖_F`.
    pub max_commutator_hamiltonian: f64,
    pub commutator_norm: f64,
    /// `‖H‖_F + Σ ‖T_i‖_F`.
    pub commutator_scale: f64,
    pub max_hermiticity_defect: f64,
    /// Diagonal of `U T_i U^†` for every basis state, one tuple per state.
    pub joint_spectrum: Vec<Vec<f64>>,
    /// Largest off-diagonal Frobenius norm of `U T_i U^†`.
    pub joint_residual: f64,
    /// Joint tuples pairwise distinct, the operational form of functional
    /// independence.
    pub independence: bool,
    pub degenerate_clusters: usize,
    pub tolerances: Tolerances,
    pub isospectral: IsospectralReport,
    pub notes: Vec<String>,
}

/// Inputs to [`verify_integrability`].
pub struct CertificateInputs<'a> {
    pub a: &'a HermitianMatrix,
    pub intertwiner: &'a Intertwiner,
    pub integrals: &'a [HermitianMatrix],
}

/// Fills every certificate field; failures are reported through `passes`.
pub fn verify_integrability(h: &HermitianMatrix, inputs: CertificateInputs<'_>) -> IntegrabilityCertificate {
    verify_integrability_with(h, inputs, Exec::default())
}

pub fn verify_integrability_with(
    h: &HermitianMatrix,
    inputs: CertificateInputs<'_>,
    exec: Exec,
) -> IntegrabilityCertificate {
    let d = h.dim();
    let u = &inputs.intertwiner.u;
    let ts = inputs.integrals;
    let n = ts.len();

    let unitarity_defect = linalg::unitarity_defect(u);
    let intertwining_residual =
        linalg::frobenius(&(u * h.matrix() - inputs.a.matrix() * u));

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let tt = exec.map_range(pairs.len(), |k| {
        let (i, j) = pairs[k];
        linalg::frobenius(&linalg::commutator(ts[i].matrix(), ts[j].matrix()))
    });
    let ht = exec.map_range(n, |i| {
        linalg::frobenius(&linalg::commutator(h.matrix(), ts[i].matrix()))
    });
    let max_commutator_integrals = tt.into_iter().fold(0.0, f64::max);
    let max_commutator_hamiltonian = ht.into_iter().fold(0.0, f64::max);
    let commutator_norm = max_commutator_integrals.max(max_commutator_hamiltonian);
    let commutator_scale = h.frobenius_norm() + ts.iter().map(|t| t.frobenius_norm()).sum::<f64>();
    let max_hermiticity_defect = ts.iter().map(|t| t.hermiticity_defect()).fold(0.0, f64::max);

    // rotate each T_i back to the A eigenbasis, where it should be N_i
    let rotated = exec.map_range(n, |i| {
        let m = u * ts[i].matrix() * u.adjoint();
        let diag: Vec<f64> = (0..d).map(|k| m[(k, k)].re).collect();
        let off = (0..d)
            .flat_map(|j| (0..d).map(move |k| (j, k)))
            .filter(|(j, k)| j != k)
            .map(|(j, k)| m[(j, k)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        (diag, off)
    });
    let joint_residual = rotated.iter().map(|(_, off)| *off).fold(0.0, f64::max);
    let joint_spectrum: Vec<Vec<f64>> = (0..d)
        .map(|k| rotated.iter().map(|(diag, _)| diag[k]).collect())
        .collect();
    let independence = tuples_distinct(&joint_spectrum, JOINT_TOL);

    let cluster_gap = CLUSTER_TOL * h.frobenius_norm().max(f64::MIN_POSITIVE);
    let degenerate_clusters = count_clusters(inputs.intertwiner.eigenvalues.as_slice(), cluster_gap);

    let commutes = commutator_norm <= COMMUTATOR_TOL * commutator_scale;
    let self_adjoint = max_hermiticity_defect <= linalg::HERMITIAN_TOL;
    let mut notes = vec![
        "functional independence is checked as pairwise-distinct joint eigenvalue tuples".to_string(),
        "continuous spectrum is empty at finite dimension".to_string(),
        "tolerances are engineering choices, not derived bounds".to_string(),
    ];
    if !commutes {
        notes.push(format!(
            "commutator norm {commutator_norm:.3e} exceeds {:.3e}",
            COMMUTATOR_TOL * commutator_scale
        ));
    }
    if !independence {
        notes.push("joint eigenvalue tuples are not pairwise distinct".to_string());
    }
    if !self_adjoint {
        notes.push(format!("first integral Hermiticity defect {max_hermiticity_defect:.3e}"));
    }

    IntegrabilityCertificate {
        dim: d,
        modes: n,
        passes: commutes && independence && self_adjoint,
        u: u.clone(),
        integrals: ts.to_vec(),
        unitarity_defect,
        intertwining_residual,
        max_commutator_integrals,
        max_commutator_hamiltonian,
        commutator_norm,
        commutator_scale,
        max_hermiticity_defect,
        joint_spectrum,
        joint_residual,
        independence,
        degenerate_clusters,
        tolerances: Tolerances {
            isospectral: inputs.intertwiner.isospectral.tolerance,
            commutator_relative: COMMUTATOR_TOL,
            joint_separation: JOINT_TOL,
            hermiticity: linalg::HERMITIAN_TOL,
            cluster_relative: CLUSTER_TOL,
        },
        isospectral: inputs.intertwiner.isospectral.clone(),
        notes,
    }
}

fn tuples_distinct(tuples: &[Vec<f64>], tol: f64) -> bool {
    tuples.iter().enumerate().all(|(k, a)| {
        tuples[k + 1..]
            .iter()
            .all(|b| a.iter().zip(b).any(|(x, y)| (x - y).abs() > tol))
    })
}

/// Number of runs of two or more ascending eigenvalues with gaps `< gap`.
fn count_clusters(sorted: &[f64], gap: f64) -> usize {
    let mut clusters = 0;
    let mut in_cluster = false;
    for w in sorted.windows(2) {
        if w[1] - w[0] < gap {
            if !in_cluster {
                clusters += 1;
                in_cluster = true;
            }
        } else {
            in_cluster = false;
        }
    }
    clusters
}

/// Full pipeline for a Hermitian `H` and `n` modes: synthesize `A` from the
/// ascending spectrum of `H`, intertwine, conjugate, certify.
pub fn certify_hamiltonian(h: &HermitianMatrix, modes: usize, exec: Exec) -> Result<IntegrabilityCertificate> {
    let basis = TruncationBasis::new(h.dim(), modes)?;
    let spectrum = eigendecompose(h)?.values;
    let a = fockspace::synthesize(&spectrum, &basis)?;
    let tol = spectra::default_tolerance(&spectrum, &spectrum);
    let tw = build_unitary(h, &a, tol)?;
    let ts = first_integrals_with(&tw.u, &basis, exec)?;
    Ok(verify_integrability_with(
        h,
        CertificateInputs {
            a: &a,
            intertwiner: &tw,
            integrals: &ts,
        },
        exec,
    ))
}
