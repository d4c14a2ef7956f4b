//! Finite-difference truncations of `H = −Δ + V` on a Dirichlet box, used to
//! feed physical pure-point spectra into the integrability pipeline.
//!
//! Assembly is sparse (second-order central differences, Kronecker-sum
//! structure in 2D). Low eigenvalues of large grids come from block inverse
//! iteration on `H − σ` with a banded Cholesky factor; small grids, and
//! [`low_spectrum`] on a dense matrix, use the dense eigensolver.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::intertwiner::{self, IntegrabilityCertificate};
use crate::linalg::{eigendecompose, HermitianMatrix};
use crate::spectra::SpectrumSeq;

/// Default limit on the number of grid nodes (matrix dimension).
pub const DEFAULT_CAP: usize = 4096;
/// Grids up to this many nodes are diagonalized densely.
const DENSE_LIMIT: usize = 400;

/// Uniform Dirichlet grid on `[−L, L]^dim` with `M` interior nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dimension: usize,
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(dimension: usize, half_width: f64, points: usize) -> Result<Self> {
        let g = GridSpec {
            dimension,
            half_width,
            points,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dimension == 1 || self.dimension == 2) {
            return Err(Error::invalid(format!(
                "grid dimension must be 1 or 2, got {}",
                self.dimension
            )));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::invalid("grid half-width must be positive and finite"));
        }
        if self.points < 2 {
            return Err(Error::invalid("grid needs at least 2 points per axis"));
        }
        Ok(())
    }

    /// `h = 2L/(M+1)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points + 1) as f64
    }

    /// Interior node coordinates along one axis.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points)
            .map(|j| -self.half_width + (j + 1) as f64 * h)
            .collect()
    }

    /// `M^dim`, `None` on overflow.
    pub fn size(&self) -> Option<usize> {
        self.points.checked_pow(self.dimension as u32)
    }

    /// Coordinates of node `k` (x-major in 2D: `k = ix·M + iy`).
    pub fn coords(&self, k: usize) -> Vec<f64> {
        let nodes = self.nodes();
        match self.dimension {
            1 => vec![nodes[k]],
            _ => vec![nodes[k / self.points], nodes[k % self.points]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `V = Σ x_i²`.
    Harmonic,
    /// `V = x² y²`, 2D only.
    QuarticCross,
    /// Values at the grid nodes in node order.
    Table { values: Vec<f64> },
}

impl PotentialSpec {
    /// Potential values at every node of `grid`.
    pub fn sample(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        let size = grid.size().ok_or_else(|| Error::capacity("grid size overflows"))?;
        let v: Vec<f64> = match self {
            PotentialSpec::Harmonic => (0..size)
                .map(|k| grid.coords(k).iter().map(|x| x * x).sum())
                .collect(),
            PotentialSpec::QuarticCross => {
                if grid.dimension != 2 {
                    return Err(Error::invalid("the x²y² potential needs a 2D grid"));
                }
                (0..size)
                    .map(|k| {
                        let c = grid.coords(k);
                        c[0] * c[0] * c[1] * c[1]
                    })
                    .collect()
            }
            PotentialSpec::Table { values } => {
                if values.len() != size {
                    return Err(Error::DimensionMismatch {
                        expected: size,
                        found: values.len(),
                    });
                }
                values.clone()
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("potential is not finite on the grid"));
        }
        Ok(v)
    }

    /// Reads `x,V` (1D) or `x,y,V` (2D) rows; every grid node must appear
    /// exactly once. A header line and `#` comments are skipped.
    pub fn table_from_csv(text: &str, grid: &GridSpec) -> Result<PotentialSpec> {
        let size = grid.size().ok_or_else(|| Error::capacity("grid size overflows"))?;
        let nodes = grid.nodes();
        let h = grid.spacing();
        let locate = |x: f64, line: usize| -> Result<usize> {
            let j = ((x + grid.half_width) / h - 1.0).round();
            if j < 0.0 || j >= grid.points as f64 || (nodes[j as usize] - x).abs() > 1e-6 * h {
                return Err(Error::Parse {
                    line,
                    msg: format!("coordinate {x} is not a grid node"),
                });
            }
            Ok(j as usize)
        };
        let mut values = vec![f64::NAN; size];
        let cols = grid.dimension + 1;
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            let parsed = match parsed {
                Ok(p) => p,
                // header row
                Err(_) if lineno == 0 => continue,
                Err(_) => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "non-numeric field".into(),
                    })
                }
            };
            if parsed.len() != cols {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {cols} columns, found {}", parsed.len()),
                });
            }
            let k = match grid.dimension {
                1 => locate(parsed[0], line_no)?,
                _ => locate(parsed[0], line_no)? * grid.points + locate(parsed[1], line_no)?,
            };
            if !values[k].is_nan() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "grid node listed twice".into(),
                });
            }
            values[k] = parsed[cols - 1];
        }
        if let Some(k) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::invalid(format!(
                "potential table misses node {:?}",
                grid.coords(k)
            )));
        }
        Ok(PotentialSpec::Table { values })
    }
}

/// Sparse `−Δ_h + V` on a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct FdHamiltonian {
    grid: GridSpec,
    diag: Vec<f64>,
    potential_min: f64,
    coupling: f64,
}

/// Assembles the finite-difference Hamiltonian; grids with more than `cap`
/// nodes are refused.
pub fn build_fd_hamiltonian(grid: &GridSpec, pot: &PotentialSpec, cap: usize) -> Result<FdHamiltonian> {
    grid.validate()?;
    let size = grid.size().ok_or_else(|| Error::capacity("grid size overflows"))?;
    if size > cap {
        return Err(Error::capacity(format!(
            "grid has {size} nodes, above the cap of {cap}; use a coarser grid or raise the cap"
        )));
    }
    let v = pot.sample(grid)?;
    let h = grid.spacing();
    let coupling = 1.0 / (h * h);
    let kinetic = 2.0 * grid.dimension as f64 * coupling;
    let potential_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FdHamiltonian {
        grid: *grid,
        diag: v.iter().map(|x| kinetic + x).collect(),
        potential_min,
        coupling,
    })
}

impl FdHamiltonian {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn potential_min(&self) -> f64 {
        self.potential_min
    }

    /// Neighbour offsets `(stride, count along that axis)`.
    fn strides(&self) -> Vec<usize> {
        match self.grid.dimension {
            1 => vec![1],
            _ => vec![1, self.grid.points],
        }
    }

    fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let m = self.grid.points;
        let dim = self.grid.dimension;
        let n = self.dim();
        self.strides().into_iter().flat_map(move |stride| {
            let pos = if stride == 1 && dim == 2 { k % m } else { k / stride % m };
            let down = (pos > 0).then(|| k - stride);
            let up = (pos + 1 < m && k + stride < n).then(|| k + stride);
            down.into_iter().chain(up)
        })
    }

    /// Entry `(j, k)` of the matrix.
    pub fn entry(&self, j: usize, k: usize) -> f64 {
        if j == k {
            self.diag[j]
        } else if self.neighbours(j).any(|x| x == k) {
            -self.coupling
        } else {
            0.0
        }
    }

    /// Dense real-symmetric copy, mirrored entry by entry.
    pub fn to_real_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            a[(j, j)] = self.diag[j];
            for k in self.neighbours(j) {
                if k > j {
                    a[(j, k)] = -self.coupling;
                    a[(k, j)] = -self.coupling;
                }
            }
        }
        a
    }

    pub fn to_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix::from_parts(self.to_real_dense().map(|x| num_complex::Complex64::new(x, 0.0)))
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = self.diag[k] * x[k];
            for j in self.neighbours(k) {
                acc -= self.coupling * x[j];
            }
            *o = acc;
        }
    }

    /// The `m` smallest eigenvalues, ascending.
    pub fn low_spectrum(&self, m: usize) -> Result<SpectrumSeq> {
        let n = self.dim();
        if m == 0 || m > n {
            return Err(Error::invalid(format!("requested {m} levels from a {n}-node grid")));
        }
        if n <= DENSE_LIMIT {
            let eig = SymmetricEigen::new(self.to_real_dense());
            let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            vals.sort_by(f64::total_cmp);
            vals.truncate(m);
            return SpectrumSeq::new(vals);
        }
        self.inverse_subspace_iteration(m)
    }

    /// Block inverse iteration on `H − σ` with Rayleigh–Ritz, `σ` below the
    /// spectrum (`−Δ_h` is positive definite, so `σ = min V − 1` works).
    /// Blocks resolve degenerate levels that single-vector Krylov methods miss.
    fn inverse_subspace_iteration(&self, m: usize) -> Result<SpectrumSeq> {
        let n = self.dim();
        let p = (2 * m + 8).min(n);
        let shift = self.potential_min - 1.0;
        let chol = BandedCholesky::factor(self, shift)?;

        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5);
        let mut prev: Vec<f64> = vec![f64::INFINITY; m];
        let mut hx = vec![0.0; n];
        for _ in 0..5000 {
            // Y = (H − σ)^{-1} X, column by column
            for mut col in x.column_iter_mut() {
                chol.solve_in_place(col.as_mut_slice());
            }
            let q = x.clone().qr().q();
            let mut hq = DMatrix::zeros(n, p);
            for (c, mut out) in q.column_iter().zip(hq.column_iter_mut()) {
                self.apply(c.as_slice(), &mut hx);
                out.copy_from_slice(&hx);
            }
            let g = q.transpose() * &hq;
            let g = (&g + g.transpose()) * 0.5;
            let eig = SymmetricEigen::new(g);
            let mut order: Vec<usize> = (0..p).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let ritz: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let mut vecs = DMatrix::zeros(p, p);
            for (c, &i) in order.iter().enumerate() {
                vecs.set_column(c, &eig.eigenvectors.column(i));
            }
            x = &q * &vecs;

            let converged = ritz[..m]
                .iter()
                .zip(&prev)
                .all(|(a, b)| (a - b).abs() <= 1e-13 * a.abs().max(1.0));
            prev.copy_from_slice(&ritz[..m]);
            if converged {
                let r = &hq * &vecs - &x * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&ritz));
                let worst = (0..m)
                    .map(|j| r.column(j).norm() / ritz[j].abs().max(1.0))
                    .fold(0.0, f64::max);
                if worst <= 1e-6 {
                    return SpectrumSeq::new(prev);
                }
            }
        }
        Err(Error::Numerical("inverse subspace iteration did not converge".into()))
    }
}

/// Cholesky factor of `H − σ` stored as a lower band of half-width `b`.
struct BandedCholesky {
    n: usize,
    b: usize,
    /// `l[i * (b + 1) + (b - (i - j))]` holds `L[i][j]` for `i − b ≤ j ≤ i`.
    l: Vec<f64>,
}

impl BandedCholesky {
    fn factor(h: &FdHamiltonian, shift: f64) -> Result<Self> {
        let n = h.dim();
        let b = if h.grid.dimension == 1 { 1 } else { h.grid.points };
        let w = b + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            l[i * w + b] = h.diag[i] - shift;
            for j in h.neighbours(i).filter(|&j| j < i) {
                l[i * w + b - (i - j)] = -h.coupling;
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(b);
            for j in j0..=i {
                let mut s = l[i * w + b - (i - j)];
                let k0 = j0.max(j.saturating_sub(b));
                for k in k0..j {
                    s -= l[i * w + b - (i - k)] * l[j * w + b - (j - k)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::Numerical("shifted Hamiltonian is not positive definite".into()));
                    }
                    l[i * w + b] = s.sqrt();
                } else {
                    l[i * w + b - (i - j)] = s / l[j * w + b];
                }
            }
        }
        Ok(BandedCholesky { n, b, l })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= self.l[i * w + b - (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w + b];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + b + 1).min(n) {
                s -= self.l[k * w + b - (k - i)] * x[k];
            }
            x[i] = s / self.l[i * w + b];
        }
    }
}

/// The `m` smallest eigenvalues of a dense Hermitian matrix.
pub fn low_spectrum(h: &HermitianMatrix, m: usize) -> Result<SpectrumSeq> {
    if m == 0 || m > h.dim() {
        return Err(Error::invalid(format!(
            "requested {m} levels from a {}-dimensional matrix",
            h.dim()
        )));
    }
    eigendecompose(h)?.values.prefix(m)
}

/// Projects `H` onto its lowest `m` levels (diagonal in its eigenbasis),
/// synthesizes the isospectral `A` on `modes` modes, and certifies the
/// resulting first integrals.
pub fn pipeline_integrate(
    grid: &GridSpec,
    pot: &PotentialSpec,
    modes: usize,
    m: usize,
    cap: usize,
) -> Result<IntegrabilityCertificate> {
    if m > cap {
        return Err(Error::capacity(format!("{m} levels exceed the cap of {cap}")));
    }
    let h = build_fd_hamiltonian(grid, pot, cap)?;
    let levels = h.low_spectrum(m)?;
    let projected = HermitianMatrix::from_real_diagonal(levels.as_slice())?;
    intertwiner::certify_hamiltonian(&projected, modes, Exec::default())
}
