//! Classical counterpart of a synthesized spectrum: a smooth function `f` of
//! the actions interpolating `I ↦ E_{φ(I)}`, the Hamiltonian
//! `a_f(x, p) = f(J_1, ..., J_n)` with `J_i = (x_i² + p_i² − 1)/2`, and RK4
//! flows that witness conservation of every `J_i`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairing::{self, MultiIndex};
use crate::spectra::SpectrumSeq;

/// Actions may leave the node box by this much before evaluation fails.
pub const DOMAIN_SLACK: f64 = 1e-9;
/// Largest number of tensor nodes `K^n` accepted.
pub const MAX_NODES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// Tensor product of natural cubic splines (C²).
    #[default]
    Spline,
    /// Tensor product of Lagrange polynomials through all nodes (C^∞).
    Polynomial,
}

/// One-axis interpolation weights on the nodes `0, 1, ..., K−1`.
#[derive(Debug, Clone)]
struct Axis {
    k: usize,
    kind: Extension,
    /// Natural-spline second derivatives per unit data vector: `M = S y`.
    s: DMatrix<f64>,
}

impl Axis {
    fn new(k: usize, kind: Extension) -> Self {
        let mut s = DMatrix::zeros(k, k);
        if k > 2 {
            // interior rows: M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i-1} − 2 y_i + y_{i+1})
            let m = k - 2;
            let mut t = DMatrix::zeros(m, m);
            let mut r = DMatrix::zeros(m, k);
            for i in 0..m {
                t[(i, i)] = 4.0;
                if i > 0 {
                    t[(i, i - 1)] = 1.0;
                }
                if i + 1 < m {
                    t[(i, i + 1)] = 1.0;
                }
                r[(i, i)] = 6.0;
                r[(i, i + 1)] = -12.0;
                r[(i, i + 2)] = 6.0;
            }
            let inner = t.lu().solve(&r).expect("spline system is diagonally dominant");
            s.view_mut((1, 0), (m, k)).copy_from(&inner);
        }
        Axis { k, kind, s }
    }

    /// Weights for the value and the derivative at `x`.
    fn weights(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let k = self.k;
        let mut w = vec![0.0; k];
        let mut dw = vec![0.0; k];
        match self.kind {
            Extension::Spline => {
                let i = (x.floor().max(0.0) as usize).min(k - 2);
                let u = x - i as f64;
                let v = 1.0 - u;
                w[i] += v;
                w[i + 1] += u;
                dw[i] -= 1.0;
                dw[i + 1] += 1.0;
                let (a, b) = ((v * v * v - v) / 6.0, (u * u * u - u) / 6.0);
                let (da, db) = ((1.0 - 3.0 * v * v) / 6.0, (3.0 * u * u - 1.0) / 6.0);
                for j in 0..k {
                    w[j] += a * self.s[(i, j)] + b * self.s[(i + 1, j)];
                    dw[j] += da * self.s[(i, j)] + db * self.s[(i + 1, j)];
                }
            }
            Extension::Polynomial => {
                for (j, (wj, dwj)) in w.iter_mut().zip(dw.iter_mut()).enumerate() {
                    let mut val = 1.0;
                    let mut der = 0.0;
                    for m in (0..k).filter(|&m| m != j) {
                        let denom = j as f64 - m as f64;
                        der = der * (x - m as f64) / denom + val / denom;
                        val *= (x - m as f64) / denom;
                    }
                    *wj = val;
                    *dwj = der;
                }
            }
        }
        (w, dw)
    }
}

/// Energies `E_{φ(I)}` on the node box `{0, ..., K−1}^n` and the interpolant
/// over `J ∈ [0, K−1]^n`.
#[derive(Debug, Clone)]
pub struct ActionTable {
    n: usize,
    cutoff: usize,
    /// Row-major over the box, first mode slowest.
    values: Vec<f64>,
    axis: Axis,
}

impl ActionTable {
    /// Table on the box `{0, ..., cutoff−1}^n`; every box node must have a
    /// rank inside `seq`.
    pub fn new(seq: &SpectrumSeq, n: usize, cutoff: usize, kind: Extension) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("number of modes must be at least 1"));
        }
        if cutoff < 2 {
            return Err(Error::invalid("action cutoff must be at least 2"));
        }
        let nodes = cutoff
            .checked_pow(n as u32)
            .filter(|&c| c <= MAX_NODES)
            .ok_or_else(|| Error::capacity(format!("{cutoff}^{n} action nodes exceed {MAX_NODES}")))?;
        let corner = MultiIndex::new(vec![cutoff as u64 - 1; n])?;
        let need = pairing::encode(&corner)? as usize + 1;
        if seq.len() < need {
            return Err(Error::invalid(format!(
                "a {cutoff}^{n} action box needs {need} energies, got {}",
                seq.len()
            )));
        }
        let mut values = Vec::with_capacity(nodes);
        for flat in 0..nodes {
            let idx = MultiIndex::new(Self::unflatten(flat, n, cutoff))?;
            values.push(seq.as_slice()[pairing::encode(&idx)? as usize]);
        }
        Ok(ActionTable {
            n,
            cutoff,
            values,
            axis: Axis::new(cutoff, kind),
        })
    }

    /// Largest box that `seq` fills (at least 2 nodes per axis).
    pub fn largest(seq: &SpectrumSeq, n: usize, kind: Extension) -> Result<Self> {
        let mut k: usize = 2;
        while MultiIndex::new(vec![k as u64; n])
            .and_then(|c| pairing::encode(&c))
            .is_ok_and(|r| (r as usize) < seq.len())
            && (k + 1).checked_pow(n as u32).is_some_and(|c| c <= MAX_NODES)
        {
            k += 1;
        }
        Self::new(seq, n, k, kind)
    }

    fn unflatten(mut flat: usize, n: usize, k: usize) -> Vec<u64> {
        let mut idx = vec![0u64; n];
        for slot in idx.iter_mut().rev() {
            *slot = (flat % k) as u64;
            flat /= k;
        }
        idx
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn extension(&self) -> Extension {
        self.axis.kind
    }

    /// Upper end of the action box on every axis.
    pub fn action_max(&self) -> f64 {
        (self.cutoff - 1) as f64
    }

    pub fn node_value(&self, idx: &[u64]) -> Option<f64> {
        if idx.len() != self.n || idx.iter().any(|&i| i as usize >= self.cutoff) {
            return None;
        }
        let flat = idx.iter().fold(0usize, |acc, &i| acc * self.cutoff + i as usize);
        Some(self.values[flat])
    }

    fn check_domain(&self, j: &[f64]) -> Result<()> {
        if j.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: j.len(),
            });
        }
        let hi = self.action_max();
        if let Some(x) = j.iter().find(|&&x| !(x >= -DOMAIN_SLACK && x <= hi + DOMAIN_SLACK)) {
            return Err(Error::invalid(format!("action {x} outside the interpolation box [0, {hi}]")));
        }
        Ok(())
    }

    /// `f(J)` and `∇f(J)`.
    pub fn eval_with_gradient(&self, j: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_domain(j)?;
        Ok(self.extended(j))
    }

    /// The interpolant continued past the box by its end pieces.
    fn extended(&self, j: &[f64]) -> (f64, Vec<f64>) {
        let per_axis: Vec<(Vec<f64>, Vec<f64>)> = j.iter().map(|&x| self.axis.weights(x)).collect();
        let k = self.cutoff;
        let mut value = 0.0;
        let mut grad = vec![0.0; self.n];
        let mut idx = vec![0usize; self.n];
        for &e in &self.values {
            let mut w = 1.0;
            for (a, &i) in idx.iter().enumerate() {
                w *= per_axis[a].0[i];
            }
            value += w * e;
            for (g, d) in grad.iter_mut().enumerate() {
                let mut dw = per_axis[g].1[idx[g]];
                for (a, &i) in idx.iter().enumerate().filter(|&(a, _)| a != g) {
                    dw *= per_axis[a].0[i];
                }
                *d += dw * e;
            }
            // advance the odometer, last axis fastest
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < k {
                    break;
                }
                *slot = 0;
            }
        }
        (value, grad)
    }

    pub fn eval(&self, j: &[f64]) -> Result<f64> {
        self.eval_with_gradient(j).map(|(v, _)| v)
    }

    /// Largest `|∂f/∂J_i|` over the node box.
    pub fn max_frequency(&self) -> f64 {
        let mut best: f64 = 0.0;
        for flat in 0..self.values.len() {
            let node: Vec<f64> = Self::unflatten(flat, self.n, self.cutoff)
                .into_iter()
                .map(|i| i as f64)
                .collect();
            if let Ok((_, g)) = self.eval_with_gradient(&node) {
                best = g.iter().fold(best, |m, x| m.max(x.abs()));
            }
        }
        best
    }

    /// `10⁻² / max|∂f/∂J|`, or `10⁻²` for a flat table.
    pub fn default_dt(&self) -> f64 {
        let w = self.max_frequency();
        if w > 0.0 {
            1e-2 / w
        } else {
            1e-2
        }
    }
}

/// Canonical coordinates `(x, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if x.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: p.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::invalid("phase point has no coordinates"));
        }
        if x.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::invalid("phase point has non-finite coordinates"));
        }
        Ok(PhasePoint { x, p })
    }

    /// The point on the `J` torus at angle zero: `x_i = √(2J_i + 1)`, `p = 0`.
    pub fn from_actions(j: &[f64]) -> Result<Self> {
        if let Some(v) = j.iter().find(|&&v| !(v >= -0.5)) {
            return Err(Error::invalid(format!("action {v} is below −1/2")));
        }
        Self::new(j.iter().map(|v| (2.0 * v + 1.0).sqrt()).collect(), vec![0.0; j.len()])
    }

    pub fn modes(&self) -> usize {
        self.x.len()
    }

    pub fn actions(&self) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.p)
            .map(|(x, p)| 0.5 * (x * x + p * p - 1.0))
            .collect()
    }

    /// Euclidean norm of `(x, p)`.
    pub fn radius(&self) -> f64 {
        self.x.iter().chain(&self.p).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `a_f(x, p) = f(J(x, p))`.
pub fn classical_value(table: &ActionTable, z: &PhasePoint) -> Result<f64> {
    table.eval(&z.actions())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub actions: Vec<f64>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    pub modes: usize,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    /// False when the orbit left the interpolation box and was cut short.
    pub completed: bool,
    pub max_action_drift: f64,
    pub max_energy_drift: f64,
    pub initial_radius: f64,
    pub max_radius: f64,
    pub extension: Extension,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flow {
    pub report: FlowReport,
    #[serde(skip)]
    pub trajectory: Vec<TrajectorySample>,
}

impl Flow {
    /// `t,x1..xn,p1..pn,J1..Jn,energy`.
    pub fn to_csv(&self) -> String {
        let n = self.report.modes;
        let mut out = String::from("t");
        for prefix in ["x", "p", "J"] {
            for i in 1..=n {
                let _ = write!(out, ",{prefix}{i}");
            }
        }
        out.push_str(",energy\n");
        for s in &self.trajectory {
            let _ = write!(out, "{:.12e}", s.t);
            for v in s.x.iter().chain(&s.p).chain(&s.actions) {
                let _ = write!(out, ",{v:.16e}");
            }
            let _ = writeln!(out, ",{:.16e}", s.energy);
        }
        out
    }
}

/// `(ẋ, ṗ) = (f_i p_i, −f_i x_i)` with `f_i = ∂f/∂J_i`. Intermediate stages
/// may sit just off the box, so only accepted states are domain-checked.
fn vector_field(table: &ActionTable, x: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let j: Vec<f64> = x.iter().zip(p).map(|(a, b)| 0.5 * (a * a + b * b - 1.0)).collect();
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("flow left finite phase space".into()));
    }
    let (_, g) = table.extended(&j);
    Ok((
        g.iter().zip(p).map(|(w, p)| w * p).collect(),
        g.iter().zip(x).map(|(w, x)| -w * x).collect(),
    ))
}

fn axpy(base: &[f64], k: &[f64], h: f64) -> Vec<f64> {
    base.iter().zip(k).map(|(b, k)| b + h * k).collect()
}

/// Classic RK4 from `z0` over `[0, t_final]`, keeping every `stride`-th
/// state in the trajectory (the first and last are always kept).
pub fn integrate_flow(table: &ActionTable, z0: &PhasePoint, t_final: f64, dt: f64, stride: usize) -> Result<Flow> {
    if z0.modes() != table.modes() {
        return Err(Error::DimensionMismatch {
            expected: table.modes(),
            found: z0.modes(),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("time step must be positive"));
    }
    if !(t_final >= dt && t_final.is_finite()) {
        return Err(Error::invalid("integration time must be at least one step"));
    }
    let stride = stride.max(1);
    let j0 = z0.actions();
    let e0 = table.eval(&j0)?;
    // the last step is shortened so the flow ends exactly at t_final
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let sample = |t: f64, x: &[f64], p: &[f64], e: f64| TrajectorySample {
        t,
        x: x.to_vec(),
        p: p.to_vec(),
        actions: x.iter().zip(p).map(|(a, b)| 0.5 * (a * a + b * b - 1.0)).collect(),
        energy: e,
    };
    let mut trajectory = vec![sample(0.0, &z0.x, &z0.p, e0)];
    let (mut x, mut p) = (z0.x.clone(), z0.p.clone());
    let mut report = FlowReport {
        modes: table.modes(),
        dt,
        t_final: 0.0,
        steps: 0,
        completed: true,
        max_action_drift: 0.0,
        max_energy_drift: 0.0,
        initial_radius: z0.radius(),
        max_radius: z0.radius(),
        extension: table.extension(),
    };
    for step in 1..=steps {
        let h = if step == steps { t_final - (steps - 1) as f64 * dt } else { dt };
        let next = (|| -> Result<(Vec<f64>, Vec<f64>, f64)> {
            let (k1x, k1p) = vector_field(table, &x, &p)?;
            let (k2x, k2p) = vector_field(table, &axpy(&x, &k1x, h / 2.0), &axpy(&p, &k1p, h / 2.0))?;
            let (k3x, k3p) = vector_field(table, &axpy(&x, &k2x, h / 2.0), &axpy(&p, &k2p, h / 2.0))?;
            let (k4x, k4p) = vector_field(table, &axpy(&x, &k3x, h), &axpy(&p, &k3p, h))?;
            let combine = |v: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
                (0..v.len())
                    .map(|i| v[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
                    .collect()
            };
            let nx = combine(&x, &k1x, &k2x, &k3x, &k4x);
            let np = combine(&p, &k1p, &k2p, &k3p, &k4p);
            let jn: Vec<f64> = nx.iter().zip(&np).map(|(a, b)| 0.5 * (a * a + b * b - 1.0)).collect();
            let e = table.eval(&jn)?;
            Ok((nx, np, e))
        })();
        let Ok((nx, np, e)) = next else {
            report.completed = false;
            break;
        };
        x = nx;
        p = np;
        let t = if step == steps { t_final } else { step as f64 * dt };
        let s = sample(t, &x, &p, e);
        let drift = s.actions.iter().zip(&j0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        report.max_action_drift = report.max_action_drift.max(drift);
        report.max_energy_drift = report.max_energy_drift.max((e - e0).abs());
        report.max_radius = report.max_radius.max(x.iter().chain(&p).map(|v| v * v).sum::<f64>().sqrt());
        report.t_final = t;
        report.steps = step;
        if step % stride == 0 || step == steps {
            trajectory.push(s);
        }
    }
    if !report.completed {
        // keep the last state reached before the exit
        let last = sample(report.t_final, &x, &p, table.eval(&x.iter().zip(&p).map(|(a, b)| 0.5 * (a * a + b * b - 1.0)).collect::<Vec<_>>()).unwrap_or(f64::NAN));
        if trajectory.last().is_some_and(|s| s.t < last.t) {
            trajectory.push(last);
        }
    }
    Ok(Flow { report, trajectory })
}
