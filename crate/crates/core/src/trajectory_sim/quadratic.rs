//! Full-vector two-phase simulation on a quadratic `1/2 x^T H x`.
//!
//! Every worker runs `S` gradient steps `x <- (I - eta H_w) x` from the shared
//! iterate, the pseudo-gradients `x - x_w` are averaged in worker order, and
//! the outer optimizer updates `(x, m)` in vector form. No eigenbasis is used,
//! which makes this an independent check of the mode decomposition.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::{RestartSchedule, RoundRecord, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::mode_dynamics::{InnerConfig, Method, ModeState, OuterHyperparams};
use crate::scalar::Scalar;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
/// Slack on `eta * lambda_max <= 1` for eigenvalues computed in `f64`.
const STEP_SLACK: f64 = 1e-12;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Dimension("matrix has no rows".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        if data.iter().any(|v| !v.is_finite_value()) {
            return Err(invalid("matrix", "entries must be finite"));
        }
        Ok(Self { n, data })
    }

    pub fn diagonal(diag: Vec<T>) -> Self {
        let n = diag.len();
        let mut data = vec![T::zero(); n * n];
        for (i, d) in diag.into_iter().enumerate() {
            data[i * n + i] = d;
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        self.data
            .chunks(self.n)
            .map(|row| {
                row.iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    /// `1/2 v^T A v`.
    pub fn half_quadratic_form(&self, v: &[T]) -> T {
        let av = self.matvec(v);
        let two = T::one() + T::one();
        v.iter()
            .zip(av)
            .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b)
            / two
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_iterator(self.n, self.n, self.data.iter().map(|v| v.to_f64_lossy()))
    }

    /// Symmetry and positive-semidefiniteness checks, done in `f64`.
    /// Returns the eigenvalues in ascending order.
    pub fn psd_eigenvalues(&self) -> Result<Vec<f64>> {
        let a = self.to_nalgebra();
        let norm = a.norm();
        let asym = (&a - a.transpose()).norm();
        if asym > SYMMETRY_TOL * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd {
                reason: format!("asymmetry {asym:e} relative to norm {norm:e}"),
            });
        }
        let mut eig: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        if eig[0] < -PSD_TOL {
            return Err(Error::NotPsd {
                reason: format!("eigenvalue {:e} is negative", eig[0]),
            });
        }
        Ok(eig)
    }
}

/// Quadratic residual model shared by `workers` workers. Worker Hessians
/// default to the shared `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem<T> {
    h: DenseMatrix<T>,
    x0: Vec<T>,
    workers: usize,
    worker_h: Vec<DenseMatrix<T>>,
    lambda_max: f64,
}

impl<T: Scalar> QuadraticProblem<T> {
    pub fn new(h: DenseMatrix<T>, x0: Vec<T>, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(invalid("workers", "at least one worker is required"));
        }
        if x0.len() != h.dim() {
            return Err(Error::Dimension(format!(
                "x0 has {} entries for a {}x{} matrix",
                x0.len(),
                h.dim(),
                h.dim()
            )));
        }
        if x0.iter().any(|v| !v.is_finite_value()) {
            return Err(invalid("x0", "entries must be finite"));
        }
        let lambda_max = *h.psd_eigenvalues()?.last().expect("non-empty");
        Ok(Self {
            h,
            x0,
            workers,
            worker_h: Vec::new(),
            lambda_max,
        })
    }

    /// Heterogeneous per-worker curvature, one matrix per worker.
    pub fn with_worker_hessians(mut self, hs: Vec<DenseMatrix<T>>) -> Result<Self> {
        if hs.len() != self.workers {
            return Err(Error::Dimension(format!(
                "{} worker matrices for {} workers",
                hs.len(),
                self.workers
            )));
        }
        for m in &hs {
            if m.dim() != self.h.dim() {
                return Err(Error::Dimension("worker matrix size differs from H".into()));
            }
            let top = *m.psd_eigenvalues()?.last().expect("non-empty");
            self.lambda_max = self.lambda_max.max(top);
        }
        self.worker_h = hs;
        Ok(self)
    }

    pub fn hessian(&self) -> &DenseMatrix<T> {
        &self.h
    }

    pub fn x0(&self) -> &[T] {
        &self.x0
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Largest eigenvalue over the shared and per-worker matrices.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn worker_hessian(&self, w: usize) -> &DenseMatrix<T> {
        self.worker_h.get(w).unwrap_or(&self.h)
    }
}

fn inner_loop<T: Scalar>(h: &DenseMatrix<T>, eta: &T, steps: u32, x: &[T]) -> Vec<T> {
    let mut local = x.to_vec();
    for _ in 0..steps {
        let grad = h.matvec(&local);
        for (xi, gi) in local.iter_mut().zip(grad) {
            *xi = xi.clone() - eta.clone() * gi;
        }
    }
    local
}

/// Runs `rounds` outer rounds of the full two-phase method.
///
/// Only schedules that need no eigenbasis are accepted (none, global, soft).
pub fn simulate_full_quadratic<T: Scalar>(
    p: &QuadraticProblem<T>,
    inner: &InnerConfig<T>,
    h: &OuterHyperparams<T>,
    kind: Method,
    sched: &RestartSchedule<T>,
    rounds: usize,
) -> Result<Trajectory<T>> {
    sched.validate()?;
    let (period, retain, inject) = match sched {
        RestartSchedule::NoRestart => (None, T::one(), T::zero()),
        RestartSchedule::Global { period } => (Some(*period as usize), T::zero(), T::zero()),
        RestartSchedule::Soft {
            period,
            retain,
            inject,
        } => (Some(*period as usize), retain.clone(), inject.clone()),
        other => {
            return Err(Error::UnsupportedSchedule {
                schedule: other.name(),
                reason: "per-mode and blockwise periods need an eigenbasis".into(),
            })
        }
    };
    let hard = matches!(sched, RestartSchedule::Global { .. });
    let product = inner.eta().to_f64_lossy() * p.lambda_max();
    if product > 1.0 + STEP_SLACK {
        return Err(Error::StepTooLarge { product });
    }

    let n = p.h.dim();
    let nu = h.nu().clone();
    let beta = h.beta().clone();
    let one = T::one();
    let workers = T::from_usize(p.workers);

    let mut x = p.x0.clone();
    let mut m = vec![T::zero(); n];
    let states = |x: &[T], m: &[T]| -> Vec<ModeState<T>> {
        x.iter()
            .zip(m)
            .map(|(a, b)| ModeState::new(a.clone(), b.clone()))
            .collect()
    };
    let mut traj = Trajectory::start(states(&x, &m), p.h.half_quadratic_form(&x));

    for round in 1..=rounds {
        let locals: Vec<Vec<T>> = (0..p.workers)
            .into_par_iter()
            .map(|w| inner_loop(p.worker_hessian(w), inner.eta(), inner.steps(), &x))
            .collect();
        // fixed-order reduction keeps results independent of scheduling
        let mut g_bar = vec![T::zero(); n];
        for local in &locals {
            for ((g, xi), li) in g_bar.iter_mut().zip(&x).zip(local) {
                *g = g.clone() + (xi.clone() - li.clone());
            }
        }
        for g in g_bar.iter_mut() {
            *g = g.clone() / workers.clone();
        }

        for i in 0..n {
            let m_old = m[i].clone();
            let m_new = beta.clone() * m_old.clone() + (one.clone() - beta.clone()) * g_bar[i].clone();
            let direction = match kind {
                Method::HeavyBall => m_new.clone(),
                Method::Nesterov => {
                    (one.clone() + beta.clone()) * m_new.clone() - beta.clone() * m_old
                }
            };
            x[i] = x[i].clone() - nu.clone() * direction;
            m[i] = m_new;
        }

        let fire = period.is_some_and(|k| round >= k && round % k == 0);
        if fire {
            for (mi, gi) in m.iter_mut().zip(&g_bar) {
                *mi = if hard {
                    T::zero()
                } else {
                    retain.clone() * mi.clone() + inject.clone() * gi.clone() + T::zero()
                };
            }
        }

        let loss = p.h.half_quadratic_form(&x);
        let finite = x.iter().chain(&m).all(|v| v.is_finite_value()) && loss.is_finite_value();
        if !finite {
            traj.diverged_at = Some(round);
            break;
        }
        traj.push(RoundRecord {
            round,
            states: states(&x, &m),
            loss,
            restarted: vec![fire; n],
        });
    }
    Ok(traj)
}
