//! Horizon-aware period and momentum tuning by direct simulation.
//!
//! These pick the setting with the smallest final loss at a fixed horizon,
//! unlike `restart_analysis::oracle_period`, which minimizes `|chi_K|` for a
//! single cycle.

use super::{simulate_modes, Block, RestartSchedule, Spectrum, Trajectory};
use crate::error::{invalid, Result};
use crate::mode_dynamics::{Method, OuterHyperparams};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodScan<T> {
    pub period: u32,
    pub final_loss: T,
}

fn final_or_inf<T: Real>(tr: &Trajectory<T>) -> T {
    tr.final_loss().copied().unwrap_or_else(T::infinity)
}

fn scan<T: Real>(
    k_min: u32,
    k_max: u32,
    mut loss_at: impl FnMut(u32) -> Result<T>,
) -> Result<PeriodScan<T>> {
    if k_min == 0 || k_min > k_max {
        return Err(invalid("range", format!("need 1 <= k_min <= k_max, got [{k_min}, {k_max}]")));
    }
    let mut best = PeriodScan {
        period: k_min,
        final_loss: loss_at(k_min)?,
    };
    for k in k_min + 1..=k_max {
        let loss = loss_at(k)?;
        if loss < best.final_loss {
            best = PeriodScan {
                period: k,
                final_loss: loss,
            };
        }
    }
    Ok(best)
}

/// Single global period with the smallest final loss; ties go to the shorter period.
pub fn best_global_period<T: Real>(
    spec: &Spectrum<T>,
    h: &OuterHyperparams<T>,
    kind: Method,
    k_min: u32,
    k_max: u32,
    horizon: usize,
) -> Result<PeriodScan<T>> {
    scan(k_min, k_max, |k| {
        let tr = simulate_modes(spec, h, kind, &RestartSchedule::Global { period: k }, horizon)?;
        Ok(final_or_inf(&tr))
    })
}

/// Per-mode oracle: each mode independently takes the period that minimizes
/// its own final residual. Modes do not interact, so this lower-bounds every
/// global period.
pub fn per_mode_oracle_periods<T: Real>(
    spec: &Spectrum<T>,
    h: &OuterHyperparams<T>,
    kind: Method,
    k_min: u32,
    k_max: u32,
    horizon: usize,
) -> Result<Vec<u32>> {
    spec.modes()
        .iter()
        .map(|mode| {
            let single = Spectrum::direct(vec![*mode.sigma.value()], vec![mode.weight])?
                .with_initial(vec![mode.x0])?;
            Ok(best_global_period(&single, h, kind, k_min, k_max, horizon)?.period)
        })
        .collect()
}

/// Per-block periods tuned on each block's own final loss.
pub fn blockwise_tuned_periods<T: Real>(
    blocks: &[Block<T>],
    global: &OuterHyperparams<T>,
    kind: Method,
    k_min: u32,
    k_max: u32,
    horizon: usize,
) -> Result<Vec<u32>> {
    blocks
        .iter()
        .map(|b| {
            let h = b.hyper_or(global);
            Ok(best_global_period(&b.spectrum, h, kind, k_min, k_max, horizon)?.period)
        })
        .collect()
}

/// No-restart baseline with momentum tuned over `betas` at fixed `nu`.
/// Returns `(beta, final_loss)`.
pub fn best_no_restart_beta<T: Real>(
    spec: &Spectrum<T>,
    nu: T,
    kind: Method,
    betas: &[T],
    horizon: usize,
) -> Result<(T, T)> {
    let mut best: Option<(T, T)> = None;
    for &beta in betas {
        let h = OuterHyperparams::new(nu, beta)?;
        let tr = simulate_modes(spec, &h, kind, &RestartSchedule::NoRestart, horizon)?;
        let loss = final_or_inf(&tr);
        if best.is_none_or(|(_, l)| loss < l) {
            best = Some((beta, loss));
        }
    }
    best.ok_or_else(|| invalid("betas", "momentum grid is empty"))
}
