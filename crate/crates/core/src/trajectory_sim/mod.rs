//! Multi-mode, blockwise and full-matrix trajectories under restart schedules.

mod modes;
mod quadratic;
mod tuning;

use std::io::{self, Write};

pub use modes::{simulate_blocks, simulate_modes};
pub use quadratic::{simulate_full_quadratic, DenseMatrix, QuadraticProblem};
pub use tuning::{
    best_global_period, best_no_restart_beta, blockwise_tuned_periods, per_mode_oracle_periods,
    PeriodScan,
};

use crate::error::{invalid, Error, Result};
use crate::mode_dynamics::{effective_sigma, EffectiveProgress, InnerConfig, ModeState, OuterHyperparams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumOrigin {
    /// Effective progress values supplied directly.
    Direct,
    /// Computed from kernel eigenvalues and an inner-loop configuration.
    Derived,
}

/// One residual mode: effective progress, loss weight and initial residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T> {
    pub sigma: EffectiveProgress<T>,
    pub weight: T,
    pub x0: T,
}

/// Weighted collection of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    modes: Vec<Mode<T>>,
    origin: SpectrumOrigin,
}

impl<T: Scalar> Spectrum<T> {
    fn build(sigmas: Vec<EffectiveProgress<T>>, weights: Vec<T>, origin: SpectrumOrigin) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        if weights.len() != sigmas.len() {
            return Err(Error::Dimension(format!(
                "{} sigmas but {} weights",
                sigmas.len(),
                weights.len()
            )));
        }
        let mut total = T::zero();
        for w in &weights {
            if !w.is_finite_value() || *w < T::zero() {
                return Err(invalid("weight", format!("must be finite and non-negative, got {w}")));
            }
            total = total + w.clone();
        }
        if total <= T::zero() {
            return Err(Error::EmptySpectrum);
        }
        if let Some(s) = sigmas.iter().find(|s| s.is_synthetic()) {
            return Err(invalid(
                "sigma",
                format!("synthetic value {} cannot be simulated", s.value()),
            ));
        }
        let modes = sigmas
            .into_iter()
            .zip(weights)
            .map(|(sigma, weight)| Mode {
                sigma,
                weight,
                x0: T::one(),
            })
            .collect();
        Ok(Self { modes, origin })
    }

    pub fn direct(sigmas: Vec<T>, weights: Vec<T>) -> Result<Self> {
        let sigmas = sigmas
            .into_iter()
            .map(EffectiveProgress::new)
            .collect::<Result<Vec<_>>>()?;
        Self::build(sigmas, weights, SpectrumOrigin::Direct)
    }

    /// Unit weights.
    pub fn uniform(sigmas: Vec<T>) -> Result<Self> {
        let weights = vec![T::one(); sigmas.len()];
        Self::direct(sigmas, weights)
    }

    /// Modes from kernel eigenvalues via `sigma = 1 - (1 - eta lambda)^S`.
    pub fn derived(inner: &InnerConfig<T>, lambdas: &[T], weights: Vec<T>) -> Result<Self> {
        let sigmas = lambdas
            .iter()
            .map(|l| effective_sigma(inner, l))
            .collect::<Result<Vec<_>>>()?;
        Self::build(sigmas, weights, SpectrumOrigin::Derived)
    }

    /// Replaces the default initial residuals (all ones).
    pub fn with_initial(mut self, x0: Vec<T>) -> Result<Self> {
        if x0.len() != self.modes.len() {
            return Err(Error::Dimension(format!(
                "{} modes but {} initial residuals",
                self.modes.len(),
                x0.len()
            )));
        }
        for (mode, x) in self.modes.iter_mut().zip(x0) {
            if !x.is_finite_value() {
                return Err(invalid("x0", "initial residuals must be finite"));
            }
            mode.x0 = x;
        }
        Ok(self)
    }

    pub fn modes(&self) -> &[Mode<T>] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn origin(&self) -> SpectrumOrigin {
        self.origin
    }

    pub fn total_weight(&self) -> T {
        self.modes
            .iter()
            .fold(T::zero(), |acc, m| acc + m.weight.clone())
    }

    pub fn weighted_mean_sigma(&self) -> T {
        let num = self.modes.iter().fold(T::zero(), |acc, m| {
            acc + m.weight.clone() * m.sigma.value().clone()
        });
        num / self.total_weight()
    }

    /// `1/2 sum_j w_j x0_j^2`.
    pub fn initial_loss(&self) -> T {
        let two = T::one() + T::one();
        self.modes.iter().fold(T::zero(), |acc, m| {
            acc + m.weight.clone() * m.x0.clone() * m.x0.clone()
        }) / two
    }
}

/// A parameter block with its own spectrum, optional hyperparameters and
/// optional restart period.
#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    pub label: String,
    pub spectrum: Spectrum<T>,
    pub hyper: Option<OuterHyperparams<T>>,
    pub period: Option<u32>,
}

impl<T: Scalar> Block<T> {
    pub fn new(label: impl Into<String>, spectrum: Spectrum<T>) -> Self {
        Self {
            label: label.into(),
            spectrum,
            hyper: None,
            period: None,
        }
    }

    pub fn with_hyper(mut self, hyper: OuterHyperparams<T>) -> Self {
        self.hyper = Some(hyper);
        self
    }

    pub fn with_period(mut self, period: u32) -> Self {
        self.period = Some(period);
        self
    }

    pub fn hyper_or<'a>(&'a self, global: &'a OuterHyperparams<T>) -> &'a OuterHyperparams<T> {
        self.hyper.as_ref().unwrap_or(global)
    }
}

/// When and how the outer buffer is rewritten.
///
/// Rewrites fire after the outer update of rounds `K, 2K, ...`; round 0
/// never fires.
#[derive(Debug, Clone, PartialEq)]
pub enum RestartSchedule<T> {
    NoRestart,
    /// Hard restart `m <- 0` of every mode.
    Global { period: u32 },
    /// One hard-restart period per mode.
    PerMode { periods: Vec<u32> },
    /// One hard-restart period per block.
    Blockwise { periods: Vec<u32> },
    /// `m <- retain * m + inject * g`, with `g` the pseudo-gradient of the
    /// round that just completed.
    Soft { period: u32, retain: T, inject: T },
}

impl<T: Scalar> RestartSchedule<T> {
    pub fn name(&self) -> &'static str {
        match self {
            RestartSchedule::NoRestart => "none",
            RestartSchedule::Global { .. } => "global",
            RestartSchedule::PerMode { .. } => "per_mode",
            RestartSchedule::Blockwise { .. } => "blockwise",
            RestartSchedule::Soft { .. } => "soft",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad_period = |p: u32| p == 0;
        match self {
            RestartSchedule::NoRestart => Ok(()),
            RestartSchedule::Global { period } if bad_period(*period) => {
                Err(invalid("period", "restart periods must be at least 1"))
            }
            RestartSchedule::PerMode { periods } | RestartSchedule::Blockwise { periods }
                if periods.iter().copied().any(bad_period) =>
            {
                Err(invalid("periods", "restart periods must be at least 1"))
            }
            RestartSchedule::Soft {
                period,
                retain,
                inject,
            } => {
                if bad_period(*period) {
                    return Err(invalid("period", "restart periods must be at least 1"));
                }
                if !retain.is_finite_value() || !inject.is_finite_value() {
                    return Err(invalid("soft", "retain and inject must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Collects `Block::period` into a blockwise schedule.
    pub fn blockwise_from_blocks(blocks: &[Block<T>]) -> Result<Self> {
        let periods = blocks
            .iter()
            .map(|b| {
                b.period
                    .ok_or_else(|| invalid("period", format!("block `{}` has no period", b.label)))
            })
            .collect::<Result<Vec<_>>>()?;
        let sched = RestartSchedule::Blockwise { periods };
        sched.validate()?;
        Ok(sched)
    }
}

/// Per-round snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord<T> {
    pub round: usize,
    pub states: Vec<ModeState<T>>,
    pub loss: T,
    /// Which modes (or coordinates) had their buffer rewritten this round.
    pub restarted: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub records: Vec<RoundRecord<T>>,
    /// First round that produced a non-finite value; the run stops there.
    pub diverged_at: Option<usize>,
    pub restarted_at: Vec<usize>,
}

impl<T: Scalar> Trajectory<T> {
    pub(crate) fn start(states: Vec<ModeState<T>>, loss: T) -> Self {
        let n = states.len();
        Self {
            records: vec![RoundRecord {
                round: 0,
                states,
                loss,
                restarted: vec![false; n],
            }],
            diverged_at: None,
            restarted_at: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, record: RoundRecord<T>) {
        if record.restarted.iter().any(|&r| r) {
            self.restarted_at.push(record.round);
        }
        self.records.push(record);
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Last recorded state, which precedes the divergence if there was one.
    pub fn last(&self) -> &RoundRecord<T> {
        self.records.last().expect("trajectory always holds round 0")
    }

    /// Final loss, or `None` if the run diverged.
    pub fn final_loss(&self) -> Option<&T> {
        if self.diverged() {
            None
        } else {
            Some(&self.last().loss)
        }
    }

    /// Writes `round,mode_or_dim,x,m,loss,restarted`, one row per round and
    /// mode, numbers with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "round,mode_or_dim,x,m,loss,restarted")?;
        for rec in &self.records {
            let loss = format_full(rec.loss.to_f64_lossy());
            for (j, (z, r)) in rec.states.iter().zip(&rec.restarted).enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    rec.round,
                    j,
                    format_full(z.x.to_f64_lossy()),
                    format_full(z.m.to_f64_lossy()),
                    loss,
                    u8::from(*r)
                )?;
            }
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits; round-trips any `f64`.
pub fn format_full(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Human-readable rounding to `digits` significant figures. Digits left of
/// the decimal point are never rounded away, so 397.97 prints as `398`.
pub fn format_sig(v: f64, digits: u32) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let exponent = v.abs().log10().floor() as i64;
    let decimals = i64::from(digits.max(1)) - 1 - exponent;
    if decimals <= 0 {
        format!("{v:.0}")
    } else {
        format!("{v:.*}", decimals as usize)
    }
}
