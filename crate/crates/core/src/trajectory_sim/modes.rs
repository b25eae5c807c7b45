use super::{Block, RestartSchedule, RoundRecord, Spectrum, Trajectory};
use crate::error::{Error, Result};
use crate::mode_dynamics::{step, transition, Method, ModeState, OuterHyperparams, Transition2x2};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
enum Rewrite<T> {
    Never,
    Hard(u32),
    Soft { period: u32, retain: T, inject: T },
}

impl<T: Scalar> Rewrite<T> {
    fn fires(&self, round: usize) -> bool {
        let period = match self {
            Rewrite::Never => return false,
            Rewrite::Hard(p) | Rewrite::Soft { period: p, .. } => *p as usize,
        };
        round >= period && round.is_multiple_of(period)
    }

    /// New buffer value given the updated buffer and this round's pseudo-gradient.
    fn apply(&self, m: T, g: T) -> T {
        match self {
            Rewrite::Never => m,
            Rewrite::Hard(_) => T::zero(),
            // the trailing `+ 0` folds a signed zero into +0 so that a zero
            // rewrite matches the hard restart bit for bit
            Rewrite::Soft { retain, inject, .. } => {
                retain.clone() * m + inject.clone() * g + T::zero()
            }
        }
    }
}

struct ModeRun<T> {
    transition: Transition2x2<T>,
    sigma: T,
    weight: T,
    rewrite: Rewrite<T>,
}

fn half_weighted_sq<T: Scalar>(runs: &[ModeRun<T>], states: &[ModeState<T>]) -> T {
    let two = T::one() + T::one();
    runs.iter().zip(states).fold(T::zero(), |acc, (r, z)| {
        acc + r.weight.clone() * z.x.clone() * z.x.clone()
    }) / two
}

fn run<T: Scalar>(runs: Vec<ModeRun<T>>, initial: Vec<ModeState<T>>, horizon: usize) -> Trajectory<T> {
    let loss0 = half_weighted_sq(&runs, &initial);
    let mut traj = Trajectory::start(initial, loss0);
    for round in 1..=horizon {
        let prev = &traj.last().states;
        let mut states = Vec::with_capacity(runs.len());
        let mut restarted = Vec::with_capacity(runs.len());
        let mut finite = true;
        for (r, z) in runs.iter().zip(prev) {
            let Ok(mut next) = step(z, &r.transition) else {
                finite = false;
                break;
            };
            let fire = r.rewrite.fires(round);
            if fire {
                let g = r.sigma.clone() * z.x.clone();
                next.m = r.rewrite.apply(next.m, g);
                if !next.is_finite() {
                    finite = false;
                    break;
                }
            }
            states.push(next);
            restarted.push(fire);
        }
        let loss = if finite {
            half_weighted_sq(&runs, &states)
        } else {
            T::zero()
        };
        if !finite || !loss.is_finite_value() {
            traj.diverged_at = Some(round);
            break;
        }
        traj.push(RoundRecord {
            round,
            states,
            loss,
            restarted,
        });
    }
    traj
}

fn uniform_rewrite<T: Scalar>(sched: &RestartSchedule<T>) -> Option<Rewrite<T>> {
    match sched {
        RestartSchedule::NoRestart => Some(Rewrite::Never),
        RestartSchedule::Global { period } => Some(Rewrite::Hard(*period)),
        RestartSchedule::Soft {
            period,
            retain,
            inject,
        } => Some(Rewrite::Soft {
            period: *period,
            retain: retain.clone(),
            inject: inject.clone(),
        }),
        RestartSchedule::PerMode { .. } | RestartSchedule::Blockwise { .. } => None,
    }
}

fn check_periods(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension(format!(
            "{what} schedule lists {got} periods for {expected} entries"
        )));
    }
    Ok(())
}

/// Simulates every mode of `spec` under one optimizer and schedule.
///
/// Each mode starts at `(x0_j, 0)`; the loss is `1/2 sum_j w_j x_j^2`.
pub fn simulate_modes<T: Scalar>(
    spec: &Spectrum<T>,
    h: &OuterHyperparams<T>,
    kind: Method,
    sched: &RestartSchedule<T>,
    horizon: usize,
) -> Result<Trajectory<T>> {
    sched.validate()?;
    let rewrites: Vec<Rewrite<T>> = match sched {
        RestartSchedule::PerMode { periods } => {
            check_periods("per-mode", spec.len(), periods.len())?;
            periods.iter().map(|&p| Rewrite::Hard(p)).collect()
        }
        RestartSchedule::Blockwise { .. } => {
            return Err(Error::UnsupportedSchedule {
                schedule: "blockwise",
                reason: "a flat spectrum has no blocks; use simulate_blocks".into(),
            })
        }
        other => vec![uniform_rewrite(other).expect("uniform schedule"); spec.len()],
    };
    let runs = spec
        .modes()
        .iter()
        .zip(rewrites)
        .map(|(mode, rewrite)| ModeRun {
            transition: transition(kind, &mode.sigma, h),
            sigma: mode.sigma.value().clone(),
            weight: mode.weight.clone(),
            rewrite,
        })
        .collect();
    let initial = spec
        .modes()
        .iter()
        .map(|m| ModeState::at_rest(m.x0.clone()))
        .collect();
    Ok(run(runs, initial, horizon))
}

/// Simulates independent blocks, each with its own hyperparameters (falling
/// back to `global`) and, under a blockwise schedule, its own period.
///
/// Modes are reported flattened in block order.
pub fn simulate_blocks<T: Scalar>(
    blocks: &[Block<T>],
    global: &OuterHyperparams<T>,
    kind: Method,
    sched: &RestartSchedule<T>,
    horizon: usize,
) -> Result<Trajectory<T>> {
    if blocks.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    sched.validate()?;
    let total_modes: usize = blocks.iter().map(|b| b.spectrum.len()).sum();
    let mut rewrites: Vec<Rewrite<T>> = Vec::with_capacity(total_modes);
    match sched {
        RestartSchedule::Blockwise { periods } => {
            check_periods("blockwise", blocks.len(), periods.len())?;
            for (b, &p) in blocks.iter().zip(periods) {
                rewrites.extend(std::iter::repeat_n(Rewrite::Hard(p), b.spectrum.len()));
            }
        }
        RestartSchedule::PerMode { periods } => {
            check_periods("per-mode", total_modes, periods.len())?;
            rewrites.extend(periods.iter().map(|&p| Rewrite::Hard(p)));
        }
        other => {
            let r = uniform_rewrite(other).expect("uniform schedule");
            rewrites.extend(std::iter::repeat_n(r, total_modes));
        }
    }
    let mut runs = Vec::with_capacity(total_modes);
    let mut initial = Vec::with_capacity(total_modes);
    let mut rewrites = rewrites.into_iter();
    for block in blocks {
        let h = block.hyper_or(global);
        for mode in block.spectrum.modes() {
            runs.push(ModeRun {
                transition: transition(kind, &mode.sigma, h),
                sigma: mode.sigma.value().clone(),
                weight: mode.weight.clone(),
                rewrite: rewrites.next().expect("one rewrite per mode"),
            });
            initial.push(ModeState::at_rest(mode.x0.clone()));
        }
    }
    Ok(run(runs, initial, horizon))
}
