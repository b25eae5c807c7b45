//! Grids over `(kind, schedule, beta, nu)` producing clipped `log10` final losses.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::mode_dynamics::{Method, OuterHyperparams};
use crate::scalar::{lit, Real};
use crate::trajectory_sim::{format_full, simulate_blocks, simulate_modes, Block, RestartSchedule, Spectrum, Trajectory};

/// Momentum-buffer policy of one sweep column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScheduleTag {
    NoRestart,
    Global(u32),
    /// Best of the global periods in `k_grid`, per `(kind, beta, nu)`.
    BestRestart,
}

impl ScheduleTag {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleTag::NoRestart => "none",
            ScheduleTag::Global(_) => "global",
            ScheduleTag::BestRestart => "best",
        }
    }

    /// Period for CSV output, 0 when not applicable.
    pub fn period(&self) -> u32 {
        match self {
            ScheduleTag::Global(k) => *k,
            _ => 0,
        }
    }
}

impl fmt::Display for ScheduleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleTag::Global(k) => write!(f, "global(K={k})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Schedule families to include in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepSchedule {
    NoRestart,
    /// One column per entry of `k_grid`.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepModel<T> {
    Spectrum(Spectrum<T>),
    /// Blocks without their own hyperparameters follow the swept values.
    Blocks(Vec<Block<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig<T> {
    pub beta_grid: Vec<T>,
    pub nu_grid: Vec<T>,
    pub k_grid: Vec<u32>,
    pub kinds: Vec<Method>,
    pub schedules: Vec<SweepSchedule>,
    pub model: SweepModel<T>,
    pub horizon: usize,
    /// `(lo, hi)` in `log10` units.
    pub loss_clip: (T, T),
}

/// The six-mode toy spectrum with equal weights.
pub fn toy_six_mode_spectrum<T: Real>() -> Spectrum<T> {
    Spectrum::uniform([0.95, 0.85, 0.75, 0.60, 0.45, 0.30].map(lit).to_vec())
        .expect("static spectrum is valid")
}

impl<T: Real> SweepConfig<T> {
    /// Default robustness grid: the six-mode spectrum, `T = 120`,
    /// `beta in {0.1..0.8, 0.85, 0.9, 0.95, 0.99}`, `nu in {0.1..1.5}`,
    /// `K in 1..=64`, both optimizers, clip `[-12, 2]`.
    pub fn robustness_default() -> Self {
        let mut betas: Vec<f64> = (1..=8).map(|i| f64::from(i) / 10.0).collect();
        betas.extend([0.85, 0.9, 0.95, 0.99]);
        Self {
            beta_grid: betas.into_iter().map(lit).collect(),
            nu_grid: (1..=15).map(|i| lit(f64::from(i) / 10.0)).collect(),
            k_grid: (1..=64).collect(),
            kinds: Method::ALL.to_vec(),
            schedules: vec![SweepSchedule::NoRestart, SweepSchedule::Global],
            model: SweepModel::Spectrum(toy_six_mode_spectrum()),
            horizon: 120,
            loss_clip: (lit(-12.0), lit(2.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta_grid.is_empty() || self.nu_grid.is_empty() || self.kinds.is_empty() {
            return Err(invalid("grid", "beta, nu and kind grids must be non-empty"));
        }
        if self.schedules.is_empty() {
            return Err(invalid("schedules", "at least one schedule family is required"));
        }
        if self.schedules.contains(&SweepSchedule::Global) && self.k_grid.is_empty() {
            return Err(invalid("k_grid", "global restarts need at least one period"));
        }
        if self.k_grid.contains(&0) {
            return Err(invalid("k_grid", "restart periods must be at least 1"));
        }
        let (lo, hi) = self.loss_clip;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid("loss_clip", "need finite lo < hi"));
        }
        for &b in &self.beta_grid {
            for &n in &self.nu_grid {
                OuterHyperparams::new(n, b)?;
            }
        }
        match &self.model {
            SweepModel::Blocks(blocks) if blocks.is_empty() => Err(Error::EmptySpectrum),
            _ => Ok(()),
        }
    }

    /// Sorted, de-duplicated copy of the grids.
    fn normalized(&self) -> Self {
        let mut cfg = self.clone();
        let sort = |v: &mut Vec<T>| {
            v.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
            v.dedup();
        };
        sort(&mut cfg.beta_grid);
        sort(&mut cfg.nu_grid);
        cfg.k_grid.sort_unstable();
        cfg.k_grid.dedup();
        cfg.kinds.sort();
        cfg.kinds.dedup();
        cfg.schedules.dedup();
        cfg
    }

    fn tags(&self) -> Vec<ScheduleTag> {
        let mut tags = Vec::new();
        if self.schedules.contains(&SweepSchedule::NoRestart) {
            tags.push(ScheduleTag::NoRestart);
        }
        if self.schedules.contains(&SweepSchedule::Global) {
            tags.extend(self.k_grid.iter().map(|&k| ScheduleTag::Global(k)));
        }
        tags
    }

    pub fn clip(&self, v: T) -> T {
        let (lo, hi) = self.loss_clip;
        if v.is_nan() {
            hi
        } else {
            v.max(lo).min(hi)
        }
    }

    /// Clipped `log10` of a trajectory's final loss; divergence maps to `hi`.
    pub fn cell_value(&self, tr: &Trajectory<T>) -> T {
        match tr.final_loss() {
            Some(&loss) => self.clip(loss.log10()),
            None => self.loss_clip.1,
        }
    }

    pub fn simulate_cell(&self, key: &CellKey) -> Result<Trajectory<T>> {
        let h = OuterHyperparams::new(self.nu_grid[key.nu_idx], self.beta_grid[key.beta_idx])?;
        let sched = match key.schedule {
            ScheduleTag::NoRestart => RestartSchedule::NoRestart,
            ScheduleTag::Global(period) => RestartSchedule::Global { period },
            ScheduleTag::BestRestart => {
                return Err(invalid("schedule", "best-restart is a reduction, not a cell"))
            }
        };
        match &self.model {
            SweepModel::Spectrum(spec) => simulate_modes(spec, &h, key.kind, &sched, self.horizon),
            SweepModel::Blocks(blocks) => simulate_blocks(blocks, &h, key.kind, &sched, self.horizon),
        }
    }
}

/// Cell coordinates; indices refer to the sorted grids of the result's config.
/// The derived ordering is the CSV row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub kind: Method,
    pub schedule: ScheduleTag,
    pub beta_idx: usize,
    pub nu_idx: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T> {
    /// Normalized copy of the configuration the cells were computed from.
    pub config: SweepConfig<T>,
    pub cells: BTreeMap<CellKey, T>,
}

/// Evaluates every cell of the grid. Cells run in parallel and are
/// assembled by key, so the result does not depend on evaluation order.
pub fn run_sweep<T: Real>(cfg: &SweepConfig<T>) -> Result<SweepResult<T>> {
    cfg.validate()?;
    let cfg = cfg.normalized();
    let keys = cell_keys(&cfg);
    let values: Vec<(CellKey, T)> = keys
        .par_iter()
        .map(|key| Ok((*key, cfg.cell_value(&cfg.simulate_cell(key)?))))
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        cells: values.into_iter().collect(),
        config: cfg,
    })
}

fn cell_keys<T: Real>(cfg: &SweepConfig<T>) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for &kind in &cfg.kinds {
        for schedule in cfg.tags() {
            for beta_idx in 0..cfg.beta_grid.len() {
                for nu_idx in 0..cfg.nu_grid.len() {
                    keys.push(CellKey {
                        kind,
                        schedule,
                        beta_idx,
                        nu_idx,
                    });
                }
            }
        }
    }
    keys
}

impl<T: Real> SweepResult<T> {
    pub fn get(&self, kind: Method, schedule: ScheduleTag, beta_idx: usize, nu_idx: usize) -> Option<T> {
        if schedule == ScheduleTag::BestRestart {
            return self.best_restart(kind, beta_idx, nu_idx).map(|(_, v)| v);
        }
        self.cells
            .get(&CellKey {
                kind,
                schedule,
                beta_idx,
                nu_idx,
            })
            .copied()
    }

    /// Smallest value over the global periods at one `(kind, beta, nu)`,
    /// with ties going to the shorter period.
    pub fn best_restart(&self, kind: Method, beta_idx: usize, nu_idx: usize) -> Option<(u32, T)> {
        let mut best: Option<(u32, T)> = None;
        for &k in &self.config.k_grid {
            let key = CellKey {
                kind,
                schedule: ScheduleTag::Global(k),
                beta_idx,
                nu_idx,
            };
            if let Some(&v) = self.cells.get(&key) {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((k, v));
                }
            }
        }
        best
    }

    /// Every schedule column present, plus the best-restart reduction when
    /// global periods were swept.
    pub fn schedule_tags(&self) -> Vec<ScheduleTag> {
        let mut tags = self.config.tags();
        if self.config.schedules.contains(&SweepSchedule::Global) {
            tags.push(ScheduleTag::BestRestart);
        }
        tags
    }

    /// One row per cell in key order:
    /// `kind,schedule,K,beta_out,nu,clipped_log10_loss`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "kind,schedule,K,beta_out,nu,clipped_log10_loss")?;
        for (key, v) in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                key.kind,
                key.schedule.name(),
                key.schedule.period(),
                format_full(self.config.beta_grid[key.beta_idx].to_f64_lossy()),
                format_full(self.config.nu_grid[key.nu_idx].to_f64_lossy()),
                format_full(v.to_f64_lossy())
            )?;
        }
        Ok(())
    }
}

/// Fraction of `(beta, nu)` cells at or below `threshold`, per kind and schedule.
pub fn robustness_metric<T: Real>(
    res: &SweepResult<T>,
    threshold: T,
) -> Result<BTreeMap<(Method, ScheduleTag), f64>> {
    let (lo, hi) = res.config.loss_clip;
    if !(threshold >= lo && threshold <= hi) {
        return Err(invalid("threshold", "must lie within the clip range"));
    }
    let nb = res.config.beta_grid.len();
    let nn = res.config.nu_grid.len();
    let mut out = BTreeMap::new();
    for &kind in &res.config.kinds {
        for tag in res.schedule_tags() {
            let mut good = 0usize;
            let mut total = 0usize;
            for bi in 0..nb {
                for ni in 0..nn {
                    if let Some(v) = res.get(kind, tag, bi, ni) {
                        total += 1;
                        if v <= threshold {
                            good += 1;
                        }
                    }
                }
            }
            if total > 0 {
                out.insert((kind, tag), good as f64 / total as f64);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(spec: Spectrum<f64>) -> SweepConfig<f64> {
        SweepConfig {
            beta_grid: vec![0.9, 0.5],
            nu_grid: vec![1.0],
            k_grid: vec![8, 3],
            kinds: vec![Method::HeavyBall],
            schedules: vec![SweepSchedule::NoRestart, SweepSchedule::Global],
            model: SweepModel::Spectrum(spec),
            horizon: 40,
            loss_clip: (-12.0, 2.0),
        }
    }

    #[test]
    fn single_cell_reduces_to_simulation() {
        let spec = Spectrum::uniform(vec![0.95]).unwrap();
        let mut cfg = small(spec.clone());
        cfg.beta_grid = vec![0.9];
        cfg.schedules = vec![SweepSchedule::NoRestart];
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.cells.len(), 1);
        let h = OuterHyperparams::new(1.0, 0.9).unwrap();
        let tr = simulate_modes(&spec, &h, Method::HeavyBall, &RestartSchedule::NoRestart, 40).unwrap();
        let direct = tr.final_loss().unwrap().log10();
        assert_eq!(res.get(Method::HeavyBall, ScheduleTag::NoRestart, 0, 0), Some(direct));
    }

    #[test]
    fn grids_are_sorted_and_rows_ordered() {
        let res = run_sweep(&small(Spectrum::uniform(vec![0.95]).unwrap())).unwrap();
        assert_eq!(res.config.beta_grid, vec![0.5, 0.9]);
        assert_eq!(res.config.k_grid, vec![3, 8]);
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 2 * 3);
        assert!(rows[0].starts_with("hb,none,0,5.0000000000000000e-1,"));
        assert!(rows[2].starts_with("hb,global,3,"));
        assert!(rows[5].starts_with("hb,global,8,9.0000000000000002e-1,"));
    }

    #[test]
    fn divergence_maps_to_clip_hi() {
        let mut cfg = small(Spectrum::uniform(vec![1.0]).unwrap());
        cfg.beta_grid = vec![0.0];
        cfg.nu_grid = vec![3.0];
        cfg.horizon = 3000;
        cfg.schedules = vec![SweepSchedule::NoRestart];
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.cells.values().copied().collect::<Vec<_>>(), vec![2.0]);
    }

    #[test]
    fn clipping_is_idempotent() {
        let cfg = small(Spectrum::uniform(vec![0.5]).unwrap());
        for v in [-100.0, -12.0, -3.3, 2.0, 7.0, f64::NEG_INFINITY, f64::NAN] {
            let once = cfg.clip(v);
            assert_eq!(cfg.clip(once), once);
            assert!((-12.0..=2.0).contains(&once));
        }
    }

    #[test]
    fn robustness_edges() {
        let res = run_sweep(&small(Spectrum::uniform(vec![0.95]).unwrap())).unwrap();
        let all = robustness_metric(&res, 2.0).unwrap();
        assert!(all.values().all(|&f| f == 1.0));
        assert!(robustness_metric(&res, 5.0).is_err());
        let at_lo = robustness_metric(&res, -12.0).unwrap();
        for ((kind, tag), frac) in at_lo {
            let mut lo_cells = 0;
            for bi in 0..2 {
                if res.get(kind, tag, bi, 0) == Some(-12.0) {
                    lo_cells += 1;
                }
            }
            assert_eq!(frac, lo_cells as f64 / 2.0);
        }
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small(Spectrum::uniform(vec![0.5]).unwrap());
        cfg.loss_clip = (2.0, -12.0);
        assert!(run_sweep(&cfg).is_err());
        let mut cfg = small(Spectrum::uniform(vec![0.5]).unwrap());
        cfg.beta_grid = vec![1.0];
        assert!(run_sweep(&cfg).is_err());
        let mut cfg = small(Spectrum::uniform(vec![0.5]).unwrap());
        cfg.k_grid = vec![0];
        assert!(run_sweep(&cfg).is_err());
    }
}
