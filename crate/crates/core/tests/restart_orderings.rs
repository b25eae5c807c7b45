use restartlab::mode_dynamics::{Method, OuterHyperparams};
use restartlab::sweep_harness::{
    robustness_metric, run_sweep, CellKey, ScheduleTag, SweepConfig, SweepModel, SweepSchedule,
};
use restartlab::trajectory_sim::{
    best_global_period, blockwise_tuned_periods, per_mode_oracle_periods, simulate_blocks,
    simulate_modes, Block, RestartSchedule, Spectrum,
};

fn baseline() -> OuterHyperparams<f64> {
    OuterHyperparams::new(1.0, 0.9).unwrap()
}

fn final_loss(spec: &Spectrum<f64>, kind: Method, sched: RestartSchedule<f64>, horizon: usize) -> f64 {
    *simulate_modes(spec, &baseline(), kind, &sched, horizon)
        .unwrap()
        .final_loss()
        .unwrap()
}

fn evenly_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn three_blocks() -> Vec<Block<f64>> {
    [("fast", 0.92, 1.00), ("middle", 0.55, 0.65), ("slow", 0.18, 0.26)]
        .into_iter()
        .map(|(label, lo, hi)| Block::new(label, Spectrum::uniform(evenly_spaced(lo, hi, 6)).unwrap()))
        .collect()
}

#[test]
fn single_mode_restart_beats_momentum_alone() {
    let spec = Spectrum::uniform(vec![0.95]).unwrap();
    let none = final_loss(&spec, Method::HeavyBall, RestartSchedule::NoRestart, 80);
    let best = best_global_period(&spec, &baseline(), Method::HeavyBall, 1, 64, 80).unwrap();
    assert!(best.final_loss <= none);
    assert_eq!(
        best.final_loss,
        final_loss(&spec, Method::HeavyBall, RestartSchedule::Global { period: best.period }, 80)
    );
}

#[test]
fn six_mode_orderings() {
    let spec = Spectrum::uniform(vec![0.95, 0.85, 0.75, 0.60, 0.45, 0.30]).unwrap();
    for kind in Method::ALL {
        let none = final_loss(&spec, kind, RestartSchedule::NoRestart, 120);
        let global = best_global_period(&spec, &baseline(), kind, 1, 64, 120).unwrap();
        let periods = per_mode_oracle_periods(&spec, &baseline(), kind, 1, 64, 120).unwrap();
        let per_mode = final_loss(&spec, kind, RestartSchedule::PerMode { periods }, 120);
        assert!(per_mode <= global.final_loss, "{kind}");
        assert!(global.final_loss <= none, "{kind}");
    }
}

#[test]
fn blockwise_orderings_and_period_trend() {
    let blocks = three_blocks();
    let all: Vec<f64> = blocks
        .iter()
        .flat_map(|b| b.spectrum.modes().iter().map(|m| *m.sigma.value()))
        .collect();
    let flat = Spectrum::uniform(all).unwrap();
    let run = |sched: RestartSchedule<f64>| {
        *simulate_blocks(&blocks, &baseline(), Method::HeavyBall, &sched, 120)
            .unwrap()
            .final_loss()
            .unwrap()
    };
    let periods = blockwise_tuned_periods(&blocks, &baseline(), Method::HeavyBall, 1, 64, 120).unwrap();
    let blockwise = run(RestartSchedule::Blockwise { periods: periods.clone() });
    let global = best_global_period(&flat, &baseline(), Method::HeavyBall, 1, 64, 120).unwrap();
    let none = run(RestartSchedule::NoRestart);
    assert_eq!(global.final_loss, run(RestartSchedule::Global { period: global.period }));
    assert!(blockwise <= global.final_loss);
    assert!(global.final_loss <= none);
    // faster blocks prefer shorter periods
    assert!(periods[0] <= periods[1] && periods[1] <= periods[2], "{periods:?}");
}

fn single_mode_sweep() -> SweepConfig<f64> {
    let mut cfg = SweepConfig::robustness_default();
    cfg.model = SweepModel::Spectrum(Spectrum::uniform(vec![0.95]).unwrap());
    cfg.horizon = 80;
    cfg.kinds = vec![Method::HeavyBall];
    cfg
}

#[test]
fn restart_widens_the_good_region_for_a_single_mode() {
    let res = run_sweep(&single_mode_sweep()).unwrap();
    let metric = robustness_metric(&res, -5.0).unwrap();
    let none = metric[&(Method::HeavyBall, ScheduleTag::NoRestart)];
    let best = metric[&(Method::HeavyBall, ScheduleTag::BestRestart)];
    assert!(best >= none, "{best} < {none}");
}

#[test]
fn sweep_cells_are_independent_of_grid_order() {
    let mut cfg = single_mode_sweep();
    cfg.k_grid = vec![4, 9, 17, 30];
    cfg.nu_grid = vec![0.3, 0.9, 1.5];
    let forward = run_sweep(&cfg).unwrap();
    cfg.beta_grid.reverse();
    cfg.nu_grid.reverse();
    cfg.k_grid.reverse();
    let reversed = run_sweep(&cfg).unwrap();
    assert_eq!(forward.cells, reversed.cells);
}

#[test]
fn best_restart_is_a_simulated_grid_member() {
    let mut cfg = single_mode_sweep();
    cfg.k_grid = vec![2, 6, 11, 23];
    cfg.schedules = vec![SweepSchedule::Global];
    let res = run_sweep(&cfg).unwrap();
    for bi in 0..res.config.beta_grid.len() {
        for ni in 0..res.config.nu_grid.len() {
            let (k, v) = res.best_restart(Method::HeavyBall, bi, ni).unwrap();
            assert!(res.config.k_grid.contains(&k));
            let key = CellKey {
                kind: Method::HeavyBall,
                schedule: ScheduleTag::Global(k),
                beta_idx: bi,
                nu_idx: ni,
            };
            let again = res.config.cell_value(&res.config.simulate_cell(&key).unwrap());
            assert_eq!(v, again);
        }
    }
}
