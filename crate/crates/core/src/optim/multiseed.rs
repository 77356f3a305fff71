use super::{evaluate, train, TrainConfig, TrainHistory};
use crate::error::{Error, Result};
use crate::eval::MetricReport;
use crate::model::{Example, ModelCheckpoint, Network};
use crate::Task;

/// Inputs shared by every run of a multi-seed experiment.
#[derive(Clone, Copy, Debug)]
pub struct Experiment<'a> {
    pub task: Task,
    pub train: &'a [Example],
    pub val: &'a [Example],
    pub test: &'a [Example],
    pub config: &'a TrainConfig,
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub best: ModelCheckpoint,
    pub history: TrainHistory,
    /// Test metrics of the selected checkpoint.
    pub report: MetricReport,
}

/// One independent run: build with `seed`, train with `seed`, score the
/// selected checkpoint on the test set.
pub fn run_seed<N, F>(build: &F, seed: u64, exp: &Experiment<'_>) -> Result<SeedRun>
where
    N: Network,
    F: Fn(u64) -> Result<N>,
{
    let inner = || -> Result<SeedRun> {
        let mut model = build(seed)?;
        let cfg = TrainConfig {
            seed,
            ..exp.config.clone()
        };
        let outcome = train(&mut model, exp.task, exp.train, exp.val, &cfg)?;
        model.params_mut().load_from(&outcome.best.params)?;
        let report = evaluate(&model, exp.test, cfg.threshold_for_val_f1)?.with_run(exp.task, seed);
        Ok(SeedRun {
            seed,
            best: outcome.best,
            history: outcome.history,
            report,
        })
    };
    inner().map_err(|e| Error::SeedRun {
        seed,
        source: Box::new(e),
    })
}

/// Runs every seed, on up to `workers` threads. Results come back in seed
/// order; each run owns its model and random streams, so the thread count
/// does not change any result.
pub fn run_multiseed<N, F>(build: F, seeds: &[u64], exp: &Experiment<'_>, workers: usize) -> Result<Vec<SeedRun>>
where
    N: Network,
    F: Fn(u64) -> Result<N> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let workers = workers.clamp(1, seeds.len());
    if workers == 1 {
        return seeds.iter().map(|&s| run_seed(&build, s, exp)).collect();
    }
    let chunk = seeds.len().div_ceil(workers);
    let results: Vec<Result<SeedRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                let build = &build;
                scope.spawn(move || part.iter().map(|&s| run_seed(build, s, exp)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("training thread panicked")).collect()
    });
    results.into_iter().collect()
}
