use std::time::Instant;

use crate::error::Result;
use crate::qubo::{CompiledQubo, QuboProblem};
use crate::rng::Stream;

use super::{run_reads, score_reads, SampleSet, SolverConfig, SolverKind};

/// Geometric inverse-temperature ladder with one rung per sweep.
pub(crate) fn beta_ladder(schedule: (f64, f64), sweeps: usize) -> Vec<f64> {
    let (b0, b1) = schedule;
    if sweeps == 1 {
        return vec![b1];
    }
    let ratio = (b1 / b0).ln() / (sweeps - 1) as f64;
    (0..sweeps).map(|k| b0 * (ratio * k as f64).exp()).collect()
}

/// Simulated annealing with single-bit Metropolis sweeps.
///
/// Each read starts from a uniformly random state drawn from stream `read`
/// of `cfg.seed`, then visits variables in index order once per sweep.
pub fn solve_sa(p: &QuboProblem, cfg: &SolverConfig) -> Result<SampleSet> {
    cfg.expect_kind(SolverKind::SimulatedAnnealing)?;
    let start = Instant::now();
    let compiled = CompiledQubo::new(p);
    let betas = beta_ladder(cfg.beta_schedule, cfg.sweeps);
    let n = compiled.num_vars();

    let reads = run_reads(cfg, |read| {
        let mut rng = Stream::with_stream(cfg.seed, read);
        let mut x: Vec<u8> = (0..n).map(|_| rng.bit()).collect();
        let mut fields = compiled.local_fields(&x);
        for &beta in &betas {
            for i in 0..n {
                let delta = if x[i] == 0 { fields[i] } else { -fields[i] };
                if delta <= 0.0 || rng.unit() < (-beta * delta).exp() {
                    compiled.flip(&mut x, &mut fields, i);
                }
            }
        }
        x
    });
    let scored = score_reads(p, reads)?;
    SampleSet::from_reads(
        scored,
        start.elapsed().as_secs_f64(),
        SolverKind::SimulatedAnnealing.label(),
    )
}
