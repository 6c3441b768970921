use std::time::Instant;

use crate::error::Result;
use crate::qubo::{CompiledQubo, QuboProblem};
use crate::rng::Stream;

use super::{run_reads, score_reads, SampleSet, SolverConfig, SolverKind, TIE_TOLERANCE};

/// Steepest-descent single-bit tabu search.
///
/// Every iteration flips the best non-tabu bit (lowest index on ties), even
/// when that raises the energy. A tabu bit is still eligible if flipping it
/// beats the best energy seen in this read. Each read reports its best state.
pub fn solve_tabu(p: &QuboProblem, cfg: &SolverConfig) -> Result<SampleSet> {
    cfg.expect_kind(SolverKind::Tabu)?;
    let start = Instant::now();
    let compiled = CompiledQubo::new(p);
    let n = compiled.num_vars();
    let tenure = cfg.tabu_tenure.min(n.saturating_sub(1) / 2);
    let iterations = cfg.tabu_iterations.unwrap_or(10 * n.max(10));

    let reads = run_reads(cfg, |read| {
        let mut rng = Stream::with_stream(cfg.seed, read);
        let mut x: Vec<u8> = (0..n).map(|_| rng.bit()).collect();
        let mut fields = compiled.local_fields(&x);
        let mut energy = compiled.energy(&x);
        let mut best = x.clone();
        let mut best_energy = energy;
        let mut tabu_until = vec![0usize; n];

        for it in 0..iterations {
            let mut chosen: Option<(usize, f64)> = None;
            for i in 0..n {
                let delta = if x[i] == 0 { fields[i] } else { -fields[i] };
                let allowed = tabu_until[i] <= it || energy + delta < best_energy - TIE_TOLERANCE;
                if allowed && chosen.is_none_or(|(_, d)| delta < d) {
                    chosen = Some((i, delta));
                }
            }
            let Some((i, _)) = chosen else { break };
            energy += compiled.flip(&mut x, &mut fields, i);
            tabu_until[i] = it + 1 + tenure;
            if energy < best_energy - TIE_TOLERANCE {
                best_energy = energy;
                best.copy_from_slice(&x);
            }
        }
        best
    });
    let scored = score_reads(p, reads)?;
    SampleSet::from_reads(scored, start.elapsed().as_secs_f64(), SolverKind::Tabu.label())
}
