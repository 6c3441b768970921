//! QUBO minimizers sharing one configuration type and one result type.

mod anneal;
mod exhaustive;
mod tabu;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{Assignment, QuboProblem};

pub use anneal::solve_sa;
pub use exhaustive::{solve_exhaustive, EXHAUSTIVE_CAP};
pub use tabu::solve_tabu;

/// Energies closer than this are ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exhaustive,
    SimulatedAnnealing,
    Tabu,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Exhaustive => "exhaustive",
            SolverKind::SimulatedAnnealing => "simulated_annealing",
            SolverKind::Tabu => "tabu",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" | "exact" => Ok(SolverKind::Exhaustive),
            "sa" | "simulated_annealing" | "anneal" => Ok(SolverKind::SimulatedAnnealing),
            "tabu" => Ok(SolverKind::Tabu),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub num_reads: usize,
    /// Metropolis sweeps per read (annealing only).
    pub sweeps: usize,
    /// Inverse temperature at the first and last sweep, interpolated geometrically.
    pub beta_schedule: (f64, f64),
    /// Iterations a flipped bit stays tabu; clamped to `(n - 1) / 2` on small problems.
    pub tabu_tenure: usize,
    /// Tabu iterations per read; `None` means `10 * max(n, 10)`.
    pub tabu_iterations: Option<usize>,
    pub seed: u64,
    /// Reads not started before the limit elapses are skipped (at least one always runs).
    #[serde(with = "opt_secs")]
    pub time_limit: Option<Duration>,
}

impl SolverConfig {
    pub fn exhaustive() -> Self {
        Self {
            kind: SolverKind::Exhaustive,
            num_reads: 1,
            ..Self::simulated_annealing(0)
        }
    }

    pub fn simulated_annealing(seed: u64) -> Self {
        Self {
            kind: SolverKind::SimulatedAnnealing,
            num_reads: 100,
            sweeps: 1000,
            beta_schedule: (0.1, 10.0),
            tabu_tenure: 10,
            tabu_iterations: None,
            seed,
            time_limit: None,
        }
    }

    pub fn tabu(seed: u64) -> Self {
        Self {
            kind: SolverKind::Tabu,
            num_reads: 10,
            ..Self::simulated_annealing(seed)
        }
    }

    /// Defaults for `kind` with the given seed.
    pub fn for_kind(kind: SolverKind, seed: u64) -> Self {
        match kind {
            SolverKind::Exhaustive => Self {
                seed,
                ..Self::exhaustive()
            },
            SolverKind::SimulatedAnnealing => Self::simulated_annealing(seed),
            SolverKind::Tabu => Self::tabu(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 {
            return Err(Error::Config("num_reads must be at least 1".into()));
        }
        match self.kind {
            SolverKind::SimulatedAnnealing => {
                let (b0, b1) = self.beta_schedule;
                if !(b0 > 0.0 && b0.is_finite() && b1.is_finite()) || b0 >= b1 {
                    return Err(Error::Config(format!(
                        "beta schedule ({b0}, {b1}) must be positive and increasing"
                    )));
                }
                if self.sweeps == 0 {
                    return Err(Error::Config("sweeps must be at least 1".into()));
                }
            }
            SolverKind::Tabu => {
                if self.tabu_tenure == 0 {
                    return Err(Error::Config("tabu tenure must be at least 1".into()));
                }
                if self.tabu_iterations == Some(0) {
                    return Err(Error::Config("tabu iterations must be at least 1".into()));
                }
            }
            SolverKind::Exhaustive => {}
        }
        Ok(())
    }

    pub(crate) fn expect_kind(&self, kind: SolverKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Config(format!(
                "configuration is for {}, not {}",
                self.kind.label(),
                kind.label()
            )));
        }
        self.validate()
    }
}

mod opt_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(d) => s.serialize_some(&d.as_secs_f64()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        let secs = Option::<f64>::deserialize(d)?;
        secs.map(|s| Duration::try_from_secs_f64(s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub assignment: Assignment,
    pub energy: f64,
    pub count: usize,
}

/// Distinct solver outputs sorted by energy, with the best one marked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub best_index: usize,
    /// Seconds.
    pub wall_time: f64,
    pub solver_label: String,
    /// Number of optimal assignments (exhaustive search only; may exceed `samples.len()`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_optima: Option<u64>,
}

impl SampleSet {
    /// Aggregate raw reads (already scored against the problem) into a sample set.
    /// Among energies tied with the minimum, the lexicographically lowest bitstring is best.
    pub fn from_reads(reads: Vec<(Assignment, f64)>, wall_time: f64, solver_label: &str) -> Result<Self> {
        if reads.is_empty() {
            return Err(Error::Config("solver produced no samples".into()));
        }
        let mut tally: BTreeMap<Assignment, (f64, usize)> = BTreeMap::new();
        for (a, e) in reads {
            tally.entry(a).or_insert((e, 0)).1 += 1;
        }
        let mut samples: Vec<Sample> = tally
            .into_iter()
            .map(|(assignment, (energy, count))| Sample {
                assignment,
                energy,
                count,
            })
            .collect();
        samples.sort_by(|a, b| {
            a.energy
                .total_cmp(&b.energy)
                .then_with(|| a.assignment.cmp(&b.assignment))
        });
        let min = samples[0].energy;
        let best_index = samples
            .iter()
            .enumerate()
            .take_while(|(_, s)| s.energy <= min + TIE_TOLERANCE)
            .min_by(|a, b| a.1.assignment.cmp(&b.1.assignment))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Ok(Self {
            samples,
            best_index,
            wall_time,
            solver_label: solver_label.to_string(),
            total_optima: None,
        })
    }

    pub fn best(&self) -> &Sample {
        &self.samples[self.best_index]
    }

    pub fn best_energy(&self) -> f64 {
        self.best().energy
    }

    pub fn total_reads(&self) -> usize {
        self.samples.iter().map(|s| s.count).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sample sets always serialize")
    }
}

/// Dispatch on `cfg.kind`.
pub fn solve(p: &QuboProblem, cfg: &SolverConfig) -> Result<SampleSet> {
    match cfg.kind {
        SolverKind::Exhaustive => solve_exhaustive(p),
        SolverKind::SimulatedAnnealing => solve_sa(p, cfg),
        SolverKind::Tabu => solve_tabu(p, cfg),
    }
}

/// `|(v_ref - v_heur) / v_ref|`; undefined for a zero reference.
pub fn relative_error(v_ref: f64, v_heur: f64) -> Result<f64> {
    if !v_ref.is_finite() || !v_heur.is_finite() {
        return Err(Error::InvalidParameter("relative error needs finite values".into()));
    }
    if v_ref == 0.0 {
        return Err(Error::UndefinedReference);
    }
    Ok(((v_ref - v_heur) / v_ref).abs())
}

/// Runs `cfg.num_reads` reads in parallel. Read `i` receives `i` as its
/// stream index, so results do not depend on scheduling.
pub(crate) fn run_reads<F>(cfg: &SolverConfig, read: F) -> Vec<Vec<u8>>
where
    F: Fn(u64) -> Vec<u8> + Sync,
{
    use rayon::prelude::*;

    let deadline = cfg.time_limit.map(|d| std::time::Instant::now() + d);
    let out: Vec<Option<Vec<u8>>> = (0..cfg.num_reads as u64)
        .into_par_iter()
        .map(|i| {
            if i > 0 && deadline.is_some_and(|d| std::time::Instant::now() >= d) {
                None
            } else {
                Some(read(i))
            }
        })
        .collect();
    out.into_iter().flatten().collect()
}

pub(crate) fn score_reads(p: &QuboProblem, reads: Vec<Vec<u8>>) -> Result<Vec<(Assignment, f64)>> {
    reads
        .into_iter()
        .map(|bits| {
            let a = Assignment::new(bits)?;
            let e = p.energy(&a)?;
            Ok((a, e))
        })
        .collect()
}
