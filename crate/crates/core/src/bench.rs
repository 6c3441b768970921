//! Synthetic benchmark suite: instance generation, solver runs, and CSV reports.
//!
//! The relative error of each run is measured against a reference cut value:
//! the exhaustive optimum when the instance has at most [`EXHAUSTIVE_CAP`]
//! variables, otherwise the best value any benchmarked solver found.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{synthetic_grid, GridGraph};
use crate::qubo::{cut_value, mincut_to_qubo, Assignment};
use crate::solvers::{relative_error, solve, solve_exhaustive, SolverConfig, SolverKind, EXHAUSTIVE_CAP};

pub fn instance_file_name(size: usize, seed: u64) -> String {
    format!("grid_{size:02}_seed_{seed}.txt")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
}

/// Write one edge-list file per (size, seed) plus `synth_config.json`.
pub fn synth(sizes: &[usize], seeds: &[u64], out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    if sizes.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "synth needs at least one size and one seed".into(),
        ));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut paths = Vec::new();
    for &size in sizes {
        for &seed in seeds {
            let graph = synthetic_grid(size, seed)?;
            let path = out_dir.join(instance_file_name(size, seed));
            graph.write_edge_list(seed, &path)?;
            paths.push(path);
        }
    }
    let config = SynthConfig {
        sizes: sizes.to_vec(),
        seeds: seeds.to_vec(),
        files: paths
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
    };
    let cfg_path = out_dir.join("synth_config.json");
    let json = serde_json::to_string_pretty(&config).expect("configs always serialize");
    fs::write(&cfg_path, json + "\n").map_err(|e| Error::io(&cfg_path, e))?;
    Ok(paths)
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub seed: u64,
    pub graph: GridGraph,
}

impl Instance {
    pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
        let path = path.as_ref();
        let (graph, seed) = GridGraph::read_edge_list(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(Instance { name, seed, graph })
    }

    pub fn synthetic(size: usize, seed: u64) -> Result<Instance> {
        Ok(Instance {
            name: instance_file_name(size, seed),
            seed,
            graph: synthetic_grid(size, seed)?,
        })
    }
}

/// All `*.txt` edge lists in `dir`, sorted by file name.
pub fn load_instance_dir(dir: impl AsRef<Path>) -> Result<Vec<Instance>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::format(dir, "no instance files (*.txt) found"));
    }
    paths.iter().map(Instance::load).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Exhaustive,
    BestOfAll,
}

impl ReferenceKind {
    pub fn label(self) -> &'static str {
        match self {
            ReferenceKind::Exhaustive => "exhaustive",
            ReferenceKind::BestOfAll => "best_of_all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub solver: String,
    /// Cut value of the best assignment found.
    pub best_energy: Option<f64>,
    pub wall_time: Option<f64>,
    pub reference: Option<f64>,
    pub reference_kind: Option<ReferenceKind>,
    /// `None` when the run failed or the reference is zero.
    pub relative_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub width: usize,
    pub height: usize,
    pub solver: String,
    /// Runs with a defined relative error.
    pub count: usize,
    /// Runs recorded as "n/a" (failed, or zero reference).
    pub undefined: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Population standard deviation.
    pub stddev: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub aggregate: Vec<AggregateRow>,
}

impl BenchReport {
    pub fn failures(&self) -> impl Iterator<Item = &BenchRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

fn label_for(cfg: &SolverConfig) -> String {
    cfg.kind.label().to_string()
}

fn run_instance(inst: &Instance, solvers: &[SolverConfig]) -> Vec<BenchRow> {
    let g = &inst.graph;
    let q = mincut_to_qubo(g);
    let value_of = |a: &Assignment| cut_value(g, a).expect("assignment sized to the graph");

    let results: Vec<(String, Result<(f64, f64)>)> = solvers
        .iter()
        .map(|cfg| {
            let start = Instant::now();
            let outcome = solve(&q, cfg).map(|set| (value_of(&set.best().assignment), start.elapsed().as_secs_f64()));
            (label_for(cfg), outcome)
        })
        .collect();

    let reference = if g.num_nodes() <= EXHAUSTIVE_CAP {
        let from_run = solvers.iter().zip(&results).find_map(|(cfg, (_, r))| match r {
            Ok((v, _)) if cfg.kind == SolverKind::Exhaustive => Some(*v),
            _ => None,
        });
        from_run
            .or_else(|| solve_exhaustive(&q).ok().map(|set| value_of(&set.best().assignment)))
            .map(|v| (v, ReferenceKind::Exhaustive))
    } else {
        results
            .iter()
            .filter_map(|(_, r)| r.as_ref().ok().map(|(v, _)| *v))
            .min_by(f64::total_cmp)
            .map(|v| (v, ReferenceKind::BestOfAll))
    };

    results
        .into_iter()
        .map(|(solver, outcome)| {
            let (best_energy, wall_time, error) = match outcome {
                Ok((v, t)) => (Some(v), Some(t), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            let relative = match (reference, best_energy) {
                (Some((r, _)), Some(v)) => relative_error(r, v).ok(),
                _ => None,
            };
            BenchRow {
                instance: inst.name.clone(),
                width: g.width(),
                height: g.height(),
                seed: inst.seed,
                solver,
                best_energy,
                wall_time,
                reference: reference.map(|r| r.0),
                reference_kind: reference.map(|r| r.1),
                relative_error: relative,
                error,
            }
        })
        .collect()
}

/// Mean, min, max, and population stddev of the defined relative errors per (size, solver).
pub fn aggregate(rows: &[BenchRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, usize, String)> = rows.iter().map(|r| (r.width, r.height, r.solver.clone())).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(width, height, solver)| {
            let group: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.width == width && r.height == height && r.solver == solver)
                .collect();
            let values: Vec<f64> = group.iter().filter_map(|r| r.relative_error).collect();
            let (mean, min, max, stddev) = if values.is_empty() {
                (None, None, None, None)
            } else {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                (
                    Some(mean),
                    values.iter().copied().reduce(f64::min),
                    values.iter().copied().reduce(f64::max),
                    Some(var.sqrt()),
                )
            };
            AggregateRow {
                width,
                height,
                count: values.len(),
                undefined: group.len() - values.len(),
                solver,
                mean,
                min,
                max,
                stddev,
            }
        })
        .collect()
}

/// Run every solver on every instance using `jobs` worker threads (0 means all cores).
/// Failed runs are kept as rows with an error message; the caller decides how to report them.
pub fn bench(instances: &[Instance], solvers: &[SolverConfig], jobs: usize) -> Result<BenchReport> {
    if instances.is_empty() || solvers.is_empty() {
        return Err(Error::InvalidParameter(
            "bench needs at least one instance and one solver".into(),
        ));
    }
    for cfg in solvers {
        cfg.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {jobs} worker threads: {e}")))?;
    let mut rows: Vec<BenchRow> = pool.install(|| {
        instances
            .par_iter()
            .flat_map_iter(|inst| run_instance(inst, solvers))
            .collect()
    });
    rows.sort_by(|a, b| {
        (a.width, a.height, a.seed, &a.solver, &a.instance).cmp(&(b.width, b.height, b.seed, &b.solver, &b.instance))
    });
    let aggregate = aggregate(&rows);
    Ok(BenchReport { rows, aggregate })
}

pub const INSTANCE_HEADER: [&str; 11] = [
    "instance",
    "width",
    "height",
    "seed",
    "solver",
    "best_energy",
    "wall_time_s",
    "reference",
    "reference_kind",
    "relative_error",
    "error",
];

pub const AGGREGATE_HEADER: [&str; 9] = [
    "width",
    "height",
    "solver",
    "count",
    "undefined",
    "mean_relative_error",
    "min_relative_error",
    "max_relative_error",
    "stddev_relative_error",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

fn write_csv(path: &Path, header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for rec in records {
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

pub fn write_instances_csv(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(
        path.as_ref(),
        &INSTANCE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.instance.clone(),
                r.width.to_string(),
                r.height.to_string(),
                r.seed.to_string(),
                r.solver.clone(),
                cell(r.best_energy),
                cell(r.wall_time),
                cell(r.reference),
                r.reference_kind.map_or("n/a", ReferenceKind::label).to_string(),
                cell(r.relative_error),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(
        path.as_ref(),
        &AGGREGATE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.width.to_string(),
                r.height.to_string(),
                r.solver.clone(),
                r.count.to_string(),
                r.undefined.to_string(),
                cell(r.mean),
                cell(r.min),
                cell(r.max),
                cell(r.stddev),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_writes_one_file_per_instance() {
        let dir = tempfile::tempdir().unwrap();
        let paths = synth(&[2, 3], &[1, 2], dir.path()).unwrap();
        assert_eq!(paths.len(), 4);
        assert!(dir.path().join("grid_02_seed_1.txt").exists());
        assert!(dir.path().join("synth_config.json").exists());
        let first = fs::read(&paths[0]).unwrap();
        synth(&[2, 3], &[1, 2], dir.path()).unwrap();
        assert_eq!(fs::read(&paths[0]).unwrap(), first);
        assert_eq!(load_instance_dir(dir.path()).unwrap().len(), 4);
    }

    #[test]
    fn small_instances_use_the_exhaustive_reference() {
        let insts: Vec<Instance> = (1..=3).map(|s| Instance::synthetic(2, s).unwrap()).collect();
        let solvers = [SolverConfig::simulated_annealing(0), SolverConfig::exhaustive()];
        let report = bench(&insts, &solvers, 2).unwrap();
        assert_eq!(report.rows.len(), 6);
        for r in &report.rows {
            assert_eq!(r.reference_kind, Some(ReferenceKind::Exhaustive));
            assert_eq!(r.relative_error, Some(0.0), "{r:?}");
        }
        assert_eq!(report.aggregate.len(), 2);
        assert_eq!(report.failures().count(), 0);
    }

    #[test]
    fn zero_reference_is_undefined() {
        // Positive weights everywhere: the best cut is no cut, value 0.
        let g = GridGraph::from_canonical(2, 2, vec![0.5; 4]).unwrap();
        let inst = Instance {
            name: "flat".into(),
            seed: 0,
            graph: g,
        };
        let report = bench(&[inst], &[SolverConfig::tabu(0)], 1).unwrap();
        assert_eq!(report.rows[0].reference, Some(0.0));
        assert_eq!(report.rows[0].relative_error, None);
        assert_eq!(report.aggregate[0].undefined, 1);
        assert_eq!(report.aggregate[0].mean, None);
    }

    #[test]
    fn oversized_exhaustive_is_reported_per_row() {
        let inst = Instance::synthetic(5, 1).unwrap();
        let report = bench(&[inst], &[SolverConfig::exhaustive(), SolverConfig::tabu(1)], 1).unwrap();
        let failed: Vec<&BenchRow> = report.failures().collect();
        assert_eq!(failed.len(), 1);
        assert!(failed[0].error.as_deref().unwrap().contains("24"));
        let tabu = report.rows.iter().find(|r| r.solver == "tabu").unwrap();
        assert_eq!(tabu.reference_kind, Some(ReferenceKind::BestOfAll));
        assert_eq!(tabu.relative_error, Some(0.0));
    }

    #[test]
    fn aggregate_statistics() {
        let row = |e: Option<f64>| BenchRow {
            instance: String::new(),
            width: 3,
            height: 3,
            seed: 0,
            solver: "sa".into(),
            best_energy: None,
            wall_time: None,
            reference: None,
            reference_kind: None,
            relative_error: e,
            error: None,
        };
        let agg = aggregate(&[row(Some(0.0)), row(Some(0.2)), row(None)]);
        assert_eq!(agg.len(), 1);
        let a = &agg[0];
        assert_eq!((a.count, a.undefined), (2, 1));
        assert!((a.mean.unwrap() - 0.1).abs() < 1e-15);
        assert!((a.stddev.unwrap() - 0.1).abs() < 1e-15);
        assert_eq!((a.min, a.max), (Some(0.0), Some(0.2)));
    }

    #[test]
    fn csv_files() {
        let dir = tempfile::tempdir().unwrap();
        let insts = [Instance::synthetic(2, 1).unwrap()];
        let report = bench(&insts, &[SolverConfig::tabu(0)], 1).unwrap();
        let a = dir.path().join("instances.csv");
        let b = dir.path().join("aggregate.csv");
        write_instances_csv(&report.rows, &a).unwrap();
        write_aggregate_csv(&report.aggregate, &b).unwrap();
        let text = fs::read_to_string(&a).unwrap();
        assert!(text.starts_with("instance,width,height,seed,solver,best_energy"));
        assert_eq!(text.lines().count(), 2);
        assert_eq!(fs::read_to_string(&b).unwrap().lines().count(), 2);
    }
}
