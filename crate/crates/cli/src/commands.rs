use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use qseg::bench;
use qseg::pipeline::{
    self, downscale, preprocess_flood, preprocess_forest, segment_graph, segment_patched_with, HsvChannel, PatchPlan,
    Segmentation, SegmentationMask,
};
use qseg::qubo::mincut_to_qubo;
use qseg::scalability::compare_report;
use qseg::weight_learn::{train, TrainHyper, WeightModel};
use qseg::{image_to_grid, metrics, synthetic_grid, GridGraph, RasterImage, SolverConfig, SolverKind, WeightConfig};

use crate::{
    BenchArgs, EvalArgs, ExportArgs, Failure, LearnArgs, Preprocess, ScalabilityArgs, SegmentArgs, SolverArgs,
    SynthArgs,
};

type CmdResult = Result<(), Failure>;

/// Parses `2-44`, `2..44`, `2..=44`, `3`, and comma-separated mixtures (ranges inclusive).
pub fn parse_list(text: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::usage(format!("cannot parse list `{text}`"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let range = item
            .split_once("..=")
            .or_else(|| item.split_once(".."))
            .or_else(|| item.split_once('-'));
        match range {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(item.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, Failure> {
    Ok(parse_list(text)?.into_iter().map(|v| v as usize).collect())
}

fn parse_dims(text: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::usage(format!("cannot parse dimensions `{text}`, expected N or WxH"));
    match text.split_once(['x', 'X']) {
        Some((w, h)) => Ok((w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?)),
        None => {
            let n = text.parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

fn parse_kind(text: &str) -> Result<SolverKind, Failure> {
    text.parse::<SolverKind>().map_err(|e| Failure::usage(e.to_string()))
}

impl SolverArgs {
    fn build(&self, kind: SolverKind, seed: u64) -> Result<SolverConfig, Failure> {
        let mut cfg = SolverConfig::for_kind(kind, seed);
        if let Some(n) = self.num_reads {
            cfg.num_reads = n;
        }
        if let Some(n) = self.sweeps {
            cfg.sweeps = n;
        }
        cfg.beta_schedule = (
            self.beta_min.unwrap_or(cfg.beta_schedule.0),
            self.beta_max.unwrap_or(cfg.beta_schedule.1),
        );
        if let Some(n) = self.tabu_tenure {
            cfg.tabu_tenure = n;
        }
        if self.tabu_iterations.is_some() {
            cfg.tabu_iterations = self.tabu_iterations;
        }
        if let Some(secs) = self.time_limit {
            let limit =
                Duration::try_from_secs_f64(secs).map_err(|_| Failure::usage(format!("invalid time limit {secs}")))?;
            cfg.time_limit = Some(limit);
        }
        cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn require_file(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::io(format!("{}: no such file", path.display())))
    }
}

fn require_dir(path: &Path) -> CmdResult {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::io(format!("{}: no such directory", path.display())))
    }
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> CmdResult {
    let text = serde_json::to_string_pretty(value).expect("json values always serialize") + "\n";
    fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("run.json")
}

fn set_jobs(jobs: usize) {
    // A second call in the same process keeps the first pool, which is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
}

/// Everything that determines a `segment` run's output mask.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRun {
    pub input: PathBuf,
    pub preprocess: Preprocess,
    pub hsv_channel: HsvChannel,
    pub green_band: usize,
    pub nir_band: usize,
    pub downscale: Option<(usize, usize)>,
    pub patch: Option<usize>,
    pub weights: WeightConfig,
    pub weights_model: Option<PathBuf>,
    pub solver: SolverConfig,
    pub seed: u64,
    pub jobs: usize,
}

impl SegmentRun {
    fn from_args(a: &SegmentArgs) -> Result<SegmentRun, Failure> {
        let input = a
            .input
            .clone()
            .ok_or_else(|| Failure::usage("segment needs an input image or --config"))?;
        let weights = WeightConfig {
            sigma: a.sigma,
            normalize: !a.no_normalize,
            ..WeightConfig::default()
        };
        weights.validate().map_err(|e| Failure::usage(e.to_string()))?;
        if a.patch == Some(0) {
            return Err(Failure::usage("patch size must be positive"));
        }
        Ok(SegmentRun {
            input,
            preprocess: a.preprocess,
            hsv_channel: a
                .hsv_channel
                .parse()
                .map_err(|e: qseg::Error| Failure::usage(e.to_string()))?,
            green_band: a.green_band,
            nir_band: a.nir_band,
            downscale: a.downscale.as_deref().map(parse_dims).transpose()?,
            patch: a.patch,
            weights,
            weights_model: a.weights_model.clone(),
            solver: a.budget.build(parse_kind(&a.solver)?, a.seed)?,
            seed: a.seed,
            jobs: a.jobs,
        })
    }

    fn from_sidecar(path: &Path) -> Result<SegmentRun, Failure> {
        require_file(path)?;
        let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        let config = value.get("config").cloned().unwrap_or(value);
        serde_json::from_value(config).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
    }

    fn prepared_image(&self) -> Result<RasterImage, Failure> {
        require_file(&self.input)?;
        let img = RasterImage::load(&self.input)?;
        let img = match self.preprocess {
            Preprocess::None => {
                if img.bands() != 1 {
                    return Err(Failure::io(format!(
                        "{}: {} bands; pick --preprocess forest or flood for multi-band input",
                        self.input.display(),
                        img.bands()
                    )));
                }
                img
            }
            Preprocess::Forest => preprocess_forest(&img, self.hsv_channel)?,
            Preprocess::Flood => preprocess_flood(&img, self.green_band, self.nir_band)?,
        };
        Ok(match self.downscale {
            Some((w, h)) => downscale(&img, w, h)?,
            None => img,
        })
    }
}

fn polarity_json(seg: &Segmentation) -> serde_json::Value {
    serde_json::to_value(&seg.polarity).expect("polarity always serializes")
}

pub fn segment(a: SegmentArgs) -> CmdResult {
    let run = match &a.config {
        Some(path) => SegmentRun::from_sidecar(path)?,
        None => SegmentRun::from_args(&a)?,
    };
    if let Some(m) = &run.weights_model {
        require_file(m)?;
    }
    create_dir(&a.out)?;
    set_jobs(run.jobs);

    let img = run.prepared_image()?;
    let model = run.weights_model.as_ref().map(WeightModel::load).transpose()?;
    let segment_tile = |tile: &RasterImage| match &model {
        Some(m) => segment_graph(&qseg::weight_learn::apply_model(m, tile)?, tile, &run.solver),
        None => pipeline::segment(tile, &run.weights, &run.solver),
    };

    let start = Instant::now();
    let (mask, details) = match run.patch {
        Some(size) => {
            let plan = PatchPlan::for_image(&img, size)?;
            let patched = segment_patched_with(&img, &plan, segment_tile)?;
            let energy: f64 = patched.patches.iter().map(|p| p.segmentation.energy).sum();
            let patches: Vec<serde_json::Value> = patched
                .patches
                .iter()
                .map(|p| {
                    json!({
                        "rect": p.rect,
                        "energy": p.segmentation.energy,
                        "polarity": polarity_json(&p.segmentation),
                    })
                })
                .collect();
            (patched.mask, json!({ "energy": energy, "patches": patches }))
        }
        None => {
            let seg = segment_tile(&img)?;
            let details = json!({
                "energy": seg.energy,
                "polarity": polarity_json(&seg),
                "distinct_samples": seg.samples.samples.len(),
                "total_reads": seg.samples.total_reads(),
            });
            (seg.mask, details)
        }
    };
    let wall_time = start.elapsed().as_secs_f64();

    let stem = run
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    let mask_path = a.out.join(format!("{stem}.mask.pgm"));
    mask.save_pgm(&mask_path)?;
    let sidecar = json!({
        "command": "segment",
        "version": env!("CARGO_PKG_VERSION"),
        "config": run,
        "mask": mask_path.file_name().map(|n| n.to_string_lossy().into_owned()),
        "width": mask.width(),
        "height": mask.height(),
        "solver": run.solver.kind.label(),
        "result": details,
        "wall_time": wall_time,
    });
    write_json(&a.out.join(format!("{stem}.run.json")), &sidecar)
}

pub fn synth(a: SynthArgs) -> CmdResult {
    let sizes = parse_sizes(&a.sizes)?;
    let seeds = parse_list(&a.seeds)?;
    if let Some(bad) = sizes.iter().find(|&&s| s < 2) {
        return Err(Failure::usage(format!("grid size must be at least 2, got {bad}")));
    }
    create_dir(&a.out)?;
    bench::synth(&sizes, &seeds, &a.out)?;
    Ok(())
}

pub fn bench(a: BenchArgs) -> CmdResult {
    let kinds = a
        .solvers
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_kind)
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.is_empty() {
        return Err(Failure::usage("no solvers given"));
    }
    let solvers = kinds
        .iter()
        .map(|&k| a.budget.build(k, a.seed))
        .collect::<Result<Vec<_>, _>>()?;
    require_dir(&a.instances)?;
    let instances = bench::load_instance_dir(&a.instances)?;
    create_dir(&a.out)?;

    let start = Instant::now();
    let report = bench::bench(&instances, &solvers, a.jobs)?;
    let wall_time = start.elapsed().as_secs_f64();
    bench::write_instances_csv(&report.rows, a.out.join("bench_instances.csv"))?;
    bench::write_aggregate_csv(&report.aggregate, a.out.join("bench_aggregate.csv"))?;
    let instance_names: Vec<&str> = instances.iter().map(|i| i.name.as_str()).collect();
    write_json(
        &a.out.join("bench_config.json"),
        &json!({
            "command": "bench",
            "version": env!("CARGO_PKG_VERSION"),
            "instances_dir": a.instances,
            "instances": instance_names,
            "solvers": solvers,
            "seed": a.seed,
            "jobs": a.jobs,
            "wall_time": wall_time,
        }),
    )?;

    let failures: Vec<_> = report.failures().collect();
    if let Some(first) = failures.first() {
        return Err(Failure::solver(format!(
            "{} of {} runs failed (partial CSV written); first: {} on {}: {}",
            failures.len(),
            report.rows.len(),
            first.solver,
            first.instance,
            first.error.as_deref().unwrap_or("")
        )));
    }
    Ok(())
}

fn pgm_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    Ok(entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "pgm"))
        .filter_map(|p| Some((p.file_name()?.to_string_lossy().into_owned(), p)))
        .collect())
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let pairs: Vec<(PathBuf, PathBuf)> = if a.pred.is_file() && a.truth.is_file() {
        vec![(a.pred.clone(), a.truth.clone())]
    } else {
        require_dir(&a.pred)?;
        require_dir(&a.truth)?;
        let pred = pgm_files(&a.pred)?;
        let truth = pgm_files(&a.truth)?;
        if let Some(name) = pred.keys().find(|k| !truth.contains_key(*k)) {
            return Err(Failure::io(format!("{name}: no ground truth in {}", a.truth.display())));
        }
        if let Some(name) = truth.keys().find(|k| !pred.contains_key(*k)) {
            return Err(Failure::io(format!("{name}: no prediction in {}", a.pred.display())));
        }
        if pred.is_empty() {
            return Err(Failure::io(format!("{}: no PGM masks found", a.pred.display())));
        }
        pred.into_iter().map(|(name, p)| (p, truth[&name].clone())).collect()
    };
    let masks = pairs
        .iter()
        .map(|(p, t)| Ok((SegmentationMask::load_pgm(p)?, SegmentationMask::load_pgm(t)?)))
        .collect::<Result<Vec<_>, qseg::Error>>()?;
    let report = metrics::score_batch(&masks)?;
    print!("{}", report.aggregate.table());
    println!("ignored pixels: {}", report.aggregate.ignored);
    let files: Vec<String> = pairs.iter().map(|(p, _)| p.display().to_string()).collect();
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(
        &a.out,
        &json!({
            "command": "eval",
            "version": env!("CARGO_PKG_VERSION"),
            "pred": a.pred,
            "truth": a.truth,
            "files": files,
            "report": report,
        }),
    )
}

pub fn export_qubo(a: ExportArgs) -> CmdResult {
    let (graph, source): (GridGraph, serde_json::Value) = match (&a.instance, &a.image, a.synthetic) {
        (Some(path), None, None) => {
            require_file(path)?;
            let (g, seed) = GridGraph::read_edge_list(path)?;
            (g, json!({ "instance": path, "seed": seed }))
        }
        (None, Some(path), None) => {
            require_file(path)?;
            let img = RasterImage::load(path)?;
            let cfg = WeightConfig::with_sigma(a.sigma);
            cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
            (image_to_grid(&img, &cfg)?, json!({ "image": path, "weights": cfg }))
        }
        (None, None, Some(size)) => {
            if size < 2 {
                return Err(Failure::usage(format!("grid size must be at least 2, got {size}")));
            }
            (
                synthetic_grid(size, a.seed)?,
                json!({ "synthetic": size, "seed": a.seed }),
            )
        }
        _ => return Err(Failure::usage("give exactly one of --instance, --image, --synthetic")),
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let problem = mincut_to_qubo(&graph);
    qseg::qubo::export_qubo(&problem, &a.out)?;
    write_json(
        &sidecar_path(&a.out),
        &json!({
            "command": "export-qubo",
            "version": env!("CARGO_PKG_VERSION"),
            "source": source,
            "num_vars": problem.num_vars(),
            "width": graph.width(),
            "height": graph.height(),
        }),
    )
}

const IMAGE_EXTENSIONS: [&str; 5] = ["pgm", "ppm", "pnm", "bands", "pbm"];

pub fn learn_weights(a: LearnArgs) -> CmdResult {
    require_dir(&a.images)?;
    require_dir(&a.masks)?;
    let entries = fs::read_dir(&a.images).map_err(|e| Failure::io(format!("{}: {e}", a.images.display())))?;
    let mut images: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| IMAGE_EXTENSIONS.iter().any(|e| x == *e)))
        .collect();
    images.sort();
    if images.is_empty() {
        return Err(Failure::io(format!("{}: no training images found", a.images.display())));
    }
    let mut dataset = Vec::with_capacity(images.len());
    for img_path in &images {
        let stem = img_path.file_stem().unwrap_or_default();
        let mask_path = a.masks.join(stem).with_extension("pgm");
        if !mask_path.is_file() {
            return Err(Failure::io(format!(
                "{}: no mask {}",
                img_path.display(),
                mask_path.display()
            )));
        }
        dataset.push((RasterImage::load(img_path)?, SegmentationMask::load_pgm(&mask_path)?));
    }
    let hyper = TrainHyper {
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        seed: a.seed,
    };
    let model = train(&dataset, &hyper)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    model.save(&a.out)?;
    let files: Vec<String> = images.iter().map(|p| p.display().to_string()).collect();
    write_json(
        &sidecar_path(&a.out),
        &json!({
            "command": "learn-weights",
            "version": env!("CARGO_PKG_VERSION"),
            "images": a.images,
            "masks": a.masks,
            "files": files,
            "hyper": hyper,
        }),
    )
}

pub fn scalability(a: ScalabilityArgs) -> CmdResult {
    let sizes: Vec<(usize, usize)> = parse_sizes(&a.sizes)?.into_iter().map(|s| (s, s)).collect();
    let report = compare_report(&sizes)?;
    match &a.out {
        Some(path) => fs::write(path, report).map_err(|e| Failure::io(format!("{}: {e}", path.display()))),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}
