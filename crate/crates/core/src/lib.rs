//! Image segmentation as a signed minimum cut on a 4-neighbor pixel lattice,
//! posed as a QUBO and minimized with classical heuristics or exact search.

pub mod bench;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod pipeline;
pub mod qubo;
pub mod raster;
pub mod rng;
pub mod scalability;
pub mod solvers;
pub mod weight_learn;

pub use error::{Error, Result};
pub use graph::{image_to_grid, synthetic_grid, GridGraph, WeightConfig};
pub use metrics::{score, score_batch, MetricsReport};
pub use pipeline::{segment, SegmentationMask};
pub use qubo::{cut_value, mincut_to_qubo, Assignment, QuboProblem};
pub use raster::RasterImage;
pub use solvers::{solve, SampleSet, SolverConfig, SolverKind};
