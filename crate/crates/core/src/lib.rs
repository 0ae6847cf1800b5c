//! Estimation of piecewise-constant signals on graphs by counting-norm
//! trend filtering.
//!
//! The library provides the graph and signal types, the objective family,
//! two solvers (a spectral embedding + k-means route and heat-bath simulated
//! annealing), a masked-label extension for semi-supervised classification,
//! and exhaustive reference solvers for tiny instances.

pub mod eigen;
pub mod error;
pub mod graph;
pub mod io;
pub mod kmeans;
pub mod map;
pub mod model;
pub mod oracle;
pub mod sa;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{knn_graph, planted_partition, Graph, PlantedPartition};
pub use map::{solve_map, MapInstance, MapMethod, MapOpts, MapSolution};
pub use model::{Assignment, GtfSolution, SignalMatrix};
pub use sa::{anneal, anneal_restarts, AnnealResult, Schedule};
pub use spectral::{solve_p2_fixed_k, solve_p2_screen, ScreenResult, SpectralOpts};
