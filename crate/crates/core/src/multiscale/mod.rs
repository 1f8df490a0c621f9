//! Multiscale machinery: dyadic cube lattice, stopping-time regions, graph
//! extraction, corona decomposition and the rectifiability report.

pub mod corona;
pub mod cubes;
pub mod params;
pub mod report;
pub mod stopping;

pub use corona::{classify_trees, corona_decompose, CoronaDecomposition, Tree, TreeType};
pub use cubes::{build_cubes, Cube, CubeLattice};
pub use params::{ParamsLedger, Profile};
pub use report::{rectifiability_report, RectifiabilityReport, ReportOptions, Verdict};
pub use stopping::{
    build_graph_function, gamma_affine, stopping_time_region, GraphFunction, PointClass,
    StoppingRegion,
};
