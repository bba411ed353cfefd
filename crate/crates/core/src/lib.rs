//! Dynamic (k,p)-clustering with bounded recourse, and fractional k-median
//! value estimation through a dynamic fractional facility-location layer.

pub mod error;
pub mod facility;
pub mod harness;
pub mod hierarchy;
pub mod kmedian;
pub mod local_search;
pub mod metric;
pub mod neighbors;
pub mod objective;
pub mod oracles;
pub mod projection;
pub mod radii;
pub mod stream;
pub mod tol;

pub use error::{Error, Result};
pub use metric::{CoordMetric, DistanceMatrix, PointId, WeightedMetricSpace};
pub use neighbors::NeighborLists;
pub use objective::{clustering_cost, facility_cost, project_set, unnormalized_cost, CenterSet, Norm};
