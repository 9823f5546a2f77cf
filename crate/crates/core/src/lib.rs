//! Road scan-to-BIM core: turns semantically labeled point clouds into
//! sectional polygon records and primitive meshes.

pub mod cluster;
pub mod extract;
pub mod geom2d;
pub mod geostore;
pub mod ingest;
pub mod lift;
pub mod mesh;
pub mod metrics;
pub mod record;
pub mod spatial;
pub mod synth;
pub mod types;

pub use cluster::{ClusterConfig, ClusterParams, Clustering, Instance};
pub use lift::{LiftError, LiftParams, Lifter};
pub use extract::{extract_instance, BlockTransform, ExtractConfig, ExtractError, Extracted};
pub use record::{Geometry, GeometryRecord, PairSet, PoleLikeGeometry, RecordError, RecordMeta};
pub use ingest::{CloudFormat, LabeledCloud, PreprocessParams};
pub use types::*;
