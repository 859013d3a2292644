//! Deformation measurement between multi-temporal point clouds of
//! retaining walls.
//!
//! The crate covers the full monitoring pipeline:
//!
//! * point-cloud handling: I/O, wall-local frames, plane fits, and the
//!   bounding-box data-spacing estimate ([`cloud`], [`io`], [`geom`]);
//! * spatial indexing and the subsampling primitives used everywhere
//!   ([`spatial`]);
//! * registration: target-based closed-form alignment and point-to-plane
//!   ICP with quality statistics ([`registration`]);
//! * 2.5D Delaunay TIN meshing with signed point-to-mesh distances
//!   ([`mesh`]);
//! * four deformation estimators (C2M, M2M, M3C2, ICP-correspondence),
//!   range filtering, and rasterized deformation maps ([`deform`]);
//! * the split-half minimum-level-of-detection protocol ([`uncertainty`]);
//! * reference-instrument models (small-angle total-station readings,
//!   inclinometer depth profiles) for cross-validation ([`instrument`]);
//! * synthetic scenes with exact ground truth ([`synth`]).
//!
//! All lengths are metres inside the library; millimetres appear only at
//! report and CSV boundaries. The core is generic over the scalar type via
//! [`scalar::Real`]; the aliases below fix the common `f64` instantiation.

pub mod cloud;
pub mod deform;
pub mod error;
pub mod geom;
pub mod instrument;
pub mod io;
pub mod mesh;
pub mod registration;
pub mod scalar;
pub mod spatial;
pub mod synth;
pub mod uncertainty;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` point.
pub type Point3 = geom::Point3<f64>;
/// `f64` bounding box.
pub type BoundingBox = geom::BoundingBox<f64>;
/// `f64` plane.
pub type Plane = geom::Plane<f64>;
/// `f64` rigid motion.
pub type RigidTransform = geom::RigidTransform<f64>;
/// `f64` wall frame.
pub type WallFrame = geom::WallFrame<f64>;
/// `f64` point cloud.
pub type PointCloud = cloud::PointCloud<f64>;
/// `f64` spatial index.
pub type SpatialIndex = spatial::SpatialIndex<f64>;
/// `f64` TIN mesh.
pub type TinMesh = mesh::TinMesh<f64>;
/// Per-point deformation results at 64-bit precision.
pub type PointwiseDeformation = deform::PointwiseDeformation<f64>;
/// Gridded deformation map at 64-bit precision.
pub type DeformationMap = deform::DeformationMap<f64>;
/// `f64` inclinometer trace.
pub type InclinometerTrace = instrument::InclinometerTrace<f64>;
/// `f64` lateral-deformation depth profile.
pub type DepthProfile = instrument::DepthProfile<f64>;
/// `f64` level-of-detection sweep report.
pub type LodReport = uncertainty::LodReport<f64>;
