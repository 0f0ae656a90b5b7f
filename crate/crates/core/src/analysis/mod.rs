//! Feature-space analysis: per-segment averaging, class dissimilarities,
//! classical multidimensional scaling, and 95% data ellipses.

pub mod eigen;
pub mod ellipse;
pub mod mds;
pub mod segments;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use ellipse::{ellipse_95, EllipseParams, CHI2_2DF_95};
pub use mds::{class_distance_matrix, classical_mds, DissimilarityMatrix, MdsEmbedding};
pub use segments::{average_segment_features, Interval, SegmentToken};
