//! Representation-quality metrics: K-means + NMI, Fisher Discriminant Ratio,
//! kNN classification, Recall@k retrieval, interpolation probes, the
//! equidistance check for mean proxies, and the composite model evaluation.

mod kmeans;
mod metrics;
mod pca;
mod report;

pub use kmeans::{kmeans, ClusterAssignment};
pub use metrics::{
    equidistance_cv, fdr, interp_probe, knn_accuracy, knn_classify, nmi, recall_at_k, InterpProbe,
};
pub use pca::pca_2d;
pub use report::{evaluate_model, EvalConfig, EvalReport, PcaPoint, PcaSpace};

use crate::math::Mat;

/// A point set with one class id per row.
#[derive(Debug, Clone)]
pub struct LabeledPoints {
    pub points: Mat,
    pub labels: Vec<u32>,
}

impl LabeledPoints {
    pub fn new(points: Mat, labels: Vec<u32>) -> Self {
        assert_eq!(points.rows(), labels.len(), "one label per row");
        LabeledPoints { points, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}
