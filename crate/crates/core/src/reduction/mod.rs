//! Offline reduction: POD bases, greedy sampling, the gappy least-squares
//! operator and the clustered source surrogate.

pub mod gnat;
pub mod pod;
pub mod sampling;
pub mod surrogate;

pub use gnat::{gnat_operator, GnatOperator};
pub use pod::{
    build_pod, build_residual_basis, weighted_pod_space, Centering, PodBasis, ResidualBasis,
};
pub use sampling::greedy_sample;
pub use surrogate::{cluster_pod, PodSpaceTree, SurrogateSourceBasis};
