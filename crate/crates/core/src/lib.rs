//! Probabilistic abstract interpretation of small neural networks.
//!
//! Concrete input spaces are finite grids or point sets; a distribution over
//! them is pushed through the network either exactly (lifted pushforward
//! operators, brute-force enumeration) or abstractly through partitions, with
//! abstraction `A`, concretization `G` and transformers `f# = A′·f⃗·G`.
//!
//! Every algorithm is generic over [`Scalar`]: `f64` for desk-scale grids and
//! [`Rational`] for exact results on small examples.

pub mod abstraction;
pub mod analysis;
pub mod distribution;
pub mod domain;
pub mod error;
pub mod io;
pub mod lifting;
pub mod mnist;
pub mod network;
pub mod operator;
pub mod oracle;
pub mod penrose;
pub mod scalar;
pub mod transformer;

pub use abstraction::{
    build_A, build_G, grid_partition, identity_partition, sample_cell, sign_partition,
    zonotope_partition, zonotope_points, Partition, PartitionKind, Zonotope,
};
pub use analysis::{precision_gap, AnalysisRun, Pipeline, PlanSpec, PrecisionGap, Stage};
pub use distribution::{tensor_product, tensor_product_all, tv_distance, Distribution};
pub use domain::{Axis, DiscretizedDomain, PointSet, StateSpace};
pub use error::{Error, Result};
pub use lifting::{
    discretize, image_space, lift_function, lift_layer, lift_network, AxisSpec, GridSpec,
};
pub use network::{eval_network, load_network, lower_conv, Conv2d, Dense, Layer, Matrix, Network};
pub use operator::{apply_operator, LinearOperator, Role};
pub use oracle::{brute_force_push, compare_abstract, Comparison, OracleOutput};
pub use penrose::{check_penrose, PenroseReport};
pub use scalar::{Rational, Scalar, FLOAT_TOLERANCE};
pub use transformer::{
    abstract_transformer, compose, exact_transformer, relu_sharp, relu_sharp_between,
    sampled_transformer, AbstractTransformer, Provenance,
};
