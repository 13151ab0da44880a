//! Stationary splitting Finsler spacetimes `L = −Λτ² + 2B(v)τ + F²(v)` on `ℝ × M`.
//!
//! The crate evaluates fundamental tensors and their signatures, checks
//! Killing and static-splitting conditions, builds the optical (Fermat)
//! metrics, integrates geodesics and computes Finsler distances, balls and
//! chronological sets. Derivatives come from a second-order forward-mode
//! engine in [`ad`].

pub mod ad;
pub mod causality;
pub mod config;
pub mod error;
pub mod expr;
pub mod fermat;
pub mod geodesics;
pub mod killing;
pub mod lagrangian;
pub mod linalg;
pub mod ode;
pub mod sampling;
pub mod tensor;
pub mod types;
pub mod zoo;

pub use ad::{fd_jet2, jet2, AdError, Dual, Jet2, Scalar};
pub use causality::{
    ball_boundary, chronological_set, finsler_distance, BallBoundary, BallKind, ChronoSet, ChronoSign, DistanceMethod,
    EvidenceReport, GridSpec,
};
pub use config::{load_metric, MetricConfig};
pub use error::{Error, Result};
pub use expr::Expr;
pub use fermat::{classify_causal, optical_metrics, CausalClass, CausalKind, OpticalKind, OpticalMetricPair, Orientation};
pub use geodesics::{
    conserved_quantities, geodesic_bvp_shoot, spacetime_geodesic_ivp, GeodesicTrajectory, ShootOptions, ShootingResult,
    StopReason,
};
pub use killing::{killing_residual, KillingReport, StaticVerdict, VectorField};
pub use lagrangian::{make_stationary_splitting, FiberLagrangian, Form, ScalarField, SpacetimeLagrangian};
pub use ode::OdeOptions;
pub use sampling::{Sample, SamplingPlan};
pub use tensor::{fundamental_tensor, signature_of, Signature};
pub use types::{in_cone, BasePoint, ConeKind, ConeSpec, SpaceVector, SpacetimePoint, SpacetimeVector, SymBilinear};
pub use zoo::{load_zoo, ZooEntry};
