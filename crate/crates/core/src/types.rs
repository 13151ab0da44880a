//! Points, vectors, cones and symmetric forms on the product `ℝ × M`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Chart coordinates of a point of the base `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasePoint {
    pub coords: Vec<f64>,
}

impl BasePoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        let coords = coords.into();
        debug_assert!(!coords.is_empty() && coords.iter().all(|c| c.is_finite()));
        Self { coords }
    }
    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Point `(t, x)` of the spacetime.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: BasePoint,
}

impl SpacetimePoint {
    pub fn new(t: f64, x: impl Into<Vec<f64>>) -> Self {
        Self { t, x: BasePoint::new(x) }
    }
    pub fn dim(&self) -> usize {
        self.x.dim()
    }
    /// Coordinates `(t, x¹, …, xⁿ)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.dim() + 1);
        z.push(self.t);
        z.extend_from_slice(&self.x.coords);
        z
    }
    pub fn from_slice(z: &[f64]) -> Self {
        Self::new(z[0], &z[1..])
    }
}

/// Tangent vector of the base.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceVector {
    pub comps: Vec<f64>,
}

impl SpaceVector {
    pub fn new(comps: impl Into<Vec<f64>>) -> Self {
        Self { comps: comps.into() }
    }
    pub fn dim(&self) -> usize {
        self.comps.len()
    }
    pub fn norm(&self) -> f64 {
        self.comps.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.comps.iter().map(|c| c * s).collect::<Vec<_>>())
    }
}

/// Tangent vector `(τ, v)` of the spacetime.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimeVector {
    pub tau: f64,
    pub v: SpaceVector,
}

impl SpacetimeVector {
    pub fn new(tau: f64, v: impl Into<Vec<f64>>) -> Self {
        Self { tau, v: SpaceVector::new(v) }
    }
    pub fn dim(&self) -> usize {
        self.v.dim()
    }
    pub fn to_vec(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.dim() + 1);
        w.push(self.tau);
        w.extend_from_slice(&self.v.comps);
        w
    }
    pub fn from_slice(w: &[f64]) -> Self {
        Self::new(w[0], &w[1..])
    }
    pub fn norm(&self) -> f64 {
        (self.tau * self.tau + self.v.norm().powi(2)).sqrt()
    }
    pub fn scaled(&self, s: f64) -> Self {
        Self { tau: self.tau * s, v: self.v.scaled(s) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// `τ > 0` off the time axis.
    UpperHalf,
    /// `τ < 0` off the time axis.
    LowerHalf,
    /// Every vector off the time axis.
    FullSlit,
}

/// Cone domain of a Lagrangian, guarded away from the time axis `𝒯`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub guard_eps: f64,
}

impl ConeSpec {
    pub const DEFAULT_GUARD: f64 = 1e-9;

    pub fn new(kind: ConeKind) -> Self {
        Self { kind, guard_eps: Self::DEFAULT_GUARD }
    }

    pub fn with_guard(kind: ConeKind, guard_eps: f64) -> Self {
        assert!(guard_eps > 0.0, "guard_eps must be positive");
        Self { kind, guard_eps }
    }

    pub fn admits_future(&self) -> bool {
        matches!(self.kind, ConeKind::UpperHalf | ConeKind::FullSlit)
    }

    pub fn admits_past(&self) -> bool {
        matches!(self.kind, ConeKind::LowerHalf | ConeKind::FullSlit)
    }

    /// Membership for a vector given as `(τ, v¹, …, vⁿ)`.
    pub fn contains(&self, w: &[f64]) -> bool {
        let vnorm2: f64 = w[1..].iter().map(|c| c * c).sum();
        let wnorm = (w[0] * w[0] + vnorm2).sqrt();
        let g = self.guard_eps * wnorm;
        if vnorm2.sqrt() <= g {
            return false;
        }
        match self.kind {
            ConeKind::UpperHalf => w[0] > g,
            ConeKind::LowerHalf => w[0] < -g,
            ConeKind::FullSlit => true,
        }
    }
}

pub fn in_cone(cone: &ConeSpec, w: &SpacetimeVector) -> bool {
    cone.contains(&w.to_vec())
}

/// Symmetric bilinear form stored as a dense matrix that is symmetrized on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBilinear {
    entries: DMatrix<f64>,
}

impl SymBilinear {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        assert!(m.is_square());
        let entries = (&m + m.transpose()) * 0.5;
        Self { entries }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { entries: m }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: DMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn apply(&self, u: &[f64], v: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        u.dot(&(&self.entries * v))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &SymBilinear) -> f64 {
        self.entries.iter().zip(other.entries.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}
