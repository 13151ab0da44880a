//! Seeded sampling of base points and cone vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::lagrangian::SpacetimeLagrangian;
use crate::types::ConeKind;

/// A reproducible sampling recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    pub seed: u64,
    pub n_samples: usize,
    /// Relative radius of the excluded tube around the time axis.
    pub tube: f64,
    /// Range of the time coordinate.
    pub t_range: (f64, f64),
}

/// A base point `z = (t, x)` and a fiber vector `w = (τ, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

impl SamplingPlan {
    pub const DEFAULT_TUBE: f64 = 1e-3;

    pub fn new(seed: u64, n_samples: usize) -> Self {
        Self { seed, n_samples, tube: Self::DEFAULT_TUBE, t_range: (-1.0, 1.0) }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Draws `n_samples` pairs with `w` in the cone, outside the tube around `𝒯`,
    /// and where `L` evaluates.
    pub fn draw(&self, l: &SpacetimeLagrangian) -> Vec<Sample> {
        let mut rng = self.rng();
        (0..self.n_samples).filter_map(|_| self.draw_one(l, &mut rng)).collect()
    }

    /// Draws one admissible sample; `None` only if rejection sampling keeps failing.
    pub fn draw_one<R: Rng>(&self, l: &SpacetimeLagrangian, rng: &mut R) -> Option<Sample> {
        for _ in 0..10_000 {
            let z = self.base_point(l, rng);
            let w = self.fiber_vector(l, rng);
            if self.accepts(l, &z, &w) {
                return Some(Sample { z, w });
            }
        }
        None
    }

    pub fn base_point<R: Rng>(&self, l: &SpacetimeLagrangian, rng: &mut R) -> Vec<f64> {
        let mut z = Vec::with_capacity(l.n + 1);
        z.push(rng.random_range(self.t_range.0..=self.t_range.1));
        for &(lo, hi) in &l.sample_box {
            z.push(rng.random_range(lo..=hi));
        }
        z
    }

    fn fiber_vector<R: Rng>(&self, l: &SpacetimeLagrangian, rng: &mut R) -> Vec<f64> {
        let mut w: Vec<f64> = (0..=l.n).map(|_| rng.sample(StandardNormal)).collect();
        match l.cone.kind {
            ConeKind::UpperHalf => w[0] = w[0].abs(),
            ConeKind::LowerHalf => w[0] = -w[0].abs(),
            ConeKind::FullSlit => {}
        }
        w
    }

    /// Standard normal direction on the unit sphere of the base fiber.
    pub fn unit_space_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if r > 1e-8 {
                return v.into_iter().map(|c| c / r).collect();
            }
        }
    }

    /// Whether `(z, w)` passes every sampling guard of `l`.
    pub fn accepts(&self, l: &SpacetimeLagrangian, z: &[f64], w: &[f64]) -> bool {
        let wn = w.iter().map(|c| c * c).sum::<f64>().sqrt();
        let vn = w[1..].iter().map(|c| c * c).sum::<f64>().sqrt();
        if vn <= self.tube * wn {
            return false;
        }
        if l.cone.kind != ConeKind::FullSlit && w[0].abs() <= self.tube * wn {
            return false;
        }
        if !self.fiber_ok(l, z, &w[1..]) {
            return false;
        }
        if let Some(limit) = l.speed_limit {
            if vn > limit * w[0].abs() {
                return false;
            }
        }
        l.admits(z, w) && l.eval_f64(z, w).is_ok_and(f64::is_finite)
    }

    /// Guards that only involve the spatial part `v`.
    pub fn fiber_ok(&self, l: &SpacetimeLagrangian, z: &[f64], v: &[f64]) -> bool {
        let vn = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if let Some(g) = l.axis_guard {
            if v.iter().any(|c| c.abs() < g * vn) {
                return false;
            }
        }
        if let Some(d) = &l.fiber_domain {
            let mut w = Vec::with_capacity(v.len() + 1);
            w.push(0.0);
            w.extend_from_slice(v);
            let t2 = self.tube * self.tube * vn * vn;
            if !d.eval_f64(z, &w).is_ok_and(|val| val > t2) {
                return false;
            }
        }
        true
    }

    /// Base points with unit spatial directions satisfying [`Self::fiber_ok`].
    pub fn draw_space(&self, l: &SpacetimeLagrangian) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = self.rng();
        let mut out = Vec::with_capacity(self.n_samples);
        let mut attempts = 0;
        while out.len() < self.n_samples && attempts < 100 * self.n_samples + 1000 {
            attempts += 1;
            let z = self.base_point(l, &mut rng);
            let v = Self::unit_space_vector(l.n, &mut rng);
            if self.fiber_ok(l, &z, &v) {
                out.push((z, v));
            }
        }
        out
    }
}
