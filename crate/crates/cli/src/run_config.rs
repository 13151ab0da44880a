//! Run configuration: one TOML file holding the metric definition, the
//! output directory, the sampler seed and per-command blocks.
//!
//! The metric sections (`[metric]`, `[lambda]`, `[B]`, `[F]`, `[cone]`,
//! `[chart]`) follow the metric definition format of `finsler_core::config`;
//! alternatively `metric_file` points to a separate definition file.

use std::path::{Path, PathBuf};

use finsler_core::config::{from_toml, ChartSection, Component, ConeSection, ZooRef};
use finsler_core::{load_metric, Error, MetricConfig, OdeOptions, Result, SamplingPlan, SpacetimeLagrangian};
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub metric_file: Option<PathBuf>,

    pub metric: Option<ZooRef>,
    pub lambda: Option<Component>,
    #[serde(rename = "B")]
    pub b: Option<Component>,
    #[serde(rename = "F")]
    pub f: Option<Component>,
    pub cone: Option<ConeSection>,
    pub chart: Option<ChartSection>,

    pub sampling: Option<SamplingBlock>,
    pub ode: Option<OdeBlock>,
    pub eval: Option<PointsBlock>,
    pub tensor: Option<PointsBlock>,
    pub killing: Option<FieldBlock>,
    #[serde(rename = "static")]
    pub static_check: Option<FieldBlock>,
    pub fermat: Option<FermatBlock>,
    pub classify: Option<ClassifyBlock>,
    pub geodesic: Option<GeodesicBlock>,
    pub lightlike: Option<LightlikeBlock>,
    pub shoot: Option<ShootBlock>,
    pub balls: Option<BallsBlock>,
    pub chrono: Option<ChronoBlock>,
    pub evidence: Option<EvidenceBlock>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingBlock {
    pub n_samples: Option<usize>,
    pub tube: Option<f64>,
    pub t_range: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeBlock {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: Option<usize>,
}

/// Explicit `(z, w)` pairs; sampled when absent.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsBlock {
    #[serde(default)]
    pub z: Vec<Vec<f64>>,
    #[serde(default)]
    pub w: Vec<Vec<f64>>,
}

/// A vector field given by expressions in `t, x1 … xn`; `∂_t` when absent.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    pub name: Option<String>,
    pub field: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FermatBlock {
    pub x: Option<Vec<f64>>,
    pub n_dirs: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyBlock {
    pub n_vectors: Option<usize>,
    /// Fraction of draws placed exactly on the light cone.
    pub lightlike_fraction: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicBlock {
    pub z0: Option<Vec<f64>>,
    pub w0: Option<Vec<f64>>,
    pub s_end: Option<f64>,
    pub checkpoints: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightlikeBlock {
    pub z0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
    pub branch: Option<String>,
    pub s_end: Option<f64>,
    pub checkpoints: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootBlock {
    pub x0: Option<Vec<f64>>,
    pub x1: Option<Vec<f64>>,
    pub optical: Option<String>,
    pub max_newton: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub bounds: Vec<[f64; 2]>,
    pub resolution: usize,
    #[serde(default)]
    pub order2: bool,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallsBlock {
    pub center: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub kind: Option<String>,
    pub optical: Option<String>,
    pub n_dirs: Option<usize>,
    /// Lattice used instead of shooting when present.
    pub grid: Option<GridBlock>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChronoBlock {
    pub p0: Option<Vec<f64>>,
    pub sign: Option<String>,
    pub radii: Option<Vec<f64>>,
    pub n_dirs: Option<usize>,
    /// Points `(t, x)` whose membership is reported.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    pub grid: Option<GridBlock>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceBlock {
    pub pairs: Option<usize>,
    pub grid: Option<GridBlock>,
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<Self> {
        from_toml(src)
    }

    fn has_inline_metric(&self) -> bool {
        self.metric.is_some()
            || self.lambda.is_some()
            || self.b.is_some()
            || self.f.is_some()
            || self.cone.is_some()
            || self.chart.is_some()
    }

    /// Builds the Lagrangian; `src` is the config text and `dir` the directory holding it.
    pub fn lagrangian(&self, src: &str, dir: &Path) -> Result<SpacetimeLagrangian> {
        match &self.metric_file {
            Some(path) => {
                if self.has_inline_metric() {
                    return Err(Error::Config("metric_file cannot be combined with inline metric sections".into()));
                }
                let path = if path.is_absolute() { path.clone() } else { dir.join(path) };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                load_metric(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
            None => {
                let metric = MetricConfig {
                    metric: self.metric.clone(),
                    lambda: self.lambda.clone(),
                    b: self.b.clone(),
                    f: self.f.clone(),
                    cone: self.cone.clone(),
                    chart: self.chart.clone(),
                };
                metric.build(src)
            }
        }
    }

    pub fn plan(&self, seed: u64, default_n: usize) -> SamplingPlan {
        let mut plan = SamplingPlan::new(seed, default_n);
        if let Some(s) = &self.sampling {
            if let Some(n) = s.n_samples {
                plan.n_samples = n;
            }
            if let Some(t) = s.tube {
                plan.tube = t;
            }
            if let Some([a, b]) = s.t_range {
                plan.t_range = (a, b);
            }
        }
        plan
    }

    pub fn ode(&self) -> OdeOptions {
        let mut o = OdeOptions::default();
        if let Some(b) = &self.ode {
            if let Some(v) = b.rtol {
                o.rtol = v;
            }
            if let Some(v) = b.atol {
                o.atol = v;
            }
            if let Some(v) = b.h_max {
                o.h_max = v;
            }
            if let Some(v) = b.max_steps {
                o.max_steps = v;
            }
        }
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let src = "seed = 3\n[metric]\nzoo = \"flat_randers\"\n[killing]\nfeild = [\"1\", \"0\", \"0\"]\n";
        match RunConfig::parse(src) {
            Err(Error::ConfigAt { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::parse("sed = 3\n").is_err());
    }

    #[test]
    fn metric_sections_build() {
        let src = "[metric]\nzoo = \"flat_randers\"\nparams = { b = 0.25 }\n[sampling]\nn_samples = 10\n";
        let rc = RunConfig::parse(src).unwrap();
        let l = rc.lagrangian(src, Path::new(".")).unwrap();
        assert_eq!(l.n, 2);
        assert_eq!(rc.plan(1, 1000).n_samples, 10);
    }

    #[test]
    fn metric_file_excludes_inline_sections() {
        let src = "metric_file = \"m.toml\"\n[metric]\nzoo = \"flat_randers\"\n";
        let rc = RunConfig::parse(src).unwrap();
        assert!(matches!(rc.lagrangian(src, Path::new(".")), Err(Error::Config(_))));
    }
}
