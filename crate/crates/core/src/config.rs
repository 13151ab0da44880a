//! Metric definition files.
//!
//! A definition is a TOML document. `[lambda]`, `[B]`, `[F]` and `[cone]`
//! each either give a closed-form expression or borrow the component from a
//! zoo entry; `[metric]` names a whole zoo entry whose components the other
//! sections then override. Expressions use `x1…xn` for base coordinates and
//! `y1…yn` for fiber components.
//!
//! ```toml
//! [lambda]
//! expr = "1 + 0.1 * x1^2"
//! [B]
//! expr = "0.5 * y1"
//! [F]
//! squared = "y1^2 + y2^2"
//! [cone]
//! kind = "upper_half"
//! ```

use std::collections::BTreeMap;
use std::ops::Range;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lagrangian::{make_stationary_splitting, FiberLagrangian, ScalarField, SpacetimeLagrangian};
use crate::types::{ConeKind, ConeSpec};
use crate::zoo::{load_zoo, Params};

/// 1-based line and column of a byte offset.
pub fn locate(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn at(src: &str, span: Range<usize>, message: impl Into<String>) -> Error {
    let (line, column) = locate(src, span.start);
    Error::ConfigAt { line, column, message: message.into() }
}

/// Deserializes TOML, reporting syntax and schema errors with their position.
pub fn from_toml<T: DeserializeOwned>(src: &str) -> Result<T> {
    toml::from_str(src).map_err(|e| match e.span() {
        Some(span) => at(src, span, e.message().trim()),
        None => Error::Config(e.message().trim().to_string()),
    })
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ZooRef {
    pub zoo: Spanned<String>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub expr: Option<Spanned<String>>,
    /// `[F]` only: the expression of `F²` rather than `F`.
    pub squared: Option<Spanned<String>>,
    pub zoo: Option<Spanned<String>>,
    #[serde(default)]
    pub params: Params,
    /// Named constants substituted into `expr`.
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConeSection {
    pub kind: Option<Spanned<String>>,
    pub guard: Option<f64>,
    pub zoo: Option<Spanned<String>>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChartSection {
    pub bounds: Option<Vec<[f64; 2]>>,
    pub sample_box: Option<Vec<[f64; 2]>>,
    /// Degree-2 fiber expression that must stay positive.
    pub fiber_domain: Option<Spanned<String>>,
    pub axis_guard: Option<f64>,
    pub speed_limit: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub metric: Option<ZooRef>,
    pub lambda: Option<Component>,
    #[serde(rename = "B")]
    pub b: Option<Component>,
    #[serde(rename = "F")]
    pub f: Option<Component>,
    pub cone: Option<ConeSection>,
    pub chart: Option<ChartSection>,
}

fn zoo_at(src: &str, name: &Spanned<String>, params: &Params) -> Result<SpacetimeLagrangian> {
    load_zoo(name.get_ref(), params).map_err(|e| at(src, name.span(), e.to_string()))
}

fn parse_at(src: &str, text: &Spanned<String>, constants: &BTreeMap<String, f64>) -> Result<Expr> {
    Expr::parse_with(text.get_ref(), constants).map_err(|e| match e {
        Error::Parse { column, message } => {
            let (line, col) = locate(src, text.span().start);
            // The span starts at the opening quote.
            Error::ConfigAt { line, column: col + column, message }
        }
        other => at(src, text.span(), other.to_string()),
    })
}

fn cone_kind(src: &str, s: &Spanned<String>) -> Result<ConeKind> {
    match s.get_ref().as_str() {
        "upper_half" | "upper" => Ok(ConeKind::UpperHalf),
        "lower_half" | "lower" => Ok(ConeKind::LowerHalf),
        "full_slit" | "full" => Ok(ConeKind::FullSlit),
        other => Err(at(src, s.span(), format!("unknown cone kind `{other}`; expected upper_half, lower_half or full_slit"))),
    }
}

impl MetricConfig {
    pub fn parse(src: &str) -> Result<Self> {
        from_toml(src)
    }

    /// Builds the Lagrangian; `src` is the text the config was parsed from, for error positions.
    pub fn build(&self, src: &str) -> Result<SpacetimeLagrangian> {
        let base = match &self.metric {
            Some(r) => Some(zoo_at(src, &r.zoo, &r.params)?),
            None => None,
        };
        let overrides = self.lambda.is_some() || self.b.is_some() || self.f.is_some() || self.cone.is_some();
        let mut l = match (&base, overrides) {
            (Some(l), false) => l.clone(),
            _ => self.assemble(src, base.as_ref())?,
        };
        if let Some(chart) = &self.chart {
            let n = l.n;
            let check = |v: &Vec<[f64; 2]>, what: &str| -> Result<Vec<(f64, f64)>> {
                if v.len() != n {
                    return Err(Error::Config(format!("{what} has {} intervals but the metric has dimension {n}", v.len())));
                }
                Ok(v.iter().map(|[a, b]| (*a, *b)).collect())
            };
            if let Some(b) = &chart.bounds {
                l = l.with_chart(check(b, "chart.bounds")?);
            }
            if let Some(b) = &chart.sample_box {
                l = l.with_sample_box(check(b, "chart.sample_box")?);
            }
            if let Some(d) = &chart.fiber_domain {
                l = l.with_fiber_domain(parse_at(src, d, &BTreeMap::new())?);
            }
            if let Some(g) = chart.axis_guard {
                l = l.with_axis_guard(g);
            }
            if let Some(s) = chart.speed_limit {
                l = l.with_speed_limit(s);
            }
        }
        Ok(l)
    }

    fn assemble(&self, src: &str, base: Option<&SpacetimeLagrangian>) -> Result<SpacetimeLagrangian> {
        let inherited = match base {
            Some(l) => {
                let (lam, b, f2) = l.parts()?;
                Some((lam.clone(), b.clone(), f2.clone(), l.cone))
            }
            None => None,
        };
        let borrowed = |c: &Component| -> Result<Option<SpacetimeLagrangian>> {
            c.zoo.as_ref().map(|z| zoo_at(src, z, &c.params)).transpose()
        };
        let missing = |what: &str| Error::Config(format!("section [{what}] is required without [metric]"));

        let lambda = match &self.lambda {
            Some(c) => match (&c.expr, borrowed(c)?) {
                (Some(e), None) => ScalarField::new("lambda", parse_at(src, e, &c.constants)?),
                (None, Some(z)) => z.parts()?.0.clone(),
                _ => return Err(Error::Config("[lambda] needs exactly one of `expr` or `zoo`".into())),
            },
            None => inherited.as_ref().map(|p| p.0.clone()).ok_or_else(|| missing("lambda"))?,
        };
        let b = match &self.b {
            Some(c) => match (&c.expr, borrowed(c)?) {
                (Some(e), None) => FiberLagrangian::new("B", parse_at(src, e, &c.constants)?, 1),
                (None, Some(z)) => z.parts()?.1.clone(),
                _ => return Err(Error::Config("[B] needs exactly one of `expr` or `zoo`".into())),
            },
            None => inherited.as_ref().map(|p| p.1.clone()).ok_or_else(|| missing("B"))?,
        };
        let f2 = match &self.f {
            Some(c) => match (&c.expr, &c.squared, borrowed(c)?) {
                (Some(e), None, None) => FiberLagrangian::new("F²", parse_at(src, e, &c.constants)?.square(), 2),
                (None, Some(e), None) => FiberLagrangian::new("F²", parse_at(src, e, &c.constants)?, 2),
                (None, None, Some(z)) => z.parts()?.2.clone(),
                _ => return Err(Error::Config("[F] needs exactly one of `expr`, `squared` or `zoo`".into())),
            },
            None => inherited.as_ref().map(|p| p.2.clone()).ok_or_else(|| missing("F"))?,
        };
        let cone = match &self.cone {
            Some(c) => {
                let mut spec = match (&c.kind, &c.zoo) {
                    (Some(k), None) => ConeSpec::new(cone_kind(src, k)?),
                    (None, Some(z)) => zoo_at(src, z, &c.params)?.cone,
                    _ => return Err(Error::Config("[cone] needs exactly one of `kind` or `zoo`".into())),
                };
                if let Some(g) = c.guard {
                    if g <= 0.0 {
                        return Err(Error::Config("cone.guard must be positive".into()));
                    }
                    spec.guard_eps = g;
                }
                spec
            }
            None => inherited.as_ref().map(|p| p.3).unwrap_or_else(|| ConeSpec::new(ConeKind::UpperHalf)),
        };
        let mut l = make_stationary_splitting(lambda, b, f2, cone)?;
        if let Some(base) = base {
            if base.n == l.n {
                l = l.with_chart(base.chart.clone()).with_sample_box(base.sample_box.clone());
                l.fiber_domain = base.fiber_domain.clone();
                l.axis_guard = base.axis_guard;
                l.speed_limit = base.speed_limit;
            }
            l = l.named(format!("{}:custom", base.name));
        }
        Ok(l)
    }
}

/// Parses and builds a metric definition.
pub fn load_metric(src: &str) -> Result<SpacetimeLagrangian> {
    MetricConfig::parse(src)?.build(src)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expression_metric() {
        let src = "[lambda]\nexpr = \"1\"\n[B]\nexpr = \"b * y1\"\nconstants = { b = 0.5 }\n[F]\nsquared = \"y1^2 + y2^2\"\n[cone]\nkind = \"upper_half\"\n";
        let l = load_metric(src).unwrap();
        assert_eq!(l.n, 2);
        assert!((l.eval_f64(&[0.0, 0.0, 0.0], &[2.0, 1.0, 0.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zoo_reference_and_override() {
        let l = load_metric("[metric]\nzoo = \"flat_randers\"\nparams = { b = 0.3 }\n").unwrap();
        assert!((l.eval_f64(&[0.0; 3], &[1.0, 1.0, 0.0]).unwrap() - 0.6).abs() < 1e-15);
        let l = load_metric("[metric]\nzoo = \"flat_randers\"\n[B]\nexpr = \"0\"\n").unwrap();
        assert!((l.eval_f64(&[0.0; 3], &[1.0, 1.0, 0.0]).unwrap()).abs() < 1e-15);
        let l = load_metric("[lambda]\nexpr = \"2\"\n[B]\nzoo = \"flat_randers\"\n[F]\nzoo = \"flat_randers\"\n").unwrap();
        assert!((l.lambda_at(&[0.0, 0.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        match load_metric("[lambda]\nexpr = \"1\"\nbogus = 3\n") {
            Err(Error::ConfigAt { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match load_metric("[lambda]\nexpr = \"1 + * 2\"\n[B]\nexpr = \"y1\"\n[F]\nexpr = \"y1\"\n") {
            Err(Error::ConfigAt { line, column, .. }) => assert_eq!((line, column), (2, 13)),
            other => panic!("{other:?}"),
        }
        match load_metric("[metric]\nzoo = \"nope\"\n") {
            Err(Error::ConfigAt { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("nope"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_metric("[B]\nexpr = \"y1\"\n"), Err(Error::Config(_))));
        assert!(matches!(
            load_metric("[lambda]\nexpr = \"1\"\n[B]\nexpr = \"y1\"\n[F]\nexpr = \"y1\"\n[cone]\nkind = \"sideways\"\n"),
            Err(Error::ConfigAt { line: 8, .. })
        ));
    }

    #[test]
    fn chart_dimension_checked() {
        let r = load_metric("[metric]\nzoo = \"flat_randers\"\n[chart]\nbounds = [[0, 1]]\n");
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn locate_counts_from_one() {
        assert_eq!(locate("ab\ncd", 0), (1, 1));
        assert_eq!(locate("ab\ncd", 4), (2, 2));
    }
}
