//! Named stationary splitting Lagrangians and constructed test inputs.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lagrangian::{make_stationary_splitting, FiberLagrangian, ScalarField, SpacetimeLagrangian};
use crate::types::{ConeKind, ConeSpec};

/// One tunable parameter of a zoo entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    pub help: &'static str,
}

const fn param(name: &'static str, default: f64, min: f64, max: f64, help: &'static str) -> ParamSpec {
    ParamSpec { name, default, min, max, help }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryKind {
    /// Metrics from the literature.
    Example,
    /// Inputs built to exercise a particular check.
    TestInput,
}

pub type Params = BTreeMap<String, f64>;

pub struct ZooEntry {
    pub name: &'static str,
    pub kind: EntryKind,
    pub summary: &'static str,
    pub params: Vec<ParamSpec>,
    builder: fn(&Params) -> Result<SpacetimeLagrangian>,
}

impl ZooEntry {
    /// Fills defaults and validates `given` against the schema.
    pub fn resolve(&self, given: &Params) -> Result<Params> {
        for k in given.keys() {
            if !self.params.iter().any(|p| p.name == k) {
                return Err(Error::UnknownParam(k.clone()));
            }
        }
        let mut out = Params::new();
        for p in &self.params {
            let v = given.get(p.name).copied().unwrap_or(p.default);
            if !(v >= p.min && v <= p.max) {
                return Err(Error::ParamOutOfRange { name: p.name.to_string(), value: v, min: p.min, max: p.max });
            }
            out.insert(p.name.to_string(), v);
        }
        Ok(out)
    }

    pub fn build(&self, given: &Params) -> Result<SpacetimeLagrangian> {
        let p = self.resolve(given)?;
        Ok((self.builder)(&p)?.named(self.name))
    }
}

impl std::fmt::Debug for ZooEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ZooEntry").field("name", &self.name).field("kind", &self.kind).finish()
    }
}

pub fn catalog() -> Vec<ZooEntry> {
    vec![
        ZooEntry {
            name: "flat_randers",
            kind: EntryKind::Example,
            summary: "Λ = 1, B = b·y1, F Euclidean on ℝⁿ",
            params: vec![
                param("b", 0.5, -0.95, 0.95, "coefficient of the one-form"),
                param("n", 2.0, 1.0, 4.0, "base dimension"),
            ],
            builder: flat_randers,
        },
        ZooEntry {
            name: "standard_stationary",
            kind: EntryKind::Example,
            summary: "Λ, ω, g smooth on ℝ²: a standard stationary Lorentzian metric",
            params: vec![
                param("l", 0.3, 0.0, 0.9, "lapse modulation"),
                param("w", 0.3, -1.0, 1.0, "shift one-form amplitude"),
                param("g", 0.5, 0.0, 1.0, "Riemannian deformation"),
            ],
            builder: standard_stationary,
        },
        ZooEntry {
            name: "kerr_perturbation",
            kind: EntryKind::Example,
            summary: "Kerr with a quartic-root Finsler F in (r, θ, φ), radial perturbations ψᵢ = cᵢ·profile",
            params: vec![
                param("M", 1.0, 1e-3, 10.0, "mass"),
                param("a", 0.5, -1.0, 1.0, "spin parameter, |a| ≤ M"),
                param("c0", 0.0, -0.1, 0.1, "ψ0 = c0 (M/r)²"),
                param("c1", 0.0, -0.1, 0.1, "ψ1 = c1 (M/r)²"),
                param("c2", 0.0, -0.1, 0.1, "ψ2 = c2 r⁴ (M/r)²"),
                param("c3", 0.0, -0.1, 0.1, "ψ3 = c3 r⁴ (M/r)²"),
                param("equatorial", 0.0, 0.0, 1.0, "1 restricts to the plane θ = π/2 in coordinates (r, φ)"),
            ],
            builder: kerr_perturbation,
        },
        ZooEntry {
            name: "rutz",
            kind: EntryKind::Example,
            summary: "spherically symmetric Schwarzschild deformation with B ∝ (θ̇² + sin²θ φ̇²)^½",
            params: vec![param("M", 1.0, 1e-3, 10.0, "mass"), param("eps", 0.2, -0.9, 0.9, "deformation strength")],
            builder: rutz,
        },
        ZooEntry {
            name: "bogoslovsky",
            kind: EntryKind::Example,
            summary: "L = −(τ² − |v|²)^(1−b) (τ − v¹)^(2b); degenerate along u = (1, 1, 0)",
            params: vec![param("b", 0.25, -0.9, 0.9, "anisotropy exponent")],
            builder: bogoslovsky,
        },
        ZooEntry {
            name: "randers_type",
            kind: EntryKind::TestInput,
            summary: "B = β·y1 + κ|y|: one-form plus a Finsler norm, on the upper half cone",
            params: vec![param("beta", 0.3, -1.0, 1.0, "one-form part"), param("kappa", 0.4, 0.0, 1.0, "norm part")],
            builder: randers_type,
        },
        ZooEntry {
            name: "static_warped",
            kind: EntryKind::TestInput,
            summary: "B = 0 with non-constant Λ and F",
            params: vec![],
            builder: static_warped,
        },
        ZooEntry {
            name: "twisted_oneform",
            kind: EntryKind::TestInput,
            summary: "Λ = 1, B = x2·y1 on ℝ³: stationary with a non-integrable orthogonal distribution",
            params: vec![param("k", 1.0, -5.0, 5.0, "twist coefficient")],
            builder: twisted_oneform,
        },
        ZooEntry {
            name: "indefinite_b",
            kind: EntryKind::TestInput,
            summary: "B = c·(y1² − y2²)/|y|, whose fiber Hessian changes sign",
            params: vec![param("c", 0.3, 0.0, 1.0, "amplitude")],
            builder: indefinite_b,
        },
        ZooEntry {
            name: "time_perturbed",
            kind: EntryKind::TestInput,
            summary: "flat Randers with Λ replaced by 1 + 0.1 sin t",
            params: vec![param("amp", 0.1, -0.5, 0.5, "time modulation amplitude")],
            builder: time_perturbed,
        },
    ]
}

pub fn find(name: &str) -> Result<ZooEntry> {
    catalog().into_iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownZooEntry(name.to_string()))
}

/// Builds a zoo entry with the given parameters; missing ones take their defaults.
pub fn load_zoo(name: &str, params: &Params) -> Result<SpacetimeLagrangian> {
    find(name)?.build(params)
}

/// Builds a zoo entry with default parameters.
pub fn load_default(name: &str) -> Result<SpacetimeLagrangian> {
    load_zoo(name, &Params::new())
}

pub fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Names of the literature examples.
pub fn example_names() -> Vec<&'static str> {
    catalog().into_iter().filter(|e| e.kind == EntryKind::Example).map(|e| e.name).collect()
}

// ---------------------------------------------------------------------------
// Builders

fn euclidean_sq(n: usize) -> Expr {
    (0..n).map(|i| Expr::y(i).square()).fold(Expr::c(0.0), |a, b| a + b)
}

fn splitting(lambda: Expr, b: Expr, f2: Expr, cone: ConeKind, n: usize) -> Result<SpacetimeLagrangian> {
    let mut l = make_stationary_splitting(
        ScalarField::new("lambda", lambda),
        FiberLagrangian::new("B", b, 1),
        FiberLagrangian::new("F2", f2, 2),
        ConeSpec::new(cone),
    )?;
    if l.n != n {
        l.n = n;
        l.chart = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
        l.sample_box = vec![(-1.0, 1.0); n];
    }
    Ok(l)
}

fn flat_randers(p: &Params) -> Result<SpacetimeLagrangian> {
    let n = p["n"].round() as usize;
    let b = Expr::y(0) * p["b"];
    Ok(splitting(Expr::c(1.0), b, euclidean_sq(n), ConeKind::FullSlit, n)?
        .with_note("B is a one-form; index 1 on the full slit cone"))
}

fn standard_stationary(p: &Params) -> Result<SpacetimeLagrangian> {
    let (l, w, g) = (p["l"], p["w"], p["g"]);
    let (x1, x2) = (Expr::x(0), Expr::x(1));
    let (y1, y2) = (Expr::y(0), Expr::y(1));
    let lambda = 1.0 + l * x1.clone().sin() * x2.clone().cos();
    let b = w * (x2.clone().cos() * y1.clone() + x1.clone().sin() * y2.clone());
    let f2 = (1.0 + g * x2.square()) * y1.clone().square()
        + (1.0 + g * x1.clone().square()) * y2.clone().square()
        + 0.5 * g * x1.sin() * y1 * y2;
    Ok(splitting(lambda, b, f2, ConeKind::FullSlit, 2)?.with_sample_box(vec![(-1.5, 1.5); 2]))
}

fn kerr_perturbation(p: &Params) -> Result<SpacetimeLagrangian> {
    let (m, a) = (p["M"], p["a"]);
    if a.abs() > m {
        return Err(Error::ParamOutOfRange { name: "a".into(), value: a, min: -m, max: m });
    }
    let equatorial = p["equatorial"] >= 0.5;
    let r = Expr::x(0);
    let (theta, rdot, thdot, phdot) = if equatorial {
        (Expr::c(PI / 2.0), Expr::y(0), Expr::c(0.0), Expr::y(1))
    } else {
        (Expr::x(1), Expr::y(0), Expr::y(1), Expr::y(2))
    };
    let sin2 = theta.clone().sin().square();
    let rho2 = r.clone().square() + a * a * theta.cos().square();
    let delta = r.clone().square() - 2.0 * m * r.clone() + a * a;
    let m_over_r2 = (m / r.clone()).square();
    let psi0 = p["c0"] * m_over_r2.clone();
    let psi1 = p["c1"] * m_over_r2.clone();
    let psi2 = p["c2"] * m * m * r.clone().square();
    let psi3 = p["c3"] * m * m * r.clone().square();

    let lambda = 1.0 - 2.0 * m * r.clone() / rho2.clone() + psi0;
    let b = -(m * a * r.clone() * sin2.clone() / rho2.clone()) * phdot.clone();
    let c_r = rho2.clone().square() / delta.square() + psi1;
    let c_th = rho2.clone().square() + psi2;
    let c_ph = (r.clone().square() + a * a + 2.0 * m * a * a * sin2.clone() / rho2).square() * sin2.square() + psi3;
    let quartic = c_r * rdot.powi(4) + c_th * thdot.powi(4) + c_ph * phdot.powi(4);
    let f2 = quartic.sqrt();

    let n = if equatorial { 2 } else { 3 };
    let mut l = splitting(lambda, b, f2, ConeKind::FullSlit, n)?;
    let horizon_safe = 2.0 * m;
    if equatorial {
        l = l
            .with_chart(vec![(horizon_safe, f64::INFINITY), (f64::NEG_INFINITY, f64::INFINITY)])
            .with_sample_box(vec![(4.0 * m, 10.0 * m), (0.0, 2.0 * PI)]);
    } else {
        l = l
            .with_chart(vec![(horizon_safe, f64::INFINITY), (0.0, PI), (f64::NEG_INFINITY, f64::INFINITY)])
            .with_sample_box(vec![(4.0 * m, 10.0 * m), (0.4, PI - 0.4), (0.0, 2.0 * PI)]);
    }
    Ok(l.with_axis_guard(0.05)
        .with_note("quartic-root F is not strongly convex on the coordinate axes of the fiber"))
}

fn rutz(p: &Params) -> Result<SpacetimeLagrangian> {
    let (m, eps) = (p["M"], p["eps"]);
    let r = Expr::x(0);
    let th = Expr::x(1);
    let h = 1.0 - 2.0 * m / r.clone();
    let angular = Expr::y(1).square() + th.sin().square() * Expr::y(2).square();
    let b = (eps / 2.0) * h.clone() * angular.clone().sqrt();
    let f2 = Expr::y(0).square() / h.clone() + r.square() * angular.clone();
    let cone = if eps >= 0.0 { ConeKind::UpperHalf } else { ConeKind::LowerHalf };
    Ok(splitting(h, b, f2, cone, 3)?
        .with_chart(vec![(2.0 * m, f64::INFINITY), (0.0, PI), (f64::NEG_INFINITY, f64::INFINITY)])
        .with_sample_box(vec![(3.0 * m, 10.0 * m), (0.4, PI - 0.4), (0.0, 2.0 * PI)])
        .with_fiber_domain(angular)
        .with_note("conic domain: B is smooth only where θ̇² + sin²θ φ̇² > 0"))
}

fn bogoslovsky(p: &Params) -> Result<SpacetimeLagrangian> {
    let b = p["b"];
    let tau = Expr::tau();
    let minkowski = tau.clone().square() - Expr::y(0).square() - Expr::y(1).square();
    let null_form = tau - Expr::y(0);
    let l = -(minkowski.powf(1.0 - b) * null_form.powf(2.0 * b));
    Ok(SpacetimeLagrangian::general("bogoslovsky", 2, l, ConeSpec::new(ConeKind::UpperHalf))
        .with_speed_limit(0.9)
        .with_note("fundamental tensor undefined or degenerate along u = (1, 1, 0)"))
}

fn randers_type(p: &Params) -> Result<SpacetimeLagrangian> {
    let (beta, kappa) = (p["beta"], p["kappa"]);
    let (y1, y2) = (Expr::y(0), Expr::y(1));
    let norm = (y1.clone().square() + y2.clone().square()).sqrt();
    let lambda = 1.0 + 0.1 * Expr::x(0).square();
    let b = beta * y1.clone() + kappa * norm;
    let f2 = (1.0 + 0.1 * Expr::x(1).square()) * y1.square() + y2.square();
    splitting(lambda, b, f2, ConeKind::UpperHalf, 2)
}

fn static_warped(_: &Params) -> Result<SpacetimeLagrangian> {
    let (y1, y2) = (Expr::y(0), Expr::y(1));
    let lambda = 1.0 + 0.2 * Expr::x(0).sin().square();
    let f2 = (1.0 + 0.3 * Expr::x(1).square()) * y1.clone().square() + y2.clone().square() + 0.2 * y1 * y2;
    splitting(lambda, Expr::c(0.0), f2, ConeKind::FullSlit, 2)
}

fn twisted_oneform(p: &Params) -> Result<SpacetimeLagrangian> {
    let b = p["k"] * Expr::x(1) * Expr::y(0);
    splitting(Expr::c(1.0), b, euclidean_sq(3), ConeKind::FullSlit, 3)
}

fn indefinite_b(p: &Params) -> Result<SpacetimeLagrangian> {
    let (y1, y2) = (Expr::y(0), Expr::y(1));
    let norm = (y1.clone().square() + y2.clone().square()).sqrt();
    let b = p["c"] * (y1.square() - y2.square()) / norm;
    splitting(Expr::c(1.0), b, euclidean_sq(2), ConeKind::UpperHalf, 2)
}

fn time_perturbed(p: &Params) -> Result<SpacetimeLagrangian> {
    let tau = Expr::tau();
    let lambda = 1.0 + p["amp"] * Expr::t().sin();
    let l = -(lambda * tau.clone().square()) + 2.0 * 0.5 * Expr::y(0) * tau + euclidean_sq(2);
    Ok(SpacetimeLagrangian::general("time_perturbed", 2, l, ConeSpec::new(ConeKind::FullSlit)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_are_unique() {
        let mut names: Vec<_> = catalog().iter().map(|e| e.name).collect();
        let before = names.len();
        names.sort();
        names.dedup();
        assert_eq!(before, names.len());
        assert_eq!(example_names().len(), 5);
    }

    #[test]
    fn unknown_entry_and_params_are_rejected() {
        assert!(matches!(load_default("nope"), Err(Error::UnknownZooEntry(_))));
        assert!(matches!(load_zoo("flat_randers", &params(&[("q", 1.0)])), Err(Error::UnknownParam(_))));
        assert!(matches!(load_zoo("flat_randers", &params(&[("b", 2.0)])), Err(Error::ParamOutOfRange { .. })));
        assert!(matches!(load_zoo("kerr_perturbation", &params(&[("M", 0.1)])), Err(Error::ParamOutOfRange { .. })));
    }

    #[test]
    fn flat_randers_values() {
        let l = load_default("flat_randers").unwrap();
        let z = [0.0, 0.0, 0.0];
        assert_eq!(l.eval_f64(&z, &[2.0, 1.0, 0.0]).unwrap(), -1.0);
        assert_eq!(l.eval_f64(&z, &[1.0, 1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn kerr_reference_value() {
        let l = load_default("kerr_perturbation").unwrap();
        let v = l.eval_f64(&[0.0, 4.0, PI / 2.0, 0.0], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((v + 0.5).abs() < 1e-15, "{v}");
        let eq = load_zoo("kerr_perturbation", &params(&[("equatorial", 1.0)])).unwrap();
        assert_eq!(eq.n, 2);
        let v = eq.eval_f64(&[0.0, 4.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!((v + 0.5).abs() < 1e-15, "{v}");
    }

    #[test]
    fn kerr_without_spin_has_no_cross_term() {
        let l = load_zoo("kerr_perturbation", &params(&[("a", 0.0)])).unwrap();
        let (_, b, _) = l.parts().unwrap();
        assert_eq!(b.expr.as_const(), Some(0.0));
    }

    #[test]
    fn rutz_without_deformation_is_schwarzschild() {
        let l = load_zoo("rutz", &params(&[("eps", 0.0)])).unwrap();
        let (r, th) = (5.0f64, 1.1f64);
        let z = [0.0, r, th, 0.3];
        let w = [1.3, 0.4, -0.2, 0.7];
        let h = 1.0 - 2.0 / r;
        let schw = -h * w[0] * w[0] + w[1] * w[1] / h + r * r * (w[2] * w[2] + th.sin().powi(2) * w[3] * w[3]);
        assert!((l.eval_f64(&z, &w).unwrap() - schw).abs() < 1e-13);
    }

    #[test]
    fn rutz_domain_excludes_radial_fiber() {
        let l = load_default("rutz").unwrap();
        let z = [0.0, 5.0, 1.0, 0.0];
        assert!(!l.admits(&z, &[1.0, 1.0, 0.0, 0.0]));
        assert!(l.admits(&z, &[1.0, 1.0, 0.1, 0.0]));
        let neg = load_zoo("rutz", &params(&[("eps", -0.2)])).unwrap();
        assert_eq!(neg.cone.kind, ConeKind::LowerHalf);
        assert_eq!(neg.y_field_sign, -1.0);
    }

    #[test]
    fn bogoslovsky_is_singular_at_u() {
        let l = load_default("bogoslovsky").unwrap();
        assert_eq!(l.eval_f64(&[0.0; 3], &[1.0, 0.0, 0.0]).unwrap(), -1.0);
        assert!(l.fiber_jet(&[0.0; 3], &[1.0, 1.0, 0.0]).is_err());
        assert!(l.fiber_jet(&[0.0; 3], &[1.0, 0.3, 0.1]).is_ok());
    }

    #[test]
    fn reference_field_is_timelike_everywhere() {
        for e in catalog() {
            let l = e.build(&Params::new()).unwrap();
            let mut z = vec![0.3];
            z.extend(l.sample_box.iter().map(|(lo, hi)| 0.5 * (lo + hi)));
            let mut w = vec![0.0; l.n + 1];
            w[0] = l.y_field_sign;
            let v = l.eval_f64(&z, &w).unwrap();
            assert!(v < 0.0, "{}: {v}", e.name);
            assert!((v + l.lambda_at(&z).unwrap()).abs() < 1e-14, "{}", e.name);
        }
    }
}
