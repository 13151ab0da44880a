//! Optical (Fermat) metrics, their static companions, causal classification and
//! the Legendre map of the reduced Lagrangian `H_α`.

use rayon::prelude::*;

use crate::ad::{Jet2, Scalar};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lagrangian::{base_to_z, make_stationary_splitting, run_jet, FiberLagrangian, ScalarField, SpacetimeLagrangian};
use crate::linalg::{norm, solve, sym_eigen};
use crate::sampling::SamplingPlan;
use crate::tensor::{b_hessian_report, SemidefiniteReport, SemidefiniteVerdict};
use crate::types::{ConeKind, ConeSpec};

/// `F_B`, `F_B⁻` and `G = sqrt(B² + ΛF²)` of a stationary splitting.
#[derive(Clone, Debug)]
pub struct OpticalMetricPair {
    pub f_b: FiberLagrangian,
    pub f_b_minus: FiberLagrangian,
    pub g_aux: FiberLagrangian,
    pub source: SpacetimeLagrangian,
}

/// Which optical metric an operation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpticalKind {
    FB,
    FBMinus,
    G,
}

impl std::fmt::Display for OpticalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FB => "F_B",
            Self::FBMinus => "F_B-",
            Self::G => "G",
        })
    }
}

pub fn optical_metrics(l: &SpacetimeLagrangian) -> Result<OpticalMetricPair> {
    let (lambda, b, f2) = l.parts()?;
    let lam = lambda.expr.clone();
    let bx = b.expr.clone();
    let g = (bx.clone().square() + lam.clone() * f2.expr.clone()).sqrt();
    let f_b = (bx.clone() + g.clone()) / lam.clone();
    let f_b_minus = (g.clone() - bx) / lam;
    Ok(OpticalMetricPair {
        f_b: FiberLagrangian::new(format!("{}:F_B", l.name), f_b, 1),
        f_b_minus: FiberLagrangian::new(format!("{}:F_B-", l.name), f_b_minus, 1),
        g_aux: FiberLagrangian::new(format!("{}:G", l.name), g, 1),
        source: l.clone(),
    })
}

impl OpticalMetricPair {
    pub fn metric(&self, kind: OpticalKind) -> &FiberLagrangian {
        match kind {
            OpticalKind::FB => &self.f_b,
            OpticalKind::FBMinus => &self.f_b_minus,
            OpticalKind::G => &self.g_aux,
        }
    }

    pub fn n(&self) -> usize {
        self.source.n
    }

    /// `(F_B, F_B⁻, G)` at `(x, v)`.
    pub fn values(&self, x: &[f64], v: &[f64]) -> Result<(f64, f64, f64)> {
        Ok((self.f_b.at(x, v)?, self.f_b_minus.at(x, v)?, self.g_aux.at(x, v)?))
    }

    /// Largest of `|ΛF_B − B − G|` and `|ΛF_B⁻ + B − G|`, relative to `max(1, |B|, G)`.
    pub fn pair_identity_residual(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let (lambda, b, _) = self.source.parts()?;
        let lam = lambda.at(x)?;
        let bv = b.at(x, v)?;
        let (fb, fbm, g) = self.values(x, v)?;
        let r = (lam * fb - bv - g).abs().max((lam * fbm + bv - g).abs());
        Ok(r / bv.abs().max(g).max(1.0))
    }

    /// `|L(F_B(v), v)|` and `|L(−F_B⁻(v), v)|`, relative to the lightlike scale.
    pub fn lightlike_residual(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let (fb, fbm, _) = self.values(x, v)?;
        let z = base_to_z(x);
        let mut worst = 0.0f64;
        for tau in [fb, -fbm] {
            let mut w = vec![tau];
            w.extend_from_slice(v);
            let r = self.source.eval_f64(&z, &w)?.abs() / causal_scale(&self.source, &z, &w)?;
            worst = worst.max(r);
        }
        Ok(worst)
    }

    /// Plot-ready samples of the unit-direction values at `x`.
    ///
    /// Directions are parametrized by one angle for `n ≤ 2` and by polar and
    /// azimuthal angles for `n = 3`.
    pub fn level_set_csv(&self, x: &[f64], n_dirs: usize) -> Result<String> {
        let n = self.n();
        let mut out = String::new();
        let mut dirs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        match n {
            1 => {
                out.push_str("angle,f_b,f_b_minus,g\n");
                dirs.push((vec![0.0], vec![1.0]));
                dirs.push((vec![std::f64::consts::PI], vec![-1.0]));
            }
            2 => {
                out.push_str("angle,f_b,f_b_minus,g\n");
                for k in 0..n_dirs {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / n_dirs as f64;
                    dirs.push((vec![a], vec![a.cos(), a.sin()]));
                }
            }
            3 => {
                out.push_str("polar,azimuth,f_b,f_b_minus,g\n");
                let rings = ((n_dirs as f64).sqrt().ceil() as usize).max(2);
                for i in 0..rings {
                    let p = std::f64::consts::PI * (i as f64 + 0.5) / rings as f64;
                    for j in 0..2 * rings {
                        let a = std::f64::consts::PI * j as f64 / rings as f64;
                        dirs.push((vec![p, a], vec![p.sin() * a.cos(), p.sin() * a.sin(), p.cos()]));
                    }
                }
            }
            _ => return Err(Error::Dimension { expected: 3, got: n }),
        }
        for (angles, v) in dirs {
            let (fb, fbm, g) = match self.values(x, &v) {
                Ok(t) => t,
                Err(Error::Ad(_)) => continue,
                Err(e) => return Err(e),
            };
            let a: Vec<String> = angles.iter().map(|c| format!("{c:.12e}")).collect();
            out.push_str(&format!("{},{fb:.12e},{fbm:.12e},{g:.12e}\n", a.join(",")));
        }
        Ok(out)
    }
}

/// `L_B = −τ² + F_B²` on the upper half cone and `L_B⁻ = −τ² + (F_B⁻)²` on the lower one.
pub fn static_lagrangians(pair: &OpticalMetricPair) -> Result<(SpacetimeLagrangian, SpacetimeLagrangian)> {
    let src = &pair.source;
    let build = |f: &FiberLagrangian, kind: ConeKind, tag: &str| -> Result<SpacetimeLagrangian> {
        let f2 = FiberLagrangian::new(format!("{}^2", f.name), f.expr.clone().square(), 2);
        let b = FiberLagrangian::new("0", Expr::c(0.0), 1);
        let mut l = make_stationary_splitting(ScalarField::new("1", Expr::c(1.0)), b, f2, ConeSpec::new(kind))?
            .named(format!("{}:{tag}", src.name));
        l.n = src.n;
        l.chart = src.chart.clone();
        l.sample_box = src.sample_box.clone();
        l.fiber_domain = src.fiber_domain.clone();
        l.axis_guard = src.axis_guard;
        Ok(l)
    };
    Ok((build(&pair.f_b, ConeKind::UpperHalf, "L_B")?, build(&pair.f_b_minus, ConeKind::LowerHalf, "L_B-")?))
}

// Hypotheses on B.

/// Sampled sign of `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BSign {
    /// `B` vanishes on every sample.
    Zero,
    NonNegative,
    NonPositive,
    Mixed,
}

/// Sampled status of the hypotheses on `B` for the optical metrics to be Finsler.
#[derive(Clone, Debug, PartialEq)]
pub struct FermatHypotheses {
    pub hessian: SemidefiniteReport,
    pub sign: BSign,
    /// Whether `n ≥ 3`, required for global bijectivity of the Legendre map.
    pub dim_at_least_3: bool,
}

impl FermatHypotheses {
    fn linear(&self) -> bool {
        self.hessian.verdict == SemidefiniteVerdict::Linear
    }

    /// Hypotheses for `F_B`: `∂²B ⪰ 0`, and `B ≥ 0` or `B` linear.
    pub fn f_b_holds(&self) -> bool {
        self.linear()
            || (self.hessian.verdict == SemidefiniteVerdict::PositiveSemiDef
                && matches!(self.sign, BSign::Zero | BSign::NonNegative))
    }

    /// Mirrored hypotheses for `F_B⁻`.
    pub fn f_b_minus_holds(&self) -> bool {
        self.linear()
            || (self.hessian.verdict == SemidefiniteVerdict::NegativeSemiDef
                && matches!(self.sign, BSign::Zero | BSign::NonPositive))
    }

    pub fn holds_for(&self, kind: OpticalKind) -> bool {
        match kind {
            OpticalKind::FB => self.f_b_holds(),
            OpticalKind::FBMinus => self.f_b_minus_holds(),
            OpticalKind::G => self.f_b_holds() || self.f_b_minus_holds(),
        }
    }

    /// Human-readable list of the failed hypotheses for `kind`.
    pub fn failures(&self, kind: OpticalKind) -> Vec<String> {
        let mut out = Vec::new();
        if self.holds_for(kind) {
            return out;
        }
        let (want_h, want_s) = match kind {
            OpticalKind::FBMinus => (SemidefiniteVerdict::NegativeSemiDef, "B <= 0"),
            _ => (SemidefiniteVerdict::PositiveSemiDef, "B >= 0"),
        };
        if self.hessian.verdict != want_h {
            out.push(format!("fiber Hessian of B is {}, need {want_h} or linear B", self.hessian.verdict));
        }
        let sign_ok = match kind {
            OpticalKind::FBMinus => matches!(self.sign, BSign::Zero | BSign::NonPositive),
            _ => matches!(self.sign, BSign::Zero | BSign::NonNegative),
        };
        if !sign_ok {
            out.push(format!("sampled sign of B is {:?}, need {want_s} or linear B", self.sign));
        }
        out
    }
}

pub fn fermat_hypotheses(l: &SpacetimeLagrangian, plan: &SamplingPlan, tol: f64) -> Result<FermatHypotheses> {
    let (_, b, _) = l.parts()?;
    let hessian = b_hessian_report(l, plan, tol)?;
    let pts = plan.draw_space(l);
    let vals: Vec<f64> = pts.par_iter().map(|(z, v)| b.at(&z[1..], v)).collect::<Result<_>>()?;
    let eps = 1e-12;
    let pos = vals.iter().any(|&v| v > eps);
    let neg = vals.iter().any(|&v| v < -eps);
    let sign = match (pos, neg) {
        (false, false) => BSign::Zero,
        (true, false) => BSign::NonNegative,
        (false, true) => BSign::NonPositive,
        (true, true) => BSign::Mixed,
    };
    Ok(FermatHypotheses { hessian, sign, dim_at_least_3: l.n >= 3 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinslerReport {
    pub samples: usize,
    /// Smallest value on sampled unit vectors; must be positive.
    pub min_value: f64,
    /// Largest `|F(λv) − λF(v)| / max(1, λF(v))` over samples.
    pub homogeneity_residual: f64,
    /// Smallest eigenvalue of `½∂²_yy F²` on sampled unit vectors.
    pub min_eigenvalue: f64,
    pub passed: bool,
}

/// Samples positivity, homogeneity and strong convexity of a degree-1 metric.
pub fn verify_finsler(f1: &FiberLagrangian, l: &SpacetimeLagrangian, plan: &SamplingPlan) -> Result<FinslerReport> {
    if f1.degree != 1 {
        return Err(Error::Config(format!("{} is not 1-homogeneous", f1.name)));
    }
    let pts = plan.draw_space(l);
    if pts.is_empty() {
        return Err(Error::NoData("no admissible fiber samples".into()));
    }
    let rows: Vec<(f64, f64, f64)> = pts
        .par_iter()
        .enumerate()
        .map(|(i, (z, v))| {
            let x = &z[1..];
            let val = f1.at(x, v)?;
            let lam = 0.25 + (i % 7) as f64;
            let scaled: Vec<f64> = v.iter().map(|c| lam * c).collect();
            let hom = (f1.at(x, &scaled)? - lam * val).abs() / (lam * val.abs()).max(1.0);
            let min_ev = half_hessian_of_square(f1, x, v)?.0;
            Ok((val, hom, min_ev))
        })
        .collect::<Result<_>>()?;
    let min_value = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.0));
    let homogeneity_residual = rows.iter().fold(0.0f64, |m, r| m.max(r.1));
    let min_eigenvalue = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.2));
    Ok(FinslerReport {
        samples: rows.len(),
        min_value,
        homogeneity_residual,
        min_eigenvalue,
        passed: min_value > 0.0 && min_eigenvalue > 0.0 && homogeneity_residual <= 1e-10,
    })
}

/// Smallest eigenvalue and the matrix of `½∂²_yy F²` at `(x, v)`.
pub fn half_hessian_of_square(f1: &FiberLagrangian, x: &[f64], v: &[f64]) -> Result<(f64, nalgebra::DMatrix<f64>)> {
    let z: Vec<Jet2> = base_to_z(x).into_iter().map(Jet2::constant).collect();
    let jet = run_jet(
        |vv| {
            let f = f1.eval(&z, vv)?;
            Ok(f.clone() * f * 0.5)
        },
        v,
    )?;
    let h = jet.hessian_matrix();
    let (ev, _) = sym_eigen(&h);
    Ok((ev[0], h))
}

/// Checks the hypotheses for `kind` and then samples the Finsler conditions.
pub fn verify_optical(
    pair: &OpticalMetricPair,
    kind: OpticalKind,
    plan: &SamplingPlan,
    tol: f64,
) -> Result<(FermatHypotheses, FinslerReport)> {
    let hyp = fermat_hypotheses(&pair.source, plan, tol)?;
    let failed = hyp.failures(kind);
    if !failed.is_empty() {
        return Err(Error::HypothesisViolated(format!("{kind}: {}", failed.join("; "))));
    }
    let rep = verify_finsler(pair.metric(kind), &pair.source, plan)?;
    Ok((hyp, rep))
}

// Causal classification.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CausalKind {
    Timelike,
    Lightlike,
    Spacelike,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Future,
    Past,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CausalClass {
    pub kind: CausalKind,
    pub orientation: Orientation,
}

impl std::fmt::Display for CausalClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}/{:?}", self.kind, self.orientation)
    }
}

/// Relative tolerance for the lightlike band.
pub const LIGHTLIKE_TOL: f64 = 1e-10;

/// `max(1, Λτ², |F²|)`.
pub fn causal_scale(l: &SpacetimeLagrangian, z: &[f64], w: &[f64]) -> Result<f64> {
    let (lambda, _, f2) = l.parts()?;
    let lam = lambda.eval(z)?;
    Ok((lam * w[0] * w[0]).abs().max(f2.eval(z, &w[1..])?.abs()).max(1.0))
}

/// Both classifications of `w` at `z`: by the sign of `L` and by the `F_B`, `F_B⁻` thresholds.
pub fn classify_both(pair: &OpticalMetricPair, z: &[f64], w: &[f64]) -> Result<(CausalClass, CausalClass, f64)> {
    let l = &pair.source;
    let tau = w[0];
    let v = &w[1..];
    let x = &z[1..];
    let zero = CausalClass { kind: CausalKind::Zero, orientation: Orientation::None };
    if w.iter().all(|c| *c == 0.0) {
        return Ok((zero, zero, 0.0));
    }
    let tol = LIGHTLIKE_TOL * causal_scale(l, z, w)?;
    let lv = l.eval_f64(z, w)?;
    let by_sign = if lv < -tol {
        CausalKind::Timelike
    } else if lv <= tol {
        CausalKind::Lightlike
    } else {
        CausalKind::Spacelike
    };
    let (fb, fbm, g) = pair.values(x, v)?;
    // Near either root L ≈ ∓2G(τ − root), so the L band maps to a τ band of half-width tol/(2G).
    let dt = if g > 0.0 { tol / (2.0 * g) } else { 0.0 };
    let (future_side, past_side) = (tau >= fb - dt, tau <= -fbm + dt);
    let by_threshold = if g == 0.0 {
        CausalKind::Timelike
    } else if (tau - fb).abs() <= dt || (tau + fbm).abs() <= dt {
        CausalKind::Lightlike
    } else if future_side || past_side {
        CausalKind::Timelike
    } else {
        CausalKind::Spacelike
    };
    let orient = |kind: CausalKind| -> Orientation {
        if kind == CausalKind::Spacelike || kind == CausalKind::Zero {
            Orientation::None
        } else if future_side && l.cone.admits_future() {
            Orientation::Future
        } else if past_side && l.cone.admits_past() {
            Orientation::Past
        } else {
            Orientation::None
        }
    };
    Ok((
        CausalClass { kind: by_sign, orientation: orient(by_sign) },
        CausalClass { kind: by_threshold, orientation: orient(by_threshold) },
        lv / tol,
    ))
}

/// Classifies `w` at `z`, failing if the two criteria disagree outside twice the lightlike band.
pub fn classify_causal(pair: &OpticalMetricPair, z: &[f64], w: &[f64]) -> Result<CausalClass> {
    let (a, b, rel) = classify_both(pair, z, w)?;
    if a != b && rel.abs() > 2.0 {
        return Err(Error::InconsistentClassification { by_sign: a.to_string(), by_threshold: b.to_string() });
    }
    Ok(a)
}

// Legendre map of H_α = −αB/Λ + ½(B²/Λ + F²).

fn h_alpha<S: Scalar>(l: &SpacetimeLagrangian, alpha: f64, z: &[S], v: &[S]) -> Result<S> {
    let (lambda, b, f2) = l.parts()?;
    let lam = lambda.eval(z)?;
    let bv = b.eval(z, v)?;
    let fv = f2.eval(z, v)?;
    let inv = lam.recip()?;
    Ok(bv.clone() * inv.clone() * (-alpha) + (bv.clone() * bv * inv + fv) * 0.5)
}

/// Value, gradient and Hessian of `H_α(x, ·)` at `v`.
pub fn h_alpha_jet(l: &SpacetimeLagrangian, alpha: f64, x: &[f64], v: &[f64]) -> Result<Jet2> {
    let z: Vec<Jet2> = base_to_z(x).into_iter().map(Jet2::constant).collect();
    run_jet(|vv| h_alpha(l, alpha, &z, vv), v)
}

/// Pointwise check of the Legendre hypotheses at `(x, v)`.
fn legendre_hypotheses(l: &SpacetimeLagrangian, alpha: f64, x: &[f64], v: &[f64]) -> Result<()> {
    let (_, b, _) = l.parts()?;
    let jet = b.fiber_jet(x, v)?;
    let (ev, _) = sym_eigen(&jet.hessian_matrix());
    let s = jet.real().abs().max(1.0);
    let tol = 1e-10 * s;
    let linear = ev.iter().all(|e| e.abs() <= tol);
    if linear {
        return Ok(());
    }
    let upper = alpha <= 0.0 && jet.real() >= -tol && ev[0] >= -tol;
    let lower = alpha >= 0.0 && jet.real() <= tol && ev[ev.len() - 1] <= tol;
    if upper || lower {
        Ok(())
    } else {
        Err(Error::HypothesisViolated(format!(
            "Legendre map at alpha = {alpha}: B = {:.3e}, Hessian eigenvalues in [{:.3e}, {:.3e}]",
            jet.real(),
            ev[0],
            ev[ev.len() - 1]
        )))
    }
}

/// `(∂_y H_α)_v`.
pub fn legendre_map(l: &SpacetimeLagrangian, alpha: f64, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if norm(v) == 0.0 {
        return Err(Error::ZeroVector);
    }
    legendre_hypotheses(l, alpha, x, v)?;
    Ok(h_alpha_jet(l, alpha, x, v)?.gradient().to_vec())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LegendreInverse {
    pub v: Vec<f64>,
    /// `‖∂_yH_α(v) − p‖ / ‖p‖`.
    pub residual: f64,
    pub iterations: usize,
    /// Whether `n ≥ 3`, under which the map is globally bijective.
    pub global_bijectivity: bool,
}

pub const LEGENDRE_MAX_ITER: usize = 100;

/// Solves `∂_yH_α(v) = p` by damped Newton iteration.
pub fn legendre_invert(l: &SpacetimeLagrangian, alpha: f64, x: &[f64], p: &[f64]) -> Result<LegendreInverse> {
    let pn = norm(p);
    if pn == 0.0 {
        return Err(Error::ZeroVector);
    }
    // Quadratic model at v = p gives the exact inverse when H_α is quadratic in v.
    let h0 = h_alpha_jet(l, alpha, x, p)?.hessian_matrix();
    let mut v = solve(&h0, p).filter(|v| norm(v) > 0.0).unwrap_or_else(|| p.to_vec());
    let residual_at = |v: &[f64]| -> Result<(Vec<f64>, f64, Jet2)> {
        let jet = h_alpha_jet(l, alpha, x, v)?;
        let r: Vec<f64> = jet.gradient().iter().zip(p).map(|(g, q)| g - q).collect();
        let rn = norm(&r);
        Ok((r, rn, jet))
    };
    let (mut r, mut rn, mut jet) = residual_at(&v)?;
    let mut it = 0;
    while rn > 1e-15 * pn && it < LEGENDRE_MAX_ITER {
        it += 1;
        let step = solve(&jet.hessian_matrix(), &r).ok_or(Error::NewtonDivergence(rn / pn))?;
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = v.iter().zip(&step).map(|(a, d)| a - lam * d).collect();
            if norm(&cand) > 0.0 {
                if let Ok((rc, rcn, jc)) = residual_at(&cand) {
                    if rcn < rn {
                        v = cand;
                        r = rc;
                        rn = rcn;
                        jet = jc;
                        accepted = true;
                        break;
                    }
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let residual = rn / pn;
    if residual > 1e-10 {
        return Err(Error::NewtonDivergence(residual));
    }
    legendre_hypotheses(l, alpha, x, &v)?;
    Ok(LegendreInverse { v, residual, iterations: it, global_bijectivity: l.n >= 3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::fd_jet2_default;
    use crate::zoo::{load_default, load_zoo, params};

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn flat_randers_values() {
        let pair = optical_metrics(&load_default("flat_randers").unwrap()).unwrap();
        let (fb, fbm, g) = pair.values(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((g - 1.25f64.sqrt()).abs() < 1e-15);
        assert!((fb - PHI).abs() < 1e-15);
        assert!((fbm - (PHI - 1.0)).abs() < 1e-15);
        assert_eq!(pair.values(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_b_gives_f_over_sqrt_lambda() {
        let l = load_default("static_warped").unwrap();
        let pair = optical_metrics(&l).unwrap();
        let (lambda, _, f2) = l.parts().unwrap();
        let x = [0.7, -0.2];
        let v = [0.3, 0.8];
        let expect = (f2.at(&x, &v).unwrap() / lambda.at(&x).unwrap()).sqrt();
        let (fb, fbm, _) = pair.values(&x, &v).unwrap();
        assert!((fb - expect).abs() < 1e-14 && (fbm - expect).abs() < 1e-14);
    }

    #[test]
    fn static_lagrangian_values() {
        let pair = optical_metrics(&load_default("flat_randers").unwrap()).unwrap();
        let (lb, lbm) = static_lagrangians(&pair).unwrap();
        let z = [0.0, 0.0, 0.0];
        assert!((lb.eval_f64(&z, &[2.0, 1.0, 0.0]).unwrap() - (-4.0 + PHI * PHI)).abs() < 1e-12);
        assert!(lb.eval_f64(&z, &[PHI, 1.0, 0.0]).unwrap().abs() < 1e-14);
        assert_eq!(lb.eval_f64(&z, &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(lb.cone.kind, ConeKind::UpperHalf);
        assert_eq!(lbm.cone.kind, ConeKind::LowerHalf);
    }

    #[test]
    fn causal_examples() {
        let pair = optical_metrics(&load_default("flat_randers").unwrap()).unwrap();
        let z = [0.0, 0.0, 0.0];
        let c = classify_causal(&pair, &z, &[2.0, 1.0, 0.0]).unwrap();
        assert_eq!(c, CausalClass { kind: CausalKind::Timelike, orientation: Orientation::Future });
        let c = classify_causal(&pair, &z, &[PHI, 1.0, 0.0]).unwrap();
        assert_eq!(c, CausalClass { kind: CausalKind::Lightlike, orientation: Orientation::Future });
        let c = classify_causal(&pair, &z, &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(c, CausalClass { kind: CausalKind::Spacelike, orientation: Orientation::None });
        let c = classify_causal(&pair, &z, &[-1.0, 1.0, 0.0]).unwrap();
        assert_eq!(c, CausalClass { kind: CausalKind::Timelike, orientation: Orientation::Past });
        let c = classify_causal(&pair, &z, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(c.orientation, Orientation::None);
    }

    #[test]
    fn upper_half_cone_has_no_past() {
        let pair = optical_metrics(&load_default("randers_type").unwrap()).unwrap();
        let c = classify_causal(&pair, &[0.0, 0.1, 0.1], &[-5.0, 1.0, 0.0]).unwrap();
        assert_eq!(c, CausalClass { kind: CausalKind::Timelike, orientation: Orientation::None });
    }

    #[test]
    fn hypotheses_of_entries() {
        let plan = SamplingPlan::new(2, 200);
        let h = fermat_hypotheses(&load_default("randers_type").unwrap(), &plan, 1e-9).unwrap();
        assert!(h.f_b_holds() && !h.f_b_minus_holds());
        let h = fermat_hypotheses(&load_default("indefinite_b").unwrap(), &plan, 1e-9).unwrap();
        assert!(!h.holds_for(OpticalKind::G));
        let pair = optical_metrics(&load_default("indefinite_b").unwrap()).unwrap();
        assert!(matches!(verify_optical(&pair, OpticalKind::FB, &plan, 1e-9), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn euclidean_hessian_is_identity() {
        let l = load_zoo("flat_randers", &params(&[("b", 0.0)])).unwrap();
        let pair = optical_metrics(&l).unwrap();
        let (_, h) = half_hessian_of_square(&pair.f_b, &[0.3, 0.1], &[0.6, -0.8]).unwrap();
        assert!((h - nalgebra::DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn legendre_identity_and_fd_oracle() {
        let l = load_zoo("flat_randers", &params(&[("b", 0.0)])).unwrap();
        let p = legendre_map(&l, 0.0, &[0.0, 0.0], &[0.3, -0.7]).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-15 && (p[1] + 0.7).abs() < 1e-15);
        let inv = legendre_invert(&l, 0.0, &[0.0, 0.0], &[0.3, -0.7]).unwrap();
        assert!((inv.v[0] - 0.3).abs() < 1e-14 && (inv.v[1] + 0.7).abs() < 1e-14);
        assert!(!inv.global_bijectivity);

        let l = load_default("flat_randers").unwrap();
        let v = [1.0, 0.0];
        let p = legendre_map(&l, -1.0, &[0.0, 0.0], &v).unwrap();
        let fd = fd_jet2_default(|vv| h_alpha(&l, -1.0, &[0.0, 0.0, 0.0], vv).map_err(|_| crate::AdError::UnboundVariable("h".into())), &v)
            .unwrap();
        for i in 0..2 {
            assert!((p[i] - fd.gradient()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn legendre_degree_bookkeeping() {
        let l = load_default("randers_type").unwrap();
        let pair = optical_metrics(&l).unwrap();
        let (lambda, b, _) = l.parts().unwrap();
        let x = [0.4, -0.3];
        let v = [0.8, 0.5];
        let alpha = -0.7;
        let lam = lambda.at(&x).unwrap();
        let db = b.fiber_jet(&x, &v).unwrap().gradient().to_vec();
        let g = &pair.g_aux;
        let z: Vec<Jet2> = base_to_z(&x).into_iter().map(Jet2::constant).collect();
        let dg2 = run_jet(|vv| g.eval(&z, vv).map(|s| s.clone() * s), &v).unwrap().gradient().to_vec();
        for s in [0.5, 2.0, 7.0] {
            let sv: Vec<f64> = v.iter().map(|c| s * c).collect();
            let p = legendre_map(&l, alpha, &x, &sv).unwrap();
            for i in 0..2 {
                let expect = -(alpha / lam) * db[i] + s * dg2[i] / (2.0 * lam);
                assert!((p[i] - expect).abs() < 1e-12, "{s} {i}");
            }
        }
    }

    #[test]
    fn legendre_rejects_violations() {
        let l = load_default("randers_type").unwrap();
        assert!(matches!(legendre_map(&l, 1.0, &[0.0, 0.0], &[1.0, 0.2]), Err(Error::HypothesisViolated(_))));
        assert!(matches!(legendre_map(&l, -1.0, &[0.0, 0.0], &[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn level_set_csv_shape() {
        let pair = optical_metrics(&load_default("flat_randers").unwrap()).unwrap();
        let csv = pair.level_set_csv(&[0.0, 0.0], 8).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "angle,f_b,f_b_minus,g");
        assert_eq!(lines.len(), 9);
    }
}
