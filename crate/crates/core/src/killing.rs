//! Complete lifts, Killing residuals, Lie derivatives of `g̃`, flow isometry and
//! static-splitting conditions.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::ad::{jet2, Dual, Jet2};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lagrangian::SpacetimeLagrangian;
use crate::linalg::{max_abs, norm, sym_eigen};
use crate::ode::{integrate, Control, OdeOptions};
use crate::sampling::SamplingPlan;
use crate::tensor::fundamental_tensor_at;
use crate::types::{SpacetimePoint, SpacetimeVector, SymBilinear};

/// Vector field on `ℝ × M` with components `X^h(t, x)` given as expressions.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub name: String,
    pub comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(name: impl Into<String>, comps: Vec<Expr>) -> Self {
        Self { name: name.into(), comps }
    }

    /// `∂_t` on an `n`-dimensional base.
    pub fn dt(n: usize) -> Self {
        Self::coordinate(n, 0).renamed("dt")
    }

    /// `t ∂_t`.
    pub fn t_dt(n: usize) -> Self {
        let mut comps = vec![Expr::c(0.0); n + 1];
        comps[0] = Expr::t();
        Self::new("t_dt", comps)
    }

    /// `∂/∂z^i`, with `z^0 = t`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut comps = vec![Expr::c(0.0); n + 1];
        comps[i] = Expr::c(1.0);
        Self::new(format!("d{i}"), comps)
    }

    /// Components parsed from expressions in `t, x1 … xn`.
    pub fn parse(name: impl Into<String>, srcs: &[&str]) -> Result<Self> {
        let comps = srcs.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        for c in &comps {
            let u = c.usage();
            if u.tau || u.max_y.is_some() {
                return Err(Error::Config("vector field components must depend on t and x only".into()));
            }
        }
        Ok(Self::new(name, comps))
    }

    fn renamed(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.comps.iter().map(|c| Ok(c.eval_f64(z, &[])?)).collect()
    }

    /// `J[h][i] = ∂X^h/∂z^i`.
    pub fn jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let d = z.len();
        let mut j = DMatrix::zeros(self.dim(), d);
        for (h, c) in self.comps.iter().enumerate() {
            let jet = jet2(|zz| c.eval(zz, &[]), z)?;
            for i in 0..d {
                j[(h, i)] = jet.gradient()[i];
            }
        }
        Ok(j)
    }

    pub fn at(&self, z: &SpacetimePoint) -> Result<SpacetimeVector> {
        Ok(SpacetimeVector::from_slice(&self.eval(&z.to_vec())?))
    }
}

fn check_dims(k: &VectorField, l: &SpacetimeLagrangian) -> Result<()> {
    if k.dim() != l.n + 1 {
        return Err(Error::Dimension { expected: l.n + 1, got: k.dim() });
    }
    Ok(())
}

/// `X^c(L) = X^h ∂L/∂z^h + (∂X^h/∂z^i) w^i ∂L/∂w^h`.
pub fn complete_lift_apply(k: &VectorField, l: &SpacetimeLagrangian, z: &[f64], w: &[f64]) -> Result<f64> {
    check_dims(k, l)?;
    l.check_admits(z, w)?;
    let d = l.n + 1;
    let jet = l.full_jet(z, w)?;
    let g = jet.gradient();
    let x = k.eval(z)?;
    let dx = k.jacobian(z)?;
    let mut out = 0.0;
    for h in 0..d {
        let lift_w: f64 = (0..d).map(|i| dx[(h, i)] * w[i]).sum();
        out += x[h] * g[h] + lift_w * g[d + h];
    }
    Ok(out)
}

pub fn complete_lift(k: &VectorField, l: &SpacetimeLagrangian, z: &SpacetimePoint, w: &SpacetimeVector) -> Result<f64> {
    complete_lift_apply(k, l, &z.to_vec(), &w.to_vec())
}

#[derive(Clone, Debug, PartialEq)]
pub struct KillingReport {
    pub worst: f64,
    pub mean: f64,
    /// Largest `|K^c(L)| / scale` over samples.
    pub worst_scaled: f64,
    pub samples: usize,
    pub killing: bool,
}

/// Threshold on `|K^c(L)| / scale` for the Killing verdict.
pub const KILLING_TOL: f64 = 1e-10;

pub fn killing_residual(k: &VectorField, l: &SpacetimeLagrangian, plan: &SamplingPlan) -> Result<KillingReport> {
    check_dims(k, l)?;
    let samples = plan.draw(l);
    if samples.is_empty() {
        return Err(Error::NoData("sampler produced no admissible vectors".into()));
    }
    let res: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|s| {
            let r = complete_lift_apply(k, l, &s.z, &s.w)?.abs();
            Ok((r, r / l.scale(&s.z, &s.w)))
        })
        .collect::<Result<_>>()?;
    let worst = res.iter().fold(0.0f64, |m, r| m.max(r.0));
    let worst_scaled = res.iter().fold(0.0f64, |m, r| m.max(r.1));
    let mean = res.iter().map(|r| r.0).sum::<f64>() / res.len() as f64;
    Ok(KillingReport { worst, mean, worst_scaled, samples: res.len(), killing: worst_scaled <= KILLING_TOL })
}

/// `(ℒ_K g̃)_{lj} = K^c(g̃_{lj}) + ∂_l K^h g̃_{hj} + ∂_j K^h g̃_{lh}`.
///
/// `K^c(g̃_{lj})` is the derivative of the fiber Hessian along the lifted
/// direction `(K(z), DK(z)·w)`, computed exactly by running the second-order
/// jet over dual numbers that carry that direction.
pub fn lie_derivative_components(k: &VectorField, l: &SpacetimeLagrangian, z: &[f64], w: &[f64]) -> Result<SymBilinear> {
    check_dims(k, l)?;
    l.check_admits(z, w)?;
    let d = l.n + 1;
    let x = k.eval(z)?;
    let dx = k.jacobian(z)?;
    let lift_w: Vec<f64> = (0..d).map(|h| (0..d).map(|i| dx[(h, i)] * w[i]).sum()).collect();
    let zc: Vec<Jet2<Dual>> = (0..d).map(|i| Jet2::constant(Dual::new(z[i], x[i]))).collect();
    let wv: Vec<Jet2<Dual>> = (0..d).map(|i| Jet2::variable(Dual::new(w[i], lift_w[i]), i, d)).collect();
    let jet = l.eval(&zc, &wv)?;
    let g = |a: usize, b: usize| 0.5 * jet.hessian(a, b).re;
    Ok(SymBilinear::from_fn(d, |a, b| {
        let lifted = 0.5 * jet.hessian(a, b).eps;
        let mut s = lifted;
        for h in 0..d {
            s += dx[(h, a)] * g(h, b) + dx[(h, b)] * g(a, h);
        }
        s
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsometryReport {
    /// Largest `|g̃_{dψ(w)}(dψ eᵢ, dψ eⱼ) − g̃_w(eᵢ, eⱼ)| / max(1, ‖g̃_w‖)` over the sampled times.
    pub max_deviation: f64,
    pub t_samples: Vec<f64>,
    pub deviations: Vec<f64>,
}

/// Integrates the flow of `K` and its variational equation from `z0`, and
/// compares `g̃` pulled back along the flow with `g̃` at the start.
pub fn isometry_flow_check(
    k: &VectorField,
    l: &SpacetimeLagrangian,
    z0: &[f64],
    w: &[f64],
    t_max: f64,
    steps: usize,
    opts: &OdeOptions,
) -> Result<IsometryReport> {
    check_dims(k, l)?;
    let d = l.n + 1;
    let g0 = fundamental_tensor_at(l, z0, w)?;
    let g0_scale = g0.max_abs().max(1.0);
    let mut y0 = z0.to_vec();
    for r in 0..d {
        for c in 0..d {
            y0.push(if r == c { 1.0 } else { 0.0 });
        }
    }
    let marks: Vec<f64> = (1..=steps.max(1)).map(|i| t_max * i as f64 / steps.max(1) as f64).collect();
    let mut t_samples = Vec::new();
    let mut deviations = Vec::new();
    let mut failure: Option<Error> = None;
    integrate(
        |_, y, dy| {
            let z = &y[..d];
            let kz = k.eval(z)?;
            let j = k.jacobian(z)?;
            dy[..d].copy_from_slice(&kz);
            // Φ' = DK(z) Φ with Φ stored row-major.
            for r in 0..d {
                for c in 0..d {
                    dy[d + r * d + c] = (0..d).map(|m| j[(r, m)] * y[d + m * d + c]).sum();
                }
            }
            Ok(())
        },
        0.0,
        &y0,
        t_max,
        &marks,
        opts,
        |t, y, at_mark| {
            let z = &y[..d];
            if !l.in_chart(&z[1..]) {
                failure = Some(Error::FlowEscape(t));
                return Ok(Control::Stop);
            }
            if !at_mark {
                return Ok(Control::Continue);
            }
            let phi = DMatrix::from_row_slice(d, d, &y[d..]);
            let wt: Vec<f64> = (0..d).map(|r| (0..d).map(|c| phi[(r, c)] * w[c]).sum()).collect();
            if !l.admits(z, &wt) {
                failure = Some(Error::ConeExit(t));
                return Ok(Control::Stop);
            }
            let gt = fundamental_tensor_at(l, z, &wt)?;
            let pulled = phi.transpose() * gt.matrix() * &phi;
            let dev = (pulled - g0.matrix()).amax() / g0_scale;
            t_samples.push(t);
            deviations.push(dev);
            Ok(Control::Continue)
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let max_deviation = deviations.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(IsometryReport { max_deviation, t_samples, deviations })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StaticVerdict {
    Static,
    StationaryNonstatic,
    Inconclusive,
}

impl std::fmt::Display for StaticVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Static => "static",
            Self::StationaryNonstatic => "stationary-nonstatic",
            Self::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticRow {
    pub z: Vec<f64>,
    pub k: Vec<f64>,
    pub alpha: Vec<f64>,
    pub k_in_t: bool,
    /// Mismatch of one-sided first derivatives of `L` at `K_z`.
    pub c1_at_k: f64,
    /// Mismatch of one-sided second differences of `L` across the time axis.
    pub c2_across_t: f64,
    pub cond_a: bool,
    pub cond_b: f64,
    pub cond_c: f64,
    pub frobenius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticCheckReport {
    pub cond_a: bool,
    /// Largest relative `c1_at_k` over samples.
    pub cond_a_residual: f64,
    pub cond_b: f64,
    pub cond_c: f64,
    pub frobenius: f64,
    pub samples: usize,
    pub rows: Vec<StaticRow>,
    pub verdict: StaticVerdict,
}

impl StaticCheckReport {
    pub const CSV_HEADER: &'static str = "z,k,alpha,k_in_t,c1_at_k,c2_across_t,cond_a,cond_b,cond_c,frobenius";

    pub fn to_csv(&self) -> String {
        use crate::tensor::join;
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6e},{:.6e},{},{:.6e},{:.6e},{:.6e}\n",
                join(&r.z),
                join(&r.k),
                join(&r.alpha),
                r.k_in_t,
                r.c1_at_k,
                r.c2_across_t,
                r.cond_a,
                r.cond_b,
                r.cond_c,
                r.frobenius
            ));
        }
        out
    }
}

/// Thresholds for [`static_conditions_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaticTolerances {
    /// Relative threshold for conditions (b) and (c).
    pub splitting: f64,
    /// Threshold on the largest component of `α ∧ dα` relative to `max(1, |α|²)`.
    pub frobenius: f64,
    /// One-sided first-derivative agreement required at `K_z`.
    pub c1: f64,
    /// One-sided second-difference agreement across the time axis.
    pub c2: f64,
    /// Step for the exterior derivative of `α`, relative to the chart scale.
    pub d_alpha_step: f64,
    /// Sampled vectors of the distribution per base point.
    pub per_point: usize,
}

impl Default for StaticTolerances {
    fn default() -> Self {
        Self { splitting: 1e-9, frobenius: 1e-7, c1: 1e-6, c2: 1e-4, d_alpha_step: 1e-5, per_point: 8 }
    }
}

/// Whether `k` lies on the time axis.
fn on_time_axis(k: &[f64]) -> bool {
    norm(&k[1..]) <= 1e-8 * norm(k).max(f64::MIN_POSITIVE)
}

/// One-sided difference mismatches of `f(h) = L(z, base + h·dir)` at `h = 0`:
/// first derivatives by second-order one-sided stencils and second differences.
fn one_sided_mismatch(l: &SpacetimeLagrangian, z: &[f64], base: &[f64], dir: &[f64], h: f64) -> Result<(f64, f64)> {
    let f = |s: f64| -> Result<f64> {
        let w: Vec<f64> = base.iter().zip(dir).map(|(b, d)| b + s * d).collect();
        l.eval_f64(z, &w)
    };
    let (f0, fp1, fp2, fm1, fm2) = (f(0.0)?, f(h)?, f(2.0 * h)?, f(-h)?, f(-2.0 * h)?);
    let d_plus = (-3.0 * f0 + 4.0 * fp1 - fp2) / (2.0 * h);
    let d_minus = (3.0 * f0 - 4.0 * fm1 + fm2) / (2.0 * h);
    let s_plus = (fp2 - 2.0 * fp1 + f0) / (h * h);
    let s_minus = (fm2 - 2.0 * fm1 + f0) / (h * h);
    Ok(((d_plus - d_minus).abs(), (s_plus - s_minus).abs()))
}

/// `α = ½ ∂_ż L` at `K_z`.
fn alpha_at(l: &SpacetimeLagrangian, z: &[f64], kz: &[f64]) -> Result<Vec<f64>> {
    let d = kz.len();
    if on_time_axis(kz) {
        if let Ok((_, b, _)) = l.parts() {
            // On the axis: ½∂_τL = −Λk, ½∂_vL = k·dB₀, where dB₀ is the Gateaux
            // derivative of B at 0 (its odd part, exact when B is linear).
            let k0 = kz[0];
            let lam = l.lambda_at(z)?;
            let x = &z[1..];
            let mut a = vec![-lam * k0];
            for i in 0..d - 1 {
                let mut e = vec![0.0; d - 1];
                e[i] = 1.0;
                let bp = b.at(x, &e)?;
                e[i] = -1.0;
                let bm = b.at(x, &e)?;
                a.push(k0 * 0.5 * (bp - bm));
            }
            return Ok(a);
        }
    }
    match l.fiber_gradient(z, kz) {
        Ok(g) => Ok(g.into_iter().map(|c| 0.5 * c).collect()),
        Err(_) => {
            // Richardson-extrapolated central differences.
            let scale = norm(kz).max(1.0);
            let h = 1e-3 * scale;
            let mut a = Vec::with_capacity(d);
            for i in 0..d {
                let c = |s: f64| -> Result<f64> {
                    let mut wp = kz.to_vec();
                    wp[i] += s;
                    let mut wm = kz.to_vec();
                    wm[i] -= s;
                    Ok((l.eval_f64(z, &wp)? - l.eval_f64(z, &wm)?) / (2.0 * s))
                };
                let (d1, d2) = (c(h)?, c(h / 2.0)?);
                a.push(0.5 * (4.0 * d2 - d1) / 3.0);
            }
            Ok(a)
        }
    }
}

/// Orthonormal basis of `ker α` from the spectral decomposition of `I − α̂α̂ᵀ`.
pub fn kernel_basis(alpha: &[f64]) -> Vec<Vec<f64>> {
    let d = alpha.len();
    let n = norm(alpha);
    if n == 0.0 {
        return (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    }
    let a: Vec<f64> = alpha.iter().map(|c| c / n).collect();
    let p = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 } - a[i] * a[j]);
    let (ev, vecs) = sym_eigen(&p);
    (0..d).filter(|&c| ev[c] > 1.0 - 1e-10).map(|c| vecs.column(c).iter().copied().collect()).collect()
}

/// Largest component of `α ∧ dα` at `z`, with `dα` by central differences.
fn frobenius_residual(l: &SpacetimeLagrangian, k: &VectorField, z: &[f64], step: f64) -> Result<(Vec<f64>, f64)> {
    let d = z.len();
    let alpha_field = |zz: &[f64]| -> Result<Vec<f64>> { alpha_at(l, zz, &k.eval(zz)?) };
    let a = alpha_field(z)?;
    let h = step * max_abs(z).max(1.0);
    // da[j][i] = ∂_j α_i
    let mut da = vec![vec![0.0; d]; d];
    for (j, row) in da.iter_mut().enumerate() {
        let mut zp = z.to_vec();
        zp[j] += h;
        let mut zm = z.to_vec();
        zm[j] -= h;
        let (ap, am) = (alpha_field(&zp)?, alpha_field(&zm)?);
        for i in 0..d {
            row[i] = (ap[i] - am[i]) / (2.0 * h);
        }
    }
    let dalpha = |j: usize, kk: usize| da[j][kk] - da[kk][j];
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i + 1..d {
            for kk in j + 1..d {
                let c = a[i] * dalpha(j, kk) - a[j] * dalpha(i, kk) + a[kk] * dalpha(i, j);
                worst = worst.max(c.abs());
            }
        }
    }
    let s = norm(&a).powi(2).max(1.0);
    Ok((a, worst / s))
}

/// Checks conditions (a), (b), (c) and integrability of `ker ∂_ż L(K)` at sampled points.
pub fn static_conditions_check(
    k: &VectorField,
    l: &SpacetimeLagrangian,
    plan: &SamplingPlan,
    tol: &StaticTolerances,
) -> Result<StaticCheckReport> {
    use rand::SeedableRng;
    check_dims(k, l)?;
    let d = l.n + 1;
    let mut rng = plan.rng();
    let mut jobs = Vec::with_capacity(plan.n_samples);
    for i in 0..plan.n_samples {
        let z = plan.base_point(l, &mut rng);
        jobs.push((z, plan.seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64)));
    }
    let rows: Vec<StaticRow> = jobs
        .par_iter()
        .map(|(z, sub_seed)| {
            let mut sub = rand_chacha::ChaCha8Rng::seed_from_u64(*sub_seed);
            let kz = k.eval(z)?;
            let k_in_t = on_time_axis(&kz);
            let kscale = l.scale(z, &kz).max(1.0);
            let hfd = 1e-4 * norm(&kz).max(1.0);
            let mut c1 = 0.0f64;
            let mut c2 = 0.0f64;
            let mut axis = vec![0.0; d];
            axis[0] = 1.0;
            for i in 1..d {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                let (m1, _) = one_sided_mismatch(l, z, &kz, &e, hfd)?;
                c1 = c1.max(m1 / kscale);
                let (_, m2) = one_sided_mismatch(l, z, &axis, &e, 1e-3)?;
                c2 = c2.max(m2 / l.scale(z, &axis));
            }
            let cond_a = c1 <= tol.c1 && (k_in_t || c2 <= tol.c2);
            let lk = l.eval_f64(z, &kz)?;
            let neg: Vec<f64> = kz.iter().map(|c| -c).collect();
            let cond_b = (lk - l.eval_f64(z, &neg)?).abs() / kscale;
            let (alpha, frob) = frobenius_residual(l, k, z, tol.d_alpha_step)?;
            let basis = kernel_basis(&alpha);
            let mut cond_c = 0.0f64;
            for _ in 0..tol.per_point {
                let mut w = vec![0.0; d];
                for b in &basis {
                    let c: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut sub);
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi += c * bi;
                    }
                }
                let lw = l.eval_f64(z, &w)?;
                for sign in [1.0, -1.0] {
                    let wk: Vec<f64> = w.iter().zip(&kz).map(|(a, b)| a + sign * b).collect();
                    let r = (l.eval_f64(z, &wk)? - lw - lk).abs();
                    let sc = l.scale(z, &w).max(kscale);
                    cond_c = cond_c.max(r / sc);
                }
            }
            Ok(StaticRow {
                z: z.clone(),
                k: kz,
                alpha,
                k_in_t,
                c1_at_k: c1,
                c2_across_t: c2,
                cond_a,
                cond_b,
                cond_c,
                frobenius: frob,
            })
        })
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::NoData("no base samples".into()));
    }
    let cond_a = rows.iter().all(|r| r.cond_a);
    let fold = |f: fn(&StaticRow) -> f64| rows.iter().fold(0.0f64, |m, r| m.max(f(r)));
    let cond_a_residual = fold(|r| r.c1_at_k);
    let cond_b = fold(|r| r.cond_b);
    let cond_c = fold(|r| r.cond_c);
    let frobenius = fold(|r| r.frobenius);
    let splitting_ok = cond_a && cond_b <= tol.splitting && cond_c <= tol.splitting;
    let verdict = if !splitting_ok {
        StaticVerdict::Inconclusive
    } else if frobenius <= tol.frobenius {
        StaticVerdict::Static
    } else {
        StaticVerdict::StationaryNonstatic
    };
    Ok(StaticCheckReport { cond_a, cond_a_residual, cond_b, cond_c, frobenius, samples: rows.len(), rows, verdict })
}

/// `α` and condition (a) at a single point, failing with `NotDifferentiableAtK`.
pub fn static_covector(k: &VectorField, l: &SpacetimeLagrangian, z: &[f64], tol: &StaticTolerances) -> Result<Vec<f64>> {
    let kz = k.eval(z)?;
    let d = kz.len();
    let kscale = l.scale(z, &kz).max(1.0);
    let h = 1e-4 * norm(&kz).max(1.0);
    for i in 1..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        let (m1, _) = one_sided_mismatch(l, z, &kz, &e, h)?;
        if m1 / kscale > tol.c1 {
            return Err(Error::NotDifferentiableAtK(m1 / kscale));
        }
    }
    alpha_at(l, z, &kz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::load_default;

    #[test]
    fn dt_annihilates_stationary_lagrangians() {
        let l = load_default("standard_stationary").unwrap();
        let r = complete_lift_apply(&VectorField::dt(2), &l, &[0.3, 0.2, -0.5], &[1.0, 0.4, 0.1]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn t_dt_on_flat_randers() {
        let l = load_default("flat_randers").unwrap();
        for t in [-1.0, 0.0, 2.5] {
            let r = complete_lift_apply(&VectorField::t_dt(2), &l, &[t, 0.3, 0.1], &[1.0, 1.0, 0.0]).unwrap();
            assert!((r + 1.0).abs() < 1e-14, "{r}");
        }
    }

    #[test]
    fn lie_derivative_of_t_dt_on_flat_randers() {
        let l = load_default("flat_randers").unwrap();
        let lie = lie_derivative_components(&VectorField::t_dt(2), &l, &[0.7, 0.0, 0.0], &[1.0, 1.0, 0.0]).unwrap();
        assert!((lie.get(0, 0) + 2.0).abs() < 1e-14);
        assert!((lie.get(0, 1) - 0.5).abs() < 1e-14);
        assert_eq!(lie.get(1, 1), 0.0);
    }

    #[test]
    fn lie_derivative_matches_fd_of_tensor() {
        // Oracle: derivative of g̃ along the lifted direction by central differences.
        let l = load_default("standard_stationary").unwrap();
        let k = VectorField::parse("k", &["x1", "x2", "-x1"]).unwrap();
        let z = [0.2, 0.3, -0.4];
        let w = [1.0, 0.5, -0.3];
        let lie = lie_derivative_components(&k, &l, &z, &w).unwrap();
        let kz = k.eval(&z).unwrap();
        let dk = k.jacobian(&z).unwrap();
        let lw: Vec<f64> = (0..3).map(|h| (0..3).map(|i| dk[(h, i)] * w[i]).sum()).collect();
        let h = 1e-5;
        let shift = |s: f64| {
            let zz: Vec<f64> = z.iter().zip(&kz).map(|(a, b)| a + s * b).collect();
            let ww: Vec<f64> = w.iter().zip(&lw).map(|(a, b)| a + s * b).collect();
            fundamental_tensor_at(&l, &zz, &ww).unwrap()
        };
        let (gp, gm) = (shift(h), shift(-h));
        let g = fundamental_tensor_at(&l, &z, &w).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let mut expect = (gp.get(a, b) - gm.get(a, b)) / (2.0 * h);
                for m in 0..3 {
                    expect += dk[(m, a)] * g.get(m, b) + dk[(m, b)] * g.get(a, m);
                }
                assert!((lie.get(a, b) - expect).abs() < 1e-7, "{a}{b}: {} vs {expect}", lie.get(a, b));
            }
        }
    }

    #[test]
    fn contraction_identity_on_rutz() {
        let l = load_default("rutz").unwrap();
        let k = VectorField::parse("k", &["t", "0.1*x1", "x3", "1"]).unwrap();
        let z = [0.5, 5.0, 1.0, 0.3];
        let w = [2.0, 0.3, 0.4, -0.2];
        let lie = lie_derivative_components(&k, &l, &z, &w).unwrap();
        let lhs = lie.apply(&w, &w);
        let rhs = complete_lift_apply(&k, &l, &z, &w).unwrap();
        assert!((lhs - rhs).abs() < 1e-8 * l.scale(&z, &w), "{lhs} {rhs}");
    }

    #[test]
    fn flow_isometry() {
        let l = load_default("flat_randers").unwrap();
        let opts = OdeOptions::default();
        let w = [1.0, 1.0, 0.3];
        let ok = isometry_flow_check(&VectorField::dt(2), &l, &[0.0, 0.1, 0.2], &w, 1.0, 10, &opts).unwrap();
        assert!(ok.max_deviation <= 1e-9);
        let bad = isometry_flow_check(&VectorField::t_dt(2), &l, &[0.2, 0.1, 0.2], &w, 0.5, 5, &opts).unwrap();
        assert!(bad.max_deviation > 1e-3);
    }

    #[test]
    fn flow_escape_is_reported() {
        let l = load_default("kerr_perturbation").unwrap();
        let k = VectorField::coordinate(3, 1);
        let r = isometry_flow_check(&k, &l, &[0.0, 4.0, 1.0, 0.0], &[1.0, 0.3, 0.2, 0.1], -5.0, 5, &OdeOptions::default());
        assert!(matches!(r, Err(Error::FlowEscape(_))), "{r:?}");
    }

    #[test]
    fn kernel_basis_is_orthonormal_and_annihilated() {
        let a = [-1.0, 0.3, 0.0, 2.0];
        let b = kernel_basis(&a);
        assert_eq!(b.len(), 3);
        for (i, u) in b.iter().enumerate() {
            assert!(crate::linalg::dot(u, &a).abs() < 1e-14);
            for (j, v) in b.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((crate::linalg::dot(u, v) - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn static_and_twisted() {
        let plan = SamplingPlan::new(3, 20);
        let tol = StaticTolerances::default();
        let st = static_conditions_check(&VectorField::dt(2), &load_default("static_warped").unwrap(), &plan, &tol).unwrap();
        assert_eq!(st.verdict, StaticVerdict::Static, "{st:?}");
        let tw = static_conditions_check(&VectorField::dt(3), &load_default("twisted_oneform").unwrap(), &plan, &tol).unwrap();
        assert!(tw.cond_b <= 1e-9 && tw.cond_c <= 1e-9);
        assert!(tw.frobenius > 1e-3);
        assert_eq!(tw.verdict, StaticVerdict::StationaryNonstatic);
    }

    #[test]
    fn nonlinear_b_is_not_differentiable_at_the_axis() {
        let l = load_default("randers_type").unwrap();
        let tol = StaticTolerances::default();
        assert!(matches!(
            static_covector(&VectorField::dt(2), &l, &[0.0, 0.1, 0.1], &tol),
            Err(Error::NotDifferentiableAtK(_))
        ));
        let rep = static_conditions_check(&VectorField::dt(2), &l, &SamplingPlan::new(1, 5), &tol).unwrap();
        assert!(!rep.cond_a);
        assert_eq!(rep.verdict, StaticVerdict::Inconclusive);
    }
}
