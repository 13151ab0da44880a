//! Spacetime geodesics in normal form, the reduced Fermat equation on `M`, the
//! lightlike correspondence between them, and two-point shooting for Finsler metrics.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::ad::Jet2;
use crate::error::{Error, Result};
use crate::fermat::{optical_metrics, OpticalMetricPair};
use crate::lagrangian::{base_to_z, run_jet, FiberLagrangian, SpacetimeLagrangian};
use crate::linalg::{norm, solve, sym_condition, sym_eigen};
use crate::ode::{integrate, Control, OdeOptions, OdeStats};
use crate::tensor::join;

/// Condition number of the velocity Hessian above which integration aborts.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative size of `v` below which a velocity counts as approaching the time axis.
pub const CONE_EXIT_GUARD: f64 = 1e-6;

/// Why integration ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopReason {
    Completed,
    /// The velocity approached the time axis or left the cone at this parameter.
    ConeExit(f64),
    /// The base point left the chart at this parameter.
    ChartExit(f64),
}

/// Acceleration `q̈ = A⁻¹(∂_q L − ∂²_{q̇q} L q̇)` with `A = ∂²_{q̇q̇} L`, from a jet in `(q, q̇)`.
fn normal_form(jet: &Jet2, m: usize, qdot: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let g = jet.gradient();
    let a = DMatrix::from_fn(m, m, |i, j| jet.hessian(m + i, m + j));
    let rhs: Vec<f64> = (0..m).map(|i| g[i] - (0..m).map(|j| jet.hessian(m + i, j) * qdot[j]).sum::<f64>()).collect();
    let acc = solve(&a, &rhs).ok_or(Error::IllConditionedHessian { s: f64::NAN, cond: f64::INFINITY })?;
    Ok((acc, a))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicTrajectory {
    pub params: Vec<f64>,
    /// Positions `z = (t, x)` per sample.
    pub z: Vec<Vec<f64>>,
    /// Velocities `w = (τ, v)` per sample.
    pub w: Vec<Vec<f64>>,
    /// `½∂_τ L`, which is `−Λτ + B(v)` for a stationary splitting.
    pub c_gamma_trace: Vec<f64>,
    /// `L(w)`.
    pub energy_trace: Vec<f64>,
    pub stats: OdeStats,
    pub stop: StopReason,
    /// Set for integral curves of `∂_t`, which are produced without integration.
    pub t_orbit: bool,
}

impl GeodesicTrajectory {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Index of the sample at parameter exactly `s`.
    pub fn index_of(&self, s: f64) -> Option<usize> {
        self.params.iter().position(|&p| p == s)
    }

    pub fn csv_header(n: usize) -> String {
        let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let vs: Vec<String> = (1..=n).map(|i| format!("v{i}")).collect();
        format!("s,t,{},tau,{},c_gamma,energy", xs.join(","), vs.join(","))
    }

    pub fn to_csv(&self) -> String {
        let n = self.z.first().map_or(0, |z| z.len() - 1);
        let mut out = Self::csv_header(n);
        out.push('\n');
        for i in 0..self.len() {
            let cols: Vec<String> = std::iter::once(self.params[i])
                .chain(self.z[i].iter().copied())
                .chain(self.w[i].iter().copied())
                .chain([self.c_gamma_trace[i], self.energy_trace[i]])
                .map(|c| format!("{c:.15e}"))
                .collect();
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }
}

/// Integrates the Euler–Lagrange equations of `L` from `(z0, w0)` over `s ∈ [0, s_end]`.
///
/// Every accepted step is recorded; `checkpoints` are additionally hit exactly.
pub fn spacetime_geodesic_ivp(
    l: &SpacetimeLagrangian,
    z0: &[f64],
    w0: &[f64],
    s_end: f64,
    checkpoints: &[f64],
    opts: &OdeOptions,
) -> Result<GeodesicTrajectory> {
    let d = l.n + 1;
    if z0.len() != d || w0.len() != d {
        return Err(Error::Dimension { expected: d, got: z0.len().min(w0.len()) });
    }
    let wn = norm(w0);
    if wn == 0.0 {
        return Err(Error::ZeroVelocity);
    }
    if norm(&w0[1..]) <= CONE_EXIT_GUARD * wn {
        return t_orbit(l, z0, w0, s_end, checkpoints, opts);
    }
    l.check_admits(z0, w0)?;
    let mut y0 = z0.to_vec();
    y0.extend_from_slice(w0);
    let mut traj = GeodesicTrajectory {
        params: Vec::new(),
        z: Vec::new(),
        w: Vec::new(),
        c_gamma_trace: Vec::new(),
        energy_trace: Vec::new(),
        stats: OdeStats::default(),
        stop: StopReason::Completed,
        t_orbit: false,
    };
    let mut stop = StopReason::Completed;
    let out = integrate(
        |_, y, dy| {
            let (z, w) = y.split_at(d);
            let jet = l.full_jet(z, w)?;
            let (acc, _) = normal_form(&jet, d, w)?;
            dy[..d].copy_from_slice(w);
            dy[d..].copy_from_slice(&acc);
            Ok(())
        },
        0.0,
        &y0,
        s_end,
        checkpoints,
        opts,
        |s, y, _| {
            let (z, w) = y.split_at(d);
            if !l.in_chart(&z[1..]) {
                stop = StopReason::ChartExit(s);
                return Ok(Control::Stop);
            }
            if norm(&w[1..]) <= CONE_EXIT_GUARD * norm(w) || !l.admits(z, w) {
                stop = StopReason::ConeExit(s);
                return Ok(Control::Stop);
            }
            let jet = l.fiber_jet(z, w)?;
            let cond = sym_condition(&jet.hessian_matrix());
            if cond > MAX_CONDITION {
                return Err(Error::IllConditionedHessian { s, cond });
            }
            traj.params.push(s);
            traj.z.push(z.to_vec());
            traj.w.push(w.to_vec());
            traj.c_gamma_trace.push(0.5 * jet.gradient()[0]);
            traj.energy_trace.push(jet.real());
            Ok(Control::Continue)
        },
    )?;
    traj.stats = out.stats;
    traj.stop = stop;
    Ok(traj)
}

/// `s ↦ (t0 + τs, x0)`, a geodesic exactly when `dΛ(x0) = 0`.
fn t_orbit(
    l: &SpacetimeLagrangian,
    z0: &[f64],
    w0: &[f64],
    s_end: f64,
    checkpoints: &[f64],
    opts: &OdeOptions,
) -> Result<GeodesicTrajectory> {
    let jet = run_jet(|x| Ok(l.lambda_eval(x)?), z0)?;
    let dl = norm(&jet.gradient()[1..]);
    if dl > 1e-10 * jet.real().abs().max(1.0) {
        return Err(Error::ConeExit(0.0));
    }
    let mut params: Vec<f64> = std::iter::once(0.0).chain(checkpoints.iter().copied()).chain([s_end]).collect();
    params.sort_by(f64::total_cmp);
    params.dedup();
    let tau = w0[0];
    let lam = jet.real();
    let z: Vec<Vec<f64>> = params
        .iter()
        .map(|s| {
            let mut p = z0.to_vec();
            p[0] += tau * s;
            p
        })
        .collect();
    let w = vec![w0.to_vec(); params.len()];
    Ok(GeodesicTrajectory {
        c_gamma_trace: vec![-lam * tau; params.len()],
        energy_trace: vec![-lam * tau * tau; params.len()],
        params,
        z,
        w,
        stats: OdeStats { rtol: opts.rtol, atol: opts.atol, ..OdeStats::default() },
        stop: StopReason::Completed,
        t_orbit: true,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservedSummary {
    pub c_gamma: f64,
    pub energy: f64,
    pub c_gamma_drift: f64,
    pub energy_drift: f64,
    pub max_drift: f64,
}

/// Means and spreads of the conserved traces.
pub fn conserved_quantities(traj: &GeodesicTrajectory) -> Result<ConservedSummary> {
    if traj.is_empty() || traj.t_orbit {
        return Err(Error::NoData("trajectory has no integrated samples".into()));
    }
    let spread = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
        hi - lo
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let c_gamma_drift = spread(&traj.c_gamma_trace);
    let energy_drift = spread(&traj.energy_trace);
    Ok(ConservedSummary {
        c_gamma: mean(&traj.c_gamma_trace),
        energy: mean(&traj.energy_trace),
        c_gamma_drift,
        energy_drift,
        max_drift: c_gamma_drift.max(energy_drift),
    })
}

// Reduced equation on M.

/// A curve on `M` with one extra integrated scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseTrajectory {
    pub params: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// `θ` for Fermat runs, arc length for shooting runs.
    pub extra: Vec<f64>,
    /// `G(σ̇)` for Fermat runs, `F1(σ̇)` for shooting runs.
    pub speed: Vec<f64>,
    pub stats: OdeStats,
    pub stop: StopReason,
}

impl BaseTrajectory {
    pub fn index_of(&self, s: f64) -> Option<usize> {
        self.params.iter().position(|&p| p == s)
    }

    pub fn speed_drift(&self) -> f64 {
        let (lo, hi) = self.speed.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
        hi - lo
    }

    pub fn to_csv(&self, extra_name: &str, speed_name: &str) -> String {
        let n = self.x.first().map_or(0, Vec::len);
        let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let vs: Vec<String> = (1..=n).map(|i| format!("v{i}")).collect();
        let mut out = format!("s,{},{},{extra_name},{speed_name}\n", xs.join(","), vs.join(","));
        for i in 0..self.params.len() {
            out.push_str(&format!(
                "{:.15e},{},{},{:.15e},{:.15e}\n",
                self.params[i],
                join(&self.x[i]),
                join(&self.v[i]),
                self.extra[i],
                self.speed[i]
            ));
        }
        out
    }
}

/// Orientation of a lightlike run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `F_B`, `c_γ < 0`, `θ' = F_B(σ̇)`.
    Future,
    /// `F_B⁻`, `c_γ > 0`, `θ' = −F_B⁻(σ̇)`.
    Past,
}

/// `R = c²/(2Λ) + H_c` whose Euler–Lagrange equation is the reduced equation on `M`.
fn reduced_lagrangian(l: &SpacetimeLagrangian, c: f64, x: &[Jet2], y: &[Jet2]) -> Result<Jet2> {
    let (lambda, b, f2) = l.parts()?;
    let mut z = Vec::with_capacity(x.len() + 1);
    z.push(Jet2::constant(0.0));
    z.extend_from_slice(x);
    let lam = lambda.eval(&z)?;
    let inv = crate::ad::Scalar::recip(&lam)?;
    let bv = b.eval(&z, y)?;
    let fv = f2.eval(&z, y)?;
    Ok(inv.clone() * (0.5 * c * c) + bv.clone() * inv.clone() * (-c) + (bv.clone() * bv * inv + fv) * 0.5)
}

/// Integrates the reduced equation for `σ` together with `θ`.
///
/// `v0` is rescaled so that `G(x0, v0) = |c_gamma|`.
#[allow(clippy::too_many_arguments)]
pub fn fermat_geodesic_ivp(
    l: &SpacetimeLagrangian,
    c_gamma: f64,
    branch: Branch,
    x0: &[f64],
    v0: &[f64],
    theta0: f64,
    s_end: f64,
    checkpoints: &[f64],
    opts: &OdeOptions,
) -> Result<BaseTrajectory> {
    let n = l.n;
    if norm(v0) == 0.0 {
        return Err(Error::ZeroVelocity);
    }
    let pair = optical_metrics(l)?;
    let g0 = pair.g_aux.at(x0, v0)?;
    if g0 <= 0.0 {
        return Err(Error::ZeroVelocity);
    }
    let v0: Vec<f64> = v0.iter().map(|c| c * c_gamma.abs() / g0).collect();
    let theta_metric = match branch {
        Branch::Future => pair.f_b.clone(),
        Branch::Past => pair.f_b_minus.clone(),
    };
    let sign = if branch == Branch::Future { 1.0 } else { -1.0 };
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(&v0);
    y0.push(theta0);
    let jet_at = |y: &[f64]| -> Result<Jet2> {
        let mut p = y[..2 * n].to_vec();
        p.truncate(2 * n);
        run_jet(|vars| reduced_lagrangian(l, c_gamma, &vars[..n], &vars[n..]), &p)
    };
    let mut traj = BaseTrajectory {
        params: Vec::new(),
        x: Vec::new(),
        v: Vec::new(),
        extra: Vec::new(),
        speed: Vec::new(),
        stats: OdeStats::default(),
        stop: StopReason::Completed,
    };
    let mut stop = StopReason::Completed;
    let out = integrate(
        |_, y, dy| {
            let jet = jet_at(y)?;
            let (acc, _) = normal_form(&jet, n, &y[n..2 * n])?;
            dy[..n].copy_from_slice(&y[n..2 * n]);
            dy[n..2 * n].copy_from_slice(&acc);
            dy[2 * n] = sign * theta_metric.at(&y[..n], &y[n..2 * n])?;
            Ok(())
        },
        0.0,
        &y0,
        s_end,
        checkpoints,
        opts,
        |s, y, _| {
            let (x, v) = (&y[..n], &y[n..2 * n]);
            if !l.in_chart(x) {
                stop = StopReason::ChartExit(s);
                return Ok(Control::Stop);
            }
            let jet = jet_at(y)?;
            let a = DMatrix::from_fn(n, n, |i, j| jet.hessian(n + i, n + j));
            let (ev, _) = sym_eigen(&a);
            if ev[0] <= 0.0 || ev[n - 1] / ev[0] > MAX_CONDITION {
                return Err(Error::IllConditionedHessian { s, cond: ev[n - 1].abs() / ev[0].abs() });
            }
            traj.params.push(s);
            traj.x.push(x.to_vec());
            traj.v.push(v.to_vec());
            traj.extra.push(y[2 * n]);
            traj.speed.push(pair.g_aux.at(x, v)?);
            Ok(Control::Continue)
        },
    )?;
    traj.stats = out.stats;
    traj.stop = stop;
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceReport {
    pub branch: Branch,
    pub c_gamma: f64,
    /// Largest Euclidean distance between the two base curves at shared parameters.
    pub base_gap: f64,
    /// Largest `|t(s) − θ(s)|` at shared parameters.
    pub theta_residual: f64,
    /// `θ(s_end) − θ(0)`; positive on the future branch.
    pub theta_increment: f64,
    pub compared: usize,
    pub spacetime: GeodesicTrajectory,
    pub fermat: BaseTrajectory,
}

/// Launches the lightlike geodesic with spatial velocity `v0` and compares its
/// projection with the Fermat geodesic of matching `c_γ`.
pub fn lightlike_correspondence_check(
    l: &SpacetimeLagrangian,
    z0: &[f64],
    v0: &[f64],
    branch: Branch,
    s_end: f64,
    n_checkpoints: usize,
    opts: &OdeOptions,
) -> Result<CorrespondenceReport> {
    let pair: OpticalMetricPair = optical_metrics(l)?;
    let x0 = &z0[1..];
    let (fb, fbm, g) = pair.values(x0, v0)?;
    let (tau, c) = match branch {
        Branch::Future => (fb, -g),
        Branch::Past => (-fbm, g),
    };
    let mut w0 = vec![tau];
    w0.extend_from_slice(v0);
    let marks: Vec<f64> = (1..=n_checkpoints.max(1)).map(|k| s_end * k as f64 / n_checkpoints.max(1) as f64).collect();
    let st = spacetime_geodesic_ivp(l, z0, &w0, s_end, &marks, opts)?;
    let fm = fermat_geodesic_ivp(l, c, branch, x0, v0, z0[0], s_end, &marks, opts)?;
    let mut base_gap = 0.0f64;
    let mut theta_residual = 0.0f64;
    let mut compared = 0;
    for &s in std::iter::once(&0.0).chain(&marks) {
        if let (Some(i), Some(j)) = (st.index_of(s), fm.index_of(s)) {
            let dx: Vec<f64> = st.z[i][1..].iter().zip(&fm.x[j]).map(|(a, b)| a - b).collect();
            base_gap = base_gap.max(norm(&dx));
            theta_residual = theta_residual.max((st.z[i][0] - fm.extra[j]).abs());
            compared += 1;
        }
    }
    let theta_increment = fm.extra.last().copied().unwrap_or(z0[0]) - z0[0];
    Ok(CorrespondenceReport { branch, c_gamma: c, base_gap, theta_residual, theta_increment, compared, spacetime: st, fermat: fm })
}

// Shooting for Finsler metrics on M.

#[derive(Clone, Debug, PartialEq)]
pub struct ShootingResult {
    pub initial_velocity: Vec<f64>,
    pub endpoint_error: f64,
    pub trajectory: BaseTrajectory,
    pub converged: bool,
    /// `∫ F1(σ̇) ds` over `s ∈ [0, 1]`.
    pub length: f64,
    /// Set when `x0 = x1`.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShootOptions {
    /// Endpoint tolerance relative to `max(1, |x1 − x0|)`.
    pub tol: f64,
    pub ode: OdeOptions,
    pub max_newton: usize,
    /// Open chart bounds; shots leaving them fail.
    pub chart: Option<Vec<(f64, f64)>>,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { tol: 1e-8, ode: OdeOptions::default(), max_newton: 30, chart: None }
    }
}

/// Geodesic of `½F1²` from `x0` with initial velocity `v0` over `s ∈ [0, 1]`.
pub fn finsler_geodesic(f1: &FiberLagrangian, x0: &[f64], v0: &[f64], opts: &ShootOptions) -> Result<BaseTrajectory> {
    let n = x0.len();
    if norm(v0) == 0.0 {
        return Err(Error::ZeroVelocity);
    }
    let energy_jet = |y: &[f64]| -> Result<Jet2> {
        run_jet(
            |vars| {
                let mut z = vec![Jet2::constant(0.0)];
                z.extend_from_slice(&vars[..n]);
                let f = f1.eval(&z, &vars[n..])?;
                Ok(f.clone() * f * 0.5)
            },
            &y[..2 * n],
        )
    };
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(v0);
    y0.push(0.0);
    let mut traj = BaseTrajectory {
        params: Vec::new(),
        x: Vec::new(),
        v: Vec::new(),
        extra: Vec::new(),
        speed: Vec::new(),
        stats: OdeStats::default(),
        stop: StopReason::Completed,
    };
    let mut stop = StopReason::Completed;
    let out = integrate(
        |_, y, dy| {
            let jet = energy_jet(y)?;
            let (acc, _) = normal_form(&jet, n, &y[n..2 * n])?;
            dy[..n].copy_from_slice(&y[n..2 * n]);
            dy[n..2 * n].copy_from_slice(&acc);
            dy[2 * n] = f1.at(&y[..n], &y[n..2 * n])?;
            Ok(())
        },
        0.0,
        &y0,
        1.0,
        &[],
        &opts.ode,
        |s, y, _| {
            let x = &y[..n];
            if let Some(ch) = &opts.chart {
                if !x.iter().zip(ch).all(|(c, (lo, hi))| c > lo && c < hi) {
                    stop = StopReason::ChartExit(s);
                    return Ok(Control::Stop);
                }
            }
            traj.params.push(s);
            traj.x.push(x.to_vec());
            traj.v.push(y[n..2 * n].to_vec());
            traj.extra.push(y[2 * n]);
            traj.speed.push(f1.at(x, &y[n..2 * n])?);
            Ok(Control::Continue)
        },
    )?;
    traj.stats = out.stats;
    traj.stop = stop;
    Ok(traj)
}

fn endpoint(f1: &FiberLagrangian, x0: &[f64], v: &[f64], opts: &ShootOptions) -> Option<(Vec<f64>, BaseTrajectory)> {
    let t = finsler_geodesic(f1, x0, v, opts).ok()?;
    if t.stop != StopReason::Completed {
        return None;
    }
    Some((t.x.last()?.clone(), t))
}

/// Newton iteration on `v ↦ x(1; v) − x1` with a finite-difference Jacobian.
fn newton_shoot(
    f1: &FiberLagrangian,
    x0: &[f64],
    x1: &[f64],
    v_start: &[f64],
    opts: &ShootOptions,
) -> Option<(Vec<f64>, f64, BaseTrajectory)> {
    let n = x0.len();
    let target = opts.tol * norm(&crate::linalg::sub(x1, x0)).max(1.0);
    let mut v = v_start.to_vec();
    let (mut end, mut traj) = endpoint(f1, x0, &v, opts)?;
    let mut r: Vec<f64> = end.iter().zip(x1).map(|(a, b)| a - b).collect();
    let mut rn = norm(&r);
    for _ in 0..opts.max_newton {
        if rn <= target * 1e-2 {
            break;
        }
        let h = 1e-7 * norm(&v).max(1e-3);
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut vp = v.clone();
            vp[k] += h;
            let mut vm = v.clone();
            vm[k] -= h;
            let (ep, _) = endpoint(f1, x0, &vp, opts)?;
            let (em, _) = endpoint(f1, x0, &vm, opts)?;
            for i in 0..n {
                jac[(i, k)] = (ep[i] - em[i]) / (2.0 * h);
            }
        }
        let step = solve(&jac, &r)?;
        let mut lam = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = v.iter().zip(&step).map(|(a, d)| a - lam * d).collect();
            if let Some((e, t)) = endpoint(f1, x0, &cand, opts) {
                let rc: Vec<f64> = e.iter().zip(x1).map(|(a, b)| a - b).collect();
                let rcn = norm(&rc);
                if rcn < rn {
                    v = cand;
                    end = e;
                    traj = t;
                    r = rc;
                    rn = rcn;
                    improved = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let _ = end;
    Some((v, rn, traj))
}

/// Unit directions spread over the circle (`n = 2`, 32) or sphere (`n = 3`, 128).
pub fn spread_directions(n: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..32)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 32.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci sphere in the first three coordinates.
            let m = 128;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let zc = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let r = (1.0 - zc * zc).sqrt();
                    let a = golden * k as f64;
                    let mut v = vec![0.0; n];
                    v[0] = r * a.cos();
                    v[1] = r * a.sin();
                    v[2] = zc;
                    v
                })
                .collect()
        }
    }
}

/// Two-point problem for the geodesics of `F1` from `x0` to `x1`.
pub fn geodesic_bvp_shoot(f1: &FiberLagrangian, x0: &[f64], x1: &[f64], opts: &ShootOptions) -> Result<ShootingResult> {
    let n = x0.len();
    if x1.len() != n {
        return Err(Error::Dimension { expected: n, got: x1.len() });
    }
    let chord = crate::linalg::sub(x1, x0);
    let dist = norm(&chord);
    if dist == 0.0 {
        return Ok(ShootingResult {
            initial_velocity: vec![0.0; n],
            endpoint_error: 0.0,
            trajectory: BaseTrajectory {
                params: vec![0.0],
                x: vec![x0.to_vec()],
                v: vec![vec![0.0; n]],
                extra: vec![0.0],
                speed: vec![0.0],
                stats: OdeStats::default(),
                stop: StopReason::Completed,
            },
            converged: true,
            length: 0.0,
            degenerate: true,
        });
    }
    let target = opts.tol * dist.max(1.0);
    let finish = |v: Vec<f64>, err: f64, t: BaseTrajectory| ShootingResult {
        length: *t.extra.last().unwrap_or(&0.0),
        initial_velocity: v,
        endpoint_error: err,
        trajectory: t,
        converged: true,
        degenerate: false,
    };
    if let Some((v, err, t)) = newton_shoot(f1, x0, x1, &chord, opts) {
        if err <= target {
            return Ok(finish(v, err, t));
        }
    }
    let starts: Vec<Vec<f64>> = spread_directions(n).into_iter().map(|d| d.iter().map(|c| c * dist).collect()).collect();
    let scored: Vec<(Vec<f64>, f64)> = starts
        .par_iter()
        .filter_map(|v| {
            let (e, _) = endpoint(f1, x0, v, opts)?;
            Some((v.clone(), norm(&crate::linalg::sub(&e, x1))))
        })
        .collect();
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].1.total_cmp(&scored[b].1));
    let refined: Vec<(Vec<f64>, f64, BaseTrajectory)> =
        order.iter().take(4).filter_map(|&i| newton_shoot(f1, x0, x1, &scored[i].0, opts)).collect();
    let best = refined
        .into_iter()
        .filter(|r| r.1.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.extra.last().unwrap_or(&0.0).total_cmp(b.2.extra.last().unwrap_or(&0.0))));
    match best {
        Some((v, err, t)) if err <= target => Ok(finish(v, err, t)),
        Some((v, err, t)) => Err(Error::NoConvergence {
            best_error: err,
            best_direction: v,
            best_length: *t.extra.last().unwrap_or(&f64::NAN),
        }),
        None => Err(Error::NoConvergence { best_error: f64::INFINITY, best_direction: chord, best_length: f64::NAN }),
    }
}

/// Speed of `x ↦ F1(x, ·)` along a polygon; used as a length functional.
pub fn polygon_length(f1: &FiberLagrangian, pts: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for p in pts.windows(2) {
        let mid: Vec<f64> = p[0].iter().zip(&p[1]).map(|(a, b)| 0.5 * (a + b)).collect();
        let e = crate::linalg::sub(&p[1], &p[0]);
        total += f1.eval(&base_to_z(&mid), &e)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{load_default, load_zoo, params};

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn flat_randers_lightlike_line() {
        let l = load_default("flat_randers").unwrap();
        let t = spacetime_geodesic_ivp(&l, &[0.0, 0.0, 0.0], &[PHI, 1.0, 0.0], 5.0, &[2.0], &OdeOptions::default()).unwrap();
        assert_eq!(t.stop, StopReason::Completed);
        let i = t.index_of(2.0).unwrap();
        assert!((t.z[i][1] - 2.0).abs() < 1e-12 && t.z[i][2].abs() < 1e-12);
        assert!((t.z[i][0] - 2.0 * PHI).abs() < 1e-12);
        let c = conserved_quantities(&t).unwrap();
        assert!(c.energy.abs() < 1e-8);
        assert!((c.c_gamma + 1.25f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spacelike_line_and_reparametrization() {
        let l = load_default("flat_randers").unwrap();
        let t = spacetime_geodesic_ivp(&l, &[0.0, 0.0, 0.0], &[1.0, 1.0, 0.0], 3.0, &[], &OdeOptions::default()).unwrap();
        let c = conserved_quantities(&t).unwrap();
        assert!((c.energy - 1.0).abs() < 1e-12);
        let t2 = spacetime_geodesic_ivp(&l, &[0.0, 0.0, 0.0], &[2.0, 2.0, 0.0], 1.5, &[], &OdeOptions::default()).unwrap();
        let c2 = conserved_quantities(&t2).unwrap();
        assert!((c2.c_gamma - 2.0 * c.c_gamma).abs() < 1e-12);
        assert!((c2.energy - 4.0 * c.energy).abs() < 1e-12);
    }

    #[test]
    fn t_orbit_detector() {
        let l = load_default("flat_randers").unwrap();
        let t = spacetime_geodesic_ivp(&l, &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 2.0, &[], &OdeOptions::default()).unwrap();
        assert!(t.t_orbit);
        assert_eq!(t.z.last().unwrap()[0], 2.0);
        assert!(matches!(conserved_quantities(&t), Err(Error::NoData(_))));
        let l = load_default("static_warped").unwrap();
        let r = spacetime_geodesic_ivp(&l, &[0.0, 0.5, 0.0], &[1.0, 0.0, 0.0], 2.0, &[], &OdeOptions::default());
        assert!(matches!(r, Err(Error::ConeExit(_))));
    }

    #[test]
    fn flat_fermat_geodesic_is_straight() {
        let l = load_default("flat_randers").unwrap();
        let c = -optical_metrics(&l).unwrap().g_aux.at(&[0.0, 0.0], &[0.6, 0.8]).unwrap();
        let t = fermat_geodesic_ivp(&l, c, Branch::Future, &[0.0, 0.0], &[0.6, 0.8], 0.0, 2.0, &[], &OdeOptions::default())
            .unwrap();
        for (x, v) in t.x.iter().zip(&t.v) {
            assert!((x[1] - x[0] * 4.0 / 3.0).abs() < 1e-12);
            assert!((v[0] - 0.6).abs() < 1e-12 && (v[1] - 0.8).abs() < 1e-12);
        }
        assert!(t.speed_drift() < 1e-12);
    }

    #[test]
    fn zero_b_fermat_matches_f_energy_geodesic() {
        let l = load_zoo("flat_randers", &params(&[("b", 0.0)])).unwrap();
        let l = crate::lagrangian::make_stationary_splitting(
            crate::lagrangian::ScalarField::new("1", crate::Expr::c(1.0)),
            FiberLagrangian::new("0", crate::Expr::c(0.0), 1),
            load_default("static_warped").unwrap().parts().unwrap().2.clone(),
            l.cone,
        )
        .unwrap()
        .with_chart(vec![(-10.0, 10.0); 2]);
        let v0 = [0.6, 0.8];
        let g = optical_metrics(&l).unwrap().g_aux.at(&[0.1, 0.2], &v0).unwrap();
        let fm = fermat_geodesic_ivp(&l, -g, Branch::Future, &[0.1, 0.2], &v0, 0.0, 1.0, &[], &OdeOptions::default()).unwrap();
        let (_, _, f2) = l.parts().unwrap();
        let f = FiberLagrangian::new("F", f2.expr.clone().sqrt(), 1);
        let direct = finsler_geodesic(&f, &[0.1, 0.2], &v0, &ShootOptions::default()).unwrap();
        let a = fm.x.last().unwrap();
        let b = direct.x.last().unwrap();
        assert!(norm(&crate::linalg::sub(a, b)) < 1e-7);
    }

    #[test]
    fn flat_correspondence() {
        let l = load_default("flat_randers").unwrap();
        let r = lightlike_correspondence_check(&l, &[0.0, 0.0, 0.0], &[1.0, 0.0], Branch::Future, 5.0, 10, &OdeOptions::default())
            .unwrap();
        assert!(r.base_gap <= 1e-9 && r.theta_residual <= 1e-9, "{} {}", r.base_gap, r.theta_residual);
        assert!((r.theta_increment - 5.0 * PHI).abs() < 1e-9);
        let p = lightlike_correspondence_check(&l, &[0.0, 0.0, 0.0], &[1.0, 0.3], Branch::Past, 5.0, 10, &OdeOptions::default())
            .unwrap();
        assert!(p.base_gap <= 1e-9 && p.theta_increment < 0.0);
    }

    #[test]
    fn shooting_flat_randers() {
        let pair = optical_metrics(&load_default("flat_randers").unwrap()).unwrap();
        let opts = ShootOptions::default();
        let r = geodesic_bvp_shoot(&pair.f_b, &[0.0, 0.0], &[1.0, 0.0], &opts).unwrap();
        assert!(r.converged && (r.length - PHI).abs() < 1e-9);
        let r = geodesic_bvp_shoot(&pair.f_b, &[1.0, 0.0], &[0.0, 0.0], &opts).unwrap();
        assert!((r.length - (PHI - 1.0)).abs() < 1e-9);
        let r = geodesic_bvp_shoot(&pair.f_b, &[1.0, 0.0], &[1.0, 0.0], &opts).unwrap();
        assert!(r.degenerate && r.length == 0.0);
    }

    #[test]
    fn csv_header() {
        assert_eq!(GeodesicTrajectory::csv_header(2), "s,t,x1,x2,tau,v1,v2,c_gamma,energy");
    }
}
