use finsler_core::causality::{ball_boundary_grid, causality2_evidence, Membership};
use finsler_core::fermat::{classify_both, fermat_hypotheses, verify_finsler};
use finsler_core::geodesics::{lightlike_correspondence_check, Branch};
use finsler_core::killing::{static_conditions_check, StaticTolerances, KILLING_TOL};
use finsler_core::tensor::{check_index1_region, fundamental_tensor_at, Index1Row, DEFAULT_EIG_TOL};
use finsler_core::zoo::{catalog, EntryKind};
use finsler_core::{
    ball_boundary, chronological_set, conserved_quantities, geodesic_bvp_shoot, killing_residual, optical_metrics,
    signature_of, spacetime_geodesic_ivp, BallBoundary, BallKind, ChronoSign, ConeKind, DistanceMethod, Error,
    GridSpec, OpticalKind, Result, Sample, ShootOptions, SpacetimeLagrangian, StaticVerdict, StopReason, VectorField,
};
use rand::Rng;

use crate::run_config::{FieldBlock, GridBlock, PointsBlock, RunConfig};

/// Everything a command needs besides its own config block.
pub struct Context {
    pub rc: RunConfig,
    pub lagrangian: SpacetimeLagrangian,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

/// Result of one command: report lines, artifacts and the verdict.
pub struct Outcome {
    pub name: &'static str,
    pub pass: bool,
    pub worst: f64,
    pub lines: Vec<String>,
    pub files: Vec<(String, String)>,
}

impl Outcome {
    fn new(name: &'static str) -> Self {
        Self { name, pass: true, worst: 0.0, lines: Vec::new(), files: Vec::new() }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn verdict_line(&self) -> String {
        format!("VERDICT {} {} {:.6e}", self.name, if self.pass { "pass" } else { "fail" }, self.worst)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|c| format!("{c:.12e}")).collect::<Vec<_>>().join(";")
}

impl Context {
    fn seed(&self, command: &str) -> Result<u64> {
        self.seed.or(self.rc.seed).ok_or_else(|| {
            Error::Config(format!("`{command}` samples at random and needs a seed: pass --seed or set `seed` in the config"))
        })
    }

    fn tol_or(&self, default: f64) -> f64 {
        self.tol.or(self.rc.tol).unwrap_or(default)
    }

    /// Centre of the sampling box.
    fn center(&self) -> Vec<f64> {
        self.lagrangian.sample_box.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }

    fn spacetime_center(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.center()).collect()
    }

    fn check_len(&self, what: &str, v: &[f64], len: usize) -> Result<()> {
        if v.len() != len {
            return Err(Error::Config(format!("`{what}` has {} components, expected {len}", v.len())));
        }
        Ok(())
    }

    fn points(&self, block: Option<&PointsBlock>, command: &str, default_n: usize) -> Result<Vec<Sample>> {
        let l = &self.lagrangian;
        match block {
            Some(b) if !b.z.is_empty() || !b.w.is_empty() => {
                if b.z.len() != b.w.len() {
                    return Err(Error::Config(format!("[{command}] has {} z rows but {} w rows", b.z.len(), b.w.len())));
                }
                b.z.iter()
                    .zip(&b.w)
                    .map(|(z, w)| {
                        self.check_len("z", z, l.n + 1)?;
                        self.check_len("w", w, l.n + 1)?;
                        l.check_admits(z, w)?;
                        Ok(Sample { z: z.clone(), w: w.clone() })
                    })
                    .collect()
            }
            _ => {
                let samples = self.rc.plan(self.seed(command)?, default_n).draw(l);
                if samples.is_empty() {
                    return Err(Error::NoData("sampler produced no admissible vectors".into()));
                }
                Ok(samples)
            }
        }
    }

    fn field(&self, block: Option<&FieldBlock>) -> Result<VectorField> {
        let d = self.lagrangian.n + 1;
        let k = match block.and_then(|b| b.field.as_ref()) {
            Some(srcs) => {
                let refs: Vec<&str> = srcs.iter().map(String::as_str).collect();
                let name = block.and_then(|b| b.name.clone()).unwrap_or_else(|| "K".into());
                VectorField::parse(name, &refs)?
            }
            None => VectorField::dt(self.lagrangian.n),
        };
        if k.dim() != d {
            return Err(Error::Dimension { expected: d, got: k.dim() });
        }
        Ok(k)
    }

    fn optical(&self, name: Option<&str>) -> Result<OpticalKind> {
        match name {
            None if self.lagrangian.cone.kind == ConeKind::LowerHalf => Ok(OpticalKind::FBMinus),
            None => Ok(OpticalKind::FB),
            Some("F_B" | "f_b" | "forward") => Ok(OpticalKind::FB),
            Some("F_B-" | "f_b_minus" | "mirrored") => Ok(OpticalKind::FBMinus),
            Some(other) => Err(Error::Config(format!("unknown optical metric `{other}`; expected F_B or F_B-"))),
        }
    }

    fn shoot_options(&self, tol: f64, max_newton: Option<usize>) -> ShootOptions {
        let mut o = ShootOptions { tol, ode: self.rc.ode(), ..ShootOptions::default() };
        if let Some(m) = max_newton {
            o.max_newton = m;
        }
        o.chart = Some(self.lagrangian.chart.clone());
        o
    }

    fn grid(&self, block: &GridBlock) -> Result<GridSpec> {
        if block.bounds.len() != self.lagrangian.n {
            return Err(Error::Dimension { expected: self.lagrangian.n, got: block.bounds.len() });
        }
        Ok(GridSpec::new(block.bounds.iter().map(|[a, b]| (*a, *b)).collect(), block.resolution).with_order2(block.order2))
    }
}

pub fn eval(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let pts = ctx.points(ctx.rc.eval.as_ref(), "eval", 100)?;
    let mut out = Outcome::new("eval");
    let mut csv = String::from("z,w,L,scale,homogeneity\n");
    for s in &pts {
        let v = l.eval_f64(&s.z, &s.w)?;
        let scale = l.scale(&s.z, &s.w);
        let w2: Vec<f64> = s.w.iter().map(|c| 2.0 * c).collect();
        let hom = (l.eval_f64(&s.z, &w2)? - 4.0 * v).abs() / scale;
        out.worst = out.worst.max(hom);
        csv.push_str(&format!("{},{},{v:.15e},{scale:.6e},{hom:.6e}\n", join(&s.z), join(&s.w)));
    }
    out.pass = out.worst <= ctx.tol_or(1e-9);
    out.line(format!("metric {}: {} points, worst homogeneity residual {:.3e}", l.name, pts.len(), out.worst));
    out.file("eval.csv", csv);
    Ok(out)
}

pub fn tensor(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let pts = ctx.points(ctx.rc.tensor.as_ref(), "tensor", 100)?;
    let mut out = Outcome::new("tensor");
    let mut csv = String::from("z,w,g,eigenvalues,n_neg,n_zero,n_pos\n");
    let mut index1 = 0;
    for s in &pts {
        let g = fundamental_tensor_at(l, &s.z, &s.w)?;
        let ev = g.eigenvalues();
        let sig = signature_of(&g, DEFAULT_EIG_TOL);
        if sig.is_index1() {
            index1 += 1;
        }
        // g̃_w(w, w) = L(w) by homogeneity.
        let recon = (g.apply(&s.w, &s.w) - l.eval_f64(&s.z, &s.w)?).abs() / l.scale(&s.z, &s.w);
        out.worst = out.worst.max(recon);
        let entries: Vec<f64> = g.matrix().row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            join(&s.z),
            join(&s.w),
            join(&entries),
            join(&ev),
            sig.n_neg,
            sig.n_zero,
            sig.n_pos
        ));
    }
    out.pass = out.worst <= ctx.tol_or(1e-9);
    out.line(format!(
        "metric {}: {} points, {index1} with signature (1, 0, {}), worst g(w,w) - L(w) residual {:.3e}",
        l.name,
        pts.len(),
        l.n,
        out.worst
    ));
    out.file("tensor.csv", csv);
    Ok(out)
}

/// Size of the wrong-signed eigenvalue of a row; zero eigenvalues count as zero.
fn index1_violation(r: &Index1Row) -> f64 {
    let mut ev = r.eigenvalues.clone();
    ev.sort_by(f64::total_cmp);
    let first = ev.first().copied().unwrap_or(0.0).max(0.0);
    let second = ev.get(1).map_or(0.0, |e| (-e).max(0.0));
    first.max(second)
}

pub fn index_check(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let plan = ctx.rc.plan(ctx.seed("index-check")?, 1000);
    let rep = check_index1_region(l, &plan, ctx.tol_or(DEFAULT_EIG_TOL))?;
    let mut out = Outcome::new("index1");
    out.pass = rep.passed();
    out.line(format!(
        "metric {}: {}/{} samples with signature (1, 0, {}) ({:.2}%)",
        l.name,
        rep.index1_count,
        rep.rows.len(),
        l.n,
        100.0 * rep.fraction
    ));
    if let Some(b) = &rep.b_report {
        out.line(format!("fiber Hessian of B: {}", b.verdict));
    }
    if !rep.consistent {
        out.line("sampled signatures contradict the sign of the fiber Hessian of B");
    }
    for (kind, row) in [("counterexample", &rep.counterexample), ("witness", &rep.large_tau_witness)] {
        if let Some(r) = row {
            out.worst = out.worst.max(index1_violation(r));
            out.line(format!(
                "WITNESS {kind} z={} w={} eigenvalues={} signature=({}, {}, {})",
                join(&r.z),
                join(&r.w),
                join(&r.eigenvalues),
                r.signature.n_neg,
                r.signature.n_zero,
                r.signature.n_pos
            ));
        }
    }
    out.file("index1.csv", rep.to_csv());
    Ok(out)
}

pub fn killing_check(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let k = ctx.field(ctx.rc.killing.as_ref())?;
    let plan = ctx.rc.plan(ctx.seed("killing-check")?, 1000);
    let rep = killing_residual(&k, l, &plan)?;
    let tol = ctx.tol_or(KILLING_TOL);
    let mut out = Outcome::new("killing");
    out.worst = rep.worst_scaled;
    out.pass = rep.worst_scaled <= tol;
    out.line(format!(
        "metric {}, field {}: {} samples, worst |K^c(L)| {:.3e}, relative {:.3e}, mean {:.3e}",
        l.name, k.name, rep.samples, rep.worst, rep.worst_scaled, rep.mean
    ));
    out.file(
        "killing.csv",
        format!(
            "field,samples,worst,mean,worst_scaled,killing\n{},{},{:.6e},{:.6e},{:.6e},{}\n",
            k.name, rep.samples, rep.worst, rep.mean, rep.worst_scaled, out.pass
        ),
    );
    Ok(out)
}

pub fn static_check(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let k = ctx.field(ctx.rc.static_check.as_ref())?;
    let plan = ctx.rc.plan(ctx.seed("static-check")?, 200);
    let mut tols = StaticTolerances::default();
    if let Some(t) = ctx.tol.or(ctx.rc.tol) {
        tols.splitting = t;
    }
    let rep = static_conditions_check(&k, l, &plan, &tols)?;
    let mut out = Outcome::new("static");
    out.worst = rep.cond_b.max(rep.cond_c).max(rep.frobenius);
    out.pass = rep.verdict == StaticVerdict::Static;
    out.line(format!("metric {}, field {}: {} samples", l.name, k.name, rep.samples));
    out.line(format!(
        "(a) differentiable at K: {} ({:.3e}); (b) {:.3e}; (c) {:.3e}; Frobenius {:.3e}",
        rep.cond_a, rep.cond_a_residual, rep.cond_b, rep.cond_c, rep.frobenius
    ));
    out.line(format!("verdict: {}", rep.verdict));
    out.file("static.csv", rep.to_csv());
    Ok(out)
}

pub fn fermat(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let pair = optical_metrics(l)?;
    let plan = ctx.rc.plan(ctx.seed("fermat")?, 1000);
    let hyp = fermat_hypotheses(l, &plan, DEFAULT_EIG_TOL)?;
    let mut out = Outcome::new("fermat");
    let mut summary = String::from("metric,hypotheses,samples,min_value,homogeneity,min_eigenvalue,finsler\n");
    for kind in [OpticalKind::FB, OpticalKind::FBMinus] {
        if hyp.holds_for(kind) {
            let rep = verify_finsler(pair.metric(kind), l, &plan)?;
            out.pass &= rep.passed;
            out.line(format!(
                "{kind}: hypotheses hold; min value {:.3e}, homogeneity {:.3e}, min eigenvalue of half Hessian of square {:.3e}",
                rep.min_value, rep.homogeneity_residual, rep.min_eigenvalue
            ));
            summary.push_str(&format!(
                "{kind},true,{},{:.6e},{:.6e},{:.6e},{}\n",
                rep.samples, rep.min_value, rep.homogeneity_residual, rep.min_eigenvalue, rep.passed
            ));
        } else {
            out.line(format!("{kind}: hypotheses fail: {}", hyp.failures(kind).join("; ")));
            summary.push_str(&format!("{kind},false,0,,,,\n"));
        }
    }
    let mut samples = String::from("x,v,f_b,f_b_minus,g,pair_identity,lightlike\n");
    let pts = plan.draw_space(l);
    let mut worst_pair = 0.0f64;
    let mut worst_light = 0.0f64;
    for (z, v) in &pts {
        let x = &z[1..];
        let (fb, fbm, g) = pair.values(x, v)?;
        let id = pair.pair_identity_residual(x, v)?;
        let li = pair.lightlike_residual(x, v)?;
        worst_pair = worst_pair.max(id);
        worst_light = worst_light.max(li);
        samples.push_str(&format!("{},{},{fb:.15e},{fbm:.15e},{g:.15e},{id:.6e},{li:.6e}\n", join(x), join(v)));
    }
    out.worst = worst_pair.max(worst_light);
    out.pass &= out.worst <= ctx.tol_or(1e-9);
    out.line(format!(
        "{} samples: worst Λ·F_B − B − G identity {:.3e}, worst lightlike residual {:.3e}",
        pts.len(),
        worst_pair,
        worst_light
    ));
    let block = ctx.rc.fermat.clone().unwrap_or_default();
    let x = block.x.unwrap_or_else(|| ctx.center());
    ctx.check_len("fermat.x", &x, l.n)?;
    out.file("fermat_level_set.csv", pair.level_set_csv(&x, block.n_dirs.unwrap_or(72))?);
    out.file("fermat_samples.csv", samples);
    out.file("fermat_summary.csv", summary);
    Ok(out)
}

pub fn classify(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let pair = optical_metrics(l)?;
    let plan = ctx.rc.plan(ctx.seed("classify")?, 1);
    let block = ctx.rc.classify.clone().unwrap_or_default();
    let n = block.n_vectors.unwrap_or(10_000);
    let on_cone = block.lightlike_fraction.unwrap_or(0.1).clamp(0.0, 1.0);
    let mut rng = plan.rng();
    let mut csv = String::from("z,w,L,by_sign,by_threshold,agree\n");
    let mut disagreements = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let z = plan.base_point(l, &mut rng);
        let mut w: Vec<f64> = (0..=l.n).map(|_| rng.random_range(-2.0..2.0)).collect();
        if rng.random_bool(on_cone) {
            let v = w[1..].to_vec();
            w[0] = if rng.random_bool(0.5) { pair.f_b.at(&z[1..], &v)? } else { -pair.f_b_minus.at(&z[1..], &v)? };
        }
        let (a, b, rel) = classify_both(&pair, &z, &w)?;
        let agree = a == b || rel.abs() <= 2.0;
        if !agree {
            disagreements += 1;
            worst = worst.max(rel.abs());
        }
        csv.push_str(&format!("{},{},{:.15e},{a},{b},{agree}\n", join(&z), join(&w), l.eval_f64(&z, &w)?));
    }
    let mut out = Outcome::new("classify");
    out.pass = disagreements == 0;
    out.worst = worst;
    out.line(format!("metric {}: {n} vectors, {disagreements} disagreements between sign of L and F_B thresholds", l.name));
    out.file("classify.csv", csv);
    Ok(out)
}

/// A future timelike default velocity: `τ` past the light cone along a fixed spatial direction.
fn default_velocity(ctx: &Context, z: &[f64]) -> Result<Vec<f64>> {
    let l = &ctx.lagrangian;
    if !l.is_splitting() {
        return Err(Error::Config("[geodesic] w0 is required for this metric".into()));
    }
    let pair = optical_metrics(l)?;
    let v: Vec<f64> = (0..l.n).map(|i| if i == 0 { 1.0 } else { 0.1 }).collect();
    let tau = if l.cone.kind == ConeKind::LowerHalf {
        -1.5 * pair.f_b_minus.at(&z[1..], &v)?
    } else {
        1.5 * pair.f_b.at(&z[1..], &v)?
    };
    Ok(std::iter::once(tau).chain(v).collect())
}

fn stop_text(stop: StopReason) -> String {
    match stop {
        StopReason::Completed => "completed".into(),
        StopReason::ConeExit(s) => format!("left the cone at s = {s}"),
        StopReason::ChartExit(s) => format!("left the chart at s = {s}"),
    }
}

pub fn geodesic(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let block = ctx.rc.geodesic.clone().unwrap_or_default();
    let z0 = block.z0.unwrap_or_else(|| ctx.spacetime_center());
    ctx.check_len("geodesic.z0", &z0, l.n + 1)?;
    let w0 = match block.w0 {
        Some(w) => w,
        None => default_velocity(ctx, &z0)?,
    };
    ctx.check_len("geodesic.w0", &w0, l.n + 1)?;
    let s_end = block.s_end.unwrap_or(10.0);
    let k = block.checkpoints.unwrap_or(10).max(1);
    let marks: Vec<f64> = (1..=k).map(|i| s_end * i as f64 / k as f64).collect();
    let opts = ctx.rc.ode();
    let traj = spacetime_geodesic_ivp(l, &z0, &w0, s_end, &marks, &opts)?;
    let c = conserved_quantities(&traj)?;
    let mut out = Outcome::new("geodesic");
    out.worst = c.max_drift;
    out.pass = traj.stop == StopReason::Completed && c.max_drift <= ctx.tol_or(10.0 * opts.rtol);
    out.line(format!("metric {}: {} samples over s in [0, {s_end}], {}", l.name, traj.len(), stop_text(traj.stop)));
    out.line(format!(
        "c_gamma {:.12e} (drift {:.3e}), energy {:.12e} (drift {:.3e})",
        c.c_gamma, c.c_gamma_drift, c.energy, c.energy_drift
    ));
    out.file("geodesic.csv", traj.to_csv());
    Ok(out)
}

pub fn lightlike_check(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let block = ctx.rc.lightlike.clone().unwrap_or_default();
    let z0 = block.z0.unwrap_or_else(|| ctx.spacetime_center());
    ctx.check_len("lightlike.z0", &z0, l.n + 1)?;
    let v0 = block.v0.unwrap_or_else(|| (0..l.n).map(|i| if i == 0 { 1.0 } else { 0.1 }).collect());
    ctx.check_len("lightlike.v0", &v0, l.n)?;
    let branch = match block.branch.as_deref() {
        None if l.cone.kind == ConeKind::LowerHalf => Branch::Past,
        None | Some("future") => Branch::Future,
        Some("past") => Branch::Past,
        Some(other) => return Err(Error::Config(format!("unknown branch `{other}`; expected future or past"))),
    };
    let s_end = block.s_end.unwrap_or(20.0);
    let rep = lightlike_correspondence_check(l, &z0, &v0, branch, s_end, block.checkpoints.unwrap_or(20), &ctx.rc.ode())?;
    let oriented = match branch {
        Branch::Future => rep.theta_increment > 0.0,
        Branch::Past => rep.theta_increment < 0.0,
    };
    let completed = rep.spacetime.stop == StopReason::Completed && rep.fermat.stop == StopReason::Completed;
    let mut out = Outcome::new("lightlike");
    out.worst = rep.base_gap;
    out.pass = completed && oriented && rep.base_gap <= ctx.tol_or(1e-5);
    out.line(format!(
        "metric {}: {:?} branch, c_gamma {:.12e}, {} shared parameters over s in [0, {s_end}]",
        l.name, branch, rep.c_gamma, rep.compared
    ));
    out.line(format!(
        "base-curve gap {:.3e}, |t - theta| {:.3e}, theta increment {:.12e}; spacetime run {}, Fermat run {}",
        rep.base_gap,
        rep.theta_residual,
        rep.theta_increment,
        stop_text(rep.spacetime.stop),
        stop_text(rep.fermat.stop)
    ));
    out.file("lightlike_spacetime.csv", rep.spacetime.to_csv());
    out.file("lightlike_fermat.csv", rep.fermat.to_csv("theta", "g"));
    out.file(
        "lightlike_summary.csv",
        format!(
            "branch,c_gamma,base_gap,theta_residual,theta_increment,compared\n{:?},{:.15e},{:.6e},{:.6e},{:.15e},{}\n",
            branch, rep.c_gamma, rep.base_gap, rep.theta_residual, rep.theta_increment, rep.compared
        ),
    );
    Ok(out)
}

pub fn shoot(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let block = ctx.rc.shoot.clone().unwrap_or_default();
    let kind = ctx.optical(block.optical.as_deref())?;
    let pair = optical_metrics(l)?;
    let x0 = block.x0.unwrap_or_else(|| ctx.center());
    let x1 = match block.x1 {
        Some(x) => x,
        None => x0.iter().enumerate().map(|(i, c)| if i == 0 { c + 1.0 } else { *c }).collect(),
    };
    ctx.check_len("shoot.x0", &x0, l.n)?;
    ctx.check_len("shoot.x1", &x1, l.n)?;
    let opts = ctx.shoot_options(ctx.tol_or(1e-8), block.max_newton);
    let res = geodesic_bvp_shoot(pair.metric(kind), &x0, &x1, &opts)?;
    let mut out = Outcome::new("shoot");
    out.worst = res.endpoint_error;
    out.pass = res.converged;
    out.line(format!(
        "metric {} ({kind}): {} -> {}, length {:.12e}, endpoint error {:.3e}, initial velocity {}",
        l.name,
        join(&x0),
        join(&x1),
        res.length,
        res.endpoint_error,
        join(&res.initial_velocity)
    ));
    out.file("shoot.csv", res.trajectory.to_csv("arclength", "speed"));
    Ok(out)
}

fn ball_rows(csv: &mut String, ball: &BallBoundary) {
    let kind = match ball.kind {
        BallKind::Forward => "forward",
        BallKind::Backward => "backward",
    };
    for (u, p) in &ball.direction_samples {
        csv.push_str(&format!("{kind},{:.12e},{},{}\n", ball.radius, join(u), join(p)));
    }
}

pub fn balls(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let block = ctx.rc.balls.clone().unwrap_or_default();
    let kind = ctx.optical(block.optical.as_deref())?;
    let pair = optical_metrics(l)?;
    let f1 = pair.metric(kind);
    let center = block.center.unwrap_or_else(|| ctx.center());
    ctx.check_len("balls.center", &center, l.n)?;
    let ball_kind = match block.kind.as_deref() {
        None | Some("forward") => BallKind::Forward,
        Some("backward") => BallKind::Backward,
        Some(other) => return Err(Error::Config(format!("unknown ball kind `{other}`; expected forward or backward"))),
    };
    let radii = block.radii.unwrap_or_else(|| vec![0.5]);
    let n_dirs = block.n_dirs.unwrap_or(64);
    let opts = ctx.shoot_options(1e-8, None);
    let grid = block.grid.as_ref().map(|g| ctx.grid(g)).transpose()?;
    let mut csv = String::from("kind,radius,direction,boundary\n");
    let mut out = Outcome::new("balls");
    for &r in &radii {
        let ball = match &grid {
            Some(g) => ball_boundary_grid(f1, &center, r, ball_kind, n_dirs, g)?,
            None => ball_boundary(f1, &center, r, ball_kind, n_dirs, &opts)?,
        };
        let ext: Vec<f64> = ball.direction_samples.iter().map(|(_, p)| {
            p.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        }).collect();
        let (lo, hi) = ext.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
        out.line(format!(
            "{kind} {:?} ball of radius {r}: {} boundary points, Euclidean extent [{lo:.6e}, {hi:.6e}]",
            ball_kind,
            ball.direction_samples.len()
        ));
        if ball.direction_samples.len() < n_dirs {
            out.pass = false;
            out.worst = out.worst.max((n_dirs - ball.direction_samples.len()) as f64 / n_dirs as f64);
        }
        ball_rows(&mut csv, &ball);
    }
    out.file("balls.csv", csv);
    Ok(out)
}

pub fn chrono(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let block = ctx.rc.chrono.clone().unwrap_or_default();
    let p0 = block.p0.clone().unwrap_or_else(|| ctx.spacetime_center());
    ctx.check_len("chrono.p0", &p0, l.n + 1)?;
    let sign = match block.sign.as_deref() {
        None | Some("future") => ChronoSign::Future,
        Some("past") => ChronoSign::Past,
        Some(other) => return Err(Error::Config(format!("unknown sign `{other}`; expected future or past"))),
    };
    let radii = block.radii.clone().unwrap_or_else(|| vec![0.5, 1.0]);
    let opts = ctx.shoot_options(1e-8, None);
    let plan = ctx.rc.plan(ctx.seed("chrono")?, 200);
    let set = chronological_set(l, &p0, sign, &radii, block.n_dirs.unwrap_or(64), &opts, &plan)?;
    let mut out = Outcome::new("chrono");
    for (t, ball) in &set.slices {
        out.line(format!("slice t = {t:.6}: {} boundary points", ball.direction_samples.len()));
    }
    out.file("chrono.csv", set.to_csv());
    if !block.points.is_empty() {
        let method = match &block.grid {
            Some(g) => DistanceMethod::Grid(ctx.grid(g)?),
            None => DistanceMethod::Shooting(opts),
        };
        let mut csv = String::from("z,membership\n");
        let mut counts = [0usize; 3];
        for z in &block.points {
            ctx.check_len("chrono.points", z, l.n + 1)?;
            let m = set.membership(z, &method, 1e-6)?;
            counts[m as usize] += 1;
            let label = match m {
                Membership::Inside => "inside",
                Membership::Outside => "outside",
                Membership::Boundary => "boundary",
            };
            csv.push_str(&format!("{},{label}\n", join(z)));
        }
        out.line(format!("membership: {} inside, {} outside, {} on the boundary", counts[0], counts[1], counts[2]));
        out.file("chrono_membership.csv", csv);
    }
    Ok(out)
}

pub fn evidence(ctx: &Context) -> Result<Outcome> {
    let l = &ctx.lagrangian;
    let block = ctx.rc.evidence.clone().unwrap_or_default();
    let grid = match &block.grid {
        Some(g) => ctx.grid(g)?,
        None => GridSpec::new(l.sample_box.clone(), if l.n <= 2 { 101 } else { 31 }).with_order2(true),
    };
    let seed = ctx.seed("evidence")?;
    let rep = causality2_evidence(l, &grid, block.pairs.unwrap_or(20), seed, &ctx.shoot_options(1e-8, None))?;
    let c = &rep.connectedness;
    let mut out = Outcome::new("evidence");
    out.worst = c.max_relative_gap;
    // A box-touching intersection is inconclusive rather than a failure.
    out.pass = c.successes == c.pairs && c.max_relative_gap <= ctx.tol_or(0.03);
    out.line(rep.summary());
    out.file(
        "evidence.csv",
        format!(
            "label,pairs,successes,max_relative_gap,rays,exited_box,stalled_inside,cells,touches_box_boundary,bounded\n{},{},{},{:.6e},{},{},{},{},{},{}\n",
            rep.label,
            c.pairs,
            c.successes,
            c.max_relative_gap,
            rep.completeness.rays,
            rep.completeness.exited_box,
            rep.completeness.stalled_inside,
            rep.intersection.cells,
            rep.intersection.touches_box_boundary,
            rep.intersection.bounded
        ),
    );
    Ok(out)
}

pub fn zoo_list() -> Result<Outcome> {
    let mut out = Outcome::new("zoo");
    let mut csv = String::from("name,kind,dimension,parameters,summary\n");
    for e in catalog() {
        let l = e.build(&Default::default())?;
        let kind = match e.kind {
            EntryKind::Example => "example",
            EntryKind::TestInput => "test-input",
        };
        let params: Vec<String> = e.params.iter().map(|p| format!("{}={}", p.name, p.default)).collect();
        out.line(format!("{:<22} {:<10} n={}  {}", e.name, kind, l.n, e.summary));
        if !params.is_empty() {
            out.line(format!("{:<22} params: {}", "", params.join(", ")));
        }
        csv.push_str(&format!("{},{kind},{},{},\"{}\"\n", e.name, l.n, params.join(";"), e.summary.replace('"', "'")));
    }
    out.file("zoo.csv", csv);
    Ok(out)
}
