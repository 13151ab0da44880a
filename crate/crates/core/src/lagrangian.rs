//! Lagrangians on the tangent bundle of `ℝ × M`.

use crate::ad::{jet2, Jet2, Scalar};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::types::{ConeKind, ConeSpec, SpacetimePoint, SpacetimeVector};

/// Positive function on `M` given as an expression in `x1 … xn`.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub name: String,
    pub expr: Expr,
}

impl ScalarField {
    pub fn new(name: impl Into<String>, expr: Expr) -> Self {
        Self { name: name.into(), expr }
    }

    /// Value at `z = (t, x)`; the time coordinate is ignored.
    pub fn eval<S: Scalar>(&self, z: &[S]) -> Result<S> {
        Ok(self.expr.eval(z, &[])?)
    }

    pub fn at(&self, x: &[f64]) -> Result<f64> {
        let z = base_to_z(x);
        self.eval(&z)
    }
}

/// Positively homogeneous function on `TM` in the fiber variables `y1 … yn`.
#[derive(Clone, Debug)]
pub struct FiberLagrangian {
    pub name: String,
    pub expr: Expr,
    /// Homogeneity degree, 1 or 2.
    pub degree: u8,
    pub smooth_off_zero: bool,
}

impl FiberLagrangian {
    pub fn new(name: impl Into<String>, expr: Expr, degree: u8) -> Self {
        assert!(degree == 1 || degree == 2, "homogeneity degree must be 1 or 2");
        Self { name: name.into(), expr, degree, smooth_off_zero: true }
    }

    pub fn with_smoothness(mut self, smooth_off_zero: bool) -> Self {
        self.smooth_off_zero = smooth_off_zero;
        self
    }

    /// Value at base `z = (t, x)` and fiber vector `v`.
    pub fn eval<S: Scalar>(&self, z: &[S], v: &[S]) -> Result<S> {
        // Positive homogeneity pins the value on the zero section even where the
        // closed form is singular there.
        if v.iter().all(|c| c.value() == 0.0 && c.is_constant()) {
            return Ok(S::from_f64(0.0));
        }
        let mut w = Vec::with_capacity(v.len() + 1);
        w.push(S::from_f64(0.0));
        w.extend_from_slice(v);
        Ok(self.expr.eval(z, &w)?)
    }

    pub fn at(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        self.eval(&base_to_z(x), v)
    }

    /// `v ↦ self(−v)`.
    pub fn reversed(&self) -> Self {
        Self { name: format!("{}:reversed", self.name), expr: self.expr.reverse_fiber(), ..self.clone() }
    }

    /// Gradient and Hessian in `v` at fixed `x`.
    pub fn fiber_jet(&self, x: &[f64], v: &[f64]) -> Result<Jet2> {
        let z: Vec<Jet2> = base_to_z(x).into_iter().map(Jet2::constant).collect();
        run_jet(|vv| self.eval(&z, vv), v)
    }
}

pub(crate) fn base_to_z(x: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(x.len() + 1);
    z.push(0.0);
    z.extend_from_slice(x);
    z
}

#[derive(Clone, Debug)]
pub enum Form {
    /// `L = −Λτ² + 2Bτ + F²`.
    Splitting { lambda: ScalarField, b: FiberLagrangian, f2: FiberLagrangian },
    /// Arbitrary 2-homogeneous expression in `t, x, tau, y`.
    General { l: Expr },
}

/// A Lagrangian `L(t, x, τ, v)` together with its cone domain and chart data.
#[derive(Clone, Debug)]
pub struct SpacetimeLagrangian {
    pub name: String,
    /// Dimension of the base `M`.
    pub n: usize,
    pub form: Form,
    pub cone: ConeSpec,
    /// Orientation of the reference field `±∂_t`.
    pub y_field_sign: f64,
    /// Open coordinate bounds of the chart, one pair per base coordinate.
    pub chart: Vec<(f64, f64)>,
    /// Box used by samplers, contained in the chart.
    pub sample_box: Vec<(f64, f64)>,
    /// Degree-2 fiber expression that must stay positive for `L` to be smooth.
    pub fiber_domain: Option<Expr>,
    /// Samplers keep `‖v‖ ≤ limit·|τ|` when set.
    pub speed_limit: Option<f64>,
    /// Samplers keep every `|vⁱ| ≥ guard·‖v‖` when set (metrics degenerate on coordinate axes).
    pub axis_guard: Option<f64>,
    pub notes: Vec<String>,
}

/// Assembles `L = −Λτ² + 2Bτ + F²`.
pub fn make_stationary_splitting(
    lambda: ScalarField,
    b: FiberLagrangian,
    f2: FiberLagrangian,
    cone: ConeSpec,
) -> Result<SpacetimeLagrangian> {
    if b.degree != 1 {
        return Err(Error::Config(format!("B must be 1-homogeneous, got degree {}", b.degree)));
    }
    if f2.degree != 2 {
        return Err(Error::Config(format!("F² must be 2-homogeneous, got degree {}", f2.degree)));
    }
    let n = [lambda.expr.usage(), b.expr.usage(), f2.expr.usage()]
        .iter()
        .flat_map(|u| [u.max_x, u.max_y])
        .flatten()
        .max()
        .map_or(1, |m| m + 1);
    for (what, e) in [("lambda", &lambda.expr), ("B", &b.expr), ("F", &f2.expr)] {
        let u = e.usage();
        if u.t || u.tau {
            return Err(Error::Config(format!("{what} must not depend on t or tau")));
        }
        if what == "lambda" && u.max_y.is_some() {
            return Err(Error::Config("lambda must not depend on the fiber".into()));
        }
    }
    let y_field_sign = if cone.kind == ConeKind::LowerHalf { -1.0 } else { 1.0 };
    Ok(SpacetimeLagrangian {
        name: "custom".into(),
        n,
        form: Form::Splitting { lambda, b, f2 },
        cone,
        y_field_sign,
        chart: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        sample_box: vec![(-1.0, 1.0); n],
        fiber_domain: None,
        speed_limit: None,
        axis_guard: None,
        notes: Vec::new(),
    })
}

impl SpacetimeLagrangian {
    /// A Lagrangian given by one expression in `t, x, tau, y`.
    pub fn general(name: impl Into<String>, n: usize, l: Expr, cone: ConeSpec) -> Self {
        let y_field_sign = if cone.kind == ConeKind::LowerHalf { -1.0 } else { 1.0 };
        Self {
            name: name.into(),
            n,
            form: Form::General { l },
            cone,
            y_field_sign,
            chart: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            sample_box: vec![(-1.0, 1.0); n],
            fiber_domain: None,
            speed_limit: None,
            axis_guard: None,
            notes: Vec::new(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_chart(mut self, chart: Vec<(f64, f64)>) -> Self {
        assert_eq!(chart.len(), self.n);
        self.chart = chart;
        self
    }

    pub fn with_sample_box(mut self, b: Vec<(f64, f64)>) -> Self {
        assert_eq!(b.len(), self.n);
        self.sample_box = b;
        self
    }

    pub fn with_fiber_domain(mut self, d: Expr) -> Self {
        self.fiber_domain = Some(d);
        self
    }

    pub fn with_speed_limit(mut self, limit: f64) -> Self {
        self.speed_limit = Some(limit);
        self
    }

    pub fn with_axis_guard(mut self, guard: f64) -> Self {
        self.axis_guard = Some(guard);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn is_splitting(&self) -> bool {
        matches!(self.form, Form::Splitting { .. })
    }

    /// `(Λ, B, F²)` of a stationary splitting.
    pub fn parts(&self) -> Result<(&ScalarField, &FiberLagrangian, &FiberLagrangian)> {
        match &self.form {
            Form::Splitting { lambda, b, f2 } => Ok((lambda, b, f2)),
            Form::General { .. } => Err(Error::NotSplitting),
        }
    }

    /// `L(z, w)` with `z = (t, x)` and `w = (τ, v)`.
    pub fn eval<S: Scalar>(&self, z: &[S], w: &[S]) -> Result<S> {
        debug_assert_eq!(z.len(), self.n + 1);
        debug_assert_eq!(w.len(), self.n + 1);
        match &self.form {
            Form::Splitting { lambda, b, f2 } => {
                let lam = lambda.eval(z)?;
                if lam.value() <= 0.0 {
                    return Err(Error::NonPositiveLambda(z[1..].iter().map(|s| s.value()).collect()));
                }
                let tau = w[0].clone();
                let v = &w[1..];
                let bv = b.eval(z, v)?;
                let fv = f2.eval(z, v)?;
                Ok(-(lam * tau.clone() * tau.clone()) + bv * tau * 2.0 + fv)
            }
            Form::General { l } => Ok(l.eval(z, w)?),
        }
    }

    pub fn eval_f64(&self, z: &[f64], w: &[f64]) -> Result<f64> {
        self.eval(z, w)
    }

    pub fn value(&self, z: &SpacetimePoint, w: &SpacetimeVector) -> Result<f64> {
        self.eval_f64(&z.to_vec(), &w.to_vec())
    }

    /// `Λ(x)`, or `−L(z, (1, 0))` for a general Lagrangian.
    pub fn lambda_at(&self, z: &[f64]) -> Result<f64> {
        self.lambda_eval(z)
    }

    pub fn lambda_eval<S: Scalar>(&self, z: &[S]) -> Result<S> {
        match &self.form {
            Form::Splitting { lambda, .. } => lambda.eval(z),
            Form::General { l } => {
                let mut w = vec![S::from_f64(0.0); self.n + 1];
                w[0] = S::from_f64(1.0);
                Ok(-l.eval(z, &w)?)
            }
        }
    }

    /// Whether `w` lies in the cone and in the fiber domain.
    pub fn admits(&self, z: &[f64], w: &[f64]) -> bool {
        if !self.cone.contains(w) {
            return false;
        }
        match &self.fiber_domain {
            None => true,
            Some(d) => {
                let g = self.cone.guard_eps;
                let w2: f64 = w.iter().map(|c| c * c).sum();
                d.eval_f64(z, w).is_ok_and(|val| val > g * g * w2)
            }
        }
    }

    pub fn check_admits(&self, z: &[f64], w: &[f64]) -> Result<()> {
        if !self.cone.contains(w) {
            return Err(Error::OutsideCone(w.to_vec()));
        }
        if !self.admits(z, w) {
            return Err(Error::OutsideFiberDomain(w.to_vec()));
        }
        Ok(())
    }

    /// Whether `x` lies strictly inside the chart bounds.
    pub fn in_chart(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.chart).all(|(c, (lo, hi))| c > lo && c < hi)
    }

    /// Magnitude used to make absolute tolerances relative.
    pub fn scale(&self, z: &[f64], w: &[f64]) -> f64 {
        let mut s = 1.0f64;
        match &self.form {
            Form::Splitting { lambda, b, f2 } => {
                let tau = w[0];
                if let Ok(l) = lambda.eval(z) {
                    s = s.max((l * tau * tau).abs());
                }
                if let Ok(bv) = b.eval(z, &w[1..]) {
                    s = s.max((2.0 * bv * tau).abs());
                }
                if let Ok(fv) = f2.eval(z, &w[1..]) {
                    s = s.max(fv.abs());
                }
            }
            Form::General { l } => {
                let w2: f64 = w.iter().map(|c| c * c).sum();
                s = s.max(w2);
                if let Ok(v) = l.eval_f64(z, w) {
                    s = s.max(v.abs());
                }
            }
        }
        s
    }

    /// Value, gradient and Hessian of `L(z, ·)` in the fiber variables `(τ, v)`.
    pub fn fiber_jet(&self, z: &[f64], w: &[f64]) -> Result<Jet2> {
        let zc: Vec<Jet2> = z.iter().map(|&c| Jet2::constant(c)).collect();
        run_jet(|vars| self.eval(&zc, vars), w)
    }

    /// Value, gradient and Hessian of `L` in all variables `(z, w)`, with `z` first.
    pub fn full_jet(&self, z: &[f64], w: &[f64]) -> Result<Jet2> {
        let d = self.n + 1;
        let mut p = Vec::with_capacity(2 * d);
        p.extend_from_slice(z);
        p.extend_from_slice(w);
        run_jet(|vars| self.eval(&vars[..d], &vars[d..]), &p)
    }

    /// Fiber gradient `∂L/∂(τ, v)` only.
    pub fn fiber_gradient(&self, z: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        use crate::ad::Dual;
        let zc: Vec<Dual> = z.iter().map(|&c| Dual::new(c, 0.0)).collect();
        let mut g = Vec::with_capacity(w.len());
        for i in 0..w.len() {
            let wd: Vec<Dual> =
                w.iter().enumerate().map(|(k, &c)| Dual::new(c, if k == i { 1.0 } else { 0.0 })).collect();
            g.push(self.eval(&zc, &wd)?.eps);
        }
        Ok(g)
    }
}

/// Runs [`jet2`] on a closure returning the crate error type.
pub(crate) fn run_jet<F>(f: F, point: &[f64]) -> Result<Jet2>
where
    F: Fn(&[Jet2]) -> Result<Jet2>,
{
    let captured = std::cell::RefCell::new(None);
    let out = jet2(
        |vars| {
            f(vars).map_err(|e| {
                let ad = match &e {
                    Error::Ad(a) => a.clone(),
                    other => crate::ad::AdError::UnboundVariable(other.to_string()),
                };
                *captured.borrow_mut() = Some(e);
                ad
            })
        },
        point,
    );
    match out {
        Ok(j) => Ok(j),
        Err(e) => Err(captured.into_inner().unwrap_or(Error::Ad(e))),
    }
}
