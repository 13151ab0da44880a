//! Adaptive Dormand–Prince 5(4) integrator with exact landing on checkpoints.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, h0: None, h_min: 1e-14, h_max: f64::INFINITY, max_steps: 1_000_000 }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub rtol: f64,
    pub atol: f64,
}

/// Observer decision after an accepted step.
#[derive(Clone, Debug, PartialEq)]
pub enum Control {
    Continue,
    /// Stop integration; the current state is kept as the last one.
    Stop,
}

#[derive(Clone, Debug)]
pub struct OdeOutcome {
    pub s_end: f64,
    pub y_end: Vec<f64>,
    pub stats: OdeStats,
    /// True when the observer stopped integration before `s1`.
    pub stopped: bool,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus the embedded fourth-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(s, y)` from `s0` to `s1`.
///
/// `checkpoints` (inside `(s0, s1]`, any order) are hit exactly by accepted
/// steps. `observer(s, y, at_checkpoint)` runs on the initial state and after
/// every accepted step. A failing right-hand side inside a step shrinks the step
/// instead of aborting, so domain guards near the edge of the admissible region
/// are approached gradually.
pub fn integrate<F, O>(
    mut f: F,
    s0: f64,
    y0: &[f64],
    s1: f64,
    checkpoints: &[f64],
    opts: &OdeOptions,
    mut observer: O,
) -> Result<OdeOutcome>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64], bool) -> Result<Control>,
{
    let dim = y0.len();
    let dir = if s1 >= s0 { 1.0 } else { -1.0 };
    let mut stats = OdeStats { rtol: opts.rtol, atol: opts.atol, ..OdeStats::default() };
    let mut marks: Vec<f64> = checkpoints.iter().copied().filter(|&c| (c - s0) * dir > 0.0 && (c - s1) * dir < 0.0).collect();
    marks.push(s1);
    marks.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    marks.dedup();
    let mut next_mark = 0;

    let mut s = s0;
    let mut y = y0.to_vec();
    if observer(s, &y, false)? == Control::Stop {
        return Ok(OdeOutcome { s_end: s, y_end: y, stats, stopped: true });
    }
    if s0 == s1 {
        return Ok(OdeOutcome { s_end: s, y_end: y, stats, stopped: false });
    }

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    f(s, &y, &mut k[0])?;
    stats.evaluations += 1;

    let span = (s1 - s0).abs();
    let mut h = opts.h0.unwrap_or_else(|| initial_step(&y, &k[0], opts, span)).min(opts.h_max);
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];

    while next_mark < marks.len() {
        if stats.steps + stats.rejected >= opts.max_steps {
            return Err(Error::StepFailure(s));
        }
        let target = marks[next_mark];
        let remaining = (target - s).abs();
        let landing = h >= remaining * (1.0 - 1e-12);
        let h_try = if landing { remaining } else { h };
        if h_try < opts.h_min && !landing {
            return Err(Error::StepFailure(s));
        }
        let hs = dir * h_try;
        let mut stage_failed = false;
        for st in 1..7 {
            for i in 0..dim {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(st) {
                    acc += hs * A[st][j] * kj[i];
                }
                ytmp[i] = acc;
            }
            let (_, tail) = k.split_at_mut(st);
            stats.evaluations += 1;
            if f(s + C[st] * hs, &ytmp, &mut tail[0]).is_err() {
                stage_failed = true;
                break;
            }
        }
        if stage_failed {
            stats.rejected += 1;
            h = h_try * 0.25;
            if h < opts.h_min {
                return Err(Error::StepFailure(s));
            }
            continue;
        }
        // Stage 7 is evaluated at the fifth-order solution.
        ynew.copy_from_slice(&ytmp);
        let mut err = 0.0f64;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err = err.max((hs * e).abs() / sc);
        }
        if !err.is_finite() {
            stats.rejected += 1;
            h = h_try * 0.2;
            continue;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            stats.steps += 1;
            s = if landing { target } else { s + hs };
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            if landing {
                next_mark += 1;
            }
            if observer(s, &y, landing)? == Control::Stop {
                return Ok(OdeOutcome { s_end: s, y_end: y, stats, stopped: true });
            }
            // Keep the unclamped step size when this step was shortened to land on a mark.
            h = if landing { h.max(h_try * factor).min(opts.h_max) } else { (h_try * factor).min(opts.h_max) };
        } else {
            stats.rejected += 1;
            h = h_try * factor.min(1.0);
        }
    }
    Ok(OdeOutcome { s_end: s, y_end: y, stats, stopped: false })
}

fn initial_step(y: &[f64], f0: &[f64], opts: &OdeOptions, span: f64) -> f64 {
    let sc = |i: usize| opts.atol + opts.rtol * y[i].abs();
    let d0 = (0..y.len()).map(|i| (y[i] / sc(i)).powi(2)).sum::<f64>().sqrt();
    let d1 = (0..y.len()).map(|i| (f0[i] / sc(i)).powi(2)).sum::<f64>().sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    // Fifth-order local error scales like h⁵; start near the tolerance-matched size.
    h.min(span).min(0.1 * opts.rtol.max(1e-16).powf(0.2) * span.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut last = (0.0, vec![]);
        let out = integrate(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            2.0,
            &[0.5, 1.0, 1.5],
            &OdeOptions::default(),
            |s, y, _| {
                last = (s, y.to_vec());
                Ok(Control::Continue)
            },
        )
        .unwrap();
        assert_eq!(out.s_end, 2.0);
        assert!((out.y_end[0] - (-2.0f64).exp()).abs() < 1e-9);
        assert_eq!(last.0, 2.0);
    }

    #[test]
    fn harmonic_oscillator_hits_checkpoints_exactly() {
        let marks: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let mut seen = Vec::new();
        let out = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            10.0,
            &marks,
            &OdeOptions::default(),
            |s, y, cp| {
                if cp {
                    seen.push(s);
                    assert!((y[0] - s.cos()).abs() < 1e-8, "{s}");
                }
                Ok(Control::Continue)
            },
        )
        .unwrap();
        assert_eq!(seen, marks);
        let energy = out.y_end[0].powi(2) + out.y_end[1].powi(2);
        assert!((energy - 1.0).abs() < 1e-9);
    }

    #[test]
    fn backward_integration() {
        let out = integrate(
            |_, _, dy| {
                dy[0] = 1.0;
                Ok(())
            },
            1.0,
            &[0.0],
            -1.0,
            &[0.0],
            &OdeOptions::default(),
            |_, _, _| Ok(Control::Continue),
        )
        .unwrap();
        assert!((out.y_end[0] + 2.0).abs() < 1e-13);
    }

    #[test]
    fn observer_can_stop() {
        let out = integrate(
            |_, _, dy| {
                dy[0] = 1.0;
                Ok(())
            },
            0.0,
            &[0.0],
            10.0,
            &[],
            &OdeOptions::default(),
            |_, y, _| Ok(if y[0] > 1.0 { Control::Stop } else { Control::Continue }),
        )
        .unwrap();
        assert!(out.stopped);
        assert!(out.s_end < 10.0 && out.y_end[0] > 1.0);
    }

    #[test]
    fn failing_rhs_shrinks_the_step() {
        // The right-hand side refuses to look past y = 1.5 but the solution reaches 1.
        let out = integrate(
            |_, y, dy| {
                if y[0] > 1.5 {
                    return Err(Error::ZeroVelocity);
                }
                dy[0] = 1.0;
                Ok(())
            },
            0.0,
            &[0.0],
            1.0,
            &[],
            &OdeOptions { h0: Some(10.0), ..OdeOptions::default() },
            |_, _, _| Ok(Control::Continue),
        )
        .unwrap();
        assert!((out.y_end[0] - 1.0).abs() < 1e-13);
    }
}
