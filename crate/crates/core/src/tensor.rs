//! Fundamental tensor, signatures and index-1 checks.

use rayon::prelude::*;

use crate::ad::fd_jet2_default;
use crate::error::{Error, Result};
use crate::lagrangian::SpacetimeLagrangian;
use crate::linalg::sym_eigen;
use crate::sampling::SamplingPlan;
use crate::types::{ConeKind, SpacetimePoint, SpacetimeVector, SymBilinear};

/// Relative eigenvalue threshold used for signature decisions.
pub const DEFAULT_EIG_TOL: f64 = 1e-8;

/// `g̃ = ½ ∂²L/∂ż∂ż` at `(z, w)`.
pub fn fundamental_tensor(l: &SpacetimeLagrangian, z: &SpacetimePoint, w: &SpacetimeVector) -> Result<SymBilinear> {
    fundamental_tensor_at(l, &z.to_vec(), &w.to_vec())
}

pub fn fundamental_tensor_at(l: &SpacetimeLagrangian, z: &[f64], w: &[f64]) -> Result<SymBilinear> {
    l.check_admits(z, w)?;
    let j = l.fiber_jet(z, w)?;
    Ok(SymBilinear::from_fn(w.len(), |i, k| 0.5 * j.hessian(i, k)))
}

/// Finite-difference `g̃`, used as an independent oracle.
pub fn fd_fundamental_tensor(l: &SpacetimeLagrangian, z: &[f64], w: &[f64]) -> Result<SymBilinear> {
    l.check_admits(z, w)?;
    let j = fd_jet2_default(|ww| l.eval_f64(z, ww).map_err(to_ad), w)?;
    Ok(SymBilinear::from_fn(w.len(), |i, k| 0.5 * j.hessian(i, k)))
}

fn to_ad(e: Error) -> crate::ad::AdError {
    match e {
        Error::Ad(a) => a,
        other => crate::ad::AdError::UnboundVariable(other.to_string()),
    }
}

/// Counts of negative, zero and positive eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Signature {
    pub n_neg: usize,
    pub n_zero: usize,
    pub n_pos: usize,
    pub tol: f64,
}

impl Signature {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.n_neg, self.n_zero, self.n_pos)
    }
    /// Lorentzian signature `(1, 0, n)`.
    pub fn is_index1(&self) -> bool {
        self.n_neg == 1 && self.n_zero == 0
    }
}

/// Signature from eigenvalues, thresholded at `tol·max(1, spectral radius)`.
pub fn signature_from_eigenvalues(ev: &[f64], tol: f64) -> Signature {
    let s = ev.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let cut = tol * s;
    let mut sig = Signature { n_neg: 0, n_zero: 0, n_pos: 0, tol };
    for &e in ev {
        if e < -cut {
            sig.n_neg += 1;
        } else if e > cut {
            sig.n_pos += 1;
        } else {
            sig.n_zero += 1;
        }
    }
    sig
}

pub fn signature_of(m: &SymBilinear, tol: f64) -> Signature {
    signature_from_eigenvalues(&m.eigenvalues(), tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SemidefiniteVerdict {
    PositiveSemiDef,
    NegativeSemiDef,
    Indefinite,
    Linear,
}

impl std::fmt::Display for SemidefiniteVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::PositiveSemiDef => "positive-semidefinite",
            Self::NegativeSemiDef => "negative-semidefinite",
            Self::Indefinite => "indefinite",
            Self::Linear => "linear",
        };
        f.write_str(s)
    }
}

/// A fiber direction `u` at `(x, v)` with `∂²B(u, u) = eigenvalue`.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianWitness {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemidefiniteReport {
    pub verdict: SemidefiniteVerdict,
    /// Direction of negative curvature; present iff the verdict is `Indefinite`.
    pub witness: Option<HessianWitness>,
    /// Direction of positive curvature, when one was seen.
    pub positive_witness: Option<HessianWitness>,
    pub samples_checked: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Decides the sign of `∂²_yy B` by sampling unit directions over the sample box.
pub fn b_hessian_report(l: &SpacetimeLagrangian, plan: &SamplingPlan, tol: f64) -> Result<SemidefiniteReport> {
    let (_, b, _) = l.parts()?;
    let points = plan.draw_space(l);
    let results: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>, nalgebra::DMatrix<f64>, f64)>> = points
        .par_iter()
        .map(|(z, v)| {
            let x = &z[1..];
            let j = b.fiber_jet(x, v)?;
            let h = j.hessian_matrix();
            let scale = j.real().abs().max(1.0);
            let (ev, vecs) = sym_eigen(&h);
            Ok((x.to_vec(), v.clone(), ev, vecs, scale))
        })
        .collect();
    let mut min_e = f64::INFINITY;
    let mut max_e = f64::NEG_INFINITY;
    let mut neg: Option<HessianWitness> = None;
    let mut pos: Option<HessianWitness> = None;
    let mut all_linear = true;
    let mut checked = 0;
    for r in results {
        let (x, v, ev, vecs, scale) = r?;
        checked += 1;
        let spec = ev.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if spec > 1e-12 * scale {
            all_linear = false;
        }
        let s = spec.max(1.0);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        min_e = min_e.min(lo);
        max_e = max_e.max(hi);
        if lo < -tol * s && neg.as_ref().is_none_or(|w| lo < w.eigenvalue) {
            let u = vecs.column(0).iter().copied().collect();
            neg = Some(HessianWitness { x: x.clone(), v: v.clone(), u, eigenvalue: lo });
        }
        if hi > tol * s && pos.as_ref().is_none_or(|w| hi > w.eigenvalue) {
            let u = vecs.column(ev.len() - 1).iter().copied().collect();
            pos = Some(HessianWitness { x, v, u, eigenvalue: hi });
        }
    }
    if checked == 0 {
        return Err(Error::NoData("no admissible fiber samples".into()));
    }
    let verdict = if all_linear {
        SemidefiniteVerdict::Linear
    } else {
        match (&neg, &pos) {
            (Some(_), Some(_)) => SemidefiniteVerdict::Indefinite,
            (Some(_), None) => SemidefiniteVerdict::NegativeSemiDef,
            _ => SemidefiniteVerdict::PositiveSemiDef,
        }
    };
    let witness = if verdict == SemidefiniteVerdict::Indefinite { neg } else { None };
    Ok(SemidefiniteReport {
        verdict,
        witness,
        positive_witness: pos,
        samples_checked: checked,
        min_eigenvalue: min_e,
        max_eigenvalue: max_e,
    })
}

/// One sampled fundamental tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Index1Row {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub signature: Signature,
}

impl Index1Row {
    pub fn is_index1(&self) -> bool {
        self.signature.is_index1()
    }
}

#[derive(Clone, Debug)]
pub struct Index1Report {
    pub b_report: Option<SemidefiniteReport>,
    pub rows: Vec<Index1Row>,
    pub index1_count: usize,
    /// Fraction of samples with signature `(1, 0, n)`.
    pub fraction: f64,
    pub counterexample: Option<Index1Row>,
    /// Signature failure found on the large-`τ` ladder at the curvature witness.
    pub large_tau_witness: Option<Index1Row>,
    /// Whether the sign of `∂²B` and the sampled signatures satisfy the implication for this cone.
    pub consistent: bool,
}

impl Index1Report {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none() && self.large_tau_witness.is_none() && self.consistent
    }

    pub const CSV_HEADER: &'static str = "kind,z,w,eigenvalues,n_neg,n_zero,n_pos,index1";

    /// Rows `kind,z,w,eigenvalues,n_neg,n_zero,n_pos,index1` with `;`-joined vectors.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let mut push = |kind: &str, r: &Index1Row| {
            out.push_str(&format!(
                "{kind},{},{},{},{},{},{},{}\n",
                join(&r.z),
                join(&r.w),
                join(&r.eigenvalues),
                r.signature.n_neg,
                r.signature.n_zero,
                r.signature.n_pos,
                r.is_index1()
            ));
        };
        for r in &self.rows {
            push("sample", r);
        }
        if let Some(r) = &self.large_tau_witness {
            push("witness", r);
        }
        out
    }
}

pub(crate) fn join(v: &[f64]) -> String {
    v.iter().map(|c| format!("{c:.12e}")).collect::<Vec<_>>().join(";")
}

fn row_at(l: &SpacetimeLagrangian, z: &[f64], w: &[f64], tol: f64) -> Result<Index1Row> {
    let g = fundamental_tensor_at(l, z, w)?;
    let ev = g.eigenvalues();
    let signature = signature_from_eigenvalues(&ev, tol);
    Ok(Index1Row { z: z.to_vec(), w: w.to_vec(), eigenvalues: ev, signature })
}

/// τ ladder used to probe the converse direction at large `|τ|`.
pub const TAU_LADDER: [f64; 3] = [10.0, 100.0, 1000.0];

/// Samples `g̃` over the cone and checks index 1 against the sign of `∂²B`.
pub fn check_index1_region(l: &SpacetimeLagrangian, plan: &SamplingPlan, tol: f64) -> Result<Index1Report> {
    let samples = plan.draw(l);
    if samples.is_empty() {
        return Err(Error::NoData("sampler produced no admissible vectors".into()));
    }
    let rows: Vec<Index1Row> =
        samples.par_iter().map(|s| row_at(l, &s.z, &s.w, tol)).collect::<Result<Vec<_>>>()?;
    let index1_count = rows.iter().filter(|r| r.is_index1()).count();
    let counterexample = rows.iter().find(|r| !r.is_index1()).cloned();
    let fraction = index1_count as f64 / rows.len() as f64;

    let b_report = if l.is_splitting() {
        let bplan = SamplingPlan { n_samples: plan.n_samples.max(1), ..plan.clone() };
        Some(b_hessian_report(l, &bplan, tol)?)
    } else {
        None
    };

    let mut large_tau_witness = None;
    let mut consistent = true;
    if let Some(rep) = &b_report {
        use SemidefiniteVerdict::*;
        let premise = matches!(
            (rep.verdict, l.cone.kind),
            (PositiveSemiDef | Linear, ConeKind::UpperHalf)
                | (NegativeSemiDef | Linear, ConeKind::LowerHalf)
                | (Linear, ConeKind::FullSlit)
        );
        if premise && index1_count != rows.len() {
            consistent = false;
        }
        // Large |τ| amplifies τ∂²B against ½∂²F²: a wrong-signed curvature direction breaks index 1.
        let mut probes = Vec::new();
        if l.cone.admits_future() {
            if let Some(wt) = &rep.witness {
                probes.push((1.0, wt));
            }
        }
        if l.cone.admits_past() {
            if let Some(wt) = &rep.positive_witness {
                if rep.verdict != PositiveSemiDef || l.cone.kind != ConeKind::UpperHalf {
                    probes.push((-1.0, wt));
                }
            }
        }
        'outer: for (sign, wt) in probes {
            let mut z = vec![0.0];
            z.extend_from_slice(&wt.x);
            let (_, _, f2) = l.parts()?;
            let lam = l.lambda_at(&z)?;
            let scale = (f2.at(&wt.x, &wt.v)?.max(0.0) / lam).sqrt().max(1.0);
            for &t in &TAU_LADDER {
                let mut w = vec![sign * t * scale];
                w.extend_from_slice(&wt.v);
                if !l.admits(&z, &w) {
                    continue;
                }
                let r = row_at(l, &z, &w, tol)?;
                if !r.is_index1() {
                    large_tau_witness = Some(r);
                    break 'outer;
                }
            }
        }
    }
    Ok(Index1Report { b_report, rows, index1_count, fraction, counterexample, large_tau_witness, consistent })
}
