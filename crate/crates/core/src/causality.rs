//! Finsler distances, forward and backward balls, chronological sets and
//! bounded-box evidence for the causal-simplicity criteria.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fermat::{fermat_hypotheses, optical_metrics, OpticalKind};
use crate::geodesics::{finsler_geodesic, geodesic_bvp_shoot, spread_directions, ShootOptions, StopReason};
use crate::lagrangian::{base_to_z, FiberLagrangian, SpacetimeLagrangian};
use crate::linalg::{norm, sub};
use crate::sampling::SamplingPlan;
use crate::types::ConeKind;

/// Region removed from a grid, `true` where a point is excluded.
pub type Mask = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Regular lattice over a box.
#[derive(Clone)]
pub struct GridSpec {
    pub bounds: Vec<(f64, f64)>,
    /// Nodes per axis.
    pub resolution: usize,
    /// Adds the offsets with entries up to 2 (knight moves in the plane).
    pub order2: bool,
    pub mask: Option<Mask>,
}

impl std::fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridSpec")
            .field("bounds", &self.bounds)
            .field("resolution", &self.resolution)
            .field("order2", &self.order2)
            .field("masked", &self.mask.is_some())
            .finish()
    }
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, resolution: usize) -> Self {
        Self { bounds, resolution: resolution.max(2), order2: false, mask: None }
    }

    pub fn with_order2(mut self, on: bool) -> Self {
        self.order2 = on;
        self
    }

    pub fn with_mask(mut self, mask: Mask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / (self.resolution - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    fn index(&self, cell: &[usize]) -> usize {
        cell.iter().rev().fold(0, |acc, &c| acc * self.resolution + c)
    }

    fn cell(&self, mut idx: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|_| {
                let c = idx % self.resolution;
                idx /= self.resolution;
                c
            })
            .collect()
    }

    pub fn point(&self, cell: &[usize]) -> Vec<f64> {
        cell.iter().enumerate().map(|(a, &c)| self.bounds[a].0 + c as f64 * self.spacing(a)).collect()
    }

    pub fn point_of(&self, idx: usize) -> Vec<f64> {
        self.point(&self.cell(idx))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.bounds).all(|(c, (lo, hi))| c >= lo && c <= hi)
    }

    fn masked(&self, x: &[f64]) -> bool {
        self.mask.as_ref().is_some_and(|m| m(x))
    }

    /// Nearest lattice node.
    pub fn nearest(&self, x: &[f64]) -> Result<usize> {
        if !self.contains(x) || self.masked(x) {
            return Err(Error::OutOfBox(x.to_vec()));
        }
        let cell: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(a, c)| (((c - self.bounds[a].0) / self.spacing(a)).round() as usize).min(self.resolution - 1))
            .collect();
        Ok(self.index(&cell))
    }

    /// Neighbor offsets: the `3ⁿ − 1` unit moves, plus primitive moves with entries up to 2 when `order2`.
    pub fn offsets(&self) -> Vec<Vec<i64>> {
        let n = self.dim();
        let r: i64 = if self.order2 { 2 } else { 1 };
        let side = (2 * r + 1) as usize;
        let mut out = Vec::new();
        for k in 0..side.pow(n as u32) {
            let mut k = k;
            let off: Vec<i64> = (0..n)
                .map(|_| {
                    let c = (k % side) as i64 - r;
                    k /= side;
                    c
                })
                .collect();
            let g = off.iter().fold(0i64, |g, &c| gcd(g, c.abs()));
            if g == 1 {
                out.push(off);
            }
        }
        out
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Lattice distances from `source` (`reverse = false`) or to `source` (`reverse = true`).
///
/// The edge from node `a` to node `b` costs `F1(midpoint, b − a)`.
pub fn grid_distance_field(f1: &FiberLagrangian, source: &[f64], grid: &GridSpec, reverse: bool) -> Result<Vec<f64>> {
    let n = grid.dim();
    let start = grid.nearest(source)?;
    let offsets = grid.offsets();
    let total = grid.node_count();
    let blocked: Vec<bool> = (0..total).into_par_iter().map(|i| grid.masked(&grid.point_of(i))).collect();
    let mut dist = vec![f64::INFINITY; total];
    let mut done = vec![false; total];
    dist[start] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem(0.0, start));
    let res = grid.resolution as i64;
    while let Some(HeapItem(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        let cu = grid.cell(u);
        let pu = grid.point(&cu);
        for off in &offsets {
            let mut cv = Vec::with_capacity(n);
            let mut inside = true;
            for (c, o) in cu.iter().zip(off) {
                let k = *c as i64 + o;
                if k < 0 || k >= res {
                    inside = false;
                    break;
                }
                cv.push(k as usize);
            }
            if !inside {
                continue;
            }
            let v = grid.index(&cv);
            if done[v] || blocked[v] {
                continue;
            }
            let pv = grid.point(&cv);
            let mid: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| 0.5 * (a + b)).collect();
            if grid.masked(&mid) {
                continue;
            }
            let edge = if reverse { sub(&pu, &pv) } else { sub(&pv, &pu) };
            let w = f1.eval(&base_to_z(&mid), &edge)?;
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapItem(nd, v));
            }
        }
    }
    Ok(dist)
}

/// Multilinear interpolation of a lattice field; infinite where any corner is unreachable.
pub fn interpolate(field: &[f64], grid: &GridSpec, x: &[f64]) -> f64 {
    let n = grid.dim();
    let mut base = Vec::with_capacity(n);
    let mut frac = Vec::with_capacity(n);
    for (a, c) in x.iter().enumerate() {
        let u = ((c - grid.bounds[a].0) / grid.spacing(a)).clamp(0.0, (grid.resolution - 1) as f64);
        let b = (u.floor() as usize).min(grid.resolution - 2);
        base.push(b);
        frac.push(u - b as f64);
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << n) {
        let mut wgt = 1.0;
        let mut cell = Vec::with_capacity(n);
        for a in 0..n {
            let bit = (corner >> a) & 1;
            wgt *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            cell.push(base[a] + bit);
        }
        if wgt == 0.0 {
            continue;
        }
        let v = field[grid.index(&cell)];
        if !v.is_finite() {
            return f64::INFINITY;
        }
        acc += wgt * v;
    }
    acc
}

#[derive(Clone, Debug)]
pub enum DistanceMethod {
    Shooting(ShootOptions),
    Grid(GridSpec),
}

/// Distance from `x0` to `x1` of the Finsler metric `F1`.
pub fn finsler_distance(f1: &FiberLagrangian, x0: &[f64], x1: &[f64], method: &DistanceMethod) -> Result<f64> {
    if x0 == x1 {
        return Ok(0.0);
    }
    match method {
        DistanceMethod::Shooting(opts) => Ok(geodesic_bvp_shoot(f1, x0, x1, opts)?.length),
        DistanceMethod::Grid(grid) => {
            let target = grid.nearest(x1)?;
            let field = grid_distance_field(f1, x0, grid, false)?;
            Ok(field[target])
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallKind {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallBoundary {
    pub center: Vec<f64>,
    pub radius: f64,
    pub kind: BallKind,
    /// Euclidean unit direction from the center and the boundary point along it.
    pub direction_samples: Vec<(Vec<f64>, Vec<f64>)>,
}

impl BallBoundary {
    /// Largest Euclidean distance from the center along `dir`, by nearest sampled direction.
    pub fn extent(&self, dir: &[f64]) -> Option<f64> {
        self.direction_samples
            .iter()
            .max_by(|a, b| crate::linalg::dot(&a.0, dir).total_cmp(&crate::linalg::dot(&b.0, dir)))
            .map(|(_, p)| norm(&sub(p, &self.center)))
    }
}

/// Unit directions used for ball sweeps: `n_dirs` on the circle, a Fibonacci sphere otherwise.
pub fn sweep_directions(n: usize, n_dirs: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n_dirs)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n_dirs as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            if n_dirs == 128 {
                return spread_directions(n);
            }
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n_dirs)
                .map(|k| {
                    let zc = 1.0 - 2.0 * (k as f64 + 0.5) / n_dirs as f64;
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

/// Boundary of the forward or backward ball of radius `r`.
///
/// Each boundary point is the endpoint of the unit-speed geodesic of length `r`
/// leaving the center along the sampled direction; backward balls use the
/// reversed metric.
pub fn ball_boundary(
    f1: &FiberLagrangian,
    center: &[f64],
    r: f64,
    kind: BallKind,
    n_dirs: usize,
    opts: &ShootOptions,
) -> Result<BallBoundary> {
    if r <= 0.0 {
        return Err(Error::ParamOutOfRange { name: "radius".into(), value: r, min: 0.0, max: f64::INFINITY });
    }
    let metric = match kind {
        BallKind::Forward => f1.clone(),
        BallKind::Backward => f1.reversed(),
    };
    let dirs = sweep_directions(center.len(), n_dirs);
    let direction_samples = dirs
        .par_iter()
        .map(|u| {
            let speed = metric.at(center, u)?;
            let v: Vec<f64> = u.iter().map(|c| c * r / speed).collect();
            let t = finsler_geodesic(&metric, center, &v, opts)?;
            if t.stop != StopReason::Completed {
                return Err(Error::OutOfBox(t.x.last().cloned().unwrap_or_default()));
            }
            Ok((u.clone(), t.x.last().cloned().unwrap_or_default()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BallBoundary { center: center.to_vec(), radius: r, kind, direction_samples })
}

/// Ball boundary from a lattice field by bisection along rays.
pub fn ball_boundary_grid(
    f1: &FiberLagrangian,
    center: &[f64],
    r: f64,
    kind: BallKind,
    n_dirs: usize,
    grid: &GridSpec,
) -> Result<BallBoundary> {
    let field = grid_distance_field(f1, center, grid, kind == BallKind::Backward)?;
    let diam = norm(&grid.bounds.iter().map(|(a, b)| b - a).collect::<Vec<_>>());
    let samples = sweep_directions(center.len(), n_dirs)
        .into_iter()
        .filter_map(|u| {
            let at = |s: f64| -> Vec<f64> { center.iter().zip(&u).map(|(c, d)| c + s * d).collect() };
            let mut hi = diam;
            while hi > 0.0 && !grid.contains(&at(hi)) {
                hi *= 0.9;
            }
            if interpolate(&field, grid, &at(hi)) < r {
                return None;
            }
            let mut lo = 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if interpolate(&field, grid, &at(mid)) < r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some((u.clone(), at(0.5 * (lo + hi))))
        })
        .collect();
    Ok(BallBoundary { center: center.to_vec(), radius: r, kind, direction_samples: samples })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChronoSign {
    Future,
    Past,
}

/// Slices `{t} × ball` whose union is `I^±(p0)`.
#[derive(Clone, Debug)]
pub struct ChronoSet {
    pub base_point: Vec<f64>,
    pub sign: ChronoSign,
    pub metric: FiberLagrangian,
    pub ball_kind: BallKind,
    /// `+1` when slices sit at `t0 + r`, `−1` for `t0 − r`.
    pub time_direction: f64,
    pub slices: Vec<(f64, BallBoundary)>,
}

/// Membership verdict with the open-ball convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Outside,
    /// Within the tolerance band of the boundary.
    Boundary,
}

impl ChronoSet {
    /// Membership of `z = (t, x)`, comparing the metric distance with `|t − t0|`.
    pub fn membership(&self, z: &[f64], method: &DistanceMethod, tol: f64) -> Result<Membership> {
        let x0 = &self.base_point[1..];
        let r = self.time_direction * (z[0] - self.base_point[0]);
        if r <= 0.0 {
            return Ok(Membership::Outside);
        }
        let x = &z[1..];
        let d = match self.ball_kind {
            BallKind::Forward => finsler_distance(&self.metric, x0, x, method)?,
            BallKind::Backward => finsler_distance(&self.metric, x, x0, method)?,
        };
        Ok(if d < r - tol {
            Membership::Inside
        } else if d > r + tol {
            Membership::Outside
        } else {
            Membership::Boundary
        })
    }

    pub fn to_csv(&self) -> String {
        let n = self.base_point.len() - 1;
        let xs: Vec<String> = (1..=n).map(|i| format!("boundary_x{i}")).collect();
        let mut out = format!("kind,t,r,direction_angle,{}\n", xs.join(","));
        let kind = match self.sign {
            ChronoSign::Future => "future",
            ChronoSign::Past => "past",
        };
        for (t, ball) in &self.slices {
            for (u, p) in &ball.direction_samples {
                let angle = u[1].atan2(u[0]);
                out.push_str(&format!("{kind},{t:.12e},{:.12e},{angle:.12e},{}\n", ball.radius, crate::tensor::join(p)));
            }
        }
        out
    }
}

/// Slices of `I⁺(p0)` or `I⁻(p0)` at the given radii.
///
/// On the upper half cone (and for linear `B`) the slices are `{t0 ± r}` times
/// forward (future) or backward (past) balls of `F_B`; on the lower half cone
/// they are `{t0 ∓ r}` times balls of `F_B⁻`.
pub fn chronological_set(
    l: &SpacetimeLagrangian,
    p0: &[f64],
    sign: ChronoSign,
    radii: &[f64],
    n_dirs: usize,
    opts: &ShootOptions,
    plan: &SamplingPlan,
) -> Result<ChronoSet> {
    let pair = optical_metrics(l)?;
    let hyp = fermat_hypotheses(l, plan, 1e-9)?;
    let lower = l.cone.kind == ConeKind::LowerHalf;
    let kind = if lower { OpticalKind::FBMinus } else { OpticalKind::FB };
    let failed = hyp.failures(kind);
    if !failed.is_empty() {
        return Err(Error::HypothesisViolated(failed.join("; ")));
    }
    let metric = pair.metric(kind).clone();
    let (ball_kind, time_direction) = match (sign, lower) {
        (ChronoSign::Future, false) => (BallKind::Forward, 1.0),
        (ChronoSign::Past, false) => (BallKind::Backward, -1.0),
        (ChronoSign::Future, true) => (BallKind::Forward, -1.0),
        (ChronoSign::Past, true) => (BallKind::Backward, 1.0),
    };
    let x0 = &p0[1..];
    let slices = radii
        .iter()
        .map(|&r| Ok((p0[0] + time_direction * r, ball_boundary(&metric, x0, r, ball_kind, n_dirs, opts)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChronoSet { base_point: p0.to_vec(), sign, metric, ball_kind, time_direction, slices })
}

// Evidence for the causal-simplicity criteria.

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectednessEvidence {
    pub pairs: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Largest `|d_shoot − d_grid| / max(d_grid, 1)` over successful pairs.
    pub max_relative_gap: f64,
    /// Pairs without a connecting minimizer inside the admissible region.
    pub failures: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletenessEvidence {
    pub rays: usize,
    /// Rays that reached the box boundary.
    pub exited_box: usize,
    /// Rays that stopped inside the box at finite parameter.
    pub stalled_inside: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionEvidence {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: f64,
    pub s: f64,
    pub cells: usize,
    pub touches_box_boundary: bool,
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceReport {
    pub label: &'static str,
    pub connectedness: ConnectednessEvidence,
    pub completeness: CompletenessEvidence,
    pub intersection: IntersectionEvidence,
}

impl EvidenceReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: connectedness {}/{} (max gap {:.3e}); completeness {}/{} rays exit the box, {} stall; intersection {} cells, bounded = {}",
            self.label,
            self.connectedness.successes,
            self.connectedness.pairs,
            self.connectedness.max_relative_gap,
            self.completeness.exited_box,
            self.completeness.rays,
            self.completeness.stalled_inside,
            self.intersection.cells,
            self.intersection.bounded
        )
    }
}

fn trajectory_avoids(grid: &GridSpec, pts: &[Vec<f64>]) -> bool {
    pts.iter().all(|p| grid.contains(p) && !grid.masked(p))
}

/// Sampled evidence on a bounded box for the Fermat metric of `l`.
pub fn causality2_evidence(
    l: &SpacetimeLagrangian,
    grid: &GridSpec,
    pairs: usize,
    seed: u64,
    opts: &ShootOptions,
) -> Result<EvidenceReport> {
    let pair = optical_metrics(l)?;
    let kind = if l.cone.kind == ConeKind::LowerHalf { OpticalKind::FBMinus } else { OpticalKind::FB };
    let f1 = pair.metric(kind).clone();
    evidence_for_metric(&f1, grid, pairs, seed, opts)
}

pub fn evidence_for_metric(
    f1: &FiberLagrangian,
    grid: &GridSpec,
    pairs: usize,
    seed: u64,
    opts: &ShootOptions,
) -> Result<EvidenceReport> {
    let n = grid.dim();
    let mut rng = SamplingPlan::new(seed, pairs).rng();
    let shrink = 0.8;
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        loop {
            let p: Vec<f64> = grid
                .bounds
                .iter()
                .map(|(lo, hi)| {
                    let c = 0.5 * (lo + hi);
                    let h = 0.5 * (hi - lo) * shrink;
                    rng.random_range(c - h..=c + h)
                })
                .collect();
            if !grid.masked(&p) {
                return p;
            }
        }
    };
    let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs).map(|_| (draw(&mut rng), draw(&mut rng))).collect();
    // Off-axis pairs need the wider stencil to keep lattice anisotropy near 2.7%.
    let oracle = grid.clone().with_order2(true);
    let results: Vec<(bool, f64)> = pts
        .par_iter()
        .map(|(x, y)| {
            let shot = geodesic_bvp_shoot(f1, x, y, opts).ok().filter(|s| trajectory_avoids(grid, &s.trajectory.x));
            match shot {
                Some(s) => {
                    let field = grid_distance_field(f1, x, &oracle, false)?;
                    let dg = interpolate(&field, &oracle, y);
                    Ok((true, (s.length - dg).abs() / dg.max(1.0)))
                }
                None => Ok((false, 0.0)),
            }
        })
        .collect::<Result<_>>()?;
    let successes = results.iter().filter(|r| r.0).count();
    let connectedness = ConnectednessEvidence {
        pairs,
        successes,
        success_rate: if pairs == 0 { 1.0 } else { successes as f64 / pairs as f64 },
        max_relative_gap: results.iter().filter(|r| r.0).fold(0.0f64, |m, r| m.max(r.1)),
        failures: pts.iter().zip(&results).filter(|(_, r)| !r.0).map(|(p, _)| p.clone()).collect(),
    };

    // Unit-speed rays from the box center, followed well past the box diameter.
    let center: Vec<f64> = grid.bounds.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let diam = norm(&grid.bounds.iter().map(|(a, b)| b - a).collect::<Vec<_>>());
    let dirs = sweep_directions(n, if n == 2 { 16 } else { 32 });
    let ray_opts = ShootOptions { chart: Some(grid.bounds.clone()), ..opts.clone() };
    let rays: Vec<bool> = dirs
        .par_iter()
        .map(|u| {
            if grid.masked(&center) {
                return true;
            }
            let Ok(speed) = f1.at(&center, u) else { return false };
            let v: Vec<f64> = u.iter().map(|c| c * 4.0 * diam / speed).collect();
            match finsler_geodesic(f1, &center, &v, &ray_opts) {
                Ok(t) => matches!(t.stop, StopReason::ChartExit(_)),
                Err(_) => false,
            }
        })
        .collect();
    let exited = rays.iter().filter(|b| **b).count();
    let completeness = CompletenessEvidence { rays: rays.len(), exited_box: exited, stalled_inside: rays.len() - exited };

    let (x, y) = pts.first().cloned().unwrap_or_else(|| (center.clone(), center.clone()));
    let fwd = grid_distance_field(f1, &x, grid, false)?;
    let bwd = grid_distance_field(f1, &y, grid, true)?;
    let dxy = fwd[grid.nearest(&y)?];
    let radius = if dxy > 0.0 { dxy } else { 0.1 * diam };
    let mut cells = 0;
    let mut touches = false;
    for i in 0..grid.node_count() {
        if fwd[i] <= radius && bwd[i] <= radius {
            cells += 1;
            let c = grid.cell(i);
            if c.iter().any(|&k| k == 0 || k == grid.resolution - 1) {
                touches = true;
            }
        }
    }
    let intersection = IntersectionEvidence { x, y, r: radius, s: radius, cells, touches_box_boundary: touches, bounded: cells > 0 && !touches };
    Ok(EvidenceReport { label: "EVIDENCE", connectedness, completeness, intersection })
}
