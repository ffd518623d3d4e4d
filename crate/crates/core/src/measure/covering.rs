//! Ball coverings of point clouds and the upper bounds they give for the
//! kappa-approximating weighted Hausdorff measures.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{axiom_probe, h_phi, h_phi_all, BoxDomain, CostVariant, Musielak};
use crate::error::{Error, Result};
use crate::grid::Ball;

/// Analytic shape of a point cloud, when known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetDescriptor {
    Point,
    Segment {
        start: Vec<f64>,
        end: Vec<f64>,
    },
    /// Centers of flagged lattice cells of the given side length.
    GridCells {
        spacing: f64,
    },
}

/// Finite sample standing in for a set `E`. Every point of `E` lies within
/// `resolution / 2` of a sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloudSet {
    pub points: Vec<Vec<f64>>,
    pub resolution: f64,
    pub descriptor: Option<SetDescriptor>,
}

impl PointCloudSet {
    pub fn new(points: Vec<Vec<f64>>, resolution: f64) -> Result<Self> {
        if !(resolution >= 0.0 && resolution.is_finite()) {
            return Err(Error::Options(format!("resolution {resolution} must be finite and >= 0")));
        }
        if let Some(first) = points.first() {
            if points.iter().any(|p| p.len() != first.len() || p.iter().any(|v| !v.is_finite())) {
                return Err(Error::Shape("points must be finite and of one dimension".into()));
            }
        }
        Ok(PointCloudSet { points, resolution, descriptor: None })
    }

    pub fn empty() -> Self {
        PointCloudSet { points: Vec::new(), resolution: 0.0, descriptor: None }
    }

    pub fn point(x: Vec<f64>) -> Self {
        PointCloudSet { points: vec![x], resolution: 0.0, descriptor: Some(SetDescriptor::Point) }
    }

    /// `samples` equally spaced points on the closed segment.
    pub fn segment(start: Vec<f64>, end: Vec<f64>, samples: usize) -> Result<Self> {
        if samples < 2 || start.len() != end.len() {
            return Err(Error::Options("a segment needs two endpoints and at least two samples".into()));
        }
        let len = dist(&start, &end);
        let points = (0..samples)
            .map(|i| {
                let s = i as f64 / (samples - 1) as f64;
                start.iter().zip(&end).map(|(a, b)| a + s * (b - a)).collect()
            })
            .collect();
        let mut set = PointCloudSet::new(points, len / (samples - 1) as f64)?;
        set.descriptor = Some(SetDescriptor::Segment { start, end });
        Ok(set)
    }

    /// Cell centers, measured as points.
    pub fn cells(centers: Vec<Vec<f64>>, spacing: f64) -> Result<Self> {
        let mut set = PointCloudSet::new(centers, 0.0)?;
        set.descriptor = Some(SetDescriptor::GridCells { spacing });
        Ok(set)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn union(&self, other: &PointCloudSet) -> Result<PointCloudSet> {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        PointCloudSet::new(points, self.resolution.max(other.resolution))
    }

    pub(crate) fn check_inside(&self, domain: &BoxDomain) -> Result<()> {
        match self.points.iter().find(|p| !domain.contains_point(p)) {
            Some(p) => Err(Error::Geometry(format!("set point {p:?} is not inside the domain"))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    pub balls: Vec<Ball>,
    pub kappa: f64,
}

impl Covering {
    /// Whether every sample lies within `r - resolution / 2` of a center.
    pub fn certifies(&self, set: &PointCloudSet) -> bool {
        set.points.iter().all(|p| self.balls.iter().any(|b| covers(b, p, set.resolution)))
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn covers(ball: &Ball, p: &[f64], resolution: f64) -> bool {
    dist(&ball.center, p) <= ball.radius - 0.5 * resolution + 1e-12 * ball.radius
}

/// Sum of ball costs.
pub fn covering_cost(phi: &dyn Musielak, covering: &Covering, variant: CostVariant) -> Result<f64> {
    covering.balls.iter().map(|b| h_phi(phi, b, variant)).sum()
}

const LADDER_STEPS: usize = 7;

/// Candidate radii `kappa 2^(-j/2)`, `j = 0..7`, keeping those at least the
/// cloud resolution.
pub fn radius_ladder(kappa: f64, resolution: f64) -> Result<Vec<f64>> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::Options(format!("kappa = {kappa} must lie in (0, 1]")));
    }
    if kappa <= 2.0 * resolution {
        return Err(Error::Resolution(format!("kappa = {kappa} is not above twice the resolution {resolution}")));
    }
    Ok((0..LADDER_STEPS).map(|j| kappa * 2f64.powf(-(j as f64) / 2.0)).filter(|&r| r >= resolution).collect())
}

/// Uniform bucketing of the samples for neighbour queries.
struct Buckets {
    size: f64,
    map: HashMap<Vec<i64>, Vec<usize>>,
}

impl Buckets {
    fn new(points: &[Vec<f64>], size: f64) -> Self {
        let mut map: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(p, size)).or_default().push(i);
        }
        Buckets { size, map }
    }

    fn key(p: &[f64], size: f64) -> Vec<i64> {
        p.iter().map(|v| (v / size).floor() as i64).collect()
    }

    /// Indices of samples within `radius <= size` of `x`, in increasing order.
    fn near(&self, points: &[Vec<f64>], x: &[f64], radius: f64) -> Vec<usize> {
        let base = Self::key(x, self.size);
        let n = base.len();
        let mut out = Vec::new();
        let mut offset = vec![-1i64; n];
        loop {
            let key: Vec<i64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
            if let Some(list) = self.map.get(&key) {
                out.extend(list.iter().copied().filter(|&i| dist(&points[i], x) <= radius));
            }
            let mut k = 0;
            while k < n && offset[k] == 1 {
                offset[k] = -1;
                k += 1;
            }
            if k == n {
                break;
            }
            offset[k] += 1;
        }
        out.sort_unstable();
        out
    }
}

/// Lattice points of spacing `step` (aligned with the origin) within
/// `reach` of `p`.
fn dyadic_centers(p: &[f64], step: f64, reach: f64) -> Vec<Vec<f64>> {
    let n = p.len();
    let lo: Vec<i64> = p.iter().map(|v| ((v - reach) / step).ceil() as i64).collect();
    let hi: Vec<i64> = p.iter().map(|v| ((v + reach) / step).floor() as i64).collect();
    let mut out = Vec::new();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return out;
    }
    let mut idx = lo.clone();
    loop {
        let c: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        if dist(&c, p) <= reach {
            out.push(c);
        }
        let mut k = 0;
        while k < n && idx[k] == hi[k] {
            idx[k] = lo[k];
            k += 1;
        }
        if k == n {
            break;
        }
        idx[k] += 1;
    }
    out
}

const MAX_SAMPLE_CENTERS: usize = 24;

struct Search<'a> {
    phi: &'a dyn Musielak,
    set: &'a PointCloudSet,
    ladder: Vec<f64>,
    buckets: Buckets,
    variant: CostVariant,
    /// Restrict centers to samples of the set.
    centers_on_set: bool,
}

impl Search<'_> {
    fn cost(&self, ball: &Ball) -> Result<f64> {
        h_phi(self.phi, ball, self.variant)
    }

    fn members(&self, ball: &Ball) -> Vec<usize> {
        let pts = &self.set.points;
        let reach = ball.radius - 0.5 * self.set.resolution;
        self.buckets
            .near(pts, &ball.center, ball.radius)
            .into_iter()
            .filter(|&i| dist(&pts[i], &ball.center) <= reach + 1e-12 * ball.radius)
            .collect()
    }

    fn candidate_centers(&self, p: usize, reach: f64, radius: f64, covered: &[bool]) -> Vec<Vec<f64>> {
        let pts = &self.set.points;
        let mut centers = vec![pts[p].clone()];
        let near: Vec<usize> = self.buckets.near(pts, &pts[p], reach).into_iter().filter(|&i| !covered[i]).collect();
        let stride = near.len().div_ceil(MAX_SAMPLE_CENTERS).max(1);
        centers.extend(near.iter().step_by(stride).map(|&i| pts[i].clone()));
        if !self.centers_on_set {
            centers.extend(dyadic_centers(&pts[p], radius / 2.0, reach));
        }
        centers
    }

    fn greedy(&self, order: &[usize]) -> Result<(Covering, f64)> {
        let pts = &self.set.points;
        let domain = self.phi.domain();
        let mut covered = vec![false; pts.len()];
        let mut balls: Vec<Ball> = Vec::new();
        for &p in order {
            if covered[p] {
                continue;
            }
            let mut best: Option<(f64, Ball, Vec<usize>)> = None;
            for &r in &self.ladder {
                let reach = r - 0.5 * self.set.resolution;
                for c in self.candidate_centers(p, reach, r, &covered) {
                    let ball = Ball { center: c, radius: r };
                    if !domain.contains_ball(&ball) {
                        continue;
                    }
                    let newly: Vec<usize> = self.members(&ball).into_iter().filter(|&i| !covered[i]).collect();
                    if !newly.contains(&p) {
                        continue;
                    }
                    let score = self.cost(&ball)? / newly.len() as f64;
                    if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                        best = Some((score, ball, newly));
                    }
                }
            }
            let Some((_, ball, newly)) = best else {
                return Err(Error::Geometry(format!("no admissible ball covers {:?} inside the domain", pts[p])));
            };
            newly.iter().for_each(|&i| covered[i] = true);
            balls.push(ball);
        }
        self.refine(&mut balls)?;
        let cost = balls.iter().map(|b| self.cost(b)).sum::<Result<f64>>()?;
        Ok((Covering { balls, kappa: self.ladder[0] }, cost))
    }

    /// Drops redundant balls and shrinks each ball to its exclusive points
    /// (never below the smallest ladder radius) when that lowers its cost.
    fn refine(&self, balls: &mut Vec<Ball>) -> Result<()> {
        let pts = &self.set.points;
        let floor = *self.ladder.last().expect("non-empty ladder");
        let mut count = vec![0usize; pts.len()];
        let mut members: Vec<Vec<usize>> = balls.iter().map(|b| self.members(b)).collect();
        for m in &members {
            m.iter().for_each(|&i| count[i] += 1);
        }
        let mut keep = vec![true; balls.len()];
        for k in 0..balls.len() {
            let exclusive: Vec<usize> = members[k].iter().copied().filter(|&i| count[i] == 1).collect();
            if exclusive.is_empty() {
                keep[k] = false;
                members[k].iter().for_each(|&i| count[i] -= 1);
                continue;
            }
            let needed = exclusive.iter().map(|&i| dist(&pts[i], &balls[k].center)).fold(0.0, f64::max)
                + 0.5 * self.set.resolution;
            let target = needed.max(floor) * (1.0 + 1e-12);
            if target < balls[k].radius {
                let shrunk = Ball { center: balls[k].center.clone(), radius: target };
                if self.cost(&shrunk)? < self.cost(&balls[k])? {
                    let new_members = self.members(&shrunk);
                    members[k].iter().for_each(|&i| count[i] -= 1);
                    new_members.iter().for_each(|&i| count[i] += 1);
                    members[k] = new_members;
                    balls[k] = shrunk;
                }
            }
        }
        let mut it = keep.iter();
        balls.retain(|_| *it.next().expect("one flag per ball"));
        Ok(())
    }
}

fn validated_ladder(phi: &dyn Musielak, set: &PointCloudSet, kappa: f64) -> Result<Vec<f64>> {
    let ladder = radius_ladder(kappa, set.resolution)?;
    if let Some(p) = set.points.first() {
        if p.len() != phi.domain().dim() {
            return Err(Error::Shape("set and domain dimensions differ".into()));
        }
    }
    set.check_inside(phi.domain())?;
    Ok(ladder)
}

/// Visiting orders tried by the greedy search: index order, reversed, and
/// sorted along each axis.
fn visit_orders(set: &PointCloudSet) -> Vec<Vec<usize>> {
    let m = set.points.len();
    let n = set.points.first().map_or(0, Vec::len);
    let mut orders = vec![(0..m).collect::<Vec<_>>(), (0..m).rev().collect()];
    for axis in 0..n {
        let mut o: Vec<usize> = (0..m).collect();
        o.sort_by(|&i, &j| set.points[i][axis].total_cmp(&set.points[j][axis]).then(i.cmp(&j)));
        orders.push(o);
    }
    orders
}

/// Best greedy covering with radii at most `kappa`. The orders are searched
/// in parallel; the cheapest covering wins, ties going to the earlier order.
pub fn greedy_covering(
    phi: &dyn Musielak,
    set: &PointCloudSet,
    kappa: f64,
    variant: CostVariant,
    centers_on_set: bool,
) -> Result<(Covering, f64)> {
    let ladder = validated_ladder(phi, set, kappa)?;
    if set.is_empty() {
        return Ok((Covering { balls: Vec::new(), kappa }, 0.0));
    }
    let search = Search { phi, set, buckets: Buckets::new(&set.points, 2.0 * kappa), ladder, variant, centers_on_set };
    let results: Vec<Result<(Covering, f64)>> =
        visit_orders(set).par_iter().map(|order| search.greedy(order)).collect();
    let mut best: Option<(Covering, f64)> = None;
    for r in results {
        let (cov, cost) = r?;
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((Covering { kappa, ..cov }, cost));
        }
    }
    Ok(best.expect("at least one order"))
}

/// Balls of radius at most `r` laid out along the analytic shape of the
/// set: one per point, or equal balls strung along a segment.
pub(crate) fn shaped_balls(set: &PointCloudSet, r: f64) -> Option<Vec<Ball>> {
    match set.descriptor.as_ref()? {
        SetDescriptor::Point | SetDescriptor::GridCells { .. } => {
            Some(set.points.iter().map(|p| Ball { center: p.clone(), radius: r }).collect())
        }
        SetDescriptor::Segment { start, end } => {
            let len = dist(start, end);
            let count = (len / (2.0 * r)).ceil().max(1.0) as usize;
            let radius = (len / (2.0 * count as f64)).max(f64::MIN_POSITIVE);
            Some(
                (0..count)
                    .map(|i| {
                        let s = (i as f64 + 0.5) / count as f64;
                        let center = start.iter().zip(end).map(|(a, b)| a + s * (b - a)).collect();
                        Ball { center, radius }
                    })
                    .collect(),
            )
        }
    }
}

/// Covering built from the analytic shape of the set: one ball per point,
/// or equal balls strung along a segment, with the cheapest ladder radius.
pub fn structured_covering(
    phi: &dyn Musielak,
    set: &PointCloudSet,
    kappa: f64,
    variant: CostVariant,
) -> Result<Option<(Covering, f64)>> {
    let ladder = validated_ladder(phi, set, kappa)?;
    let domain = phi.domain();
    if set.descriptor.is_none() {
        return Ok(None);
    }
    let candidates: Vec<Vec<Ball>> = ladder.iter().filter_map(|&r| shaped_balls(set, r)).collect();
    let mut best: Option<(Covering, f64)> = None;
    for balls in candidates {
        if balls.iter().any(|b| !domain.contains_ball(b)) {
            continue;
        }
        let cover = Covering { balls, kappa };
        let cost = covering_cost(phi, &cover, variant)?;
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((cover, cost));
        }
    }
    Ok(best)
}

/// Cheapest of the greedy and structured coverings.
pub fn best_covering(
    phi: &dyn Musielak,
    set: &PointCloudSet,
    kappa: f64,
    variant: CostVariant,
) -> Result<(Covering, f64)> {
    let greedy = greedy_covering(phi, set, kappa, variant, false)?;
    match structured_covering(phi, set, kappa, variant)? {
        Some(s) if s.1 < greedy.1 => Ok(s),
        _ => Ok(greedy),
    }
}

/// Upper bound for `H_{Phi,kappa}(E)` (or its `+-` variants) from the best
/// covering found.
pub fn hausdorff_estimate(phi: &dyn Musielak, set: &PointCloudSet, kappa: f64, variant: CostVariant) -> Result<f64> {
    Ok(best_covering(phi, set, kappa, variant)?.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub estimate_minus: f64,
    pub estimate: f64,
    pub estimate_plus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaSweep {
    /// Estimates per kappa, in decreasing kappa order.
    pub rows: Vec<SweepRow>,
    /// Running minima from the smallest kappa upward. A covering admissible
    /// for a smaller kappa is admissible for every larger one, so each entry
    /// is still an upper bound at its own kappa, and the column is
    /// non-decreasing as kappa decreases.
    pub enforced: Vec<SweepRow>,
}

impl KappaSweep {
    /// `kappa,estimate_minus,estimate,estimate_plus`, raw estimates.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kappa,estimate_minus,estimate,estimate_plus\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.kappa, r.estimate_minus, r.estimate, r.estimate_plus);
        }
        out
    }
}

/// Estimates of the three measures over a decreasing sequence of kappas.
pub fn hausdorff_sweep(phi: &dyn Musielak, set: &PointCloudSet, kappas: &[f64]) -> Result<KappaSweep> {
    let mut sorted = kappas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    let rows: Vec<SweepRow> = sorted
        .iter()
        .map(|&kappa| {
            let mut v = [0.0; 3];
            for (slot, variant) in v.iter_mut().zip(CostVariant::ALL) {
                *slot = hausdorff_estimate(phi, set, kappa, variant)?;
            }
            Ok(SweepRow { kappa, estimate_minus: v[0], estimate: v[1], estimate_plus: v[2] })
        })
        .collect::<Result<_>>()?;
    let mut enforced = rows.clone();
    for i in (0..enforced.len().saturating_sub(1)).rev() {
        let next = enforced[i + 1].clone();
        let row = &mut enforced[i];
        row.estimate_minus = row.estimate_minus.min(next.estimate_minus);
        row.estimate = row.estimate.min(next.estimate);
        row.estimate_plus = row.estimate_plus.min(next.estimate_plus);
    }
    Ok(KappaSweep { rows, enforced })
}

/// A random admissible covering: balls of radius in `(kappa/2, kappa]`
/// placed about uncovered samples with a random offset.
pub fn random_covering(phi: &dyn Musielak, set: &PointCloudSet, kappa: f64, rng: &mut impl Rng) -> Result<Covering> {
    let ladder = validated_ladder(phi, set, kappa)?;
    let domain = phi.domain();
    let s = set.resolution;
    let pts = &set.points;
    let mut covered = vec![false; pts.len()];
    let mut balls = Vec::new();
    for p in 0..pts.len() {
        if covered[p] {
            continue;
        }
        let mut placed = None;
        for attempt in 0..16 {
            let r = if attempt < 15 { kappa * rng.gen_range(0.5..=1.0) } else { *ladder.last().expect("ladder") };
            let r = r.max(s);
            let reach = (r - 0.5 * s) * if attempt < 15 { rng.gen_range(0.0..1.0) } else { 0.0 };
            let dir: Vec<f64> = (0..pts[p].len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let center: Vec<f64> = pts[p].iter().zip(&dir).map(|(x, d)| x + reach * d / norm).collect();
            let ball = Ball { center, radius: r };
            if domain.contains_ball(&ball) {
                placed = Some(ball);
                break;
            }
        }
        let Some(ball) = placed else {
            return Err(Error::Geometry(format!("no admissible ball covers {:?} inside the domain", pts[p])));
        };
        for (i, c) in covered.iter_mut().enumerate() {
            if !*c && covers(&ball, &pts[i], s) {
                *c = true;
            }
        }
        balls.push(ball);
    }
    Ok(Covering { balls, kappa })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonLevel {
    pub kappa: f64,
    pub coverings: usize,
    /// `(minus, integral, plus)` on the searched covering.
    pub searched: (f64, f64, f64),
    /// Largest `plus / minus` over all coverings of the level.
    pub worst_ratio: f64,
    pub chain_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub levels: Vec<ComparisonLevel>,
    /// `c_d / beta4^n`, declared when available, otherwise probed.
    pub bound: f64,
    pub observed_constant: f64,
    /// Largest over smallest per-level worst ratio.
    pub constant_spread: f64,
    pub chain_holds: bool,
}

/// Evaluates all three ball costs on shared coverings (the searched one and
/// `random_per_level` random ones per kappa) and checks
/// `minus <= integral <= plus <= (c_d / beta4^n) minus` on each.
pub fn hausdorff_comparison(
    phi: &dyn Musielak,
    set: &PointCloudSet,
    kappas: &[f64],
    random_per_level: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    let probe = axiom_probe(phi, 400, seed)?;
    if !probe.controllo.passed {
        return Err(Error::Axiom(format!(
            "the ball comparison fails: observed constant {} with trend slope {}",
            probe.controllo.observed, probe.controllo.trend_slope
        )));
    }
    let n = phi.domain().dim() as i32;
    let c_d = probe.controllo.declared.unwrap_or(probe.controllo.observed);
    let bound = c_d / probe.controllo.beta4.powi(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = Vec::new();
    for &kappa in kappas {
        let (searched, _) = best_covering(phi, set, kappa, CostVariant::Integral)?;
        let mut coverings = vec![searched];
        for _ in 0..random_per_level {
            coverings.push(random_covering(phi, set, kappa, &mut rng)?);
        }
        let mut worst: f64 = 1.0;
        let mut holds = true;
        let mut first = (0.0, 0.0, 0.0);
        for (k, cover) in coverings.iter().enumerate() {
            let (mut lo, mut mid, mut hi) = (0.0, 0.0, 0.0);
            for b in &cover.balls {
                let (a, m, c) = h_phi_all(phi, b)?;
                lo += a;
                mid += m;
                hi += c;
            }
            if k == 0 {
                first = (lo, mid, hi);
            }
            let slack = 1e-12 * hi.abs();
            holds &= lo <= mid + slack && mid <= hi + slack && hi <= bound * lo + slack;
            if lo > 0.0 {
                worst = worst.max(hi / lo);
            }
        }
        levels.push(ComparisonLevel {
            kappa,
            coverings: coverings.len(),
            searched: first,
            worst_ratio: worst,
            chain_holds: holds,
        });
    }
    let ratios: Vec<f64> = levels.iter().map(|l| l.worst_ratio).collect();
    let observed_constant = ratios.iter().cloned().fold(1.0, f64::max);
    let smallest = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ComparisonReport {
        chain_holds: levels.iter().all(|l| l.chain_holds),
        constant_spread: if smallest.is_finite() { observed_constant / smallest } else { 1.0 },
        levels,
        bound,
        observed_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::PowerPhi;

    #[test]
    fn ladder_and_resolution() {
        let l = radius_ladder(0.5, 0.01).unwrap();
        assert_eq!(l.len(), LADDER_STEPS);
        assert!((l[6] - 0.0625).abs() < 1e-15);
        assert!(matches!(radius_ladder(0.01, 0.01), Err(Error::Resolution(_))));
    }

    #[test]
    fn empty_set_has_zero_estimate() {
        let phi = PowerPhi::new(1.0, BoxDomain::cube(2, -1.0, 1.0).unwrap()).unwrap();
        assert_eq!(hausdorff_estimate(&phi, &PointCloudSet::empty(), 0.1, CostVariant::Integral).unwrap(), 0.0);
    }

    #[test]
    fn greedy_covering_certifies_the_cloud() {
        let phi = PowerPhi::new(1.0, BoxDomain::cube(2, -1.0, 1.0).unwrap()).unwrap();
        let set = PointCloudSet::segment(vec![-0.5, 0.1], vec![0.5, 0.3], 401).unwrap();
        let (cover, cost) = greedy_covering(&phi, &set, 0.05, CostVariant::Integral, false).unwrap();
        assert!(cover.certifies(&set));
        assert!(cover.balls.iter().all(|b| b.radius <= 0.05));
        let len = (1.0f64 + 0.04).sqrt();
        assert!(cost >= std::f64::consts::FRAC_PI_2 * len * 0.999, "{cost}");
        assert!(cost < std::f64::consts::FRAC_PI_2 * len * 1.3, "{cost}");
    }

    #[test]
    fn bucket_queries_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let b = Buckets::new(&pts, 0.2);
        for q in pts.iter().take(20) {
            let fast = b.near(&pts, q, 0.17);
            let slow: Vec<usize> = (0..pts.len()).filter(|&i| dist(&pts[i], q) <= 0.17).collect();
            assert_eq!(fast, slow);
        }
    }
}
