//! Pareto machinery for the `(-pass_rate, cost)` minimization problem.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MooError {
    #[error("cost ceiling must be positive, got {0}")]
    InvalidCeiling(f64),
    #[error("baseline hypervolume is zero; relative improvement is unbounded")]
    ZeroBaseline,
}

/// Objectives to minimize: negated pass rate and cost in USD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub neg_pass: f64,
    pub cost: f64,
}

impl ObjectiveVector {
    pub fn new(pass_rate: f64, cost: f64) -> Self {
        Self {
            neg_pass: -pass_rate,
            cost,
        }
    }

    pub fn pass_rate(&self) -> f64 {
        -self.neg_pass
    }

    fn get(&self, m: usize) -> f64 {
        match m {
            0 => self.neg_pass,
            _ => self.cost,
        }
    }
}

const OBJECTIVES: usize = 2;

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    a.neg_pass <= b.neg_pass && a.cost <= b.cost && (a.neg_pass < b.neg_pass || a.cost < b.cost)
}

/// Front index (0 = non-dominated) and crowding distance per input point.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontAssignment {
    pub front: Vec<usize>,
    pub crowding: Vec<f64>,
}

impl FrontAssignment {
    /// Point indices grouped by front, ascending within each front.
    pub fn fronts(&self) -> Vec<Vec<usize>> {
        let count = self.front.iter().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); count];
        for (i, &f) in self.front.iter().enumerate() {
            out[f].push(i);
        }
        out
    }
}

/// Fast non-dominated sort (Deb et al.), O(n^2) per front peel.
pub fn nondominated_sort(points: &[ObjectiveVector]) -> FrontAssignment {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }

    let mut front = vec![0usize; n];
    let mut crowding = vec![0.0; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut rank = 0;
    while !current.is_empty() {
        let members: Vec<ObjectiveVector> = current.iter().map(|&i| points[i]).collect();
        for (&i, d) in current.iter().zip(crowding_distance(&members)) {
            front[i] = rank;
            crowding[i] = d;
        }
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        current = next;
        rank += 1;
    }
    FrontAssignment { front, crowding }
}

/// NSGA-II crowding distance over one front.
///
/// Per objective the points are sorted by value (ties by input position); the
/// first and last get `+inf`, interior points add `(next - prev) / (max - min)`.
/// Zero-range objectives add nothing to interior points.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for m in 0..OBJECTIVES {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| front[a].get(m).total_cmp(&front[b].get(m)).then(a.cmp(&b)));
        let lo = front[order[0]].get(m);
        let hi = front[order[n - 1]].get(m);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            let (prev, mid, next) = (w[0], w[1], w[2]);
            dist[mid] += (front[next].get(m) - front[prev].get(m)) / range;
        }
    }
    dist
}

/// Every candidate index in NSGA-II survivor preference order: ascending
/// front, then descending crowding distance, then ascending arrival index.
pub fn nsga2_order(candidates: &[(ObjectiveVector, u64)]) -> Vec<usize> {
    let points: Vec<ObjectiveVector> = candidates.iter().map(|c| c.0).collect();
    let fa = nondominated_sort(&points);
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        fa.front[a]
            .cmp(&fa.front[b])
            .then(fa.crowding[b].total_cmp(&fa.crowding[a]))
            .then(candidates[a].1.cmp(&candidates[b].1))
    });
    order
}

/// Indices of the `k` survivors, in preference order. Whole fronts are taken
/// while they fit; the boundary front is split by crowding distance.
pub fn nsga2_select(candidates: &[(ObjectiveVector, u64)], k: usize) -> Vec<usize> {
    let mut order = nsga2_order(candidates);
    order.truncate(k.min(candidates.len()));
    order
}

/// A point in hypervolume space: pass rate in [0, 1] (maximized) and raw cost
/// (minimized, normalized by the ceiling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvPoint {
    pub pass: f64,
    pub cost: f64,
}

impl HvPoint {
    pub fn new(pass: f64, cost: f64) -> Self {
        Self { pass, cost }
    }

    /// Uses passed-test counts, normalized by `tests_total`.
    pub fn from_tests(passed: u32, tests_total: u32, cost: f64) -> Self {
        Self::new(f64::from(passed) / f64::from(tests_total), cost)
    }
}

/// Reference point in normalized space; the default is (pass 0, cost 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub pass: f64,
    pub cost: f64,
}

impl Default for ReferencePoint {
    fn default() -> Self {
        Self { pass: 0.0, cost: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypervolumeResult {
    pub value: f64,
    pub reference_point: ReferencePoint,
    pub cost_ceiling: f64,
}

/// Headroom above the largest observed cost in the default ceiling, so the
/// costliest point still encloses a nonzero area.
pub const DEFAULT_CEILING_MARGIN: f64 = 1.1;

/// `DEFAULT_CEILING_MARGIN` times the largest cost in `points`.
pub fn default_cost_ceiling<'a>(points: impl IntoIterator<Item = &'a HvPoint>) -> Option<f64> {
    points
        .into_iter()
        .map(|p| p.cost)
        .filter(|c| *c > 0.0)
        .max_by(f64::total_cmp)
        .map(|c| c * DEFAULT_CEILING_MARGIN)
}

/// Area dominated by `points` and bounded by `reference`, after clamping pass
/// to [0, 1] and mapping cost to `min(cost / cost_ceiling, 1)`.
pub fn hypervolume_2d(
    points: &[HvPoint],
    reference: ReferencePoint,
    cost_ceiling: f64,
) -> Result<HypervolumeResult, MooError> {
    if !(cost_ceiling > 0.0) {
        return Err(MooError::InvalidCeiling(cost_ceiling));
    }
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.pass.clamp(0.0, 1.0), (p.cost / cost_ceiling).clamp(0.0, 1.0)))
        .filter(|&(pass, cost)| pass > reference.pass && cost < reference.cost)
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));

    // Sweep from the highest pass rate down, keeping strictly cheaper points.
    let mut front: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        if front.last().is_none_or(|last| p.1 < last.1) {
            front.push(p);
        }
    }
    let mut value = 0.0;
    for (i, &(pass, cost)) in front.iter().enumerate() {
        let lower = front.get(i + 1).map_or(reference.pass, |next| next.0);
        value += (pass - lower) * (reference.cost - cost);
    }
    Ok(HypervolumeResult {
        value,
        reference_point: reference,
        cost_ceiling,
    })
}

/// `100 * (hv_new - hv_base) / hv_base`.
pub fn delta_hv_percent(hv_base: f64, hv_new: f64) -> Result<f64, MooError> {
    if hv_base == 0.0 {
        return Err(MooError::ZeroBaseline);
    }
    Ok(100.0 * (hv_new - hv_base) / hv_base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(neg_pass: f64, cost: f64) -> ObjectiveVector {
        ObjectiveVector { neg_pass, cost }
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&ov(-0.37, 1.10), &ov(-0.16, 1.61)));
        assert!(!dominates(&ov(-0.16, 1.61), &ov(-0.37, 1.10)));
        let x = ov(-0.5, 1.0);
        assert!(!dominates(&x, &x));
        assert!(!dominates(&ov(-0.5, 2.0), &ov(-0.4, 1.0)));
        assert!(!dominates(&ov(-0.4, 1.0), &ov(-0.5, 2.0)));
    }

    #[test]
    fn sort_examples() {
        let dup = nondominated_sort(&[ov(-1.0, 1.0), ov(-1.0, 1.0)]);
        assert_eq!(dup.front, [0, 0]);
        let fa = nondominated_sort(&[ov(-0.37, 1.10), ov(-0.16, 1.61), ov(-0.10, 1.06)]);
        assert_eq!(fa.front, [0, 1, 0]);
        assert_eq!(fa.fronts(), vec![vec![0, 2], vec![1]]);
        assert!(nondominated_sort(&[]).front.is_empty());
    }

    #[test]
    fn crowding_examples() {
        assert_eq!(crowding_distance(&[ov(-1.0, 1.0)]), [f64::INFINITY]);
        let d = crowding_distance(&[ov(-1.0, 3.0), ov(-2.0, 2.0), ov(-3.0, 1.0)]);
        assert_eq!(d[0], f64::INFINITY);
        assert_eq!(d[2], f64::INFINITY);
        assert!((d[1] - 2.0).abs() < 1e-12);
        assert_eq!(crowding_distance(&[ov(-1.0, 1.0), ov(-1.0, 1.0)]), [f64::INFINITY; 2]);
        // Three identical points: extremes by position, middle gets zero.
        assert_eq!(
            crowding_distance(&[ov(-1.0, 1.0); 3]),
            [f64::INFINITY, 0.0, f64::INFINITY]
        );
    }

    #[test]
    fn selection_examples() {
        let c = [(ov(-0.37, 1.10), 0), (ov(-0.16, 1.61), 1)];
        assert_eq!(nsga2_select(&c, 1), [0]);
        let mut all = nsga2_select(&c, 2);
        all.sort();
        assert_eq!(all, [0, 1]);
        // Equal crowding: the earlier arrival wins.
        let tie = [(ov(-0.5, 1.0), 7), (ov(-0.5, 1.0), 3)];
        assert_eq!(nsga2_select(&tie, 1), [1]);
    }

    #[test]
    fn hypervolume_examples() {
        let r = ReferencePoint::default();
        assert_eq!(hypervolume_2d(&[HvPoint::new(1.0, 0.0)], r, 1.0).unwrap().value, 1.0);
        assert_eq!(hypervolume_2d(&[HvPoint::new(0.0, 1.0)], r, 1.0).unwrap().value, 0.0);
        assert_eq!(hypervolume_2d(&[], r, 1.0).unwrap().value, 0.0);
        // Two-step staircase: 0.5*0.5 + (0.8-0.5)*(1-0.75) = 0.325
        let hv = hypervolume_2d(&[HvPoint::new(0.5, 0.5), HvPoint::new(0.8, 0.75)], r, 1.0).unwrap();
        assert!((hv.value - 0.325).abs() < 1e-12);
        // Costs above the ceiling clip to the reference and contribute nothing.
        assert_eq!(hypervolume_2d(&[HvPoint::new(0.9, 5.0)], r, 2.0).unwrap().value, 0.0);
        assert_eq!(
            hypervolume_2d(&[HvPoint::new(0.9, 0.1)], r, 0.0),
            Err(MooError::InvalidCeiling(0.0))
        );
        let p = HvPoint::from_tests(30, 40, 1.0);
        assert_eq!(p.pass, 0.75);
    }

    #[test]
    fn delta_hv_examples() {
        assert!((delta_hv_percent(0.0056, 0.0296).unwrap() - 428.571).abs() < 1e-3);
        assert!((delta_hv_percent(0.0078, 0.0311).unwrap() - 298.718).abs() < 1e-3);
        assert_eq!(delta_hv_percent(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(delta_hv_percent(0.0, 0.1), Err(MooError::ZeroBaseline));
    }
}
