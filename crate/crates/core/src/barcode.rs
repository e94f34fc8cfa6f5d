//! Barcodes, ordered barcodes and the quotient map between them, plus the
//! bottleneck and Wasserstein distances.
//!
//! A [`Barcode`] stores only its off-diagonal points; the diagonal is
//! implicit with infinite multiplicity. Points may sit anywhere off the
//! diagonal (birth above death is allowed), although diagrams of filter
//! functions always have birth < death.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Barcode {
    finite: Vec<(f64, f64)>,
    infinite: Vec<f64>,
}

impl Barcode {
    /// Drops diagonal points and sorts, so equal multisets compare equal.
    pub fn new(mut finite: Vec<(f64, f64)>, mut infinite: Vec<f64>) -> Self {
        finite.retain(|&(b, d)| b != d);
        finite.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        infinite.sort_by(f64::total_cmp);
        Barcode { finite, infinite }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn finite(&self) -> &[(f64, f64)] {
        &self.finite
    }

    pub fn infinite(&self) -> &[f64] {
        &self.infinite
    }

    pub fn is_empty(&self) -> bool {
        self.finite.is_empty() && self.infinite.is_empty()
    }

    /// Multiset equality up to `tol` on every coordinate.
    pub fn approx_eq(&self, other: &Barcode, tol: f64) -> bool {
        self.finite.len() == other.finite.len()
            && self.infinite.len() == other.infinite.len()
            && self
                .finite
                .iter()
                .zip(&other.finite)
                .all(|(a, b)| (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol)
            && self
                .infinite
                .iter()
                .zip(&other.infinite)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Removes finite bars of persistence `|d - b|` below `eps`.
    pub fn without_short_bars(&self, eps: f64) -> Barcode {
        Barcode {
            finite: self
                .finite
                .iter()
                .copied()
                .filter(|&(b, d)| (d - b).abs() >= eps)
                .collect(),
            infinite: self.infinite.clone(),
        }
    }

    /// Number of bars alive on `[s, t]`, i.e. born at or before `s` and dying after `t`.
    pub fn rank(&self, s: f64, t: f64) -> usize {
        self.finite.iter().filter(|&&(b, d)| b <= s && d > t).count()
            + self.infinite.iter().filter(|&&b| b <= s).count()
    }
}

/// Writes `degree,birth,death` lines, with `inf` for infinite deaths.
pub fn barcodes_to_csv<'a>(bars: impl IntoIterator<Item = (usize, &'a Barcode)>) -> String {
    let mut out = String::from("degree,birth,death\n");
    for (degree, barcode) in bars {
        for &b in barcode.infinite() {
            let _ = writeln!(out, "{degree},{b},inf");
        }
        for &(b, d) in barcode.finite() {
            let _ = writeln!(out, "{degree},{b},{d}");
        }
    }
    out
}

/// A vector `(b_1, d_1, .., b_m, d_m, v_1, .., v_n)` of `m` finite and `n`
/// infinite slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedBarcode {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl OrderedBarcode {
    pub fn new(m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * m + n {
            return Err(Error::ShapeError(format!(
                "ordered barcode with m={m}, n={n} needs {} coordinates, got {}",
                2 * m + n,
                data.len()
            )));
        }
        Ok(OrderedBarcode { m, n, data })
    }

    /// Canonical preimage of `barcode` under the quotient map.
    pub fn from_barcode(barcode: &Barcode) -> Self {
        let mut data: Vec<f64> = barcode.finite.iter().flat_map(|&(b, d)| [b, d]).collect();
        data.extend_from_slice(&barcode.infinite);
        OrderedBarcode {
            m: barcode.finite.len(),
            n: barcode.infinite.len(),
            data,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn pair(&self, i: usize) -> (f64, f64) {
        (self.data[2 * i], self.data[2 * i + 1])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.m).map(|i| self.pair(i))
    }

    pub fn infinite(&self) -> &[f64] {
        &self.data[2 * self.m..]
    }

    /// Forgets the slot order; pairs with `b == d` fall onto the diagonal.
    pub fn quotient(&self) -> Barcode {
        Barcode::new(self.pairs().collect(), self.infinite().to_vec())
    }

    pub fn same_shape(&self, other: &OrderedBarcode) -> Result<()> {
        if self.m != other.m || self.n != other.n {
            return Err(Error::ShapeError(format!(
                "({}, {}) vs ({}, {})",
                self.m, self.n, other.m, other.n
            )));
        }
        Ok(())
    }
}

/// One side of a matched pair: an off-diagonal point or the diagonal projection
/// of the point on the other side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Point(usize),
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Matched finite points, indices into the point lists passed in.
    pub finite: Vec<(Endpoint, Endpoint)>,
    /// Matched infinite bars, indices into the birth lists passed in.
    pub infinite: Vec<(usize, usize)>,
}

pub(crate) fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// L∞ distance from a point to its orthogonal projection on the diagonal.
pub(crate) fn half_persistence(a: (f64, f64)) -> f64 {
    0.5 * (a.1 - a.0).abs()
}

/// Sorted matching of infinite births; optimal for any convex cost of `|v - w|`.
pub(crate) fn sorted_infinite_matching(a: &[f64], b: &[f64]) -> Vec<(usize, usize)> {
    let sort = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]).then(i.cmp(&j)));
        idx
    };
    sort(a).into_iter().zip(sort(b)).collect()
}

pub fn bottleneck(a: &Barcode, b: &Barcode) -> f64 {
    bottleneck_points(a.finite(), a.infinite(), b.finite(), b.infinite()).0
}

/// Bottleneck distance between two point lists, with an optimal matching.
///
/// Points on the diagonal are allowed and cost nothing. Returns `+inf` and no
/// matching when the infinite-bar counts differ.
pub fn bottleneck_points(
    a: &[(f64, f64)],
    a_inf: &[f64],
    b: &[(f64, f64)],
    b_inf: &[f64],
) -> (f64, Option<Matching>) {
    if a_inf.len() != b_inf.len() {
        return (f64::INFINITY, None);
    }
    let infinite = sorted_infinite_matching(a_inf, b_inf);
    let inf_cost = infinite
        .iter()
        .map(|&(i, j)| (a_inf[i] - b_inf[j]).abs())
        .fold(0.0, f64::max);

    let mut candidates: Vec<f64> = vec![0.0];
    candidates.extend(a.iter().map(|&p| half_persistence(p)));
    candidates.extend(b.iter().map(|&p| half_persistence(p)));
    for &p in a {
        for &q in b {
            candidates.push(linf(p, q));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // feasibility is monotone in the threshold and the largest candidate is always feasible
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if threshold_matching(a, b, candidates[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let finite = threshold_matching(a, b, candidates[lo]).expect("largest candidate is feasible");
    (
        candidates[lo].max(inf_cost),
        Some(Matching { finite, infinite }),
    )
}

/// Perfect matching of the augmented bipartite graph using only edges of cost
/// at most `t`, found by augmenting paths.
fn threshold_matching(a: &[(f64, f64)], b: &[(f64, f64)], t: f64) -> Option<Vec<(Endpoint, Endpoint)>> {
    let (n1, n2) = (a.len(), b.len());
    let size = n1 + n2;
    // left: a_0..a_{n1-1}, then diagonal copies of b; right: b_0..b_{n2-1}, then diagonal copies of a
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); size];
    for i in 0..n1 {
        for j in 0..n2 {
            if linf(a[i], b[j]) <= t {
                adj[i].push(j);
            }
        }
        if half_persistence(a[i]) <= t {
            adj[i].push(n2 + i);
        }
    }
    for j in 0..n2 {
        if half_persistence(b[j]) <= t {
            adj[n1 + j].push(j);
        }
        adj[n1 + j].extend(n2..n2 + n1);
    }

    let mut match_right: Vec<Option<usize>> = vec![None; size];
    for left in 0..size {
        let mut seen = vec![false; size];
        if !augment(left, &adj, &mut seen, &mut match_right) {
            return None;
        }
    }
    let mut edges = Vec::new();
    for (right, left) in match_right.iter().enumerate() {
        let left = left.expect("perfect matching");
        let l = if left < n1 { Endpoint::Point(left) } else { Endpoint::Diagonal };
        let r = if right < n2 { Endpoint::Point(right) } else { Endpoint::Diagonal };
        if l != Endpoint::Diagonal || r != Endpoint::Diagonal {
            edges.push((l, r));
        }
    }
    edges.sort_by_key(|&(l, r)| (endpoint_key(l), endpoint_key(r)));
    Some(edges)
}

fn endpoint_key(e: Endpoint) -> usize {
    match e {
        Endpoint::Point(i) => i,
        Endpoint::Diagonal => usize::MAX,
    }
}

fn augment(
    left: usize,
    adj: &[Vec<usize>],
    seen: &mut [bool],
    match_right: &mut [Option<usize>],
) -> bool {
    for &right in &adj[left] {
        if seen[right] {
            continue;
        }
        seen[right] = true;
        let free = match match_right[right] {
            None => true,
            Some(other) => augment(other, adj, seen, match_right),
        };
        if free {
            match_right[right] = Some(left);
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinResult {
    pub value: f64,
    pub matching: Option<Matching>,
    /// Set for `q < 1`, where the assignment relaxation is not guaranteed optimal.
    pub approximate: bool,
}

pub fn wasserstein(a: &Barcode, b: &Barcode, q: f64) -> Result<f64> {
    wasserstein_points(a.finite(), a.infinite(), b.finite(), b.infinite(), q).map(|r| r.value)
}

/// q-Wasserstein distance via a square assignment on the augmented cost matrix.
pub fn wasserstein_points(
    a: &[(f64, f64)],
    a_inf: &[f64],
    b: &[(f64, f64)],
    b_inf: &[f64],
    q: f64,
) -> Result<WassersteinResult> {
    if !(q > 0.0) {
        return Err(Error::BadExponent(q));
    }
    let approximate = q < 1.0;
    if a_inf.len() != b_inf.len() {
        return Ok(WassersteinResult {
            value: f64::INFINITY,
            matching: None,
            approximate,
        });
    }
    let (finite, finite_cost) = wasserstein_assignment(a, b, q, None);
    let infinite = sorted_infinite_matching(a_inf, b_inf);
    let inf_cost: f64 = infinite
        .iter()
        .map(|&(i, j)| (a_inf[i] - b_inf[j]).abs().powf(q))
        .sum();
    Ok(WassersteinResult {
        value: (finite_cost + inf_cost).powf(1.0 / q),
        matching: Some(Matching { finite, infinite }),
        approximate,
    })
}

/// Optimal finite assignment and its total `cost^q`. `forbid` excludes one
/// matched pair, which is used to probe uniqueness of the optimum.
pub(crate) fn wasserstein_assignment(
    a: &[(f64, f64)],
    b: &[(f64, f64)],
    q: f64,
    forbid: Option<(Endpoint, Endpoint)>,
) -> (Vec<(Endpoint, Endpoint)>, f64) {
    let (n1, n2) = (a.len(), b.len());
    let size = n1 + n2;
    if size == 0 {
        return (Vec::new(), 0.0);
    }
    let mut cost = vec![vec![0.0; size]; size];
    for i in 0..size {
        for j in 0..size {
            cost[i][j] = match (i < n1, j < n2) {
                (true, true) => linf(a[i], b[j]).powf(q),
                (true, false) => half_persistence(a[i]).powf(q),
                (false, true) => half_persistence(b[j]).powf(q),
                (false, false) => 0.0,
            };
        }
    }
    let big = 1.0 + cost.iter().flatten().sum::<f64>() * 2.0;
    match forbid {
        Some((Endpoint::Point(i), Endpoint::Point(j))) => cost[i][j] = big,
        Some((Endpoint::Point(i), Endpoint::Diagonal)) => {
            for j in n2..size {
                cost[i][j] = big;
            }
        }
        Some((Endpoint::Diagonal, Endpoint::Point(j))) => {
            for i in n1..size {
                cost[i][j] = big;
            }
        }
        _ => {}
    }
    let assignment = assignment::solve(&cost);
    let mut edges = Vec::new();
    let mut total = 0.0;
    for (i, &j) in assignment.iter().enumerate() {
        total += cost[i][j];
        let l = if i < n1 { Endpoint::Point(i) } else { Endpoint::Diagonal };
        let r = if j < n2 { Endpoint::Point(j) } else { Endpoint::Diagonal };
        if l != Endpoint::Diagonal || r != Endpoint::Diagonal {
            edges.push((l, r));
        }
    }
    edges.sort_by_key(|&(l, r)| (endpoint_key(l), endpoint_key(r)));
    (edges, total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub bottleneck: f64,
    pub sup_norm: f64,
    pub euclidean_norm: f64,
    pub holds: bool,
}

/// Checks `db(Q(x), Q(y)) <= |x - y|_inf <= |x - y|_2`.
pub fn lipschitz_check_quotient(x: &OrderedBarcode, y: &OrderedBarcode) -> Result<LipschitzReport> {
    x.same_shape(y)?;
    let db = bottleneck(&x.quotient(), &y.quotient());
    let diffs = x.data().iter().zip(y.data()).map(|(a, b)| (a - b).abs());
    let sup = diffs.clone().fold(0.0, f64::max);
    let l2 = diffs.map(|d| d * d).sum::<f64>().sqrt();
    Ok(LipschitzReport {
        bottleneck: db,
        sup_norm: sup,
        euclidean_norm: l2,
        holds: db <= sup && sup <= l2 * (1.0 + 1e-15),
    })
}

#[cfg(test)]
pub(crate) mod brute {
    //! Exhaustive matching oracle over the augmented point sets.
    use super::{half_persistence, linf};

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    /// Returns `(bottleneck, sum of cost^q)` minimized over all matchings of
    /// the finite parts.
    pub fn finite_costs(a: &[(f64, f64)], b: &[(f64, f64)], q: f64) -> (f64, f64) {
        let (n1, n2) = (a.len(), b.len());
        let size = n1 + n2;
        let cost = |i: usize, j: usize| match (i < n1, j < n2) {
            (true, true) => linf(a[i], b[j]),
            (true, false) => half_persistence(a[i]),
            (false, true) => half_persistence(b[j]),
            (false, false) => 0.0,
        };
        let mut best_max = f64::INFINITY;
        let mut best_sum = f64::INFINITY;
        for perm in permutations(size) {
            let costs: Vec<f64> = perm.iter().enumerate().map(|(i, &j)| cost(i, j)).collect();
            best_max = best_max.min(costs.iter().copied().fold(0.0, f64::max));
            best_sum = best_sum.min(costs.iter().map(|c| c.powf(q)).sum());
        }
        (best_max, best_sum)
    }
}
