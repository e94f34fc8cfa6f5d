//! Independent oracles and randomized property suites.
//!
//! * [`rank_oracle`] computes persistent Betti numbers by elimination over the
//!   two-element field, with no reference to the reduction algorithm.
//! * [`stability_check`] and the isometry checks compare bottleneck distances
//!   with sup-norm distances of filters.
//! * [`gradient_check`] compares chain-rule gradients with central finite
//!   differences taken through diagrams only.
//!
//! Suites draw every instance from its own ChaCha stream, so reports do not
//! depend on the number of worker threads.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::barcode::{bottleneck, Barcode};
use crate::complex::{sup_distance, FilterFunction, SimplicialComplex};
use crate::differential::{build_lift, compose};
use crate::error::{Error, Result};
use crate::losses::{
    BarcodeLoss, BirthFeature, BottleneckTo, GaussianImageSpec, LinearRepresentation, PersistenceImage, PointFeature,
    TotalPersistence, WassersteinTo, WeightingFunction,
};
use crate::param::{CovarianceVector, EllipsoidRips, Height, LowerStar, Parametrization, PointCloud, RawFilter, Rips, VertexValues};
use crate::persistence::{diagram, diagrams};

/// Largest complex accepted by [`rank_oracle`].
pub const ORACLE_MAX_SIMPLICES: usize = 64;
/// Central finite-difference step.
pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-5;
pub const FD_ABS_TOL: f64 = 1e-7;
pub const ISOMETRY_TOL: f64 = 1e-9;

pub const SUITES: [&str; 4] = ["oracle", "stability", "isometry", "gradients"];

/// Inserts `v` into a GF(2) basis kept in echelon form by leading bit.
fn xor_insert(basis: &mut Vec<u64>, mut v: u64) -> bool {
    for &b in basis.iter() {
        v = v.min(v ^ b);
    }
    if v == 0 {
        return false;
    }
    basis.push(v);
    basis.sort_unstable_by(|a, b| b.cmp(a));
    true
}

/// Rank of `H_p(K^s) → H_p(K^t)` for the sublevel sets of `f`, `s ≤ t`.
pub fn rank_oracle(f: &FilterFunction, p: usize, s: f64, t: f64) -> Result<usize> {
    let k = f.complex();
    if k.len() > ORACLE_MAX_SIMPLICES {
        return Err(Error::OracleTooLarge(k.len()));
    }
    if s > t {
        return Err(Error::Invalid(format!("thresholds out of order: {s} > {t}")));
    }
    if p > k.dim() {
        return Ok(0);
    }
    let of_dim = |d: usize| -> Vec<usize> { (0..k.len()).filter(|&i| k.dim_of(i) == d).collect() };
    let cells = of_dim(p);
    let position = |d: usize| -> Vec<Option<usize>> {
        let mut pos = vec![None; k.len()];
        for (i, &c) in of_dim(d).iter().enumerate() {
            pos[c] = Some(i);
        }
        pos
    };
    let pos_p = position(p);
    let bits = |faces: &[usize], pos: &[Option<usize>]| -> u64 {
        faces.iter().fold(0u64, |acc, &x| acc ^ (1u64 << pos[x].expect("face of the right dimension")))
    };

    // cycles of K^s: combinations of p-cells with vanishing boundary
    let mut cycles = Vec::new();
    let alive_s: Vec<usize> = cells.iter().copied().filter(|&c| f.value(c) <= s).collect();
    if p == 0 {
        cycles = alive_s.iter().map(|&c| 1u64 << pos_p[c].unwrap()).collect();
    } else {
        let pos_q = position(p - 1);
        // (reduced boundary, combination) rows in echelon form
        let mut pivots: Vec<(u64, u64)> = Vec::new();
        for &c in &alive_s {
            let mut bd = bits(k.faces(c), &pos_q);
            let mut combo = 1u64 << pos_p[c].unwrap();
            loop {
                match pivots.iter().find(|(b, _)| bd != 0 && b.leading_zeros() == bd.leading_zeros()) {
                    Some(&(b, cb)) => {
                        bd ^= b;
                        combo ^= cb;
                    }
                    None => break,
                }
            }
            if bd == 0 {
                cycles.push(combo);
            } else {
                pivots.push((bd, combo));
            }
        }
    }

    // boundaries in K^t
    let mut boundaries = Vec::new();
    for c in of_dim(p + 1) {
        if f.value(c) <= t {
            xor_insert(&mut boundaries, bits(k.faces(c), &pos_p));
        }
    }
    let dim_b = boundaries.len();
    let mut sum = boundaries;
    for z in cycles {
        xor_insert(&mut sum, z);
    }
    Ok(sum.len() - dim_b)
}

/// Thresholds at every value, between consecutive values, and outside the range.
fn thresholds(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut out = vec![v[0] - 1.0];
    for w in v.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*v.last().unwrap());
    out.push(v.last().unwrap() + 1.0);
    out
}

/// Compares every persistent Betti number with the diagram; returns mismatches.
pub fn oracle_check(f: &FilterFunction) -> Result<Vec<String>> {
    let ts = thresholds(f.values());
    let mut failures = Vec::new();
    for (p, dgm) in diagrams(f).iter().enumerate() {
        for (i, &s) in ts.iter().enumerate() {
            for &t in &ts[i..] {
                let expected = rank_oracle(f, p, s, t)?;
                let got = dgm.rank(s, t);
                if expected != got {
                    failures.push(format!("degree {p}, s = {s}, t = {t}: oracle {expected}, diagram {got}"));
                }
            }
        }
    }
    Ok(failures)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub sup_distance: f64,
    /// `(degree, bottleneck distance)`.
    pub bottlenecks: Vec<(usize, f64)>,
    /// `sup_distance - max bottleneck`.
    pub slack: f64,
    pub holds: bool,
}

pub fn stability_check(f: &FilterFunction, g: &FilterFunction, degrees: &[usize]) -> Result<StabilityReport> {
    same_complex(f, g)?;
    let sup = f.sup_distance(g);
    let mut bottlenecks = Vec::with_capacity(degrees.len());
    for &p in degrees {
        bottlenecks.push((p, bottleneck(&diagram(f, p)?, &diagram(g, p)?)));
    }
    let worst = bottlenecks.iter().map(|&(_, d)| d).fold(0.0, f64::max);
    Ok(StabilityReport {
        sup_distance: sup,
        bottlenecks,
        slack: sup - worst,
        holds: worst <= sup,
    })
}

fn same_complex(f: &FilterFunction, g: &FilterFunction) -> Result<()> {
    if !Arc::ptr_eq(f.complex(), g.complex()) && f.complex() != g.complex() {
        return Err(Error::Invalid("filters live on different complexes".into()));
    }
    Ok(())
}

/// `max_p db(Dgm_p(f), Dgm_p(g))` over all degrees.
pub fn max_bottleneck(f: &FilterFunction, g: &FilterFunction) -> Result<f64> {
    same_complex(f, g)?;
    Ok(diagrams(f)
        .iter()
        .zip(diagrams(g).iter())
        .map(|(a, b)| bottleneck(a, b))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsometryReport {
    pub gap_radius: f64,
    pub sup_distance: f64,
    pub max_bottleneck: f64,
    /// Whether `g` lies in the closed ball of radius `gap_radius` around `f`.
    pub in_ball: bool,
    pub holds: bool,
}

/// Inside the closed `d₀(f)` ball the diagram map preserves distances to `f`.
pub fn local_isometry_check(f: &FilterFunction, g: &FilterFunction) -> Result<IsometryReport> {
    let d0 = f.gap_radius()?;
    if d0 <= 0.0 {
        return Err(Error::Invalid("filter has ties, so its gap radius is 0".into()));
    }
    let sup = f.sup_distance(g);
    let mb = max_bottleneck(f, g)?;
    let in_ball = sup <= d0;
    Ok(IsometryReport {
        gap_radius: d0,
        sup_distance: sup,
        max_bottleneck: mb,
        in_ball,
        holds: !in_ball || (mb - sup).abs() <= ISOMETRY_TOL,
    })
}

/// For `g, h` within `d₀(f)/3` of `f`, the diagram map preserves `‖g - h‖_∞`.
pub fn pairwise_isometry_check(f: &FilterFunction, g: &FilterFunction, h: &FilterFunction) -> Result<IsometryReport> {
    let d0 = f.gap_radius()?;
    let in_ball = f.sup_distance(g).max(f.sup_distance(h)) <= d0 / 3.0;
    let sup = g.sup_distance(h);
    let mb = max_bottleneck(g, h)?;
    Ok(IsometryReport {
        gap_radius: d0,
        sup_distance: sup,
        max_bottleneck: mb,
        in_ball,
        holds: !in_ball || (mb - sup).abs() <= ISOMETRY_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityReport {
    pub max_bottleneck: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `max_p db ≥ min(‖f - g‖_∞, max(d₀(f), d₀(g)))` for filters whose strict
/// orders are compatible; checked without tolerance.
pub fn coercivity_check(f: &FilterFunction, g: &FilterFunction) -> Result<CoercivityReport> {
    let d0 = f.gap_radius()?.max(g.gap_radius()?);
    let bound = f.sup_distance(g).min(d0);
    let mb = max_bottleneck(f, g)?;
    Ok(CoercivityReport {
        max_bottleneck: mb,
        bound,
        holds: mb >= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    /// `output_dim × directions`.
    #[serde(skip)]
    pub analytic: DMatrix<f64>,
    #[serde(skip)]
    pub numeric: DMatrix<f64>,
    /// Largest `|analytic - numeric| / max(FD_REL_TOL·|numeric|, FD_ABS_TOL)`.
    pub worst_ratio: f64,
    pub passed: bool,
}

/// Chain-rule derivative along each tangent direction versus central
/// differences of `θ ↦ loss(Dgm_p(F(θ)))`.
pub fn gradient_check(
    f: &dyn Parametrization,
    theta: &[f64],
    p: usize,
    loss: &dyn BarcodeLoss,
) -> Result<GradientReport> {
    let c = compose(f, theta, p, loss)?;
    if !c.smooth {
        return Err(Error::SingularParameter { ties: Vec::new() });
    }
    let dirs = f.tangent_directions(theta);
    let k = loss.output_dim();
    let mut analytic = DMatrix::zeros(k, dirs.len());
    let mut numeric = DMatrix::zeros(k, dirs.len());
    let along = |dir: &[f64], h: f64| -> Result<Vec<f64>> {
        let moved = f.perturb(theta, dir, h);
        loss.value_on(&diagram(&f.value(&moved)?, p)?)
    };
    let mut worst: f64 = 0.0;
    for (i, e) in dirs.iter().enumerate() {
        let plus = along(e, FD_STEP)?;
        let minus = along(e, -FD_STEP)?;
        for r in 0..k {
            let a: f64 = (0..theta.len()).map(|j| c.jacobian[(r, j)] * e[j]).sum();
            let n = (plus[r] - minus[r]) / (2.0 * FD_STEP);
            analytic[(r, i)] = a;
            numeric[(r, i)] = n;
            worst = worst.max((a - n).abs() / (FD_REL_TOL * n.abs()).max(FD_ABS_TOL));
        }
    }
    Ok(GradientReport {
        analytic,
        numeric,
        worst_ratio: worst,
        passed: worst <= 1.0,
    })
}

/// True when `F` and `loss` keep the same combinatorics at every finite-difference
/// probe: same template, loss smooth, loss gradient nearly unchanged.
pub fn stable_at_probes(f: &dyn Parametrization, theta: &[f64], p: usize, loss: &dyn BarcodeLoss, h: f64) -> bool {
    let base = match compose(f, theta, p, loss) {
        Ok(c) if c.smooth => c,
        _ => return false,
    };
    let base_grad = match loss.evaluate(&base.lift.evaluate(f, theta).expect("lift evaluates")) {
        Ok(e) => e.grad,
        Err(_) => return false,
    };
    let scale = 1.0 + base_grad.amax();
    for e in f.tangent_directions(theta) {
        for s in [h, -h] {
            let moved = f.perturb(theta, &e, s);
            let lift = match build_lift(f, &moved, p) {
                Ok(l) if l.template() == base.lift.template() => l,
                _ => return false,
            };
            match lift.evaluate(f, &moved).and_then(|x| loss.evaluate(&x)) {
                Ok(ev) if ev.smooth && (&ev.grad - &base_grad).amax() <= 1e-3 * scale => {}
                _ => return false,
            }
        }
    }
    true
}

/// Random complexes and filters.
pub mod gen {
    use super::*;

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
        rng.gen_range(lo..hi)
    }

    /// A random complex with at most `max_simplices` simplices: vertices, then
    /// random edges, then triangles whose boundary is present.
    pub fn small_complex(rng: &mut ChaCha8Rng, max_simplices: usize) -> Arc<SimplicialComplex> {
        let nv = rng.gen_range(1..=4.min(max_simplices));
        let mut list: Vec<Vec<usize>> = (0..nv).map(|v| vec![v]).collect();
        let mut edges = Vec::new();
        for a in 0..nv {
            for b in a + 1..nv {
                if list.len() < max_simplices && rng.gen_bool(0.6) {
                    list.push(vec![a, b]);
                    edges.push((a, b));
                }
            }
        }
        for a in 0..nv {
            for b in a + 1..nv {
                for c in b + 1..nv {
                    let present = [(a, b), (a, c), (b, c)].iter().all(|e| edges.contains(e));
                    if present && list.len() < max_simplices && rng.gen_bool(0.5) {
                        list.push(vec![a, b, c]);
                    }
                }
            }
        }
        Arc::new(SimplicialComplex::build(&list).expect("valid simplex list"))
    }

    /// A random complex on `nv` vertices with edge probability `pe` and
    /// probability `pt` for each triangle whose edges are present.
    pub fn random_complex(rng: &mut ChaCha8Rng, nv: usize, pe: f64, pt: f64) -> Arc<SimplicialComplex> {
        let mut list: Vec<Vec<usize>> = (0..nv).map(|v| vec![v]).collect();
        let mut has = vec![vec![false; nv]; nv];
        for a in 0..nv {
            for b in a + 1..nv {
                if rng.gen_bool(pe) {
                    list.push(vec![a, b]);
                    has[a][b] = true;
                }
            }
        }
        for a in 0..nv {
            for b in a + 1..nv {
                for c in b + 1..nv {
                    if has[a][b] && has[a][c] && has[b][c] && rng.gen_bool(pt) {
                        list.push(vec![a, b, c]);
                    }
                }
            }
        }
        Arc::new(SimplicialComplex::build(&list).expect("valid simplex list"))
    }

    /// A cone over an `n`-cycle: cycle vertices `0..n`, apex `n`.
    pub fn wheel(n: usize) -> Arc<SimplicialComplex> {
        let list: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut t = vec![i, (i + 1) % n, n];
                t.sort_unstable();
                t
            })
            .collect();
        Arc::new(SimplicialComplex::build(&list).expect("valid wheel"))
    }

    /// I.i.d. vertex values extended lower-star, then non-negative jitter added
    /// dimension by dimension. With `grid`, values are small integers so ties are common.
    pub fn monotone_filter(rng: &mut ChaCha8Rng, k: &Arc<SimplicialComplex>, grid: bool) -> FilterFunction {
        let mut values = vec![0.0; k.len()];
        for s in 0..k.len() {
            if k.dim_of(s) == 0 {
                values[s] = if grid { rng.gen_range(0..4) as f64 } else { uniform(rng, -1.0, 1.0) };
            } else {
                let top = k.faces(s).iter().map(|&f| values[f]).fold(f64::NEG_INFINITY, f64::max);
                let jitter = if grid {
                    rng.gen_range(0..2) as f64
                } else if rng.gen_bool(0.3) {
                    0.0
                } else {
                    uniform(rng, 0.0, 0.5)
                };
                values[s] = top + jitter;
            }
        }
        FilterFunction::new(k.clone(), values).expect("monotone by construction")
    }

    /// Distinct values along a linear extension of the face order, with
    /// consecutive gaps in `[min_gap, 4·min_gap)`.
    pub fn generic_filter(rng: &mut ChaCha8Rng, k: &Arc<SimplicialComplex>, min_gap: f64) -> FilterFunction {
        // random linear extension: repeatedly pick an available simplex
        let n = k.len();
        let mut missing: Vec<usize> = (0..n).map(|s| k.faces(s).len()).collect();
        let mut avail: Vec<usize> = (0..n).filter(|&s| missing[s] == 0).collect();
        let mut values = vec![0.0; n];
        let mut current = uniform(rng, -1.0, 1.0);
        while !avail.is_empty() {
            let s = avail.swap_remove(rng.gen_range(0..avail.len()));
            values[s] = current;
            current += uniform(rng, min_gap, 4.0 * min_gap);
            for &c in k.cofaces(s) {
                missing[c] -= 1;
                if missing[c] == 0 {
                    avail.push(c);
                }
            }
        }
        FilterFunction::new(k.clone(), values).expect("monotone by construction")
    }

    /// `f + δ` with `‖δ‖_∞ = radius`, where `radius` is small enough to keep monotonicity.
    pub fn perturbation(rng: &mut ChaCha8Rng, f: &FilterFunction, radius: f64) -> FilterFunction {
        let mut delta: Vec<f64> = (0..f.values().len()).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let top = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let hit = rng.gen_range(0..delta.len());
        delta[hit] = if delta[hit] < 0.0 { -top } else { top };
        // shrink by ulps until rounding keeps the draw inside the closed ball
        let mut r = radius;
        loop {
            let values: Vec<f64> = f.values().iter().zip(&delta).map(|(v, d)| v + r * d / top).collect();
            if sup_distance(&values, f.values()) <= radius {
                if let Ok(g) = FilterFunction::new(f.complex().clone(), values) {
                    return g;
                }
            }
            r = r.next_down();
        }
    }

    /// `φ ∘ f` for a random non-decreasing piecewise-linear `φ`; strictly
    /// increasing unless `allow_flat`.
    pub fn reparametrize(rng: &mut ChaCha8Rng, f: &FilterFunction, allow_flat: bool) -> FilterFunction {
        let mut sorted = f.values().to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut image = Vec::with_capacity(sorted.len());
        let mut current = uniform(rng, -2.0, 2.0);
        for i in 0..sorted.len() {
            image.push(current);
            let flat = allow_flat && i + 1 < sorted.len() && rng.gen_bool(0.2);
            if !flat {
                current += uniform(rng, 0.01, 2.0);
            }
        }
        let values = f
            .values()
            .iter()
            .map(|v| image[sorted.binary_search_by(|x| x.total_cmp(v)).expect("value present")])
            .collect();
        FilterFunction::new(f.complex().clone(), values).expect("non-decreasing maps keep monotonicity")
    }

    pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(d, d, |_, _| uniform(rng, -0.5, 0.5));
        &b * b.transpose() + DMatrix::identity(d, d) * 0.5
    }

    pub fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..d).map(|_| uniform(rng, -1.0, 1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-3 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }
}

/// Parametrizations covered by the gradient suite.
pub const PARAMETRIZATIONS: [&str; 5] = ["height", "lower_star", "rips", "ellipsoid_rips", "raw_filter"];
/// Losses covered by the gradient suite.
pub const LOSSES: [&str; 5] = [
    "total_persistence",
    "persistence_image",
    "linear_representation",
    "bottleneck_to",
    "wasserstein_to",
];

/// A random parametrization of the given kind and a parameter drawn from its domain.
pub fn random_parametrization(rng: &mut ChaCha8Rng, kind: &str) -> Result<(Arc<dyn Parametrization>, Vec<f64>)> {
    Ok(match kind {
        "height" => {
            let k = gen::wheel(5);
            let coords: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| gen::uniform(rng, -1.0, 1.0)).collect()).collect();
            (Arc::new(Height::new(k, coords)?), gen::unit_vector(rng, 3))
        }
        "lower_star" => {
            let k = gen::wheel(5);
            let theta = (0..6).map(|_| gen::uniform(rng, -1.0, 1.0)).collect();
            (Arc::new(LowerStar::new(k, VertexValues { num_vertices: 6 })?), theta)
        }
        "rips" => {
            let theta = (0..10).map(|_| gen::uniform(rng, 0.0, 1.0)).collect();
            (Arc::new(Rips::new(5, 2, 2)?), theta)
        }
        "ellipsoid_rips" => {
            let points: Vec<Vec<f64>> = (0..5).map(|_| (0..2).map(|_| gen::uniform(rng, 0.0, 1.0)).collect()).collect();
            let cov = CovarianceVector {
                matrices: (0..5).map(|_| gen::random_spd(rng, 2)).collect(),
            };
            (Arc::new(EllipsoidRips::new(PointCloud::new(&points)?, 2)?), cov.chart())
        }
        "raw_filter" => {
            let k = gen::wheel(5);
            let f = gen::generic_filter(rng, &k, 0.05);
            (Arc::new(RawFilter::new(k)), f.values().to_vec())
        }
        other => return Err(Error::Invalid(format!("unknown parametrization {other}"))),
    })
}

fn linear_representation() -> LinearRepresentation {
    let phi = Arc::new(|b: f64, d: f64| PointFeature {
        value: vec![b * d, b.sin() + d * d],
        d_birth: vec![d, b.cos()],
        d_death: vec![b, 2.0 * d],
        smooth: true,
    });
    let psi = Arc::new(|v: f64| BirthFeature {
        value: vec![v, v * v],
        d_birth: vec![1.0, 2.0 * v],
        smooth: true,
    });
    LinearRepresentation::new(2, phi, psi, WeightingFunction::bump(1.0))
}

/// A random loss of the given kind; distance targets are diagrams of `F` at a
/// nearby parameter, with some finite bars dropped and infinite bars shifted.
pub fn random_loss(
    rng: &mut ChaCha8Rng,
    kind: &str,
    f: &dyn Parametrization,
    theta: &[f64],
    p: usize,
) -> Result<Arc<dyn BarcodeLoss>> {
    let target = || -> Result<Barcode> {
        let mut rng = rng.clone();
        let u = gen::unit_vector(&mut rng, theta.len());
        let mut moved = f.perturb(theta, &u, gen::uniform(&mut rng, 0.02, 0.2));
        f.retract(&mut moved);
        let d = diagram(&f.value(&moved)?, p)?;
        let keep: Vec<(f64, f64)> = d.finite().iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
        // offset infinite bars so no matched pair starts at zero distance
        let shifted = d.infinite().iter().map(|v| v + gen::uniform(&mut rng, 0.05, 0.2)).collect();
        Ok(Barcode::new(keep, shifted))
    };
    Ok(match kind {
        "total_persistence" => Arc::new(TotalPersistence),
        "persistence_image" => Arc::new(PersistenceImage::new(
            GaussianImageSpec {
                x0: -2.0,
                x1: 2.0,
                y0: 0.0,
                y1: 2.0,
                n: 3,
                sigma: 0.5,
            },
            WeightingFunction::smoothstep(1.0),
        )?),
        "linear_representation" => Arc::new(linear_representation()),
        "bottleneck_to" => Arc::new(BottleneckTo::new(target()?)),
        "wasserstein_to" => Arc::new(WassersteinTo::new(target()?, 1.0)?),
        other => return Err(Error::Invalid(format!("unknown loss {other}"))),
    })
}

/// One gradient-check instance.
pub struct GradientInstance {
    pub parametrization: Arc<dyn Parametrization>,
    pub theta: Vec<f64>,
    pub degree: usize,
    pub loss: Arc<dyn BarcodeLoss>,
}

/// Draws a generic instance: redraws until the parameter is smooth, the
/// degree-`p` diagram has a finite bar, and [`stable_at_probes`] holds.
pub fn gradient_instance(rng: &mut ChaCha8Rng, param: &str, loss: &str, index: usize) -> Result<GradientInstance> {
    // images take finite diagrams only; the other losses alternate degrees
    let degree = if loss == "persistence_image" { 1 } else { index % 2 };
    for _ in 0..1000 {
        let (f, theta) = random_parametrization(rng, param)?;
        if !f.is_smooth_at(&theta) {
            continue;
        }
        let dgm = diagram(&f.value(&theta)?, degree)?;
        if dgm.finite().is_empty() {
            continue;
        }
        let l = random_loss(rng, loss, f.as_ref(), &theta, degree)?;
        if stable_at_probes(f.as_ref(), &theta, degree, l.as_ref(), FD_STEP) {
            return Ok(GradientInstance {
                parametrization: f,
                theta,
                degree,
                loss: l,
            });
        }
    }
    Err(Error::Invalid(format!("no generic instance found for {param} with {loss}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub instance: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub instances: usize,
    pub passed: bool,
    pub failures: Vec<Failure>,
}

/// Generator for instance `i` of a suite run with `seed`.
pub fn instance_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Worker pool capped by `BARCODE_GRAD_THREADS` when set.
fn pool() -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("BARCODE_GRAD_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        b = b.num_threads(n.max(1));
    }
    b.build().expect("thread pool")
}

/// Runs `check` on instances `0..count` in parallel; failures keep instance order.
pub fn run_instances<F>(suite: &str, seed: u64, count: usize, check: F) -> SuiteReport
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<Vec<String>> + Sync,
{
    let results: Vec<Vec<String>> = pool().install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| match check(i, &mut instance_rng(seed, i)) {
                Ok(v) => v,
                Err(e) => vec![format!("error: {e}")],
            })
            .collect()
    });
    let failures: Vec<Failure> = results
        .into_iter()
        .enumerate()
        .flat_map(|(i, v)| v.into_iter().map(move |detail| Failure { instance: i, detail }))
        .collect();
    SuiteReport {
        suite: suite.to_string(),
        seed,
        instances: count,
        passed: failures.is_empty(),
        failures,
    }
}

pub fn oracle_suite(seed: u64, count: usize) -> SuiteReport {
    run_instances("oracle", seed, count, |_, rng| {
        let k = gen::small_complex(rng, 8);
        let grid = rng.gen_bool(0.5);
        oracle_check(&gen::monotone_filter(rng, &k, grid))
    })
}

pub fn stability_suite(seed: u64, count: usize) -> SuiteReport {
    run_instances("stability", seed, count, |i, rng| {
        let k = gen::random_complex(rng, 6, 0.6, 0.5);
        let f = gen::monotone_filter(rng, &k, i % 4 == 0);
        let g = if i % 2 == 0 {
            gen::monotone_filter(rng, &k, false)
        } else {
            let raw: Vec<f64> = f.values().iter().map(|v| v + gen::uniform(rng, -0.3, 0.3)).collect();
            FilterFunction::new(k.clone(), RawFilter::new(k.clone()).isotonic_repair(&raw))?
        };
        let degrees: Vec<usize> = (0..=k.dim()).collect();
        let r = stability_check(&f, &g, &degrees)?;
        Ok(if r.holds {
            vec![]
        } else {
            vec![format!("bound violated: {r:?} for f = {:?}, g = {:?}", f.values(), g.values())]
        })
    })
}

pub fn isometry_suite(seed: u64, count: usize) -> SuiteReport {
    run_instances("isometry", seed, count, |_, rng| {
        let k = gen::random_complex(rng, 5, 0.7, 0.5);
        let f = gen::generic_filter(rng, &k, 0.2);
        let d0 = f.gap_radius()?;
        let mut failures = Vec::new();
        for j in 0..5 {
            // the last draw sits on the boundary of the ball
            let r = if j == 4 { d0 } else { d0 * gen::uniform(rng, 0.0, 1.0) };
            let g = gen::perturbation(rng, &f, r);
            let rep = local_isometry_check(&f, &g)?;
            if !rep.in_ball || !rep.holds {
                failures.push(format!("distance not preserved: {rep:?}"));
            }
            let rg = d0 / 3.0 * gen::uniform(rng, 0.0, 1.0);
            let g = gen::perturbation(rng, &f, rg);
            let rh = d0 / 3.0 * gen::uniform(rng, 0.0, 1.0);
            let h = gen::perturbation(rng, &f, rh);
            let rep = pairwise_isometry_check(&f, &g, &h)?;
            if !rep.in_ball || !rep.holds {
                failures.push(format!("pairwise distance not preserved: {rep:?}"));
            }
            let g = gen::reparametrize(rng, &f, j % 2 == 1);
            let rep = coercivity_check(&f, &g)?;
            if !rep.holds {
                failures.push(format!("coercivity violated: {rep:?}"));
            }
        }
        Ok(failures)
    })
}

/// `count` instances for every parametrization and loss pair.
pub fn gradient_suite(seed: u64, count: usize) -> SuiteReport {
    let combos: Vec<(&str, &str)> = PARAMETRIZATIONS
        .iter()
        .flat_map(|&p| LOSSES.iter().map(move |&l| (p, l)))
        .collect();
    run_instances("gradients", seed, combos.len() * count, |i, rng| {
        let (param, loss) = combos[i / count];
        let inst = gradient_instance(rng, param, loss, i % count)?;
        let r = gradient_check(inst.parametrization.as_ref(), &inst.theta, inst.degree, inst.loss.as_ref())?;
        Ok(if r.passed {
            vec![]
        } else {
            vec![format!(
                "{param} with {loss} in degree {}: ratio {} at θ = {:?}",
                inst.degree, r.worst_ratio, inst.theta
            )]
        })
    })
}

/// Runs a named suite with its default instance count.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    Ok(match name {
        "oracle" => oracle_suite(seed, 200),
        "stability" => stability_suite(seed, 1000),
        "isometry" => isometry_suite(seed, 100),
        "gradients" => gradient_suite(seed, 100),
        other => return Err(Error::Invalid(format!("unknown suite {other}; expected one of {SUITES:?}"))),
    })
}

pub fn total_simplices(templates: &[(usize, usize)]) -> usize {
    templates.iter().map(|&(m, n)| 2 * m + n).sum()
}

/// True when the only nonzero entries of `grad` are `(-½, ½)` (or `(½, -½)`)
/// on the two slots of one finite pair, or a single `±1`.
pub fn bottleneck_pattern(grad: &[f64], m: usize) -> bool {
    let nz: Vec<usize> = (0..grad.len()).filter(|&i| grad[i] != 0.0).collect();
    match nz.as_slice() {
        [i] => grad[*i].abs() == 1.0,
        [i, j] => *i % 2 == 0 && *j == i + 1 && *j < 2 * m && grad[*i].abs() == 0.5 && grad[*i] == -grad[*j],
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filter(simplices: &[Vec<usize>], values: Vec<f64>) -> FilterFunction {
        FilterFunction::new(Arc::new(SimplicialComplex::build(simplices).unwrap()), values).unwrap()
    }

    fn triangle_boundary() -> FilterFunction {
        filter(&[vec![0, 1], vec![0, 2], vec![1, 2]], vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    }

    #[test]
    fn rank_oracle_examples() {
        let f = triangle_boundary();
        assert_eq!(rank_oracle(&f, 0, 0.0, 0.0).unwrap(), 3);
        assert_eq!(rank_oracle(&f, 0, 0.0, 1.0).unwrap(), 1);
        assert_eq!(rank_oracle(&f, 1, 1.0, 1.0).unwrap(), 1);
        assert_eq!(rank_oracle(&f, 1, 0.5, 1.0).unwrap(), 0);
        assert_eq!(rank_oracle(&f, 3, 0.0, 1.0).unwrap(), 0);
        assert!(rank_oracle(&f, 0, 1.0, 0.0).is_err());
        let big = SimplicialComplex::full(7, 2).unwrap();
        let g = FilterFunction::new(Arc::new(big), vec![0.0; 63]).unwrap();
        assert_eq!(rank_oracle(&g, 0, 0.0, 0.0).unwrap(), 1);
        let bigger = SimplicialComplex::full(8, 2).unwrap();
        let n = bigger.len();
        let h = FilterFunction::new(Arc::new(bigger), vec![0.0; n]).unwrap();
        assert_eq!(rank_oracle(&h, 0, 0.0, 0.0), Err(Error::OracleTooLarge(n)));
    }

    #[test]
    fn oracle_agrees_on_examples() {
        assert!(oracle_check(&triangle_boundary()).unwrap().is_empty());
        let filled = filter(&[vec![0, 1, 2]], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(oracle_check(&filled).unwrap().is_empty());
    }

    #[test]
    fn stability_examples() {
        let f = filter(&[vec![0, 1]], vec![0.0, 1.0, 2.0]);
        let r = stability_check(&f, &f, &[0, 1]).unwrap();
        assert_eq!(r.slack, 0.0);
        assert!(r.holds);
        let g = filter(&[vec![0, 1]], vec![0.5, 1.5, 2.5]);
        let r = stability_check(&f, &g, &[0]).unwrap();
        assert_eq!(r.bottlenecks, vec![(0, 0.5)]);
        assert!(r.holds);
    }

    #[test]
    fn isometry_examples() {
        let f = filter(&[vec![0, 1]], vec![0.0, 1.0, 2.0]);
        let r = local_isometry_check(&f, &f).unwrap();
        assert_eq!((r.sup_distance, r.max_bottleneck), (0.0, 0.0));
        let g = filter(&[vec![0, 1]], vec![0.0, 1.05, 1.95]);
        let r = local_isometry_check(&f, &g).unwrap();
        assert!(r.in_ball && r.holds, "{r:?}");
        assert!((r.max_bottleneck - 0.05).abs() < 1e-12);
        let c = coercivity_check(&f, &g).unwrap();
        assert!(c.holds);
    }

    #[test]
    fn small_suites_pass() {
        for r in [
            oracle_suite(3, 40),
            stability_suite(3, 60),
            isometry_suite(3, 10),
        ] {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn gradient_checks_on_examples() {
        let k = Arc::new(SimplicialComplex::build(&[vec![0, 1]]).unwrap());
        let f = RawFilter::new(k);
        let r = gradient_check(&f, &[0.0, 1.0, 2.0], 0, &TotalPersistence).unwrap();
        assert!(r.passed);
        assert!((&r.analytic - &r.numeric).amax() < 1e-9);
        let s = gradient_suite(9, 2);
        assert!(s.passed, "{s:?}");
    }

    #[test]
    fn suites_are_deterministic() {
        let a = oracle_suite(5, 30);
        assert_eq!(a, oracle_suite(5, 30));
        assert!(run_suite("nope", 0).is_err());
    }

    #[test]
    fn patterns() {
        assert!(bottleneck_pattern(&[-0.5, 0.5, 0.0], 1));
        assert!(bottleneck_pattern(&[0.0, 0.0, -1.0], 1));
        assert!(!bottleneck_pattern(&[0.0, 0.5, -0.5, 0.0], 2));
        assert!(!bottleneck_pattern(&[0.0, 0.0], 1));
    }
}
