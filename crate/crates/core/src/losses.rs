//! Functions of ordered barcodes that only depend on the underlying barcode,
//! each returning its value and gradient with respect to the `2m + n` slots.
//!
//! Slots with `b == d` exactly sit on the diagonal and are invisible to every
//! loss here. They receive a zero gradient and never affect the smoothness
//! flag: a lift keeps such a pair on the diagonal whenever both slots read the
//! same smooth piece of the parametrization.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::barcode::{
    self, half_persistence, sorted_infinite_matching, Barcode, Endpoint, OrderedBarcode,
};
use crate::error::{Error, Result};

/// Ties closer than this make a loss non-smooth.
pub const LOSS_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: Vec<f64>,
    /// `output_dim × (2m + n)`.
    pub grad: DMatrix<f64>,
    pub smooth: bool,
}

impl LossEval {
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }

    pub fn scalar_grad(&self) -> Vec<f64> {
        self.grad.row(0).iter().copied().collect()
    }

    fn scalar_eval(value: f64, grad: Vec<f64>, smooth: bool) -> Self {
        LossEval {
            value: vec![value],
            grad: DMatrix::from_row_slice(1, grad.len(), &grad),
            smooth,
        }
    }
}

pub trait BarcodeLoss: Send + Sync {
    fn name(&self) -> &'static str;

    fn output_dim(&self) -> usize;

    fn evaluate(&self, x: &OrderedBarcode) -> Result<LossEval>;

    fn value(&self, x: &OrderedBarcode) -> Result<Vec<f64>> {
        Ok(self.evaluate(x)?.value)
    }

    /// Value on an unordered barcode, through its canonical preimage.
    fn value_on(&self, barcode: &Barcode) -> Result<Vec<f64>> {
        self.value(&OrderedBarcode::from_barcode(barcode))
    }
}

/// `Σ (d_i - b_i)` over finite slots.
#[derive(Debug, Clone, Copy, Default)]
pub struct TotalPersistence;

impl BarcodeLoss for TotalPersistence {
    fn name(&self) -> &'static str {
        "total_persistence"
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &OrderedBarcode) -> Result<LossEval> {
        let value = x.pairs().map(|(b, d)| d - b).sum();
        let mut grad = vec![0.0; x.len()];
        for i in 0..x.m() {
            grad[2 * i] = -1.0;
            grad[2 * i + 1] = 1.0;
        }
        Ok(LossEval::scalar_eval(value, grad, true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `3s² - 2s³` on `[0, 1]` with `s = u / t`; C¹.
    Smoothstep,
    /// `h(s) / (h(s) + h(1 - s))` with `h(x) = exp(-1/x)`; C^∞.
    Bump,
    /// `ω(u) = u`.
    Identity,
}

/// Weight `ω` applied to the persistence `d - b`; `ω(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingFunction {
    pub kind: WeightKind,
    pub scale: f64,
}

impl WeightingFunction {
    pub fn smoothstep(scale: f64) -> Self {
        WeightingFunction {
            kind: WeightKind::Smoothstep,
            scale,
        }
    }

    pub fn bump(scale: f64) -> Self {
        WeightingFunction {
            kind: WeightKind::Bump,
            scale,
        }
    }

    pub fn identity() -> Self {
        WeightingFunction {
            kind: WeightKind::Identity,
            scale: 1.0,
        }
    }

    /// `(ω(u), ω'(u))`.
    pub fn eval(&self, u: f64) -> (f64, f64) {
        let t = self.scale;
        let s = u / t;
        match self.kind {
            WeightKind::Identity => (u, 1.0),
            _ if s <= 0.0 => (0.0, 0.0),
            _ if s >= 1.0 => (1.0, 0.0),
            WeightKind::Smoothstep => (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s) / t),
            WeightKind::Bump => {
                let h = |x: f64| (-1.0 / x).exp();
                let dh = |x: f64| h(x) / (x * x);
                let (a, b) = (h(s), h(1.0 - s));
                let den = a + b;
                (a / den, (dh(s) * b + a * dh(1.0 - s)) / (den * den) / t)
            }
        }
    }
}

/// Grid `[x0, x1] × [y0, y1]` split into `n × n` boxes, Gaussian standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianImageSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub n: usize,
    pub sigma: f64,
}

impl GaussianImageSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x0 < self.x1 && self.y0 < self.y1 && self.n >= 1 && self.sigma > 0.0) {
            return Err(Error::Invalid(format!("bad persistence image spec {self:?}")));
        }
        Ok(())
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Persistence image in birth/persistence coordinates: entry `k * n + l`
/// integrates the surface over birth box `k` and persistence box `l`.
#[derive(Debug, Clone)]
pub struct PersistenceImage {
    spec: GaussianImageSpec,
    weight: WeightingFunction,
}

impl PersistenceImage {
    pub fn new(spec: GaussianImageSpec, weight: WeightingFunction) -> Result<Self> {
        spec.validate()?;
        Ok(PersistenceImage { spec, weight })
    }

    /// Mass of a unit 1-D Gaussian centred at `c` in each of the `n` cells of
    /// `[lo, hi]`, with derivatives in `c`.
    fn cells(&self, lo: f64, hi: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.spec.n;
        let s = self.spec.sigma;
        let width = (hi - lo) / n as f64;
        let edges: Vec<f64> = (0..=n).map(|k| lo + width * k as f64).collect();
        let cdf: Vec<f64> = edges.iter().map(|e| normal_cdf((e - c) / s)).collect();
        let pdf: Vec<f64> = edges.iter().map(|e| normal_pdf((e - c) / s)).collect();
        let mass = (0..n).map(|k| cdf[k + 1] - cdf[k]).collect();
        let dmass = (0..n).map(|k| -(pdf[k + 1] - pdf[k]) / s).collect();
        (mass, dmass)
    }
}

impl BarcodeLoss for PersistenceImage {
    fn name(&self) -> &'static str {
        "persistence_image"
    }

    fn output_dim(&self) -> usize {
        self.spec.n * self.spec.n
    }

    fn evaluate(&self, x: &OrderedBarcode) -> Result<LossEval> {
        if x.n() > 0 {
            return Err(Error::InfiniteBarsUnsupported);
        }
        let n = self.spec.n;
        let mut value = vec![0.0; n * n];
        let mut grad = DMatrix::zeros(n * n, x.len());
        for (i, (b, d)) in x.pairs().enumerate() {
            let pers = d - b;
            let (w, dw) = self.weight.eval(pers);
            let (bx, dbx) = self.cells(self.spec.x0, self.spec.x1, b);
            let (py, dpy) = self.cells(self.spec.y0, self.spec.y1, pers);
            for k in 0..n {
                for l in 0..n {
                    let e = k * n + l;
                    value[e] += w * bx[k] * py[l];
                    grad[(e, 2 * i)] += -dw * bx[k] * py[l] + w * dbx[k] * py[l] - w * bx[k] * dpy[l];
                    grad[(e, 2 * i + 1)] += dw * bx[k] * py[l] + w * bx[k] * dpy[l];
                }
            }
        }
        Ok(LossEval {
            value,
            grad,
            smooth: true,
        })
    }
}

/// Value and partial derivatives of one component of a linear representation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFeature {
    pub value: Vec<f64>,
    pub d_birth: Vec<f64>,
    pub d_death: Vec<f64>,
    pub smooth: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthFeature {
    pub value: Vec<f64>,
    pub d_birth: Vec<f64>,
    pub smooth: bool,
}

pub type PointMap = Arc<dyn Fn(f64, f64) -> PointFeature + Send + Sync>;
pub type BirthMap = Arc<dyn Fn(f64) -> BirthFeature + Send + Sync>;

/// `V(D) = Σ_finite ω(d - b) φ(b, d) + Σ_infinite ψ(v)`.
#[derive(Clone)]
pub struct LinearRepresentation {
    k: usize,
    phi: PointMap,
    psi: BirthMap,
    weight: WeightingFunction,
}

impl LinearRepresentation {
    pub fn new(k: usize, phi: PointMap, psi: BirthMap, weight: WeightingFunction) -> Self {
        LinearRepresentation { k, phi, psi, weight }
    }
}

impl BarcodeLoss for LinearRepresentation {
    fn name(&self) -> &'static str {
        "linear_representation"
    }

    fn output_dim(&self) -> usize {
        self.k
    }

    fn evaluate(&self, x: &OrderedBarcode) -> Result<LossEval> {
        let k = self.k;
        let mut value = vec![0.0; k];
        let mut grad = DMatrix::zeros(k, x.len());
        let mut smooth = true;
        let check = |v: &Vec<f64>| -> Result<()> {
            if v.len() != k {
                return Err(Error::ShapeError(format!("feature of length {} for k = {k}", v.len())));
            }
            Ok(())
        };
        for (i, (b, d)) in x.pairs().enumerate() {
            let (w, dw) = self.weight.eval(d - b);
            let f = (self.phi)(b, d);
            check(&f.value)?;
            smooth &= f.smooth;
            for c in 0..k {
                value[c] += w * f.value[c];
                grad[(c, 2 * i)] = -dw * f.value[c] + w * f.d_birth[c];
                grad[(c, 2 * i + 1)] = dw * f.value[c] + w * f.d_death[c];
            }
        }
        for (j, &v) in x.infinite().iter().enumerate() {
            let f = (self.psi)(v);
            check(&f.value)?;
            smooth &= f.smooth;
            for c in 0..k {
                value[c] += f.value[c];
                grad[(c, 2 * x.m() + j)] = f.d_birth[c];
            }
        }
        Ok(LossEval { value, grad, smooth })
    }
}

/// One term of a matching cost as a function of the slots of `x`.
#[derive(Debug, Clone, PartialEq)]
struct CostTerm {
    value: f64,
    /// `(slot, partial derivative)`.
    grad: Vec<(usize, f64)>,
    smooth: bool,
}

/// Sign with `sign(0) = 0`, a valid subgradient of `|x|` at the kink.
fn sign(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

fn diagonal_term(x: &OrderedBarcode, i: usize) -> CostTerm {
    let (b, d) = x.pair(i);
    let sign = (d - b).signum();
    CostTerm {
        value: half_persistence((b, d)),
        grad: if b == d {
            Vec::new()
        } else {
            vec![(2 * i, -0.5 * sign), (2 * i + 1, 0.5 * sign)]
        },
        smooth: true,
    }
}

fn pair_term(x: &OrderedBarcode, i: usize, y: (f64, f64)) -> CostTerm {
    let (b, d) = x.pair(i);
    let (db, dd) = ((b - y.0).abs(), (d - y.1).abs());
    let (slot, diff) = if db >= dd { (2 * i, b - y.0) } else { (2 * i + 1, d - y.1) };
    CostTerm {
        value: db.max(dd),
        grad: vec![(slot, sign(diff))],
        smooth: (db - dd).abs() > LOSS_TIE_TOLERANCE && diff.abs() > LOSS_TIE_TOLERANCE,
    }
}

fn infinite_term(x: &OrderedBarcode, j: usize, w: f64) -> CostTerm {
    let diff = x.infinite()[j] - w;
    CostTerm {
        value: diff.abs(),
        grad: vec![(2 * x.m() + j, sign(diff))],
        smooth: diff.abs() > LOSS_TIE_TOLERANCE,
    }
}

fn constant_term(value: f64) -> CostTerm {
    CostTerm {
        value,
        grad: Vec::new(),
        smooth: true,
    }
}

fn births_distinct(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).all(|w| w[1] - w[0] > LOSS_TIE_TOLERANCE)
}

fn infinite_eval(len: usize) -> LossEval {
    LossEval::scalar_eval(f64::INFINITY, vec![0.0; len], false)
}

/// Bottleneck distance to a fixed barcode.
///
/// The gradient comes from the critical term of the matching cost: a slot pair
/// sent to the diagonal (two entries ±½), or one coordinate of a slot matched
/// to a target point or infinite bar (one entry ±1). Ties between terms, or
/// between the two coordinates of a term, make the loss non-smooth; the first
/// critical term in enumeration order then supplies the subgradient.
#[derive(Debug, Clone)]
pub struct BottleneckTo {
    target: Barcode,
}

impl BottleneckTo {
    pub fn new(target: Barcode) -> Self {
        BottleneckTo { target }
    }

    pub fn target(&self) -> &Barcode {
        &self.target
    }
}

impl BarcodeLoss for BottleneckTo {
    fn name(&self) -> &'static str {
        "bottleneck_to"
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &OrderedBarcode) -> Result<LossEval> {
        let target_inf = self.target.infinite();
        if x.n() != target_inf.len() {
            return Ok(infinite_eval(x.len()));
        }
        let points: Vec<(f64, f64)> = x.pairs().collect();
        let (value, _) =
            barcode::bottleneck_points(&points, x.infinite(), self.target.finite(), target_inf);

        let mut terms: Vec<CostTerm> = Vec::new();
        for (i, &p) in points.iter().enumerate() {
            if p.0 != p.1 {
                terms.push(diagonal_term(x, i));
            }
        }
        for (i, &p) in points.iter().enumerate() {
            if p.0 != p.1 {
                for &y in self.target.finite() {
                    terms.push(pair_term(x, i, y));
                }
            }
        }
        for &y in self.target.finite() {
            terms.push(constant_term(half_persistence(y)));
        }
        for (j, w) in sorted_infinite_matching(x.infinite(), target_inf) {
            terms.push(infinite_term(x, j, target_inf[w]));
        }

        let critical: Vec<&CostTerm> = terms
            .iter()
            .filter(|t| (t.value - value).abs() <= LOSS_TIE_TOLERANCE)
            .collect();
        let mut grad = vec![0.0; x.len()];
        // value 0 means x already matches the target: every term is at a kink
        let smooth = value > LOSS_TIE_TOLERANCE
            && critical.len() == 1
            && critical[0].smooth
            && births_distinct(x.infinite());
        if let Some(t) = critical.first() {
            for &(slot, g) in &t.grad {
                grad[slot] += g;
            }
        }
        Ok(LossEval::scalar_eval(value, grad, smooth))
    }
}

/// q-Wasserstein distance to a fixed barcode, with the subgradient obtained by
/// freezing the optimal matching.
#[derive(Debug, Clone)]
pub struct WassersteinTo {
    target: Barcode,
    q: f64,
}

impl WassersteinTo {
    pub fn new(target: Barcode, q: f64) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::BadExponent(q));
        }
        Ok(WassersteinTo { target, q })
    }

    pub fn target(&self) -> &Barcode {
        &self.target
    }

    /// True when removing any matched off-diagonal edge strictly raises the cost.
    fn matching_unique(&self, points: &[(f64, f64)], edges: &[(Endpoint, Endpoint)], cost: f64) -> bool {
        let tol = LOSS_TIE_TOLERANCE * (1.0 + cost);
        edges.iter().all(|&edge| {
            if let (Endpoint::Point(i), _) = edge {
                if points[i].0 == points[i].1 {
                    return true;
                }
            }
            let (_, alt) =
                barcode::wasserstein_assignment(points, self.target.finite(), self.q, Some(edge));
            alt > cost + tol
        })
    }
}

impl BarcodeLoss for WassersteinTo {
    fn name(&self) -> &'static str {
        "wasserstein_to"
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &OrderedBarcode) -> Result<LossEval> {
        let target_inf = self.target.infinite();
        if x.n() != target_inf.len() {
            return Ok(infinite_eval(x.len()));
        }
        let q = self.q;
        let points: Vec<(f64, f64)> = x.pairs().collect();
        let result =
            barcode::wasserstein_points(&points, x.infinite(), self.target.finite(), target_inf, q)?;
        let matching = result.matching.expect("finite distance has a matching");

        let mut terms = Vec::new();
        for &(l, r) in &matching.finite {
            terms.push(match (l, r) {
                (Endpoint::Point(i), Endpoint::Point(j)) => pair_term(x, i, self.target.finite()[j]),
                (Endpoint::Point(i), Endpoint::Diagonal) => diagonal_term(x, i),
                (Endpoint::Diagonal, Endpoint::Point(j)) => constant_term(half_persistence(self.target.finite()[j])),
                (Endpoint::Diagonal, Endpoint::Diagonal) => constant_term(0.0),
            });
        }
        for &(j, w) in &matching.infinite {
            terms.push(infinite_term(x, j, target_inf[w]));
        }

        let total: f64 = terms.iter().map(|t| t.value.powf(q)).sum();
        let mut smooth = result.value > LOSS_TIE_TOLERANCE
            && births_distinct(x.infinite())
            && !result.approximate;
        let mut grad = vec![0.0; x.len()];
        for t in &terms {
            if t.grad.is_empty() {
                continue;
            }
            smooth &= t.smooth;
            // d/dc (Σ c^q)^{1/q} = S^{1/q - 1} c^{q-1}
            let factor = if q == 1.0 {
                1.0
            } else if t.value > 0.0 && total > 0.0 {
                total.powf(1.0 / q - 1.0) * t.value.powf(q - 1.0)
            } else {
                smooth = false;
                0.0
            };
            for &(slot, g) in &t.grad {
                grad[slot] += factor * g;
            }
        }
        if smooth {
            let finite_cost = total - matching
                .infinite
                .iter()
                .map(|&(j, w)| (x.infinite()[j] - target_inf[w]).abs().powf(q))
                .sum::<f64>();
            smooth = self.matching_unique(&points, &matching.finite, finite_cost);
        }
        Ok(LossEval::scalar_eval(result.value, grad, smooth))
    }
}
