//! Parametrized families of filter functions `θ ↦ F(θ) ∈ ℝ^K` with Jacobians.
//!
//! Every family here is a pointwise maximum of smooth pieces (or, for the raw
//! filter, an indicator), so each one knows the piece that attains the maximum
//! at every simplex. Jacobian rows are the gradients of those pieces, and
//! [`Parametrization::is_smooth_at`] reports whether the selection is locally
//! constant up to [`GENERAL_POSITION_TOLERANCE`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::complex::{FilterFunction, SimplicialComplex};
use crate::error::{Error, Result};

/// Value gaps at or below this flag a parameter as non-generic.
pub const GENERAL_POSITION_TOLERANCE: f64 = 1e-9;

pub trait Parametrization: Send + Sync {
    fn name(&self) -> &'static str;

    fn complex(&self) -> &Arc<SimplicialComplex>;

    fn param_dim(&self) -> usize;

    /// Raw values per simplex, in canonical simplex order.
    fn values(&self, theta: &[f64]) -> Result<Vec<f64>>;

    /// `#K × param_dim` matrix of `∂F(θ)(σ)/∂θ`.
    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>>;

    fn is_smooth_at(&self, theta: &[f64]) -> bool;

    fn value(&self, theta: &[f64]) -> Result<FilterFunction> {
        FilterFunction::new(self.complex().clone(), self.values(theta)?)
    }

    /// One-sided derivative of every simplex value along `u`.
    fn directional(&self, theta: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let j = self.jacobian(theta)?;
        Ok((j * DVector::from_column_slice(u)).iter().copied().collect())
    }

    /// The point reached from `theta` by moving `h` along `dir`, staying in the domain.
    fn perturb(&self, theta: &[f64], dir: &[f64], h: f64) -> Vec<f64> {
        theta.iter().zip(dir).map(|(t, d)| t + h * d).collect()
    }

    /// Directions spanning the tangent space at `theta`.
    fn tangent_directions(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let p = theta.len();
        (0..p)
            .map(|i| {
                let mut e = vec![0.0; p];
                e[i] = 1.0;
                e
            })
            .collect()
    }

    /// Maps an iterate back into the domain after a gradient step.
    fn retract(&self, _theta: &mut [f64]) {}

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::ShapeError(format!(
                "{} expects {} parameters, got {}",
                self.name(),
                self.param_dim(),
                theta.len()
            )));
        }
        Ok(())
    }
}

/// Smooth real functions on the vertices, extended to simplices by [`LowerStar`].
pub trait VertexFunction: Send + Sync {
    fn num_vertices(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn values(&self, theta: &[f64]) -> Result<Vec<f64>>;
    /// `num_vertices × param_dim`.
    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>>;
}

/// The vertex values are the parameters themselves.
#[derive(Debug, Clone)]
pub struct VertexValues {
    pub num_vertices: usize,
}

impl VertexFunction for VertexValues {
    fn num_vertices(&self) -> usize {
        self.num_vertices
    }
    fn param_dim(&self) -> usize {
        self.num_vertices
    }
    fn values(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(theta.to_vec())
    }
    fn jacobian(&self, _theta: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.num_vertices, self.num_vertices))
    }
}

/// `v ↦ |x_v - θ|²` for fixed vertex coordinates `x_v` and a moving point `θ`.
#[derive(Debug, Clone)]
pub struct SquaredDistance {
    pub coordinates: Vec<Vec<f64>>,
}

impl VertexFunction for SquaredDistance {
    fn num_vertices(&self) -> usize {
        self.coordinates.len()
    }
    fn param_dim(&self) -> usize {
        self.coordinates.first().map_or(0, Vec::len)
    }
    fn values(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .coordinates
            .iter()
            .map(|x| x.iter().zip(theta).map(|(a, t)| (a - t) * (a - t)).sum())
            .collect())
    }
    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.param_dim();
        Ok(DMatrix::from_fn(self.coordinates.len(), d, |v, k| {
            -2.0 * (self.coordinates[v][k] - theta[k])
        }))
    }
}

/// `v ↦ ⟨θ, x_v⟩`.
#[derive(Debug, Clone)]
pub struct LinearHeight {
    pub coordinates: Vec<Vec<f64>>,
}

impl VertexFunction for LinearHeight {
    fn num_vertices(&self) -> usize {
        self.coordinates.len()
    }
    fn param_dim(&self) -> usize {
        self.coordinates.first().map_or(0, Vec::len)
    }
    fn values(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.coordinates.iter().map(|x| dot(x, theta)).collect())
    }
    fn jacobian(&self, _theta: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.param_dim();
        Ok(DMatrix::from_fn(self.coordinates.len(), d, |v, k| {
            self.coordinates[v][k]
        }))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Index of the first maximal entry among `candidates`, scored by `score`.
fn argmax_by<I: IntoIterator<Item = usize>>(candidates: I, score: impl Fn(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for c in candidates {
        let s = score(c);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best.map(|(c, _)| c)
}

/// Pairs of simplices whose values agree within [`GENERAL_POSITION_TOLERANCE`]
/// but whose Jacobian rows differ, so the tie breaks under some perturbation.
pub fn nonstructural_ties(values: &[f64], jac: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ties = Vec::new();
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            if values[b] - values[a] > GENERAL_POSITION_TOLERANCE {
                break;
            }
            let same = (0..jac.ncols())
                .all(|k| (jac[(a, k)] - jac[(b, k)]).abs() <= GENERAL_POSITION_TOLERANCE);
            if !same {
                ties.push((a.min(b), a.max(b)));
            }
        }
    }
    ties
}

fn ties_are_structural(values: &[f64], jac: &DMatrix<f64>) -> bool {
    nonstructural_ties(values, jac).is_empty()
}

/// Lower-star extension `F(θ)(σ) = max_{v ∈ σ} F₀(θ)(v)`.
pub struct LowerStar<V> {
    complex: Arc<SimplicialComplex>,
    vertex_fn: V,
    /// Vertex positions of every simplex.
    members: Vec<Vec<usize>>,
}

impl<V: VertexFunction> LowerStar<V> {
    pub fn new(complex: Arc<SimplicialComplex>, vertex_fn: V) -> Result<Self> {
        if vertex_fn.num_vertices() != complex.num_vertices() {
            return Err(Error::ShapeError(format!(
                "vertex function has {} vertices, complex has {}",
                vertex_fn.num_vertices(),
                complex.num_vertices()
            )));
        }
        let members = (0..complex.len()).map(|i| complex.vertex_positions(i)).collect();
        Ok(LowerStar {
            complex,
            vertex_fn,
            members,
        })
    }

    pub fn vertex_fn(&self) -> &V {
        &self.vertex_fn
    }

    fn argmax_vertices(&self, vertex_values: &[f64]) -> Vec<usize> {
        self.members
            .iter()
            .map(|m| argmax_by(m.iter().copied(), |v| vertex_values[v]).expect("non-empty simplex"))
            .collect()
    }

    fn vertex_smooth(&self, theta: &[f64]) -> bool {
        match (self.vertex_fn.values(theta), self.vertex_fn.jacobian(theta)) {
            (Ok(v), Ok(j)) => ties_are_structural(&v, &j),
            _ => false,
        }
    }
}

impl<V: VertexFunction> Parametrization for LowerStar<V> {
    fn name(&self) -> &'static str {
        "lower_star"
    }

    fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    fn param_dim(&self) -> usize {
        self.vertex_fn.param_dim()
    }

    fn values(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        let vv = self.vertex_fn.values(theta)?;
        Ok(self.argmax_vertices(&vv).into_iter().map(|v| vv[v]).collect())
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(theta)?;
        let vv = self.vertex_fn.values(theta)?;
        let vj = self.vertex_fn.jacobian(theta)?;
        let arg = self.argmax_vertices(&vv);
        Ok(DMatrix::from_fn(self.complex.len(), vj.ncols(), |s, k| vj[(arg[s], k)]))
    }

    fn is_smooth_at(&self, theta: &[f64]) -> bool {
        self.check_dim(theta).is_ok() && self.vertex_smooth(theta)
    }

    fn directional(&self, theta: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        let vv = self.vertex_fn.values(theta)?;
        let vd = self.vertex_fn.jacobian(theta)? * DVector::from_column_slice(u);
        Ok(self
            .members
            .iter()
            .map(|m| {
                let top = m.iter().map(|&v| vv[v]).fold(f64::NEG_INFINITY, f64::max);
                m.iter()
                    .filter(|&&v| vv[v] >= top - GENERAL_POSITION_TOLERANCE)
                    .map(|&v| vd[v])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect())
    }
}

/// Height filtration in direction `θ` on the unit sphere: the lower-star of
/// `v ↦ ⟨θ, x_v⟩`, with Jacobians projected onto the tangent space.
pub struct Height {
    inner: LowerStar<LinearHeight>,
}

impl Height {
    pub fn new(complex: Arc<SimplicialComplex>, coordinates: Vec<Vec<f64>>) -> Result<Self> {
        let d = coordinates.first().map_or(0, Vec::len);
        if d == 0 || coordinates.iter().any(|c| c.len() != d) {
            return Err(Error::ShapeError("vertex coordinates must share a positive dimension".into()));
        }
        Ok(Height {
            inner: LowerStar::new(complex, LinearHeight { coordinates })?,
        })
    }

    fn check_sphere(&self, theta: &[f64]) -> Result<()> {
        self.check_dim(theta)?;
        let n = norm(theta);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NotOnSphere(n));
        }
        Ok(())
    }

    fn project(theta: &[f64], v: &[f64]) -> Vec<f64> {
        let c = dot(v, theta);
        v.iter().zip(theta).map(|(x, t)| x - c * t).collect()
    }
}

impl Parametrization for Height {
    fn name(&self) -> &'static str {
        "height"
    }

    fn complex(&self) -> &Arc<SimplicialComplex> {
        self.inner.complex()
    }

    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn values(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_sphere(theta)?;
        self.inner.values(theta)
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_sphere(theta)?;
        let ambient = self.inner.jacobian(theta)?;
        let mut out = ambient.clone();
        for r in 0..ambient.nrows() {
            let row: Vec<f64> = ambient.row(r).iter().copied().collect();
            for (k, x) in Self::project(theta, &row).into_iter().enumerate() {
                out[(r, k)] = x;
            }
        }
        Ok(out)
    }

    fn is_smooth_at(&self, theta: &[f64]) -> bool {
        if self.check_sphere(theta).is_err() {
            return false;
        }
        let coords = &self.inner.vertex_fn().coordinates;
        let values: Vec<f64> = coords.iter().map(|x| dot(x, theta)).collect();
        let rows = DMatrix::from_fn(coords.len(), theta.len(), |v, k| {
            Self::project(theta, &coords[v])[k]
        });
        ties_are_structural(&values, &rows)
    }

    fn directional(&self, theta: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_sphere(theta)?;
        self.inner.directional(theta, &Self::project(theta, u))
    }

    fn perturb(&self, theta: &[f64], dir: &[f64], h: f64) -> Vec<f64> {
        let mut out: Vec<f64> = theta.iter().zip(dir).map(|(t, d)| t + h * d).collect();
        self.retract(&mut out);
        out
    }

    fn tangent_directions(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        (0..theta.len())
            .map(|i| {
                let mut e = vec![0.0; theta.len()];
                e[i] = 1.0;
                Self::project(theta, &e)
            })
            .collect()
    }

    fn retract(&self, theta: &mut [f64]) {
        let n = norm(theta);
        if n > 0.0 {
            theta.iter_mut().for_each(|t| *t /= n);
        }
    }
}

/// A finite point cloud in ℝ^d, flattened point by point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.is_empty() || dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::ShapeError("point cloud needs n ≥ 1 points of equal dimension d ≥ 1".into()));
        }
        Ok(PointCloud {
            dim,
            coords: points.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.coords.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }
}

/// Pairs `(i, j)`, `i < j`, of vertex positions inside each simplex.
fn simplex_edges(complex: &SimplicialComplex) -> Vec<Vec<(usize, usize)>> {
    (0..complex.len())
        .map(|s| {
            let vs = complex.vertex_positions(s);
            let mut out = Vec::new();
            for (a, &i) in vs.iter().enumerate() {
                for &j in &vs[a + 1..] {
                    out.push((i, j));
                }
            }
            out
        })
        .collect()
}

/// Index of the unordered pair `(i, j)` in a flat list of the `n(n-1)/2` pairs.
fn pair_slot(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Shared machinery for filtrations `F(θ)(σ) = max_{i,j ∈ σ} r_ij(θ)` on a
/// complex over `n` points; vertices appear at time 0.
struct PairwiseMax {
    complex: Arc<SimplicialComplex>,
    n: usize,
    edges: Vec<Vec<(usize, usize)>>,
}

impl PairwiseMax {
    fn new(n: usize, max_dim: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid("need at least two points".into()));
        }
        if n > 20 {
            return Err(Error::Invalid(format!("{n} points is beyond the supported total complex size")));
        }
        let complex = Arc::new(SimplicialComplex::full(n, max_dim)?);
        let edges = simplex_edges(&complex);
        Ok(PairwiseMax { complex, n, edges })
    }

    fn argmax(&self, r: &[f64]) -> Vec<Option<(usize, usize)>> {
        self.edges
            .iter()
            .map(|es| {
                argmax_by(0..es.len(), |e| r[pair_slot(self.n, es[e].0, es[e].1)]).map(|e| es[e])
            })
            .collect()
    }

    fn values(&self, r: &[f64]) -> Vec<f64> {
        self.argmax(r)
            .into_iter()
            .map(|e| e.map_or(0.0, |(i, j)| r[pair_slot(self.n, i, j)]))
            .collect()
    }

    /// `grad[pair]` is the gradient of `r_ij` in parameter space.
    fn jacobian(&self, r: &[f64], grads: &[Vec<f64>], p: usize) -> DMatrix<f64> {
        let arg = self.argmax(r);
        let mut out = DMatrix::zeros(self.complex.len(), p);
        for (s, e) in arg.into_iter().enumerate() {
            if let Some((i, j)) = e {
                for (k, g) in grads[pair_slot(self.n, i, j)].iter().enumerate() {
                    out[(s, k)] = *g;
                }
            }
        }
        out
    }

    fn directional(&self, r: &[f64], slopes: &[f64]) -> Vec<f64> {
        self.edges
            .iter()
            .map(|es| {
                if es.is_empty() {
                    return 0.0;
                }
                let top = es
                    .iter()
                    .map(|&(i, j)| r[pair_slot(self.n, i, j)])
                    .fold(f64::NEG_INFINITY, f64::max);
                es.iter()
                    .map(|&(i, j)| pair_slot(self.n, i, j))
                    .filter(|&e| r[e] >= top - GENERAL_POSITION_TOLERANCE)
                    .map(|e| slopes[e])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    fn distinct(r: &[f64]) -> bool {
        let mut sorted = r.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).all(|w| w[1] - w[0] > GENERAL_POSITION_TOLERANCE)
    }
}

/// Rips filtration of a moving point cloud: `F(P)(σ) = max_{i,j ∈ σ} |p_i - p_j|`.
pub struct Rips {
    base: PairwiseMax,
    dim: usize,
}

impl Rips {
    /// `n` points in ℝ^`dim`, simplices up to dimension `max_dim`.
    pub fn new(n: usize, dim: usize, max_dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("point dimension must be positive".into()));
        }
        Ok(Rips {
            base: PairwiseMax::new(n, max_dim)?,
            dim,
        })
    }

    pub fn num_points(&self) -> usize {
        self.base.n
    }

    pub fn point_dim(&self) -> usize {
        self.dim
    }

    fn distances(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.base.n;
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(norm(&self.diff(theta, i, j)));
            }
        }
        out
    }

    fn diff(&self, theta: &[f64], i: usize, j: usize) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|k| theta[i * d + k] - theta[j * d + k]).collect()
    }

    fn gradients(&self, theta: &[f64], r: &[f64]) -> Vec<Vec<f64>> {
        let (n, d) = (self.base.n, self.dim);
        let mut grads = Vec::with_capacity(r.len());
        for i in 0..n {
            for j in i + 1..n {
                let len = r[pair_slot(n, i, j)];
                let mut g = vec![0.0; n * d];
                if len > 0.0 {
                    for (k, x) in self.diff(theta, i, j).into_iter().enumerate() {
                        g[i * d + k] = x / len;
                        g[j * d + k] = -x / len;
                    }
                }
                grads.push(g);
            }
        }
        grads
    }
}

impl Parametrization for Rips {
    fn name(&self) -> &'static str {
        "rips"
    }

    fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.base.complex
    }

    fn param_dim(&self) -> usize {
        self.base.n * self.dim
    }

    fn values(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        Ok(self.base.values(&self.distances(theta)))
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(theta)?;
        let r = self.distances(theta);
        let grads = self.gradients(theta, &r);
        Ok(self.base.jacobian(&r, &grads, self.param_dim()))
    }

    fn is_smooth_at(&self, theta: &[f64]) -> bool {
        if self.check_dim(theta).is_err() {
            return false;
        }
        let r = self.distances(theta);
        r.iter().all(|&x| x > GENERAL_POSITION_TOLERANCE) && PairwiseMax::distinct(&r)
    }

    fn directional(&self, theta: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        let r = self.distances(theta);
        let n = self.base.n;
        let mut slopes = Vec::with_capacity(r.len());
        for i in 0..n {
            for j in i + 1..n {
                let dp = self.diff(theta, i, j);
                let du = self.diff(u, i, j);
                let len = r[pair_slot(n, i, j)];
                // at coincident points the one-sided slope of |p_i - p_j| is |u_i - u_j|
                slopes.push(if len > GENERAL_POSITION_TOLERANCE {
                    dot(&dp, &du) / len
                } else {
                    norm(&du)
                });
            }
        }
        Ok(self.base.directional(&r, &slopes))
    }
}

/// Symmetric positive-definite matrices `A_1..A_n`, charted by their upper
/// triangles (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceVector {
    pub matrices: Vec<DMatrix<f64>>,
}

impl CovarianceVector {
    pub fn chart_len(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    pub fn identity(n: usize, dim: usize) -> Self {
        CovarianceVector {
            matrices: vec![DMatrix::identity(dim, dim); n],
        }
    }

    pub fn from_chart(chart: &[f64], n: usize, dim: usize) -> Result<Self> {
        let t = Self::chart_len(dim);
        if chart.len() != n * t {
            return Err(Error::ShapeError(format!(
                "covariance chart needs {} entries, got {}",
                n * t,
                chart.len()
            )));
        }
        let matrices = chart
            .chunks(t)
            .map(|c| {
                let mut m = DMatrix::zeros(dim, dim);
                let mut idx = 0;
                for a in 0..dim {
                    for b in a..dim {
                        m[(a, b)] = c[idx];
                        m[(b, a)] = c[idx];
                        idx += 1;
                    }
                }
                m
            })
            .collect();
        Ok(CovarianceVector { matrices })
    }

    pub fn chart(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for m in &self.matrices {
            for a in 0..m.nrows() {
                for b in a..m.ncols() {
                    out.push(m[(a, b)]);
                }
            }
        }
        out
    }

    /// Fails with the index of the first matrix that is not symmetric positive definite.
    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.matrices.iter().enumerate() {
            let symmetric = (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0);
            if !symmetric || m.clone().cholesky().is_none() {
                return Err(Error::NotPositiveDefinite(i));
            }
        }
        Ok(())
    }
}

/// Ellipsoid-Rips filtration of a fixed point cloud as a function of the
/// covariance matrices attached to the points.
///
/// `r_ij(A) = |p_i - p_j| / (½ (√q_i(u) + √q_j(u)))` with `u` the unit vector
/// from `p_j` to `p_i` and `q_i(x) = ⟨A_i x, x⟩`.
pub struct EllipsoidRips {
    base: PairwiseMax,
    cloud: PointCloud,
    /// Unit directions and lengths per pair.
    units: Vec<(Vec<f64>, f64)>,
}

impl EllipsoidRips {
    pub fn new(cloud: PointCloud, max_dim: usize) -> Result<Self> {
        let n = cloud.len();
        let base = PairwiseMax::new(n, max_dim)?;
        let mut units = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let diff: Vec<f64> = cloud.point(i).iter().zip(cloud.point(j)).map(|(a, b)| a - b).collect();
                let len = norm(&diff);
                if len <= GENERAL_POSITION_TOLERANCE {
                    return Err(Error::Invalid(format!("points {i} and {j} coincide")));
                }
                units.push((diff.iter().map(|x| x / len).collect(), len));
            }
        }
        Ok(EllipsoidRips { base, cloud, units })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    fn covariances(&self, theta: &[f64]) -> Result<CovarianceVector> {
        self.check_dim(theta)?;
        let cov = CovarianceVector::from_chart(theta, self.base.n, self.cloud.dim)?;
        cov.validate()?;
        Ok(cov)
    }

    fn quadric(m: &DMatrix<f64>, u: &[f64]) -> f64 {
        let v = DVector::from_column_slice(u);
        v.dot(&(m * &v))
    }

    fn radii(&self, cov: &CovarianceVector) -> Vec<f64> {
        let n = self.base.n;
        let mut out = Vec::with_capacity(self.units.len());
        for i in 0..n {
            for j in i + 1..n {
                let (u, len) = &self.units[pair_slot(n, i, j)];
                let si = Self::quadric(&cov.matrices[i], u).sqrt();
                let sj = Self::quadric(&cov.matrices[j], u).sqrt();
                out.push(len / (0.5 * (si + sj)));
            }
        }
        out
    }

    fn gradients(&self, cov: &CovarianceVector) -> Vec<Vec<f64>> {
        let (n, d) = (self.base.n, self.cloud.dim);
        let t = CovarianceVector::chart_len(d);
        let mut grads = Vec::with_capacity(self.units.len());
        for i in 0..n {
            for j in i + 1..n {
                let (u, len) = &self.units[pair_slot(n, i, j)];
                let si = Self::quadric(&cov.matrices[i], u).sqrt();
                let sj = Self::quadric(&cov.matrices[j], u).sqrt();
                let half_sum = 0.5 * (si + sj);
                // dr/dq = -len / half_sum² · ½ · 1/(2√q)
                let outer = -len / (half_sum * half_sum) * 0.5;
                let mut g = vec![0.0; n * t];
                for (point, s) in [(i, si), (j, sj)] {
                    let scale = outer / (2.0 * s);
                    let mut idx = 0;
                    for a in 0..d {
                        for b in a..d {
                            let dq = if a == b { u[a] * u[a] } else { 2.0 * u[a] * u[b] };
                            g[point * t + idx] = scale * dq;
                            idx += 1;
                        }
                    }
                }
                grads.push(g);
            }
        }
        grads
    }
}

impl Parametrization for EllipsoidRips {
    fn name(&self) -> &'static str {
        "ellipsoid_rips"
    }

    fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.base.complex
    }

    fn param_dim(&self) -> usize {
        self.base.n * CovarianceVector::chart_len(self.cloud.dim)
    }

    fn values(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let cov = self.covariances(theta)?;
        Ok(self.base.values(&self.radii(&cov)))
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let cov = self.covariances(theta)?;
        let r = self.radii(&cov);
        Ok(self.base.jacobian(&r, &self.gradients(&cov), self.param_dim()))
    }

    fn is_smooth_at(&self, theta: &[f64]) -> bool {
        match self.covariances(theta) {
            Ok(cov) => PairwiseMax::distinct(&self.radii(&cov)),
            Err(_) => false,
        }
    }

    fn directional(&self, theta: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let cov = self.covariances(theta)?;
        let r = self.radii(&cov);
        let slopes: Vec<f64> = self.gradients(&cov).iter().map(|g| dot(g, u)).collect();
        Ok(self.base.directional(&r, &slopes))
    }
}

/// The indicator parametrization of the filtration polytope: `f ↦ f` when `f`
/// is a filter function and `f ↦ 0` otherwise.
pub struct RawFilter {
    complex: Arc<SimplicialComplex>,
}

impl RawFilter {
    pub fn new(complex: Arc<SimplicialComplex>) -> Self {
        RawFilter { complex }
    }

    fn monotone(&self, theta: &[f64], margin: f64) -> bool {
        (0..self.complex.len()).all(|s| {
            self.complex
                .faces(s)
                .iter()
                .all(|&f| if margin == 0.0 { theta[f] <= theta[s] } else { theta[f] + margin < theta[s] })
        })
    }

    /// Closest filter function in the sup norm: the midpoint of the largest
    /// monotone minorant-from-below envelope and the smallest one from above.
    pub fn isotonic_repair(&self, theta: &[f64]) -> Vec<f64> {
        let k = &self.complex;
        // simplices are indexed by dimension, so index order is a linear extension of the face order
        let mut upper = theta.to_vec();
        for s in 0..k.len() {
            for &f in k.faces(s) {
                upper[s] = upper[s].max(upper[f]);
            }
        }
        let mut lower = theta.to_vec();
        for s in (0..k.len()).rev() {
            for &c in k.cofaces(s) {
                lower[s] = lower[s].min(lower[c]);
            }
        }
        upper.iter().zip(&lower).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

impl Parametrization for RawFilter {
    fn name(&self) -> &'static str {
        "raw_filter"
    }

    fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    fn param_dim(&self) -> usize {
        self.complex.len()
    }

    fn values(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        Ok(if self.monotone(theta, 0.0) {
            theta.to_vec()
        } else {
            vec![0.0; theta.len()]
        })
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(theta)?;
        let p = theta.len();
        Ok(if self.monotone(theta, 0.0) {
            DMatrix::identity(p, p)
        } else {
            DMatrix::zeros(p, p)
        })
    }

    fn is_smooth_at(&self, theta: &[f64]) -> bool {
        self.check_dim(theta).is_ok() && self.monotone(theta, GENERAL_POSITION_TOLERANCE)
    }

    fn directional(&self, theta: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        let probe = self.perturb(theta, u, 1e-7);
        Ok(if self.monotone(theta, 0.0) && self.monotone(&probe, 0.0) {
            u.to_vec()
        } else {
            vec![0.0; u.len()]
        })
    }

    fn retract(&self, theta: &mut [f64]) {
        if !self.monotone(theta, 0.0) {
            let repaired = self.isotonic_repair(theta);
            theta.copy_from_slice(&repaired);
        }
    }
}
