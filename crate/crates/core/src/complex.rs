//! Finite abstract simplicial complexes and filter functions on them.
//!
//! Simplices are indexed canonically by `(dimension, lexicographic vertices)`,
//! so every downstream object (orders, templates, lifts) is deterministic.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance under which two filter values count as tied.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Simplex(Vec<usize>);

impl Simplex {
    pub fn new(vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() || vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadSimplex(vertices));
        }
        Ok(Simplex(vertices))
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// Codimension-1 faces, in the order obtained by dropping vertex 0, 1, ...
    pub fn boundary(&self) -> impl Iterator<Item = Simplex> + '_ {
        let n = if self.0.len() > 1 { self.0.len() } else { 0 };
        (0..n).map(move |skip| {
            Simplex(
                self.0
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect(),
            )
        })
    }

    fn canonical_key(&self) -> (usize, &[usize]) {
        (self.dim(), &self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialComplex {
    simplices: Vec<Simplex>,
    faces: Vec<Vec<usize>>,
    cofaces: Vec<Vec<usize>>,
    index: HashMap<Simplex, usize>,
}

impl SimplicialComplex {
    /// Builds the face closure of `simplex_list`.
    ///
    /// Entries must be strictly increasing vertex sequences. Listing the same
    /// simplex twice is an error; faces that are missing are added.
    pub fn build(simplex_list: &[Vec<usize>]) -> Result<Self> {
        if simplex_list.is_empty() {
            return Err(Error::EmptyComplex);
        }
        let mut listed = BTreeSet::new();
        for s in simplex_list {
            let simplex = Simplex::new(s.clone())?;
            if !listed.insert(simplex.clone()) {
                return Err(Error::DuplicateSimplex(s.clone()));
            }
        }
        let mut closed: BTreeSet<Simplex> = BTreeSet::new();
        let mut stack: Vec<Simplex> = listed.into_iter().collect();
        while let Some(s) = stack.pop() {
            if closed.contains(&s) {
                continue;
            }
            stack.extend(s.boundary().filter(|f| !closed.contains(f)));
            closed.insert(s);
        }
        let mut simplices: Vec<Simplex> = closed.into_iter().collect();
        simplices.sort_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));

        let index: HashMap<Simplex, usize> = simplices
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let mut faces = Vec::with_capacity(simplices.len());
        let mut cofaces = vec![Vec::new(); simplices.len()];
        for (i, s) in simplices.iter().enumerate() {
            let mut fs: Vec<usize> = s.boundary().map(|f| index[&f]).collect();
            fs.sort_unstable();
            for &f in &fs {
                cofaces[f].push(i);
            }
            faces.push(fs);
        }
        Ok(SimplicialComplex {
            simplices,
            faces,
            cofaces,
            index,
        })
    }

    /// The complex of all non-empty subsets of `{0, .., n-1}` with at most
    /// `max_dim + 1` vertices.
    pub fn full(n: usize, max_dim: usize) -> Result<Self> {
        let mut list = Vec::new();
        for mask in 1u64..(1u64 << n) {
            if mask.count_ones() as usize <= max_dim + 1 {
                list.push((0..n).filter(|&v| mask & (1 << v) != 0).collect());
            }
        }
        Self::build(&list)
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn simplex(&self, i: usize) -> &Simplex {
        &self.simplices[i]
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    /// Indices of the codimension-1 faces of simplex `i`, ascending.
    pub fn faces(&self, i: usize) -> &[usize] {
        &self.faces[i]
    }

    pub fn cofaces(&self, i: usize) -> &[usize] {
        &self.cofaces[i]
    }

    pub fn index_of(&self, vertices: &[usize]) -> Option<usize> {
        self.index.get(&Simplex(vertices.to_vec())).copied()
    }

    pub fn dim(&self) -> usize {
        self.simplices.last().map_or(0, Simplex::dim)
    }

    pub fn dim_of(&self, i: usize) -> usize {
        self.simplices[i].dim()
    }

    /// Vertex identifiers in ascending order.
    pub fn vertex_ids(&self) -> Vec<usize> {
        self.simplices
            .iter()
            .take_while(|s| s.dim() == 0)
            .map(|s| s.0[0])
            .collect()
    }

    /// Number of 0-simplices. Vertex simplices occupy indices `0..num_vertices()`.
    pub fn num_vertices(&self) -> usize {
        self.simplices.iter().take_while(|s| s.dim() == 0).count()
    }

    /// Position of each vertex of simplex `i` in the vertex block.
    pub fn vertex_positions(&self, i: usize) -> Vec<usize> {
        self.simplices[i]
            .0
            .iter()
            .map(|&v| self.index[&Simplex(vec![v])])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterFunction {
    complex: Arc<SimplicialComplex>,
    values: Vec<f64>,
}

impl FilterFunction {
    /// Checks `f(face) <= f(coface)` over every face relation.
    pub fn new(complex: Arc<SimplicialComplex>, values: Vec<f64>) -> Result<Self> {
        if values.len() != complex.len() {
            return Err(Error::LengthMismatch {
                expected: complex.len(),
                got: values.len(),
            });
        }
        for i in 0..complex.len() {
            for &face in complex.faces(i) {
                // NaN fails this comparison as well
                if !(values[face] <= values[i]) {
                    return Err(Error::NotAFiltration {
                        face: complex.simplex(face).vertices().to_vec(),
                        coface: complex.simplex(i).vertices().to_vec(),
                    });
                }
            }
        }
        Ok(FilterFunction { complex, values })
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn preorder(&self) -> PreorderSignature {
        PreorderSignature::new(&self.values, DEFAULT_TIE_TOLERANCE)
    }

    pub fn ordering_equivalent(&self, other: &FilterFunction) -> bool {
        self.preorder() == other.preorder()
    }

    /// Half of the smallest gap between values of distinct simplices.
    pub fn gap_radius(&self) -> Result<f64> {
        gap_radius(&self.values)
    }

    pub fn sup_distance(&self, other: &FilterFunction) -> f64 {
        sup_distance(&self.values, &other.values)
    }
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn gap_radius(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Undefined);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    Ok(0.5 * min_gap)
}

/// The total pre-order `sign(f(a) - f(b))` induced by a vector of values.
///
/// Stored as the permutation sorting the values (ties ordered by index) and
/// the boundaries of the tie groups, which determines the full sign matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PreorderSignature {
    order: Vec<usize>,
    group_starts: Vec<usize>,
    rank: Vec<usize>,
}

impl PreorderSignature {
    /// Consecutive sorted values within `tolerance` of each other are tied.
    pub fn new(values: &[f64], tolerance: f64) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let mut group_starts = Vec::new();
        let mut rank = vec![0; values.len()];
        let mut i = 0;
        while i < order.len() {
            let start = i;
            group_starts.push(start);
            while i + 1 < order.len() && values[order[i + 1]] - values[order[i]] <= tolerance {
                i += 1;
            }
            let mut group: Vec<usize> = order[start..=i].to_vec();
            group.sort_unstable();
            order[start..=i].copy_from_slice(&group);
            for &s in &group {
                rank[s] = group_starts.len() - 1;
            }
            i += 1;
        }
        PreorderSignature {
            order,
            group_starts,
            rank,
        }
    }

    /// `sign(f(a) - f(b))` as recorded by the signature.
    pub fn sign(&self, a: usize, b: usize) -> i8 {
        match self.rank[a].cmp(&self.rank[b]) {
            std::cmp::Ordering::Less => -1,
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Greater => 1,
        }
    }

    /// Tie-group index of each simplex; groups are numbered by increasing value.
    pub fn rank(&self) -> &[usize] {
        &self.rank
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn num_groups(&self) -> usize {
        self.group_starts.len()
    }

    /// Pairs `(a, b)` with `a < b` that fall in the same tie group.
    pub fn tied_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let bounds: Vec<usize> = self
            .group_starts
            .iter()
            .copied()
            .chain(std::iter::once(self.order.len()))
            .collect();
        for w in bounds.windows(2) {
            let group = &self.order[w[0]..w[1]];
            for (i, &a) in group.iter().enumerate() {
                for &b in &group[i + 1..] {
                    out.push((a.min(b), a.max(b)));
                }
            }
        }
        out
    }
}

/// On-disk complex description.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ComplexFile {
    pub simplices: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Coordinates per vertex, in ascending vertex order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<Vec<f64>>>,
}

impl ComplexFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn complex(&self) -> Result<Arc<SimplicialComplex>> {
        SimplicialComplex::build(&self.simplices).map(Arc::new)
    }

    /// Values are given in canonical simplex order of the closed complex.
    pub fn filter(&self) -> Result<FilterFunction> {
        let complex = self.complex()?;
        let values = self
            .values
            .clone()
            .ok_or_else(|| Error::Invalid("complex file has no \"values\"".into()))?;
        FilterFunction::new(complex, values)
    }
}
