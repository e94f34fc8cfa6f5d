//! Sublevel-set persistence by left-to-right column reduction over GF(2).
//!
//! Besides barcodes, the reduction yields a pairing of simplices. Read per
//! degree, that pairing is a barcode template: applying any filter function of
//! the same pre-order to it reproduces the diagram. Read across all degrees it
//! partitions the simplices, which gives the global permutation lift.

use serde::{Deserialize, Serialize};

use crate::barcode::{Barcode, OrderedBarcode};
use crate::complex::{FilterFunction, SimplicialComplex};
use crate::error::{Error, Result};

/// Sorts simplices by (tie group of the value, dimension, lexicographic vertices).
///
/// Tie groups come from the pre-order, so two ordering-equivalent filters get
/// the same order even when their tied values differ by rounding.
pub fn filtration_order(f: &FilterFunction) -> Vec<usize> {
    let sig = f.preorder();
    let rank = sig.rank();
    let mut order: Vec<usize> = (0..f.values().len()).collect();
    // canonical indices already sort by (dimension, lex)
    order.sort_by_key(|&i| (rank[i], i));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// Creates a class; `paired` is the simplex that kills it, if any.
    Positive { paired: Option<usize> },
    /// Kills the class created by `paired`.
    Negative { paired: usize },
}

/// The outcome of reducing the boundary matrix along a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionCertificate {
    pub order: Vec<usize>,
    pub roles: Vec<Role>,
}

impl ReductionCertificate {
    pub fn is_positive(&self, simplex: usize) -> bool {
        matches!(self.roles[simplex], Role::Positive { .. })
    }

    pub fn partner(&self, simplex: usize) -> Option<usize> {
        match self.roles[simplex] {
            Role::Positive { paired } => paired,
            Role::Negative { paired } => Some(paired),
        }
    }
}

pub fn reduce(k: &SimplicialComplex, order: &[usize]) -> Result<ReductionCertificate> {
    let n = k.len();
    let mut position = vec![usize::MAX; n];
    if order.len() != n {
        return Err(Error::ShapeError(format!(
            "order has {} entries for {n} simplices",
            order.len()
        )));
    }
    for (pos, &s) in order.iter().enumerate() {
        if s >= n || position[s] != usize::MAX {
            return Err(Error::ShapeError(format!("order is not a permutation at {s}")));
        }
        position[s] = pos;
    }
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(n);
    for (pos, &s) in order.iter().enumerate() {
        let mut col: Vec<usize> = k.faces(s).iter().map(|&f| position[f]).collect();
        if col.iter().any(|&r| r >= pos) {
            return Err(Error::OrderViolation(s));
        }
        col.sort_unstable();
        columns.push(col);
    }

    // pivot_owner[row] = column whose lowest one sits in `row`
    let mut pivot_owner: Vec<Option<usize>> = vec![None; n];
    for j in 0..n {
        while let Some(&low) = columns[j].last() {
            match pivot_owner[low] {
                Some(other) => {
                    let reduced = symmetric_difference(&columns[j], &columns[other]);
                    columns[j] = reduced;
                }
                None => {
                    pivot_owner[low] = Some(j);
                    break;
                }
            }
        }
    }

    let mut roles = vec![Role::Positive { paired: None }; n];
    for (j, col) in columns.iter().enumerate() {
        if let Some(&low) = col.last() {
            roles[order[j]] = Role::Negative { paired: order[low] };
            roles[order[low]] = Role::Positive {
                paired: Some(order[j]),
            };
        }
    }
    Ok(ReductionCertificate {
        order: order.to_vec(),
        roles,
    })
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Pairs `(σ, σ')` and unpaired simplices realizing the degree-p diagram.
///
/// Pairs are kept sorted by the index of the killing simplex `σ'`, unpaired
/// simplices by index; this is the canonical slot order of every lift.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BarcodeTemplate {
    pub degree: usize,
    pub pairs: Vec<(usize, usize)>,
    pub unpaired: Vec<usize>,
}

impl BarcodeTemplate {
    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    pub fn n(&self) -> usize {
        self.unpaired.len()
    }

    /// Simplex indices in slot order: `σ_1, σ'_1, .., σ_m, σ'_m, τ_1, .., τ_n`.
    pub fn slots(&self) -> Vec<usize> {
        self.pairs
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .chain(self.unpaired.iter().copied())
            .collect()
    }

    /// Reads `values` through the template.
    pub fn ordered(&self, values: &[f64]) -> OrderedBarcode {
        let data = self.slots().into_iter().map(|s| values[s]).collect();
        OrderedBarcode::new(self.m(), self.n(), data).expect("slot count matches")
    }

    pub fn realize(&self, values: &[f64]) -> Barcode {
        self.ordered(values).quotient()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TotalBarcodeTemplate {
    pub degrees: Vec<BarcodeTemplate>,
}

impl TotalBarcodeTemplate {
    pub fn from_certificate(k: &SimplicialComplex, cert: &ReductionCertificate) -> Self {
        let mut degrees: Vec<BarcodeTemplate> = (0..=k.dim())
            .map(|degree| BarcodeTemplate {
                degree,
                pairs: Vec::new(),
                unpaired: Vec::new(),
            })
            .collect();
        for s in 0..k.len() {
            match cert.roles[s] {
                Role::Negative { paired } => degrees[k.dim_of(paired)].pairs.push((paired, s)),
                Role::Positive { paired: None } => degrees[k.dim_of(s)].unpaired.push(s),
                Role::Positive { paired: Some(_) } => {}
            }
        }
        for t in &mut degrees {
            t.pairs.sort_by_key(|&(_, death)| death);
            t.unpaired.sort_unstable();
        }
        TotalBarcodeTemplate { degrees }
    }

    pub fn degree(&self, p: usize) -> &BarcodeTemplate {
        &self.degrees[p]
    }

    pub fn counts(&self) -> Vec<(usize, usize)> {
        self.degrees.iter().map(|t| (t.m(), t.n())).collect()
    }

    /// Concatenated slot order over all degrees: a permutation of the simplices.
    pub fn permutation(&self) -> Vec<usize> {
        self.degrees.iter().flat_map(BarcodeTemplate::slots).collect()
    }
}

pub fn certificate(f: &FilterFunction) -> ReductionCertificate {
    reduce(f.complex(), &filtration_order(f)).expect("filtration order is compatible with faces")
}

pub fn total_template(f: &FilterFunction) -> TotalBarcodeTemplate {
    TotalBarcodeTemplate::from_certificate(f.complex(), &certificate(f))
}

fn check_degree(f: &FilterFunction, p: usize) -> Result<()> {
    let max = f.complex().dim();
    if p > max {
        return Err(Error::BadDegree { degree: p, max });
    }
    Ok(())
}

pub fn barcode_template(f: &FilterFunction, p: usize) -> Result<BarcodeTemplate> {
    check_degree(f, p)?;
    Ok(total_template(f).degrees.swap_remove(p))
}

/// Degree-p persistence diagram of the sublevel-set filtration of `f`.
pub fn diagram(f: &FilterFunction, p: usize) -> Result<Barcode> {
    Ok(barcode_template(f, p)?.realize(f.values()))
}

/// Diagrams in every degree `0..=dim K`.
pub fn diagrams(f: &FilterFunction) -> Vec<Barcode> {
    total_template(f)
        .degrees
        .iter()
        .map(|t| t.realize(f.values()))
        .collect()
}

/// The global lift: `f` read through the total template, one ordered barcode
/// per degree.
pub fn perm_lift(f: &FilterFunction) -> Vec<OrderedBarcode> {
    total_template(f)
        .degrees
        .iter()
        .map(|t| t.ordered(f.values()))
        .collect()
}
