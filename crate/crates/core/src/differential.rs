//! Local lifts of `θ ↦ Dgm_p(F(θ))` and their differentials.
//!
//! A [`Lift`] freezes the degree-`p` barcode template of `F(θ₀)` and reads any
//! later `F(θ)` through it. Near a generic `θ₀` this is a smooth map into
//! ordered barcodes whose quotient is the diagram, so losses on barcodes can be
//! differentiated by the chain rule.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::barcode::{bottleneck, OrderedBarcode};
use crate::complex::{PreorderSignature, DEFAULT_TIE_TOLERANCE};
use crate::error::{Error, Result};
use crate::losses::BarcodeLoss;
use crate::param::{nonstructural_ties, Parametrization};
use crate::persistence::{barcode_template, diagram, BarcodeTemplate};

/// First probe step for one-sided derivatives.
pub const PROBE_EPSILON: f64 = 1e-6;
/// Maximum number of probe halvings before a direction is declared unstable.
pub const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lift {
    template: BarcodeTemplate,
    theta0: Vec<f64>,
}

impl Lift {
    pub fn new(template: BarcodeTemplate, theta0: Vec<f64>) -> Self {
        Lift { template, theta0 }
    }

    pub fn m(&self) -> usize {
        self.template.m()
    }

    pub fn n(&self) -> usize {
        self.template.n()
    }

    pub fn degree(&self) -> usize {
        self.template.degree
    }

    pub fn template(&self) -> &BarcodeTemplate {
        &self.template
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    /// Simplex index behind each slot.
    pub fn ordering(&self) -> Vec<usize> {
        self.template.slots()
    }

    pub fn evaluate(&self, f: &dyn Parametrization, theta: &[f64]) -> Result<OrderedBarcode> {
        Ok(self.template.ordered(&f.values(theta)?))
    }

    /// The same lift with its pairs and unpaired simplices listed in another order.
    pub fn reordered(&self, pair_order: &[usize], unpaired_order: &[usize]) -> Result<Lift> {
        let is_perm = |p: &[usize], n: usize| {
            let mut s = p.to_vec();
            s.sort_unstable();
            s == (0..n).collect::<Vec<_>>()
        };
        if !is_perm(pair_order, self.m()) || !is_perm(unpaired_order, self.n()) {
            return Err(Error::ShapeError("reordering is not a permutation".into()));
        }
        let template = BarcodeTemplate {
            degree: self.template.degree,
            pairs: pair_order.iter().map(|&i| self.template.pairs[i]).collect(),
            unpaired: unpaired_order.iter().map(|&j| self.template.unpaired[j]).collect(),
        };
        Ok(Lift::new(template, self.theta0.clone()))
    }
}

/// Pairs of simplices whose tie at `θ` can break to first order.
pub fn tie_witnesses(f: &dyn Parametrization, theta: &[f64]) -> Result<Vec<(usize, usize)>> {
    Ok(nonstructural_ties(&f.values(theta)?, &f.jacobian(theta)?))
}

/// Builds the lift at a parameter where the pre-order of `F` is locally constant.
pub fn build_lift(f: &dyn Parametrization, theta: &[f64], p: usize) -> Result<Lift> {
    f.check_dim(theta)?;
    let ties = tie_witnesses(f, theta)?;
    if !ties.is_empty() || !f.is_smooth_at(theta) {
        return Err(Error::SingularParameter { ties });
    }
    let template = barcode_template(&f.value(theta)?, p)?;
    Ok(Lift::new(template, theta.to_vec()))
}

/// `(2m + n) × param_dim`: Jacobian rows of `F` read through the lift.
#[derive(Debug, Clone, PartialEq)]
pub struct BarcodeDifferential {
    pub matrix: DMatrix<f64>,
}

pub fn differential(lift: &Lift, f: &dyn Parametrization, theta: &[f64]) -> Result<BarcodeDifferential> {
    let jac = f.jacobian(theta)?;
    Ok(select_rows(&jac, &lift.ordering()))
}

fn select_rows(jac: &DMatrix<f64>, rows: &[usize]) -> BarcodeDifferential {
    BarcodeDifferential {
        matrix: DMatrix::from_fn(rows.len(), jac.ncols(), |r, c| jac[(rows[r], c)]),
    }
}

/// `bdiffᵀ · loss_grad`.
pub fn chain_rule(bdiff: &BarcodeDifferential, loss_grad: &[f64]) -> Result<Vec<f64>> {
    let g = DMatrix::from_row_slice(1, loss_grad.len(), loss_grad);
    Ok(chain_rule_matrix(bdiff, &g)?.row(0).iter().copied().collect())
}

/// `loss_jac · bdiff` for a vector-valued loss with `k × (2m + n)` Jacobian.
pub fn chain_rule_matrix(bdiff: &BarcodeDifferential, loss_jac: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if loss_jac.ncols() != bdiff.matrix.nrows() {
        return Err(Error::ShapeError(format!(
            "loss gradient has {} entries, barcode differential has {} rows",
            loss_jac.ncols(),
            bdiff.matrix.nrows()
        )));
    }
    Ok(loss_jac * &bdiff.matrix)
}

/// One-sided derivative of the barcode along `u`, with the lift valid on the `u` side.
pub fn directional_derivative(
    f: &dyn Parametrization,
    theta: &[f64],
    u: &[f64],
    p: usize,
) -> Result<(Vec<f64>, Lift)> {
    f.check_dim(theta)?;
    f.check_dim(u)?;
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("direction has norm {norm}, expected 1")));
    }
    let probe = |eps: f64| -> Result<(PreorderSignature, Vec<f64>)> {
        let point = f.perturb(theta, u, eps);
        Ok((PreorderSignature::new(&f.values(&point)?, DEFAULT_TIE_TOLERANCE), point))
    };
    let mut eps = PROBE_EPSILON;
    let (mut sig, mut point) = probe(eps)?;
    for _ in 0..MAX_HALVINGS {
        let (half_sig, half_point) = probe(eps / 2.0)?;
        if half_sig == sig {
            let template = barcode_template(&f.value(&point)?, p)?;
            let slopes = f.directional(theta, u)?;
            let derivative = template.slots().iter().map(|&s| slopes[s]).collect();
            return Ok((derivative, Lift::new(template, theta.to_vec())));
        }
        eps /= 2.0;
        sig = half_sig;
        point = half_point;
    }
    Err(Error::UnstableDirection)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorReport {
    pub radii: Vec<f64>,
    pub remainders: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Each ratio is below the previous one, or zero.
    pub decreasing: bool,
}

/// First-order Taylor remainder `db(B_p(θ + h), Q(lift(θ) + bdiff·h)) / ‖h‖`
/// for steps of the given radii along the unit direction `u`.
pub fn taylor_remainder_check(
    f: &dyn Parametrization,
    theta: &[f64],
    p: usize,
    radii: &[f64],
    u: &[f64],
) -> Result<TaylorReport> {
    let lift = build_lift(f, theta, p)?;
    let bdiff = differential(&lift, f, theta)?;
    let base = lift.evaluate(f, theta)?;
    let mut remainders = Vec::with_capacity(radii.len());
    let mut ratios = Vec::with_capacity(radii.len());
    for &r in radii {
        let moved = f.perturb(theta, u, r);
        let h: Vec<f64> = moved.iter().zip(theta).map(|(a, b)| a - b).collect();
        let step = &bdiff.matrix * DVector::from_column_slice(&h);
        let mut predicted = base.clone();
        for (x, d) in predicted.data_mut().iter_mut().zip(step.iter()) {
            *x += d;
        }
        let actual = diagram(&f.value(&moved)?, p)?;
        let rem = bottleneck(&actual, &predicted.quotient());
        let hn = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        remainders.push(rem);
        ratios.push(rem / hn);
    }
    let decreasing = ratios.windows(2).all(|w| w[1] == 0.0 || w[1] < w[0]);
    Ok(TaylorReport {
        radii: radii.to_vec(),
        remainders,
        ratios,
        decreasing,
    })
}

/// A loss composed with the barcode map at one parameter.
#[derive(Debug, Clone)]
pub struct Composite {
    pub value: Vec<f64>,
    /// `output_dim × param_dim`.
    pub jacobian: DMatrix<f64>,
    pub smooth: bool,
    pub lift: Lift,
}

impl Composite {
    pub fn gradient(&self) -> Vec<f64> {
        self.jacobian.row(0).iter().copied().collect()
    }
}

pub fn compose(f: &dyn Parametrization, theta: &[f64], p: usize, loss: &dyn BarcodeLoss) -> Result<Composite> {
    let lift = build_lift(f, theta, p)?;
    compose_with(f, theta, lift, loss)
}

/// Composes through a given lift, whose validity is the caller's responsibility.
pub fn compose_with(f: &dyn Parametrization, theta: &[f64], lift: Lift, loss: &dyn BarcodeLoss) -> Result<Composite> {
    let eval = loss.evaluate(&lift.evaluate(f, theta)?)?;
    let bdiff = differential(&lift, f, theta)?;
    Ok(Composite {
        jacobian: chain_rule_matrix(&bdiff, &eval.grad)?,
        value: eval.value,
        smooth: eval.smooth,
        lift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barcode::Barcode;
    use crate::complex::SimplicialComplex;
    use crate::losses::{BottleneckTo, TotalPersistence};
    use crate::param::{LowerStar, RawFilter, Rips, SquaredDistance, VertexFunction};
    use std::sync::Arc;

    fn segment() -> Arc<SimplicialComplex> {
        Arc::new(SimplicialComplex::build(&[vec![0, 1]]).unwrap())
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn raw_filter_segment_lift() {
        let f = RawFilter::new(segment());
        let lift = build_lift(&f, &[0.0, 1.0, 2.0], 0).unwrap();
        assert_eq!((lift.m(), lift.n()), (1, 1));
        assert_eq!(lift.ordering(), vec![1, 2, 0]);
        let x = lift.evaluate(&f, &[0.5, 1.5, 3.0]).unwrap();
        assert_eq!(x.data(), &[1.5, 3.0, 0.5]);
        let d = differential(&lift, &f, &[0.0, 1.0, 2.0]).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(d.matrix, expected);
        assert_eq!(lift.evaluate(&f, &[0.0, 1.0, 2.0]).unwrap().quotient(), diagram(&f.value(&[0.0, 1.0, 2.0]).unwrap(), 0).unwrap());
    }

    #[test]
    fn ties_are_singular() {
        let f = RawFilter::new(segment());
        match build_lift(&f, &[0.0, 0.0, 2.0], 0) {
            Err(Error::SingularParameter { ties }) => assert_eq!(ties, vec![(0, 1)]),
            other => panic!("expected a singular parameter, got {other:?}"),
        }
    }

    #[test]
    fn rips_two_points() {
        let f = Rips::new(2, 2, 1).unwrap();
        let theta = [0.0, 0.0, 3.0, 4.0];
        let lift = build_lift(&f, &theta, 0).unwrap();
        let d = differential(&lift, &f, &theta).unwrap();
        assert_eq!(lift.ordering(), vec![1, 2, 0]);
        let expected = DMatrix::from_row_slice(
            3,
            4,
            &[0.0, 0.0, 0.0, 0.0, -0.6, -0.8, 0.6, 0.8, 0.0, 0.0, 0.0, 0.0],
        );
        assert!((d.matrix - expected).abs().max() < 1e-15);
    }

    struct Constant(Vec<f64>);

    impl VertexFunction for Constant {
        fn num_vertices(&self) -> usize {
            self.0.len()
        }
        fn param_dim(&self) -> usize {
            2
        }
        fn values(&self, _theta: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
        fn jacobian(&self, _theta: &[f64]) -> Result<DMatrix<f64>> {
            Ok(DMatrix::zeros(self.0.len(), 2))
        }
    }

    #[test]
    fn constant_lower_star_has_zero_differential() {
        let k = Arc::new(SimplicialComplex::build(&[vec![0, 1], vec![1, 2]]).unwrap());
        let f = LowerStar::new(k, Constant(vec![0.0, 2.0, 1.0])).unwrap();
        let lift = build_lift(&f, &[0.4, -1.0], 0).unwrap();
        let d = differential(&lift, &f, &[0.4, -1.0]).unwrap();
        assert_eq!(d.matrix, DMatrix::zeros(5, 2));
    }

    #[test]
    fn chain_rule_examples() {
        let f = RawFilter::new(segment());
        let theta = [0.0, 1.0, 2.0];
        let lift = build_lift(&f, &theta, 0).unwrap();
        let d = differential(&lift, &f, &theta).unwrap();
        assert_eq!(chain_rule(&d, &[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(chain_rule(&d, &[-1.0, 1.0, 0.0]).unwrap(), vec![0.0, -1.0, 1.0]);
        assert!(matches!(chain_rule(&d, &[1.0]), Err(Error::ShapeError(_))));
        let c = compose(&f, &theta, 0, &TotalPersistence).unwrap();
        assert_eq!(c.gradient(), vec![0.0, -1.0, 1.0]);
        assert_eq!(c.value, vec![1.0]);
    }

    #[test]
    fn lift_independence() {
        let k = Arc::new(SimplicialComplex::full(4, 1).unwrap());
        let f = RawFilter::new(k.clone());
        let theta = [0.0, 0.3, 0.5, 0.9, 1.0, 1.2, 1.4, 1.7, 2.0, 2.2];
        let lift = build_lift(&f, &theta, 0).unwrap();
        let other = lift.reordered(&[2, 0, 1], &[0]).unwrap();
        let target = Barcode::new(vec![(0.3, 1.1)], vec![0.0]);
        let loss = BottleneckTo::new(target);
        let a = compose_with(&f, &theta, lift, &loss).unwrap();
        let b = compose_with(&f, &theta, other, &loss).unwrap();
        assert!(close(&a.gradient(), &b.gradient(), 1e-10));
        assert!(lift_reorder_rejects_bad_permutations(&a.lift));
    }

    fn lift_reorder_rejects_bad_permutations(l: &Lift) -> bool {
        l.reordered(&[0, 0, 1], &[0]).is_err()
    }

    /// `K = {a, b, ab}` with `a` at 0, `b` at 1 and the filter `|x - θ|²` extended lower-star.
    fn distance_example() -> LowerStar<SquaredDistance> {
        LowerStar::new(
            segment(),
            SquaredDistance {
                coordinates: vec![vec![0.0], vec![1.0]],
            },
        )
        .unwrap()
    }

    #[test]
    fn distance_example_values() {
        let f = distance_example();
        let lift = build_lift(&f, &[0.3], 0).unwrap();
        let x = lift.evaluate(&f, &[0.3]).unwrap();
        assert_eq!(x.infinite().len(), 1);
        assert!((x.infinite()[0] - 0.09).abs() < 1e-15);
        assert!(build_lift(&f, &[0.5], 0).is_err());
    }

    #[test]
    fn distance_example_one_sided() {
        let f = distance_example();
        let (right, lift) = directional_derivative(&f, &[0.5], &[1.0], 0).unwrap();
        let (left, _) = directional_derivative(&f, &[0.5], &[-1.0], 0).unwrap();
        let slot = 2 * lift.m();
        // derivative of θ ↦ min(θ², (1-θ)²) from the right, and from the left
        assert_eq!(right[slot], -1.0);
        assert_eq!(-left[slot], 1.0);
    }

    #[test]
    fn directional_matches_differential_when_smooth() {
        let f = Rips::new(3, 2, 2).unwrap();
        let theta = [0.0, 0.0, 1.0, 0.1, 0.3, 1.2];
        let u: Vec<f64> = [0.3, -0.2, 0.5, 0.1, -0.4, 0.6].to_vec();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: Vec<f64> = u.iter().map(|x| x / nu).collect();
        let minus: Vec<f64> = u.iter().map(|x| -x).collect();
        for p in 0..=1 {
            let lift = build_lift(&f, &theta, p).unwrap();
            let d = differential(&lift, &f, &theta).unwrap();
            let du: Vec<f64> = (&d.matrix * DVector::from_column_slice(&u)).iter().copied().collect();
            let (dir, l2) = directional_derivative(&f, &theta, &u, p).unwrap();
            let (neg, _) = directional_derivative(&f, &theta, &minus, p).unwrap();
            assert_eq!(l2.template(), lift.template());
            assert!(close(&dir, &du, 1e-12));
            let negated: Vec<f64> = neg.iter().map(|x| -x).collect();
            assert!(close(&dir, &negated, 1e-12));
        }
        assert!(matches!(
            directional_derivative(&f, &theta, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0], 0),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn taylor_remainders() {
        let radii = [1e-1, 1e-2, 1e-3, 1e-4];
        let f = RawFilter::new(segment());
        let u = [0.6, 0.0, 0.8];
        let r = taylor_remainder_check(&f, &[0.0, 1.0, 2.0], 0, &radii, &u).unwrap();
        assert!(r.remainders.iter().all(|&x| x < 1e-15), "{r:?}");

        let f = Rips::new(2, 2, 1).unwrap();
        let u = [0.5, 0.5, -0.5, 0.5];
        let r = taylor_remainder_check(&f, &[0.0, 0.0, 3.0, 4.0], 0, &radii, &u).unwrap();
        assert!(r.decreasing, "{r:?}");
        assert!(r.ratios[3] < 1e-3);
        assert!(r.ratios[0] > 0.0);
    }
}
