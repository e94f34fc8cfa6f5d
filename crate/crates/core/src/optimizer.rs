//! Gradient descent on `θ ↦ Σ w · L(Dgm_p(F(θ))) + R(θ)`.
//!
//! At generic parameters the gradient comes from the chain rule through a
//! local lift. At a singular parameter the lift is taken from the side of a
//! seeded probe direction and the step follows that one-sided subgradient.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barcode::Barcode;
use crate::differential::{build_lift, directional_derivative, Lift, PROBE_EPSILON};
use crate::error::{Error, Result};
use crate::losses::BarcodeLoss;
use crate::param::Parametrization;
use crate::persistence::diagram;

/// Number of probe directions tried at a singular parameter.
const PROBE_ATTEMPTS: usize = 3;
/// Number of Armijo halvings of the step.
const ARMIJO_HALVINGS: usize = 10;
const ARMIJO_C: f64 = 1e-4;

#[derive(Clone)]
pub struct Term {
    pub degree: usize,
    pub weight: f64,
    pub loss: Arc<dyn BarcodeLoss>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    /// `λ ‖F(θ) - reference‖_∞`.
    SupDistance { lambda: f64, reference: Vec<f64> },
}

impl Regularizer {
    fn value(&self, values: &[f64]) -> f64 {
        match self {
            Regularizer::SupDistance { lambda, reference } => {
                lambda * crate::complex::sup_distance(values, reference)
            }
        }
    }

    /// Subgradient with respect to the filter values, and whether the maximum is unique.
    fn grad(&self, values: &[f64]) -> (Vec<f64>, bool) {
        match self {
            Regularizer::SupDistance { lambda, reference } => {
                let diffs: Vec<f64> = values.iter().zip(reference).map(|(a, b)| a - b).collect();
                let mut g = vec![0.0; values.len()];
                let top = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
                if top == 0.0 {
                    return (g, false);
                }
                let arg = diffs.iter().position(|d| d.abs() == top).expect("maximum exists");
                g[arg] = lambda * diffs[arg].signum();
                let unique = diffs
                    .iter()
                    .enumerate()
                    .all(|(i, d)| i == arg || d.abs() < top - 1e-9);
                (g, unique)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant { rate: f64 },
    /// `rate / (k + 1)` at iteration `k`.
    Decay { rate: f64 },
}

impl Schedule {
    pub fn rate(&self, k: usize) -> f64 {
        match *self {
            Schedule::Constant { rate } => rate,
            Schedule::Decay { rate } => rate / (k as f64 + 1.0),
        }
    }
}

#[derive(Clone)]
pub struct OptimizationProblem {
    pub parametrization: Arc<dyn Parametrization>,
    pub terms: Vec<Term>,
    pub regularizer: Option<Regularizer>,
    pub theta0: Vec<f64>,
    pub schedule: Schedule,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Seed for the probe directions used at singular parameters.
    pub probe_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Converged,
    MaxIters,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub smooth: bool,
    pub rate: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<Record>,
    /// Diagrams of every term's degree, one entry per record.
    pub barcodes: Vec<Vec<(usize, Barcode)>>,
    pub status: Status,
}

impl Trace {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    pub fn final_theta(&self) -> &[f64] {
        &self.records.last().expect("trace is never empty").theta
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }
}

/// Objective value and a (sub)gradient at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub smooth: bool,
}

impl OptimizationProblem {
    pub fn validate(&self) -> Result<()> {
        self.parametrization.check_dim(&self.theta0)?;
        let dim = self.parametrization.complex().dim();
        for t in &self.terms {
            if t.loss.output_dim() != 1 {
                return Err(Error::ShapeError(format!("loss {} is not scalar", t.loss.name())));
            }
            if t.degree > dim {
                return Err(Error::BadDegree { degree: t.degree, max: dim });
            }
        }
        if let Some(Regularizer::SupDistance { reference, .. }) = &self.regularizer {
            if reference.len() != self.parametrization.complex().len() {
                return Err(Error::LengthMismatch {
                    expected: self.parametrization.complex().len(),
                    got: reference.len(),
                });
            }
        }
        Ok(())
    }

    /// Objective value, read from diagrams only.
    pub fn objective(&self, theta: &[f64]) -> Result<f64> {
        let f = self.parametrization.value(theta)?;
        let mut total = 0.0;
        for t in &self.terms {
            total += t.weight * t.loss.value_on(&diagram(&f, t.degree)?)?[0];
        }
        if let Some(r) = &self.regularizer {
            total += r.value(f.values());
        }
        Ok(total)
    }

    pub fn diagrams(&self, theta: &[f64]) -> Result<Vec<(usize, Barcode)>> {
        let f = self.parametrization.value(theta)?;
        let mut degrees: Vec<usize> = self.terms.iter().map(|t| t.degree).collect();
        degrees.sort_unstable();
        degrees.dedup();
        degrees.into_iter().map(|p| Ok((p, diagram(&f, p)?))).collect()
    }

    /// Gradient at `θ`; `iter` selects the probe directions at singular parameters.
    pub fn evaluate(&self, theta: &[f64], iter: usize) -> Result<Evaluation> {
        let f = self.parametrization.as_ref();
        let generic: Result<Vec<Lift>> = self.terms.iter().map(|t| build_lift(f, theta, t.degree)).collect();
        match generic {
            Ok(lifts) => self.evaluate_with(theta, theta, lifts, true),
            Err(Error::SingularParameter { .. }) => self.evaluate_singular(theta, iter),
            Err(e) => Err(e),
        }
    }

    fn evaluate_singular(&self, theta: &[f64], iter: usize) -> Result<Evaluation> {
        let f = self.parametrization.as_ref();
        let mut rng = ChaCha8Rng::seed_from_u64(self.probe_seed ^ (iter as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for _ in 0..PROBE_ATTEMPTS {
            let u = probe_direction(f, theta, &mut rng);
            let lifts: Result<Vec<Lift>> = self
                .terms
                .iter()
                .map(|t| directional_derivative(f, theta, &u, t.degree).map(|(_, l)| l))
                .collect();
            match lifts {
                Ok(lifts) => {
                    // the lift is valid on the probe side, where the Jacobian is read
                    let probe = f.perturb(theta, &u, PROBE_EPSILON);
                    let mut e = self.evaluate_with(theta, &probe, lifts, false)?;
                    e.smooth = false;
                    return Ok(e);
                }
                Err(Error::UnstableDirection) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::StalledAtSingularity)
    }

    fn evaluate_with(&self, theta: &[f64], jac_at: &[f64], lifts: Vec<Lift>, mut smooth: bool) -> Result<Evaluation> {
        let f = self.parametrization.as_ref();
        let pd = f.param_dim();
        let mut loss = 0.0;
        let mut grad = vec![0.0; pd];
        let jac = f.jacobian(jac_at)?;
        for (t, lift) in self.terms.iter().zip(lifts) {
            let eval = t.loss.evaluate(&lift.evaluate(f, theta)?)?;
            loss += t.weight * eval.scalar();
            smooth &= eval.smooth;
            let lg = eval.scalar_grad();
            for (slot, &s) in lift.ordering().iter().enumerate() {
                for k in 0..pd {
                    grad[k] += t.weight * lg[slot] * jac[(s, k)];
                }
            }
        }
        if let Some(r) = &self.regularizer {
            let values = f.values(theta)?;
            loss += r.value(&values);
            let (rg, unique) = r.grad(&values);
            smooth &= unique;
            let contrib = jac.transpose() * DVector::from_column_slice(&rg);
            for (g, c) in grad.iter_mut().zip(contrib.iter()) {
                *g += c;
            }
        }
        Ok(Evaluation { loss, grad, smooth })
    }

    /// One descent step from `θ`: returns the next iterate and the record of `θ`.
    pub fn step(&self, theta: &[f64], iter: usize) -> Result<(Vec<f64>, Record)> {
        let e = self.evaluate(theta, iter)?;
        let grad_norm = norm(&e.grad);
        let mut record = Record {
            iter,
            theta: theta.to_vec(),
            loss: e.loss,
            grad_norm,
            smooth: e.smooth,
            rate: 0.0,
            status: Status::Running,
        };
        if grad_norm == 0.0 {
            return Ok((theta.to_vec(), record));
        }
        let f = self.parametrization.as_ref();
        let mut rate = self.schedule.rate(iter);
        let mut next = theta.to_vec();
        for _ in 0..=ARMIJO_HALVINGS {
            next = theta.iter().zip(&e.grad).map(|(t, g)| t - rate * g).collect();
            f.retract(&mut next);
            if self.objective(&next)? <= e.loss - ARMIJO_C * rate * grad_norm * grad_norm {
                break;
            }
            rate /= 2.0;
        }
        record.rate = rate;
        Ok((next, record))
    }

    pub fn run(&self) -> Result<Trace> {
        self.validate()?;
        let mut theta = self.theta0.clone();
        self.parametrization.retract(&mut theta);
        let mut records = Vec::new();
        let mut barcodes = Vec::new();
        let mut iter = 0;
        let status = loop {
            barcodes.push(self.diagrams(&theta)?);
            let (next, mut record) = match self.step(&theta, iter) {
                Ok(r) => r,
                Err(Error::StalledAtSingularity) => {
                    records.push(Record {
                        iter,
                        loss: self.objective(&theta)?,
                        theta: theta.clone(),
                        grad_norm: f64::NAN,
                        smooth: false,
                        rate: 0.0,
                        status: Status::Stalled,
                    });
                    break Status::Stalled;
                }
                Err(e) => return Err(e),
            };
            let done = if record.loss == 0.0 || record.grad_norm < self.grad_tol {
                Some(Status::Converged)
            } else if iter >= self.max_iters {
                Some(Status::MaxIters)
            } else {
                None
            };
            if let Some(s) = done {
                record.status = s;
                record.rate = 0.0;
                records.push(record);
                break s;
            }
            records.push(record);
            theta = next;
            iter += 1;
        };
        Ok(Trace {
            records,
            barcodes,
            status,
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A unit tangent direction drawn from the seeded generator.
fn probe_direction(f: &dyn Parametrization, theta: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let basis = f.tangent_directions(theta);
    loop {
        let mut u = vec![0.0; theta.len()];
        for b in &basis {
            let c: f64 = rng.gen_range(-1.0..1.0);
            for (x, y) in u.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        let n = norm(&u);
        if n > 1e-6 {
            return u.into_iter().map(|x| x / n).collect();
        }
    }
}
