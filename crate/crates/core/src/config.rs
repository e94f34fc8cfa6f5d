//! JSON experiment configuration for the optimizer.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::barcode::Barcode;
use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::losses::{BarcodeLoss, BottleneckTo, TotalPersistence, WassersteinTo};
use crate::optimizer::{OptimizationProblem, Regularizer, Schedule, Term};
use crate::param::{
    CovarianceVector, EllipsoidRips, Height, LowerStar, Parametrization, PointCloud, RawFilter, Rips,
    VertexValues,
};
use crate::persistence::diagram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub parametrization: ParamConfig,
    pub loss: LossConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_max_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamConfig {
    /// Parameters are the point coordinates, flattened.
    Rips {
        points: Vec<Vec<f64>>,
        #[serde(default = "default_max_dim")]
        max_dim: usize,
    },
    /// Parameters are the upper triangles of the covariance matrices.
    EllipsoidRips {
        points: Vec<Vec<f64>>,
        #[serde(default = "default_max_dim")]
        max_dim: usize,
        /// One symmetric matrix per point; identity matrices when absent.
        #[serde(default)]
        covariances: Option<Vec<Vec<Vec<f64>>>>,
    },
    /// Parameter is the direction on the unit sphere.
    Height {
        simplices: Vec<Vec<usize>>,
        coordinates: Vec<Vec<f64>>,
        direction: Vec<f64>,
    },
    /// Parameters are the vertex values.
    LowerStar {
        simplices: Vec<Vec<usize>>,
        vertex_values: Vec<f64>,
    },
    /// Parameters are the simplex values in canonical order.
    RawFilter {
        simplices: Vec<Vec<usize>>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub terms: Vec<TermConfig>,
    /// `λ ‖F(θ) - F(θ₀)‖_∞`.
    #[serde(default)]
    pub regularizer: Option<RegularizerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerConfig {
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub degree: usize,
    #[serde(default = "one")]
    pub weight: f64,
    pub loss: LossKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    TotalPersistence,
    BottleneckTo {
        target: TargetConfig,
    },
    WassersteinTo {
        target: TargetConfig,
        #[serde(default = "one")]
        q: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetConfig {
    Explicit {
        #[serde(default)]
        finite: Vec<(f64, f64)>,
        #[serde(default)]
        infinite: Vec<f64>,
    },
    /// The initial diagram without its bars of length at most `epsilon`.
    FromInitial { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub schedule: Schedule,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub probe_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            schedule: Schedule::Constant { rate: 0.01 },
            max_iters: 100,
            grad_tol: 1e-8,
            probe_seed: 0,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Pretty JSON with every default written out.
    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Four points pulled towards the degree-1 barcode of a unit square.
    pub fn example() -> Self {
        Config {
            parametrization: ParamConfig::Rips {
                points: vec![vec![0.0, 0.0], vec![1.1, 0.05], vec![1.05, 0.95], vec![-0.05, 1.02]],
                max_dim: 2,
            },
            loss: LossConfig {
                terms: vec![TermConfig {
                    degree: 1,
                    weight: 1.0,
                    loss: LossKind::WassersteinTo {
                        target: TargetConfig::Explicit {
                            finite: vec![(1.0, std::f64::consts::SQRT_2)],
                            infinite: vec![],
                        },
                        q: 1.0,
                    },
                }],
                regularizer: None,
            },
            optimizer: OptimizerConfig {
                max_iters: 200,
                ..OptimizerConfig::default()
            },
        }
    }

    pub fn build(&self) -> Result<OptimizationProblem> {
        let (parametrization, theta0) = self.parametrization.build()?;
        let initial = parametrization.value(&theta0)?;
        let mut terms = Vec::with_capacity(self.loss.terms.len());
        for t in &self.loss.terms {
            let target = |c: &TargetConfig| -> Result<Barcode> {
                Ok(match c {
                    TargetConfig::Explicit { finite, infinite } => Barcode::new(finite.clone(), infinite.clone()),
                    TargetConfig::FromInitial { epsilon } => diagram(&initial, t.degree)?.without_short_bars(*epsilon),
                })
            };
            let loss: Arc<dyn BarcodeLoss> = match &t.loss {
                LossKind::TotalPersistence => Arc::new(TotalPersistence),
                LossKind::BottleneckTo { target: c } => Arc::new(BottleneckTo::new(target(c)?)),
                LossKind::WassersteinTo { target: c, q } => Arc::new(WassersteinTo::new(target(c)?, *q)?),
            };
            terms.push(Term {
                degree: t.degree,
                weight: t.weight,
                loss,
            });
        }
        let regularizer = self.loss.regularizer.as_ref().map(|r| Regularizer::SupDistance {
            lambda: r.lambda,
            reference: initial.values().to_vec(),
        });
        let o = &self.optimizer;
        let problem = OptimizationProblem {
            parametrization,
            terms,
            regularizer,
            theta0,
            schedule: o.schedule,
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            probe_seed: o.probe_seed,
        };
        problem.validate()?;
        Ok(problem)
    }
}

impl ParamConfig {
    pub fn build(&self) -> Result<(Arc<dyn Parametrization>, Vec<f64>)> {
        let complex = |s: &[Vec<usize>]| SimplicialComplex::build(s).map(Arc::new);
        Ok(match self {
            ParamConfig::Rips { points, max_dim } => {
                let cloud = PointCloud::new(points)?;
                let f = Rips::new(cloud.len(), cloud.dim, *max_dim)?;
                (Arc::new(f), cloud.coords)
            }
            ParamConfig::EllipsoidRips {
                points,
                max_dim,
                covariances,
            } => {
                let cloud = PointCloud::new(points)?;
                let cov = match covariances {
                    None => CovarianceVector::identity(cloud.len(), cloud.dim),
                    Some(ms) => {
                        if ms.len() != cloud.len() {
                            return Err(Error::LengthMismatch {
                                expected: cloud.len(),
                                got: ms.len(),
                            });
                        }
                        let matrices = ms
                            .iter()
                            .map(|rows| {
                                if rows.len() != cloud.dim || rows.iter().any(|r| r.len() != cloud.dim) {
                                    return Err(Error::ShapeError(format!(
                                        "covariance matrices must be {0}×{0}",
                                        cloud.dim
                                    )));
                                }
                                Ok(DMatrix::from_fn(cloud.dim, cloud.dim, |a, b| rows[a][b]))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        CovarianceVector { matrices }
                    }
                };
                cov.validate()?;
                (Arc::new(EllipsoidRips::new(cloud, *max_dim)?), cov.chart())
            }
            ParamConfig::Height {
                simplices,
                coordinates,
                direction,
            } => (Arc::new(Height::new(complex(simplices)?, coordinates.clone())?), direction.clone()),
            ParamConfig::LowerStar {
                simplices,
                vertex_values,
            } => {
                let k = complex(simplices)?;
                let n = k.num_vertices();
                (Arc::new(LowerStar::new(k, VertexValues { num_vertices: n })?), vertex_values.clone())
            }
            ParamConfig::RawFilter { simplices, values } => (Arc::new(RawFilter::new(complex(simplices)?)), values.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_round_trips() {
        let c = Config::example();
        let back = Config::from_json(&c.to_pretty_json()).unwrap();
        assert_eq!(back, c);
        let p = c.build().unwrap();
        assert_eq!(p.theta0.len(), 8);
    }

    #[test]
    fn defaults_are_filled_in() {
        let text = r#"{
            "parametrization": {"kind": "raw_filter", "simplices": [[0, 1]], "values": [0, 1, 2]},
            "loss": {
                "terms": [{"degree": 0, "loss": {"kind": "bottleneck_to", "target": {"kind": "from_initial", "epsilon": 1.5}}}],
                "regularizer": {"lambda": 0.1}
            }
        }"#;
        let c = Config::from_json(text).unwrap();
        assert_eq!(c.optimizer, OptimizerConfig::default());
        assert_eq!(c.loss.terms[0].weight, 1.0);
        let p = c.build().unwrap();
        assert_eq!(p.regularizer, Some(Regularizer::SupDistance { lambda: 0.1, reference: vec![0.0, 1.0, 2.0] }));
        let printed = c.to_pretty_json();
        assert!(printed.contains("\"max_iters\": 100"));
    }

    #[test]
    fn schema_errors() {
        assert!(Config::from_json("{}").is_err());
        assert!(Config::from_json(r#"{"parametrization": {"kind": "nope"}, "loss": {"terms": []}}"#).is_err());
        let bad_degree = r#"{
            "parametrization": {"kind": "raw_filter", "simplices": [[0, 1]], "values": [0, 1, 2]},
            "loss": {"terms": [{"degree": 4, "loss": {"kind": "total_persistence"}}]}
        }"#;
        let c = Config::from_json(bad_degree).unwrap();
        assert!(matches!(c.build(), Err(Error::BadDegree { .. })));
    }

    #[test]
    fn every_parametrization_builds() {
        let texts = [
            r#"{"kind": "ellipsoid_rips", "points": [[0, 0], [1, 0.2], [0.3, 1]]}"#,
            r#"{"kind": "height", "simplices": [[0, 1]], "coordinates": [[0, 0], [1, 1]], "direction": [1, 0]}"#,
            r#"{"kind": "lower_star", "simplices": [[0, 1], [1, 2]], "vertex_values": [0, 2, 1]}"#,
        ];
        for t in texts {
            let p: ParamConfig = serde_json::from_str(t).unwrap();
            let (f, theta) = p.build().unwrap();
            assert_eq!(f.param_dim(), theta.len());
        }
    }
}
