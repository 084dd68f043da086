//! Euclidean update rules on flat coordinates.
//!
//! [`OptimizerState::step`] returns the adapted direction `ĝ` without the
//! learning rate; the engine scales and applies it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{random_rotation, DenseMatrix};
use crate::rng::{gaussian_vec, RngSeed};

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerRule {
    Sgd,
    Momentum { mu: f64 },
    Adagrad { eps: f64 },
    RmsProp { beta2: f64, eps: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerRule {
    pub fn adam() -> Self {
        OptimizerRule::Adam { beta1: 0.9, beta2: 0.99, eps: DEFAULT_EPSILON }
    }

    pub fn rmsprop() -> Self {
        OptimizerRule::RmsProp { beta2: 0.99, eps: DEFAULT_EPSILON }
    }

    pub fn adagrad() -> Self {
        OptimizerRule::Adagrad { eps: DEFAULT_EPSILON }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerRule::Sgd => "sgd",
            OptimizerRule::Momentum { .. } => "momentum",
            OptimizerRule::Adagrad { .. } => "adagrad",
            OptimizerRule::RmsProp { .. } => "rmsprop",
            OptimizerRule::Adam { .. } => "adam",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    rule: OptimizerRule,
    first_moment: Vec<f64>,
    /// Entrywise accumulator: the diagonal of the adaptive matrix.
    second_moment: Vec<f64>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(rule: OptimizerRule, dim: usize) -> Self {
        OptimizerState {
            rule,
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step_count: 0,
        }
    }

    pub fn rule(&self) -> OptimizerRule {
        self.rule
    }

    pub fn dim(&self) -> usize {
        self.first_moment.len()
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Zeroes moments and the step counter, keeping the rule.
    pub fn reset(&mut self) {
        self.first_moment.iter_mut().for_each(|x| *x = 0.0);
        self.second_moment.iter_mut().for_each(|x| *x = 0.0);
        self.step_count = 0;
    }

    /// Consumes `g` and returns the adapted direction `ĝ`.
    pub fn step(&mut self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.dim() {
            return Err(Error::dim(format!("gradient of length {} for optimizer of dimension {}", g.len(), self.dim())));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite gradient".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let m = &mut self.first_moment;
        let v = &mut self.second_moment;
        let out = match self.rule {
            OptimizerRule::Sgd => g.to_vec(),
            OptimizerRule::Momentum { mu } => {
                for (mi, gi) in m.iter_mut().zip(g) {
                    *mi = mu * *mi + gi;
                }
                m.clone()
            }
            OptimizerRule::Adagrad { eps } => g
                .iter()
                .zip(v.iter_mut())
                .map(|(gi, vi)| {
                    *vi += gi * gi;
                    gi / (vi.sqrt() + eps)
                })
                .collect(),
            OptimizerRule::RmsProp { beta2, eps } => g
                .iter()
                .zip(v.iter_mut())
                .map(|(gi, vi)| {
                    *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                    gi / (vi.sqrt() + eps)
                })
                .collect(),
            OptimizerRule::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                g.iter()
                    .zip(m.iter_mut())
                    .zip(v.iter_mut())
                    .map(|((gi, mi), vi)| {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        m_hat / (v_hat.sqrt() + eps)
                    })
                    .collect()
            }
        };
        Ok(out)
    }
}

/// Outcome of running Adagrad in two coordinate systems related by a rotation.
#[derive(Debug, Clone)]
pub struct NoninvarianceWitness {
    pub rotation: DenseMatrix,
    pub gradients: Vec<Vec<f64>>,
    /// `‖R·ĝ' − ĝ‖` after the last step, where `ĝ'` is computed from `Rᵀg`.
    pub deviation: f64,
}

const WITNESS_DIM: usize = 5;
const WITNESS_STEPS: usize = 10;

/// Draws a random rotation and gradient sequence and measures how far the
/// diagonal adaptive term is from commuting with the change of coordinates.
pub fn coordinate_noninvariance_witness(seed: RngSeed) -> NoninvarianceWitness {
    let mut rng = seed.rng();
    let rotation = random_rotation(&mut rng, WITNESS_DIM);
    let gradients = random_gradients(&mut rng);
    let deviation = noninvariance_deviation(&rotation, &gradients);
    NoninvarianceWitness { rotation, gradients, deviation }
}

fn random_gradients<R: Rng + ?Sized>(rng: &mut R) -> Vec<Vec<f64>> {
    (0..WITNESS_STEPS).map(|_| gaussian_vec(rng, WITNESS_DIM)).collect()
}

/// Deviation for a given change of coordinates `rotation`.
pub fn noninvariance_deviation(rotation: &DenseMatrix, gradients: &[Vec<f64>]) -> f64 {
    let dim = rotation.rows();
    let rotation_t = rotation.transpose();
    let mut original = OptimizerState::new(OptimizerRule::adagrad(), dim);
    let mut rotated = OptimizerState::new(OptimizerRule::adagrad(), dim);
    let mut deviation = 0.0;
    for g in gradients {
        let a = original.step(g).expect("finite gradient");
        let b = rotated.step(&rotation_t.matvec(g)).expect("finite gradient");
        let back = rotation.matvec(&b);
        deviation = crate::matrix::norm2(&back.iter().zip(&a).map(|(x, y)| x - y).collect::<Vec<_>>());
    }
    deviation
}

/// Witness for a caller-chosen rotation, with gradients drawn from `seed`.
pub fn noninvariance_witness_for(rotation: DenseMatrix, seed: RngSeed) -> NoninvarianceWitness {
    let mut rng = seed.rng();
    let gradients: Vec<Vec<f64>> = (0..WITNESS_STEPS).map(|_| gaussian_vec(&mut rng, rotation.rows())).collect();
    let deviation = noninvariance_deviation(&rotation, &gradients);
    NoninvarianceWitness { rotation, gradients, deviation }
}
