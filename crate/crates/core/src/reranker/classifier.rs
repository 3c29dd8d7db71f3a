//! One-hidden-layer feed-forward binary classifier.
//!
//! Sigmoid hidden units, a single sigmoid output, binary cross-entropy loss,
//! and plain mini-batch gradient descent with a fixed learning rate.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RerankError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            hidden: 15,
            learning_rate: 0.5,
            epochs: 300,
            batch_size: 16,
            seed: 17,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    inputs: usize,
    hidden: usize,
    /// `hidden x inputs`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    params: TrainParams,
}

struct Forward {
    hidden: Vec<f64>,
    logit: f64,
}

impl FeedForward {
    /// Xavier-uniform initialization from `params.seed`.
    pub fn new(inputs: usize, params: TrainParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let hidden = params.hidden;
        let a1 = (6.0 / (inputs + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        let w1 = (0..inputs * hidden).map(|_| rng.gen_range(-a1..a1)).collect();
        let w2 = (0..hidden).map(|_| rng.gen_range(-a2..a2)).collect();
        Self {
            inputs,
            hidden,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: 0.0,
            params,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn train_params(&self) -> TrainParams {
        self.params
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let hidden = (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
                sigmoid(z)
            })
            .collect::<Vec<_>>();
        let logit = hidden.iter().zip(&self.w2).map(|(h, w)| h * w).sum::<f64>() + self.b2;
        Forward { hidden, logit }
    }

    /// Probability of the positive class.
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.forward(x).logit)
    }

    /// Binary cross-entropy of one example.
    pub fn loss(&self, x: &[f64], label: bool) -> f64 {
        let z = self.forward(x).logit;
        softplus(z) - if label { z } else { 0.0 }
    }

    pub fn mean_loss(&self, data: &[(Vec<f64>, bool)]) -> f64 {
        data.iter().map(|(x, y)| self.loss(x, *y)).sum::<f64>() / data.len().max(1) as f64
    }

    pub fn accuracy(&self, data: &[(Vec<f64>, bool)], threshold: f64) -> f64 {
        let hits = data
            .iter()
            .filter(|(x, y)| (self.predict(x) >= threshold) == *y)
            .count();
        hits as f64 / data.len().max(1) as f64
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// All weights flattened as `w1, b1, w2, b2`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        p.extend(&self.w1);
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.parameter_count());
        let (w1, rest) = p.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, rest) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = rest[0];
    }

    /// Gradient of [`FeedForward::loss`] in the order of [`FeedForward::parameters`].
    pub fn gradient(&self, x: &[f64], label: bool) -> Vec<f64> {
        let mut g = vec![0.0; self.parameter_count()];
        self.accumulate_gradient(x, label, &mut g);
        g
    }

    fn accumulate_gradient(&self, x: &[f64], label: bool, g: &mut [f64]) {
        let f = self.forward(x);
        let d_logit = sigmoid(f.logit) - if label { 1.0 } else { 0.0 };
        let n_w1 = self.w1.len();
        let (g_w1, rest) = g.split_at_mut(n_w1);
        let (g_b1, rest) = rest.split_at_mut(self.hidden);
        let (g_w2, g_b2) = rest.split_at_mut(self.hidden);
        g_b2[0] += d_logit;
        for j in 0..self.hidden {
            let h = f.hidden[j];
            g_w2[j] += d_logit * h;
            let d_pre = d_logit * self.w2[j] * h * (1.0 - h);
            g_b1[j] += d_pre;
            let row = &mut g_w1[j * self.inputs..(j + 1) * self.inputs];
            for (gw, v) in row.iter_mut().zip(x) {
                *gw += d_pre * v;
            }
        }
    }

    /// One pass over `data` in a shuffled order drawn from `rng`.
    fn epoch(&mut self, data: &[(Vec<f64>, bool)], rng: &mut ChaCha8Rng) {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(rng);
        let mut grad = vec![0.0; self.parameter_count()];
        let batch = self.params.batch_size.max(1);
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                self.accumulate_gradient(&data[i].0, data[i].1, &mut grad);
            }
            let step = self.params.learning_rate / chunk.len() as f64;
            let mut p = self.parameters();
            for (w, g) in p.iter_mut().zip(&grad) {
                *w -= step * g;
            }
            self.set_parameters(&p);
        }
    }

    /// Trains a fresh network on `data`. Deterministic for a given seed.
    pub fn train(data: &[(Vec<f64>, bool)], params: TrainParams) -> Result<Self, RerankError> {
        let Some(first) = data.first() else {
            return Err(RerankError::SingleClass);
        };
        let inputs = first.0.len();
        if data.iter().any(|(x, _)| x.len() != inputs) {
            return Err(RerankError::Dimension {
                expected: inputs,
                found: data.iter().map(|(x, _)| x.len()).find(|&l| l != inputs).unwrap_or(0),
            });
        }
        let positives = data.iter().filter(|(_, y)| *y).count();
        if positives == 0 || positives == data.len() {
            return Err(RerankError::SingleClass);
        }
        let mut net = Self::new(inputs, params);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
        for _ in 0..params.epochs {
            net.epoch(data, &mut rng);
        }
        Ok(net)
    }

    /// Like [`FeedForward::train`] but also returns the mean loss before
    /// training and after each epoch.
    pub fn train_with_history(data: &[(Vec<f64>, bool)], params: TrainParams) -> Result<(Self, Vec<f64>), RerankError> {
        let mut short = params;
        short.epochs = 0;
        let mut net = Self::train(data, short)?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
        let mut history = vec![net.mean_loss(data)];
        for _ in 0..params.epochs {
            net.epoch(data, &mut rng);
            history.push(net.mean_loss(data));
        }
        Ok((net, history))
    }

    const HEADER: &'static str = "xgenre-classifier 1";

    /// Versioned text form: dimensions, weights row-major, hyperparameters.
    pub fn to_text(&self, comments: &[String]) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        let _ = writeln!(out, "{}", Self::HEADER);
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "dims {} {} 1", self.inputs, self.hidden);
        for j in 0..self.hidden {
            let _ = writeln!(out, "w1 {}", join(&self.w1[j * self.inputs..(j + 1) * self.inputs]));
        }
        let _ = writeln!(out, "b1 {}", join(&self.b1));
        let _ = writeln!(out, "w2 {}", join(&self.w2));
        let _ = writeln!(out, "b2 {}", self.b2);
        let p = &self.params;
        let _ = writeln!(
            out,
            "train learning_rate={} epochs={} batch_size={} seed={}",
            p.learning_rate, p.epochs, p.batch_size, p.seed
        );
        out
    }

    pub fn from_text(text: &str) -> Result<Self, RerankError> {
        let bad = |msg: &str| RerankError::Model(msg.to_string());
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        if lines.next() != Some(Self::HEADER) {
            return Err(bad("unknown header or version"));
        }
        let mut field = |tag: &str| -> Result<Vec<&str>, RerankError> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing `{tag}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(tag) {
                return Err(bad(&format!("expected `{tag}` line, found {line:?}")));
            }
            Ok(parts.collect())
        };
        let nums = |v: Vec<&str>| -> Result<Vec<f64>, RerankError> {
            v.iter()
                .map(|s| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}"))))
                .collect()
        };
        let dims = field("dims")?;
        let dim = |i: usize| -> Result<usize, RerankError> {
            dims.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad dims line"))
        };
        let (inputs, hidden) = (dim(0)?, dim(1)?);
        if dim(2)? != 1 {
            return Err(bad("only a single output unit is supported"));
        }
        let mut w1 = Vec::with_capacity(inputs * hidden);
        for _ in 0..hidden {
            let row = nums(field("w1")?)?;
            if row.len() != inputs {
                return Err(bad("w1 row has the wrong width"));
            }
            w1.extend(row);
        }
        let b1 = nums(field("b1")?)?;
        let w2 = nums(field("w2")?)?;
        let b2 = nums(field("b2")?)?;
        if b1.len() != hidden || w2.len() != hidden || b2.len() != 1 {
            return Err(bad("bias or output layer has the wrong width"));
        }
        let mut params = TrainParams {
            hidden,
            ..TrainParams::default()
        };
        for kv in field("train")? {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad("bad train field"))?;
            let num_err = || bad(&format!("bad value for {k}"));
            match k {
                "learning_rate" => params.learning_rate = v.parse().map_err(|_| num_err())?,
                "epochs" => params.epochs = v.parse().map_err(|_| num_err())?,
                "batch_size" => params.batch_size = v.parse().map_err(|_| num_err())?,
                "seed" => params.seed = v.parse().map_err(|_| num_err())?,
                _ => return Err(bad(&format!("unknown train field {k}"))),
            }
        }
        Ok(Self {
            inputs,
            hidden,
            w1,
            b1,
            w2,
            b2: b2[0],
            params,
        })
    }
}
