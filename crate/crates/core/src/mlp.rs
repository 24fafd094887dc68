//! A three-layer feed-forward network with tan-sigmoid hidden units, trained
//! by full-batch back-propagation with momentum and validation-based early
//! stopping.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Pre-activations beyond this magnitude saturate to ±1.
const SATURATION: f64 = 20.0;

/// `2 / (1 + exp(-2n)) - 1`, evaluated on `|n|` so the result is exactly odd.
pub fn tansig(n: f64) -> f64 {
    let a = n.abs();
    let t = if a > SATURATION {
        1.0
    } else {
        2.0 / (1.0 + (-2.0 * a).exp()) - 1.0
    };
    t.copysign(n)
}

/// Derivative of [`tansig`] written in terms of its output `a`.
pub fn tansig_prime(a: f64) -> f64 {
    1.0 - a * a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    TanSigmoid,
    Linear,
}

impl Activation {
    pub fn apply(self, n: f64) -> f64 {
        match self {
            Activation::TanSigmoid => tansig(n),
            Activation::Linear => n,
        }
    }

    /// Derivative in terms of the activation output.
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::TanSigmoid => tansig_prime(a),
            Activation::Linear => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::TanSigmoid => "tansig",
            Activation::Linear => "linear",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "tansig" => Ok(Activation::TanSigmoid),
            "linear" | "purelin" => Ok(Activation::Linear),
            other => Err(format!("unknown activation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkSpec {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub output_activation: Activation,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            n_in: crate::domain::N_ATTRIBUTES,
            n_hidden: 20,
            n_out: 1,
            output_activation: Activation::TanSigmoid,
        }
    }
}

impl NetworkSpec {
    pub fn new(n_in: usize, n_hidden: usize, n_out: usize, output_activation: Activation) -> Result<Self> {
        if n_in == 0 || n_hidden == 0 || n_out == 0 {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got {n_in}-{n_hidden}-{n_out}"
            )));
        }
        Ok(NetworkSpec {
            n_in,
            n_hidden,
            n_out,
            output_activation,
        })
    }

    fn n_params(&self) -> usize {
        self.n_hidden * (self.n_in + 1) + self.n_out * (self.n_hidden + 1)
    }
}

/// Weights and biases; matrices are row-major with one row per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

/// Outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub output: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// Gradient of the batch MSE, shaped like [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros(spec: &NetworkSpec) -> Self {
        Gradients {
            w1: vec![0.0; spec.n_hidden * spec.n_in],
            b1: vec![0.0; spec.n_hidden],
            w2: vec![0.0; spec.n_out * spec.n_hidden],
            b2: vec![0.0; spec.n_out],
        }
    }

    /// Flattened in the same order as [`Network::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .into_iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }
}

/// One input/target pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Sample {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Self {
        Sample { input, target }
    }
}

impl Network {
    /// All-zero network.
    pub fn zeros(spec: NetworkSpec) -> Self {
        Network {
            spec,
            w1: vec![0.0; spec.n_hidden * spec.n_in],
            b1: vec![0.0; spec.n_hidden],
            w2: vec![0.0; spec.n_out * spec.n_hidden],
            b2: vec![0.0; spec.n_out],
        }
    }

    /// Weights uniform on `±1/sqrt(fan_in)`, biases zero.
    pub fn init(spec: NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::zeros(spec);
        let r1 = 1.0 / (spec.n_in as f64).sqrt();
        let r2 = 1.0 / (spec.n_hidden as f64).sqrt();
        net.w1.iter_mut().for_each(|w| *w = rng.gen_range(-r1..=r1));
        net.w2.iter_mut().for_each(|w| *w = rng.gen_range(-r2..=r2));
        net
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    /// Flattened `w1, b1, w2, b2`.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .into_iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.spec.n_params() {
            return Err(Error::Dimension {
                expected: self.spec.n_params(),
                actual: params.len(),
            });
        }
        let mut rest = params;
        for layer in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let (head, tail) = rest.split_at(layer.len());
            layer.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        let NetworkSpec {
            n_in, n_hidden, n_out, ..
        } = self.spec;
        if x.len() != n_in {
            return Err(Error::Dimension {
                expected: n_in,
                actual: x.len(),
            });
        }
        let hidden: Vec<f64> = (0..n_hidden)
            .map(|h| {
                let row = &self.w1[h * n_in..(h + 1) * n_in];
                tansig(dot(row, x) + self.b1[h])
            })
            .collect();
        let output = (0..n_out)
            .map(|o| {
                let row = &self.w2[o * n_hidden..(o + 1) * n_hidden];
                self.spec.output_activation.apply(dot(row, &hidden) + self.b2[o])
            })
            .collect();
        Ok(Forward { output, hidden })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x).map(|f| f.output)
    }

    /// Exact gradient of the batch MSE.
    pub fn backprop_gradients(&self, batch: &[Sample]) -> Result<Gradients> {
        self.gradients_and_mse(batch).map(|(g, _)| g)
    }

    fn gradients_and_mse(&self, batch: &[Sample]) -> Result<(Gradients, f64)> {
        let NetworkSpec {
            n_in, n_hidden, n_out, ..
        } = self.spec;
        if batch.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let scale = 2.0 / (batch.len() * n_out) as f64;
        let mut grads = Gradients::zeros(&self.spec);
        let mut sse = 0.0;
        let mut delta_out = vec![0.0; n_out];
        for sample in batch {
            if sample.target.len() != n_out {
                return Err(Error::Dimension {
                    expected: n_out,
                    actual: sample.target.len(),
                });
            }
            let Forward { output, hidden } = self.forward(&sample.input)?;
            for o in 0..n_out {
                let err = output[o] - sample.target[o];
                sse += err * err;
                delta_out[o] = scale * err * self.spec.output_activation.derivative(output[o]);
                grads.b2[o] += delta_out[o];
                let row = &mut grads.w2[o * n_hidden..(o + 1) * n_hidden];
                for (g, &a) in row.iter_mut().zip(&hidden) {
                    *g += delta_out[o] * a;
                }
            }
            for (h, &a) in hidden.iter().enumerate() {
                let back: f64 = (0..n_out).map(|o| self.w2[o * n_hidden + h] * delta_out[o]).sum();
                let delta = back * tansig_prime(a);
                grads.b1[h] += delta;
                let row = &mut grads.w1[h * n_in..(h + 1) * n_in];
                for (g, &xi) in row.iter_mut().zip(&sample.input) {
                    *g += delta * xi;
                }
            }
        }
        Ok((grads, sse / (batch.len() * n_out) as f64))
    }

    /// MSE of the network over `batch`.
    pub fn batch_mse(&self, batch: &[Sample]) -> Result<f64> {
        let outputs = batch
            .iter()
            .map(|s| self.predict(&s.input))
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<Vec<f64>> = batch.iter().map(|s| s.target.clone()).collect();
        mse(&outputs, &targets)
    }

    pub fn to_text(&self) -> String {
        let NetworkSpec {
            n_in,
            n_hidden,
            n_out,
            output_activation,
        } = self.spec;
        let mut out = format!("mlpv1,{n_in},{n_hidden},{n_out},{output_activation}\n");
        for row in self.w1.chunks(n_in) {
            push_row(&mut out, row);
        }
        push_row(&mut out, &self.b1);
        for row in self.w2.chunks(n_hidden) {
            push_row(&mut out, row);
        }
        push_row(&mut out, &self.b2);
        out
    }

    /// Parses a model from the start of `lines`, consuming exactly its lines.
    /// `first_line` is the 1-based line number of the header, for errors.
    pub(crate) fn parse_lines<'a>(lines: &mut impl Iterator<Item = &'a str>, first_line: usize) -> Result<Self> {
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(first_line, "missing model header"))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 5 || fields[0] != "mlpv1" {
            return Err(Error::parse(first_line, format!("bad model header {header:?}")));
        }
        let size = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(first_line, format!("bad layer size {s:?}")))
        };
        let activation = fields[4]
            .parse::<Activation>()
            .map_err(|m| Error::parse(first_line, m))?;
        let spec = NetworkSpec::new(size(fields[1])?, size(fields[2])?, size(fields[3])?, activation)
            .map_err(|e| Error::parse(first_line, e.to_string()))?;

        let mut net = Network::zeros(spec);
        let mut line_no = first_line;
        let mut read_row = |width: usize| -> Result<Vec<f64>> {
            line_no += 1;
            let line = lines.next().ok_or_else(|| Error::parse(line_no, "truncated model"))?;
            let row = line
                .split(',')
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::parse(line_no, format!("bad weight {v:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != width {
                return Err(Error::parse(
                    line_no,
                    format!("expected {width} values, found {}", row.len()),
                ));
            }
            Ok(row)
        };
        let mut w1 = Vec::with_capacity(net.w1.len());
        for _ in 0..spec.n_hidden {
            w1.extend(read_row(spec.n_in)?);
        }
        let b1 = read_row(spec.n_hidden)?;
        let mut w2 = Vec::with_capacity(net.w2.len());
        for _ in 0..spec.n_out {
            w2.extend(read_row(spec.n_hidden)?);
        }
        let b2 = read_row(spec.n_out)?;
        net.w1 = w1;
        net.b1 = b1;
        net.w2 = w2;
        net.b2 = b2;
        Ok(net)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let net = Self::parse_lines(&mut lines, 1)?;
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::parse(net.line_count() + 1, "trailing content after model"));
        }
        Ok(net)
    }

    pub(crate) fn line_count(&self) -> usize {
        1 + self.spec.n_hidden + 1 + self.spec.n_out + 1
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    fn step(&mut self, velocity: &mut Gradients, grads: &Gradients, config: &TrainConfig) {
        let layers = [
            (&mut self.w1, &mut velocity.w1, &grads.w1),
            (&mut self.b1, &mut velocity.b1, &grads.b1),
            (&mut self.w2, &mut velocity.w2, &grads.w2),
            (&mut self.b2, &mut velocity.b2, &grads.b2),
        ];
        for (weights, v, g) in layers {
            for ((w, v), g) in weights.iter_mut().zip(v.iter_mut()).zip(g) {
                *v = config.momentum * *v - config.learning_rate * g;
                *w += *v;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn push_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        // Display for f64 is the shortest string that parses back exactly.
        out.push_str(&v.to_string());
    }
    out.push('\n');
}

/// Mean over all samples and components of the squared error.
pub fn mse(outputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if outputs.len() != targets.len() {
        return Err(Error::Dimension {
            expected: targets.len(),
            actual: outputs.len(),
        });
    }
    if outputs.is_empty() {
        return Err(Error::Config("mean squared error of an empty batch".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (y, t) in outputs.iter().zip(targets) {
        if y.len() != t.len() {
            return Err(Error::Dimension {
                expected: t.len(),
                actual: y.len(),
            });
        }
        sum += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += y.len();
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_iterations: usize,
    /// Stop once training MSE falls to this value; 0 disables the check.
    pub mse_goal: f64,
    /// Consecutive epochs without a validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            max_iterations: 1000,
            mse_goal: 0.0,
            patience: 6,
            validation_fraction: 0.15,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.max_iterations == 0 {
            return fail("max_iterations must be at least 1".into());
        }
        if self.mse_goal.is_nan() || self.mse_goal < 0.0 {
            return fail(format!("mse goal must be non-negative, got {}", self.mse_goal));
        }
        if self.patience == 0 {
            return fail("patience must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return fail(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GoalReached,
    PatienceExhausted,
    MaxIterations,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::GoalReached => "goal_reached",
            StopReason::PatienceExhausted => "patience_exhausted",
            StopReason::MaxIterations => "max_iterations",
        })
    }
}

/// Per-epoch history of a training run. Epochs are 1-based; entry `e - 1`
/// holds the errors measured after the `e`-th update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_mse: Vec<f64>,
    /// `None` when training ran without a validation slice.
    pub validation_mse: Option<Vec<f64>>,
    pub stop_reason: StopReason,
    pub stopped_at_epoch: usize,
    /// Epoch whose weights were returned: the best validation epoch when a
    /// validation slice exists and the goal was not reached, otherwise the
    /// last epoch.
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse\n");
        for (i, train) in self.train_mse.iter().enumerate() {
            let val = self
                .validation_mse
                .as_ref()
                .map(|v| v[i].to_string())
                .unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", i + 1, train, val));
        }
        out
    }
}

/// Full-batch gradient descent with momentum.
///
/// A `validation_fraction` slice of `samples`, chosen by `config.seed`, is
/// held out for early stopping.
pub fn train(net: &Network, samples: &[Sample], config: &TrainConfig) -> Result<(Network, TrainReport)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let (fit, held_out) = hold_out(samples, config.validation_fraction, config.seed);

    let mut net = net.clone();
    let mut velocity = Gradients::zeros(&net.spec);
    let mut train_mse = Vec::new();
    let mut val_mse = Vec::new();
    let mut best: Option<(f64, usize, Network)> = None;
    let mut stale = 0usize;
    let mut stop_reason = StopReason::MaxIterations;

    for epoch in 1..=config.max_iterations {
        let grads = net.backprop_gradients(&fit)?;
        net.step(&mut velocity, &grads, config);
        let train_err = net.batch_mse(&fit)?;
        train_mse.push(train_err);

        if config.mse_goal > 0.0 && train_err <= config.mse_goal {
            stop_reason = StopReason::GoalReached;
            if !held_out.is_empty() {
                val_mse.push(net.batch_mse(&held_out)?);
            }
            best = None;
            break;
        }
        if held_out.is_empty() {
            continue;
        }
        let val_err = net.batch_mse(&held_out)?;
        val_mse.push(val_err);
        match &best {
            Some((best_err, _, _)) if val_err >= *best_err => {
                stale += 1;
                if stale >= config.patience {
                    stop_reason = StopReason::PatienceExhausted;
                    break;
                }
            }
            _ => {
                best = Some((val_err, epoch, net.clone()));
                stale = 0;
            }
        }
    }

    let stopped_at_epoch = train_mse.len();
    let (net, best_epoch) = match best {
        Some((_, epoch, best_net)) => (best_net, epoch),
        None => (net, stopped_at_epoch),
    };
    let report = TrainReport {
        train_mse,
        validation_mse: (!held_out.is_empty()).then_some(val_mse),
        stop_reason,
        stopped_at_epoch,
        best_epoch,
    };
    Ok((net, report))
}

/// Splits off a seeded slice of `round(n * fraction)` samples (leaving at
/// least one for fitting), returned as `(fit, validation)` in input order.
/// [`train`] uses this with the config's fraction and seed.
pub fn hold_out(samples: &[Sample], fraction: f64, seed: u64) -> (Vec<Sample>, Vec<Sample>) {
    let n = samples.len();
    let n_val = ((n as f64 * fraction).round() as usize).min(n - 1);
    if n_val == 0 {
        return (samples.to_vec(), Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = vec![false; n];
    order[..n_val].iter().for_each(|&i| is_val[i] = true);
    let (val, fit): (Vec<_>, Vec<_>) = samples.iter().cloned().zip(is_val).partition(|(_, v)| *v);
    (
        fit.into_iter().map(|(s, _)| s).collect(),
        val.into_iter().map(|(s, _)| s).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of the batch MSE; independent of backprop.
    fn numerical_gradients(net: &Network, batch: &[Sample], step: f64) -> Vec<f64> {
        let params = net.parameters();
        let mut probe = net.clone();
        (0..params.len())
            .map(|i| {
                let mut p = params.clone();
                p[i] = params[i] + step;
                probe.set_parameters(&p).unwrap();
                let up = probe.batch_mse(batch).unwrap();
                p[i] = params[i] - step;
                probe.set_parameters(&p).unwrap();
                let down = probe.batch_mse(batch).unwrap();
                (up - down) / (2.0 * step)
            })
            .collect()
    }

    fn random_batch(n: usize, n_in: usize, n_out: usize, seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Sample::new(
                    (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    (0..n_out).map(|_| rng.gen_range(-0.8..0.8)).collect(),
                )
            })
            .collect()
    }

    fn xor() -> Vec<Sample> {
        [(0.0, 0.0, 0.0), (0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 0.0)]
            .into_iter()
            .map(|(a, b, t)| Sample::new(vec![a, b], vec![t]))
            .collect()
    }

    fn xor_config() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.5,
            momentum: 0.9,
            max_iterations: 2000,
            validation_fraction: 0.0,
            seed: 42,
            ..TrainConfig::default()
        }
    }

    fn xor_spec() -> NetworkSpec {
        NetworkSpec::new(2, 4, 1, Activation::Linear).unwrap()
    }

    #[test]
    fn tansig_values() {
        assert_eq!(tansig(0.0), 0.0);
        assert_eq!(tansig(40.0), 1.0);
        assert_eq!(tansig(-40.0), -1.0);
        assert!((tansig(1.0) - 0.7615941559557649).abs() < 1e-12);
        assert!((tansig(0.37) - 0.37f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn tansig_prime_matches_finite_difference() {
        assert_eq!(tansig_prime(0.0), 1.0);
        assert_eq!(tansig_prime(1.0), 0.0);
        assert_eq!(tansig_prime(-1.0), 0.0);
        let h = 1e-6;
        let numeric = (tansig(1.0 + h) - tansig(1.0 - h)) / (2.0 * h);
        let analytic = tansig_prime(tansig(1.0));
        assert!((numeric - analytic).abs() < 1e-8);
        assert!((analytic - 0.41997).abs() < 1e-5);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let spec = NetworkSpec::default();
        let a = Network::init(spec, 9);
        assert_eq!(a, Network::init(spec, 9));
        assert_ne!(a, Network::init(spec, 10));
        let r = 1.0 / 12f64.sqrt();
        assert!(a.w1().iter().all(|w| w.abs() <= r));
        assert!(a.w2().iter().all(|w| w.abs() <= 1.0 / 20f64.sqrt()));
        assert!(a.b1().iter().chain(a.b2()).all(|&b| b == 0.0));
        let thin = Network::init(NetworkSpec::new(12, 1, 1, Activation::TanSigmoid).unwrap(), 9);
        assert_eq!(thin.w1().len(), 12);
        assert_eq!(thin.b1().len(), 1);
    }

    #[test]
    fn zero_network_outputs() {
        let net = Network::zeros(NetworkSpec::default());
        assert_eq!(net.predict(&[0.3; 12]).unwrap(), vec![0.0]);
        let mut linear = Network::zeros(NetworkSpec::new(12, 20, 1, Activation::Linear).unwrap());
        linear.b2[0] = 0.5;
        assert_eq!(linear.predict(&[0.3; 12]).unwrap(), vec![0.5]);
        assert!(matches!(
            net.forward(&[0.0; 3]),
            Err(Error::Dimension {
                expected: 12,
                actual: 3
            })
        ));
    }

    #[test]
    fn hand_set_two_two_one_network() {
        let mut net = Network::zeros(NetworkSpec::new(2, 2, 1, Activation::TanSigmoid).unwrap());
        net.set_parameters(&[0.5, -0.25, 1.0, 2.0, 0.1, -0.3, 0.7, -1.2, 0.05])
            .unwrap();
        let x = [0.4, -0.6];
        let h0 = (0.5 * 0.4 - 0.25 * -0.6 + 0.1f64).tanh();
        let h1 = (1.0 * 0.4 + 2.0 * -0.6 - 0.3f64).tanh();
        let y = (0.7 * h0 - 1.2 * h1 + 0.05f64).tanh();
        let f = net.forward(&x).unwrap();
        assert!((f.hidden[0] - h0).abs() < 1e-12);
        assert!((f.hidden[1] - h1).abs() < 1e-12);
        assert!((f.output[0] - y).abs() < 1e-12);
        assert_eq!(net.predict(&x).unwrap(), f.output);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[vec![0.2, 0.3]], &[vec![0.2, 0.3]]).unwrap(), 0.0);
        assert_eq!(mse(&[vec![0.0]], &[vec![1.0]]).unwrap(), 1.0);
        assert_eq!(mse(&[vec![0.0], vec![1.0]], &[vec![1.0], vec![0.0]]).unwrap(), 1.0);
        assert!(mse(&[vec![0.0]], &[vec![1.0], vec![0.0]]).is_err());
        assert!(mse(&[vec![0.0, 1.0]], &[vec![1.0]]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let net = Network::init(NetworkSpec::default(), seed);
            let batch = random_batch(5, 12, 1, seed + 100);
            let analytic = net.backprop_gradients(&batch).unwrap().flatten();
            let numeric = numerical_gradients(&net, &batch, 1e-6);
            for (a, n) in analytic.iter().zip(&numeric) {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
                assert!(rel < 1e-6, "seed {seed}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn gradients_vanish_at_exact_fit() {
        let net = Network::init(NetworkSpec::default(), 3);
        let batch: Vec<Sample> = random_batch(4, 12, 1, 5)
            .into_iter()
            .map(|s| {
                let y = net.predict(&s.input).unwrap();
                Sample::new(s.input, y)
            })
            .collect();
        assert!(net
            .backprop_gradients(&batch)
            .unwrap()
            .flatten()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let net = Network::init(NetworkSpec::default(), 4);
        let batch = random_batch(5, 12, 1, 6);
        let doubled: Vec<Sample> = batch.iter().chain(&batch).cloned().collect();
        let a = net.backprop_gradients(&batch).unwrap().flatten();
        let b = net.backprop_gradients(&doubled).unwrap().flatten();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
        }
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let net = Network::init(NetworkSpec::default(), 1);
        let config = TrainConfig {
            learning_rate: 0.0,
            max_iterations: 25,
            validation_fraction: 0.0,
            ..TrainConfig::default()
        };
        let (trained, report) = train(&net, &random_batch(10, 12, 1, 2), &config).unwrap();
        assert_eq!(trained, net);
        assert_eq!(report.stopped_at_epoch, 25);
    }

    #[test]
    fn single_iteration_cap() {
        let net = Network::init(NetworkSpec::default(), 1);
        let config = TrainConfig {
            max_iterations: 1,
            ..TrainConfig::default()
        };
        let (_, report) = train(&net, &random_batch(20, 12, 1, 2), &config).unwrap();
        assert_eq!(report.stopped_at_epoch, 1);
        assert_eq!(report.stop_reason, StopReason::MaxIterations);
        assert_eq!(report.train_mse.len(), 1);
        assert_eq!(report.validation_mse.as_ref().unwrap().len(), 1);
    }

    #[test]
    fn empty_training_set_fails() {
        let net = Network::init(NetworkSpec::default(), 1);
        assert!(matches!(
            train(&net, &[], &TrainConfig::default()),
            Err(Error::EmptyTrainingSet)
        ));
    }

    #[test]
    fn goal_stops_training() {
        let net = Network::init(xor_spec(), 42);
        let config = TrainConfig {
            mse_goal: 0.05,
            ..xor_config()
        };
        let (_, report) = train(&net, &xor(), &config).unwrap();
        assert_eq!(report.stop_reason, StopReason::GoalReached);
        assert!(*report.train_mse.last().unwrap() <= 0.05);
        assert_eq!(report.best_epoch, report.stopped_at_epoch);
    }

    #[test]
    fn xor_is_learned() {
        let net = Network::init(xor_spec(), 42);
        let (trained, report) = train(&net, &xor(), &xor_config()).unwrap();
        assert!(*report.train_mse.last().unwrap() < 0.01);
        let y = trained.predict(&[1.0, 0.0]).unwrap()[0];
        assert!((y - 1.0).abs() < 0.15, "{y}");
    }

    #[test]
    fn small_step_does_not_increase_loss() {
        for seed in 0..10 {
            let mut net = Network::init(NetworkSpec::default(), seed);
            let batch = random_batch(8, 12, 1, seed + 50);
            let before = net.batch_mse(&batch).unwrap();
            let grads = net.backprop_gradients(&batch).unwrap();
            let config = TrainConfig {
                learning_rate: 1e-4,
                momentum: 0.0,
                ..TrainConfig::default()
            };
            net.step(&mut Gradients::zeros(net.spec()), &grads, &config);
            assert!(net.batch_mse(&batch).unwrap() <= before);
        }
    }

    #[test]
    fn early_stopping_returns_best_epoch_weights() {
        // noisy targets on few samples make validation error turn upward
        let batch = random_batch(30, 12, 1, 77);
        let net = Network::init(NetworkSpec::default(), 5);
        let config = TrainConfig {
            learning_rate: 0.2,
            validation_fraction: 0.3,
            ..TrainConfig::default()
        };
        let (trained, report) = train(&net, &batch, &config).unwrap();
        assert_eq!(report.stop_reason, StopReason::PatienceExhausted);
        let val = report.validation_mse.as_ref().unwrap();
        let best = val[report.best_epoch - 1];
        assert!(val[report.best_epoch..].iter().all(|&v| v >= best));
        assert_eq!(report.stopped_at_epoch - report.best_epoch, config.patience);

        let (fit, held) = hold_out(&batch, 0.3, config.seed);
        assert_eq!(fit.len() + held.len(), 30);
        assert_eq!(trained.batch_mse(&held).unwrap(), best);
    }

    #[test]
    fn training_is_deterministic() {
        let batch = random_batch(30, 12, 1, 8);
        let net = Network::init(NetworkSpec::default(), 8);
        let config = TrainConfig::default();
        assert_eq!(
            train(&net, &batch, &config).unwrap(),
            train(&net, &batch, &config).unwrap()
        );
    }

    #[test]
    fn report_csv_layout() {
        let report = TrainReport {
            train_mse: vec![0.5, 0.25],
            validation_mse: Some(vec![0.75, 0.125]),
            stop_reason: StopReason::MaxIterations,
            stopped_at_epoch: 2,
            best_epoch: 2,
        };
        assert_eq!(report.to_csv(), "epoch,train_mse,val_mse\n1,0.5,0.75\n2,0.25,0.125\n");
        let no_val = TrainReport {
            validation_mse: None,
            ..report
        };
        assert_eq!(no_val.to_csv(), "epoch,train_mse,val_mse\n1,0.5,\n2,0.25,\n");
    }

    #[test]
    fn model_text_round_trips() {
        let net = Network::init(NetworkSpec::new(3, 4, 2, Activation::Linear).unwrap(), 11);
        let text = net.to_text();
        assert!(text.starts_with("mlpv1,3,4,2,linear\n"));
        let back = Network::from_text(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_text(), text);
        assert!(Network::from_text("mlpv1,3,4,2,linear\n1,2,3\n").is_err());
        assert!(Network::from_text("mlpv2,3,4,2,linear\n").is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn tansig_is_bounded_and_odd(n in -18.0f64..18.0) {
            prop_assert!(tansig(n).abs() < 1.0);
            prop_assert!((tansig(-n) + tansig(n)).abs() <= 1e-15);
        }

        #[test]
        fn model_round_trip(seed in any::<u64>(), hidden in 1usize..6, linear in any::<bool>()) {
            let act = if linear { Activation::Linear } else { Activation::TanSigmoid };
            let net = Network::init(NetworkSpec::new(12, hidden, 1, act).unwrap(), seed);
            prop_assert_eq!(Network::from_text(&net.to_text()).unwrap(), net);
        }
    }
}
