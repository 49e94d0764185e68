//! The shared classifier: forward pass, categorical cross-entropy, exact
//! gradients, minibatch SGD and evaluation.

mod arch;
pub mod checkpoint;
mod network;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

pub use arch::{LayerSlot, ModelArch};
use network::Workspace;

use crate::error::{FlccError, Result};
use crate::rng::{self, SimRng};

/// Probabilities are clamped to this floor inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Normalized inputs with integer labels, stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Examples {
    dim: usize,
    inputs: Vec<f64>,
    labels: Vec<usize>,
}

impl Examples {
    pub fn new(dim: usize) -> Self {
        Examples {
            dim,
            inputs: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(FlccError::InvalidInput(format!(
                "{} inputs but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut ex = Examples::new(dim);
        for (row, label) in rows.into_iter().zip(labels) {
            ex.push(&row, label)?;
        }
        Ok(ex)
    }

    pub fn push(&mut self, input: &[f64], label: usize) -> Result<()> {
        if input.len() != self.dim {
            return Err(FlccError::InvalidInput(format!(
                "input has {} values, expected {}",
                input.len(),
                self.dim
            )));
        }
        self.inputs.extend_from_slice(input);
        self.labels.push(label);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> Examples {
        let mut out = Examples::new(self.dim);
        for &i in indices {
            out.inputs.extend_from_slice(self.input(i));
            out.labels.push(self.labels[i]);
        }
        out
    }

    /// The set concatenated with itself.
    pub fn doubled(&self) -> Examples {
        let idx: Vec<usize> = (0..self.len()).chain(0..self.len()).collect();
        self.subset(&idx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub values: Vec<f64>,
    pub arch: ModelArch,
}

impl ModelParams {
    pub fn zeros(arch: &ModelArch) -> Self {
        ModelParams {
            values: vec![0.0; arch.param_count()],
            arch: arch.clone(),
        }
    }

    pub fn from_values(arch: &ModelArch, values: Vec<f64>) -> Result<Self> {
        if values.len() != arch.param_count() {
            return Err(FlccError::InvalidInput(format!(
                "{} parameters for architecture {arch} with {}",
                values.len(),
                arch.param_count()
            )));
        }
        Ok(ModelParams {
            values,
            arch: arch.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.05,
            batch_size: 20,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(FlccError::param(
                "learning_rate",
                format!("must be > 0, got {}", self.learning_rate),
            ));
        }
        if self.batch_size == 0 {
            return Err(FlccError::param("batch_size", "must be >= 1"));
        }
        Ok(())
    }

    /// Local steps per round: `floor(|O_i| / B_i)`, at least one.
    pub fn local_steps(&self, samples: usize) -> usize {
        (samples / self.batch_size).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub node_id: usize,
    pub params: ModelParams,
    /// Full-set gradient at the post-training parameters.
    pub gradient: Vec<f64>,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

/// Xavier-uniform weights in `[-s, s]`, `s = sqrt(6 / (fan_in + fan_out))`,
/// and zero biases.
pub fn init_model(arch: &ModelArch, seed: u64) -> Result<ModelParams> {
    arch.validate()?;
    let mut rng = rng::substream(seed, &[rng::domain::INIT]);
    let mut params = ModelParams::zeros(arch);
    for slot in arch.layers() {
        let s = (6.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
        for w in &mut params.values[slot.weight_offset..slot.bias_offset] {
            *w = rng.gen_range(-s..=s);
        }
    }
    Ok(params)
}

fn check_input(params: &ModelParams, data: &Examples) -> Result<()> {
    if data.dim() != params.arch.input_len() {
        return Err(FlccError::InvalidInput(format!(
            "inputs have {} values, architecture {} expects {}",
            data.dim(),
            params.arch,
            params.arch.input_len()
        )));
    }
    let classes = params.arch.classes();
    if let Some(bad) = data.labels().iter().find(|&&l| l >= classes) {
        return Err(FlccError::InvalidInput(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Row-wise class probabilities.
pub fn forward(params: &ModelParams, inputs: &Examples) -> Result<Vec<Vec<f64>>> {
    check_input(params, inputs)?;
    let mut ws = Workspace::default();
    Ok((0..inputs.len())
        .map(|i| {
            network::forward(&params.arch, &params.values, inputs.input(i), &mut ws);
            ws.probs.clone()
        })
        .collect())
}

/// Mean of `-ln max(p[label], 1e-12)` over the batch.
pub fn cross_entropy_loss(probs: &[Vec<f64>], labels: &[usize]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| -p[y].max(PROB_FLOOR).ln())
        .sum();
    total / probs.len() as f64
}

fn gradient_indices(params: &ModelParams, data: &Examples, indices: &[usize]) -> Vec<f64> {
    let mut grad = vec![0.0; params.len()];
    let mut ws = Workspace::default();
    let scale = 1.0 / indices.len() as f64;
    for &i in indices {
        let x = data.input(i);
        network::forward(&params.arch, &params.values, x, &mut ws);
        network::backward(&params.arch, &params.values, x, data.label(i), scale, &mut ws, &mut grad);
    }
    grad
}

/// Exact gradient of the mean cross-entropy over `batch`.
pub fn gradient(params: &ModelParams, batch: &Examples) -> Result<Vec<f64>> {
    check_input(params, batch)?;
    if batch.is_empty() {
        return Err(FlccError::InvalidInput("empty batch".into()));
    }
    let all: Vec<usize> = (0..batch.len()).collect();
    Ok(gradient_indices(params, batch, &all))
}

/// `values - learning_rate * gradient`.
pub fn sgd_step(params: &ModelParams, gradient: &[f64], learning_rate: f64) -> Result<ModelParams> {
    if gradient.len() != params.len() {
        return Err(FlccError::InvalidInput(format!(
            "gradient has {} entries, params {}",
            gradient.len(),
            params.len()
        )));
    }
    if let Some(pos) = gradient.iter().position(|g| !g.is_finite()) {
        return Err(FlccError::NumericalDivergence(format!(
            "non-finite gradient entry at index {pos}"
        )));
    }
    let values = params
        .values
        .iter()
        .zip(gradient)
        .map(|(w, g)| w - learning_rate * g)
        .collect();
    Ok(ModelParams {
        values,
        arch: params.arch.clone(),
    })
}

/// One local epoch: `M = floor(n / B)` minibatch steps over a shuffled copy
/// of the data, then the full-set gradient at the resulting parameters.
///
/// A learning rate of zero is accepted here (it leaves the model unchanged).
pub fn local_train(
    node_id: usize,
    params: &ModelParams,
    data: &Examples,
    cfg: &SgdConfig,
    rng: &mut SimRng,
) -> Result<LocalUpdate> {
    check_input(params, data)?;
    if data.is_empty() {
        return Err(FlccError::InvalidInput(format!("node {node_id} has no data")));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate >= 0.0) {
        return Err(FlccError::param("sgd", "batch_size >= 1 and learning_rate >= 0 required"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let steps = cfg.local_steps(data.len());
    let batch = cfg.batch_size.min(data.len());

    let mut current = params.clone();
    for m in 0..steps {
        let idx = &order[m * batch..(m + 1) * batch];
        let g = gradient_indices(&current, data, idx);
        current = sgd_step(&current, &g, cfg.learning_rate)?;
    }
    let all: Vec<usize> = (0..data.len()).collect();
    let gradient = gradient_indices(&current, data, &all);
    if gradient.iter().any(|g| !g.is_finite()) || !current.is_finite() {
        return Err(FlccError::NumericalDivergence(format!(
            "node {node_id} produced non-finite parameters"
        )));
    }
    Ok(LocalUpdate {
        node_id,
        params: current,
        gradient,
        sample_count: data.len(),
    })
}

const EVAL_CHUNK: usize = 256;

/// Mean cross-entropy and argmax accuracy. Chunks are reduced in order, so
/// the result is independent of the thread count.
pub fn evaluate(params: &ModelParams, data: &Examples) -> Result<EvalMetrics> {
    check_input(params, data)?;
    if data.is_empty() {
        return Err(FlccError::InvalidInput("empty evaluation set".into()));
    }
    let chunks: Vec<(f64, usize)> = (0..data.len().div_ceil(EVAL_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut ws = Workspace::default();
            let mut loss = 0.0;
            let mut correct = 0;
            for i in c * EVAL_CHUNK..((c + 1) * EVAL_CHUNK).min(data.len()) {
                network::forward(&params.arch, &params.values, data.input(i), &mut ws);
                let y = data.label(i);
                loss -= ws.probs[y].max(PROB_FLOOR).ln();
                if argmax(&ws.probs) == y {
                    correct += 1;
                }
            }
            (loss, correct)
        })
        .collect();
    let (loss, correct) = chunks
        .into_iter()
        .fold((0.0, 0), |(l, c), (dl, dc)| (l + dl, c + dc));
    Ok(EvalMetrics {
        loss: loss / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
    })
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_examples(arch: &ModelArch, n: usize, seed: u64) -> Examples {
        let mut rng = rng::substream(seed, &[99]);
        let mut ex = Examples::new(arch.input_len());
        for _ in 0..n {
            let x: Vec<f64> = (0..arch.input_len()).map(|_| rng.gen::<f64>()).collect();
            ex.push(&x, rng.gen_range(0..arch.classes())).unwrap();
        }
        ex
    }

    fn small_conv() -> ModelArch {
        ModelArch::Conv {
            height: 8,
            width: 8,
            filters: 3,
            kernel: 3,
            pool: 2,
            classes: 4,
        }
    }

    fn small_dense() -> ModelArch {
        ModelArch::Dense {
            inputs: 12,
            hidden: vec![7, 5],
            classes: 3,
        }
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let arch = ModelArch::default_conv();
        let a = init_model(&arch, 3).unwrap();
        let b = init_model(&arch, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_model(&arch, 4).unwrap());
        for slot in arch.layers() {
            assert!(a.values[slot.bias_offset..slot.bias_offset + slot.bias_len].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn init_variance_matches_uniform_moments() {
        let arch = ModelArch::default_dense();
        let p = init_model(&arch, 11).unwrap();
        let slot = arch.layers()[0];
        let w = &p.values[slot.weight_offset..slot.bias_offset];
        let s2 = 6.0 / (784.0 + 64.0);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
        assert!((var - s2 / 3.0).abs() <= 0.2 * s2 / 3.0, "var {var}");
        assert!(w.iter().all(|v| v.abs() <= s2.sqrt()));
    }

    #[test]
    fn zero_dense_net_is_uniform() {
        let arch = ModelArch::default_dense();
        let p = ModelParams::zeros(&arch);
        let x = random_examples(&arch, 3, 1);
        for row in forward(&p, &x).unwrap() {
            assert!(row.iter().all(|&v| (v - 0.1).abs() < 1e-15));
        }
    }

    #[test]
    fn softmax_closed_form_two_classes() {
        // Logits (ln 3, 0) come from bias only.
        let arch = ModelArch::Dense {
            inputs: 1,
            hidden: vec![],
            classes: 2,
        };
        let p = ModelParams::from_values(&arch, vec![0.0, 0.0, 3f64.ln(), 0.0]).unwrap();
        let x = Examples::from_rows(1, vec![vec![0.7]], vec![0]).unwrap();
        let probs = forward(&p, &x).unwrap();
        assert!((probs[0][0] - 0.75).abs() < 1e-12);
        assert!((probs[0][1] - 0.25).abs() < 1e-12);
        let loss = cross_entropy_loss(&probs, &[0]);
        assert!((loss - 0.287_682).abs() < 1e-6);
    }

    #[test]
    fn loss_examples() {
        let uniform = vec![vec![0.1; 10]; 4];
        assert!((cross_entropy_loss(&uniform, &[0, 3, 5, 9]) - 10f64.ln()).abs() < 1e-12);
        let perfect = vec![vec![0.0, 1.0, 0.0]];
        assert_eq!(cross_entropy_loss(&perfect, &[1]), 0.0);
        let zero = vec![vec![1.0, 0.0]];
        assert!((cross_entropy_loss(&zero, &[1]) + PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = init_model(&ModelArch::default_conv(), 0).unwrap();
        let x = Examples::from_rows(5, vec![vec![0.0; 5]], vec![0]).unwrap();
        assert!(matches!(forward(&p, &x), Err(FlccError::InvalidInput(_))));
        assert!(gradient(&p, &x).is_err());
        let mut bad = Examples::new(784);
        bad.push(&[0.0; 784], 12).unwrap();
        assert!(evaluate(&p, &bad).is_err());
    }

    #[test]
    fn one_hot_output_has_zero_logit_gradient() {
        // Huge bias on the true class saturates softmax exactly in f64.
        let arch = ModelArch::Dense {
            inputs: 2,
            hidden: vec![],
            classes: 3,
        };
        let mut v = vec![0.0; arch.param_count()];
        let bias = arch.layers()[0].bias_offset;
        v[bias + 1] = 1000.0;
        let p = ModelParams::from_values(&arch, v).unwrap();
        let x = Examples::from_rows(2, vec![vec![0.3, 0.4]], vec![1]).unwrap();
        let g = gradient(&p, &x).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    fn fd_check(arch: &ModelArch, seed: u64) {
        let mut p = init_model(arch, seed).unwrap();
        let mut rng = rng::substream(seed, &[5]);
        for v in &mut p.values {
            *v += rng.gen_range(-0.1..0.1);
        }
        let x = random_examples(arch, 6, seed);
        let g = gradient(&p, &x).unwrap();
        let loss = |q: &ModelParams| cross_entropy_loss(&forward(q, &x).unwrap(), x.labels());
        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..p.len() {
            let mut a = p.clone();
            a.values[i] += h;
            let mut b = p.clone();
            b.values[i] -= h;
            let fd = (loss(&a) - loss(&b)) / (2.0 * h);
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "{arch}: worst relative error {worst}");
    }

    #[test]
    fn gradient_matches_finite_differences_small_conv() {
        fd_check(&small_conv(), 1);
    }

    #[test]
    fn gradient_matches_finite_differences_small_dense() {
        fd_check(&small_dense(), 2);
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let arch = small_conv();
        let p = init_model(&arch, 4).unwrap();
        let x = random_examples(&arch, 5, 4);
        let g1 = gradient(&p, &x).unwrap();
        let g2 = gradient(&p, &x.doubled()).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn sgd_step_examples() {
        let arch = ModelArch::Dense {
            inputs: 1,
            hidden: vec![],
            classes: 2,
        };
        let p = ModelParams::from_values(&arch, vec![1.0, -2.0, 0.5, 0.0]).unwrap();
        assert_eq!(sgd_step(&p, &[0.0; 4], 0.1).unwrap(), p);
        let q = sgd_step(&p, &[2.0, 0.0, 0.0, 0.0], 0.1).unwrap();
        assert!((q.values[0] - 0.8).abs() < 1e-15);
        assert!(matches!(
            sgd_step(&p, &[f64::NAN, 0.0, 0.0, 0.0], 0.1),
            Err(FlccError::NumericalDivergence(_))
        ));
        assert!(sgd_step(&p, &[0.0; 3], 0.1).is_err());
    }

    proptest! {
        #[test]
        fn two_fixed_steps_equal_one_summed_step(
            w in proptest::collection::vec(-5.0f64..5.0, 4),
            g1 in proptest::collection::vec(-5.0f64..5.0, 4),
            g2 in proptest::collection::vec(-5.0f64..5.0, 4),
            lr in 0.0f64..1.0,
        ) {
            let arch = ModelArch::Dense { inputs: 1, hidden: vec![], classes: 2 };
            let p = ModelParams::from_values(&arch, w).unwrap();
            let two = sgd_step(&sgd_step(&p, &g1, lr).unwrap(), &g2, lr).unwrap();
            let sum: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
            let one = sgd_step(&p, &sum, lr).unwrap();
            for (a, b) in two.values.iter().zip(&one.values) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_rows_normalized(seed in 0u64..1000) {
            let arch = small_conv();
            let mut p = init_model(&arch, seed).unwrap();
            for v in &mut p.values { *v *= 5.0; }
            let x = random_examples(&arch, 3, seed);
            for row in forward(&p, &x).unwrap() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                prop_assert!(row.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn local_train_step_count_and_zero_rate() {
        let arch = small_dense();
        let p = init_model(&arch, 6).unwrap();
        let x = random_examples(&arch, 100, 6);
        let cfg = SgdConfig {
            learning_rate: 0.0,
            batch_size: 20,
        };
        assert_eq!(cfg.local_steps(100), 5);
        assert_eq!(cfg.local_steps(7), 1);
        let mut rng = rng::substream(6, &[]);
        let u = local_train(3, &p, &x, &cfg, &mut rng).unwrap();
        assert_eq!(u.params, p);
        assert_eq!(u.gradient, gradient(&p, &x).unwrap());
        assert_eq!(u.node_id, 3);
        assert_eq!(u.sample_count, 100);
    }

    #[test]
    fn local_train_small_dataset_uses_one_batch() {
        let arch = small_dense();
        let p = init_model(&arch, 7).unwrap();
        let x = random_examples(&arch, 5, 7);
        let cfg = SgdConfig::default();
        let mut rng = rng::substream(7, &[]);
        let u = local_train(0, &p, &x, &cfg, &mut rng).unwrap();
        let expected = sgd_step(&p, &gradient(&p, &x).unwrap(), cfg.learning_rate).unwrap();
        for (a, b) in u.params.values.iter().zip(&expected.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn local_train_is_deterministic() {
        let arch = small_conv();
        let p = init_model(&arch, 8).unwrap();
        let x = random_examples(&arch, 40, 8);
        let run = || {
            let mut rng = rng::substream(8, &[1, 2]);
            local_train(1, &p, &x, &SgdConfig::default(), &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn evaluate_examples() {
        // Perfect classifier via one-hot inputs and a large identity weight.
        let arch = ModelArch::Dense {
            inputs: 3,
            hidden: vec![],
            classes: 3,
        };
        let mut v = vec![0.0; arch.param_count()];
        for c in 0..3 {
            v[c * 3 + c] = 1000.0;
        }
        let p = ModelParams::from_values(&arch, v).unwrap();
        let rows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let x = Examples::from_rows(3, rows, vec![0, 1, 2]).unwrap();
        let m = evaluate(&p, &x).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!(m.loss.abs() < 1e-12);

        // Uniform model on a balanced set: loss ln(10); argmax ties go to
        // class 0, so exactly one class in ten is "correct".
        let arch = ModelArch::default_dense();
        let p = ModelParams::zeros(&arch);
        let mut x = Examples::new(784);
        for i in 0..50 {
            x.push(&[0.5; 784], i % 10).unwrap();
        }
        let m = evaluate(&p, &x).unwrap();
        assert!((m.loss - 10f64.ln()).abs() < 1e-12);
        assert!((m.accuracy - 0.1).abs() < 1e-12);
        assert!(evaluate(&p, &Examples::new(784)).is_err());
    }

    #[test]
    fn accuracy_matches_confusion_matrix_recount() {
        let arch = small_conv();
        let p = init_model(&arch, 12).unwrap();
        let x = random_examples(&arch, 600, 12);
        let probs = forward(&p, &x).unwrap();
        let k = arch.classes();
        let mut confusion = vec![vec![0usize; k]; k];
        for (row, &y) in probs.iter().zip(x.labels()) {
            let mut pred = 0;
            for c in 1..k {
                if row[c] > row[pred] {
                    pred = c;
                }
            }
            confusion[y][pred] += 1;
        }
        let diag: usize = (0..k).map(|c| confusion[c][c]).sum();
        let m = evaluate(&p, &x).unwrap();
        assert_eq!(m.accuracy, diag as f64 / 600.0);
        assert!((m.loss - cross_entropy_loss(&probs, x.labels())).abs() < 1e-12);
    }
}
