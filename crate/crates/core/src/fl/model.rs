//! One-hidden-layer ReLU MLP with softmax cross-entropy and hand-derived
//! gradients. Parameters live in one flat vector so client deltas can be
//! compared directly by the selection code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimError;
use crate::data::Dataset;

/// Layer sizes. Flattening order: `W1 (hidden x input)`, `b1`, `W2
/// (classes x hidden)`, `b2`, all row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Architecture {
    pub fn new(input: usize, hidden: usize, classes: usize) -> Self {
        Self { input, hidden, classes }
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.input + self.hidden + self.classes * self.hidden + self.classes
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.classes * self.hidden;
        (b1, w2, b2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub params: Vec<f64>,
    pub arch: Architecture,
}

impl GlobalModel {
    pub fn zeros(arch: Architecture) -> Self {
        Self {
            params: vec![0.0; arch.param_count()],
            arch,
        }
    }

    /// He-uniform weights, zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self::zeros(arch);
        let (b1, w2, b2) = arch.offsets();
        let limit1 = (6.0 / arch.input as f64).sqrt();
        let limit2 = (6.0 / arch.hidden as f64).sqrt();
        for w in &mut model.params[..b1] {
            *w = rng.random_range(-limit1..limit1);
        }
        for w in &mut model.params[w2..b2] {
            *w = rng.random_range(-limit2..limit2);
        }
        model
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self, SimError> {
        if params.len() != arch.param_count() {
            return Err(SimError::ParamCount {
                expected: arch.param_count(),
                got: params.len(),
            });
        }
        Ok(Self { params, arch })
    }

    pub fn check_data(&self, data: &Dataset) -> Result<(), SimError> {
        if data.dims != self.arch.input || data.classes > self.arch.classes {
            return Err(SimError::ShapeMismatch {
                model_input: self.arch.input,
                model_classes: self.arch.classes,
                data_dims: data.dims,
                data_classes: data.classes,
            });
        }
        Ok(())
    }
}

/// Scratch buffers reused across samples.
struct Workspace {
    hidden: Vec<f64>,
    logits: Vec<f64>,
    dhidden: Vec<f64>,
}

impl Workspace {
    fn new(arch: &Architecture) -> Self {
        Self {
            hidden: vec![0.0; arch.hidden],
            logits: vec![0.0; arch.classes],
            dhidden: vec![0.0; arch.hidden],
        }
    }
}

/// Forward pass; leaves hidden activations and logits in `ws`.
fn forward(params: &[f64], arch: &Architecture, x: &[f64], ws: &mut Workspace) {
    let (b1, w2, b2) = arch.offsets();
    ws.hidden.copy_from_slice(&params[b1..w2]);
    // Inputs are mostly zero for image data; accumulate column-wise.
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        for (h, acc) in ws.hidden.iter_mut().enumerate() {
            *acc += params[h * arch.input + k] * xk;
        }
    }
    for h in ws.hidden.iter_mut() {
        *h = h.max(0.0);
    }
    for c in 0..arch.classes {
        let row = &params[w2 + c * arch.hidden..w2 + (c + 1) * arch.hidden];
        ws.logits[c] = params[b2 + c] + row.iter().zip(&ws.hidden).map(|(w, h)| w * h).sum::<f64>();
    }
}

/// Converts logits in place to probabilities and returns `-ln p[label]`.
fn softmax_xent(logits: &mut [f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted_label = logits[label] - max;
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    for l in logits.iter_mut() {
        *l /= total;
    }
    total.ln() - shifted_label
}

/// Mean cross-entropy over `indices` of `data` and its gradient.
pub fn loss_and_grad(model: &GlobalModel, data: &Dataset, indices: &[usize]) -> (f64, Vec<f64>) {
    let arch = model.arch;
    let params = &model.params;
    let (b1, w2, b2) = arch.offsets();
    let mut grad = vec![0.0; arch.param_count()];
    let mut ws = Workspace::new(&arch);
    let mut loss = 0.0;

    for &i in indices {
        let x = data.row(i);
        let label = data.labels[i];
        forward(params, &arch, x, &mut ws);
        loss += softmax_xent(&mut ws.logits, label);
        ws.logits[label] -= 1.0;
        let dlogits = &ws.logits;

        ws.dhidden.iter_mut().for_each(|d| *d = 0.0);
        for c in 0..arch.classes {
            let dl = dlogits[c];
            grad[b2 + c] += dl;
            let row = w2 + c * arch.hidden;
            for h in 0..arch.hidden {
                grad[row + h] += dl * ws.hidden[h];
                ws.dhidden[h] += dl * params[row + h];
            }
        }
        for h in 0..arch.hidden {
            if ws.hidden[h] <= 0.0 {
                continue;
            }
            let dh = ws.dhidden[h];
            grad[b1 + h] += dh;
            let row = h * arch.input;
            for (k, &xk) in x.iter().enumerate() {
                if xk != 0.0 {
                    grad[row + k] += dh * xk;
                }
            }
        }
    }

    let scale = 1.0 / indices.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    (loss * scale, grad)
}

/// Predicted class per sample; ties go to the lowest class index.
pub fn predict(model: &GlobalModel, x: &[f64]) -> usize {
    let mut ws = Workspace::new(&model.arch);
    forward(&model.params, &model.arch, x, &mut ws);
    argmax(&ws.logits)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Accuracy and mean cross-entropy over a whole dataset.
pub(crate) fn accuracy_and_loss(model: &GlobalModel, data: &Dataset) -> (f64, f64) {
    let mut ws = Workspace::new(&model.arch);
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..data.len() {
        forward(&model.params, &model.arch, data.row(i), &mut ws);
        if argmax(&ws.logits) == data.labels[i] {
            correct += 1;
        }
        loss += softmax_xent(&mut ws.logits, data.labels[i]);
    }
    let n = data.len() as f64;
    (correct as f64 / n, loss / n)
}
