//! Fully connected network with rectifier hidden layers and a linear output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DeepQError;

/// One dense layer. `weights` is row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
}

/// One regression sample on the action actually taken: the loss is
/// `(Q(x)[action] − target)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QSample {
    pub x: Vec<f64>,
    pub action: usize,
    pub target: f64,
}

/// Reusable activation and delta buffers, so the training loop does not
/// allocate per sample.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

fn check_sizes(sizes: &[usize]) -> Result<(), DeepQError> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(DeepQError::Shape(format!("invalid layer sizes {sizes:?}")));
    }
    Ok(())
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self, DeepQError> {
        check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(Mlp {
            sizes: sizes.to_vec(),
            layers,
        })
    }

    /// Weights uniform in `±√(6 / fan_in)`, biases zero.
    pub fn he_uniform<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, DeepQError> {
        let mut net = Self::zeros(sizes)?;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let bound = (6.0 / sizes[l] as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn from_layers(sizes: Vec<usize>, layers: Vec<Layer>) -> Result<Self, DeepQError> {
        check_sizes(&sizes)?;
        if layers.len() != sizes.len() - 1 {
            return Err(DeepQError::Shape(format!(
                "{} layers for sizes {sizes:?}",
                layers.len()
            )));
        }
        for (l, layer) in layers.iter().enumerate() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            if layer.weights.len() != n_in * n_out || layer.biases.len() != n_out {
                return Err(DeepQError::Shape(format!(
                    "layer {l} should be {n_out}x{n_in} with {n_out} biases"
                )));
            }
            if !layer
                .weights
                .iter()
                .chain(&layer.biases)
                .all(|v| v.is_finite())
            {
                return Err(DeepQError::Shape(format!(
                    "layer {l} has non-finite parameters"
                )));
            }
        }
        Ok(Mlp { sizes, layers })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Parameter slices in the fixed order w₀, b₀, w₁, b₁, ….
    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
    }

    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
    }

    fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for s in self.param_slices_mut() {
            if k < s.len() {
                return &mut s[k];
            }
            k -= s.len();
        }
        panic!("parameter index out of range")
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, DeepQError> {
        if x.len() != self.input_dim() {
            return Err(DeepQError::Dimension {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let mut ws = Workspace::default();
        self.trace(x, &mut ws);
        Ok(ws.acts.pop().expect("at least one layer"))
    }

    /// Output for `x` computed in `ws`'s buffers. Caller checks dimensions.
    pub(crate) fn forward_in<'w>(&self, x: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        self.trace(x, ws);
        &ws.acts[self.layers.len() - 1]
    }

    /// Fills `ws.acts[l]` with the output of layer `l`. Caller checks dimensions.
    fn trace(&self, x: &[f64], ws: &mut Workspace) {
        let last = self.layers.len() - 1;
        ws.acts.resize_with(self.layers.len(), Vec::new);
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = ws.acts.split_at_mut(l);
            let input = if l == 0 { x } else { &before[l - 1] };
            let out = &mut after[0];
            let n_in = input.len();
            out.clear();
            out.extend(layer.biases.iter().enumerate().map(|(o, b)| {
                let row = &layer.weights[o * n_in..(o + 1) * n_in];
                let z = b + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>();
                if l < last {
                    z.max(0.0)
                } else {
                    z
                }
            }));
        }
    }

    /// Adds `∂L/∂θ` into `grad` after [`Self::trace`] on `x`, where the only
    /// non-zero output derivative is `d` at `action`.
    fn backprop(&self, x: &[f64], action: usize, d: f64, ws: &mut Workspace, grad: &mut Mlp) {
        let Workspace { acts, delta, next } = ws;
        delta.clear();
        delta.resize(self.output_dim(), 0.0);
        delta[action] = d;
        for l in (0..self.layers.len()).rev() {
            let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
            let n_in = input.len();
            let g = &mut grad.layers[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * n_in..(o + 1) * n_in];
                for (w, v) in row.iter_mut().zip(input) {
                    *w += d * v;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.layers[l].weights;
            next.clear();
            next.extend((0..n_in).map(|i| {
                if input[i] <= 0.0 {
                    return 0.0;
                }
                delta
                    .iter()
                    .enumerate()
                    .map(|(o, d)| d * w[o * n_in + i])
                    .sum()
            }));
            std::mem::swap(delta, next);
        }
    }

    /// Mean squared error on the taken actions and its gradient.
    pub fn loss_and_grad(&self, batch: &[QSample]) -> Result<(f64, Mlp), DeepQError> {
        for s in batch {
            self.check_sample(s)?;
        }
        let items = batch.iter().map(|s| (s.x.as_slice(), s.action, s.target));
        Ok(self.loss_and_grad_on(items, batch.len(), &mut Workspace::default()))
    }

    /// [`Self::loss_and_grad`] over `(x, action, target)` items that the
    /// caller has already checked.
    pub(crate) fn loss_and_grad_on<'a>(
        &self,
        items: impl Iterator<Item = (&'a [f64], usize, f64)>,
        n: usize,
        ws: &mut Workspace,
    ) -> (f64, Mlp) {
        let mut grad = Mlp::zeros(&self.sizes).expect("sizes already validated");
        let mut loss = 0.0;
        let scale = 1.0 / n.max(1) as f64;
        for (x, action, target) in items {
            self.trace(x, ws);
            let err = ws.acts[self.layers.len() - 1][action] - target;
            loss += err * err;
            self.backprop(x, action, 2.0 * err * scale, ws, &mut grad);
        }
        (loss * scale, grad)
    }

    pub fn loss(&self, batch: &[QSample]) -> Result<f64, DeepQError> {
        let mut ws = Workspace::default();
        let mut loss = 0.0;
        for s in batch {
            self.check_sample(s)?;
            let err = self.forward_in(&s.x, &mut ws)[s.action] - s.target;
            loss += err * err;
        }
        Ok(loss / batch.len().max(1) as f64)
    }

    fn check_sample(&self, s: &QSample) -> Result<(), DeepQError> {
        if s.x.len() != self.input_dim() {
            return Err(DeepQError::Dimension {
                expected: self.input_dim(),
                found: s.x.len(),
            });
        }
        if s.action >= self.output_dim() {
            return Err(DeepQError::Shape(format!("action index {}", s.action)));
        }
        Ok(())
    }
}

/// Worst relative disagreement between the backpropagated gradient and
/// central finite differences (step `1e-5`) over every parameter:
/// `max |g_a − g_n| / max(1e-8, |g_a| + |g_n|)`.
pub fn grad_check(net: &Mlp, batch: &[QSample]) -> Result<f64, DeepQError> {
    const H: f64 = 1e-5;
    let (_, analytic) = net.loss_and_grad(batch)?;
    let analytic: Vec<f64> = analytic.param_slices().flatten().copied().collect();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (k, ga) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(k);
        *probe.param_mut(k) = orig + H;
        let up = probe.loss(batch)?;
        *probe.param_mut(k) = orig - H;
        let down = probe.loss(batch)?;
        *probe.param_mut(k) = orig;
        let gn = (up - down) / (2.0 * H);
        let err = (ga - gn).abs() / (ga.abs() + gn.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
