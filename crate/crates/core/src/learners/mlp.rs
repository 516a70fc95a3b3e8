//! Fully connected feed-forward regressor trained with mini-batch Adam on
//! mean squared error.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Logistic,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Logistic => a * (1.0 - a),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight decay on the squared weight norm (biases excluded).
    pub l2: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![105, 60, 44, 30],
            activation: Activation::Tanh,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            l2: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `inputs x outputs`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub activation: Activation,
    /// Hidden layers followed by the linear output layer.
    pub layers: Vec<Layer>,
}

/// Per-layer gradients, same shapes as the layers.
pub type Gradients = Vec<Layer>;

impl Network {
    /// Glorot-uniform weights (He-uniform for ReLU), zero biases.
    pub fn init(inputs: usize, hidden: &[usize], activation: Activation, rng: &mut SeededRng) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fi, fo) = (w[0], w[1]);
                let limit = match activation {
                    Activation::Relu => (6.0 / fi.max(1) as f64).sqrt(),
                    _ => (6.0 / (fi + fo) as f64).sqrt(),
                };
                Layer {
                    weights: Array2::from_shape_fn((fi, fo), |_| rng.uniform_in(-limit, limit)),
                    bias: Array1::zeros(fo),
                }
            })
            .collect();
        Self { activation, layers }
    }

    /// A network with every parameter zero.
    pub fn zeros(inputs: usize, hidden: &[usize], activation: Activation) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                weights: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self { activation, layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    fn forward_all(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.to_owned()];
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&l.weights) + &l.bias;
            if i < last {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.forward_all(x).pop().unwrap().column(0).to_owned()
    }

    pub fn forward_row(&self, x: &[f64]) -> f64 {
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = l.bias.to_vec();
            for (k, &ak) in a.iter().enumerate() {
                for (zj, w) in z.iter_mut().zip(l.weights.row(k)) {
                    *zj += ak * w;
                }
            }
            if i < last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            a = z;
        }
        a[0]
    }

    /// Loss `0.5 * mean((f(x) - y)^2) + 0.5 * l2 * |W|^2` and its gradient.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: ArrayView1<f64>, l2: f64) -> (f64, Gradients) {
        let n = x.nrows() as f64;
        let acts = self.forward_all(x);
        let out = acts.last().unwrap().column(0);
        let resid: Array1<f64> = &out - &y;
        let mut loss = 0.5 * resid.dot(&resid) / n;
        let mut delta: Array2<f64> = (resid / n).insert_axis(Axis(1));
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let mut gw = acts[i].t().dot(&delta);
            if l2 > 0.0 {
                loss += 0.5 * l2 * l.weights.iter().map(|w| w * w).sum::<f64>();
                gw.scaled_add(l2, &l.weights);
            }
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&l.weights.t());
                back.zip_mut_with(&acts[i], |d, &a| *d *= self.activation.derivative(a));
                delta = back;
            }
            grads.push(Layer { weights: gw, bias: gb });
        }
        grads.reverse();
        (loss, grads)
    }

    /// All parameters in layer order, weights (row-major) before biases.
    pub fn params_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params_flat(&mut self, p: &[f64]) {
        let mut it = p.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().expect("parameter vector too short");
            }
        }
    }
}

/// Flattens gradients or layers in the same order as [`Network::params_flat`].
pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>())
        .collect()
}

struct Adam {
    m: Vec<Layer>,
    v: Vec<Layer>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(net: &Network) -> Self {
        let z = |l: &Layer| Layer {
            weights: Array2::zeros(l.weights.raw_dim()),
            bias: Array1::zeros(l.bias.len()),
        };
        Self {
            m: net.layers.iter().map(z).collect(),
            v: net.layers.iter().map(z).collect(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Network, grads: &[Layer], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((layer, g), m), v) in net.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = Self::B1 * *m + (1.0 - Self::B1) * g;
                *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            };
            ndarray::Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// Trains a network on already standardized data.
pub fn train(x: ArrayView2<f64>, y: ArrayView1<f64>, p: &MlpParams) -> Result<Network, LearnerError> {
    let mut rng = SeededRng::new(p.seed);
    let mut net = Network::init(x.ncols(), &p.hidden, p.activation, &mut rng);
    let mut adam = Adam::new(&net);
    let n = x.nrows();
    for epoch in 0..p.epochs {
        let order = rng.permutation(n);
        for batch in order.chunks(p.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = y.select(Axis(0), batch);
            let (loss, grads) = net.loss_and_gradient(xb.view(), yb.view(), p.l2);
            if !loss.is_finite() {
                return Err(LearnerError::DivergenceDetected { epoch });
            }
            adam.step(&mut net, &grads, p.learning_rate);
        }
    }
    Ok(net)
}
