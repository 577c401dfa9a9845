use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Bound, ParamGroup, ParamId, ParamSet};
use crate::tensor::{Graph, Matrix, TensorError, Var};

type Result<T> = std::result::Result<T, TensorError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Tanh => g.tanh(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Relu => g.relu(x),
            Activation::Identity => x,
        }
    }
}

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
pub fn normalized_adjacency(a: &Matrix) -> Matrix {
    let n = a.rows();
    let with_loops = a.add(&Matrix::identity(n));
    let inv_sqrt: Vec<f64> = with_loops
        .row_sums()
        .iter()
        .map(|d| 1.0 / d.sqrt())
        .collect();
    Matrix::from_fn(n, n, |i, j| {
        inv_sqrt[i] * with_loops.get(i, j) * inv_sqrt[j]
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub activation: Activation,
}

/// Stack of graph convolutions act(Â · H · W).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GcnStack {
    pub layers: Vec<GcnLayer>,
}

impl GcnStack {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        name: &str,
        dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Self {
        assert_eq!(dims.len(), activations.len() + 1);
        let layers = activations
            .iter()
            .enumerate()
            .map(|(i, &activation)| GcnLayer {
                weight: params.add_glorot(
                    format!("{name}.w{i}"),
                    ParamGroup::Generator,
                    dims[i],
                    dims[i + 1],
                    rng,
                ),
                activation,
            })
            .collect();
        GcnStack { layers }
    }

    /// `adj` must already be normalized.
    pub fn forward(&self, g: &mut Graph, p: &Bound, adj: Var, x: Var) -> Result<Var> {
        let mut h = x;
        for layer in &self.layers {
            let prop = g.matmul(adj, h)?;
            let lin = g.matmul(prop, p.var(layer.weight))?;
            h = layer.activation.apply(g, lin);
        }
        Ok(h)
    }
}

/// Two-layer perceptron on a row vector: tanh(x W1 + b1) W2 + b2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mlp2 {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl Mlp2 {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        name: &str,
        group: ParamGroup,
        dims: [usize; 3],
        rng: &mut R,
    ) -> Self {
        Mlp2 {
            w1: params.add_glorot(format!("{name}.w1"), group, dims[0], dims[1], rng),
            b1: params.add(format!("{name}.b1"), group, Matrix::zeros(1, dims[1])),
            w2: params.add_glorot(format!("{name}.w2"), group, dims[1], dims[2], rng),
            b2: params.add(format!("{name}.b2"), group, Matrix::zeros(1, dims[2])),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var> {
        let h = g.matmul(x, p.var(self.w1))?;
        let h = g.add_row(h, p.var(self.b1))?;
        let h = g.tanh(h);
        let o = g.matmul(h, p.var(self.w2))?;
        g.add_row(o, p.var(self.b2))
    }
}
