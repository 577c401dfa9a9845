use crate::model::{ParamId, ParamSet};
use crate::tensor::Matrix;

/// Heavy-ball momentum: v <- mu v - lr g; theta <- theta + v.
#[derive(Clone, Debug, PartialEq)]
pub struct Momentum {
    pub mu: f64,
    velocity: Vec<Option<Matrix>>,
}

impl Momentum {
    pub fn new(mu: f64, n_params: usize) -> Self {
        Momentum {
            mu,
            velocity: vec![None; n_params],
        }
    }

    pub fn velocity(&self, id: ParamId) -> Option<&Matrix> {
        self.velocity[id.index()].as_ref()
    }

    pub fn step(&mut self, params: &mut ParamSet, id: ParamId, grad: &Matrix, lr: f64) {
        let v = self.velocity[id.index()]
            .get_or_insert_with(|| Matrix::zeros(grad.rows(), grad.cols()));
        for (vi, gi) in v.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *vi = self.mu * *vi - lr * gi;
        }
        params.get_mut(id).add_assign(v);
    }
}
