use rand::Rng;

use super::params::{Bound, ParamGroup, ParamId, ParamSet};
use crate::tensor::{Graph, TensorError, Var};

pub const DISC_CHANNELS: usize = 16;

/// Three-stage contraction of an N x f matrix to a scalar in (-1, 1):
/// the feature axis to 16 channels, the node axis to 16 channels, then a
/// 16 x 16 filter. tanh follows every stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Subnet {
    /// f x 16
    pub feature: ParamId,
    /// N x 16
    pub node: ParamId,
    /// 16 x 16
    pub filter: ParamId,
}

impl Subnet {
    fn new<R: Rng>(params: &mut ParamSet, name: &str, n: usize, f: usize, rng: &mut R) -> Self {
        let c = DISC_CHANNELS;
        Subnet {
            feature: params.add_glorot(
                format!("{name}.feature"),
                ParamGroup::Discriminator,
                f,
                c,
                rng,
            ),
            node: params.add_glorot(format!("{name}.node"), ParamGroup::Discriminator, n, c, rng),
            filter: params.add_glorot(
                format!("{name}.filter"),
                ParamGroup::Discriminator,
                c,
                c,
                rng,
            ),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Result<Var, TensorError> {
        let s1 = g.matmul(x, p.var(self.feature))?;
        let s1 = g.tanh(s1);
        let node_t = g.transpose(p.var(self.node));
        let s2 = g.matmul(node_t, s1)?;
        let s2 = g.tanh(s2);
        let s3 = g.mul(s2, p.var(self.filter))?;
        let s3 = g.sum(s3);
        Ok(g.tanh(s3))
    }
}

/// Pairwise collaborative critic over (data N x d, representation N x q).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Discriminator {
    /// d x q map that brings data into representation space for the joint branch.
    pub data_proj: ParamId,
    pub upper: Subnet,
    pub lower: Subnet,
    pub joint: Subnet,
    /// Drops the joint branch, scoring the two domains separately.
    pub split: bool,
}

impl Discriminator {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        n: usize,
        d: usize,
        q: usize,
        split: bool,
        rng: &mut R,
    ) -> Self {
        Discriminator {
            data_proj: params.add_glorot("disc.data_proj", ParamGroup::Discriminator, d, q, rng),
            upper: Subnet::new(params, "disc.upper", n, d, rng),
            lower: Subnet::new(params, "disc.lower", n, q, rng),
            joint: Subnet::new(params, "disc.joint", n, q, rng),
            split,
        }
    }

    /// Mean of the active subnetwork scores.
    pub fn score(&self, g: &mut Graph, p: &Bound, data: Var, rep: Var) -> Result<Var, TensorError> {
        let upper = self.upper.forward(g, p, data)?;
        let lower = self.lower.forward(g, p, rep)?;
        let both = g.add(upper, lower)?;
        if self.split {
            return Ok(g.scale(both, 0.5));
        }
        let projected = g.matmul(data, p.var(self.data_proj))?;
        let coupled = g.add(projected, rep)?;
        let joint = self.joint.forward(g, p, coupled)?;
        let all = g.add(both, joint)?;
        Ok(g.scale(all, 1.0 / 3.0))
    }
}
