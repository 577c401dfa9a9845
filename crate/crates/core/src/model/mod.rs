//! Trainable networks: GCN generators G1/G2, FV encoder S and decoder S',
//! classifiers C1/C2, the pairwise discriminator and the hypergraph fusion
//! weight, all stored in one [`ParamSet`].

mod discriminator;
mod layers;
mod params;

pub use discriminator::{Discriminator, Subnet, DISC_CHANNELS};
pub use layers::{normalized_adjacency, Activation, GcnLayer, GcnStack, Mlp2};
pub use params::{Bound, Param, ParamGroup, ParamId, ParamSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Subject;
use crate::tensor::{Graph, Matrix, TensorError, Var};

pub type Result<T> = std::result::Result<T, TensorError>;

/// Axis C1 averages over before its MLP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum C1Axis {
    /// Mean over the q features of each node; the MLP sees N inputs.
    #[default]
    Feature,
    /// Mean over the N nodes; the MLP sees q inputs.
    Node,
}

fn default_c1_hidden() -> usize {
    16
}

fn default_c2_hidden() -> usize {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_rois: usize,
    pub fts_dim: usize,
    pub latent_dim: usize,
    /// GCN hidden width; defaults to the latent dim.
    #[serde(default)]
    pub hidden: Option<usize>,
    #[serde(default = "default_c1_hidden")]
    pub c1_hidden: usize,
    #[serde(default = "default_c2_hidden")]
    pub c2_hidden: usize,
    #[serde(default)]
    pub c1_axis: C1Axis,
    #[serde(default)]
    pub split_discriminator: bool,
}

impl ModelConfig {
    pub fn new(n_rois: usize, fts_dim: usize, latent_dim: usize) -> Self {
        ModelConfig {
            n_rois,
            fts_dim,
            latent_dim,
            hidden: None,
            c1_hidden: default_c1_hidden(),
            c2_hidden: default_c2_hidden(),
            c1_axis: C1Axis::Feature,
            split_discriminator: false,
        }
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden.unwrap_or(self.latent_dim)
    }
}

/// Parameter handles of every network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Networks {
    pub g1: GcnStack,
    pub g2: GcnStack,
    pub s: GcnStack,
    pub s_dec: GcnStack,
    pub c1: Mlp2,
    pub disc: Discriminator,
    /// 2q x q.
    pub fusion_w: ParamId,
    pub c2: Mlp2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub cfg: ModelConfig,
    pub nets: Networks,
    pub params: ParamSet,
}

impl Model {
    /// Glorot-initialized model; the same seed gives the same weights.
    pub fn new(cfg: ModelConfig, seed: u64) -> Model {
        use Activation::{Sigmoid, Tanh};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, d, q, h) = (cfg.n_rois, cfg.fts_dim, cfg.latent_dim, cfg.hidden_width());
        let mut params = ParamSet::new();
        let g1 = GcnStack::new(&mut params, "g1", &[d, h, q], &[Tanh, Tanh], &mut rng);
        let g2 = GcnStack::new(&mut params, "g2", &[q, h, d], &[Tanh, Sigmoid], &mut rng);
        let s = GcnStack::new(&mut params, "s", &[q, h, q], &[Tanh, Tanh], &mut rng);
        let s_dec = GcnStack::new(&mut params, "s_dec", &[q, h, q], &[Tanh, Sigmoid], &mut rng);
        let c1_in = match cfg.c1_axis {
            C1Axis::Feature => n,
            C1Axis::Node => q,
        };
        let c1 = Mlp2::new(
            &mut params,
            "c1",
            ParamGroup::Generator,
            [c1_in, cfg.c1_hidden, 2],
            &mut rng,
        );
        let disc = Discriminator::new(&mut params, n, d, q, cfg.split_discriminator, &mut rng);
        let fusion_w = params.add_glorot("hpn.fusion_w", ParamGroup::Hpn, 2 * q, q, &mut rng);
        let c2 = Mlp2::new(
            &mut params,
            "c2",
            ParamGroup::Hpn,
            [n * n, cfg.c2_hidden, 2],
            &mut rng,
        );
        Model {
            nets: Networks {
                g1,
                g2,
                s,
                s_dec,
                c1,
                disc,
                fusion_w,
                c2,
            },
            cfg,
            params,
        }
    }

    /// Replaces the parameter values, keeping the architecture. Shapes must match.
    pub fn with_params(&self, params: ParamSet) -> Model {
        assert_eq!(params.len(), self.params.len());
        for (id, p) in params.iter() {
            assert_eq!(
                p.value.shape(),
                self.params.get(id).shape(),
                "parameter {}",
                p.name
            );
        }
        Model {
            cfg: self.cfg.clone(),
            nets: self.nets.clone(),
            params,
        }
    }
}

/// Per-subject matrices in tape-ready form.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    pub sc: Matrix,
    pub adj_norm: Matrix,
    pub fts: Matrix,
    /// 1 x q.
    pub fv: Matrix,
    pub label: usize,
}

impl GraphInput {
    pub fn from_subject(s: &Subject) -> Self {
        GraphInput {
            adj_norm: normalized_adjacency(&s.sc),
            sc: s.sc.clone(),
            fts: s.fts.clone(),
            fv: Matrix::row_vector(&s.fv),
            label: s.label,
        }
    }
}

impl Networks {
    /// Ẑ = G1(A, X), N x q.
    pub fn encode_fts(&self, g: &mut Graph, p: &Bound, adj: Var, x: Var) -> Result<Var> {
        self.g1.forward(g, p, adj, x)
    }

    /// G2(A, Z) in (0, 1), N x d.
    pub fn decode_fts(&self, g: &mut Graph, p: &Bound, adj: Var, z: Var) -> Result<Var> {
        self.g2.forward(g, p, adj, z)
    }

    /// V̂ = S(A, V broadcast to every node), N x q.
    pub fn encode_fv(&self, g: &mut Graph, p: &Bound, adj: Var, v: Var) -> Result<Var> {
        let n = g.shape(adj).0;
        let rows = g.broadcast_rows(v, n)?;
        self.s.forward(g, p, adj, rows)
    }

    /// S'(A, V̂) averaged over nodes, 1 x q in (0, 1).
    pub fn decode_fv(&self, g: &mut Graph, p: &Bound, adj: Var, vhat: Var) -> Result<Var> {
        let h = self.s_dec.forward(g, p, adj, vhat)?;
        Ok(g.col_mean(h))
    }

    /// 1 x 2 logits of C1 on a representation.
    pub fn classify_c1(&self, g: &mut Graph, p: &Bound, rep: Var, axis: C1Axis) -> Result<Var> {
        let pooled = match axis {
            C1Axis::Feature => {
                let m = g.row_mean(rep);
                g.transpose(m)
            }
            C1Axis::Node => g.col_mean(rep),
        };
        self.c1.forward(g, p, pooled)
    }

    pub fn discriminate(&self, g: &mut Graph, p: &Bound, data: Var, rep: Var) -> Result<Var> {
        self.disc.score(g, p, data, rep)
    }
}

/// σ(Ẑ Ẑᵀ), the inner-product decoder.
pub fn reconstruct_adj(g: &mut Graph, zhat: Var) -> Result<Var> {
    let t = g.transpose(zhat);
    let gram = g.matmul(zhat, t)?;
    Ok(g.sigmoid(gram))
}
