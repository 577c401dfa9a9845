//! Alternating adversarial optimization with a staged HPN phase.
//!
//! Each step runs, in order: one discriminator update on L_D (then weight
//! clipping), one update of G1/G2/S/S'/C1 on L_G + Rec + Cls1 + Cls2, and,
//! once the HPN learning rate is positive, one update of the fusion weight
//! and C2 on Cls3 + λ·Sparse.

mod checkpoint;
mod config;
mod cv;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FILE};
pub use config::{lr_schedule, PriorMode, Rates, TrainConfig};
pub use cv::{
    cross_validate, cross_validate_with, fold_seeds, run_fold, CvConfig, CvResult, FoldResult,
};
pub use optim::Momentum;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::hpn::{hpn_forward, HpnError, HpnOutput};
use crate::losses::{adv_losses, cross_entropy, rec_loss, sparse_loss, LossError, LossReport};
use crate::model::{reconstruct_adj, Bound, GraphInput, Model, ModelConfig, ParamGroup, ParamSet};
use crate::prior::{sample_z, PriorError, PriorModel};
use crate::tensor::{Graph, Matrix, TensorError, Var};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite {phase} loss; first non-finite tensor is node {node} ({op}{})", label.as_ref().map(|l| format!(", {l}")).unwrap_or_default())]
    NonFinite {
        phase: &'static str,
        node: usize,
        op: &'static str,
        label: Option<String>,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Hpn(#[from] HpnError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// One optimization step's bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub rates: Rates,
    pub report: LossReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Best {
    pub epoch: usize,
    pub loss: f64,
    pub params: ParamSet,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub model: Model,
    pub cfg: TrainConfig,
    pub opt: Momentum,
    /// Epoch currently being trained.
    pub epoch: usize,
    /// HPN steps taken since the breakpoint.
    pub hpn_iter: usize,
    /// Total HPN steps the schedule decays over.
    pub max_hpn_iter: usize,
    pub rng: ChaCha8Rng,
    pub history: Vec<StepRecord>,
    /// Mean report per finished epoch.
    pub epoch_losses: Vec<LossReport>,
    /// Lowest epoch-mean total loss from the breakpoint on.
    pub best: Option<Best>,
}

impl TrainState {
    /// Fresh state; discriminator weights start clipped.
    pub fn new(
        model_cfg: ModelConfig,
        cfg: TrainConfig,
        n_train: usize,
    ) -> Result<Self, TrainError> {
        cfg.validate().map_err(TrainError::Config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut model = Model::new(model_cfg, rng.random());
        model.params.clip_group(ParamGroup::Discriminator, cfg.clip);
        let steps_per_epoch = n_train.div_ceil(cfg.batch_size);
        let max_hpn_iter = (cfg.epochs - cfg.breakpoint()) * steps_per_epoch;
        Ok(TrainState {
            opt: Momentum::new(cfg.momentum, model.params.len()),
            model,
            cfg,
            epoch: 0,
            hpn_iter: 0,
            max_hpn_iter,
            rng,
            history: Vec::new(),
            epoch_losses: Vec::new(),
            best: None,
        })
    }

    pub fn rates(&self) -> Rates {
        lr_schedule(&self.cfg, self.epoch, self.hpn_iter, self.max_hpn_iter)
    }

    /// The retained checkpoint, or the current weights if none was kept.
    pub fn best_model(&self) -> Model {
        match &self.best {
            Some(b) => self.model.with_params(b.params.clone()),
            None => self.model.clone(),
        }
    }
}

/// Tape nodes of one subject's forward pass.
struct SubjectVars {
    zhat: Var,
    vhat: Var,
    /// Discriminator scores (real, G2(Z), G1, S) when adversarial.
    scores: Option<[Var; 4]>,
}

fn check_finite(g: &Graph, loss: Var, phase: &'static str) -> Result<(), TrainError> {
    if g.value(loss).is_finite() {
        return Ok(());
    }
    let (node, op, label) = g.first_non_finite().unwrap_or((loss.index(), "loss", None));
    Err(TrainError::NonFinite {
        phase,
        node,
        op,
        label: label.map(str::to_string),
    })
}

fn batch_mean(g: &mut Graph, vars: &[Var]) -> Result<Var, TrainError> {
    let mut acc = vars[0];
    for &v in &vars[1..] {
        acc = g.add(acc, v)?;
    }
    Ok(g.scale(acc, 1.0 / vars.len() as f64))
}

/// Ẑ, V̂ and, when `z` is given, the four discriminator scores.
fn encode(
    g: &mut Graph,
    p: &Bound,
    model: &Model,
    inp: &GraphInput,
    z: Option<&Matrix>,
) -> Result<(SubjectVars, Var, Var), TrainError> {
    let nets = &model.nets;
    let adj = g.constant(inp.adj_norm.clone());
    let x = g.constant(inp.fts.clone());
    let v = g.constant(inp.fv.clone());
    let zhat = nets.encode_fts(g, p, adj, x)?;
    let vhat = nets.encode_fv(g, p, adj, v)?;
    let scores = match z {
        Some(z) => {
            let zv = g.constant(z.clone());
            let x_fake = nets.decode_fts(g, p, adj, zv)?;
            Some([
                nets.discriminate(g, p, x, zv)?,
                nets.discriminate(g, p, x_fake, zv)?,
                nets.discriminate(g, p, x, zhat)?,
                nets.discriminate(g, p, x, vhat)?,
            ])
        }
        None => None,
    };
    Ok((SubjectVars { zhat, vhat, scores }, adj, x))
}

fn score_means(g: &mut Graph, subjects: &[SubjectVars]) -> Result<[Var; 5], TrainError> {
    let pick = |i: usize| -> Vec<Var> {
        subjects
            .iter()
            .map(|s| s.scores.expect("adversarial pass")[i])
            .collect()
    };
    let real = batch_mean(g, &pick(0))?;
    Ok([
        real,
        real,
        batch_mean(g, &pick(1))?,
        batch_mean(g, &pick(2))?,
        batch_mean(g, &pick(3))?,
    ])
}

fn apply_grads(state: &mut TrainState, g: &Graph, p: &Bound, group: ParamGroup, lr: f64) {
    for id in state.model.params.ids_in(group) {
        if let Some(grad) = g.grad(p.var(id)) {
            let grad = grad.clone();
            state.opt.step(&mut state.model.params, id, &grad, lr);
        }
    }
}

fn sample_latents(
    state: &mut TrainState,
    n: usize,
    count: usize,
    prior: Option<&PriorModel>,
) -> Vec<Matrix> {
    let q = state.model.cfg.latent_dim;
    (0..count)
        .map(|_| match (state.cfg.prior_mode, prior) {
            (PriorMode::Estimated, Some(p)) => sample_z(p, n, &mut state.rng),
            _ => Matrix::from_fn(n, q, |_, _| state.rng.sample(StandardNormal)),
        })
        .collect()
}

/// One alternating update on `batch`; returns the per-term report of the
/// generator-side forward pass.
pub fn train_step(
    state: &mut TrainState,
    batch: &[&GraphInput],
    prior: Option<&PriorModel>,
) -> Result<LossReport, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::Config("empty batch".into()));
    }
    let adversarial = state.cfg.prior_mode != PriorMode::None;
    if state.cfg.prior_mode == PriorMode::Estimated && prior.is_none() {
        return Err(TrainError::Config(
            "prior mode 'estimated' needs a fitted prior".into(),
        ));
    }
    let rates = state.rates();
    let n = state.model.cfg.n_rois;
    let latents = if adversarial {
        sample_latents(state, n, batch.len(), prior)
    } else {
        Vec::new()
    };
    let z_of = |i: usize| if adversarial { Some(&latents[i]) } else { None };

    if adversarial {
        let mut g = Graph::new();
        let p = state
            .model
            .params
            .bind(&mut g, |grp| grp == ParamGroup::Discriminator);
        let mut subjects = Vec::with_capacity(batch.len());
        for (i, inp) in batch.iter().enumerate() {
            subjects.push(encode(&mut g, &p, &state.model, inp, z_of(i))?.0);
        }
        let means = score_means(&mut g, &subjects)?;
        let (l_d, _, _) = adv_losses(&mut g, means)?;
        check_finite(&g, l_d, "discriminator")?;
        g.backward(l_d)?;
        apply_grads(state, &g, &p, ParamGroup::Discriminator, rates.disc);
        state
            .model
            .params
            .clip_group(ParamGroup::Discriminator, state.cfg.clip);
    }

    let mut report = LossReport::default();
    {
        let mut g = Graph::new();
        let p = state
            .model
            .params
            .bind(&mut g, |grp| grp == ParamGroup::Generator);
        let nets = &state.model.nets;
        let axis = state.model.cfg.c1_axis;
        let mut subjects = Vec::with_capacity(batch.len());
        let (mut rec1, mut rec2, mut cls1, mut cls2, mut cls3, mut sparse) =
            (vec![], vec![], vec![], vec![], vec![], vec![]);
        for (i, inp) in batch.iter().enumerate() {
            let (sv, adj, _) = encode(&mut g, &p, &state.model, inp, z_of(i))?;
            let x_rec = nets.decode_fts(&mut g, &p, adj, sv.zhat)?;
            let a_rec = reconstruct_adj(&mut g, sv.zhat)?;
            let v_rec = nets.decode_fv(&mut g, &p, adj, sv.vhat)?;
            let rec = rec_loss(&mut g, &inp.fts, x_rec, &inp.sc, a_rec, &inp.fv, v_rec)?;
            rec1.push(rec.rec1);
            rec2.push(rec.rec2);
            let c1z = nets.classify_c1(&mut g, &p, sv.zhat, axis)?;
            let c1v = nets.classify_c1(&mut g, &p, sv.vhat, axis)?;
            cls1.push(cross_entropy(&mut g, c1z, inp.label)?);
            cls2.push(cross_entropy(&mut g, c1v, inp.label)?);
            // Reported only; the HPN step below is what trains on these.
            let (c3, sp) = hpn_terms(&mut g, &p, &state.model, &sv, inp.label, state.cfg.k)?;
            cls3.push(c3);
            sparse.push(sp);
            subjects.push(sv);
        }
        let rec1 = batch_mean(&mut g, &rec1)?;
        let rec2 = batch_mean(&mut g, &rec2)?;
        let cls1 = batch_mean(&mut g, &cls1)?;
        let cls2 = batch_mean(&mut g, &cls2)?;
        let cls3 = batch_mean(&mut g, &cls3)?;
        let sparse = batch_mean(&mut g, &sparse)?;
        let rec = g.add(rec1, rec2)?;
        let cls = g.add(cls1, cls2)?;
        let mut loss = g.add(rec, cls)?;
        if adversarial {
            let means = score_means(&mut g, &subjects)?;
            let (l_d, l_g, l_adv) = adv_losses(&mut g, means)?;
            loss = g.add(loss, l_g)?;
            report.d_loss = g.value(l_d).item();
            report.g_loss = g.value(l_g).item();
            report.adv = g.value(l_adv).item();
        }
        check_finite(&g, loss, "generator")?;
        report.rec1 = g.value(rec1).item();
        report.rec2 = g.value(rec2).item();
        report.cls1 = g.value(cls1).item();
        report.cls2 = g.value(cls2).item();
        report.cls3 = g.value(cls3).item();
        report.sparse = g.value(sparse).item();
        g.backward(loss)?;
        apply_grads(state, &g, &p, ParamGroup::Generator, rates.main);
    }

    if rates.hpn > 0.0 {
        let mut g = Graph::new();
        let p = state
            .model
            .params
            .bind(&mut g, |grp| grp == ParamGroup::Hpn);
        let mut terms = Vec::with_capacity(batch.len());
        for inp in batch {
            let (sv, _, _) = encode(&mut g, &p, &state.model, inp, None)?;
            let (c3, sp) = hpn_terms(&mut g, &p, &state.model, &sv, inp.label, state.cfg.k)?;
            let weighted = g.scale(sp, state.cfg.lambda);
            terms.push(g.add(c3, weighted)?);
        }
        let loss = batch_mean(&mut g, &terms)?;
        check_finite(&g, loss, "hpn")?;
        g.backward(loss)?;
        apply_grads(state, &g, &p, ParamGroup::Hpn, rates.hpn);
    }
    if state.epoch >= state.cfg.breakpoint() {
        state.hpn_iter += 1;
    }

    let report = report.with_total(state.cfg.lambda);
    state.history.push(StepRecord {
        epoch: state.epoch,
        step: state.history.len(),
        rates,
        report,
    });
    Ok(report)
}

fn hpn_terms(
    g: &mut Graph,
    p: &Bound,
    model: &Model,
    sv: &SubjectVars,
    label: usize,
    k: usize,
) -> Result<(Var, Var), TrainError> {
    let out = hpn_forward(g, p, &model.nets, sv.zhat, sv.vhat, k)?;
    let ce = cross_entropy(g, out.logits, label)?;
    Ok((ce, sparse_loss(g, out.m)))
}

/// Trains one fold on `train` for the full schedule. `on_epoch` sees each
/// finished epoch's mean report.
pub fn train_fold(
    cfg: &TrainConfig,
    train: &Dataset,
    prior: Option<&PriorModel>,
    mut on_epoch: impl FnMut(usize, &LossReport),
) -> Result<TrainState, TrainError> {
    if train.subjects.len() < cfg.batch_size {
        return Err(TrainError::Config(format!(
            "{} training subjects is fewer than the batch size {}",
            train.subjects.len(),
            cfg.batch_size
        )));
    }
    let mut model_cfg = ModelConfig::new(train.n_rois, train.fts_dim, train.latent_dim);
    model_cfg.c1_axis = cfg.c1_axis;
    model_cfg.split_discriminator = cfg.split_discriminator;
    if cfg.k >= train.n_rois {
        return Err(TrainError::Config(format!(
            "k = {} must be below the {} ROIs",
            cfg.k, train.n_rois
        )));
    }
    let mut state = TrainState::new(model_cfg, cfg.clone(), train.subjects.len())?;
    let inputs: Vec<GraphInput> = train
        .subjects
        .iter()
        .map(GraphInput::from_subject)
        .collect();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for epoch in 0..cfg.epochs {
        state.epoch = epoch;
        order.shuffle(&mut state.rng);
        let mut reports = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&GraphInput> = chunk.iter().map(|&i| &inputs[i]).collect();
            reports.push(train_step(&mut state, &batch, prior)?);
        }
        let mean = LossReport::mean(&reports);
        on_epoch(epoch, &mean);
        if epoch >= cfg.breakpoint() && state.best.as_ref().is_none_or(|b| mean.total < b.loss) {
            state.best = Some(Best {
                epoch,
                loss: mean.total,
                params: state.model.params.clone(),
            });
        }
        state.epoch_losses.push(mean);
    }
    state.epoch = cfg.epochs;
    Ok(state)
}

/// Forward results for one subject without gradient tracking.
#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub zhat: Matrix,
    pub vhat: Matrix,
    /// United connectivity.
    pub m: Matrix,
    pub logits: Matrix,
    /// Softmax probability of class 1.
    pub prob: f64,
}

pub fn infer(model: &Model, k: usize, inp: &GraphInput) -> Result<Inference, TrainError> {
    let mut g = Graph::new();
    let p = model.params.bind(&mut g, |_| false);
    let (sv, _, _) = encode(&mut g, &p, model, inp, None)?;
    let HpnOutput { m, logits, .. } = hpn_forward(&mut g, &p, &model.nets, sv.zhat, sv.vhat, k)?;
    let probs = g.softmax_rows(logits)?;
    Ok(Inference {
        zhat: g.value(sv.zhat).clone(),
        vhat: g.value(sv.vhat).clone(),
        m: g.value(m).clone(),
        logits: g.value(logits).clone(),
        prob: g.value(probs).get(0, 1),
    })
}
