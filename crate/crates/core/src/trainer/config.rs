use serde::{Deserialize, Serialize};

use crate::model::C1Axis;

/// Source of the latent samples Z that the discriminator treats as real.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// No adversarial terms at all.
    None,
    /// Z ~ N(0, I).
    Normal,
    /// Z from the fitted KDE prior.
    #[default]
    Estimated,
}

impl std::str::FromStr for PriorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(PriorMode::None),
            "normal" => Ok(PriorMode::Normal),
            "estimated" => Ok(PriorMode::Estimated),
            other => Err(format!(
                "unknown prior mode {other:?} (expected none, normal or estimated)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Generator-side rate before the breakpoint.
    pub lr_main: f64,
    /// Generator-side rate from the breakpoint on.
    pub lr_main_late: f64,
    pub lr_disc: f64,
    /// Initial HPN rate at the breakpoint, decayed polynomially.
    pub lr_hpn: f64,
    pub poly_power: f64,
    pub momentum: f64,
    /// Discriminator weights are clipped to [-clip, clip].
    pub clip: f64,
    /// Neighbours per hyperedge.
    pub k: usize,
    pub lambda: f64,
    pub prior_mode: PriorMode,
    pub split_discriminator: bool,
    pub c1_axis: C1Axis,
    /// Epoch at which the HPN starts training and the main rate drops;
    /// defaults to min(100, epochs / 2).
    pub breakpoint: Option<usize>,
    /// Prototype count for the estimated prior.
    pub prior_m: usize,
    /// ROIs forced into the prototype set; defaults to none.
    pub seed_rois: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 8,
            lr_main: 1e-3,
            lr_main_late: 1e-4,
            lr_disc: 1e-4,
            lr_hpn: 1e-3,
            poly_power: 0.9,
            momentum: 0.9,
            clip: 0.05,
            k: 4,
            lambda: 1e-4,
            prior_mode: PriorMode::Estimated,
            split_discriminator: false,
            c1_axis: C1Axis::Feature,
            breakpoint: None,
            prior_m: 10,
            seed_rois: Vec::new(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Short-run preset for desk-sized cohorts: 200 epochs, tenfold main and
    /// HPN rates, breakpoint at epoch 50. The late main rate and the
    /// discriminator rate keep their defaults so the representation stays
    /// put while the HPN trains.
    pub fn desk() -> Self {
        TrainConfig {
            epochs: 200,
            lr_main: 1e-2,
            lr_hpn: 1e-2,
            breakpoint: Some(50),
            ..TrainConfig::default()
        }
    }

    pub fn breakpoint(&self) -> usize {
        self.breakpoint.unwrap_or((self.epochs / 2).min(100))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.epochs == 0 {
            return Err("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return Err("batch_size must be at least 1".into());
        }
        let rates = [
            ("lr_main", self.lr_main),
            ("lr_main_late", self.lr_main_late),
            ("lr_disc", self.lr_disc),
            ("lr_hpn", self.lr_hpn),
            ("lambda", self.lambda),
            ("clip", self.clip),
            ("poly_power", self.poly_power),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(format!("momentum = {} must lie in [0, 1)", self.momentum));
        }
        if self.breakpoint() > self.epochs {
            return Err(format!(
                "breakpoint {} exceeds {} epochs",
                self.breakpoint(),
                self.epochs
            ));
        }
        Ok(())
    }
}

/// Learning rates in effect for one optimization step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub main: f64,
    pub disc: f64,
    pub hpn: f64,
}

/// Rates at `epoch`. `iter` counts HPN steps since the breakpoint and
/// `max_iter` is the total number of such steps.
pub fn lr_schedule(cfg: &TrainConfig, epoch: usize, iter: usize, max_iter: usize) -> Rates {
    let late = epoch >= cfg.breakpoint();
    let hpn = if !late || max_iter == 0 {
        0.0
    } else {
        let frac = 1.0 - (iter.min(max_iter) as f64) / max_iter as f64;
        cfg.lr_hpn * frac.powf(cfg.poly_power)
    };
    Rates {
        main: if late { cfg.lr_main_late } else { cfg.lr_main },
        disc: cfg.lr_disc,
        hpn,
    }
}
