use crate::error::{Error, Result};
use crate::nn::params::ModelParams;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Nll,
    NllWithProximal,
}

/// Negative log-likelihood, optionally with the FedProx proximal penalty
/// `(mu / 2) · ‖w − anchor‖²`.
#[derive(Debug, Clone, Copy)]
pub struct LossConfig<'a> {
    kind: LossKind,
    mu: f64,
    anchor: Option<&'a ModelParams>,
}

impl<'a> LossConfig<'a> {
    pub fn nll() -> Self {
        Self {
            kind: LossKind::Nll,
            mu: 0.0,
            anchor: None,
        }
    }

    pub fn proximal(mu: f64, anchor: &'a ModelParams) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Domain(format!(
                "proximal mu must be finite and >= 0, got {mu}"
            )));
        }
        Ok(Self {
            kind: LossKind::NllWithProximal,
            mu,
            anchor: Some(anchor),
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn anchor(&self) -> Option<&'a ModelParams> {
        self.anchor
    }

    /// Anchor and coefficient when the proximal term is active and non-zero.
    pub(crate) fn active_proximal(&self) -> Option<(f64, &'a ModelParams)> {
        match (self.kind, self.anchor) {
            (LossKind::NllWithProximal, Some(anchor)) if self.mu != 0.0 => Some((self.mu, anchor)),
            _ => None,
        }
    }
}

/// Row-wise log-softmax over `[rows, classes]` logits.
pub(crate) fn log_softmax(logits: &[f64], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(classes) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        out.extend(row.iter().map(|&z| z - lse));
    }
    out
}

pub(crate) fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::Dimension(format!(
            "{} labels for a batch of {rows}",
            labels.len()
        )));
    }
    if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::Index(format!(
            "label {l} at position {i} outside [0, {classes})"
        )));
    }
    Ok(())
}

/// Mean NLL of `labels` under `logprobs` (`[batch, classes]`), plus the
/// proximal term when configured.
pub fn nll_loss(
    logprobs: &Tensor,
    labels: &[usize],
    config: &LossConfig<'_>,
    model: &ModelParams,
) -> Result<f64> {
    let &[rows, classes] = logprobs.shape() else {
        return Err(Error::Dimension(format!(
            "log-probabilities must be 2-D, got {:?}",
            logprobs.shape()
        )));
    };
    if rows == 0 {
        return Err(Error::Dimension("empty batch".into()));
    }
    check_labels(labels, rows, classes)?;
    let data = logprobs.data();
    let sum: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| data[i * classes + l] as f64)
        .sum();
    let nll = -sum / rows as f64;
    proximal_term(config, model).map(|p| nll + p)
}

pub(crate) fn proximal_term(config: &LossConfig<'_>, model: &ModelParams) -> Result<f64> {
    match config.active_proximal() {
        Some((mu, anchor)) => Ok(0.5 * mu * model.squared_distance(anchor)?),
        None => {
            if config.kind == LossKind::NllWithProximal && config.anchor.is_none() {
                return Err(Error::Domain("proximal loss needs an anchor model".into()));
            }
            Ok(0.0)
        }
    }
}
