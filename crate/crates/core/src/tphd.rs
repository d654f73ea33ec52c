//! Trajectory PHD recursion for extended targets: Poisson-RFS prediction and
//! the partition-sum update.

use crate::error::{Result, TrackError};
use crate::extent::{cell_log_likelihood, sequential_cell_update};
use crate::logdomain::{log_add_exp, log_sum_exp};
use crate::motion::predict_component;
use crate::types::{Measurement, ModelConfig, Partition, TrajectoryComponent, TrajectoryMixture};

/// Deterministic identity for the birth component `index` spawned at step `k`.
pub fn birth_component_id(k: usize, index: usize) -> u64 {
    ((k as u64) << 16) | (index as u64 & 0xffff)
}

/// Memoizes sequential cell updates per (distinct cell, component): the same
/// cell recurs across the nested partitions of one scan, and the posterior
/// state does not depend on which partition the cell sits in.
pub(crate) struct CellUpdateCache {
    entries: std::collections::HashMap<Vec<usize>, Vec<Slot>>,
    components: usize,
}

#[derive(Clone)]
enum Slot {
    Unset,
    Failed,
    Ready(crate::types::TargetState),
}

impl CellUpdateCache {
    pub(crate) fn new(components: usize) -> Self {
        Self {
            entries: std::collections::HashMap::new(),
            components,
        }
    }

    /// The post-update state for component `j` against `cell`, or `None` if
    /// the update failed (degenerate covariance, already logged).
    pub(crate) fn updated_state(
        &mut self,
        cell: &[usize],
        cell_z: &[Measurement],
        j: usize,
        component: &TrajectoryComponent,
        m: &ModelConfig,
    ) -> Option<crate::types::TargetState> {
        let slots = self
            .entries
            .entry(cell.to_vec())
            .or_insert_with(|| vec![Slot::Unset; self.components]);
        if let Slot::Unset = slots[j] {
            slots[j] = match sequential_cell_update(component.current_state(), cell_z, m) {
                Ok(state) => Slot::Ready(state),
                Err(e) => {
                    log::warn!("skipping component {} in cell update: {e}", component.id);
                    Slot::Failed
                }
            };
        }
        match &slots[j] {
            Slot::Ready(state) => Some(state.clone()),
            _ => None,
        }
    }
}

/// Weight factor of the missed-detection branch,
/// `1 - (1 - e^{-gamma}) p_D`.
pub fn missed_detection_factor(m: &ModelConfig) -> f64 {
    1.0 - (1.0 - (-m.gamma).exp()) * m.p_detect
}

/// Per-(partition, cell) update terms, all in the log domain: the component
/// likelihoods, the mixture-sum `varsigma`, the clutter-only `varrho` and
/// the normalized partition weights.
#[derive(Debug, Clone)]
pub struct UpdateTerms {
    /// `[partition][cell][component]` cell log-likelihoods; negative
    /// infinity marks components skipped for degenerate covariances.
    pub log_likelihood: Vec<Vec<Vec<f64>>>,
    /// `[partition][cell]` log of `varsigma_(P,C)`.
    pub log_varsigma: Vec<Vec<f64>>,
    /// `[partition][cell]` log of `varrho_(P,C)` (clutter-only hypothesis;
    /// exists only for singleton cells).
    pub log_varrho: Vec<Vec<f64>>,
    /// Normalized partition weights `w_P` (linear domain, sum to one).
    pub partition_weights: Vec<f64>,
    /// `[partition][cell]` log of `varrho + varsigma`.
    pub log_denominator: Vec<Vec<f64>>,
}

/// Computes likelihoods, `varsigma`, `varrho` and partition weights for a
/// predicted mixture against a partitioned measurement set.
pub fn compute_update_terms(
    pred: &TrajectoryMixture,
    z: &[Measurement],
    parts: &[Partition],
    m: &ModelConfig,
) -> Result<UpdateTerms> {
    let ln_gamma = m.gamma.ln();
    let ln_pd = m.p_detect.ln();
    let ln_rho = m.rho_clutter.ln();

    let mut log_likelihood = Vec::with_capacity(parts.len());
    let mut log_varsigma = Vec::with_capacity(parts.len());
    let mut log_varrho = Vec::with_capacity(parts.len());
    let mut log_denominator = Vec::with_capacity(parts.len());
    let mut log_wp_num = Vec::with_capacity(parts.len());

    for part in parts {
        part.validate(z.len())?;
        let mut lik_p = Vec::with_capacity(part.cells.len());
        let mut sig_p = Vec::with_capacity(part.cells.len());
        let mut rho_p = Vec::with_capacity(part.cells.len());
        let mut den_p = Vec::with_capacity(part.cells.len());
        for cell in &part.cells {
            let cell_z: Vec<Measurement> = cell.iter().map(|&i| z[i]).collect();
            let lik: Vec<f64> = pred
                .components
                .iter()
                .map(|c| match cell_log_likelihood(c.current_state(), &cell_z, m) {
                    Ok(l) => l,
                    Err(e) => {
                        log::warn!("skipping component {} in cell likelihood: {e}", c.id);
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            let summands: Vec<f64> = lik
                .iter()
                .zip(&pred.components)
                .map(|(&l, c)| l + c.weight.ln())
                .collect();
            let log_sig = ln_pd - m.gamma + cell.len() as f64 * ln_gamma + log_sum_exp(&summands);
            let log_rho = if cell.len() == 1 {
                ln_rho
            } else {
                f64::NEG_INFINITY
            };
            den_p.push(log_add_exp(log_rho, log_sig));
            lik_p.push(lik);
            sig_p.push(log_sig);
            rho_p.push(log_rho);
        }
        log_wp_num.push(den_p.iter().sum::<f64>());
        log_likelihood.push(lik_p);
        log_varsigma.push(sig_p);
        log_varrho.push(rho_p);
        log_denominator.push(den_p);
    }

    let log_norm = log_sum_exp(&log_wp_num);
    if log_norm == f64::NEG_INFINITY {
        return Err(TrackError::NumericalFailure(
            "all partition weights vanished".into(),
        ));
    }
    let partition_weights = log_wp_num.iter().map(|&n| (n - log_norm).exp()).collect();

    Ok(UpdateTerms {
        log_likelihood,
        log_varsigma,
        log_varrho,
        partition_weights,
        log_denominator,
    })
}

/// Prediction: birth components (length-1, starting at step `k`) plus every
/// prior component survived with probability `p_S` and extended by one step.
pub fn tphd_predict(
    prior: &TrajectoryMixture,
    m: &ModelConfig,
    k: usize,
) -> TrajectoryMixture {
    let mut components = Vec::with_capacity(prior.len() + m.birth.len());
    for (i, b) in m.birth.iter().enumerate() {
        components.push(TrajectoryComponent::born(
            b.weight,
            k,
            birth_component_id(k, i),
            b.state.clone(),
        ));
    }
    for c in &prior.components {
        let mut p = predict_component(c, m);
        p.weight = m.p_survive * c.weight;
        components.push(p);
    }
    TrajectoryMixture::new(components)
}

/// Update: the missed-detection branch keeps every predicted component
/// scaled by `1 - (1 - e^{-gamma}) p_D`; every (partition, cell, component)
/// triple adds a detection component whose current state is replaced by the
/// sequential cell update and whose weight is
/// `p_D e^{-gamma} w_P gamma^{|C|} L w / (varrho + varsigma)`.
pub fn tphd_update(
    pred: &TrajectoryMixture,
    z: &[Measurement],
    parts: &[Partition],
    m: &ModelConfig,
) -> Result<TrajectoryMixture> {
    let miss = missed_detection_factor(m);
    let mut components: Vec<TrajectoryComponent> = pred
        .components
        .iter()
        .map(|c| c.with_weight(miss * c.weight))
        .collect();

    if z.is_empty() {
        return Ok(TrajectoryMixture::new(components));
    }
    if parts.is_empty() {
        return Err(TrackError::InvalidConfig(
            "nonempty measurement set requires at least one partition".into(),
        ));
    }

    let terms = compute_update_terms(pred, z, parts, m)?;
    let ln_pd = m.p_detect.ln();
    let ln_gamma = m.gamma.ln();
    let mut cache = CellUpdateCache::new(pred.len());

    for (pi, part) in parts.iter().enumerate() {
        let ln_wp = terms.partition_weights[pi].ln();
        for (ci, cell) in part.cells.iter().enumerate() {
            let cell_z: Vec<Measurement> = cell.iter().map(|&i| z[i]).collect();
            let log_den = terms.log_denominator[pi][ci];
            for (j, c) in pred.components.iter().enumerate() {
                let log_lik = terms.log_likelihood[pi][ci][j];
                if log_lik == f64::NEG_INFINITY && c.weight > 0.0 {
                    // degenerate covariance already reported; drop the branch
                    continue;
                }
                let log_w = ln_pd - m.gamma + ln_wp - log_den
                    + cell.len() as f64 * ln_gamma
                    + log_lik
                    + c.weight.ln();
                let weight = if log_w == f64::NEG_INFINITY {
                    0.0
                } else {
                    log_w.exp()
                };
                let Some(state) = cache.updated_state(cell, &cell_z, j, c, m) else {
                    continue;
                };
                components.push(c.with_current(weight, state));
            }
        }
    }

    Ok(TrajectoryMixture::new(components))
}
