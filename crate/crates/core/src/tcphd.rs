//! Trajectory CPHD recursion for extended targets: the PHD propagation of
//! [`crate::tphd`] plus a cardinality PMF updated through probability
//! generating function coefficients.

use crate::error::{Result, TrackError};

use crate::logdomain::{log_add_exp, log_sum_exp, ln_factorials};
use crate::tphd::{compute_update_terms, missed_detection_factor, tphd_predict, CellUpdateCache};
use crate::types::{
    CardinalityPmf, Measurement, ModelConfig, Partition, TrajectoryComponent, TrajectoryMixture,
};

/// Probability that one trajectory yields no detected measurement:
/// `upsilon = 1 - p_D + p_D e^{-gamma}` (identical to the missed-detection
/// weight factor).
pub fn upsilon(m: &ModelConfig) -> f64 {
    1.0 - m.p_detect + m.p_detect * (-m.gamma).exp()
}

/// Cardinality PMF of the birth process: Poisson with the birth mass as its
/// mean, truncated at `n_max`.
pub fn birth_cardinality_pmf(m: &ModelConfig) -> CardinalityPmf {
    let mass = m.birth_mass();
    if mass <= 0.0 {
        return CardinalityPmf::delta(0, m.n_max);
    }
    let ln_fact = ln_factorials(m.n_max);
    let masses: Vec<f64> = (0..=m.n_max)
        .map(|n| (-mass + n as f64 * mass.ln() - ln_fact[n]).exp())
        .collect();
    CardinalityPmf::from_masses(masses).expect("poisson masses are positive")
}

/// Binomial thinning of a PMF: each of `l` survivors kept independently with
/// probability `p`.
fn thin_pmf(pmf: &CardinalityPmf, p: f64) -> Vec<f64> {
    let n_max = pmf.n_max();
    let mut out = vec![0.0; n_max + 1];
    if p == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p == 1.0 {
        out.copy_from_slice(pmf.probs());
        return out;
    }
    let ln_fact = ln_factorials(n_max);
    let (ln_p, ln_q) = (p.ln(), (1.0 - p).ln());
    for l in 0..=n_max {
        let mass = pmf.prob(l);
        if mass == 0.0 {
            continue;
        }
        for j in 0..=l {
            let ln_binom = ln_fact[l] - ln_fact[j] - ln_fact[l - j];
            out[j] += mass * (ln_binom + j as f64 * ln_p + (l - j) as f64 * ln_q).exp();
        }
    }
    out
}

/// Prediction: the PHD is predicted exactly as in the TPHD filter; the
/// cardinality PMF is the convolution of the birth PMF with the
/// survival-thinned prior PMF, truncated and renormalized.
pub fn tcphd_predict(
    prior: &TrajectoryMixture,
    pmf: &CardinalityPmf,
    m: &ModelConfig,
    k: usize,
) -> Result<(TrajectoryMixture, CardinalityPmf)> {
    let mixture = tphd_predict(prior, m, k);
    let thinned = thin_pmf(pmf, m.p_survive);
    let birth = birth_cardinality_pmf(m);
    let mut masses = vec![0.0; m.n_max + 1];
    for (n, mass) in masses.iter_mut().enumerate() {
        for (j, &t) in thinned.iter().enumerate().take(n + 1) {
            *mass += birth.prob(n - j) * t;
        }
    }
    Ok((mixture, CardinalityPmf::from_masses(masses)?))
}

/// The coefficient table of the cardinalized update, log-domain per
/// (partition, cell): `varpi`, `vartheta`, `epsilon`, `mu`, `nu`, plus the
/// scalars `upsilon` and `kappa` and the shared denominator
/// `sum_P sum_C vartheta epsilon`.
///
/// The probability generating functions are the Poisson ones: clutter
/// `G_FA^(m)(0) = lambda^m e^-lambda`, per-target measurement count
/// `G_z^(m)(0) = gamma^m e^-gamma`, and the predicted-cardinality
/// derivatives `G^(n)(x) = sum_{l>=n} l!/(l-n)! x^(l-n) P(l)`.
#[derive(Debug, Clone)]
pub struct TcphdCoefficients {
    pub upsilon: f64,
    pub kappa: f64,
    pub log_varpi: Vec<Vec<f64>>,
    pub log_vartheta: Vec<Vec<f64>>,
    pub log_epsilon: Vec<Vec<f64>>,
    pub log_mu: Vec<Vec<f64>>,
    pub log_nu: Vec<Vec<f64>>,
    /// `log(sum_P sum_C vartheta * epsilon)`.
    pub log_denominator: f64,
    /// `[partition][cell][component]` cell log-likelihoods (shared with the
    /// PHD update terms).
    pub log_likelihood: Vec<Vec<Vec<f64>>>,
}

/// `log` of the n-th derivative of the cardinality PGF evaluated at
/// `exp(ln_x)`: `G^(n)(x) = sum_{l>=n} l!/(l-n)! x^(l-n) P(l)`.
fn log_pgf_derivative(n: i64, ln_x: f64, pmf: &CardinalityPmf, ln_fact: &[f64]) -> f64 {
    if n < 0 {
        return f64::NEG_INFINITY;
    }
    let n = n as usize;
    let terms: Vec<f64> = (n..=pmf.n_max())
        .filter(|&l| pmf.prob(l) > 0.0)
        .map(|l| ln_fact[l] - ln_fact[l - n] + (l - n) as f64 * ln_x + pmf.prob(l).ln())
        .collect();
    log_sum_exp(&terms)
}

/// Computes the update coefficients for a predicted mixture/PMF pair.
pub fn compute_coefficients(
    pred: &TrajectoryMixture,
    pmf_pred: &CardinalityPmf,
    z: &[Measurement],
    parts: &[Partition],
    m: &ModelConfig,
) -> Result<TcphdCoefficients> {
    let total = pred.total_weight();
    if !(total > 0.0) {
        return Err(TrackError::NumericalFailure(
            "predicted mixture has no mass".into(),
        ));
    }
    if !(m.rho_clutter > 0.0) {
        return Err(TrackError::InvalidConfig(
            "cardinalized update requires a positive clutter density".into(),
        ));
    }

    let terms = compute_update_terms(pred, z, parts, m)?;
    let ups = upsilon(m);
    let ln_ups = ups.ln();
    let ln_rho = m.rho_clutter.ln();
    let ln_pd = m.p_detect.ln();
    let lambda = m.lambda_clutter;
    let ln_fact = ln_factorials(pmf_pred.n_max().max(z.len()) + 2);
    let ln_wbar: Vec<f64> = pred
        .components
        .iter()
        .map(|c| (c.weight / total).ln())
        .collect();

    let mut log_varpi = Vec::with_capacity(parts.len());
    let mut log_vartheta = Vec::with_capacity(parts.len());
    let mut log_epsilon = Vec::with_capacity(parts.len());
    let mut log_mu = Vec::with_capacity(parts.len());
    let mut log_nu = Vec::with_capacity(parts.len());

    let ln_gamma = m.gamma.ln();
    for (pi, part) in parts.iter().enumerate() {
        let n_cells = part.num_cells() as i64;
        let ln_cells = (n_cells as f64).ln();
        let g_at = |order: i64| log_pgf_derivative(order, ln_ups, pmf_pred, &ln_fact);

        let varpi_p: Vec<f64> = part
            .cells
            .iter()
            .enumerate()
            .map(|(ci, cell)| {
                let summands: Vec<f64> = terms.log_likelihood[pi][ci]
                    .iter()
                    .zip(&ln_wbar)
                    .map(|(&l, &w)| l + w)
                    .collect();
                // includes the measurement-count PGF derivative
                // G_z^(|C|)(0) = gamma^|C| e^-gamma
                ln_pd + cell.len() as f64 * ln_gamma - m.gamma + log_sum_exp(&summands)
                    - cell.len() as f64 * ln_rho
            })
            .collect();

        let vartheta_p: Vec<f64> = (0..part.cells.len())
            .map(|ci| {
                varpi_p
                    .iter()
                    .enumerate()
                    .filter(|&(cj, _)| cj != ci)
                    .map(|(_, &v)| v)
                    .sum()
            })
            .collect();

        // clutter PGF derivative G_FA^(|C|)(0) = lambda^|C| e^-lambda
        let ln_g_fa = |len: usize| {
            if lambda > 0.0 {
                len as f64 * lambda.ln() - lambda
            } else {
                f64::NEG_INFINITY
            }
        };
        let epsilon_p: Vec<f64> = part
            .cells
            .iter()
            .enumerate()
            .map(|(ci, cell)| {
                let t1 = -lambda + g_at(n_cells) + varpi_p[ci] - ln_cells;
                let t2 = ln_g_fa(cell.len()) + g_at(n_cells - 1);
                log_add_exp(t1, t2)
            })
            .collect();

        let mu_p: Vec<f64> = part
            .cells
            .iter()
            .enumerate()
            .map(|(ci, cell)| {
                let t1 = -lambda + g_at(n_cells + 1) + varpi_p[ci] - ln_cells;
                let t2 = ln_g_fa(cell.len()) + g_at(n_cells);
                log_add_exp(t1, t2)
            })
            .collect();

        let nu_p: Vec<f64> = (0..part.cells.len())
            .map(|ci| {
                let t1 = vartheta_p[ci] - ln_cells - lambda + g_at(n_cells);
                let others: Vec<f64> = (0..part.cells.len())
                    .filter(|&cj| cj != ci)
                    .map(|cj| vartheta_p[cj] + epsilon_p[cj])
                    .collect();
                let lse = log_sum_exp(&others);
                let t2 = if lse == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    lse - varpi_p[ci]
                };
                log_add_exp(t1, t2)
            })
            .collect();

        log_varpi.push(varpi_p);
        log_vartheta.push(vartheta_p);
        log_epsilon.push(epsilon_p);
        log_mu.push(mu_p);
        log_nu.push(nu_p);
    }

    let theta_eps: Vec<f64> = log_vartheta
        .iter()
        .zip(&log_epsilon)
        .flat_map(|(ts, es)| ts.iter().zip(es).map(|(&t, &e)| t + e))
        .collect();
    let theta_mu: Vec<f64> = log_vartheta
        .iter()
        .zip(&log_mu)
        .flat_map(|(ts, ms)| ts.iter().zip(ms).map(|(&t, &mu)| t + mu))
        .collect();
    let log_denominator = log_sum_exp(&theta_eps);
    if log_denominator == f64::NEG_INFINITY {
        return Err(TrackError::NumericalFailure(
            "cardinalized update denominator vanished".into(),
        ));
    }
    let kappa = (log_sum_exp(&theta_mu) - log_denominator).exp();

    Ok(TcphdCoefficients {
        upsilon: ups,
        kappa,
        log_varpi,
        log_vartheta,
        log_epsilon,
        log_mu,
        log_nu,
        log_denominator,
        log_likelihood: terms.log_likelihood,
    })
}

/// Update: missed-detection components scaled by
/// `kappa (1 - (1 - e^{-gamma}) p_D)`, detection components weighted
/// `p_D w_bar nu gamma^{|C|} e^{-gamma} L / rho^{|C|} / (sum vartheta
/// epsilon)`, and the posterior cardinality PMF evaluated per
/// partition/cell and renormalized.
///
/// With an empty measurement set the weights scale by `upsilon` and the PMF
/// is reweighted by `upsilon^n`.
pub fn tcphd_update(
    pred: &TrajectoryMixture,
    pmf_pred: &CardinalityPmf,
    z: &[Measurement],
    parts: &[Partition],
    m: &ModelConfig,
) -> Result<(TrajectoryMixture, CardinalityPmf)> {
    let miss = missed_detection_factor(m);

    if z.is_empty() {
        let components = pred
            .components
            .iter()
            .map(|c| c.with_weight(miss * c.weight))
            .collect();
        let ups = upsilon(m);
        let masses: Vec<f64> = pmf_pred
            .probs()
            .iter()
            .enumerate()
            .map(|(n, &p)| ups.powi(n as i32) * p)
            .collect();
        return Ok((
            TrajectoryMixture::new(components),
            CardinalityPmf::from_masses(masses)?,
        ));
    }
    if parts.is_empty() {
        return Err(TrackError::InvalidConfig(
            "nonempty measurement set requires at least one partition".into(),
        ));
    }

    let coeff = compute_coefficients(pred, pmf_pred, z, parts, m)?;
    let total = pred.total_weight();
    let ln_pd = m.p_detect.ln();
    let ln_rho = m.rho_clutter.ln();
    let ln_gamma = m.gamma.ln();

    // the missed-detection branch carries mass kappa * upsilon over the
    // mass-normalized predicted PHD, which equals the expected number of
    // undetected trajectories
    let mut components: Vec<TrajectoryComponent> = pred
        .components
        .iter()
        .map(|c| c.with_weight(coeff.kappa * miss * c.weight / total))
        .collect();

    let mut cache = CellUpdateCache::new(pred.len());
    for (pi, part) in parts.iter().enumerate() {
        for (ci, cell) in part.cells.iter().enumerate() {
            let cell_z: Vec<Measurement> = cell.iter().map(|&i| z[i]).collect();
            for (j, c) in pred.components.iter().enumerate() {
                let log_lik = coeff.log_likelihood[pi][ci][j];
                if log_lik == f64::NEG_INFINITY && c.weight > 0.0 {
                    continue;
                }
                let log_w = ln_pd + (c.weight / total).ln() + coeff.log_nu[pi][ci]
                    + cell.len() as f64 * ln_gamma
                    - m.gamma
                    + log_lik
                    - cell.len() as f64 * ln_rho
                    - coeff.log_denominator;
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

    // posterior cardinality
    let ln_ups = upsilon(m).ln();
    let lambda = m.lambda_clutter;
    let ln_fact = ln_factorials(pmf_pred.n_max().max(z.len()) + 2);
    let mut masses = vec![0.0; pmf_pred.n_max() + 1];
    for (n, mass) in masses.iter_mut().enumerate() {
        let p_n = pmf_pred.prob(n);
        if p_n == 0.0 {
            continue;
        }
        let log_gn0 = ln_fact[n] + p_n.ln();
        let mut entries = Vec::new();
        for (pi, part) in parts.iter().enumerate() {
            let cells = part.num_cells();
            let ln_cells = (cells as f64).ln();
            for (ci, cell) in part.cells.iter().enumerate() {
                let t1 = if n >= cells {
                    -lambda + coeff.log_varpi[pi][ci] - ln_cells
                        + (n - cells) as f64 * ln_ups
                        - ln_fact[n - cells]
                } else {
                    f64::NEG_INFINITY
                };
                let t2 = if n + 1 >= cells && lambda > 0.0 {
                    cell.len() as f64 * lambda.ln() - lambda
                        + (n + 1 - cells) as f64 * ln_ups
                        - ln_fact[n + 1 - cells]
                } else {
                    f64::NEG_INFINITY
                };
                entries.push(coeff.log_vartheta[pi][ci] + log_add_exp(t1, t2));
            }
        }
        let log_num = log_gn0 + log_sum_exp(&entries);
        *mass = if log_num == f64::NEG_INFINITY {
            0.0
        } else {
            (log_num - coeff.log_denominator).exp()
        };
    }

    Ok((
        TrajectoryMixture::new(components),
        CardinalityPmf::from_masses(masses)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::all_partitions;
    use crate::tphd::tests::small_model;
    use approx::assert_relative_eq;

    #[test]
    fn lossless_survival_keeps_pmf() {
        let mut m = small_model();
        m.p_survive = 1.0;
        m.birth.clear();
        let pmf = CardinalityPmf::from_masses(vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let prior = TrajectoryMixture::empty();
        let (_, predicted) = tcphd_predict(&prior, &pmf, &m, 1).unwrap();
        for n in 0..=3 {
            assert_relative_eq!(predicted.prob(n), pmf.prob(n), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_survival_gives_birth_pmf() {
        let mut m = small_model();
        m.p_survive = 0.0;
        let pmf = CardinalityPmf::delta(3, m.n_max);
        let (_, predicted) = tcphd_predict(&TrajectoryMixture::empty(), &pmf, &m, 1).unwrap();
        let birth = birth_cardinality_pmf(&m);
        for n in 0..=m.n_max {
            assert_relative_eq!(predicted.prob(n), birth.prob(n), epsilon = 1e-12);
        }
    }

    #[test]
    fn binomial_thinning_of_two_targets() {
        let mut m = small_model();
        m.p_survive = 0.5;
        m.birth.clear();
        let pmf = CardinalityPmf::delta(2, m.n_max);
        let (_, predicted) = tcphd_predict(&TrajectoryMixture::empty(), &pmf, &m, 1).unwrap();
        assert_relative_eq!(predicted.prob(0), 0.25, epsilon = 1e-12);
        assert_relative_eq!(predicted.prob(1), 0.5, epsilon = 1e-12);
        assert_relative_eq!(predicted.prob(2), 0.25, epsilon = 1e-12);
        assert_relative_eq!(predicted.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_detection_probability_coefficients() {
        let mut m = small_model();
        m.p_detect = 0.0;
        let (pred, pmf) = tcphd_predict(
            &TrajectoryMixture::empty(),
            &CardinalityPmf::delta(0, m.n_max),
            &m,
            1,
        )
        .unwrap();
        let z = [Measurement::new(0.0, 0.0), Measurement::new(20.0, 20.0)];
        let parts = all_partitions(&z).unwrap();
        let coeff = compute_coefficients(&pred, &pmf, &z, &parts, &m).unwrap();
        assert_relative_eq!(coeff.upsilon, 1.0, epsilon = 1e-15);
        for p in &coeff.log_varpi {
            for &v in p {
                assert_eq!(v, f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn single_cell_partition_has_unit_vartheta() {
        let m = small_model();
        let (pred, pmf) = tcphd_predict(
            &TrajectoryMixture::empty(),
            &CardinalityPmf::delta(1, m.n_max),
            &m,
            1,
        )
        .unwrap();
        let z = [Measurement::new(0.3, 0.1), Measurement::new(-0.5, 0.2)];
        let one_cell = Partition::new(vec![vec![0, 1]]);
        let coeff = compute_coefficients(&pred, &pmf, &z, &[one_cell], &m).unwrap();
        // empty product over P - C
        assert_relative_eq!(coeff.log_vartheta[0][0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_cell_epsilon_matches_hand_computation() {
        let mut m = small_model();
        m.birth.truncate(1);
        let pmf = CardinalityPmf::from_masses(vec![0.0, 0.5, 0.3, 0.2]).unwrap();
        let pred = tphd_predict(&TrajectoryMixture::empty(), &m, 1);
        let z = [Measurement::new(0.4, -0.2), Measurement::new(24.0, 21.0)];
        let part = Partition::new(vec![vec![0], vec![1]]);
        let coeff = compute_coefficients(&pred, &pmf, &z, &[part], &m).unwrap();

        // scalar evaluation for a single normalized component
        let x = pred.components[0].current_state();
        let lik0 = crate::extent::cell_likelihood(x, &[z[0]], &m).unwrap();
        let lik1 = crate::extent::cell_likelihood(x, &[z[1]], &m).unwrap();
        let e_gamma = (-m.gamma).exp();
        let varpi = |l: f64| m.p_detect * m.gamma * e_gamma * l / m.rho_clutter;
        let ups = upsilon(&m);
        // true PGF derivative over the PMF support {1, 2, 3}
        let g = |order: i64| -> f64 {
            (order.max(0) as usize..=3)
                .map(|l| {
                    let falling: f64 = ((l - order as usize + 1)..=l).map(|i| i as f64).product();
                    falling * ups.powi((l - order as usize) as i32) * pmf.prob(l)
                })
                .sum()
        };
        let e_fa = (-m.lambda_clutter).exp();
        let g_fa1 = m.lambda_clutter * e_fa;
        let expected_eps0 = e_fa * g(2) * varpi(lik0) / 2.0 + g_fa1 * g(1);
        assert_relative_eq!(
            coeff.log_epsilon[0][0].exp(),
            expected_eps0,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            coeff.log_vartheta[0][0].exp(),
            varpi(lik1),
            max_relative = 1e-10
        );
    }

    #[test]
    fn empty_measurements_delta_zero_stays() {
        let m = small_model();
        let pred = tphd_predict(&TrajectoryMixture::empty(), &m, 1);
        let pmf = CardinalityPmf::delta(0, m.n_max);
        let (_, post) = tcphd_update(&pred, &pmf, &[], &[], &m).unwrap();
        assert_relative_eq!(post.prob(0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_measurements_scale_weights_by_miss_factor() {
        let m = small_model();
        let pred = tphd_predict(&TrajectoryMixture::empty(), &m, 1);
        let pmf = CardinalityPmf::delta(2, m.n_max);
        let (post, _) = tcphd_update(&pred, &pmf, &[], &[], &m).unwrap();
        let factor = missed_detection_factor(&m);
        // the two missed-detection factor forms agree
        assert_relative_eq!(factor, upsilon(&m), epsilon = 1e-15);
        for (a, b) in post.components.iter().zip(&pred.components) {
            assert_relative_eq!(a.weight, factor * b.weight, epsilon = 1e-15);
        }
    }

    #[test]
    fn no_information_keeps_pmf() {
        // pD -> 0 and no clutter: an empty scan carries no information
        let mut m = small_model();
        m.p_detect = 0.0;
        m.lambda_clutter = 0.0;
        m.rho_clutter = 0.0;
        let pred = tphd_predict(&TrajectoryMixture::empty(), &m, 1);
        let pmf = CardinalityPmf::from_masses(vec![0.2, 0.5, 0.3]).unwrap();
        let (_, post) = tcphd_update(&pred, &pmf, &[], &[], &m).unwrap();
        for n in 0..=2 {
            assert_relative_eq!(post.prob(n), pmf.prob(n), epsilon = 1e-12);
        }
    }

    #[test]
    fn posterior_pmf_normalizes() {
        let m = small_model();
        let (pred, pmf) = tcphd_predict(
            &TrajectoryMixture::empty(),
            &CardinalityPmf::delta(0, m.n_max),
            &m,
            1,
        )
        .unwrap();
        let z = [
            Measurement::new(0.1, 0.3),
            Measurement::new(0.8, -0.4),
            Measurement::new(20.5, 19.2),
        ];
        let parts = all_partitions(&z).unwrap();
        let (post, post_pmf) = tcphd_update(&pred, &pmf, &z, &parts, &m).unwrap();
        assert_relative_eq!(post_pmf.sum(), 1.0, epsilon = 1e-9);
        assert!(post_pmf.probs().iter().all(|&p| p >= 0.0));
        assert!(post.components.iter().all(|c| c.weight >= 0.0));
        // denominator positive whenever Z and parts are nonempty
        let coeff = compute_coefficients(&pred, &pmf, &z, &parts, &m).unwrap();
        assert!(coeff.log_denominator > f64::NEG_INFINITY);
    }
}
