//! Brute-force reference implementations used by tests only.
//!
//! Everything here is written as plain scalar/small-matrix arithmetic,
//! deliberately independent of the log-domain filtering code paths it is
//! used to check. Keep it that way: no calls into [`crate::tphd`],
//! [`crate::tcphd`], [`crate::extent`] or [`crate::metrics::trajectory_metric`].

use nalgebra::{Matrix2, Matrix4, Matrix4x2, Vector2, Vector4};

use crate::types::{Measurement, ModelConfig, Partition, TargetState};

/// Plain bivariate normal density.
pub fn mvn2_pdf(z: &Vector2<f64>, mean: &Vector2<f64>, cov: &Matrix2<f64>) -> f64 {
    let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
    let d = z - mean;
    let quad =
        (cov[(1, 1)] * d[0] * d[0] - 2.0 * cov[(0, 1)] * d[0] * d[1] + cov[(0, 0)] * d[1] * d[1])
            / det;
    (-0.5 * quad).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

/// Single-target measurement likelihood of a cell, evaluated at a state.
pub fn naive_cell_likelihood(x: &TargetState, cell: &[Measurement], m: &ModelConfig) -> f64 {
    let s = x.shape.shape_factor();
    let cov = x.cov_kin.fixed_view::<2, 2>(0, 0) + s * m.q_mult * s.transpose() + m.q_meas;
    let mean = Vector2::new(x.kin.px, x.kin.py);
    cell.iter()
        .map(|z| mvn2_pdf(&z.as_vector(), &mean, &cov))
        .product()
}

/// Textbook sequential linear-Gaussian Kalman update of a 4-state
/// constant-velocity track against position measurements with noise `r`.
pub fn kalman_sequential_update(
    mean: &Vector4<f64>,
    cov: &Matrix4<f64>,
    measurements: &[Vector2<f64>],
    r: &Matrix2<f64>,
) -> (Vector4<f64>, Matrix4<f64>) {
    let mut x = *mean;
    let mut p = *cov;
    for z in measurements {
        let s = p.fixed_view::<2, 2>(0, 0) + r;
        let s_inv = s.try_inverse().expect("oracle innovation covariance");
        let pht: Matrix4x2<f64> = p.fixed_columns::<2>(0).into_owned();
        let k = pht * s_inv;
        let innovation = z - Vector2::new(x[0], x[1]);
        x += k * innovation;
        p -= k * pht.transpose();
    }
    (x, p)
}

/// Scalar evaluation of the extended-target PHD update for a single
/// predicted component: returns the missed-detection weight and one weight
/// per (partition, cell) in input order.
pub fn naive_tphd_weights(
    weight: f64,
    state: &TargetState,
    z: &[Measurement],
    parts: &[Partition],
    m: &ModelConfig,
) -> (f64, Vec<Vec<f64>>) {
    let e_gamma = (-m.gamma).exp();
    let missed = (1.0 - (1.0 - e_gamma) * m.p_detect) * weight;

    let lik = |cell: &[usize]| -> f64 {
        let zc: Vec<Measurement> = cell.iter().map(|&i| z[i]).collect();
        naive_cell_likelihood(state, &zc, m)
    };
    let varsigma = |cell: &[usize]| -> f64 {
        m.p_detect * e_gamma * m.gamma.powi(cell.len() as i32) * lik(cell) * weight
    };
    let varrho = |cell: &[usize]| -> f64 {
        if cell.len() == 1 {
            m.rho_clutter
        } else {
            0.0
        }
    };

    let products: Vec<f64> = parts
        .iter()
        .map(|p| p.cells.iter().map(|c| varrho(c) + varsigma(c)).product())
        .collect();
    let norm: f64 = products.iter().sum();

    let detections = parts
        .iter()
        .zip(&products)
        .map(|(p, &prod)| {
            let w_p = prod / norm;
            p.cells
                .iter()
                .map(|c| {
                    m.p_detect * e_gamma * w_p / (varrho(c) + varsigma(c))
                        * m.gamma.powi(c.len() as i32)
                        * lik(c)
                        * weight
                })
                .collect()
        })
        .collect();
    (missed, detections)
}

/// Scalar evaluation of the cardinalized update for a single predicted
/// component: missed weight, per-(partition, cell) detection weights and the
/// unnormalized posterior cardinality masses.
#[allow(clippy::type_complexity)]
pub fn naive_tcphd(
    weight: f64,
    state: &TargetState,
    pmf_pred: &[f64],
    z: &[Measurement],
    parts: &[Partition],
    m: &ModelConfig,
) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let e_gamma = (-m.gamma).exp();
    let e_lambda = (-m.lambda_clutter).exp();
    let upsilon = 1.0 - m.p_detect + m.p_detect * e_gamma;
    let fact = |n: usize| -> f64 { (1..=n).map(|i| i as f64).product() };
    let prob = |n: i64| -> f64 {
        if n < 0 {
            0.0
        } else {
            pmf_pred.get(n as usize).copied().unwrap_or(0.0)
        }
    };
    // n-th derivative of the predicted-cardinality PGF at upsilon
    let g = |n: i64| -> f64 {
        if n < 0 {
            return 0.0;
        }
        let n = n as usize;
        (n..pmf_pred.len())
            .map(|l| fact(l) / fact(l - n) * upsilon.powi((l - n) as i32) * prob(l as i64))
            .sum()
    };
    // Poisson measurement-count and clutter-count PGF derivatives at zero
    let g_z = |count: usize| -> f64 { m.gamma.powi(count as i32) * e_gamma };
    let g_fa = |count: usize| -> f64 { m.lambda_clutter.powi(count as i32) * e_lambda };
    let lik = |cell: &[usize]| -> f64 {
        let zc: Vec<Measurement> = cell.iter().map(|&i| z[i]).collect();
        naive_cell_likelihood(state, &zc, m)
    };

    // per partition: varpi, vartheta, epsilon, mu, nu
    let mut varpi: Vec<Vec<f64>> = Vec::new();
    let mut vartheta: Vec<Vec<f64>> = Vec::new();
    let mut epsilon: Vec<Vec<f64>> = Vec::new();
    let mut mu: Vec<Vec<f64>> = Vec::new();
    let mut nu: Vec<Vec<f64>> = Vec::new();
    for p in parts {
        let cells = p.cells.len();
        let w: Vec<f64> = p
            .cells
            .iter()
            .map(|c| m.p_detect * g_z(c.len()) * lik(c) / m.rho_clutter.powi(c.len() as i32))
            .collect();
        let th: Vec<f64> = (0..cells)
            .map(|ci| {
                (0..cells)
                    .filter(|&cj| cj != ci)
                    .map(|cj| w[cj])
                    .product()
            })
            .collect();
        let eps: Vec<f64> = p
            .cells
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                e_lambda * g(cells as i64) * w[ci] / cells as f64
                    + g_fa(c.len()) * g(cells as i64 - 1)
            })
            .collect();
        let mu_p: Vec<f64> = p
            .cells
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                e_lambda * g(cells as i64 + 1) * w[ci] / cells as f64
                    + g_fa(c.len()) * g(cells as i64)
            })
            .collect();
        let nu_p: Vec<f64> = (0..cells)
            .map(|ci| {
                th[ci] / cells as f64 * e_lambda * g(cells as i64)
                    + (0..cells)
                        .filter(|&cj| cj != ci)
                        .map(|cj| th[cj] * eps[cj])
                        .sum::<f64>()
                        / w[ci]
            })
            .collect();
        varpi.push(w);
        vartheta.push(th);
        epsilon.push(eps);
        mu.push(mu_p);
        nu.push(nu_p);
    }

    let denom: f64 = vartheta
        .iter()
        .zip(&epsilon)
        .flat_map(|(t, e)| t.iter().zip(e).map(|(&a, &b)| a * b))
        .sum();
    let kappa: f64 = vartheta
        .iter()
        .zip(&mu)
        .flat_map(|(t, u)| t.iter().zip(u).map(|(&a, &b)| a * b))
        .sum::<f64>()
        / denom;

    // missed-detection branch over the mass-normalized predicted PHD; for a
    // single component the normalized weight is one
    let missed = kappa * (1.0 - (1.0 - e_gamma) * m.p_detect) * (weight / weight);
    let detections: Vec<Vec<f64>> = parts
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            p.cells
                .iter()
                .enumerate()
                .map(|(ci, c)| {
                    // single component: normalized weight is one
                    m.p_detect * nu[pi][ci] * g_z(c.len()) * lik(c)
                        / m.rho_clutter.powi(c.len() as i32)
                        / denom
                })
                .collect()
        })
        .collect();

    // posterior cardinality, unnormalized
    let masses: Vec<f64> = (0..pmf_pred.len())
        .map(|n| {
            let gn0 = fact(n) * prob(n as i64);
            if gn0 == 0.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            for (pi, p) in parts.iter().enumerate() {
                let cells = p.cells.len();
                for (ci, c) in p.cells.iter().enumerate() {
                    let t1 = if n >= cells {
                        e_lambda * varpi[pi][ci] / cells as f64
                            * upsilon.powi((n - cells) as i32)
                            / fact(n - cells)
                    } else {
                        0.0
                    };
                    let t2 = if n + 1 >= cells {
                        g_fa(c.len()) * upsilon.powi((n + 1 - cells) as i32)
                            / fact(n + 1 - cells)
                    } else {
                        0.0
                    };
                    acc += vartheta[pi][ci] * (t1 + t2);
                }
            }
            gn0 * acc / denom
        })
        .collect();

    (missed, detections, masses)
}

/// Exhaustive trajectory-metric evaluation: minimizes the summed step and
/// switch costs over every per-step assignment sequence. Exponential; keep
/// the instances tiny.
pub fn brute_force_tm(
    truth: &[Vec<Option<(Vector2<f64>, Matrix2<f64>)>>],
    estimates: &[Vec<Option<(Vector2<f64>, Matrix2<f64>)>>],
    cutoff: f64,
    order: f64,
    switch_cost: f64,
) -> f64 {
    let steps = truth
        .first()
        .map(|t| t.len())
        .or_else(|| estimates.first().map(|e| e.len()))
        .unwrap_or(0);
    let n = truth.len();
    let m = estimates.len();
    let half = cutoff.powf(order) / 2.0;

    // all injective partial assignments
    let mut states: Vec<Vec<Option<usize>>> = Vec::new();
    fn gen(
        i: usize,
        n: usize,
        m: usize,
        cur: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<Option<usize>>>,
    ) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        cur[i] = None;
        gen(i + 1, n, m, cur, used, out);
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                cur[i] = Some(j);
                gen(i + 1, n, m, cur, used, out);
                cur[i] = None;
                used[j] = false;
            }
        }
    }
    gen(
        0,
        n,
        m,
        &mut vec![None; n],
        &mut vec![false; m],
        &mut states,
    );

    let wasserstein = |a: &(Vector2<f64>, Matrix2<f64>), b: &(Vector2<f64>, Matrix2<f64>)| -> f64 {
        // independent sqrt-GWD via eigendecomposition of the 2x2 blocks
        let sqrtm = |x: &Matrix2<f64>| {
            let eig = nalgebra::SymmetricEigen::new(*x);
            &eig.eigenvectors
                * Matrix2::from_diagonal(&eig.eigenvalues.map(|e| e.max(0.0).sqrt()))
                * eig.eigenvectors.transpose()
        };
        let s1 = sqrtm(&a.1);
        let inner = sqrtm(&(s1 * b.1 * s1));
        let sq = (a.0 - b.0).norm_squared() + (a.1 + b.1 - 2.0 * inner).trace();
        sq.max(0.0).sqrt()
    };

    let step_cost = |k: usize, s: &[Option<usize>]| -> f64 {
        let mut cost = 0.0;
        let mut used = vec![false; m];
        for i in 0..n {
            match s[i] {
                None => {
                    if truth[i][k].is_some() {
                        cost += half;
                    }
                }
                Some(j) => {
                    used[j] = true;
                    cost += match (&truth[i][k], &estimates[j][k]) {
                        (Some(a), Some(b)) => wasserstein(a, b).min(cutoff).powf(order),
                        (Some(_), None) | (None, Some(_)) => half,
                        (None, None) => 0.0,
                    };
                }
            }
        }
        for (j, &u) in used.iter().enumerate() {
            if estimates[j][k].is_some() && !u {
                cost += half;
            }
        }
        cost
    };
    let switch = |a: &[Option<usize>], b: &[Option<usize>]| -> f64 {
        let mut units = 0.0;
        for i in 0..n {
            units += match (a[i], b[i]) {
                (None, None) => 0.0,
                (None, Some(_)) | (Some(_), None) => 0.5,
                (Some(x), Some(y)) if x == y => 0.0,
                _ => 1.0,
            };
        }
        switch_cost.powf(order) * units
    };

    fn search(
        k: usize,
        steps: usize,
        prev: Option<usize>,
        acc: f64,
        best: &mut f64,
        states: &[Vec<Option<usize>>],
        step_cost: &dyn Fn(usize, &[Option<usize>]) -> f64,
        switch: &dyn Fn(&[Option<usize>], &[Option<usize>]) -> f64,
    ) {
        if acc >= *best {
            return;
        }
        if k == steps {
            *best = acc;
            return;
        }
        for (si, s) in states.iter().enumerate() {
            let mut cost = acc + step_cost(k, s);
            if let Some(p) = prev {
                cost += switch(&states[p], s);
            }
            search(k + 1, steps, Some(si), cost, best, states, step_cost, switch);
        }
    }

    let mut best = f64::INFINITY;
    search(
        0, steps, None, 0.0, &mut best, &states, &step_cost, &switch,
    );
    best.powf(1.0 / order)
}
