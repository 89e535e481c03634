/// Stratum index (0-based) for every row: rows are ranked by propensity,
/// ties broken by row index, and rank `r` goes to stratum `floor(r M / n)`.
pub fn stratify_by_propensity(propensity: &[f64], m: usize) -> Vec<usize> {
    assert!(m >= 1, "need at least one stratum");
    let n = propensity.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| propensity[a].total_cmp(&propensity[b]).then(a.cmp(&b)));
    let mut strata = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        strata[i] = rank * m / n;
    }
    strata
}

/// One replicate's estimates, truth and propensities.
#[derive(Debug, Clone, Copy)]
pub struct Replicate<'a> {
    pub tau_hat: &'a [f64],
    pub true_tau: &'a [f64],
    pub propensity: &'a [f64],
}

/// Within-stratum summaries of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StratumStat {
    pub count: usize,
    pub mean_tau_hat: f64,
    pub mean_tau: f64,
    pub mean_sq_error: f64,
}

pub fn replicate_strata(rep: &Replicate<'_>, m: usize) -> Vec<StratumStat> {
    let strata = stratify_by_propensity(rep.propensity, m);
    let mut acc = vec![StratumStat::default(); m];
    for (i, &s) in strata.iter().enumerate() {
        let a = &mut acc[s];
        let e = rep.tau_hat[i] - rep.true_tau[i];
        a.count += 1;
        a.mean_tau_hat += rep.tau_hat[i];
        a.mean_tau += rep.true_tau[i];
        a.mean_sq_error += e * e;
    }
    for a in &mut acc {
        if a.count > 0 {
            let c = a.count as f64;
            a.mean_tau_hat /= c;
            a.mean_tau /= c;
            a.mean_sq_error /= c;
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedMetrics {
    pub m: usize,
    pub bias: Vec<f64>,
    pub rmse: Vec<f64>,
    /// Rows falling in each stratum, summed over replicates.
    pub stratum_counts: Vec<usize>,
    /// Replicates in which each stratum was non-empty.
    pub b_effective: Vec<usize>,
}

impl StratifiedMetrics {
    /// Combines per-replicate stratum summaries, in replicate order.
    pub fn from_strata(per_replicate: &[Vec<StratumStat>], m: usize) -> Self {
        let mut bias = vec![0.0; m];
        let mut rmse = vec![0.0; m];
        let mut counts = vec![0; m];
        let mut b_eff = vec![0; m];
        for k in 0..m {
            let (mut hat, mut tau, mut mse) = (0.0, 0.0, 0.0);
            for rep in per_replicate {
                let s = rep[k];
                if s.count == 0 {
                    continue;
                }
                counts[k] += s.count;
                b_eff[k] += 1;
                hat += s.mean_tau_hat;
                tau += s.mean_tau;
                mse += s.mean_sq_error;
            }
            let b = b_eff[k] as f64;
            if b_eff[k] == 0 {
                bias[k] = f64::NAN;
                rmse[k] = f64::NAN;
            } else {
                bias[k] = hat / b - tau / b;
                rmse[k] = (mse / b).sqrt();
            }
        }
        StratifiedMetrics {
            m,
            bias,
            rmse,
            stratum_counts: counts,
            b_effective: b_eff,
        }
    }

    /// Mean of the per-stratum RMSE values over strata seen at least once.
    pub fn aggregate_rmse(&self) -> f64 {
        mean_finite(&self.rmse)
    }

    pub fn mean_abs_bias(&self) -> f64 {
        let abs: Vec<f64> = self.bias.iter().map(|b| b.abs()).collect();
        mean_finite(&abs)
    }
}

fn mean_finite(v: &[f64]) -> f64 {
    let (s, c) = v
        .iter()
        .filter(|x| x.is_finite())
        .fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

pub fn conditional_metrics(replicates: &[Replicate<'_>], m: usize) -> StratifiedMetrics {
    let strata: Vec<Vec<StratumStat>> = replicates.iter().map(|r| replicate_strata(r, m)).collect();
    StratifiedMetrics::from_strata(&strata, m)
}
