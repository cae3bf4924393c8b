//! Gaussian naive Bayes with per-class feature means/variances and a
//! variance floor so constant features stay finite.

use serde::{Deserialize, Serialize};

use super::{Hyperparams, TrainSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub prior_pos: f64,
    pub mean_pos: Vec<f64>,
    pub var_pos: Vec<f64>,
    pub mean_neg: Vec<f64>,
    pub var_neg: Vec<f64>,
    pub variance_floor: f64,
}

impl GaussianNb {
    pub fn n_features(&self) -> usize {
        self.mean_pos.len()
    }

    fn log_likelihood(&self, row: &[f64], mean: &[f64], var: &[f64]) -> f64 {
        let mut ll = 0.0;
        for ((x, m), v) in row.iter().zip(mean).zip(var) {
            ll += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m).powi(2) / (2.0 * v);
        }
        ll
    }

    /// Posterior probability of the positive class.
    pub fn score(&self, row: &[f64]) -> f64 {
        let lp = self.prior_pos.ln() + self.log_likelihood(row, &self.mean_pos, &self.var_pos);
        let ln = (1.0 - self.prior_pos).ln() + self.log_likelihood(row, &self.mean_neg, &self.var_neg);
        // Stable two-class softmax.
        let m = lp.max(ln);
        let ep = (lp - m).exp();
        let en = (ln - m).exp();
        ep / (ep + en)
    }
}

fn class_stats(ts: &TrainSet, label: bool, floor: f64) -> (Vec<f64>, Vec<f64>, usize) {
    let mut mean = vec![0.0; ts.d];
    let mut count = 0usize;
    for i in 0..ts.len() {
        if ts.y[i] == label {
            count += 1;
            for (m, x) in mean.iter_mut().zip(ts.row(i)) {
                *m += x;
            }
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut var = vec![0.0; ts.d];
    for i in 0..ts.len() {
        if ts.y[i] == label {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(ts.row(i)) {
                *v += (x - m) * (x - m);
            }
        }
    }
    for v in &mut var {
        *v = (*v / count as f64).max(floor);
    }
    (mean, var, count)
}

pub fn fit_nb(ts: &TrainSet, hp: &Hyperparams) -> GaussianNb {
    let (mean_pos, var_pos, n_pos) = class_stats(ts, true, hp.variance_floor);
    let (mean_neg, var_neg, _) = class_stats(ts, false, hp.variance_floor);
    GaussianNb {
        prior_pos: n_pos as f64 / ts.len() as f64,
        mean_pos,
        var_pos,
        mean_neg,
        var_neg,
        variance_floor: hp.variance_floor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundary_near_analytic_midpoint_for_equal_variance_classes() {
        // Two 1-D Gaussians, equal spread and priors: the Bayes boundary
        // is the midpoint of the means.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..4000 {
            let g: f64 = rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0);
            x.push(g);
            y.push(false);
            x.push(g + 4.0);
            y.push(true);
        }
        let ts = TrainSet::new(&x, 1, &y).unwrap();
        let m = fit_nb(&ts, &Hyperparams::default());
        // Bisect the score for the 0.5 crossing.
        let (mut lo, mut hi) = (0.0f64, 4.0f64);
        for _ in 0..60 {
            let mid = (lo + hi) / 2.0;
            if m.score(&[mid]) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let boundary = (lo + hi) / 2.0;
        assert!((boundary - 2.0).abs() <= 0.05, "boundary {boundary}");
    }

    #[test]
    fn variance_floor_keeps_constant_features_finite() {
        let x = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0];
        let y = [false, false, true, true];
        let ts = TrainSet::new(&x, 2, &y).unwrap();
        let m = fit_nb(&ts, &Hyperparams::default());
        assert!(m.var_pos[0] >= 1e-9 && m.var_neg[0] >= 1e-9);
        let s = m.score(&[1.0, 2.5]);
        assert!(s.is_finite() && (0.0..=1.0).contains(&s));
    }

    #[test]
    fn skewed_priors_shift_scores() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            x.push(if i < 90 { 0.0 } else { 1.0 } + (i % 7) as f64 * 0.01);
            y.push(i >= 90);
        }
        let ts = TrainSet::new(&x, 1, &y).unwrap();
        let m = fit_nb(&ts, &Hyperparams::default());
        assert!((m.prior_pos - 0.1).abs() < 1e-12);
        // Far from both classes the prior dominates.
        assert!(m.score(&[0.02]) < 0.5);
    }

    #[test]
    fn recovers_known_class_statistics() {
        let x = [1.0, 3.0, 10.0, 14.0];
        let y = [false, false, true, true];
        let ts = TrainSet::new(&x, 1, &y).unwrap();
        let m = fit_nb(&ts, &Hyperparams::default());
        assert_eq!(m.mean_neg[0], 2.0);
        assert_eq!(m.var_neg[0], 1.0);
        assert_eq!(m.mean_pos[0], 12.0);
        assert_eq!(m.var_pos[0], 4.0);
    }
}
