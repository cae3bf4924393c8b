//! Linear models: logistic regression (full-batch gradient descent on
//! cross-entropy) and a linear SVM (full-batch subgradient descent on
//! hinge loss). Both use L2 regularization on the weights (not the bias)
//! and a 1/t learning-rate decay; weights start at zero, so the fits are
//! deterministic.

use serde::{Deserialize, Serialize};

use super::{Hyperparams, TrainSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Logistic,
    Svm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearModel {
    #[inline]
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    /// Score in [0, 1]; the decision boundary margin = 0 maps to 0.5 for
    /// both kinds.
    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

/// Mean cross-entropy plus L2 penalty; the objective minimized by
/// `fit_logistic`. Exposed for gradient verification.
pub fn logistic_loss(w: &[f64], b: f64, ts: &TrainSet, l2: f64) -> f64 {
    let n = ts.len() as f64;
    let mut loss = 0.0;
    for i in 0..ts.len() {
        let z = w.iter().zip(ts.row(i)).map(|(wj, x)| wj * x).sum::<f64>() + b;
        let y = ts.y[i] as u8 as f64;
        // log(1 + e^-|z|) form avoids overflow for large |z|.
        loss += (1.0 + (-z.abs()).exp()).ln() + z.max(0.0) - y * z;
    }
    loss / n + 0.5 * l2 * w.iter().map(|wj| wj * wj).sum::<f64>()
}

/// Analytic gradient of `logistic_loss` with respect to (w, b).
pub fn logistic_grad(w: &[f64], b: f64, ts: &TrainSet, l2: f64) -> (Vec<f64>, f64) {
    let n = ts.len() as f64;
    let mut gw = vec![0.0; ts.d];
    let mut gb = 0.0;
    for i in 0..ts.len() {
        let row = ts.row(i);
        let z = w.iter().zip(row).map(|(wj, x)| wj * x).sum::<f64>() + b;
        let err = sigmoid(z) - ts.y[i] as u8 as f64;
        for (g, x) in gw.iter_mut().zip(row) {
            *g += err * x;
        }
        gb += err;
    }
    for (g, wj) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wj;
    }
    (gw, gb / n)
}

/// Mean hinge loss plus L2 penalty; the objective minimized by `fit_svm`.
pub fn hinge_loss(w: &[f64], b: f64, ts: &TrainSet, l2: f64) -> f64 {
    let n = ts.len() as f64;
    let mut loss = 0.0;
    for i in 0..ts.len() {
        let z = w.iter().zip(ts.row(i)).map(|(wj, x)| wj * x).sum::<f64>() + b;
        let y = if ts.y[i] { 1.0 } else { -1.0 };
        loss += (1.0 - y * z).max(0.0);
    }
    loss / n + 0.5 * l2 * w.iter().map(|wj| wj * wj).sum::<f64>()
}

/// Subgradient of `hinge_loss`; at the hinge kink the zero branch is
/// chosen (margin exactly 1 contributes nothing).
pub fn hinge_grad(w: &[f64], b: f64, ts: &TrainSet, l2: f64) -> (Vec<f64>, f64) {
    let n = ts.len() as f64;
    let mut gw = vec![0.0; ts.d];
    let mut gb = 0.0;
    for i in 0..ts.len() {
        let row = ts.row(i);
        let z = w.iter().zip(row).map(|(wj, x)| wj * x).sum::<f64>() + b;
        let y = if ts.y[i] { 1.0 } else { -1.0 };
        if y * z < 1.0 {
            for (g, x) in gw.iter_mut().zip(row) {
                *g -= y * x;
            }
            gb -= y;
        }
    }
    for (g, wj) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wj;
    }
    (gw, gb / n)
}

fn descend(
    ts: &TrainSet,
    hp: &Hyperparams,
    kind: LinearKind,
    grad: impl Fn(&[f64], f64, &TrainSet, f64) -> (Vec<f64>, f64),
) -> LinearModel {
    let mut w = vec![0.0; ts.d];
    let mut b = 0.0;
    for epoch in 0..hp.epochs {
        let lr = hp.learning_rate / (1.0 + epoch as f64);
        let (gw, gb) = grad(&w, b, ts, hp.l2);
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= lr * g;
        }
        b -= lr * gb;
    }
    LinearModel { kind, weights: w, bias: b }
}

pub fn fit_logistic(ts: &TrainSet, hp: &Hyperparams) -> LinearModel {
    descend(ts, hp, LinearKind::Logistic, logistic_grad)
}

pub fn fit_svm(ts: &TrainSet, hp: &Hyperparams) -> LinearModel {
    descend(ts, hp, LinearKind::Svm, hinge_grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts<'a>(x: &'a [f64], d: usize, y: &'a [bool]) -> TrainSet<'a> {
        TrainSet::new(x, d, y).unwrap()
    }

    fn separable() -> (Vec<f64>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let off = (i % 10) as f64 * 0.05;
            if i % 2 == 0 {
                x.extend_from_slice(&[1.0 + off, 2.0 - off]);
                y.push(true);
            } else {
                x.extend_from_slice(&[-1.0 - off, -2.0 + off]);
                y.push(false);
            }
        }
        (x, y)
    }

    /// Central finite differences against the analytic gradient.
    fn check_gradient(
        loss: impl Fn(&[f64], f64, &TrainSet, f64) -> f64,
        grad: impl Fn(&[f64], f64, &TrainSet, f64) -> (Vec<f64>, f64),
        w: &[f64],
        b: f64,
    ) -> f64 {
        let (x, y) = separable();
        let data = ts(&x, 2, &y);
        let l2 = 1e-4;
        let (gw, gb) = grad(w, b, &data, l2);
        let h = 1e-6;
        let mut max_err: f64 = 0.0;
        for j in 0..w.len() {
            let mut wp = w.to_vec();
            let mut wm = w.to_vec();
            wp[j] += h;
            wm[j] -= h;
            let num = (loss(&wp, b, &data, l2) - loss(&wm, b, &data, l2)) / (2.0 * h);
            max_err = max_err.max((num - gw[j]).abs());
        }
        let num_b = (loss(w, b + h, &data, l2) - loss(w, b - h, &data, l2)) / (2.0 * h);
        max_err.max((num_b - gb).abs())
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        for (w, b) in [
            (vec![0.0, 0.0], 0.0),
            (vec![0.3, -0.7], 0.2),
            (vec![-1.5, 2.0], -0.4),
        ] {
            let err = check_gradient(logistic_loss, logistic_grad, &w, b);
            assert!(err <= 1e-5, "gradient error {err}");
        }
    }

    #[test]
    fn hinge_subgradient_matches_finite_differences_off_kink() {
        // Points chosen so no sample sits exactly on the hinge.
        for (w, b) in [(vec![0.3, -0.7], 0.2), (vec![-1.5, 2.0], -0.4)] {
            let err = check_gradient(hinge_loss, hinge_grad, &w, b);
            assert!(err <= 1e-5, "subgradient error {err}");
        }
    }

    #[test]
    fn logistic_separates_separable_data() {
        let (x, y) = separable();
        let data = ts(&x, 2, &y);
        let m = fit_logistic(&data, &Hyperparams::default());
        for i in 0..data.len() {
            assert_eq!(m.score(data.row(i)) >= 0.5, y[i]);
        }
    }

    #[test]
    fn svm_separates_separable_data() {
        let (x, y) = separable();
        let data = ts(&x, 2, &y);
        let m = fit_svm(&data, &Hyperparams::default());
        for i in 0..data.len() {
            assert_eq!(m.score(data.row(i)) >= 0.5, y[i]);
        }
    }

    #[test]
    fn descent_reduces_loss() {
        let (x, y) = separable();
        let data = ts(&x, 2, &y);
        let hp = Hyperparams::default();
        let m = fit_logistic(&data, &hp);
        let trained = logistic_loss(&m.weights, m.bias, &data, hp.l2);
        let at_zero = logistic_loss(&vec![0.0; 2], 0.0, &data, hp.l2);
        assert!(trained < at_zero);
        let s = fit_svm(&data, &hp);
        assert!(hinge_loss(&s.weights, s.bias, &data, hp.l2) < hinge_loss(&vec![0.0; 2], 0.0, &data, hp.l2));
    }

    #[test]
    fn stronger_l2_shrinks_weights() {
        let (x, y) = separable();
        let data = ts(&x, 2, &y);
        let weak = fit_logistic(&data, &Hyperparams { l2: 1e-6, ..Default::default() });
        let strong = fit_logistic(&data, &Hyperparams { l2: 1.0, ..Default::default() });
        let norm = |m: &LinearModel| m.weights.iter().map(|w| w * w).sum::<f64>();
        assert!(norm(&strong) < norm(&weak));
    }

    #[test]
    fn sigmoid_midpoint_and_saturation() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(40.0) > 0.999_999);
        assert!(sigmoid(-40.0) < 1e-6);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
