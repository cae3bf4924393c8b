//! Randomized properties of the pipeline and the tree learner.

use proptest::prelude::*;

use cet::frame::SignalMatrix;
use cet::ml::{self, Algorithm, Hyperparams, TrainSet};
use cet::model::{DosLevel, ScenarioState, TripCause};
use cet::pipeline::{self, LabelRule, ScaleMethod};

proptest! {
    #[test]
    fn window_count_matches_closed_form(
        w in 1usize..60,
        extra in 0usize..400,
        step in 1usize..12,
    ) {
        let t = w + extra;
        prop_assert_eq!(pipeline::window_count(t, w, step), (t - w) / step + 1);
    }

    /// `windowize` produces exactly the closed-form number of windows.
    #[test]
    fn windowize_length_matches_formula(
        w in 2usize..15,
        extra in 0usize..60,
        step in 1usize..6,
        seed in 0u64..1000,
    ) {
        let t = w + extra;
        let mut m = SignalMatrix::zeros(2, t);
        let mut v = seed as f64;
        for s in 0..2 {
            for i in 0..t {
                v = (v * 1.1 + 1.0) % 97.0;
                m.set(s, i, v);
            }
        }
        let states = vec![ScenarioState::NORMAL; t];
        let ws = pipeline::windowize(
            &m,
            &states,
            &|s: &ScenarioState| !s.trip_available,
            w,
            step,
            LabelRule::AnyPositive,
            "p",
        ).unwrap();
        prop_assert_eq!(ws.len(), (t - w) / step + 1);
    }

    /// Min-max scaling of a non-degenerate signal inverts exactly.
    #[test]
    fn minmax_scaler_inverts(values in prop::collection::vec(-1e4f64..1e4, 20..60)) {
        let t = values.len();
        let mut m = SignalMatrix::zeros(1, t);
        for (i, &v) in values.iter().enumerate() {
            m.set(0, i, v);
        }
        let states = vec![ScenarioState::NORMAL; t];
        let ws = pipeline::windowize(
            &m,
            &states,
            &|s: &ScenarioState| !s.trip_available,
            5,
            1,
            LabelRule::AnyPositive,
            "p",
        ).unwrap();
        let scaler = pipeline::fit_scaler(&ws, ScaleMethod::MinMax);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi - lo > 1e-6);
        let scaled = pipeline::apply_scaler(&scaler, &ws).unwrap();
        for i in 0..ws.len() {
            for (orig, s) in ws.row(i).iter().zip(scaled.row(i)) {
                let back = scaler.invert(0, *s);
                let tol = 1e-9 * orig.abs().max(1.0);
                prop_assert!((back - orig).abs() <= tol, "{} vs {}", back, orig);
            }
        }
    }

    /// Strictly increasing per-feature transforms leave the tree's
    /// training-point predictions unchanged: splits depend on order only.
    #[test]
    fn tree_invariant_under_monotone_transform(
        seed in 0u64..500,
        scale in 0.1f64..5.0,
        shift in -10.0f64..10.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 30;
        let d = 3;
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let label = rng.gen_bool(0.5);
            y.push(label);
            for j in 0..d {
                let bias = if label && j == 0 { 0.8 } else { 0.0 };
                x.push(rng.gen_range(-1.0..1.0) + bias);
            }
        }
        prop_assume!(y.iter().any(|&v| v) && y.iter().any(|&v| !v));
        // Cubic-plus-affine transform: strictly increasing.
        let f = |v: f64| scale * v + shift + v * v * v;
        let xt: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let hp = Hyperparams::default();
        let ts = TrainSet::new(&x, d, &y).unwrap();
        let tst = TrainSet::new(&xt, d, &y).unwrap();
        let m1 = ml::train(Algorithm::DecisionTree, &hp, &ts, 0).unwrap();
        let m2 = ml::train(Algorithm::DecisionTree, &hp, &tst, 0).unwrap();
        for i in 0..n {
            let row = &x[i * d..(i + 1) * d];
            let rowt = &xt[i * d..(i + 1) * d];
            prop_assert_eq!(m1.predict(row).unwrap(), m2.predict(rowt).unwrap());
        }
    }
}

#[test]
fn degenerate_state_not_constructible() {
    // trip available + malfunction cause is contradictory.
    let s = ScenarioState { trip_available: true, trip_cause: TripCause::Malfunction, fdi_level: 0, dos_level: DosLevel::None };
    assert!(!s.is_valid());
}
