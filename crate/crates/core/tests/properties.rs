mod common;

use common::checks;
use gelfusion::data_io::container::{decode_container, encode_container, Record, DATASET_MAGIC};
use gelfusion::data_io::fmt6;
use gelfusion::numerics::{softmax, Tensor};
use gelfusion::policy::rot6d::{det3, rot6d_to_matrix};
use gelfusion::policy::{DiffusionSchedule, MinMax};
use gelfusion::simenv::ActionCommand;
use gelfusion::tactile::{dynamic_stats, residual_binarize};
use proptest::prelude::*;

#[test]
fn fusion_algebra_small() {
    checks::fusion_algebra(500).unwrap();
}

#[test]
fn dynamic_closed_forms_small() {
    checks::dynamic_closed_forms(500).unwrap();
}

#[test]
fn rotations_small() {
    checks::rotation_round_trips(1000).unwrap();
}

proptest! {
    #[test]
    fn softmax_is_shift_invariant(x in prop::collection::vec(-20.0f64..20.0, 1..8), c in -50.0f64..50.0) {
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let a = softmax(&Tensor::new(&[1, x.len()], x.clone()).unwrap());
        let b = softmax(&Tensor::new(&[1, x.len()], shifted).unwrap());
        prop_assert!((a.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (p, q) in a.data().iter().zip(b.data()) {
            prop_assert!(*p >= 0.0 && (p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_is_binary_and_symmetric(
        a in prop::collection::vec(0.0f32..1.0, 16..64),
        tau in 0.0f64..0.5,
    ) {
        let b: Vec<f32> = a.iter().rev().copied().collect();
        let r1 = residual_binarize(&a, &b, tau).unwrap();
        let r2 = residual_binarize(&b, &a, tau).unwrap();
        prop_assert_eq!(&r1, &r2);
        let st = dynamic_stats(&r1).unwrap();
        prop_assert!((0.0..=0.25).contains(&st.var));
        prop_assert!((0.0..=1.0).contains(&st.mean));
    }

    #[test]
    fn rot6d_always_orthonormal(r in prop::array::uniform6(-5.0f64..5.0)) {
        if let Ok(m) = rot6d_to_matrix(&r) {
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() < 1e-5);
                }
            }
            prop_assert!((det3(&m) - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn schedule_is_monotone(t in 1usize..200, lo in 1e-5f64..1e-2, span in 0.0f64..0.3) {
        let s = DiffusionSchedule::new(t, lo, lo + span).unwrap();
        prop_assert!(s.alpha_bar.windows(2).all(|w| w[1] < w[0]));
        for k in 1..=t {
            let s2 = s.sigma2(k).unwrap();
            prop_assert!(s2 >= 0.0 && s2 <= s.beta[k - 1] + 1e-15);
        }
    }

    #[test]
    fn minmax_round_trip(rows in prop::collection::vec(prop::array::uniform3(-10.0f32..10.0), 1..20)) {
        let m = MinMax::fit(3, rows.iter().map(|r| &r[..]));
        for r in &rows {
            let mut x = r.to_vec();
            m.normalize(&mut x);
            prop_assert!(x.iter().all(|v| (-1.0 - 1e-6..=1.0 + 1e-6).contains(v)));
            m.denormalize(&mut x);
            for (a, b) in x.iter().zip(r) {
                prop_assert!((a - b).abs() <= 1e-4 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn clamped_actions_stay_in_bounds(a in prop::array::uniform5(prop::num::f32::ANY), lim in 0.001f32..1.0) {
        let c = ActionCommand(a).clamped(lim);
        prop_assert!(c.0.iter().all(|v| v.abs() <= lim));
    }

    #[test]
    fn container_round_trip(
        data in prop::collection::vec(prop::num::f32::ANY, 0..50),
        ints in prop::collection::vec(any::<u32>(), 0..10),
        text in "[a-z=\n.0-9]{0,40}",
    ) {
        let recs = vec![
            Record::f32("x", &[data.len()], data.clone()),
            Record::u32("n", ints),
            Record::text("t", &text),
        ];
        let bytes = encode_container(&DATASET_MAGIC, &recs).unwrap();
        let back = decode_container(&bytes, &DATASET_MAGIC).unwrap();
        prop_assert_eq!(encode_container(&DATASET_MAGIC, &back).unwrap(), bytes);
        let got = back[0].as_f32().unwrap();
        prop_assert!(got.iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn fmt6_keeps_six_digits(x in -1e9f64..1e9) {
        let s = fmt6(x);
        let y: f64 = s.parse().unwrap();
        prop_assert!((x - y).abs() <= 5e-6 * x.abs() + 1e-300, "{} -> {}", x, s);
        let digits = s.split(['e', 'E']).next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect::<String>();
        prop_assert!(digits.trim_start_matches('0').len() <= 6);
    }
}
