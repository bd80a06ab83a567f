use std::collections::VecDeque;
use std::sync::Arc;

use proptest::prelude::*;

use thermnet_core::endpoint::{
    decode_rh, decode_temp, encode_sample, Endpoint, EndpointConfig, NoiseModel, RingBuffer,
    TEMP_RAW_MAX,
};
use thermnet_core::field::FieldScenario;
use thermnet_core::geometry::Point3;

#[derive(Debug, Clone)]
enum Op {
    Push(u16),
    Clear,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        20 => any::<u16>().prop_map(Op::Push),
        1 => Just(Op::Clear),
    ]
}

proptest! {
    #[test]
    fn ring_matches_bounded_deque(cap in 1usize..40, ops in prop::collection::vec(op(), 0..300)) {
        let mut ring = RingBuffer::new(cap);
        let mut model: VecDeque<u16> = VecDeque::new();
        for op in ops {
            match op {
                Op::Push(v) => {
                    let evicted = ring.push(v);
                    model.push_back(v);
                    let expected = (model.len() > cap).then(|| model.pop_front().unwrap());
                    prop_assert_eq!(evicted, expected);
                }
                Op::Clear => {
                    ring.clear();
                    model.clear();
                }
            }
            prop_assert_eq!(ring.len(), model.len());
            prop_assert_eq!(ring.is_full(), model.len() == cap);
            prop_assert_eq!(ring.is_empty(), model.is_empty());
            prop_assert_eq!(ring.latest(), model.back());
            prop_assert_eq!(ring.oldest(), model.front());
            prop_assert!(ring.iter().eq(model.iter()));
        }
    }

    #[test]
    fn in_range_values_round_trip_to_a_hundredth(t in -40.0..=123.8f64, rh in 0.0..=100.0f64) {
        let enc = encode_sample(t, rh);
        prop_assert!(!enc.saturated);
        prop_assert!((decode_temp(enc.temp_raw) - t).abs() <= 0.005 + 1e-9);
        prop_assert!((decode_rh(enc.rh_raw) - rh).abs() <= 0.005 + 1e-9);
    }

    #[test]
    fn out_of_range_values_saturate(t in prop_oneof![-1e6..-40.01f64, 123.81..1e6f64]) {
        let enc = encode_sample(t, 50.0);
        prop_assert!(enc.saturated);
        prop_assert!(enc.temp_raw == 0 || enc.temp_raw == TEMP_RAW_MAX);
    }

    #[test]
    fn encoding_is_monotone(a in -40.0..=123.8f64, b in -40.0..=123.8f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(encode_sample(lo, 0.0).temp_raw <= encode_sample(hi, 0.0).temp_raw);
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn noise_is_unbiased_with_configured_spread() {
    let cfg = EndpointConfig {
        noise: NoiseModel {
            sigma_temp: 0.4,
            sigma_rh: 1.5,
        },
        ..Default::default()
    };
    let mut ep = Endpoint::new(
        1,
        Point3::new(0.0, 0.0, 0.0),
        Arc::new(FieldScenario::uniform(21.0, 45.0)),
        cfg,
        7,
    );
    let n = 20_000;
    let (mut temps, mut rhs) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let r = ep.sample_tick((21.0, 45.0), k as f64).unwrap();
        temps.push(decode_temp(r.temp_raw));
        rhs.push(decode_rh(r.rh_raw));
    }
    let (mt, st) = mean_sd(&temps);
    let (mh, sh) = mean_sd(&rhs);
    // 5 standard errors on the mean, 5 % on the spread
    assert!(
        (mt - 21.0).abs() < 5.0 * 0.4 / (n as f64).sqrt(),
        "temp mean {mt}"
    );
    assert!(
        (mh - 45.0).abs() < 5.0 * 1.5 / (n as f64).sqrt(),
        "rh mean {mh}"
    );
    assert!((st / 0.4 - 1.0).abs() < 0.05, "temp sd {st}");
    assert!((sh / 1.5 - 1.0).abs() < 0.05, "rh sd {sh}");
}

#[test]
fn noise_stream_depends_only_on_seed() {
    let run = |seed| {
        let mut ep = Endpoint::new(
            3,
            Point3::new(1.0, 2.0, 0.5),
            Arc::new(FieldScenario::uniform(20.0, 50.0)),
            EndpointConfig::default(),
            seed,
        );
        (0..50)
            .map(|k| ep.sample_tick((20.0, 50.0), k as f64).unwrap().to_bytes())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn zero_noise_reports_truth_exactly() {
    let cfg = EndpointConfig {
        noise: NoiseModel::NONE,
        ..Default::default()
    };
    let mut ep = Endpoint::new(
        0,
        Point3::new(0.0, 0.0, 0.0),
        Arc::new(FieldScenario::uniform(0.0, 0.0)),
        cfg,
        0,
    );
    let r = ep.sample_tick((23.45, 61.2), 0.0).unwrap();
    assert_eq!((r.temp_raw, r.rh_raw), (6345, 6120));
}
