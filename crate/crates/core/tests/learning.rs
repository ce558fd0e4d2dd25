//! Property tests for plasticity: weight bounds, fixed points, convergence
//! toward a repeated pattern, and winner-take-all selection invariants.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikestep_core::{
    select_winners, stdp_update, Connection, Grid3, StdpConfig, WeightInit, WinnerSet,
};

fn dense_single(in_units: usize, init: WeightInit) -> Connection {
    Connection::dense(1, in_units, init).unwrap()
}

fn sole_winner() -> WinnerSet {
    WinnerSet::from_winners(vec![spikestep_core::Winner { map: 0, y: 0, x: 0 }])
}

proptest! {
    /// Thousands of updates with arbitrary rates and spike orders never
    /// push a weight out of [0, 1].
    #[test]
    fn weights_stay_in_unit_interval(seed in 0u64..1000, use_stabilizer in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut conn = dense_single(4, WeightInit::Uniform { lo: 0.0, hi: 1.0, seed });
        let post = Grid3::filled((1, 1, 1), 5.0);
        let winners = sole_winner();
        for _ in 0..2500 {
            let cfg = StdpConfig::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                use_stabilizer,
            );
            let pre_data: Vec<f64> = (0..4)
                .map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.0..10.0) } else { f64::INFINITY })
                .collect();
            let pre = Grid3::from_vec((1, 2, 2), pre_data).unwrap();
            stdp_update(&mut conn, &pre, &post, &winners, &cfg).unwrap();
            for w in conn.weights().values() {
                prop_assert!((0.0..=1.0).contains(w), "weight {w} escaped [0,1]");
            }
        }
    }

    /// With the multiplicative stabilizer, 0 and 1 are exact fixed points.
    #[test]
    fn stabilizer_pins_zero_and_one(
        lr_plus in -0.5f64..0.5,
        lr_minus in -0.5f64..0.5,
        causal in any::<bool>(),
    ) {
        let mut conn = dense_single(2, WeightInit::Constant(0.0));
        conn.weights_mut().values_mut()[1] = 1.0;
        let pre_t = if causal { 0.0 } else { f64::INFINITY };
        let pre = Grid3::from_vec((1, 1, 2), vec![pre_t, pre_t]).unwrap();
        let post = Grid3::filled((1, 1, 1), 3.0);
        let cfg = StdpConfig::new(lr_plus, lr_minus, true);
        stdp_update(&mut conn, &pre, &post, &sole_winner(), &cfg).unwrap();
        prop_assert_eq!(conn.weights().values()[0], 0.0);
        prop_assert_eq!(conn.weights().values()[1], 1.0);
    }

    /// The same update applied to identical connections yields bitwise
    /// identical weights.
    #[test]
    fn updates_are_deterministic(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = WeightInit::Uniform { lo: 0.1, hi: 0.9, seed };
        let mut a = dense_single(6, init);
        let mut b = dense_single(6, init);
        let pre_data: Vec<f64> = (0..6)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { f64::INFINITY })
            .collect();
        let pre = Grid3::from_vec((1, 1, 6), pre_data).unwrap();
        let post = Grid3::filled((1, 1, 1), 2.0);
        let cfg = StdpConfig::new(0.07, -0.03, true);
        stdp_update(&mut a, &pre, &post, &sole_winner(), &cfg).unwrap();
        stdp_update(&mut b, &pre, &post, &sole_winner(), &cfg).unwrap();
        let bits = |c: &Connection| -> Vec<u64> {
            c.weights().values().iter().map(|w| w.to_bits()).collect()
        };
        prop_assert_eq!(bits(&a), bits(&b));
    }

    /// Repeatedly presenting one binary pattern drags the weights toward
    /// it: the mean distance to the pattern strictly shrinks every time.
    #[test]
    fn repeated_pattern_attracts_weights(seed in 0u64..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 9;
        let pattern: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let pre_data: Vec<f64> = pattern
            .iter()
            .map(|on| if *on { 0.0 } else { f64::INFINITY })
            .collect();
        let pre = Grid3::from_vec((1, 3, 3), pre_data).unwrap();
        let post = Grid3::filled((1, 1, 1), 1.0);
        let cfg = StdpConfig::new(0.1, -0.1, true);
        let mut conn = dense_single(n, WeightInit::Uniform { lo: 0.3, hi: 0.7, seed });

        let distance = |conn: &Connection| -> f64 {
            conn.weights()
                .values()
                .iter()
                .zip(&pattern)
                .map(|(w, on)| (w - if *on { 1.0 } else { 0.0 }).abs())
                .sum::<f64>()
                / n as f64
        };

        let mut last = distance(&conn);
        for _ in 0..50 {
            stdp_update(&mut conn, &pre, &post, &sole_winner(), &cfg).unwrap();
            let now = distance(&conn);
            prop_assert!(now < last, "distance went {last} -> {now}");
            last = now;
        }
    }
}

// Random winner-selection instances: winners fired, occupy distinct maps,
// stay outside each other's exclusion radius, and selection is deterministic.
proptest! {
    #[test]
    fn winner_selection_invariants(
        seed in 0u64..2000,
        maps in 1usize..5,
        height in 1usize..6,
        width in 1usize..6,
        k in 1usize..5,
        radius in 0usize..3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = maps * height * width;
        let times: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    rng.gen_range(0..10) as f64
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let pots: Vec<f64> = (0..len).map(|_| rng.gen_range(-70.0..30.0)).collect();
        let times = Grid3::from_vec((maps, height, width), times).unwrap();
        let pots = Grid3::from_vec((maps, height, width), pots).unwrap();

        let winners = select_winners(&times, &pots, k, radius).unwrap();
        let again = select_winners(&times, &pots, k, radius).unwrap();
        prop_assert_eq!(&winners, &again);

        prop_assert!(winners.len() <= k.min(maps));
        let mut seen_maps = std::collections::HashSet::new();
        for w in winners.iter() {
            prop_assert!(times.get(w.map, w.y, w.x).is_finite(), "winner never fired");
            prop_assert!(seen_maps.insert(w.map), "map {} won twice", w.map);
        }
        for (i, a) in winners.iter().enumerate() {
            for b in winners.iter().skip(i + 1) {
                let dy = a.y.abs_diff(b.y);
                let dx = a.x.abs_diff(b.x);
                prop_assert!(
                    dy.max(dx) > radius,
                    "winners {a:?} and {b:?} inside exclusion radius {radius}"
                );
            }
        }
    }

    /// A winner is always optimal: no eligible neuron fired earlier than
    /// the first winner.
    #[test]
    fn first_winner_has_the_earliest_spike(
        seed in 0u64..2000,
        maps in 1usize..4,
        side in 1usize..5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = maps * side * side;
        let times: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    rng.gen_range(0..8) as f64
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let times = Grid3::from_vec((maps, side, side), times).unwrap();
        let pots = Grid3::zeros((maps, side, side));
        let winners = select_winners(&times, &pots, 1, 0).unwrap();
        if let Some(w) = winners.as_slice().first() {
            let t_min = times
                .as_slice()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(times.get(w.map, w.y, w.x), t_min);
        } else {
            prop_assert!(times.as_slice().iter().all(|t| t.is_infinite()));
        }
    }
}
