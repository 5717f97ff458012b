mod common;

use common::{random_clock, rng};
use proptest::prelude::*;
use tempus::channels::{random_covariant_channel, CovariantChoi};
use tempus::clock::QuantumClock;
use tempus::io::{from_json, to_json};
use tempus::random;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clocks_round_trip_through_json(seed in any::<u64>(), d in 2usize..=5) {
        let c = random_clock(d, seed);
        let text = to_json(&c);
        let back: QuantumClock = from_json(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(to_json(&back), text);
    }

    #[test]
    fn channels_round_trip_through_json(seed in any::<u64>(), d_in in 2usize..=3, d_out in 2usize..=3) {
        let mut r = rng(seed);
        let h_in = random::random_integer_hamiltonian(d_in, 3, &mut r);
        let h_out = random::random_integer_hamiltonian(d_out, 3, &mut r);
        let channel = random_covariant_channel(&h_in, &h_out, 2, &mut r).unwrap();
        let text = to_json(&channel);
        let back: CovariantChoi = from_json(&text).unwrap();
        prop_assert_eq!(to_json(&back), text);
    }
}
