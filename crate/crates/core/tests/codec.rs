mod common;

use atomo_core::atoms::{decompose_entrywise, Tensor};
use atomo_core::codec::{decode, decode_header, encode, encode_dense, message_cost, CodecError, WireKind};
use atomo_core::sparsifier::{atomo_probabilities_sorted, sparsify, RngStream, SparsityBudget};
use atomo_core::spectral::spectral_atomo;
use common::random_matrix;
use proptest::prelude::*;

fn budget(s: f64) -> SparsityBudget {
    SparsityBudget::new(s).unwrap()
}

fn sample_message(seed: u64, n: usize, m: usize, s: f64, svd: bool) -> Vec<u8> {
    let mut rng = RngStream::from_seed(seed);
    let x = random_matrix(&mut rng, n, m);
    let sg = if svd {
        spectral_atomo(&x, budget(s.min(n.min(m) as f64)), &mut rng).unwrap()
    } else {
        sparsify(&decompose_entrywise(&x), budget(s.min((n * m) as f64)), &mut rng).unwrap()
    };
    encode(&sg).unwrap()
}

#[test]
fn documented_fixture() {
    let bytes = hex::decode(
        "41544d4f0100020200000000000000030000000000000002000000000000000000f83f010000000000003f04000000000010c0",
    )
    .unwrap();
    let header = decode_header(&bytes).unwrap();
    assert_eq!(header.kind, WireKind::Entrywise);
    assert_eq!(header.shape, [2, 3]);
    assert_eq!(header.atom_count, 2);
    let dense = decode(&bytes).unwrap().materialize();
    assert_eq!(dense, Tensor::from_rows(&[[0.0, 0.5, 0.0], [0.0, -2.25, 0.0]]).unwrap());
}

#[test]
fn every_truncation_is_an_error() {
    for (i, svd) in [(1, false), (2, true)] {
        let bytes = sample_message(i, 5, 4, 3.0, svd);
        for cut in 0..bytes.len() {
            assert!(decode(&bytes[..cut]).is_err(), "prefix {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode(&long), Err(CodecError::TrailingBytes { .. })));
    }
}

#[test]
fn bad_magic_and_version() {
    let mut bytes = encode_dense(&Tensor::vector(vec![1.0, 2.0]).unwrap()).unwrap();
    bytes[4] = 9;
    assert!(matches!(decode(&bytes), Err(CodecError::UnsupportedVersion { .. })));
    bytes[0] = b'X';
    assert!(matches!(decode(&bytes), Err(CodecError::BadMagic { .. })));
}

#[test]
fn expected_bytes_match_probabilities() {
    let mut rng = RngStream::new(30, 0, 0, 0);
    let x = random_matrix(&mut rng, 10, 10);
    let d = decompose_entrywise(&x);
    let s = budget(17.0);
    let p = atomo_probabilities_sorted(&d.coefficients, s).unwrap();
    let header = 19 + 16;
    let expected = header as f64 + 8.0 * p.sum();
    let draws = 20_000;
    let mut total = 0.0;
    for _ in 0..draws {
        let sg = sparsify(&d, s, &mut rng).unwrap();
        let cost = message_cost(&sg);
        assert_eq!(cost.bytes_on_wire as usize, encode(&sg).unwrap().len());
        assert_eq!(cost.index_overhead_bytes, 4 * sg.len() as u64);
        total += cost.bytes_on_wire as f64;
    }
    let mean = total / draws as f64;
    assert!((mean - expected).abs() <= 0.02 * expected, "{mean} vs {expected}");
}

#[test]
fn cost_grows_with_budget() {
    let mut rng = RngStream::new(31, 0, 0, 0);
    let x = random_matrix(&mut rng, 12, 12);
    let d = decompose_entrywise(&x);
    let mut last = 0.0;
    for s in [1.0, 4.0, 16.0, 64.0, 144.0] {
        let mean: f64 = (0..2000)
            .map(|_| message_cost(&sparsify(&d, budget(s), &mut rng).unwrap()).bytes_on_wire as f64)
            .sum::<f64>()
            / 2000.0;
        assert!(mean > last);
        last = mean;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn round_trip_is_stable(seed in any::<u64>(), n in 1usize..10, m in 1usize..10, s in 0.1..20.0f64, svd in any::<bool>()) {
        let bytes = sample_message(seed, n, m, s, svd);
        let decoded = decode(&bytes).unwrap();
        // values are already 32-bit, so a second trip changes nothing
        prop_assert_eq!(encode(&decoded).unwrap(), bytes);
    }

    #[test]
    fn garbage_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode(&bytes);
    }
}
