use proptest::prelude::*;
use snowv_lab::attack::{incremental_recover, RecoverConfig};
use snowv_lab::cipher::{keystream, xor_crypt, Iv128, Key256};
use snowv_lab::countermeasures::Variant;
use snowv_lab::leakage::{
    simulate_trace_set, IvPolicy, KeyPolicy, LeakageModel, SimulationConfig, TraceSet,
};

fn set(key: KeyPolicy, n: usize, seed: u64) -> TraceSet {
    simulate_trace_set(&SimulationConfig {
        key,
        iv: IvPolicy::Random,
        n,
        model: LeakageModel::default(),
        variant: Variant::Reference,
        master_seed: seed,
    })
    .unwrap()
}

#[test]
fn stored_sets_attack_like_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let key = Key256::from_hex("00112233445566778899aabbccddeeff0f1e2d3c4b5a69788796a5b4c3d2e1f0")
        .unwrap();
    let attack = set(KeyPolicy::Fixed(key), 1000, 1).without_keys();
    let profiling = set(KeyPolicy::Random, 400, 2);
    let (pa, pp) = (dir.path().join("a.json"), dir.path().join("p.json"));
    attack.store(&pa).unwrap();
    profiling.store(&pp).unwrap();
    let (la, lp) = (TraceSet::load(&pa).unwrap(), TraceSet::load(&pp).unwrap());
    assert_eq!(la, attack);
    let cfg = RecoverConfig {
        compute_mtd: false,
        ..Default::default()
    };
    let from_disk = incremental_recover::<f64>(&la, &lp, &cfg).unwrap();
    let in_memory = incremental_recover::<f64>(&attack, &profiling, &cfg).unwrap();
    assert_eq!(from_disk, in_memory);
    assert_eq!(from_disk.key, Some(key));
}

#[test]
fn f32_statistics_recover_too() {
    let key = Key256::from_words([0xBEEF; 16]);
    let attack = set(KeyPolicy::Fixed(key), 1000, 3);
    let profiling = set(KeyPolicy::Random, 400, 4);
    let cfg = RecoverConfig {
        compute_mtd: false,
        ..Default::default()
    };
    assert_eq!(
        incremental_recover::<f32>(&attack, &profiling, &cfg)
            .unwrap()
            .key,
        Some(key)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn keystream_matches_independent_implementation(k: [u8; 32], iv: [u8; 16]) {
        let ours = keystream(&Key256::from_bytes(&k), &Iv128::from_bytes(&iv), 3);
        let mut oracle = snowv::SnowV::new(&k, &iv);
        for b in ours {
            let mut z = [0u8; 16];
            oracle.write_keystream_block(&mut z).unwrap();
            prop_assert_eq!(b.0, z);
        }
    }

    #[test]
    fn encryption_matches_independent_implementation(k: [u8; 32], iv: [u8; 16], msg in prop::collection::vec(any::<u8>(), 0..80)) {
        let ours = xor_crypt(&Key256::from_bytes(&k), &Iv128::from_bytes(&iv), &msg);
        let mut want = msg.clone();
        snowv::SnowV::new(&k, &iv).apply_keystream(want.as_mut_slice().into()).unwrap();
        prop_assert_eq!(ours, want);
    }
}
