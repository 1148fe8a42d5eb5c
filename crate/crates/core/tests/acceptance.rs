//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snowv_lab::attack::stats::{pearson, prefix_steps};
use snowv_lab::attack::{
    accuracy, cpa_byte, dependency_schedule, first_crossing, incremental_recover, kkc, lda_predict,
    lda_train, mtd_curve, tvla_incremental, welch_t, Cell, GhostSet, HwModel, Intermediate,
    KnownKey, RecoverConfig, Target,
};
use snowv_lab::cipher::{
    keystream, lfsr_update, mul_x, mul_x_inv, Iv128, Key256, LfsrState, ALPHA_INV, ALPHA_MUL,
    BETA_INV, BETA_MUL,
};
use snowv_lab::countermeasures::{
    ct_lfsr_update, masked_lfsr_update, mul_x_inv_ct, shuffled_lfsr_update, MaskSource,
    ShuffleOrder, Variant,
};
use snowv_lab::leakage::{
    simulate_trace_set, IvPolicy, KeyPolicy, LeakageModel, SimulationConfig, TraceSet,
};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn random_key(rng: &mut ChaCha8Rng) -> Key256 {
    Key256::from_bytes(&rng.random())
}

fn random_iv(rng: &mut ChaCha8Rng) -> Iv128 {
    Iv128::from_bytes(&rng.random())
}

fn sim(
    key: KeyPolicy,
    iv: IvPolicy,
    n: usize,
    model: LeakageModel,
    variant: Variant,
    seed: u64,
) -> TraceSet {
    simulate_trace_set(&SimulationConfig {
        key,
        iv,
        n,
        model,
        variant,
        master_seed: seed,
    })
    .expect("valid simulation config")
}

fn cipher_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pairs = vec![([0u8; 32], [0u8; 16]), ([0xFF; 32], [0xFF; 16])];
    pairs.extend((0..6).map(|_| (rng.random::<[u8; 32]>(), rng.random::<[u8; 16]>())));
    let mut blocks = 0;
    for (k, iv) in &pairs {
        let ours = keystream(&Key256::from_bytes(k), &Iv128::from_bytes(iv), 8);
        let mut oracle = snowv::SnowV::new(k, iv);
        for b in ours {
            let mut z = [0u8; 16];
            oracle
                .write_keystream_block(&mut z)
                .expect("keystream available");
            if b.0 != z {
                return (false, format!("keystream mismatch for key {}", hex(k)));
            }
            blocks += 1;
        }
    }
    for (c, d) in [(ALPHA_MUL, ALPHA_INV), (BETA_MUL, BETA_INV)] {
        for v in 0..=u16::MAX {
            if mul_x_inv(mul_x(v, c), d) != v || mul_x(mul_x_inv(v, d), c) != v {
                return (false, format!("round trip fails at {v:#06x} for {c:#06x}"));
            }
        }
    }
    (
        true,
        format!(
            "{} key/IV pairs, {blocks} blocks bit-exact; 2x65536 round trips",
            pairs.len()
        ),
    )
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

fn ghost_algebra() -> Outcome {
    let model = LeakageModel {
        hw_bits: 0x007F,
        ..LeakageModel::noiseless()
    };
    let tol = 1e-9;
    for cell in [Cell::a(8), Cell::b(8)] {
        let d = cell.inverse_constant();
        for k in 0..=255u8 {
            let mut words = [0x6C3Au16; 16];
            words[cell.key_word()] = 0x4100 | k as u16;
            let ts = sim(
                KeyPolicy::Fixed(Key256::from_words(words)),
                IvPolicy::Random,
                256,
                model,
                Variant::Reference,
                k as u64,
            );
            let r = cpa_byte::<f64>(&ts, Target::low(cell), &KnownKey::default(), None).unwrap();
            let g = GhostSet::for_byte(k, d);
            if r.ghost != Some(g) {
                return (
                    false,
                    format!("{cell} byte {k:#04x}: ghost {:?}, expected {g:?}", r.ghost),
                );
            }
            let p = &r.ranking.signed_peak;
            let mut most_negative: Vec<u8> = (0..=255).collect();
            most_negative.sort_by(|&x, &y| p[x as usize].total_cmp(&p[y as usize]).then(x.cmp(&y)));
            let mut neg = [most_negative[0], most_negative[1]];
            neg.sort();
            let mut want_neg = g.negative();
            want_neg.sort();
            let ok = r.ranking.ordering[..2] == g.positive()
                && neg == want_neg
                && g.positive()
                    .iter()
                    .all(|&h| (p[h as usize] - 1.0).abs() < tol)
                && g.negative()
                    .iter()
                    .all(|&h| (p[h as usize] + 1.0).abs() < tol);
            if !ok {
                return (
                    false,
                    format!("{cell} byte {k:#04x}: peaks not exactly +/-1 on the ghost set"),
                );
            }
        }
    }
    let case_0x16 = GhostSet::for_byte(0x16, ALPHA_INV);
    let expected = GhostSet {
        a: 0x16,
        b: 0x19,
        c: 0xE8,
        d: 0xE7,
    };
    (
        case_0x16 == expected,
        format!(
            "512 bytes (A[8], B[8]) exact; 0x16 -> {{{:#04x}, {:#04x}, {:#04x}, {:#04x}}}",
            case_0x16.a, case_0x16.b, case_0x16.c, case_0x16.d
        ),
    )
}

fn tvla() -> Outcome {
    let reps = 100;
    let mut crossed = 0;
    let mut masked_ok = 0;
    let mut worst_masked = 0.0f64;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
        let key = random_key(&mut rng);
        let fixed_iv = random_iv(&mut rng);
        let fixed = sim(
            KeyPolicy::Fixed(key),
            IvPolicy::Fixed(fixed_iv),
            10,
            LeakageModel::default(),
            Variant::Reference,
            rng.random(),
        );
        let random = sim(
            KeyPolicy::Fixed(key),
            IvPolicy::Random,
            10,
            LeakageModel::default(),
            Variant::Reference,
            rng.random(),
        );
        let steps: Vec<usize> = (2..=10).collect();
        let curve = tvla_incremental::<f64>(&fixed, &random, Some(&steps)).unwrap();
        if first_crossing(&curve).is_some_and(|n| n <= 10) {
            crossed += 1;
        }

        let fixed = sim(
            KeyPolicy::Fixed(key),
            IvPolicy::Fixed(fixed_iv),
            1000,
            LeakageModel::default(),
            Variant::Masked,
            rng.random(),
        );
        let random = sim(
            KeyPolicy::Fixed(key),
            IvPolicy::Random,
            1000,
            LeakageModel::default(),
            Variant::Masked,
            rng.random(),
        );
        let t = welch_t::<f64>(&fixed, &random).unwrap().max_abs_t;
        worst_masked = worst_masked.max(t);
        if t < 10.0 {
            masked_ok += 1;
        }
    }
    let pass = crossed * 100 >= 95 * reps && masked_ok * 100 >= 95 * reps;
    (
        pass,
        format!(
            "reference crosses 4.5 within 10 traces in {crossed}/{reps}; masked max|t| < 10 at 1000 traces in {masked_ok}/{reps} (worst {worst_masked:.2})"
        ),
    )
}

fn mtd_for_seed(seed: u64, n: usize) -> Option<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = random_key(&mut rng);
    let ts = sim(
        KeyPolicy::Fixed(key),
        IvPolicy::Random,
        n,
        LeakageModel::default(),
        Variant::Reference,
        rng.random(),
    );
    let poi = kkc::<f64>(&ts, Some(&key), Intermediate::U(0), HwModel::Bits8)
        .unwrap()
        .poi;
    let window = poi.saturating_sub(5)..(poi + 6).min(ts.n_samples());
    let steps = prefix_steps(2, 200, n, 20);
    mtd_curve::<f64>(
        &ts,
        Target::low(Cell::a(8)),
        &KnownKey::default(),
        key.words[0] as u8,
        Some(window),
        Some(&steps),
    )
    .unwrap()
    .mtd
}

fn cpa_mtd() -> Outcome {
    let n = 1000;
    let primary = mtd_for_seed(2024, n);
    let mut all: Vec<usize> = (0..20)
        .map(|s| mtd_for_seed(3000 + s, n).unwrap_or(usize::MAX))
        .collect();
    all.sort();
    let median = (all[9] + all[10]) / 2;
    let pass = primary.is_some_and(|m| m <= 100) && median <= 100;
    (
        pass,
        format!(
            "first key byte MTD {} (median over 20 seeds {median}, range {}..{})",
            fmt_opt(primary),
            all[0],
            fmt_usize(all[19])
        ),
    )
}

fn fmt_opt(x: Option<usize>) -> String {
    x.map_or("none".into(), |v| v.to_string())
}

fn fmt_usize(x: usize) -> String {
    if x == usize::MAX {
        "none".into()
    } else {
        x.to_string()
    }
}

fn lda() -> Outcome {
    let train = sim(
        KeyPolicy::Random,
        IvPolicy::Random,
        200,
        LeakageModel::default(),
        Variant::Reference,
        51,
    );
    let test = sim(
        KeyPolicy::Random,
        IvPolicy::Random,
        500,
        LeakageModel::default(),
        Variant::Reference,
        52,
    );
    let label = |ts: &TraceSet, cell: Cell| -> Vec<bool> {
        ts.traces()
            .iter()
            .map(|m| m.key.unwrap().words[cell.key_word()] & 1 == 1)
            .collect()
    };
    let mut worst = 1.0f64;
    let mut single_ok = true;
    for cell in Cell::schedule() {
        let kind = if cell.lfsr == snowv_lab::attack::Lfsr::A {
            "branch_a"
        } else {
            "branch_b"
        };
        let j = train
            .point_index(&format!("r1.s{}.{kind}", cell.iteration()))
            .unwrap();
        let m = lda_train::<f64>(&train, &label(&train, cell), j..j + 1).unwrap();
        let yt = label(&test, cell);
        worst = worst.min(accuracy(&m, &test, &yt));
        single_ok &= lda_predict(&m, test.row(0)) == yt[0];
    }
    (
        worst == 1.0 && single_ok,
        format!("200 training traces; worst held-out accuracy over 16 words {:.4} on 500 traces; single-trace prediction {}", worst, if single_ok { "correct" } else { "wrong" }),
    )
}

fn full_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let key = random_key(&mut rng);
    let attack = sim(
        KeyPolicy::Fixed(key),
        IvPolicy::Random,
        4000,
        LeakageModel::default(),
        Variant::Reference,
        61,
    )
    .without_keys();
    let profiling = sim(
        KeyPolicy::Random,
        IvPolicy::Random,
        1000,
        LeakageModel::default(),
        Variant::Reference,
        62,
    );
    match incremental_recover::<f64>(&attack, &profiling, &RecoverConfig::default()) {
        Ok(r) => {
            let order: Vec<Cell> = r.bytes.iter().map(|b| b.target.cell).collect();
            let pos = |c: Cell| order.iter().position(|&x| x == c).unwrap();
            let schedule_ok = r.schedule == dependency_schedule()
                && r.schedule.iter().all(|d| pos(d.needs) < pos(d.target));
            let worst_mtd = r.bytes.iter().filter_map(|b| b.mtd).max().unwrap_or(0);
            (
                r.key == Some(key) && schedule_ok && r.keystream_verified == Some(true),
                format!("256-bit key recovered from 4000 attack + 1000 profiling traces; keystream verified; worst per-byte MTD {worst_mtd}"),
            )
        }
        Err(e) => (false, format!("recovery failed: {e}")),
    }
}

fn masking_efficacy() -> Outcome {
    let n = 50_000;
    let key = Key256::from_words([0x0016; 16]);
    let model = LeakageModel::default();
    let masked = sim(
        KeyPolicy::Fixed(key),
        IvPolicy::Random,
        n,
        model,
        Variant::Masked,
        71,
    );
    let reference = sim(
        KeyPolicy::Fixed(key),
        IvPolicy::Random,
        2000,
        model,
        Variant::Reference,
        71,
    );
    let j = masked.point_index("r1.s0.u").unwrap();
    let steps = prefix_steps(2, 100, n, 60);
    let t = Target::low(Cell::a(8));
    let m = mtd_curve::<f64>(
        &masked,
        t,
        &KnownKey::default(),
        0x16,
        Some(j..j + 1),
        Some(&steps),
    )
    .unwrap();
    let r = mtd_curve::<f64>(
        &reference,
        t,
        &KnownKey::default(),
        0x16,
        Some(j..j + 1),
        None,
    )
    .unwrap();
    let final_rank = m.points.last().unwrap().rank;
    let ratio_floor = r.mtd.map(|x| n / x);
    (
        m.mtd.is_none() && r.mtd.is_some(),
        format!(
            "masked: no lock-in over {n} traces (final rank of 0x16: {final_rank}); unmasked MTD {} (> {}x improvement)",
            fmt_opt(r.mtd),
            fmt_opt(ratio_floor)
        ),
    )
}

fn equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let orders = ShuffleOrder::all();
    let mut masks = MaskSource::seeded(80);
    let states = 200;
    for _ in 0..states {
        let s = LfsrState {
            a: rng.random(),
            b: rng.random(),
        };
        let want = lfsr_update(&s);
        if ct_lfsr_update(&s).0 != want {
            return (false, "constant-time update differs".into());
        }
        if masked_lfsr_update(&s, &mut masks).unwrap().0 != want {
            return (false, "masked update differs after unmasking".into());
        }
        if orders.iter().any(|o| shuffled_lfsr_update(&s, o).0 != want) {
            return (false, "a shuffle order differs".into());
        }
    }
    for d in [ALPHA_INV, BETA_INV] {
        if (0..=u16::MAX).any(|v| mul_x_inv_ct(v, d) != mul_x_inv(v, d)) {
            return (false, "constant-time mul_x_inv differs".into());
        }
    }

    let n = 10_000;
    let key = random_key(&mut rng);
    let ts = sim(
        KeyPolicy::Fixed(key),
        IvPolicy::Random,
        n,
        LeakageModel::noiseless(),
        Variant::Masked,
        81,
    );
    let bound = 4.0 / (n as f64).sqrt();
    let mut worst = 0.0f64;
    for i in 0..8u8 {
        for t in [Intermediate::U(i), Intermediate::V(i)] {
            let hw: Vec<f64> = ts
                .traces()
                .iter()
                .map(|m| t.value(&key, &m.iv).count_ones() as f64)
                .collect();
            let col = ts.column::<f64>(ts.point_index(&t.point_name()).unwrap(), n);
            worst = worst.max(pearson(&col, &hw).unwrap_or(0.0).abs());
        }
    }
    (
        worst < bound,
        format!(
            "{states} states x {} shuffle orders, masked and constant-time match; masked first-order |rho| max {worst:.4} < {bound:.4}",
            orders.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 cipher correctness", cipher_correctness),
        ("2 ghost-peak algebra", ghost_algebra),
        ("3 TVLA", tvla),
        ("4 CPA MTD", cpa_mtd),
        ("5 LDA", lda),
        ("6 full key recovery", full_recovery),
        ("7 masking efficacy", masking_efficacy),
        ("8 countermeasure equivalence", equivalence),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = f();
        println!(
            "criterion {name}: {} ({detail}) [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        failed += !ok as usize;
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
