use std::path::Path;

use anyhow::{anyhow, Context};
use serde::Serialize;
use snowv_lab::attack::{
    self, cpa_byte, first_crossing, incremental_recover, kkc, lda_accuracy_curve, lda_train,
    mtd_curve, tvla_incremental, welch_t, ByteReport, HwModel, KnownKey, RecoverConfig, Target,
    TVLA_THRESHOLD,
};
use snowv_lab::cipher::{keystream, Iv128, Key256};
use snowv_lab::countermeasures::{MaskSource, Variant};
use snowv_lab::error::AttackError;
use snowv_lab::leakage::{
    simulate_trace_set, IvPolicy, KeyPolicy, SimulationConfig, TraceMeta, TraceSet,
};

use crate::plot::Curve;
use crate::{
    display, AttackArgs, ByteTargetArgs, CliError, Command, ConvertArgs, CounterEvalArgs, CpaArgs,
    KeystreamArgs, KkcArgs, LdaArgs, MtdArgs, Output, SimulateArgs, TvlaArgs,
};

type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn dispatch(cmd: &Command, out: &Output) -> Result<()> {
    match cmd {
        Command::Keystream(a) => keystream_cmd(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Tvla(a) => tvla(a, out),
        Command::Kkc(a) => kkc_cmd(a, out),
        Command::Cpa(a) => cpa(a, out),
        Command::Mtd(a) => mtd(a, out),
        Command::Lda(a) => lda(a, out),
        Command::Attack(a) => attack_cmd(a, out),
        Command::CounterEval(a) => counter_eval(a, out),
        Command::Convert(a) => convert(a, out),
    }
}

fn load(path: &Path) -> Result<TraceSet> {
    TraceSet::load(path)
        .with_context(|| format!("loading trace set {}", display(path)))
        .map_err(CliError::Input)
}

fn input(e: AttackError) -> CliError {
    CliError::Input(anyhow!(e))
}

/// Sixteen words drawn from a stream seeded with `seed`.
fn derive_words(seed: u64) -> [u16; 16] {
    let mut src = MaskSource::seeded(seed);
    core::array::from_fn(|_| src.next_u32() as u16)
}

fn report(path: &Path, summary: impl std::fmt::Display) {
    println!("{summary}");
    println!("result: {}", display(path));
}

fn keystream_cmd(a: &KeystreamArgs, out: &Output) -> Result<()> {
    let blocks: Vec<String> = keystream(&a.key, &a.iv, a.blocks)
        .iter()
        .map(|b| b.to_hex())
        .collect();
    for b in &blocks {
        println!("{b}");
    }
    #[derive(Serialize)]
    struct R<'a> {
        blocks: &'a [String],
    }
    out.result("keystream", a, &R { blocks: &blocks })?;
    Ok(())
}

fn simulate(a: &SimulateArgs, out: &Output) -> Result<()> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let cfg = SimulationConfig {
        key: match a.key {
            Some(k) => KeyPolicy::Fixed(k),
            None => KeyPolicy::Random,
        },
        iv: match a.iv {
            Some(iv) => IvPolicy::Fixed(iv),
            None => IvPolicy::Random,
        },
        n: a.n,
        model: a.model.model(),
        variant: a.variant,
        master_seed: a.seed,
    };
    cfg.model
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let ts = simulate_trace_set(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    ts.store(&a.output)
        .with_context(|| format!("writing {}", display(&a.output)))?;
    #[derive(Serialize)]
    struct R {
        n_traces: usize,
        n_samples: usize,
        points: Vec<String>,
    }
    let path = out.result(
        "simulate",
        a,
        &R {
            n_traces: ts.n_traces(),
            n_samples: ts.n_samples(),
            points: ts.points().to_vec(),
        },
    )?;
    report(
        &path,
        format_args!(
            "wrote {} traces x {} samples to {}",
            ts.n_traces(),
            ts.n_samples(),
            display(&a.output)
        ),
    );
    Ok(())
}

fn tvla_curve(points: &[attack::TvlaPoint<f64>], title: &str) -> Curve {
    Curve::new(
        title,
        "traces per group",
        "max |t|",
        points.iter().map(|p| (p.n as f64, p.max_abs_t)).collect(),
    )
    .with_threshold(TVLA_THRESHOLD)
}

fn tvla(a: &TvlaArgs, out: &Output) -> Result<()> {
    let (f, r) = (load(&a.fixed)?, load(&a.random)?);
    let full = welch_t::<f64>(&f, &r).map_err(input)?;
    let curve = tvla_incremental::<f64>(&f, &r, None).map_err(input)?;
    #[derive(Serialize)]
    struct R<'a> {
        tvla: &'a attack::TvlaResult<f64>,
        first_crossing: Option<usize>,
        curve: &'a [attack::TvlaPoint<f64>],
    }
    let crossing = first_crossing(&curve);
    let path = out.result(
        "tvla",
        a,
        &R {
            tvla: &full,
            first_crossing: crossing,
            curve: &curve,
        },
    )?;
    out.curve("tvla", &tvla_curve(&curve, "Incremental TVLA"))?;
    report(
        &path,
        format_args!(
            "max |t| = {:.3} over {} samples, {} above {TVLA_THRESHOLD}; first crossing at {}",
            full.max_abs_t,
            full.t_values.len(),
            full.crossing_count,
            crossing.map_or("never".into(), |n| format!("{n} traces"))
        ),
    );
    Ok(())
}

fn kkc_cmd(a: &KkcArgs, out: &Output) -> Result<()> {
    let ts = load(&a.traces)?;
    let model =
        HwModel::from_bits(a.model_bits).ok_or_else(|| CliError::Usage("model bits".into()))?;
    let r = kkc::<f64>(&ts, a.key.as_ref(), a.target, model).map_err(input)?;
    #[derive(Serialize)]
    struct Peak {
        bits: u32,
        poi: usize,
        correlation: f64,
    }
    let models = HwModel::ALL
        .iter()
        .map(|&m| {
            kkc::<f64>(&ts, a.key.as_ref(), a.target, m).map(|k| Peak {
                bits: m.bits(),
                poi: k.poi,
                correlation: k.correlations[k.poi],
            })
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(input)?;
    #[derive(Serialize)]
    struct R<'a> {
        kkc: &'a attack::KkcResult<f64>,
        poi_name: Option<&'a str>,
        models: Vec<Peak>,
    }
    let poi_name = ts.points().get(r.poi).map(String::as_str);
    let path = out.result(
        "kkc",
        a,
        &R {
            kkc: &r,
            poi_name,
            models,
        },
    )?;
    let curve = Curve::new(
        &format!("Known-key correlation, {}", a.target),
        "sample",
        "correlation",
        r.correlations
            .iter()
            .enumerate()
            .map(|(j, &c)| (j as f64, c))
            .collect(),
    );
    out.curve("kkc", &curve)?;
    report(
        &path,
        format_args!(
            "POI sample {} ({}) with correlation {:.4}",
            r.poi,
            poi_name.unwrap_or("?"),
            r.correlations[r.poi]
        ),
    );
    Ok(())
}

fn known_key(t: &ByteTargetArgs) -> KnownKey {
    let mut k = KnownKey::default();
    for w in &t.known {
        k.set_word(w.cell, w.word);
    }
    if let Some(b) = t.known_low {
        k.set_low(t.cell, b);
    }
    k
}

fn target(t: &ByteTargetArgs) -> Target {
    Target {
        cell: t.cell,
        half: t.half.into(),
    }
}

fn cpa(a: &CpaArgs, out: &Output) -> Result<()> {
    let ts = load(&a.traces)?;
    let t = target(&a.target);
    let r = cpa_byte::<f64>(
        &ts,
        t,
        &known_key(&a.target),
        a.target.window.clone().map(|w| w.0),
    )
    .map_err(input)?;
    let path = out.result("cpa", a, &r)?;
    let curve = Curve::new(
        &format!("CPA on {t}"),
        "key hypothesis",
        "signed peak correlation",
        r.ranking
            .signed_peak
            .iter()
            .enumerate()
            .map(|(h, &c)| (h as f64, c))
            .collect(),
    );
    out.curve("cpa", &curve)?;
    let top: Vec<String> = r.ranking.ordering[..4]
        .iter()
        .map(|&h| format!("{h:#04x} ({:+.4})", r.ranking.signed_peak[h as usize]))
        .collect();
    let ghost = r
        .ghost
        .map(|g| {
            format!(
                "; ghost set A={:#04x} B={:#04x} C={:#04x} D={:#04x}",
                g.a, g.b, g.c, g.d
            )
        })
        .unwrap_or_default();
    report(
        &path,
        format_args!("top candidates {}{ghost}", top.join(", ")),
    );
    Ok(())
}

fn mtd(a: &MtdArgs, out: &Output) -> Result<()> {
    let ts = load(&a.traces)?;
    let t = target(&a.target);
    let truth = match a.true_byte {
        Some(b) => b,
        None => {
            let key = ts.meta(0).key.ok_or_else(|| {
                CliError::Usage("no --true-byte and the trace set records no key".into())
            })?;
            let w = key.words[t.cell.key_word()];
            match t.half {
                attack::Half::Low => w as u8,
                attack::Half::High => (w >> 8) as u8,
            }
        }
    };
    let mut known = known_key(&a.target);
    if t.half == attack::Half::High && known.low(t.cell).is_none() {
        if let Some(k) = ts.meta(0).key {
            known.set_low(t.cell, k.words[t.cell.key_word()] as u8);
        }
    }
    let c = mtd_curve::<f64>(
        &ts,
        t,
        &known,
        truth,
        a.target.window.clone().map(|w| w.0),
        None,
    )
    .map_err(input)?;
    let path = out.result("mtd", a, &c)?;
    let curve = Curve::new(
        &format!("Rank of {truth:#04x} on {t}"),
        "traces",
        "rank",
        c.points
            .iter()
            .map(|p| (p.n as f64, p.rank as f64))
            .collect(),
    );
    out.curve("mtd", &curve)?;
    report(
        &path,
        format_args!(
            "MTD for {t} = {}",
            c.mtd
                .map_or("not reached".into(), |m| format!("{m} traces"))
        ),
    );
    Ok(())
}

fn labels(ts: &TraceSet, cell: attack::Cell) -> Result<Vec<bool>> {
    ts.traces()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            m.key
                .map(|k| k.words[cell.key_word()] & 1 == 1)
                .ok_or_else(|| CliError::Input(anyhow!("trace {i} has no key metadata")))
        })
        .collect()
}

fn lda(a: &LdaArgs, out: &Output) -> Result<()> {
    let train = load(&a.train)?;
    let y = labels(&train, a.cell)?;
    let n = a.n_train.min(y.len());
    let window = match &a.window {
        Some(w) => w.0.clone(),
        None => {
            let yf: Vec<f64> = y[..n].iter().map(|&b| b as u8 as f64).collect();
            let r: Vec<f64> = (0..train.n_samples())
                .map(|j| attack::stats::pearson(&train.column::<f64>(j, n), &yf).unwrap_or(0.0))
                .collect();
            let j = attack::stats::argmax_abs(&r).unwrap_or(0);
            j..j + 1
        }
    };
    let model = lda_train::<f64>(&train, &y[..n], window.clone()).map_err(input)?;
    let test = a.test.as_deref().map(load).transpose()?;
    let ty = test.as_ref().map(|t| labels(t, a.cell)).transpose()?;
    let test_pair = test.as_ref().zip(ty.as_deref());
    let test_accuracy = test_pair.map(|(t, l)| attack::accuracy(&model, t, l));
    let curve =
        lda_accuracy_curve::<f64>(&train, &y[..n], test_pair, window, None).map_err(input)?;
    #[derive(Serialize)]
    struct R<'a> {
        model: &'a attack::LdaModel<f64>,
        test_accuracy: Option<f64>,
        curve: &'a [attack::LdaPoint<f64>],
    }
    let path = out.result(
        "lda",
        a,
        &R {
            model: &model,
            test_accuracy,
            curve: &curve,
        },
    )?;
    out.curve(
        "lda",
        &Curve::new(
            "LDA training accuracy",
            "training traces",
            "accuracy",
            curve
                .iter()
                .map(|p| (p.n_train as f64, p.training_accuracy))
                .collect(),
        ),
    )?;
    report(
        &path,
        format_args!(
            "training accuracy {:.4} on {n} traces{}",
            model.training_accuracy,
            test_accuracy
                .map(|x| format!(", held-out accuracy {x:.4}"))
                .unwrap_or_default()
        ),
    );
    Ok(())
}

fn attack_cmd(a: &AttackArgs, out: &Output) -> Result<()> {
    let traces = load(&a.traces)?;
    let profiling = load(&a.profiling)?;
    let cfg = RecoverConfig {
        poi_half_width: a.poi_half_width,
        lda_half_width: a.lda_half_width,
        lda_training: a.lda_training,
        min_vote: a.min_vote,
        compute_mtd: !a.no_mtd,
    };
    #[derive(Serialize)]
    struct R<'a> {
        report: &'a attack::AttackReport,
        failure: Option<String>,
    }
    match incremental_recover::<f64>(&traces, &profiling, &cfg) {
        Ok(r) => {
            let path = out.result(
                "attack",
                a,
                &R {
                    report: &r,
                    failure: None,
                },
            )?;
            mtd_summary(out, &r.bytes)?;
            let key = r.key.expect("complete report has a key");
            report(&path, format_args!("recovered key {}", key.to_hex()));
            Ok(())
        }
        Err(f) => {
            let path = out.result(
                "attack",
                a,
                &R {
                    report: &f.report,
                    failure: Some(f.reason.to_string()),
                },
            )?;
            println!("partial report: {}", display(&path));
            Err(CliError::NotConverged(f.reason.to_string()))
        }
    }
}

fn mtd_summary(out: &Output, bytes: &[ByteReport]) -> anyhow::Result<()> {
    let pts: Vec<(f64, f64)> = bytes
        .iter()
        .enumerate()
        .filter_map(|(i, b)| b.mtd.map(|m| (i as f64, m as f64)))
        .collect();
    out.curve(
        "attack_mtd",
        &Curve::new("Per-byte MTD", "byte (recovery order)", "traces", pts),
    )
}

fn counter_eval(a: &CounterEvalArgs, out: &Output) -> Result<()> {
    let key = a
        .key
        .unwrap_or_else(|| Key256::from_words(derive_words(a.seed)));
    let model = a.model.model();
    model
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if a.tvla_n < 2 || a.cpa_n < 2 {
        return Err(CliError::Usage(
            "--tvla-n and --cpa-n must be at least 2".into(),
        ));
    }
    let sim = |iv, n, variant, seed| {
        simulate_trace_set(&SimulationConfig {
            key: KeyPolicy::Fixed(key),
            iv,
            n,
            model,
            variant,
            master_seed: seed,
        })
        .map_err(|e| CliError::Usage(e.to_string()))
    };
    let fixed_iv = IvPolicy::Fixed(Iv128::from_words(
        derive_words(a.seed ^ 0x5EED)[..8]
            .try_into()
            .expect("eight words"),
    ));

    #[derive(Serialize)]
    struct Side {
        variant: String,
        tvla_max_abs_t: f64,
        tvla_first_crossing: Option<usize>,
        mtd: Option<usize>,
        final_rank: usize,
    }
    let target = Target::low(attack::Cell::a(8));
    let truth = key.words[0] as u8;
    let mut sides = Vec::new();
    for (k, variant) in [Variant::Reference, a.variant].into_iter().enumerate() {
        let s = a.seed.wrapping_mul(4).wrapping_add(k as u64 * 2);
        let f = sim(fixed_iv.clone(), a.tvla_n, variant, s)?;
        let r = sim(IvPolicy::Random, a.tvla_n, variant, s + 1)?;
        let curve = tvla_incremental::<f64>(&f, &r, None).map_err(input)?;
        out.curve(
            &format!("counter_eval_tvla_{}", variant.name()),
            &tvla_curve(&curve, &format!("TVLA, {variant}")),
        )?;
        let ts = sim(IvPolicy::Random, a.cpa_n, variant, s + 1000)?;
        let window = ts.point_index("r1.s0.u").map(|j| j..j + 1);
        let m = mtd_curve::<f64>(&ts, target, &KnownKey::default(), truth, window, None)
            .map_err(input)?;
        out.curve(
            &format!("counter_eval_rank_{}", variant.name()),
            &Curve::new(
                &format!("Rank of A[8] low byte, {variant}"),
                "traces",
                "rank",
                m.points
                    .iter()
                    .map(|p| (p.n as f64, p.rank as f64))
                    .collect(),
            ),
        )?;
        sides.push(Side {
            variant: variant.name().into(),
            tvla_max_abs_t: curve.last().map_or(0.0, |p| p.max_abs_t),
            tvla_first_crossing: first_crossing(&curve),
            mtd: m.mtd,
            final_rank: m.points.last().map_or(0, |p| p.rank),
        });
    }
    #[derive(Serialize)]
    struct R<'a> {
        key: Key256,
        sides: &'a [Side],
    }
    let path = out.result("counter-eval", a, &R { key, sides: &sides })?;
    for s in &sides {
        println!(
            "{:>14}: max |t| {:.2} at {} traces/group, MTD {}",
            s.variant,
            s.tvla_max_abs_t,
            a.tvla_n,
            s.mtd.map_or("not reached".into(), |m| m.to_string())
        );
    }
    println!("result: {}", display(&path));
    Ok(())
}

fn convert(a: &ConvertArgs, out: &Output) -> Result<()> {
    let is_csv = |p: &Path| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let ts = if is_csv(&a.input) {
        let n = csv_rows(&a.input)?;
        let metas: Vec<TraceMeta> = match &a.meta {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", display(p)))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", display(p)))?
            }
            None => vec![
                TraceMeta {
                    iv: a.iv.unwrap_or_default(),
                    ..Default::default()
                };
                n
            ],
        };
        TraceSet::import_csv(&a.input, metas)
            .with_context(|| format!("importing {}", display(&a.input)))?
    } else {
        load(&a.input)?
    };
    if is_csv(&a.output) {
        ts.export_csv(&a.output)
    } else {
        ts.store(&a.output)
    }
    .with_context(|| format!("writing {}", display(&a.output)))?;
    #[derive(Serialize)]
    struct R {
        n_traces: usize,
        n_samples: usize,
    }
    let path = out.result(
        "convert",
        a,
        &R {
            n_traces: ts.n_traces(),
            n_samples: ts.n_samples(),
        },
    )?;
    report(
        &path,
        format_args!(
            "converted {} traces x {} samples",
            ts.n_traces(),
            ts.n_samples()
        ),
    );
    Ok(())
}

/// Data rows in a CSV file, not counting a header of non-numeric fields.
fn csv_rows(path: &Path) -> Result<usize> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("reading {}", display(path)))?;
    let mut n = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("reading {}", display(path)))?;
        let numeric = rec.iter().all(|f| f.trim().parse::<f32>().is_ok());
        if i > 0 || numeric {
            n += 1;
        }
    }
    Ok(n)
}
