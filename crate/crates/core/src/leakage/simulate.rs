use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::model::{LeakageModel, PointKind};
use super::traceset::{TraceMeta, TraceSet};
use crate::cipher::{
    lfsr_update_traced, Block128, CipherState, Iv128, Key256, LfsrState, Word16, INIT_ROUNDS,
};
use crate::countermeasures::{
    ct_lfsr_update, masked_lfsr_update, shuffled_lfsr_update, MaskSource, ShuffleOrder, Variant,
};
use crate::error::TraceError;

/// Observation of one `mul_x_inv` invocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchObs {
    /// Branching code: whether the XOR executed.
    Taken(bool),
    /// Branch-free code: the value `d & mask` that was XORed in.
    Folded(Word16),
}

/// What one execution slot of an LFSR update exposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotObs {
    /// Iteration executed in this slot.
    pub index: u8,
    /// `u_i`, or its first share under masking.
    pub u: Word16,
    pub v: Word16,
    pub branch_a: BranchObs,
    pub branch_b: BranchObs,
}

/// Runs one LFSR update under `variant`, returning the next state and the
/// per-slot observations in execution order.
pub fn observed_update(
    variant: Variant,
    state: &LfsrState,
    rng: &mut MaskSource,
) -> (LfsrState, [SlotObs; 8]) {
    let mut obs = [SlotObs {
        index: 0,
        u: 0,
        v: 0,
        branch_a: BranchObs::Taken(false),
        branch_b: BranchObs::Taken(false),
    }; 8];
    let next = match variant {
        Variant::Reference => {
            let (next, t) = lfsr_update_traced(state);
            for (i, o) in obs.iter_mut().enumerate() {
                *o = SlotObs {
                    index: i as u8,
                    u: t.u[i],
                    v: t.v[i],
                    branch_a: BranchObs::Taken(t.lsb_a[i]),
                    branch_b: BranchObs::Taken(t.lsb_b[i]),
                };
            }
            next
        }
        Variant::ConstantTime => {
            let (next, t) = ct_lfsr_update(state);
            for (i, o) in obs.iter_mut().enumerate() {
                *o = SlotObs {
                    index: i as u8,
                    u: t.lfsr.u[i],
                    v: t.lfsr.v[i],
                    branch_a: BranchObs::Folded(t.folded_a[i]),
                    branch_b: BranchObs::Folded(t.folded_b[i]),
                };
            }
            next
        }
        Variant::Masked => {
            let (next, t) = masked_lfsr_update(state, rng).expect("mask source is unbounded");
            for (i, o) in obs.iter_mut().enumerate() {
                *o = SlotObs {
                    index: i as u8,
                    u: t.u[i].share1,
                    v: t.v[i].share1,
                    branch_a: BranchObs::Taken(t.lsb_a[i]),
                    branch_b: BranchObs::Taken(t.lsb_b[i]),
                };
            }
            next
        }
        Variant::Shuffled => {
            let mut cm = ChaCha8Rng::seed_from_u64(rng.next_u32() as u64);
            let order = ShuffleOrder::random(&mut cm);
            let (next, steps) = shuffled_lfsr_update(state, &order);
            for (o, s) in obs.iter_mut().zip(steps) {
                *o = SlotObs {
                    index: s.index,
                    u: s.u,
                    v: s.v,
                    branch_a: BranchObs::Taken(s.lsb_a),
                    branch_b: BranchObs::Taken(s.lsb_b),
                };
            }
            next
        }
    };
    (next, obs)
}

impl LeakageModel {
    /// Noise-free value of one sample.
    pub fn deterministic(&self, kind: PointKind, slot: &SlotObs) -> f64 {
        let hw = |x: Word16| (x & self.hw_bits).count_ones() as f64 * self.hw_scale;
        let branch = |b: BranchObs| match b {
            BranchObs::Taken(t) => {
                if t {
                    self.branch_delta
                } else {
                    0.0
                }
            }
            BranchObs::Folded(x) => x.count_ones() as f64 * self.hw_scale,
        };
        match kind {
            PointKind::U => hw(slot.u),
            PointKind::V => hw(slot.v),
            PointKind::BranchA => branch(slot.branch_a),
            PointKind::BranchB => branch(slot.branch_b),
        }
    }
}

/// One simulated trace with its metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedTrace {
    pub samples: Vec<f32>,
    pub meta: TraceMeta,
}

/// Simulates initialization (and the first keystream block) under
/// `variant`, emitting one sample per selected point. Deterministic in
/// `noise_seed`, which also seeds the countermeasure randomness.
pub fn simulate_trace(
    key: &Key256,
    iv: &Iv128,
    model: &LeakageModel,
    variant: Variant,
    noise_seed: u64,
) -> SimulatedTrace {
    let mut noise = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut cm_rng = ChaCha8Rng::seed_from_u64(noise_seed);
    cm_rng.set_stream(1);
    let mut masks = MaskSource::Seeded(cm_rng);

    let p = &model.points;
    let mut samples = Vec::with_capacity(p.rounds as usize * 32);
    let mut state = CipherState::load(key, iv);
    for round in 1..=INIT_ROUNDS {
        let mut slots = None;
        state
            .init_round_with(key, |s| {
                let (next, obs) = observed_update(variant, s, &mut masks);
                slots = Some(obs);
                next
            })
            .expect("state is initializing");
        if round > p.rounds {
            continue;
        }
        let slots = slots.expect("round ran");
        for slot in &slots {
            for kind in PointKind::SEQUENCE {
                let keep = match kind {
                    PointKind::U | PointKind::V => p.intermediates,
                    _ => p.branches,
                };
                if keep {
                    let e: f64 = noise.sample(StandardNormal);
                    let x = model.deterministic(kind, slot) + model.noise_sigma * e;
                    samples.push(x as f32);
                }
            }
        }
    }
    let keystream = state
        .next_block_with(|s| observed_update(variant, s, &mut masks).0)
        .expect("state is in keystream phase");

    SimulatedTrace {
        samples,
        meta: TraceMeta {
            iv: *iv,
            key: Some(*key),
            variant: Some(variant),
            seed: Some(noise_seed),
            keystream: Some(keystream),
        },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KeyPolicy {
    Fixed(Key256),
    PerTrace(Vec<Key256>),
    /// Fresh uniform key per trace (profiling sets).
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub enum IvPolicy {
    Fixed(Iv128),
    Random,
    List(Vec<Iv128>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub key: KeyPolicy,
    pub iv: IvPolicy,
    pub n: usize,
    pub model: LeakageModel,
    pub variant: Variant,
    pub master_seed: u64,
}

/// Simulates `n` traces. Per-trace seeds, random IVs and random keys are
/// drawn from `master_seed` in trace order, so serial and parallel
/// generation agree.
pub fn simulate_trace_set(cfg: &SimulationConfig) -> Result<TraceSet, TraceError> {
    cfg.model.validate()?;
    if cfg.n == 0 {
        return Err(TraceError::Inconsistent("n must be at least 1".into()));
    }
    if let KeyPolicy::PerTrace(keys) = &cfg.key {
        if keys.len() != cfg.n {
            return Err(TraceError::Inconsistent(format!(
                "{} keys for {} traces",
                keys.len(),
                cfg.n
            )));
        }
    }
    if let IvPolicy::List(ivs) = &cfg.iv {
        if ivs.len() != cfg.n {
            return Err(TraceError::Inconsistent(format!(
                "{} IVs for {} traces",
                ivs.len(),
                cfg.n
            )));
        }
    }

    let mut master = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    let jobs: Vec<(Key256, Iv128, u64)> = (0..cfg.n)
        .map(|i| {
            let seed = master.next_u64();
            let iv = match &cfg.iv {
                IvPolicy::Fixed(iv) => *iv,
                IvPolicy::Random => Iv128::from_bytes(&master.random()),
                IvPolicy::List(ivs) => ivs[i],
            };
            let key = match &cfg.key {
                KeyPolicy::Fixed(k) => *k,
                KeyPolicy::PerTrace(ks) => ks[i],
                KeyPolicy::Random => Key256::from_bytes(&master.random()),
            };
            (key, iv, seed)
        })
        .collect();

    let traces: Vec<SimulatedTrace> = jobs
        .par_iter()
        .map(|(k, iv, seed)| simulate_trace(k, iv, &cfg.model, cfg.variant, *seed))
        .collect();

    let points = cfg
        .model
        .sample_points()
        .iter()
        .map(|p| p.name())
        .collect::<Vec<_>>();
    let width = points.len();
    let mut samples = Vec::with_capacity(width * cfg.n);
    let mut meta = Vec::with_capacity(cfg.n);
    for t in traces {
        samples.extend_from_slice(&t.samples);
        meta.push(t.meta);
    }
    TraceSet::new(samples, width, meta, points, Some(cfg.model))
}

/// First keystream block of the reference cipher.
pub fn reference_keystream(key: &Key256, iv: &Iv128) -> Block128 {
    crate::cipher::keystream(key, iv, 1)[0]
}
