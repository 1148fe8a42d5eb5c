//! Correlation power analysis on one key byte of the first LFSR update.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::kkc::Intermediate;
use crate::cipher::{
    contribution7, mul_x, mul_x_inv, Iv128, Key256, Word16, ALPHA_INV, ALPHA_MUL, BETA_INV,
};
use crate::error::AttackError;
use crate::leakage::TraceSet;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lfsr {
    A,
    B,
}

/// A key-carrying LFSR cell, `A[8]..A[15]` or `B[8]..B[15]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub lfsr: Lfsr,
    pub index: u8,
}

impl Cell {
    pub const fn a(index: u8) -> Cell {
        Cell {
            lfsr: Lfsr::A,
            index,
        }
    }

    pub const fn b(index: u8) -> Cell {
        Cell {
            lfsr: Lfsr::B,
            index,
        }
    }

    /// Sub-iteration of the first update whose `mul_x_inv` consumes this cell.
    pub fn iteration(self) -> u8 {
        self.index - 8
    }

    /// Index of this cell's word in the 256-bit key.
    pub fn key_word(self) -> usize {
        match self.lfsr {
            Lfsr::A => self.iteration() as usize,
            Lfsr::B => 8 + self.iteration() as usize,
        }
    }

    pub fn intermediate(self) -> Intermediate {
        match self.lfsr {
            Lfsr::A => Intermediate::U(self.iteration()),
            Lfsr::B => Intermediate::V(self.iteration()),
        }
    }

    pub fn inverse_constant(self) -> Word16 {
        match self.lfsr {
            Lfsr::A => ALPHA_INV,
            Lfsr::B => BETA_INV,
        }
    }

    /// The earlier-recovered cell that also enters this cell's feedback word.
    pub fn dependency(self) -> Option<Cell> {
        let i = self.iteration();
        match self.lfsr {
            Lfsr::A if i == 7 => Some(Cell::a(8)),
            Lfsr::B if i >= 5 => Some(Cell::b(8 + i - 5)),
            _ => None,
        }
    }

    /// All sixteen cells in recovery order.
    pub fn schedule() -> impl Iterator<Item = Cell> {
        (8..16).flat_map(|i| [Cell::a(i), Cell::b(i)])
    }

    pub fn parse(s: &str) -> Option<Cell> {
        let s = s.trim();
        let lfsr = match s.get(..1)? {
            "A" | "a" => Lfsr::A,
            "B" | "b" => Lfsr::B,
            _ => return None,
        };
        let idx = s[1..].trim_start_matches('[').trim_end_matches(']');
        let index: u8 = idx.parse().ok()?;
        (8..16).contains(&index).then_some(Cell { lfsr, index })
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}[{}]", self.lfsr, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    Low,
    High,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Target {
    pub cell: Cell,
    pub half: Half,
}

impl Target {
    pub const fn low(cell: Cell) -> Target {
        Target {
            cell,
            half: Half::Low,
        }
    }

    pub const fn high(cell: Cell) -> Target {
        Target {
            cell,
            half: Half::High,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = match self.half {
            Half::Low => "lo",
            Half::High => "hi",
        };
        write!(f, "{}.{}", self.cell, h)
    }
}

/// Key material recovered so far: whole words and lone low bytes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownKey {
    words: [Option<Word16>; 16],
    low: [Option<u8>; 16],
}

impl KnownKey {
    pub fn from_key(key: &Key256) -> KnownKey {
        let mut k = KnownKey::default();
        for c in Cell::schedule() {
            k.set_word(c, key.words[c.key_word()]);
        }
        k
    }

    pub fn set_word(&mut self, cell: Cell, w: Word16) {
        self.words[cell.key_word()] = Some(w);
        self.low[cell.key_word()] = Some(w as u8);
    }

    pub fn set_low(&mut self, cell: Cell, byte: u8) {
        self.low[cell.key_word()] = Some(byte);
    }

    pub fn word(&self, cell: Cell) -> Option<Word16> {
        self.words[cell.key_word()]
    }

    pub fn low(&self, cell: Cell) -> Option<u8> {
        self.low[cell.key_word()]
    }

    pub fn is_complete(&self) -> bool {
        self.words.iter().all(Option::is_some)
    }

    pub fn to_key(&self) -> Option<Key256> {
        let mut w = [0; 16];
        for (o, k) in w.iter_mut().zip(&self.words) {
            *o = (*k)?;
        }
        Some(Key256::from_words(w))
    }
}

/// The part of `cell`'s feedback word that does not depend on the cell:
/// the word equals `known_term ^ mul_x_inv(cell, d)`.
pub fn known_term(cell: Cell, iv: &Iv128, known: &KnownKey) -> Result<Word16, AttackError> {
    let i = cell.iteration() as usize;
    let dep = match cell.dependency() {
        Some(d) => known
            .word(d)
            .ok_or_else(|| AttackError::MissingDependency {
                target: cell.to_string(),
                needed: d.to_string(),
            })?,
        None => 0,
    };
    Ok(match cell.lfsr {
        Lfsr::A if i < 7 => mul_x(iv.words[i], ALPHA_MUL) ^ iv.words[i + 1],
        Lfsr::A => mul_x(iv.words[i], ALPHA_MUL) ^ dep,
        Lfsr::B => iv.words[i] ^ dep,
    })
}

/// `{A, B}` share one 7-bit contribution with opposite LSBs; `C`, `D` carry
/// its complement with the LSBs of `A`, `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GhostSet {
    pub a: u8,
    pub b: u8,
    pub c: u8,
    pub d: u8,
}

/// The byte with contribution `c7` and least significant bit `lsb`.
fn with_contribution(c7: u8, lsb: bool, d: Word16) -> u8 {
    let fold = if lsb { (d & 0x7F) as u8 } else { 0 };
    (((c7 ^ fold) & 0x7F) << 1) | lsb as u8
}

impl GhostSet {
    /// The set a noiseless CPA produces when `k` is the true byte. `a` is the
    /// smaller member of the positive pair.
    pub fn for_byte(k: u8, d: Word16) -> GhostSet {
        let c7 = contribution7(k, d);
        let p = with_contribution(c7, k & 1 == 0, d);
        let (a, b) = (k.min(p), k.max(p));
        GhostSet {
            a,
            b,
            c: with_contribution(c7 ^ 0x7F, a & 1 == 1, d),
            d: with_contribution(c7 ^ 0x7F, b & 1 == 1, d),
        }
    }

    pub fn validate(&self, d: Word16) -> Result<(), AttackError> {
        if (self.a ^ self.b) & 1 == 0 {
            return Err(AttackError::MalformedGhostSet(format!(
                "A = {:#04x} and B = {:#04x} share their LSB",
                self.a, self.b
            )));
        }
        let want = GhostSet::for_byte(self.a, d);
        if want.b != self.b || want.c != self.c || want.d != self.d {
            return Err(AttackError::MalformedGhostSet(format!(
                "{self:?} is not closed under the contribution map"
            )));
        }
        Ok(())
    }

    pub fn positive(&self) -> [u8; 2] {
        [self.a, self.b]
    }

    pub fn negative(&self) -> [u8; 2] {
        [self.c, self.d]
    }
}

/// Picks the member of the positive pair whose LSB matches `lsb`.
pub fn disambiguate(ghost: &GhostSet, lsb: bool) -> Result<u8, AttackError> {
    if (ghost.a ^ ghost.b) & 1 == 0 {
        return Err(AttackError::MalformedGhostSet(format!(
            "A = {:#04x} and B = {:#04x} share their LSB",
            ghost.a, ghost.b
        )));
    }
    Ok(if (ghost.a & 1 == 1) == lsb {
        ghost.a
    } else {
        ghost.b
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRanking<S> {
    /// Max `|ρ|` per hypothesis over the window.
    pub scores: Vec<S>,
    /// `ρ` at each hypothesis's best sample.
    pub signed_peak: Vec<S>,
    /// Sample index of each hypothesis's best sample.
    pub peak_sample: Vec<usize>,
    /// Positive peaks by decreasing value, then the rest by decreasing
    /// magnitude; ties toward the smaller hypothesis.
    pub ordering: Vec<u8>,
    pub n_traces: usize,
    /// Top positive peak does not clear `4 / sqrt(n)`.
    pub insufficient: bool,
    /// Window columns with zero variance.
    pub zero_variance: Vec<usize>,
}

impl<S: Scalar> KeyRanking<S> {
    pub fn rank_of(&self, h: u8) -> usize {
        self.ordering
            .iter()
            .position(|&x| x == h)
            .expect("ordering is a permutation")
    }

    pub fn top(&self) -> u8 {
        self.ordering[0]
    }

    fn order(signed: &[S]) -> Vec<u8> {
        let mut ord: Vec<u8> = (0..=255).collect();
        ord.sort_by(|&x, &y| {
            let (px, py) = (signed[x as usize], signed[y as usize]);
            let key = |p: S| (p > S::zero(), if p > S::zero() { p } else { p.abs() });
            let (kx, ky) = (key(px), key(py));
            ky.0.cmp(&kx.0)
                .then(ky.1.partial_cmp(&kx.1).unwrap_or(std::cmp::Ordering::Equal))
                .then(x.cmp(&y))
        });
        ord
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpaResult<S> {
    pub target: Target,
    pub ranking: KeyRanking<S>,
    /// Present for low byte-halves, where the LSB is unobservable.
    pub ghost: Option<GhostSet>,
}

/// Bucketed view of one target: each trace reduces to a small index so that
/// every hypothesis's prediction is `HW(bucket ^ f(h))`.
struct Model {
    bits: u32,
    bucket: Vec<usize>,
    f: [u8; 256],
}

fn model(ts: &TraceSet, n: usize, target: Target, known: &KnownKey) -> Result<Model, AttackError> {
    let cell = target.cell;
    let d = cell.inverse_constant();
    let terms = ts.traces()[..n]
        .iter()
        .map(|m| known_term(cell, &m.iv, known))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match target.half {
        Half::Low => Model {
            bits: 7,
            bucket: terms.iter().map(|&t| (t & 0x7F) as usize).collect(),
            f: core::array::from_fn(|h| contribution7(h as u8, d)),
        },
        Half::High => {
            let low = known
                .low(cell)
                .ok_or_else(|| AttackError::MissingDependency {
                    target: target.to_string(),
                    needed: Target::low(cell).to_string(),
                })?;
            let m = mul_x_inv(low as Word16, d);
            Model {
                bits: 8,
                bucket: terms
                    .iter()
                    .map(|&t| (((t ^ m) >> 7) & 0xFF) as usize)
                    .collect(),
                f: core::array::from_fn(|h| h as u8),
            }
        }
    })
}

/// Ranks all 256 hypotheses for one byte of `target` using the first `n`
/// traces (all if `None`) and the sample `window` (whole trace if `None`).
pub fn cpa_byte<S: Scalar>(
    ts: &TraceSet,
    target: Target,
    known: &KnownKey,
    window: Option<Range<usize>>,
) -> Result<CpaResult<S>, AttackError> {
    cpa_prefix(ts, ts.n_traces(), target, known, window)
}

pub(crate) fn cpa_prefix<S: Scalar>(
    ts: &TraceSet,
    n: usize,
    target: Target,
    known: &KnownKey,
    window: Option<Range<usize>>,
) -> Result<CpaResult<S>, AttackError> {
    if n < 2 {
        return Err(AttackError::TooFewTraces {
            needed: 2,
            found: n,
        });
    }
    let window = window.unwrap_or(0..ts.n_samples());
    if window.is_empty() || window.end > ts.n_samples() {
        return Err(AttackError::BadWindow {
            start: window.start,
            end: window.end,
            width: ts.n_samples(),
        });
    }
    let m = model(ts, n, target, known)?;
    let nb = 1usize << m.bits;
    let mut count = vec![0usize; nb];
    for &b in &m.bucket {
        count[b] += 1;
    }

    // per column: sum of squared deviations and per-bucket centered sums
    let cols: Vec<(usize, S, Vec<S>)> = window
        .clone()
        .map(|j| {
            let x = ts.column::<S>(j, n);
            let mx = super::stats::mean(&x);
            let mut sb = vec![S::zero(); nb];
            let mut sxx = S::zero();
            for (&v, &b) in x.iter().zip(&m.bucket) {
                let d = v - mx;
                sb[b] = sb[b] + d;
                sxx = sxx + d * d;
            }
            (j, sxx, sb)
        })
        .collect();
    let zero_variance: Vec<usize> = cols
        .iter()
        .filter(|c| c.1 <= S::zero())
        .map(|c| c.0)
        .collect();

    let nf = S::of_usize(n);
    let mut scores = vec![S::zero(); 256];
    let mut signed_peak = vec![S::zero(); 256];
    let mut peak_sample = vec![window.start; 256];
    let mut pred = vec![S::zero(); nb];
    for h in 0..256 {
        let fh = m.f[h] as usize;
        let mut mp = S::zero();
        for (b, p) in pred.iter_mut().enumerate() {
            *p = S::of_usize((b ^ fh).count_ones() as usize);
            mp = mp + S::of_usize(count[b]) * *p;
        }
        mp = mp / nf;
        let mut spp = S::zero();
        for b in 0..nb {
            pred[b] = pred[b] - mp;
            spp = spp + S::of_usize(count[b]) * pred[b] * pred[b];
        }
        let mut best: Option<(S, usize)> = None;
        for (j, sxx, sb) in &cols {
            let r = if *sxx <= S::zero() || spp <= S::zero() {
                S::zero()
            } else {
                let cov = pred.iter().zip(sb).map(|(&p, &s)| p * s).sum::<S>();
                super::stats::clamp_unit(cov / (sxx.sqrt() * spp.sqrt()))
            };
            if best.is_none_or(|(bv, _)| r.abs() > bv.abs()) {
                best = Some((r, *j));
            }
        }
        let (r, j) = best.expect("window is nonempty");
        scores[h] = r.abs();
        signed_peak[h] = r;
        peak_sample[h] = j;
    }

    let ordering = KeyRanking::order(&signed_peak);
    let top = signed_peak[ordering[0] as usize];
    let insufficient = top <= S::of(4.0) / nf.sqrt();
    let ranking = KeyRanking {
        scores,
        signed_peak,
        peak_sample,
        ordering,
        n_traces: n,
        insufficient,
        zero_variance,
    };
    let ghost = match target.half {
        Half::Low => Some(GhostSet::for_byte(
            ranking.top(),
            target.cell.inverse_constant(),
        )),
        Half::High => None,
    };
    Ok(CpaResult {
        target,
        ranking,
        ghost,
    })
}
