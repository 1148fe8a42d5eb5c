//! Command-line experiments: simulation, leakage assessment, attacks and
//! countermeasure evaluation, each writing a JSON result file.

use std::ffi::OsString;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use snowv_lab::attack::{Cell, Half, HwModel, Intermediate};
use snowv_lab::cipher::{Iv128, Key256};
use snowv_lab::countermeasures::Variant;
use snowv_lab::leakage::{LeakageModel, PointSelection};

mod commands;
pub mod plot;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "snowv-lab", version, about = "SNOW-V side-channel laboratory")]
pub struct Cli {
    /// Directory for result files.
    #[arg(long, global = true, env = "SNOWV_LAB_OUT", default_value = ".")]
    pub out_dir: PathBuf,
    /// Also write curves as CSV.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Also write curves as SVG plots.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Print keystream blocks.
    Keystream(KeystreamArgs),
    /// Simulate a trace set.
    Simulate(SimulateArgs),
    /// Fixed-vs-random Welch t-test.
    Tvla(TvlaArgs),
    /// Known-key correlation against a first-update intermediate.
    Kkc(KkcArgs),
    /// Correlation power analysis on one key byte.
    Cpa(CpaArgs),
    /// Minimum traces to disclosure for one key byte.
    Mtd(MtdArgs),
    /// Train and evaluate the LSB classifier.
    Lda(LdaArgs),
    /// Recover the full key.
    Attack(AttackArgs),
    /// Compare the reference code with a protected variant.
    CounterEval(CounterEvalArgs),
    /// Convert between CSV and the trace-set format.
    Convert(ConvertArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Keystream(_) => "keystream",
            Command::Simulate(_) => "simulate",
            Command::Tvla(_) => "tvla",
            Command::Kkc(_) => "kkc",
            Command::Cpa(_) => "cpa",
            Command::Mtd(_) => "mtd",
            Command::Lda(_) => "lda",
            Command::Attack(_) => "attack",
            Command::CounterEval(_) => "counter-eval",
            Command::Convert(_) => "convert",
        }
    }
}

fn parse_key(s: &str) -> Result<Key256, String> {
    Key256::from_hex(s).map_err(|e| e.to_string())
}

fn parse_iv(s: &str) -> Result<Iv128, String> {
    Iv128::from_hex(s).map_err(|e| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn parse_hex16(s: &str) -> Result<u16, String> {
    u16::from_str_radix(s.trim_start_matches("0x"), 16).map_err(|e| format!("`{s}`: {e}"))
}

fn parse_hex8(s: &str) -> Result<u8, String> {
    u8::from_str_radix(s.trim_start_matches("0x"), 16).map_err(|e| format!("`{s}`: {e}"))
}

fn parse_model_bits(s: &str) -> Result<u32, String> {
    s.parse::<u32>()
        .ok()
        .filter(|&b| HwModel::from_bits(b).is_some())
        .ok_or_else(|| format!("`{s}`: model width must be 4, 6, 8 or 16"))
}

fn parse_cell(s: &str) -> Result<Cell, String> {
    Cell::parse(s).ok_or_else(|| format!("`{s}` is not a key cell (A[8]..A[15], B[8]..B[15])"))
}

fn parse_intermediate(s: &str) -> Result<Intermediate, String> {
    let err = || format!("`{s}` is not an intermediate (u0..u7, v0..v7)");
    let i: u8 = s
        .get(1..)
        .and_then(|x| x.parse().ok())
        .filter(|&i| i < 8)
        .ok_or_else(err)?;
    match &s[..1] {
        "u" | "U" => Ok(Intermediate::U(i)),
        "v" | "V" => Ok(Intermediate::V(i)),
        _ => Err(err()),
    }
}

/// A sample range written `start..end`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Window(pub Range<usize>);

fn parse_window(s: &str) -> Result<Window, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("`{s}` is not of the form start..end"))?;
    let (a, b): (usize, usize) = (
        a.parse().map_err(|e| format!("`{a}`: {e}"))?,
        b.parse().map_err(|e| format!("`{b}`: {e}"))?,
    );
    if a >= b {
        return Err(format!("empty window {s}"));
    }
    Ok(Window(a..b))
}

/// `CELL=WORD`, e.g. `A8=0316`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KnownWord {
    pub cell: Cell,
    pub word: u16,
}

fn parse_known(s: &str) -> Result<KnownWord, String> {
    let (c, w) = s
        .split_once('=')
        .ok_or_else(|| format!("`{s}` is not CELL=WORD"))?;
    Ok(KnownWord {
        cell: parse_cell(c)?,
        word: parse_hex16(w)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfArg {
    Low,
    High,
}

impl From<HalfArg> for Half {
    fn from(h: HalfArg) -> Half {
        match h {
            HalfArg::Low => Half::Low,
            HalfArg::High => Half::High,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct KeystreamArgs {
    /// 256-bit key, 64 hex digits.
    #[arg(long, value_parser = parse_key)]
    pub key: Key256,
    /// 128-bit IV, 32 hex digits.
    #[arg(long, value_parser = parse_iv)]
    pub iv: Iv128,
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Power units per set bit.
    #[arg(long, default_value_t = 1.0)]
    pub hw_scale: f64,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, default_value_t = 1.0)]
    pub noise_sigma: f64,
    /// Extra amplitude when the mul_x_inv XOR executes.
    #[arg(long, default_value_t = 10.0)]
    pub branch_delta: f64,
    /// Bits of each word that contribute to its Hamming weight (hex).
    #[arg(long, default_value = "ffff", value_parser = parse_hex16)]
    pub hw_bits: u16,
    /// Emit samples for all sixteen initialization rounds.
    #[arg(long)]
    pub full: bool,
}

impl ModelArgs {
    pub fn model(&self) -> LeakageModel {
        LeakageModel {
            hw_scale: self.hw_scale,
            noise_sigma: self.noise_sigma,
            branch_delta: self.branch_delta,
            hw_bits: self.hw_bits,
            points: if self.full {
                PointSelection::full()
            } else {
                PointSelection::default()
            },
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("keys").required(true).args(["key", "random_keys"]))]
pub struct SimulateArgs {
    /// Trace-set metadata file to write (samples go to a sibling .bin).
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, short, default_value_t = 1000)]
    pub n: usize,
    /// Fixed key for every trace.
    #[arg(long, value_parser = parse_key)]
    pub key: Option<Key256>,
    /// Fresh random key per trace (profiling sets).
    #[arg(long)]
    pub random_keys: bool,
    /// Fixed IV for every trace; random IVs otherwise.
    #[arg(long, value_parser = parse_iv)]
    pub iv: Option<Iv128>,
    #[arg(long, default_value = "reference", value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TvlaArgs {
    #[arg(long)]
    pub fixed: PathBuf,
    #[arg(long)]
    pub random: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct KkcArgs {
    #[arg(long)]
    pub traces: PathBuf,
    /// Key of every trace; per-trace keys from the metadata otherwise.
    #[arg(long, value_parser = parse_key)]
    pub key: Option<Key256>,
    /// Intermediate to correlate with: u0..u7 or v0..v7.
    #[arg(long, default_value = "u0", value_parser = parse_intermediate)]
    pub target: Intermediate,
    /// Hamming-weight model width: 4, 6, 8 or 16 bits.
    #[arg(long, default_value_t = 8, value_parser = parse_model_bits)]
    pub model_bits: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct ByteTargetArgs {
    /// Key cell, e.g. A8 or B[13].
    #[arg(long, default_value = "A8", value_parser = parse_cell)]
    pub cell: Cell,
    #[arg(long, value_enum, default_value_t = HalfArg::Low)]
    pub half: HalfArg,
    /// Previously recovered words, e.g. --known A8=0316.
    #[arg(long, value_parser = parse_known)]
    pub known: Vec<KnownWord>,
    /// Recovered low byte of the target cell (for --half high).
    #[arg(long, value_parser = parse_hex8)]
    pub known_low: Option<u8>,
    /// Sample window start..end; the whole trace otherwise.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Window>,
}

#[derive(Debug, Args, Serialize)]
pub struct CpaArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[command(flatten)]
    pub target: ByteTargetArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct MtdArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[command(flatten)]
    pub target: ByteTargetArgs,
    /// True byte (hex); taken from the trace metadata key otherwise.
    #[arg(long, value_parser = parse_hex8)]
    pub true_byte: Option<u8>,
}

#[derive(Debug, Args, Serialize)]
pub struct LdaArgs {
    /// Profiling set with per-trace keys.
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out set with keys.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value = "A8", value_parser = parse_cell)]
    pub cell: Cell,
    /// Training traces.
    #[arg(long, default_value_t = 200)]
    pub n_train: usize,
    /// Sample window start..end; the sample most correlated with the LSB otherwise.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Window>,
}

#[derive(Debug, Args, Serialize)]
pub struct AttackArgs {
    /// Traces under the unknown key with known IVs.
    #[arg(long)]
    pub traces: PathBuf,
    /// Profiling traces with known per-trace keys.
    #[arg(long)]
    pub profiling: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub poi_half_width: usize,
    #[arg(long, default_value_t = 0)]
    pub lda_half_width: usize,
    #[arg(long, default_value_t = 200)]
    pub lda_training: usize,
    #[arg(long, default_value_t = 0.75)]
    pub min_vote: f64,
    /// Skip the per-byte MTD computation.
    #[arg(long)]
    pub no_mtd: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CounterEvalArgs {
    /// Protected variant to compare against the reference.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Variant,
    /// Traces per TVLA group.
    #[arg(long, default_value_t = 1000)]
    pub tvla_n: usize,
    /// Traces for the CPA/MTD run.
    #[arg(long, default_value_t = 5000)]
    pub cpa_n: usize,
    /// Key; derived from the seed otherwise.
    #[arg(long, value_parser = parse_key)]
    pub key: Option<Key256>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    /// A .csv file (one trace per row) or a trace-set metadata file.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// JSON array of per-trace metadata for CSV input.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// IV of every trace for CSV input without --meta.
    #[arg(long, value_parser = parse_iv)]
    pub iv: Option<Iv128>,
}

/// Failure classes that map to exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(anyhow::Error),
    NotConverged(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(e) => write!(f, "{e:#}"),
            CliError::NotConverged(m) => write!(f, "attack did not converge: {m}"),
        }
    }
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Input(e)
    }
}

/// Where a run writes its artifacts.
pub struct Output {
    pub dir: PathBuf,
    pub csv: bool,
    pub svg: bool,
}

impl Output {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `<command>.json` with the tool version and resolved config.
    pub fn result<C: Serialize, R: Serialize>(
        &self,
        command: &str,
        config: &C,
        result: &R,
    ) -> anyhow::Result<PathBuf> {
        #[derive(Serialize)]
        struct Doc<'a, C, R> {
            tool: &'a str,
            version: &'a str,
            command: &'a str,
            config: &'a C,
            result: &'a R,
        }
        let doc = Doc {
            tool: "snowv-lab",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            result,
        };
        std::fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.path(&format!("{command}.json"));
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Writes the optional CSV and SVG renderings of `curve` as `<stem>.csv`
    /// and `<stem>.svg`.
    pub fn curve(&self, stem: &str, curve: &plot::Curve) -> anyhow::Result<()> {
        if self.csv {
            curve.write_csv(&self.path(&format!("{stem}.csv")))?;
        }
        if self.svg && !curve.points.is_empty() {
            plot::emit_plot(curve, &self.path(&format!("{stem}.svg")))?;
        }
        Ok(())
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = Output {
        dir: cli.out_dir.clone(),
        csv: cli.csv,
        svg: cli.svg,
    };
    match commands::dispatch(&cli.command, &out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

pub(crate) fn display(p: &Path) -> String {
    p.display().to_string()
}
