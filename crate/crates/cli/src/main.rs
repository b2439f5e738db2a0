//! `mxplus` command-line driver.
//!
//! Exit status is 0 on success, 1 on runtime or check failure and 2 on usage
//! errors. Diagnostics go to stderr as `error[<code>]: <message>`.

use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mxplus::analysis::synth::{generate, Placement, SynthConfig};
use mxplus::analysis::{
    apply_permutation, average_counts, mse_report, outlier_stats, reorder_channels, topk_hybrid_sse, HalfOrder,
    MseReport, OutlierStats, Permutation, TopkReport, TOPK_BLOCK,
};
use mxplus::linalg::{matmul, MatmulPath, Matrix};
use mxplus::tensorio::{self, TENSOR_MAGIC};
use mxplus::{decode_tensor, encode_tensor, EncodedTensor, Format, Tensor};

#[derive(Parser)]
#[command(name = "mxplus", version, about = "MX / MX+ / MX++ block floating-point toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Encode a tensor file into a block file.
    Quantize(QuantizeArgs),
    /// Decode a block file back into a tensor file.
    Dequantize(DequantizeArgs),
    /// Error and outlier analytics for one tensor under several formats.
    Analyze(AnalyzeArgs),
    /// Emulated matmul A × Bᵀ over quantized operands.
    Matmul(MatmulArgs),
    /// Seeded Gaussian tensor with planted outlier channels.
    Gen(GenArgs),
    /// Outlier-spreading channel permutation.
    Reorder(ReorderArgs),
}

#[derive(Args)]
struct QuantizeArgs {
    #[arg(long)]
    format: Format,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write an MSE report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DequantizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    formats: Vec<Format>,
    /// Include the top-k hybrid sweep over k = 0..=32.
    #[arg(long)]
    topk: bool,
    /// Block size for outlier statistics.
    #[arg(long, default_value_t = 32)]
    block_size: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatmulArgs {
    /// M×K operand: a block file, or a tensor file with --a-format.
    #[arg(long)]
    a: PathBuf,
    /// N×K operand, blocked along K like A.
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    a_format: Option<Format>,
    #[arg(long)]
    b_format: Option<Format>,
    #[arg(long, value_delimiter = ',', default_value = "reference")]
    path: Vec<MatmulPath>,
    /// Also run the reference path and require every result to agree bit-exactly.
    #[arg(long)]
    check: bool,
    /// Write the first path's M×N result as a tensor file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 0.01)]
    outlier_frac: f64,
    #[arg(long, default_value_t = 64.0)]
    outlier_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Plant the outlier channels next to each other.
    #[arg(long)]
    adjacent: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReorderArgs {
    /// Tensor files whose per-channel outlier counts are averaged.
    #[arg(long, value_delimiter = ',', required = true)]
    stats_from: Vec<PathBuf>,
    #[arg(long, default_value_t = 32)]
    block_size: usize,
    /// Fill free slots from the more-outlier half first.
    #[arg(long)]
    upper_first: bool,
    /// Permute this tensor's channels and write it to --out.
    #[arg(long, requires = "out")]
    apply: Option<PathBuf>,
    #[arg(long, requires = "apply")]
    out: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

enum Failure {
    Lib(mxplus::Error),
    Mismatch(String),
}

impl From<mxplus::Error> for Failure {
    fn from(e: mxplus::Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> CmdResult {
    match path {
        Some(p) => tensorio::write_json_file(p, value)?,
        None => tensorio::write_json(value, io::stdout().lock())?,
    }
    Ok(())
}

fn quantize(args: QuantizeArgs) -> CmdResult {
    let t = tensorio::read_tensor(&args.input)?;
    let et = encode_tensor(&t, &args.format)?;
    tensorio::write_blocks(&args.out, &et)?;
    if let Some(report) = &args.report {
        emit(&mse_report(&t, &args.format)?, Some(report))?;
    }
    Ok(())
}

fn dequantize(args: DequantizeArgs) -> CmdResult {
    let et = tensorio::read_blocks(&args.input)?;
    tensorio::write_tensor(&args.out, &decode_tensor(&et)?)?;
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeReport {
    shape: Vec<usize>,
    formats: Vec<MseReport>,
    outliers: OutlierStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    topk: Option<Vec<TopkReport>>,
}

fn analyze(args: AnalyzeArgs) -> CmdResult {
    let t = tensorio::read_tensor(&args.input)?;
    let formats = args.formats.iter().map(|f| mse_report(&t, f)).collect::<Result<_, _>>()?;
    let topk = if args.topk {
        Some((0..=TOPK_BLOCK).map(|k| topk_hybrid_sse(&t, k)).collect::<Result<_, _>>()?)
    } else {
        None
    };
    let report =
        AnalyzeReport { shape: t.shape().to_vec(), formats, outliers: outlier_stats(&t, args.block_size)?, topk };
    emit(&report, args.out.as_deref())
}

fn load_operand(path: &Path, format: Option<&Format>, flag: &str) -> Result<EncodedTensor, Failure> {
    let mut magic = [0u8; 4];
    let n = File::open(path)?.read(&mut magic)?;
    if n == 4 && magic == TENSOR_MAGIC {
        let format = format.ok_or_else(|| {
            mxplus::Error::InvalidArgument(format!("{} is a tensor file; pass --{flag}-format", path.display()))
        })?;
        return Ok(encode_tensor(&tensorio::read_tensor(path)?, format)?);
    }
    let et = tensorio::read_blocks(path)?;
    if let Some(f) = format {
        if *f != et.format {
            return Err(
                mxplus::Error::InvalidArgument(format!("{} holds {}, not {f}", path.display(), et.format)).into()
            );
        }
    }
    Ok(et)
}

#[derive(Serialize)]
struct MatmulReport {
    rows: usize,
    cols: usize,
    paths: Vec<MatmulPath>,
    checked: bool,
}

fn run_matmul(args: MatmulArgs) -> CmdResult {
    let a = load_operand(&args.a, args.a_format.as_ref(), "a")?;
    let b = load_operand(&args.b, args.b_format.as_ref(), "b")?;
    let mut paths: Vec<MatmulPath> = Vec::new();
    for p in &args.path {
        if !paths.contains(p) {
            paths.push(*p);
        }
    }
    if args.check && !paths.contains(&MatmulPath::Reference) {
        paths.push(MatmulPath::Reference);
    }
    let results =
        paths.iter().map(|&p| matmul(p, &a, &b).map(|m| (p, m))).collect::<Result<Vec<(MatmulPath, Matrix)>, _>>()?;
    let (p0, first) = &results[0];
    if args.check {
        for (p, m) in &results[1..] {
            if let Some((i, j)) = first.first_mismatch(m) {
                let show = |m: &Matrix| {
                    if i < m.rows && j < m.cols {
                        m.get(i, j).to_string()
                    } else {
                        "-".into()
                    }
                };
                return Err(Failure::Mismatch(format!(
                    "{p} differs from {p0} at ({i}, {j}): {} vs {}",
                    show(m),
                    show(first)
                )));
            }
        }
    }
    if let Some(out) = &args.out {
        tensorio::write_tensor(out, &first.to_tensor())?;
    }
    let report = MatmulReport { rows: first.rows, cols: first.cols, paths, checked: args.check };
    emit(&report, None)
}

fn gen(args: GenArgs) -> CmdResult {
    let cfg = SynthConfig {
        rows: args.rows,
        cols: args.cols,
        outlier_frac: args.outlier_frac,
        outlier_scale: args.outlier_scale,
        placement: if args.adjacent { Placement::Adjacent } else { Placement::Random },
        seed: args.seed,
    };
    let (t, _) = generate(&cfg)?;
    tensorio::write_tensor(&args.out, &t)?;
    Ok(())
}

#[derive(Serialize)]
struct ReorderReport {
    permutation: Permutation,
    #[serde(skip_serializing_if = "Option::is_none")]
    before: Option<OutlierStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    after: Option<OutlierStats>,
}

fn reorder(args: ReorderArgs) -> CmdResult {
    let counts = args
        .stats_from
        .iter()
        .map(|p| Ok(outlier_stats(&tensorio::read_tensor(p)?, args.block_size)?.per_channel_counts))
        .collect::<Result<Vec<_>, Failure>>()?;
    let order = if args.upper_first { HalfOrder::UpperFirst } else { HalfOrder::LowerFirst };
    let perm = reorder_channels(&average_counts(&counts)?, args.block_size, order)?;
    let mut report = ReorderReport { permutation: perm, before: None, after: None };
    if let (Some(input), Some(out)) = (&args.apply, &args.out) {
        let t: Tensor = tensorio::read_tensor(input)?;
        let moved = apply_permutation(&t, &report.permutation)?;
        tensorio::write_tensor(out, &moved)?;
        report.before = Some(outlier_stats(&t, args.block_size)?);
        report.after = Some(outlier_stats(&moved, args.block_size)?);
    }
    emit(&report, args.report.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Quantize(a) => quantize(a),
        Cmd::Dequantize(a) => dequantize(a),
        Cmd::Analyze(a) => analyze(a),
        Cmd::Matmul(a) => run_matmul(a),
        Cmd::Gen(a) => gen(a),
        Cmd::Reorder(a) => reorder(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(1)
        }
        Err(Failure::Mismatch(msg)) => {
            eprintln!("error[path-mismatch]: {msg}");
            ExitCode::from(1)
        }
    }
}
