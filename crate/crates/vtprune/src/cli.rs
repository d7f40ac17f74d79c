//! `vtprune` command line.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vtprune_core::{
    build_query, pruned_cost, sweep, CostModelSpec, DecoderPreset, PruneConfig, QueryEmbedding, QuerySpec, SweepRow,
    Weighting, DEFAULT_EPS,
};

use crate::bench::{self, GeneratorParams, Strategy};
use crate::driver::{prune_timed, prune_video_parallel};
use crate::error::{Error, Result};
use crate::io::{self, ConfigEcho, FlopsReport, QueryInput, ResultDocument};

#[derive(Debug, Parser)]
#[command(name = "vtprune", version, about = "Query-guided visual token pruning and decoder FLOPs estimates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select visual tokens per frame from NPY feature files.
    Prune(PruneArgs),
    /// Decoder FLOPs before and after pruning.
    Flops(FlopsArgs),
    /// Compare selection strategies on synthetic data.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Uniform,
    MiddlePeak,
    Exponential,
    Explicit,
    None,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::MiddlePeak => Weighting::MiddlePeak,
            WeightingArg::Exponential => Weighting::Exponential,
            WeightingArg::Explicit => Weighting::Explicit,
            WeightingArg::None => Weighting::None,
        }
    }
}

fn parse_beta(s: &str) -> std::result::Result<Option<f64>, String> {
    match s {
        "none" | "inf" | "unbounded" => Ok(None),
        _ => s.parse::<f64>().map(Some).map_err(|e| e.to_string()),
    }
}

/// Selection knobs shared by `prune` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    /// Keep ratio r in (0, 1]; each frame keeps max(1, round(r * L)) tokens.
    #[arg(long, default_value_t = 0.15)]
    pub ratio: f64,
    /// Weight of query relevance against diversity.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Relevance threshold for the candidate pre-filter; values <= 0 disable it.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub tau: f64,
    /// Candidate cap M [default: unbounded].
    #[arg(long)]
    pub cap_m: Option<usize>,
    /// Candidate pool limit as a multiple of the picks still owed ("none" for unbounded).
    #[arg(long, default_value = "3", value_parser = parse_beta)]
    pub beta: std::option::Option<f64>,
}

impl SelectionArgs {
    fn config(&self) -> PruneConfig {
        PruneConfig {
            r: self.ratio,
            alpha: self.alpha,
            tau: self.tau,
            cap_m: self.cap_m,
            beta: self.beta,
            ..PruneConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PruneArgs {
    /// Feature file (L x C or N x L x C), or several L x C files / a directory
    /// of them, one frame per file in file-name order.
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    /// Prompt token embeddings (J x C) or a precomputed query vector (C).
    #[arg(long, conflicts_with = "no_text")]
    pub query_embeddings: Option<PathBuf>,
    /// Prune without text guidance (diversity only).
    #[arg(long)]
    pub no_text: bool,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// How prompt tokens are weighted when forming the query.
    #[arg(long, value_enum, default_value_t = WeightingArg::Exponential)]
    pub weighting: WeightingArg,
    /// Base of the exponential weighting.
    #[arg(long, default_value_t = 1.5)]
    pub gamma: f64,
    /// Per-token weights (length J) for --weighting explicit.
    #[arg(long)]
    pub query_weights: Option<PathBuf>,
    /// C_v x C_text matrix mapping text embeddings into the visual feature space.
    #[arg(long)]
    pub projection: Option<PathBuf>,
    /// Selection result JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the kept feature rows as NPY.
    #[arg(long)]
    pub out_features: Option<PathBuf>,
    /// Worker threads for frame-level parallelism (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Leave wall-clock timing out of the JSON so output is reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// Attach a FLOPs report for this decoder preset (requires --text-tokens).
    #[arg(long, requires = "text_tokens")]
    pub flops_preset: Option<String>,
    /// Text token count for the FLOPs report.
    #[arg(long)]
    pub text_tokens: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct FlopsArgs {
    /// Named decoder dimensions ("7b": d=4096, m=11008, T=32).
    #[arg(long)]
    pub preset: Option<String>,
    /// Hidden size.
    #[arg(long)]
    pub d: Option<u64>,
    /// FFN intermediate size.
    #[arg(long)]
    pub m: Option<u64>,
    /// Decoder layer count.
    #[arg(long = "T", alias = "layers")]
    pub layers: Option<u64>,
    /// Text tokens in the prompt.
    #[arg(long)]
    pub text_tokens: u64,
    /// Visual tokens before pruning.
    #[arg(long)]
    pub v_full: u64,
    /// Visual tokens after pruning.
    #[arg(long, conflicts_with = "ratios")]
    pub v_pruned: Option<u64>,
    /// Comma-separated keep ratios to sweep.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    /// Layers that still see the full sequence (0 = pruning before the decoder).
    #[arg(long, default_value_t = 0)]
    pub k_layer: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub frames: usize,
    /// Tokens per frame.
    #[arg(long, default_value_t = 256)]
    pub tokens: usize,
    /// Feature channels.
    #[arg(long, default_value_t = 64)]
    pub dims: usize,
    /// Probability that a token duplicates an earlier one.
    #[arg(long, default_value_t = 0.2)]
    pub redundancy: f64,
    /// Probability that a fresh token is planted near the query.
    #[arg(long, default_value_t = 0.1)]
    pub planted_fraction: f64,
    /// Comma-separated keep ratios.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.25,0.5,1")]
    pub ratios: Vec<f64>,
    /// Strategies to run [default: all].
    #[arg(long, value_delimiter = ',')]
    pub strategies: Vec<Strategy>,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Omit the wall-clock column so output is reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "{line}");
            return 2;
        }
    };
    let result = match cli.command {
        Command::Prune(a) => cmd_prune(&a, out),
        Command::Flops(a) => cmd_flops(&a, out, err),
        Command::Bench(a) => cmd_bench(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_query(a: &PruneArgs, visual_dim: usize) -> Result<QueryEmbedding> {
    let weighting: Weighting = a.weighting.into();
    if a.no_text || weighting == Weighting::None {
        return Ok(QueryEmbedding::no_text(visual_dim));
    }
    let path = a
        .query_embeddings
        .as_ref()
        .ok_or_else(|| Error::Usage("one of --query-embeddings or --no-text is required".into()))?;
    match io::read_query_embeddings(path)? {
        QueryInput::Direction(v) => Ok(QueryEmbedding::from_direction(&v, weighting, DEFAULT_EPS)),
        QueryInput::Tokens(tokens) => {
            let mut spec = QuerySpec::new(tokens, weighting).with_gamma(a.gamma);
            if let Some(p) = &a.query_weights {
                spec.explicit_weights = Some(io::read_vector(p)?);
            }
            if let Some(p) = &a.projection {
                spec = spec.with_projection(io::read_matrix(p)?);
            }
            Ok(build_query(&spec)?)
        }
    }
}

fn preset(name: &str) -> Result<DecoderPreset> {
    DecoderPreset::by_name(name).ok_or_else(|| Error::Usage(format!("unknown decoder preset '{name}'")))
}

fn cmd_prune(a: &PruneArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.selection.config();
    cfg.validate()?;
    let files = io::resolve_inputs(&a.features)?;
    let video = io::read_feature_files(&files)?;
    let query = load_query(a, video.cols())?;

    let (selections, elapsed) = if a.no_timing {
        (prune_video_parallel(&video, &query, &cfg, a.workers)?, None)
    } else {
        let (s, ms) = prune_timed(&video, &query, &cfg, a.workers)?;
        (s, Some(ms))
    };

    let mut doc =
        ResultDocument::new(ConfigEcho { selection: cfg, weighting: query.scheme, gamma: a.gamma }, &selections);
    doc.timing_ms = elapsed;
    if let Some(name) = &a.flops_preset {
        let text_tokens = a.text_tokens.unwrap_or_default();
        let v_full = selections.iter().map(|s| s.relevance.len() as u64).sum();
        let v_pruned = selections.iter().map(|s| s.budget as u64).sum();
        let model = CostModelSpec::from_preset(preset(name)?, text_tokens, v_full, v_pruned);
        doc.flops_report = Some(FlopsReport { model, report: pruned_cost(&model)? });
    }

    for f in &doc.frames {
        writeln!(out, "frame {}: kept {}/{} tokens", f.frame_index, f.budget, f.num_tokens)
            .map_err(|e| Error::io("<stdout>", e))?;
    }
    if let Some(path) = &a.out {
        io::write_selection(&doc, path)?;
    }
    if let Some(path) = &a.out_features {
        io::write_pruned_features(&video, &selections, path)?;
    }
    Ok(())
}

pub fn flops_csv(rows: &[(Option<f64>, SweepRow)]) -> String {
    let mut s = String::from("r,v_pruned,flops_full,flops_pruned,ratio\r\n");
    for (r, row) in rows {
        let r = r.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{r},{},{},{},{}\r\n", row.v_pruned, row.flops_full, row.flops_pruned, row.ratio));
    }
    s
}

fn flops_table(rows: &[(Option<f64>, SweepRow)]) -> String {
    let mut s = format!("{:>8} {:>9} {:>12} {:>13} {:>9}\n", "r", "v_pruned", "TFLOPs full", "TFLOPs pruned", "ratio");
    for (r, row) in rows {
        let r = r.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        s.push_str(&format!(
            "{r:>8} {:>9} {:>12.3} {:>13.3} {:>8.2}%\n",
            row.v_pruned,
            row.flops_full / 1e12,
            row.flops_pruned / 1e12,
            row.ratio * 100.0
        ));
    }
    s
}

fn cmd_flops(a: &FlopsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let base = match &a.preset {
        Some(name) => preset(name)?,
        None => DecoderPreset { d: 0, m: 0, layers: 0 },
    };
    let dims =
        DecoderPreset { d: a.d.unwrap_or(base.d), m: a.m.unwrap_or(base.m), layers: a.layers.unwrap_or(base.layers) };
    if dims.d == 0 || dims.m == 0 || dims.layers == 0 {
        return Err(Error::Usage("--d, --m and --T (or --preset) must be given and positive".into()));
    }
    let spec = CostModelSpec {
        d: dims.d,
        m: dims.m,
        layers: dims.layers,
        k_layer: a.k_layer,
        text_tokens: a.text_tokens,
        v_full: a.v_full,
        v_pruned: a.v_pruned.unwrap_or(a.v_full),
    };
    let rows: Vec<(Option<f64>, SweepRow)> = match (&a.ratios, a.v_pruned) {
        (Some(ratios), _) => sweep(&spec, ratios)?.into_iter().map(|r| (Some(r.r), r)).collect(),
        (None, Some(v_pruned)) => {
            let rep = pruned_cost(&spec)?;
            let row = SweepRow {
                r: f64::NAN,
                v_pruned,
                flops_full: rep.flops_full,
                flops_pruned: rep.flops_pruned,
                ratio: rep.ratio,
            };
            vec![(None, row)]
        }
        (None, None) => return Err(Error::Usage("one of --ratios or --v-pruned is required".into())),
    };
    let csv = flops_csv(&rows);
    match &a.out {
        Some(path) => fs::write(path, &csv).map_err(|e| Error::io(path, e))?,
        None => out.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e))?,
    }
    err.write_all(flops_table(&rows).as_bytes()).map_err(|e| Error::io("<stderr>", e))?;
    Ok(())
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let params = GeneratorParams {
        seed: a.seed,
        frames: a.frames,
        tokens: a.tokens,
        dims: a.dims,
        redundancy: a.redundancy,
        planted_fraction: a.planted_fraction,
    };
    let cfg = a.selection.config();
    cfg.validate()?;
    if a.ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
        return Err(Error::Usage("ratios must lie in (0, 1]".into()));
    }
    let strategies = if a.strategies.is_empty() { Strategy::ALL.to_vec() } else { a.strategies.clone() };
    let data = bench::generate(&params)?;
    let rows = bench::run(&data, &strategies, &a.ratios, &cfg)?;
    let csv = bench::to_csv(&rows, !a.no_timing);
    match &a.out {
        Some(path) => fs::write(path, &csv).map_err(|e| Error::io(path, e))?,
        None => out.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(())
}
