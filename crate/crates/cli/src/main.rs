//! Command-line front end for the scene sequence toolkit.

mod config;
mod io;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rayon::prelude::*;
use sceneseq::eval::{self, MatchCriteria};
use sceneseq::gen::{self, GenConfig};
use sceneseq::image_order::{HopOrder, ReorderPlan};
use sceneseq::number_encoding::number_table;
use sceneseq::sequence::{SequenceBuilder, TaskSequence};
use sceneseq::serializer::{self, ParseMode, TokenString};
use sceneseq::vocab::TokenKind;
use sceneseq::{stats, stream, DatasetStyle, Scene, SequenceOptions, Vocabulary};
use serde::Deserialize;
use serde_json::json;

use crate::config::{parse_dataset, parse_range, Settings};

#[derive(Parser)]
#[command(name = "sceneseq", version, about = "Structured 3D scene tokenization and evaluation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct GlobalArgs {
    /// TOML or JSON file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Quantizer bin width.
    #[arg(long, global = true)]
    granularity: Option<f64>,
    /// Quantizer range as MIN,MAX.
    #[arg(long, global = true, value_parser = parse_range, allow_hyphen_values = true)]
    range: Option<[f64; 2]>,
    /// Dataset style (clevr, objaworld, objaworld_shapes, objectron, arkitscenes).
    #[arg(long, visible_alias = "style", global = true, value_parser = parse_dataset)]
    dataset: Option<DatasetStyle>,
    /// Emit image tokens starting from the center of the raster.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    center_reorder: Option<bool>,
    /// image-first or scene-first.
    #[arg(long, global = true)]
    order: Option<String>,
    /// Distance thresholds; repeat or comma-separate.
    #[arg(long, global = true, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    /// Worker threads for batch work; output order is unaffected.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Add the 8,192-entry shape codebook to the vocabulary.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    with_shapes: Option<bool>,
    /// Recover what can be parsed from malformed token strings.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    lenient: Option<bool>,
}

impl GlobalArgs {
    fn settings(&self) -> Settings {
        Settings {
            granularity: self.granularity,
            range: self.range,
            dataset: self.dataset,
            center_reorder: self.center_reorder,
            order: self.order.clone(),
            tau: self.tau.clone(),
            jobs: self.jobs,
            seed: self.seed,
            out: self.out.clone(),
            with_shapes: self.with_shapes,
            lenient: self.lenient,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes as JSON lines.
    Gen(GenArgs),
    /// Scenes (JSON lines) to token lines.
    Serialize(SerializeArgs),
    /// Token lines back to scenes.
    Parse(ParseArgs),
    /// Task records (JSON lines) to ID sequences with loss weights.
    BuildSeq(BuildSeqArgs),
    /// Center-reorder image code lines, or undo it.
    Reorder(ReorderArgs),
    /// Score predictions.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Corpus statistics over ID lines.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Describe the vocabulary and optionally write its manifest.
    Vocab(VocabArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    min_objects: Option<usize>,
    #[arg(long)]
    max_objects: Option<usize>,
    #[arg(long)]
    min_separation: Option<f64>,
    /// Emit one random edit per scene instead of bare scenes.
    #[arg(long)]
    edits: bool,
}

#[derive(Args)]
struct SerializeArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write vocabulary IDs instead of token strings.
    #[arg(long)]
    ids: bool,
    /// Write the binary ID stream (implies --ids).
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input lines hold vocabulary IDs.
    #[arg(long)]
    ids: bool,
}

#[derive(Args)]
struct BuildSeqArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Also write per-token loss weights, one line per sequence.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    binary: bool,
    #[arg(long)]
    head_weight: Option<f64>,
    #[arg(long)]
    head_len: Option<usize>,
}

#[derive(Args)]
struct ReorderArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Map center order back to raster order.
    #[arg(long)]
    invert: bool,
    /// Take the first hop to the right of the center.
    #[arg(long)]
    right_first: bool,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Jaccard index of predicted scenes against ground truth.
    Jaccard {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Predictions are token lines rather than scene JSON.
        #[arg(long)]
        pred_tokens: bool,
    },
    /// Exact-match accuracy of answer lines against QA records.
    Qa {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Random and majority-answer baselines.
    QaBaselines {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Also simulate uniform guessing this many times.
        #[arg(long)]
        simulate: Option<usize>,
    },
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Most-common-token share per position, as CSV.
    Position {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Code usage counts, as CSV.
    Usage {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Code range as START:END.
        #[arg(long, default_value = "0:1024")]
        codes: String,
        /// Print a JSON summary instead of the CSV.
        #[arg(long)]
        summary: bool,
    },
}

#[derive(Args)]
struct VocabArgs {
    /// Write the ID manifest to this file.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Write the sine-cosine table of the numeric tokens to this file.
    #[arg(long)]
    encoding_table: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    dim: usize,
}

struct Ctx {
    settings: Settings,
    pool: rayon::ThreadPool,
}

impl Ctx {
    fn out(&self) -> anyhow::Result<Box<dyn Write>> {
        io::writer(self.settings.out.as_deref())
    }

    fn par_map<T, U, F>(&self, items: &[T], f: F) -> anyhow::Result<Vec<U>>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> anyhow::Result<U> + Sync,
    {
        self.pool.install(|| {
            items
                .par_iter()
                .enumerate()
                .map(|(i, t)| f(i, t))
                .collect()
        })
    }

    fn vocab(&self) -> anyhow::Result<Vocabulary> {
        Ok(Vocabulary::new(self.settings.quantizer()?, self.settings.with_shapes()))
    }

    fn hint(&self) -> Option<DatasetStyle> {
        self.settings.dataset
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let msg = e.render().to_string();
            let msg = msg.strip_prefix("error: ").unwrap_or(&msg);
            eprint!("error[E_USAGE]: {msg}");
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let broken_pipe = e
                .chain()
                .filter_map(|c| c.downcast_ref::<std::io::Error>())
                .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe);
            if broken_pipe {
                return ExitCode::SUCCESS;
            }
            eprintln!("error[{}]: {e:#}", error_code(&e));
            ExitCode::FAILURE
        }
    }
}

fn error_code(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<sceneseq::Error>() {
            return err.code();
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "E_JSON";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "E_IO";
        }
    }
    "E_USAGE"
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.global.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let mut settings = file.overlay(&cli.global.settings());
    if let Command::Gen(g) = &cli.command {
        let top = Settings {
            n: g.n,
            min_objects: g.min_objects,
            max_objects: g.max_objects,
            min_separation: g.min_separation,
            ..Default::default()
        };
        settings = settings.overlay(&top);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = settings.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        pool = pool.num_threads(j);
    }
    let ctx = Ctx {
        settings,
        pool: pool.build().context("starting worker pool")?,
    };
    match cli.command {
        Command::Gen(a) => cmd_gen(&ctx, &a),
        Command::Serialize(a) => cmd_serialize(&ctx, &a),
        Command::Parse(a) => cmd_parse(&ctx, &a),
        Command::BuildSeq(a) => cmd_build_seq(&ctx, &a),
        Command::Reorder(a) => cmd_reorder(&ctx, &a),
        Command::Eval(e) => cmd_eval(&ctx, e),
        Command::Stats(s) => cmd_stats(&ctx, s),
        Command::Vocab(a) => cmd_vocab(&ctx, &a),
    }
}

fn gen_config(s: &Settings) -> anyhow::Result<GenConfig> {
    let mut cfg = GenConfig {
        seed: s.seed.unwrap_or(0),
        style: s.dataset.unwrap_or(DatasetStyle::Clevr),
        ..Default::default()
    };
    if s.granularity.is_some() || s.range.is_some() {
        cfg.quantizer = s.quantizer()?;
    }
    if let Some(lo) = s.min_objects {
        cfg.n_objects_range[0] = lo;
    }
    if let Some(hi) = s.max_objects {
        cfg.n_objects_range[1] = hi;
    }
    if let Some(m) = s.min_separation {
        cfg.min_separation = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_gen(ctx: &Ctx, args: &GenArgs) -> anyhow::Result<()> {
    let cfg = gen_config(&ctx.settings)?;
    let n = ctx.settings.n.unwrap_or(1);
    let indices: Vec<u64> = (0..n as u64).collect();
    let lines = ctx.par_map(&indices, |_, &i| {
        let scene = gen::generate_scene_at(&cfg, i)?;
        if !args.edits {
            return Ok(scene.to_json());
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i);
        let op = gen::sample_edit(&scene, &cfg, &mut rng)?;
        let (edited, instruction) = gen::edit_scene(&scene, &op, &cfg)?;
        Ok(json!({
            "scene": scene.to_value(),
            "op": op,
            "instruction": instruction,
            "edited": edited.to_value(),
        })
        .to_string())
    })?;
    let mut w = ctx.out()?;
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_serialize(ctx: &Ctx, args: &SerializeArgs) -> anyhow::Result<()> {
    let scenes = io::read_scenes(args.input.as_deref())?;
    let q = ctx.settings.quantizer()?;
    let tokens = ctx.par_map(&scenes, |i, s| {
        serializer::serialize_scene(s, &q).with_context(|| format!("scene {}", i + 1))
    })?;
    let mut w = ctx.out()?;
    if args.ids || args.binary {
        let vocab = ctx.vocab()?;
        let ids = ctx.par_map(&tokens, |i, t| {
            t.to_ids(&vocab).with_context(|| format!("scene {}", i + 1))
        })?;
        if args.binary {
            stream::write_binary(&mut w, &ids)?;
        } else {
            for seq in &ids {
                io::write_id_line(&mut w, seq)?;
            }
        }
    } else {
        for t in &tokens {
            writeln!(w, "{t}")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_parse(ctx: &Ctx, args: &ParseArgs) -> anyhow::Result<()> {
    let lines = io::lines(args.input.as_deref())?;
    let mode = if ctx.settings.lenient.unwrap_or(false) {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    };
    let vocab = ctx.vocab()?;
    let q = ctx.settings.quantizer()?;
    let results = ctx.par_map(&lines, |_, (n, line)| {
        let parsed = if args.ids {
            let ids = line
                .split_whitespace()
                .map(|t| t.parse::<u32>().with_context(|| format!("bad ID `{t}`")))
                .collect::<anyhow::Result<Vec<_>>>()?;
            serializer::parse_ids(&ids, &vocab, mode, ctx.hint())
        } else {
            let ts: TokenString = line.parse()?;
            serializer::parse_scene(&ts, &q, mode, ctx.hint())
        };
        parsed.with_context(|| format!("line {n}"))
    })?;
    let mut w = ctx.out()?;
    for ((n, _), (scene, diags)) in lines.iter().zip(results) {
        for d in diags {
            eprintln!("warning: line {n}: {d}");
        }
        writeln!(w, "{}", scene.to_json())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
enum TaskRecord {
    Rendering {
        scene: Scene,
        image: Vec<u32>,
    },
    Recognition {
        image: Vec<u32>,
        scene: Scene,
    },
    Instruction {
        image: Vec<u32>,
        scene: Scene,
        instruction: String,
        out_image: Vec<u32>,
        out_scene: Scene,
    },
    Qa {
        image: Vec<u32>,
        #[serde(default)]
        scene: Option<Scene>,
        question: String,
        answer: String,
    },
}

fn build_one(b: &SequenceBuilder, rec: &TaskRecord) -> sceneseq::Result<TaskSequence> {
    match rec {
        TaskRecord::Rendering { scene, image } => b.build_rendering(scene, image),
        TaskRecord::Recognition { image, scene } => b.build_recognition(image, scene),
        TaskRecord::Instruction {
            image,
            scene,
            instruction,
            out_image,
            out_scene,
        } => b.build_instruction(image, scene, instruction, out_image, out_scene),
        TaskRecord::Qa {
            image,
            scene,
            question,
            answer,
        } => match scene {
            Some(s) => b.build_qa(image, s, question, answer, true),
            None => b.build_qa(image, &Scene::empty(DatasetStyle::Clevr), question, answer, false),
        },
    }
}

fn cmd_build_seq(ctx: &Ctx, args: &BuildSeqArgs) -> anyhow::Result<()> {
    let records: Vec<TaskRecord> = io::read_jsonl(args.input.as_deref())?;
    let vocab = ctx.vocab()?;
    let mut opts = SequenceOptions {
        center_reorder: ctx.settings.center_reorder.unwrap_or(false),
        order: ctx.settings.modality_order()?,
        ..Default::default()
    };
    if let Some(w) = args.head_weight {
        opts.image_head_weight = w;
    }
    if let Some(n) = args.head_len {
        opts.head_len = n;
    }
    let builder = SequenceBuilder::new(&vocab, opts);
    let seqs = ctx.par_map(&records, |i, r| {
        build_one(&builder, r).with_context(|| format!("record {}", i + 1))
    })?;
    let ids: Vec<Vec<u32>> = seqs.iter().map(|s| s.ids.clone()).collect();
    let mut w = ctx.out()?;
    if args.binary {
        stream::write_binary(&mut w, &ids)?;
    } else {
        for seq in &ids {
            io::write_id_line(&mut w, seq)?;
        }
    }
    w.flush()?;
    if let Some(path) = &args.weights {
        let weights: Vec<Vec<f64>> = seqs.into_iter().map(|s| s.weights).collect();
        let f = io::writer(Some(path))?;
        stream::write_weights(f, &weights)?;
    }
    Ok(())
}

fn cmd_reorder(ctx: &Ctx, args: &ReorderArgs) -> anyhow::Result<()> {
    let seqs = io::read_ids(args.input.as_deref())?;
    let hops = if args.right_first {
        HopOrder::RightFirst
    } else {
        HopOrder::LeftFirst
    };
    let out = ctx.par_map(&seqs, |_, s| {
        let plan = ReorderPlan::center(s.len(), hops);
        Ok(if args.invert { plan.invert(s)? } else { plan.apply(s)? })
    })?;
    let mut w = ctx.out()?;
    for s in &out {
        io::write_id_line(&mut w, s)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(ctx: &Ctx, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut w = ctx.out()?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_eval(ctx: &Ctx, cmd: EvalCommand) -> anyhow::Result<()> {
    match cmd {
        EvalCommand::Jaccard {
            gt,
            pred,
            pred_tokens,
        } => {
            let gts = io::read_scenes(Some(&gt))?;
            let style = match (ctx.settings.dataset, gts.first()) {
                (Some(d), _) => d,
                (None, Some(s)) => s.dataset_style,
                (None, None) => bail!("ground-truth file is empty"),
            };
            let preds = if pred_tokens {
                read_token_predictions(ctx, &pred, style)?
            } else {
                io::read_scenes(Some(&pred))?
            };
            let gts = restyle(gts, style);
            let preds = restyle(preds, style);
            let crit = MatchCriteria::preset(style);
            let taus = ctx.settings.tau.clone().unwrap_or_else(|| crit.taus.clone());
            let report = eval::jaccard_dataset(&gts, &preds, &crit, &taus)?;
            let mut value = serde_json::to_value(&report)?;
            value["dataset"] = json!(style);
            write_json(ctx, &value)
        }
        EvalCommand::Qa { gt, pred } => {
            let items = io::read_qa(Some(&gt))?;
            let answers: Vec<String> = io::reader(Some(&pred))?
                .lines()
                .collect::<std::io::Result<_>>()?;
            let gold: Vec<&str> = items.iter().map(|i| i.answer.as_str()).collect();
            let acc = eval::qa_accuracy(&answers, &gold)?;
            write_json(ctx, &json!({ "n": gold.len(), "accuracy": acc }))
        }
        EvalCommand::QaBaselines {
            train,
            test,
            simulate,
        } => {
            let train = io::read_qa(Some(&train))?;
            let test = io::read_qa(Some(&test))?;
            let b = eval::qa_baselines(&train, &test)?;
            let mut value = serde_json::to_value(&b)?;
            if let Some(runs) = simulate {
                let (mean, std) =
                    eval::simulate_random_baseline(&test, runs, ctx.settings.seed.unwrap_or(0))?;
                value["simulated_random"] = json!({ "runs": runs, "mean": mean, "std": std });
            }
            write_json(ctx, &value)
        }
    }
}


fn read_token_predictions(ctx: &Ctx, path: &Path, style: DatasetStyle) -> anyhow::Result<Vec<Scene>> {
    let lines = io::lines(Some(path))?;
    let q = ctx.settings.quantizer()?;
    let parsed = ctx.par_map(&lines, |_, (_, l)| {
        let ts: TokenString = l.parse()?;
        Ok(serializer::parse_scene(&ts, &q, ParseMode::Lenient, Some(style))?)
    })?;
    Ok(parsed
        .into_iter()
        .zip(&lines)
        .map(|((scene, diags), (n, _))| {
            for d in diags {
                eprintln!("warning: pred line {n}: {d}");
            }
            scene
        })
        .collect())
}

/// Empty scenes carry no style evidence; give them the evaluated one.
fn restyle(scenes: Vec<Scene>, style: DatasetStyle) -> Vec<Scene> {
    scenes
        .into_iter()
        .map(|mut s| {
            if s.is_empty() || (s.dataset_style.is_camera_frame() && style.is_camera_frame()) {
                s.dataset_style = style;
            }
            s
        })
        .collect()
}

fn cmd_stats(ctx: &Ctx, cmd: StatsCommand) -> anyhow::Result<()> {
    match cmd {
        StatsCommand::Position { input } => {
            let mut seqs = io::read_ids(input.as_deref())?;
            if ctx.settings.center_reorder.unwrap_or(false) {
                seqs = seqs
                    .iter()
                    .map(|s| ReorderPlan::center(s.len(), HopOrder::LeftFirst).apply(s))
                    .collect::<sceneseq::Result<_>>()?;
            }
            let shares = stats::position_concentration(&seqs)?;
            let mut w = ctx.out()?;
            stats::write_concentration_csv(&mut w, &shares)?;
            w.flush()?;
            Ok(())
        }
        StatsCommand::Usage {
            input,
            codes,
            summary,
        } => {
            let [lo, hi] = parse_range(&codes).map_err(anyhow::Error::msg)?;
            if lo < 0.0 || hi < lo || lo.fract() != 0.0 || hi.fract() != 0.0 {
                bail!("--codes must be START:END with 0 <= START <= END");
            }
            let seqs = io::read_ids(input.as_deref())?;
            let hist = stats::usage_histogram(&seqs, lo as u32..hi as u32)?;
            if summary {
                return write_json(
                    ctx,
                    &json!({
                        "codes": [lo as u32, hi as u32],
                        "total": hist.total(),
                        "used": hist.used(),
                        "used_fraction": hist.used_fraction(),
                    }),
                );
            }
            let mut w = ctx.out()?;
            stats::write_usage_csv(&mut w, &hist)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn cmd_vocab(ctx: &Ctx, args: &VocabArgs) -> anyhow::Result<()> {
    let vocab = ctx.vocab()?;
    if let Some(p) = &args.manifest {
        vocab.write_manifest(io::writer(Some(p))?)?;
    }
    if let Some(p) = &args.encoding_table {
        let table = number_table::<f64>(vocab.quantizer(), args.dim)?;
        let mut w = io::writer(Some(p))?;
        table.write_to(&mut w)?;
        w.flush()?;
    }
    let blocks: serde_json::Map<String, serde_json::Value> = [
        ("byte", TokenKind::Byte),
        ("word", TokenKind::Word),
        ("text", TokenKind::Text),
        ("special", TokenKind::Special),
        ("number", TokenKind::Number),
        ("image", TokenKind::Image),
        ("shape", TokenKind::Shape),
    ]
    .into_iter()
    .map(|(name, k)| {
        let r = vocab.block(k);
        (name.to_string(), json!({ "start": r.start, "count": r.len() }))
    })
    .collect();
    let q = vocab.quantizer();
    write_json(
        ctx,
        &json!({
            "total": vocab.total_size(),
            "quantizer": q,
            "blocks": blocks,
        }),
    )
}
