//! The `vdp` command line.
//!
//! Data goes to standard output and diagnostics to standard error. Exit
//! codes: 0 success, 1 validation or runtime failure, 2 usage error.

use std::fmt::{self, Display};
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::align::{align_frames, render_discourse, AlignConfig};
use crate::corpus::{
    generate_synthetic, load_corpus, read_features, Corpus, FeatureSequence, Split, SynthSpec,
};
use crate::metrics::{build_report, ReportTable};
use crate::model::{read_checkpoint, write_checkpoint, Checkpoint, ModelConfig};
use crate::rst::{
    linearize, parse, validate, Edu, Nuclearity, RelationVocab, RstTree, TokenSequence,
};
use crate::trainer::{
    predict, score_split, sweep, sweep_table, train_with, val_evaluator, Dataset, EpochLog,
    SweepGrid, TrainConfig,
};

pub const CHECKPOINT_FILE: &str = "model.vdpm";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const SWEEP_TABLE_FILE: &str = "sweep.tsv";
pub const SWEEP_REPORTS_FILE: &str = "reports.jsonl";

#[derive(Parser, Debug)]
#[command(
    name = "vdp",
    version,
    about = "Discourse structure prediction over video frame features"
)]
struct Cli {
    /// Seed for every random draw; overrides config files (default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Human-readable tables instead of tab-separated output.
    #[arg(long, global = true)]
    pretty: bool,
    /// Relation label file, one label per line.
    #[arg(long, global = true, value_name = "FILE")]
    relations_vocab: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic planted-code corpus.
    Synth {
        /// TOML synthetic spec; defaults apply to missing fields.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Check every manifest record and report violations.
    Validate {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
    },
    /// Train a model and write the best checkpoint and the epoch log.
    Train {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, value_name = "FILE")]
        model_config: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        train_config: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Score a checkpoint on one split.
    Eval {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: Split,
    },
    /// Print the predicted structure for one feature file.
    Predict {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "FILE")]
        features: PathBuf,
    },
    /// Assign a representative frame to every predicted EDU.
    Align {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "FILE")]
        features: PathBuf,
        /// Defaults to the feature file stem.
        #[arg(long)]
        video_id: Option<String>,
        /// Also list the frames covering this fraction of attention mass.
        #[arg(long)]
        mass_threshold: Option<f64>,
    },
    /// Train and test every row of a configuration grid.
    Sweep {
        /// `table1`, `table2`, or a TOML grid file.
        #[arg(long)]
        grid: String,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Base config for the axes the grid does not set.
        #[arg(long, value_name = "FILE")]
        model_config: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        train_config: Option<PathBuf>,
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Read JSON trees on stdin, write token lines.
    Linearize,
    /// Read token lines on stdin, write JSON trees.
    Parse,
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        _ => Err(format!("expected train, val or test, got {s:?}")),
    }
}

/// Standard streams, injectable for tests.
pub struct Io<'a> {
    pub stdin: &'a mut dyn Read,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Invalid(String),
}

impl Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Invalid(m) => f.write_str(m),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn usage(flag: &str, e: impl Display) -> Failure {
    Failure::Usage(format!("{flag}: {e}"))
}

fn invalid(e: impl Display) -> Failure {
    Failure::Invalid(e.to_string())
}

type Outcome = Result<i32, Failure>;

pub fn run<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let stream: &mut dyn Write = if code == 0 { io.stdout } else { io.stderr };
            let _ = write!(stream, "{text}");
            return if code == 0 { 0 } else { 2 };
        }
    };
    match dispatch(cli, io) {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(io.stderr, "error: {failure}");
            match failure {
                Failure::Usage(_) => 2,
                Failure::Invalid(_) => 1,
            }
        }
    }
}

fn dispatch(cli: Cli, io: &mut Io<'_>) -> Outcome {
    let relations = match &cli.relations_vocab {
        Some(p) => RelationVocab::from_file(p).map_err(|e| usage("--relations-vocab", e))?,
        None => RelationVocab::default(),
    };
    let ctx = Ctx {
        seed: cli.seed,
        pretty: cli.pretty,
        relations,
    };
    match cli.command {
        Command::Synth { spec, out } => ctx.synth(spec.as_deref(), &out, io),
        Command::Validate { manifest } => ctx.validate(&manifest, io),
        Command::Train {
            manifest,
            model_config,
            train_config,
            out,
            max_epochs,
        } => ctx.train(
            &manifest,
            model_config.as_deref(),
            train_config.as_deref(),
            &out,
            max_epochs,
            io,
        ),
        Command::Eval {
            manifest,
            checkpoint,
            split,
        } => ctx.eval(&manifest, &checkpoint, split, io),
        Command::Predict {
            checkpoint,
            features,
        } => ctx.predict(&checkpoint, &features, io),
        Command::Align {
            checkpoint,
            features,
            video_id,
            mass_threshold,
        } => ctx.align(&checkpoint, &features, video_id, mass_threshold, io),
        Command::Sweep {
            grid,
            manifest,
            out,
            model_config,
            train_config,
            max_epochs,
        } => ctx.sweep(
            &grid,
            &manifest,
            &out,
            model_config.as_deref(),
            train_config.as_deref(),
            max_epochs,
            io,
        ),
        Command::Linearize => ctx.linearize(io),
        Command::Parse => ctx.parse(io),
    }
}

fn read_toml<T: for<'de> Deserialize<'de> + Default>(
    flag: &str,
    path: Option<&Path>,
) -> Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| usage(flag, format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| usage(flag, e))
        }
    }
}

struct Ctx {
    seed: Option<u64>,
    pretty: bool,
    relations: RelationVocab,
}

impl Ctx {
    fn load(&self, manifest: &Path, io: &mut Io<'_>) -> Result<Corpus, Failure> {
        let corpus = load_corpus(manifest, &self.relations).map_err(|e| usage("--manifest", e))?;
        for v in &corpus.violations {
            writeln!(io.stderr, "warning: skipping {v}")?;
        }
        Ok(corpus)
    }

    fn configs(
        &self,
        model: Option<&Path>,
        train: Option<&Path>,
        max_epochs: Option<usize>,
    ) -> Result<(ModelConfig, TrainConfig), Failure> {
        let model: ModelConfig = read_toml("--model-config", model)?;
        let mut train: TrainConfig = read_toml("--train-config", train)?;
        if let Some(seed) = self.seed {
            train.seed = seed;
        }
        if let Some(n) = max_epochs {
            train.max_epochs = n;
        }
        train.validate().map_err(|e| usage("--train-config", e))?;
        Ok((model, train))
    }

    fn synth(&self, spec: Option<&Path>, out: &Path, io: &mut Io<'_>) -> Outcome {
        let mut spec: SynthSpec = read_toml("--spec", spec)?;
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        let corpus = generate_synthetic(&spec, &self.relations).map_err(|e| usage("--spec", e))?;
        let manifest = corpus.write(out).map_err(|e| usage("--out", e))?;
        let count = |s| corpus.videos.iter().filter(|v| v.record.split == s).count();
        writeln!(
            io.stderr,
            "wrote {} videos ({} train, {} val, {} test)",
            corpus.videos.len(),
            count(Split::Train),
            count(Split::Val),
            count(Split::Test)
        )?;
        writeln!(io.stdout, "{}", manifest.display())?;
        Ok(0)
    }

    fn validate(&self, manifest: &Path, io: &mut Io<'_>) -> Outcome {
        let corpus = load_corpus(manifest, &self.relations).map_err(|e| usage("--manifest", e))?;
        for v in &corpus.violations {
            writeln!(io.stdout, "{v}")?;
        }
        writeln!(
            io.stdout,
            "{} records: {} train, {} val, {} test, {} invalid",
            corpus.records,
            corpus.train.len(),
            corpus.val.len(),
            corpus.test.len(),
            corpus.violations.len()
        )?;
        Ok(if corpus.is_clean() { 0 } else { 1 })
    }

    fn train(
        &self,
        manifest: &Path,
        model: Option<&Path>,
        train: Option<&Path>,
        out: &Path,
        max_epochs: Option<usize>,
        io: &mut Io<'_>,
    ) -> Outcome {
        let (model, cfg) = self.configs(model, train, max_epochs)?;
        let corpus = self.load(manifest, io)?;
        let data = Dataset::from_corpus(&corpus, &self.relations, model.max_encoder_len);
        let stderr = &mut *io.stderr;
        let outcome = train_with(
            &data,
            &model,
            &cfg,
            &mut val_evaluator(&data, &self.relations),
            &mut |e| {
                let _ = writeln!(stderr, "{}", epoch_line(e));
            },
        )
        .map_err(invalid)?;
        fs::create_dir_all(out).map_err(|e| usage("--out", e))?;
        write_checkpoint(out.join(CHECKPOINT_FILE), &outcome.checkpoint).map_err(invalid)?;
        fs::write(out.join(TRAIN_LOG_FILE), outcome.log_jsonl())?;
        let best = outcome.best();
        if self.pretty {
            writeln!(io.stdout, "best epoch {}: {}", best.epoch, epoch_line(best))?;
        } else {
            writeln!(
                io.stdout,
                "{}",
                serde_json::to_string(best).map_err(invalid)?
            )?;
        }
        Ok(0)
    }

    fn eval(&self, manifest: &Path, checkpoint: &Path, split: Split, io: &mut Io<'_>) -> Outcome {
        let ckpt = read_checkpoint(checkpoint).map_err(|e| usage("--checkpoint", e))?;
        let corpus = self.load(manifest, io)?;
        let config = &ckpt.params.config;
        let data = Dataset::with_vocab(&corpus, ckpt.vocab.clone(), config.max_encoder_len);
        if data.feature_dim != config.feature_dim {
            return Err(invalid(format!(
                "corpus features have {} dimensions, the checkpoint expects {}",
                data.feature_dim, config.feature_dim
            )));
        }
        let examples = data.split(split);
        if examples.is_empty() {
            return Err(invalid(format!("{split} split is empty")));
        }
        let pairs =
            score_split(&ckpt.params, &ckpt.vocab, examples, &self.relations).map_err(invalid)?;
        let report = build_report(config, &pairs).map_err(invalid)?;
        self.print_table(&ReportTable::new(vec![report]), io)?;
        Ok(0)
    }

    fn print_table(&self, table: &ReportTable, io: &mut Io<'_>) -> io::Result<()> {
        write!(
            io.stdout,
            "{}",
            if self.pretty {
                table.to_pretty()
            } else {
                table.to_tsv()
            }
        )
    }

    fn model_inputs(
        &self,
        checkpoint: &Path,
        features: &Path,
        io: &mut Io<'_>,
    ) -> Result<(Checkpoint, FeatureSequence, Vec<Vec<f64>>), Failure> {
        let ckpt = read_checkpoint(checkpoint).map_err(|e| usage("--checkpoint", e))?;
        let seq = read_features(features).map_err(|e| usage("--features", e))?;
        let max = ckpt.params.config.max_encoder_len;
        if seq.len() > max {
            writeln!(
                io.stderr,
                "warning: truncating {} frames to {max}",
                seq.len()
            )?;
        }
        let frames = seq.to_f64_rows(max);
        Ok((ckpt, seq, frames))
    }

    fn predict(&self, checkpoint: &Path, features: &Path, io: &mut Io<'_>) -> Outcome {
        let (ckpt, _, frames) = self.model_inputs(checkpoint, features, io)?;
        let pred = predict(&ckpt.params, &ckpt.vocab, &frames).map_err(invalid)?;
        writeln!(io.stdout, "{}", pred.tokens)?;
        match parse(&pred.tokens, &self.relations) {
            Ok(_) => Ok(0),
            Err(e) => {
                writeln!(io.stderr, "error: malformed prediction: {e}")?;
                Ok(1)
            }
        }
    }

    fn align(
        &self,
        checkpoint: &Path,
        features: &Path,
        video_id: Option<String>,
        mass_threshold: Option<f64>,
        io: &mut Io<'_>,
    ) -> Outcome {
        if let Some(t) = mass_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(usage(
                    "--mass-threshold",
                    format!("must lie in (0, 1], got {t}"),
                ));
            }
        }
        let (ckpt, seq, frames) = self.model_inputs(checkpoint, features, io)?;
        let cfg = AlignConfig { mass_threshold };
        let alignment = align_frames(&ckpt.params, &ckpt.vocab, &frames, &self.relations, &cfg)
            .map_err(invalid)?;
        let id = video_id.unwrap_or_else(|| seq.video_id().to_string());
        if self.pretty {
            writeln!(
                io.stdout,
                "{}",
                render_discourse(&alignment.tree, &alignment.scenes)
            )?;
            writeln!(
                io.stdout,
                "{:<6}{:<8}{:<12}frames",
                "edu", "frame", "confidence"
            )?;
            for s in &alignment.scenes.scenes {
                let frames: Vec<String> = s.frames.iter().map(usize::to_string).collect();
                writeln!(
                    io.stdout,
                    "{:<6}{:<8}{:<12.4}{}",
                    s.edu_index,
                    s.frame_index,
                    s.confidence,
                    frames.join(",")
                )?;
            }
        } else {
            write!(io.stdout, "{}", alignment.scenes.to_jsonl(&id))?;
        }
        Ok(0)
    }

    #[allow(clippy::too_many_arguments)]
    fn sweep(
        &self,
        grid: &str,
        manifest: &Path,
        out: &Path,
        model: Option<&Path>,
        train: Option<&Path>,
        max_epochs: Option<usize>,
        io: &mut Io<'_>,
    ) -> Outcome {
        let grid = SweepGrid::resolve(grid).map_err(|e| usage("--grid", e))?;
        let (base, cfg) = self.configs(model, train, max_epochs)?;
        let corpus = self.load(manifest, io)?;
        let data = Dataset::from_corpus(&corpus, &self.relations, base.max_encoder_len);
        let stderr = &mut *io.stderr;
        let results = sweep(&grid, &data, &base, &cfg, &self.relations, &mut |i, r| {
            let status = match &r.report {
                Ok(rep) => format!("test relations+edges {:.3}", rep.relations_edges_acc),
                Err(e) => format!("failed: {e}"),
            };
            let _ = writeln!(stderr, "row {}/{}: {status}", i + 1, grid.rows.len());
        });

        #[derive(Serialize)]
        struct RowRecord<'a> {
            row: &'a crate::trainer::GridRow,
            #[serde(skip_serializing_if = "Option::is_none")]
            report: Option<&'a crate::metrics::EvalReport>,
            #[serde(skip_serializing_if = "Option::is_none")]
            error: Option<String>,
        }
        let records: String = results
            .iter()
            .map(|r| {
                let rec = RowRecord {
                    row: &r.row,
                    report: r.report.as_ref().ok(),
                    error: r.report.as_ref().err().map(|e| e.to_string()),
                };
                serde_json::to_string(&rec).expect("record serializes") + "\n"
            })
            .collect();
        let table = sweep_table(&grid, &results);
        fs::create_dir_all(out).map_err(|e| usage("--out", e))?;
        fs::write(out.join(SWEEP_TABLE_FILE), table.to_tsv())?;
        fs::write(out.join(SWEEP_REPORTS_FILE), records)?;
        self.print_table(&table, io)?;

        let failed = results.iter().filter(|r| r.report.is_err()).count();
        if failed > 0 {
            writeln!(
                io.stderr,
                "error: {failed} of {} rows failed",
                results.len()
            )?;
            return Ok(1);
        }
        Ok(0)
    }

    fn linearize(&self, io: &mut Io<'_>) -> Outcome {
        let mut text = String::new();
        io.stdin.read_to_string(&mut text)?;
        let mut code = 0;
        for (i, item) in serde_json::Deserializer::from_str(&text)
            .into_iter::<TreeJson>()
            .enumerate()
        {
            let tree = item
                .map_err(|e| format!("bad JSON: {e}"))
                .and_then(|t| t.to_tree(&self.relations));
            match tree {
                Ok(t) => writeln!(io.stdout, "{}", linearize(&t))?,
                Err(e) => {
                    writeln!(io.stderr, "error: tree {}: {e}", i + 1)?;
                    code = 1;
                    if e.starts_with("bad JSON") {
                        break;
                    }
                }
            }
        }
        Ok(code)
    }

    fn parse(&self, io: &mut Io<'_>) -> Outcome {
        let mut text = String::new();
        io.stdin.read_to_string(&mut text)?;
        let mut code = 0;
        for (n, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            match parse(&TokenSequence::from_line(line), &self.relations) {
                Ok(tree) if self.pretty => write!(io.stdout, "{}", pretty_tree(&tree))?,
                Ok(tree) => writeln!(
                    io.stdout,
                    "{}",
                    serde_json::to_string(&TreeJson::from_tree(&tree)).map_err(invalid)?
                )?,
                Err(e) => {
                    writeln!(io.stderr, "error: line {}: {e}", n + 1)?;
                    code = 1;
                }
            }
        }
        Ok(code)
    }
}

fn epoch_line(e: &EpochLog) -> String {
    format!(
        "epoch {:>3}  loss {:.4}  val relations {:.3}  edges {:.3}  relations+edges {:.3}  bleu4 {:.1}",
        e.epoch, e.train_loss, e.val_relations, e.val_edges, e.val_relations_edges, e.val_bleu4
    )
}

/// JSON form of a tree: relation nodes and `{"edu": "words"}` leaves.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TreeJson {
    Node {
        relation: String,
        nuclearity: Nuclearity,
        left: Box<TreeJson>,
        right: Box<TreeJson>,
    },
    Leaf {
        edu: String,
    },
}

impl TreeJson {
    fn from_tree(tree: &RstTree) -> Self {
        match tree {
            RstTree::Leaf(edu) => TreeJson::Leaf {
                edu: edu.words().join(" "),
            },
            RstTree::Node {
                label,
                nuclearity,
                left,
                right,
            } => TreeJson::Node {
                relation: label.to_string(),
                nuclearity: *nuclearity,
                left: Box::new(Self::from_tree(left)),
                right: Box::new(Self::from_tree(right)),
            },
        }
    }

    fn to_tree(&self, relations: &RelationVocab) -> Result<RstTree, String> {
        let tree = self.build(&mut 0)?;
        match validate(&tree, relations).first() {
            Some(v) => Err(v.to_string()),
            None => Ok(tree),
        }
    }

    fn build(&self, next: &mut usize) -> Result<RstTree, String> {
        match self {
            TreeJson::Leaf { edu } => {
                let e = Edu::from_text(*next, edu).map_err(|e| e.to_string())?;
                *next += 1;
                Ok(RstTree::leaf(e))
            }
            TreeJson::Node {
                relation,
                nuclearity,
                left,
                right,
            } => {
                let l = left.build(next)?;
                let r = right.build(next)?;
                Ok(RstTree::node(relation.as_str(), *nuclearity, l, r))
            }
        }
    }
}

fn pretty_tree(tree: &RstTree) -> String {
    fn walk(tree: &RstTree, prefix: &str, last: bool, root: bool, out: &mut String) {
        let (branch, extend) = match (root, last) {
            (true, _) => ("", ""),
            (false, true) => ("└── ", "    "),
            (false, false) => ("├── ", "│   "),
        };
        match tree {
            RstTree::Leaf(edu) => out.push_str(&format!(
                "{prefix}{branch}[{}] {}\n",
                edu.index(),
                edu.words().join(" ")
            )),
            RstTree::Node {
                label,
                nuclearity,
                left,
                right,
            } => {
                out.push_str(&format!("{prefix}{branch}{label} (nucleus {nuclearity})\n"));
                let child = format!("{prefix}{extend}");
                walk(left, &child, false, false, out);
                walk(right, &child, true, false, out);
            }
        }
    }
    let mut out = String::new();
    walk(tree, "", true, true, &mut out);
    out
}
