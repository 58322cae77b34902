//! `sentgraph`: conversion, statistics, evaluation, training, prediction and
//! significance testing for structured sentiment graphs.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser as ClapParser, Subcommand, ValueEnum};
use sentgraph::bootstrap::{bootstrap_pairwise_decision, BootstrapConfig};
use sentgraph::dependency::{
    dataset_stats, decode_dep, encode_dep, nesting_stats, read_conll, roundtrip_sf1, write_conll,
    ArcLossStats, HeadRule,
};
use sentgraph::encodings::{parse_graphs, roundtrip_check, serialize_graphs};
use sentgraph::{
    evaluate, parse_dataset, sent_graph_f1, serialize_dataset, Encoding, Role, SentimentGraph,
};
use sentgraph_parser::{checkpoint, Config, Parser, TrainOptions};
use serde_json::json;

/// Failure of a subcommand. Unreadable or malformed input exits with 1,
/// everything that goes wrong after the inputs are accepted exits with 2.
enum Failure {
    Input(String),
    Operation(String),
}

impl Failure {
    fn input(e: impl Display) -> Failure {
        Failure::Input(e.to_string())
    }

    fn operation(e: impl Display) -> Failure {
        Failure::Operation(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

#[derive(ClapParser)]
#[command(
    name = "sentgraph",
    version,
    about = "Structured sentiment analysis as graph parsing"
)]
struct Cli {
    /// Worker threads for parallel work (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EncodingArg {
    NodeCentric,
    LabeledEdge,
    OpinionTuple,
    DepHeadFinal,
}

impl EncodingArg {
    fn graph(self) -> Option<Encoding> {
        match self {
            EncodingArg::NodeCentric => Some(Encoding::NodeCentric),
            EncodingArg::LabeledEdge => Some(Encoding::LabeledEdge),
            EncodingArg::OpinionTuple => Some(Encoding::OpinionTuple),
            EncodingArg::DepHeadFinal => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Direction {
    Encode,
    Decode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum HeadRuleArg {
    First,
    Last,
}

impl From<HeadRuleArg> for HeadRule {
    fn from(h: HeadRuleArg) -> HeadRule {
        match h {
            HeadRuleArg::First => HeadRule::First,
            HeadRuleArg::Last => HeadRule::Last,
        }
    }
}

#[derive(Args)]
struct JsonFlag {
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a dataset to a graph or dependency encoding, or back.
    Convert {
        input: PathBuf,
        #[arg(long)]
        encoding: EncodingArg,
        #[arg(long, value_enum, default_value = "encode")]
        direction: Direction,
        /// Span head for the dependency encoding.
        #[arg(long, value_enum, default_value = "last")]
        head_rule: HeadRuleArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Sentence, span, polarity and nesting counts of a dataset.
    Stats {
        input: PathBuf,
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Encode and decode a dataset and score the result against itself.
    Roundtrip {
        input: PathBuf,
        #[arg(long)]
        encoding: EncodingArg,
        #[arg(long, value_enum, default_value = "last")]
        head_rule: HeadRuleArg,
        /// Also write the decoded dataset here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Score predictions against gold annotations.
    Eval {
        gold: PathBuf,
        pred: PathBuf,
        /// Report the polarity-agnostic score as the main metric.
        #[arg(long)]
        no_polarity: bool,
        #[command(flatten)]
        json: JsonFlag,
    },
    /// Train a parser and write a checkpoint.
    Train {
        train: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Scored after every epoch; the best epoch is kept.
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Stop once the dev SF1 reaches this value (0 to 1).
        #[arg(long, requires = "dev")]
        stop_at_sf1: Option<f64>,
        /// Epoch log, one JSON object per line (default: standard output).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Overrides the configuration seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse the sentences of a dataset with a trained checkpoint.
    Predict {
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Bootstrap test of whether system A beats system B over several runs each.
    Significance {
        gold: PathBuf,
        #[arg(long = "a", num_args = 1.., required = true)]
        runs_a: Vec<PathBuf>,
        #[arg(long = "b", num_args = 1.., required = true)]
        runs_b: Vec<PathBuf>,
        #[arg(long, default_value_t = BootstrapConfig::default().b_joint)]
        b_joint: usize,
        #[arg(long, default_value_t = BootstrapConfig::default().b_pair)]
        b_pair: usize,
        #[arg(long, default_value_t = BootstrapConfig::default().alpha)]
        alpha: f64,
        #[arg(long, default_value_t = BootstrapConfig::default().pair_wins_required)]
        pair_wins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_polarity: bool,
        #[command(flatten)]
        json: JsonFlag,
    },
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_dataset(path: &Path) -> Result<Vec<SentimentGraph>, Failure> {
    parse_dataset(&read_text(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Operation(format!("{}: {e}", path.display())))
}

fn print_json(v: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("JSON value serializes")
    );
}

fn lost_line(stats: &ArcLossStats) -> String {
    format!(
        "lost: {:.1}% ({} of {} arcs)",
        stats.percent_lost(),
        stats.arcs_lost,
        stats.arcs_total
    )
}

fn convert(
    input: &Path,
    encoding: EncodingArg,
    direction: Direction,
    rule: HeadRule,
    output: &Path,
) -> Outcome {
    let text = read_text(input)?;
    let at = |e: &dyn Display| format!("{}: {e}", input.display());
    let out = match (encoding.graph(), direction) {
        (Some(enc), Direction::Encode) => {
            let data = parse_dataset(&text).map_err(|e| Failure::Input(at(&e)))?;
            serialize_graphs(&data.iter().map(|g| enc.encode(g)).collect::<Vec<_>>())
        }
        (Some(enc), Direction::Decode) => {
            let graphs = parse_graphs(&text).map_err(|e| Failure::Input(at(&e)))?;
            let mut decoded = Vec::with_capacity(graphs.len());
            let mut dropped = 0;
            for g in &graphs {
                let d = enc.decode(g).map_err(|e| {
                    Failure::Operation(format!("sentence {}: {e}", g.sentence.sent_id))
                })?;
                dropped += d.dropped;
                decoded.push(d.graph);
            }
            if dropped > 0 {
                eprintln!("dropped {dropped} nodes that form no opinion");
            }
            serialize_dataset(&decoded)
        }
        (None, Direction::Encode) => {
            let data = parse_dataset(&text).map_err(|e| Failure::Input(at(&e)))?;
            let mut total = ArcLossStats::default();
            let deps: Vec<_> = data
                .iter()
                .map(|g| {
                    let (d, stats) = encode_dep(g, rule);
                    total += stats;
                    d
                })
                .collect();
            println!("{}", lost_line(&total));
            write_conll(&deps)
        }
        (None, Direction::Decode) => {
            let deps = read_conll(&text).map_err(|e| Failure::Input(at(&e)))?;
            let decoded: Vec<_> = deps.iter().map(decode_dep).collect();
            let dangling: usize = decoded.iter().map(|d| d.dangling).sum();
            if dangling > 0 {
                eprintln!("ignored {dangling} span-internal arcs without a role head");
            }
            serialize_dataset(&decoded.into_iter().map(|d| d.graph).collect::<Vec<_>>())
        }
    };
    write_text(output, &out)
}

fn stats(input: &Path, json: bool) -> Outcome {
    let data = read_dataset(input)?;
    let s = dataset_stats(&data);
    let n = nesting_stats(&data);
    if json {
        let nest = |r: Role| json!({"nested": n.role(r).nested, "total": n.role(r).total, "percent": n.role(r).percent()});
        print_json(&json!({
            "sentences": s.sentences,
            "holders": s.holders,
            "targets": s.targets,
            "expressions": s.expressions,
            "polarity": {"positive": s.positive, "neutral": s.neutral, "negative": s.negative},
            "nested": {"holder": nest(Role::Holder), "target": nest(Role::Target), "expression": nest(Role::Expression)},
        }));
    } else {
        println!("sentences {}", s.sentences);
        println!("holders {}", s.holders);
        println!("targets {}", s.targets);
        println!("expressions {}", s.expressions);
        println!("positive {}", s.positive);
        println!("neutral {}", s.neutral);
        println!("negative {}", s.negative);
        for role in Role::ALL {
            let c = n.role(role);
            println!("nested.{role} {} ({:.1}%)", c.nested, c.percent());
        }
    }
    Ok(())
}

fn roundtrip(
    input: &Path,
    encoding: EncodingArg,
    rule: HeadRule,
    output: Option<&Path>,
    json: bool,
) -> Outcome {
    let data = read_dataset(input)?;
    let (decoded, sf1, lost) = match encoding.graph() {
        Some(enc) => {
            let mut decoded = Vec::with_capacity(data.len());
            for g in &data {
                let d = enc.decode(&enc.encode(g)).map_err(|e| {
                    Failure::Operation(format!("sentence {}: {e}", g.sentence.sent_id))
                })?;
                decoded.push(d.graph);
            }
            let lossy = data
                .iter()
                .filter(|g| !roundtrip_check(g, enc).is_lossless())
                .count();
            let sf1 = sent_graph_f1(&data, &decoded, true).map_err(Failure::operation)?;
            (decoded, sf1, Err(lossy))
        }
        None => {
            let rt = roundtrip_sf1(&data, rule);
            (rt.decoded, rt.sf1, Ok(rt.arc_loss))
        }
    };
    if json {
        let mut v = json!({"sf1": sf1.f1, "precision": sf1.precision, "recall": sf1.recall});
        match &lost {
            Ok(arcs) => {
                v["arcs"] = json!({"lost": arcs.arcs_lost, "total": arcs.arcs_total, "percent": arcs.percent_lost()})
            }
            Err(n) => v["changed_sentences"] = json!(n),
        }
        print_json(&v);
    } else {
        match &lost {
            Ok(arcs) => println!("{}", lost_line(arcs)),
            Err(n) => println!("changed sentences: {n}"),
        }
        println!("SF1 {:.2}", 100.0 * sf1.f1);
    }
    match output {
        Some(path) => write_text(path, &serialize_dataset(&decoded)),
        None => Ok(()),
    }
}

fn eval(gold: &Path, pred: &Path, no_polarity: bool, json: bool) -> Outcome {
    let g = read_dataset(gold)?;
    let p = read_dataset(pred)?;
    let report = evaluate(&g, &p).map_err(Failure::operation)?;
    let (main, score) = if no_polarity {
        ("nsf1", report.nsf1.f1)
    } else {
        ("sf1", report.sf1.f1)
    };
    if json {
        let mut v = report.to_json();
        v["main"] = json!(main);
        print_json(&v);
    } else {
        println!("{} {:.2}", main.to_uppercase(), 100.0 * score);
        print!("{}", report.to_text());
    }
    Ok(())
}

struct TrainArgs<'a> {
    train: &'a Path,
    config: Option<&'a Path>,
    checkpoint: &'a Path,
    dev: Option<&'a Path>,
    stop_at_sf1: Option<f64>,
    log: Option<&'a Path>,
    seed: Option<u64>,
}

fn train(a: TrainArgs) -> Outcome {
    let data = read_dataset(a.train)?;
    let dev = a.dev.map(read_dataset).transpose()?;
    let mut config = match a.config {
        Some(path) => Config::load(path).map_err(Failure::input)?,
        None => Config::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate().map_err(Failure::input)?;
    let mut log: Box<dyn Write> = match a.log {
        Some(path) => Box::new(
            std::fs::File::create(path)
                .map_err(|e| Failure::Operation(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(std::io::stdout()),
    };
    let mut parser = Parser::new(config, &data).map_err(Failure::operation)?;
    let options = TrainOptions {
        dev: dev.as_deref(),
        stop_at_dev_sf1: a.stop_at_sf1,
    };
    let mut write_error = None;
    let report = parser
        .train(&data, &options, |m| {
            if let Err(e) = writeln!(log, "{}", m.to_json_line()).and_then(|_| log.flush()) {
                write_error.get_or_insert(e);
            }
        })
        .map_err(Failure::operation)?;
    if let Some(e) = write_error {
        return Err(Failure::Operation(format!("epoch log: {e}")));
    }
    checkpoint::save(&parser, a.checkpoint).map_err(Failure::operation)?;
    if let Some((epoch, sf1)) = report.best {
        eprintln!("kept epoch {epoch} with dev SF1 {:.2}", 100.0 * sf1);
    }
    Ok(())
}

fn predict(input: &Path, ckpt: &Path, output: &Path) -> Outcome {
    let data = read_dataset(input)?;
    let parser = checkpoint::load(ckpt).map_err(Failure::input)?;
    let sentences: Vec<_> = data.iter().map(|g| g.sentence.clone()).collect();
    let predictions = parser.predict_all(&sentences);
    let dropped: usize = predictions.iter().map(|p| p.dropped).sum();
    if dropped > 0 {
        eprintln!("repaired {dropped} inconsistent nodes or edges");
    }
    let graphs: Vec<_> = predictions.into_iter().map(|p| p.graph).collect();
    write_text(output, &serialize_dataset(&graphs))
}

fn significance(
    gold: &Path,
    runs_a: &[PathBuf],
    runs_b: &[PathBuf],
    cfg: &BootstrapConfig,
    json: bool,
) -> Outcome {
    let g = read_dataset(gold)?;
    let a = runs_a
        .iter()
        .map(|p| read_dataset(p))
        .collect::<Result<Vec<_>, _>>()?;
    let b = runs_b
        .iter()
        .map(|p| read_dataset(p))
        .collect::<Result<Vec<_>, _>>()?;
    let report = bootstrap_pairwise_decision(&g, &a, &b, cfg).map_err(Failure::operation)?;
    if json {
        print_json(&report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::input)?;
    }
    match cli.command {
        Command::Convert {
            input,
            encoding,
            direction,
            head_rule,
            output,
        } => convert(&input, encoding, direction, head_rule.into(), &output),
        Command::Stats { input, json } => stats(&input, json.json),
        Command::Roundtrip {
            input,
            encoding,
            head_rule,
            output,
            json,
        } => roundtrip(
            &input,
            encoding,
            head_rule.into(),
            output.as_deref(),
            json.json,
        ),
        Command::Eval {
            gold,
            pred,
            no_polarity,
            json,
        } => eval(&gold, &pred, no_polarity, json.json),
        Command::Train {
            train: path,
            config,
            checkpoint,
            dev,
            stop_at_sf1,
            log,
            seed,
        } => train(TrainArgs {
            train: &path,
            config: config.as_deref(),
            checkpoint: &checkpoint,
            dev: dev.as_deref(),
            stop_at_sf1,
            log: log.as_deref(),
            seed,
        }),
        Command::Predict {
            input,
            checkpoint,
            output,
        } => predict(&input, &checkpoint, &output),
        Command::Significance {
            gold,
            runs_a,
            runs_b,
            b_joint,
            b_pair,
            alpha,
            pair_wins,
            seed,
            no_polarity,
            json,
        } => {
            let cfg = BootstrapConfig {
                b_joint,
                b_pair,
                alpha,
                pair_wins_required: pair_wins,
                seed,
                require_polarity: !no_polarity,
            };
            significance(&gold, &runs_a, &runs_b, &cfg, json.json)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Operation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
