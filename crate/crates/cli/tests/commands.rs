use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sentgraph::fixtures::nested_targets;
use sentgraph::synth::{random_corpus, template_corpus};
use sentgraph::{parse_dataset, serialize_dataset, SentimentGraph};
use tempfile::TempDir;

fn sentgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sentgraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, graphs: &[SentimentGraph]) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, serialize_dataset(graphs)).unwrap();
    path
}

fn read(path: &Path) -> Vec<SentimentGraph> {
    parse_dataset(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus() -> Vec<SentimentGraph> {
    let mut data = random_corpus(&mut ChaCha8Rng::seed_from_u64(3), 30);
    data.push(nested_targets());
    data
}

#[test]
fn graph_encodings_convert_and_decode_back() {
    let dir = TempDir::new().unwrap();
    let data = corpus();
    let input = write(&dir, "in.json", &data);
    let before = std::fs::read(&input).unwrap();
    for enc in ["node-centric", "labeled-edge", "opinion-tuple"] {
        let graphs = dir.path().join(format!("{enc}.json"));
        let back = dir.path().join(format!("{enc}.back.json"));
        let o = sentgraph(&["convert", s(&input), "--encoding", enc, "-o", s(&graphs)]);
        assert!(o.status.success(), "{o:?}");
        let o = sentgraph(&[
            "convert",
            s(&graphs),
            "--encoding",
            enc,
            "--direction",
            "decode",
            "-o",
            s(&back),
        ]);
        assert!(o.status.success(), "{o:?}");
        let decoded = read(&back);
        assert_eq!(decoded.len(), data.len());
        for (a, b) in data.iter().zip(&decoded) {
            assert!(a.same_opinions(b), "{enc} changed {}", a.sentence.sent_id);
        }
    }
    assert_eq!(std::fs::read(&input).unwrap(), before, "input untouched");
}

#[test]
fn dependency_conversion_reports_lost_arcs() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.json", &[nested_targets()]);
    let conll = dir.path().join("out.conll");
    let o = sentgraph(&[
        "convert",
        s(&input),
        "--encoding",
        "dep-head-final",
        "-o",
        s(&conll),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("lost: "), "{}", stdout(&o));
    let back = dir.path().join("back.json");
    let o = sentgraph(&[
        "convert",
        s(&conll),
        "--encoding",
        "dep-head-final",
        "--direction",
        "decode",
        "-o",
        s(&back),
    ]);
    assert!(o.status.success(), "{o:?}");
    // both nested targets collapse into the widest one
    let decoded = read(&back);
    assert_eq!(decoded[0].opinions.len(), 2);
    assert!(!decoded[0].same_opinions(&nested_targets()));
}

#[test]
fn missing_or_malformed_input_exits_with_1_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out.json");
    let missing = dir.path().join("nope.json");
    let o = sentgraph(&[
        "convert",
        s(&missing),
        "--encoding",
        "opinion-tuple",
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    assert!(!o.stderr.is_empty());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "[{\"sent_id\": 1").unwrap();
    assert_eq!(sentgraph(&["stats", s(&bad)]).status.code(), Some(1));
    assert_eq!(
        sentgraph(&["eval", s(&bad), s(&bad)]).status.code(),
        Some(1)
    );
}

#[test]
fn decoding_with_the_wrong_encoding_exits_with_2() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.json", &corpus());
    let graphs = dir.path().join("g.json");
    assert!(sentgraph(&[
        "convert",
        s(&input),
        "--encoding",
        "node-centric",
        "-o",
        s(&graphs)
    ])
    .status
    .success());
    let out = dir.path().join("out.json");
    let o = sentgraph(&[
        "convert",
        s(&graphs),
        "--encoding",
        "labeled-edge",
        "--direction",
        "decode",
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn stats_of_the_nested_fixture() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.json", &[nested_targets()]);
    let text = stdout(&sentgraph(&["stats", s(&input)]));
    for line in [
        "sentences 1",
        "holders 1",
        "targets 2",
        "expressions 2",
        "positive 1",
        "neutral 0",
        "negative 1",
    ] {
        assert!(
            text.lines().any(|l| l == line),
            "missing {line:?} in\n{text}"
        );
    }
    let json: serde_json::Value =
        serde_json::from_slice(&sentgraph(&["stats", s(&input), "--json"]).stdout).unwrap();
    assert_eq!(json["targets"], 2);
    assert_eq!(json["nested"]["target"]["nested"], 1);
}

#[test]
fn roundtrip_reports_lossless_graph_encodings() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.json", &corpus());
    let o = sentgraph(&["roundtrip", s(&input), "--encoding", "labeled-edge"]);
    assert!(stdout(&o).contains("SF1 100.00"), "{}", stdout(&o));
    let decoded = dir.path().join("dep.json");
    let o = sentgraph(&[
        "roundtrip",
        s(&input),
        "--encoding",
        "dep-head-final",
        "--json",
        "-o",
        s(&decoded),
    ]);
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(json["sf1"].as_f64().unwrap() < 1.0);
    assert_eq!(read(&decoded).len(), corpus().len());
}

#[test]
fn eval_flags() {
    let dir = TempDir::new().unwrap();
    let gold = corpus();
    let g = write(&dir, "gold.json", &gold);
    assert!(stdout(&sentgraph(&["eval", s(&g), s(&g)])).starts_with("SF1 100.00\n"));

    let mut flipped = gold.clone();
    for op in flipped.iter_mut().flat_map(|x| x.opinions.iter_mut()) {
        op.polarity = match op.polarity {
            sentgraph::Polarity::Positive => sentgraph::Polarity::Negative,
            _ => sentgraph::Polarity::Positive,
        };
    }
    let p = write(&dir, "pred.json", &flipped);
    let text = stdout(&sentgraph(&["eval", s(&g), s(&p), "--no-polarity"]));
    assert!(text.starts_with("NSF1 100.00\n"), "{text}");
    let json: serde_json::Value =
        serde_json::from_slice(&sentgraph(&["eval", s(&g), s(&p), "--json"]).stdout).unwrap();
    assert_eq!(json["main"], "sf1");
    assert_eq!(json["nsf1"]["f1"], 1.0);
    assert!(json["sf1"]["f1"].as_f64().unwrap() < 1.0);

    let short = write(&dir, "short.json", &gold[..3]);
    assert_eq!(
        sentgraph(&["eval", s(&g), s(&short)]).status.code(),
        Some(2)
    );
}

#[test]
fn identical_systems_are_not_significant() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "gold.json", &corpus());
    let run = s(&g).to_string();
    let o = sentgraph(&[
        "significance",
        &run,
        "--a",
        &run,
        &run,
        "--b",
        &run,
        &run,
        "--b-joint",
        "500",
        "--b-pair",
        "200",
        "--seed",
        "4",
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("decision NotSignificant"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("pair ")).count(), 4);
}

#[test]
fn train_then_predict_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = template_corpus(&mut ChaCha8Rng::seed_from_u64(1), 6);
    let train = write(&dir, "train.json", &data);
    let config = dir.path().join("model.cfg");
    std::fs::write(
        &config,
        "graph_mode = opinion-tuple\nhidden_size = 16\nn_attention_heads = 2\nn_layers = 1\nepochs = 3\nbatch_size = 2\n",
    )
    .unwrap();
    let mut checkpoints = Vec::new();
    for k in 0..2 {
        let ckpt = dir.path().join(format!("m{k}.ckpt"));
        let log = dir.path().join(format!("log{k}.jsonl"));
        let o = sentgraph(&[
            "--threads",
            "1",
            "train",
            s(&train),
            "--config",
            s(&config),
            "--checkpoint",
            s(&ckpt),
            "--dev",
            s(&train),
            "--log",
            s(&log),
            "--seed",
            "11",
        ]);
        assert!(o.status.success(), "{o:?}");
        let lines: Vec<serde_json::Value> = std::fs::read_to_string(&log)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 3);
        assert!(lines
            .iter()
            .all(|l| l["dev_sf1"].is_number() && l["train_loss"].is_number()));
        checkpoints.push(std::fs::read(&ckpt).unwrap());
    }
    assert_eq!(checkpoints[0], checkpoints[1]);

    let out = dir.path().join("pred.json");
    let ckpt = dir.path().join("m0.ckpt");
    let o = sentgraph(&[
        "predict",
        s(&train),
        "--checkpoint",
        s(&ckpt),
        "-o",
        s(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let pred = read(&out);
    assert_eq!(pred.len(), data.len());
    assert!(sentgraph(&["eval", s(&train), s(&out)]).status.success());

    let broken = dir.path().join("broken.ckpt");
    std::fs::write(&broken, b"SENTGRPH").unwrap();
    assert_eq!(
        sentgraph(&[
            "predict",
            s(&train),
            "--checkpoint",
            s(&broken),
            "-o",
            s(&out)
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn bad_configuration_exits_with_1() {
    let dir = TempDir::new().unwrap();
    let train = write(&dir, "train.json", &corpus());
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "no_such_key = 3\n").unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let o = sentgraph(&[
        "train",
        s(&train),
        "--config",
        s(&config),
        "--checkpoint",
        s(&ckpt),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!ckpt.exists());
}
