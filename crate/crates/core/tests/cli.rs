use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tracesvm::prelude::*;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracesvm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn corpus(root: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let dir = root.join(name);
    ok(&["gen-corpus", "--n-traces", &n.to_string(), "--seed", &seed.to_string(), "--output", &s(&dir)]);
    dir.join("manifest.csv")
}

#[test]
fn preprocess_raw_and_mixed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("raw");
    fs::create_dir(&input).unwrap();
    fs::write(
        input.join("a.log"),
        "Unload of DLL at 04ED0000\nUnload of DLL at 04FC0000\n\
         NtQueryPerformanceCounter( Counter=0x4e9f9c8 [3.01683e+009], Freq=null ) => 0 \n\
         NtProtectVirtualMemory( ProcessHandle=-1, BaseAddress=0x4e9f9f4 [0x77eae000], Size=0x4e9f9f8\n",
    )
    .unwrap();
    fs::write(input.join("b.log"), "Unload of DLL at 04ED0000\n").unwrap();
    let out = tmp.path().join("out");
    let stdout = ok(&["preprocess", &s(&input), "--output", &s(&out)]);
    assert_eq!(
        fs::read_to_string(out.join("a.log")).unwrap(),
        "ntqueryperformancecounter\nntprotectvirtualmemory\n"
    );
    assert!(!out.join("b.log").exists());
    assert!(stdout.contains("processed 1 of 2"));
    assert!(stdout.contains("failed:") && stdout.contains("b.log"));

    // every input failing is an error
    let only_bad = tmp.path().join("bad");
    fs::create_dir(&only_bad).unwrap();
    fs::write(only_bad.join("x.log"), "nothing here\n").unwrap();
    assert!(!bin(&["preprocess", &s(&only_bad), "--output", &s(&out)]).status.success());
}

#[test]
fn preprocess_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = bin(&["preprocess", &s(&empty), "--output", &s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no inputs"));
}

#[test]
fn gen_corpus_counts_and_bad_fraction() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), "c", 100, 42);
    let m = CorpusManifest::read(&manifest).unwrap();
    assert_eq!(m.count(Label::Malicious), 64);
    assert_eq!(m.count(Label::Benign), 36);
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.starts_with("path,label\n") && !text.contains('\r'));

    let out = bin(&["gen-corpus", "--malicious-fraction", "1.5", "--output", &s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_then_evaluate_matches_in_process() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), "train", 150, 1);
    let model = tmp.path().join("m.json");
    let stdout = ok(&["train", "--manifest", &s(&manifest), "--trainer", "dual-cd", "--c", "10", "--output", &s(&model)]);
    assert!(stdout.contains("training time"));

    let ev = tmp.path().join("ev");
    ok(&["evaluate", "--model", &s(&model), "--manifest", &s(&manifest), "--output", &s(&ev)]);
    let csv = fs::read_to_string(ev.join("report.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains(",1,1,1,")), "{csv}");
    let table = fs::read_to_string(ev.join("report.txt")).unwrap();
    assert!(!table.contains("time"));
    let roc = fs::read_to_string(ev.join("roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,fpr,tpr\ninf,0,0\n"));
    assert!(roc.trim_end().lines().last().unwrap().starts_with("auc,"));

    // same numbers in process
    let m = CorpusManifest::read(&manifest).unwrap();
    let traces = load_corpus(&m, Exec::default()).unwrap();
    let y: Vec<Label> = traces.iter().map(|t| t.label.unwrap()).collect();
    let (v, x) = Vectorizer::fit(&traces, NgramRange::default(), IdfOptions::default(), Exec::default()).unwrap();
    let cfg = DualConfig { c: 10.0, ..DualConfig::default() };
    let w = train_dual_cd(&x, &y, &cfg).unwrap();
    let report = classification_report(&w.predict_matrix(&x).unwrap(), &y).unwrap();
    assert_eq!(report.to_csv(), csv);
    let art = ModelArtifact::load(&model).unwrap();
    assert_eq!(art.model(), w);
    assert_eq!(art.vectorizer().unwrap(), v);
}

#[test]
fn held_out_evaluation_has_auc_footer() {
    let tmp = tempfile::tempdir().unwrap();
    let train = corpus(tmp.path(), "train", 120, 5);
    let test = corpus(tmp.path(), "test", 40, 6);
    let model = tmp.path().join("m.json");
    ok(&["train", "--manifest", &s(&train), "--output", &s(&model)]);
    let ev = tmp.path().join("ev");
    let stdout = ok(&["evaluate", "--model", &s(&model), "--manifest", &s(&test), "--output", &s(&ev)]);
    assert!(stdout.contains("testing time"));
    let roc = fs::read_to_string(ev.join("roc.csv")).unwrap();
    assert!(roc.lines().any(|l| l.starts_with("auc,")));
}

#[test]
fn corrupt_model_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), "c", 20, 2);
    let model = tmp.path().join("m.json");
    ok(&["train", "--manifest", &s(&manifest), "--output", &s(&model)]);

    let bumped = fs::read_to_string(&model).unwrap().replace("\"format_version\": 1", "\"format_version\": 9");
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, bumped).unwrap();
    let ev = tmp.path().join("ev");
    let out = bin(&["evaluate", "--model", &s(&bad), "--manifest", &s(&manifest), "--output", &s(&ev)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
    assert!(!ev.exists());

    fs::write(&bad, "{\"format_version\": 1, \"vocab").unwrap();
    let out = bin(&["top-features", "--model", &s(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse"));
}

#[test]
fn single_class_manifest_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), "c", 20, 3);
    let text = fs::read_to_string(&manifest).unwrap().replace(",benign", ",malicious");
    fs::write(&manifest, text).unwrap();
    let out = bin(&["train", "--manifest", &s(&manifest), "--output", &s(&tmp.path().join("m.json"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("single class"));
}

#[test]
fn top_features_listing() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), "c", 60, 4);
    let model = tmp.path().join("m.json");
    ok(&["train", "--manifest", &s(&manifest), "--penalty", "l1", "--output", &s(&model)]);
    assert_eq!(ok(&["top-features", "--model", &s(&model), "-k", "0"]), "");
    let five = ok(&["top-features", "--model", &s(&model), "-k", "5"]);
    let coefs: Vec<f64> = five
        .lines()
        .map(|l| {
            let (c, g) = l.split_once('\t').unwrap();
            assert!(g.split(' ').count() >= 8);
            c.parse().unwrap()
        })
        .collect();
    assert_eq!(coefs.len(), 5);
    assert!(coefs.windows(2).all(|w| w[0] >= w[1]));
    assert!(five.contains("ntdelayexecution") || five.contains("ntqueryinformationthread")
        || five.contains("ntalpcsendwaitreceiveport") || five.contains("ntdeviceiocontrolfile"));

    let vocab = ModelArtifact::load(&model).unwrap().vocabulary.len();
    let all = ok(&["top-features", "--model", &s(&model), "-k", &(vocab + 10).to_string()]);
    assert_eq!(all.lines().count(), vocab);
}

#[test]
fn grid_search_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), "c", 60, 8);
    let one = tmp.path().join("one.csv");
    ok(&["grid-search", "--manifest", &s(&manifest), "--alphas", "0.001", "--tols", "0.01", "--output", &s(&one)]);
    assert_eq!(fs::read_to_string(&one).unwrap().lines().count(), 2);

    let full = tmp.path().join("full.csv");
    let stdout = ok(&["grid-search", "--manifest", &s(&manifest), "--trainer", "dual-cd", "--output", &s(&full)]);
    let text = fs::read_to_string(&full).unwrap();
    assert_eq!(text.lines().count(), 81);
    assert!(text.starts_with("alpha,tol,f1\n"));
    assert!(stdout.contains("best alpha"));
    let again = tmp.path().join("again.csv");
    ok(&["grid-search", "--manifest", &s(&manifest), "--trainer", "dual-cd", "--output", &s(&again)]);
    assert_eq!(fs::read(&full).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn sequential_flag_gives_same_model() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = corpus(tmp.path(), "c", 40, 12);
    let (a, b) = (tmp.path().join("a.json"), tmp.path().join("b.json"));
    ok(&["train", "--manifest", &s(&manifest), "--output", &s(&a)]);
    ok(&["--sequential", "train", "--manifest", &s(&manifest), "--output", &s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
