use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use multilstm::data::Dataset;
use multilstm::eval::write_predictions;
use multilstm::numeric::Matrix;

const SPEC: &str = r#"
feature_dim = 8
noise = 0.3
frames_per_video = 60
train_videos = 6
test_videos = 2

[[classes]]
name = "A"
spontaneous = { count = [2, 3], duration = [3, 6] }

[[classes]]
name = "B"
gain = 0.0

[[classes]]
name = "C"
spontaneous = { count = [1, 2], duration = [4, 8] }

[[rules]]
kind = "sequence"
trigger = "A"
consequence = "B"
lag = [3, 3]
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_multilstm"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) -> PathBuf {
    let spec = dir.join("spec.toml");
    fs::write(&spec, SPEC).unwrap();
    let out = dir.join("synth");
    let o = run(&["synth", "--spec", s(&spec), "--out", s(&out), "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gradcheck_passes_on_default_dims() {
    let o = run(&["gradcheck", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("PASS"), "{text}");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["stats", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["stats"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_data_exits_with_two_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["stats", "--data", "/nonexistent/dataset", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/dataset"));
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        fs::write(d.join("spec.toml"), SPEC).unwrap();
        let o = bin()
            .current_dir(d)
            .args(["synth", "--spec", "spec.toml", "--out", "synth", "--seed", "1"])
            .output()
            .unwrap();
        assert!(o.status.success());
    }
    let (ta, tb) = (tree(&a.path().join("synth")), tree(&b.path().join("synth")));
    assert!(ta.iter().any(|(p, _)| p == Path::new("resolved.conf")));
    assert_eq!(ta, tb);
}

#[test]
fn ground_truth_predictions_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let test = Dataset::load(&data.join("test")).unwrap();
    let preds = dir.path().join("gt");
    fs::create_dir_all(&preds).unwrap();
    for (v, z) in test.videos.iter().zip(test.labels().unwrap()) {
        let mut m = Matrix::zeros(z.frames(), z.classes());
        for t in 0..z.frames() {
            for c in 0..z.classes() {
                m.set(t, c, if z.get(t, c) { 1.0 } else { 0.0 });
            }
        }
        write_predictions(&preds.join(format!("{}.csv", v.id)), &test.classes, &m).unwrap();
    }
    let out = dir.path().join("eval");
    let o = run(&["eval", "--data", s(&data.join("test")), "--predictions", s(&preds), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("mAP 1.000000"));
    let table = fs::read_to_string(out.join("ap.csv")).unwrap();
    assert!(table.lines().last().unwrap().starts_with("mean,1.000000"));
}

#[test]
fn pipeline_from_training_to_retrieval() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let (train, test) = (data.join("train"), data.join("test"));

    let stats = dir.path().join("stats");
    assert!(run(&["stats", "--data", s(&train), "--out", s(&stats)]).status.success());
    assert!(stats.join("per_class.csv").exists());

    let model_args = [
        "--hidden", "6", "--attention-units", "4", "--input-window", "3", "--output-window", "2", "--epochs", "2",
    ];
    let t1 = dir.path().join("train1");
    let mut args = vec!["train", "--data", s(&train), "--out", s(&t1), "--seed", "4"];
    args.extend(model_args);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = t1.join("model.ckpt");
    assert_eq!(fs::read_to_string(t1.join("loss.csv")).unwrap().lines().count(), 4);

    // rerunning from the resolved config reproduces the checkpoint
    let t2 = dir.path().join("train2");
    let conf = t1.join("resolved.conf");
    assert!(run(&["train", "--config", s(&conf), "--out", s(&t2)]).status.success());
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(t2.join("model.ckpt")).unwrap());

    let ev = dir.path().join("eval");
    let o = run(&["eval", "--data", s(&test), "--checkpoint", s(&ckpt), "--out", s(&ev), "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(ev.join("predictions").read_dir().unwrap().count() == 2);

    let det = dir.path().join("detect");
    let o = run(&[
        "detect", "--data", s(&test), "--train-data", s(&train), "--checkpoint", s(&ckpt), "--out", s(&det),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = fs::read_to_string(det.join("detections.csv")).unwrap();
    assert!(header.starts_with("video,class,start,end,score"));

    let ret = dir.path().join("retrieve");
    let o = run(&[
        "retrieve", "--data", s(&test), "--checkpoint", s(&ckpt), "--first", "A", "--second", "B", "--max-gap", "5",
        "--out", s(&ret),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(ret.join("cooccurrence.csv").exists());
    let o = run(&[
        "retrieve", "--data", s(&test), "--checkpoint", s(&ckpt), "--first", "A", "--second", "Z", "--out", s(&ret),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let ckdir = dir.path().join("ckpts");
    fs::create_dir_all(&ckdir).unwrap();
    for off in ["-3", "0", "3"] {
        let out = dir.path().join(format!("off{off}"));
        let mut args = vec!["train", "--data", s(&train), "--out", s(&out), "--offset", off];
        args.extend(model_args);
        assert!(run(&args).status.success());
        fs::copy(out.join("model.ckpt"), ckdir.join(format!("offset_{off}.ckpt"))).unwrap();
    }
    let sw = dir.path().join("sweep");
    let base = ["sweep-offsets", "--data", s(&test), "--train-data", s(&train), "--checkpoints", s(&ckdir), "--out", s(&sw)];
    let mut args = base.to_vec();
    args.extend(["--offsets", "-3,0,3"]);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(sw.join("offset_curve.csv")).unwrap().lines().count(), 4);

    let mut args = base.to_vec();
    args.extend(["--offsets", "0,6"]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("offset 6"));
}
