use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nade")).args(args).output().unwrap()
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_binary_dir(dir: &Path, d: usize) {
    let mut state = 12345u64;
    let mut bit = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 62) & 1
    };
    for (split, n) in [("train", 80), ("valid", 20), ("test", 20)] {
        let text: String = (0..n)
            .map(|_| {
                let a = bit();
                (0..d).map(|i| if i % 2 == 0 { a.to_string() } else { bit().to_string() }).collect::<Vec<_>>().join(" ") + "\n"
            })
            .collect();
        std::fs::write(dir.join(format!("{split}.txt")), text).unwrap();
    }
}

#[test]
fn golden_eval_output_is_stable() {
    let out = nade(&[
        "eval",
        "--model",
        s(&fixtures().join("golden_nade.model")),
        "--data",
        s(&fixtures().join("golden_data.txt")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let want = std::fs::read_to_string(fixtures().join("golden_eval.csv")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), want);
}

#[test]
fn zero_samples_write_an_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let out = nade(&["sample", "--model", s(&fixtures().join("golden_nade.model")), "--n", "0", "--out", s(&path)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&path).unwrap(), Vec::<u8>::new());
}

#[test]
fn samples_are_comma_separated_rows_of_the_model_width() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let out = nade(&["sample", "--model", s(&fixtures().join("golden_nade.model")), "--n", "5", "--seed", "3", "--out", s(&path)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().all(|l| l.split(',').count() == 10 && l.split(',').all(|v| v == "0" || v == "1")));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(nade(&["eval", "--bogus"]).status.code(), Some(1));
    assert_eq!(nade(&[]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    write_binary_dir(dir.path(), 6);
    let out = nade(&["train", "--model", "rbm", "--data", s(dir.path()), "--out", s(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(nade(&["--help"]).status.success());
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0 1 2\n").unwrap();
    let out = nade(&["train", "--model", "nade", "--data", s(&bad), "--out", s(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = nade(&["eval", "--model", s(&dir.path().join("missing.model")), "--data", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_then_evaluate_an_ensemble_of_sixteen() {
    let dir = tempfile::tempdir().unwrap();
    write_binary_dir(dir.path(), 6);
    let model = dir.path().join("deep.model");
    let hist = dir.path().join("hist.csv");
    let out = nade(&[
        "train", "--model", "deepnade", "--data", s(dir.path()), "--set", "hidden=8", "--set", "epochs=4",
        "--set", "batch_size=10", "--out", s(&model), "--history", s(&hist),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&hist).unwrap().lines().count(), 5);
    let single = nade(&["eval", "--model", s(&model), "--data", s(dir.path())]);
    let ens = nade(&["eval", "--model", s(&model), "--data", s(dir.path()), "--ensemble", "16"]);
    assert!(single.status.success() && ens.status.success());
    let mean = |o: &Output| -> f64 {
        let text = String::from_utf8_lossy(&o.stdout).to_string();
        let row = text.lines().nth(1).unwrap().to_string();
        row.split(',').next().unwrap().parse().unwrap()
    };
    assert!(mean(&single).is_finite() && mean(&ens).is_finite());
    let fixed = nade(&["eval", "--model", s(&fixtures().join("golden_nade.model")), "--data", s(&fixtures().join("golden_data.txt")), "--ensemble", "4"]);
    assert_eq!(fixed.status.code(), Some(1));
}

#[test]
fn impute_keeps_observed_entries() {
    let dir = tempfile::tempdir().unwrap();
    write_binary_dir(dir.path(), 6);
    let model = dir.path().join("deep.model");
    assert!(nade(&["train", "--model", "deepnade", "--data", s(dir.path()), "--set", "hidden=6", "--set", "epochs=2", "--out", s(&model)]).status.success());
    let data = dir.path().join("x.txt");
    let mask = dir.path().join("m.txt");
    std::fs::write(&data, "1 0 1 0 1 0\n").unwrap();
    std::fs::write(&mask, "1 1 0 1 0 1\n").unwrap();
    let out_path = dir.path().join("imp.csv");
    let out = nade(&["impute", "--model", s(&model), "--data", s(&data), "--mask", s(&mask), "--n", "7", "--out", s(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 7);
    for l in text.lines() {
        let v: Vec<&str> = l.split(',').collect();
        assert_eq!((v[0], v[1], v[3], v[5]), ("1", "0", "0", "0"));
    }
}

#[test]
fn bench_prints_a_results_table() {
    let dir = tempfile::tempdir().unwrap();
    write_binary_dir(dir.path(), 5);
    let recipe = dir.path().join("toy.recipe");
    std::fs::write(&recipe, format!("name=toy\ndata={}\n[cl]\nmodel=chowliu\n[fv]\nmodel=fvsbn\nepochs=3\nlr=0.05|0.005\n", dir.path().display())).unwrap();
    let out = nade(&["bench", "--recipe", s(&recipe)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "recipe,run,model,folds,valid_score,test_mean,test_se,ci95,n,selected");
    assert!(lines[1].starts_with("toy,cl,chowliu,1,"));
    assert!(lines[2].starts_with("toy,fv,fvsbn,1,"));
}
