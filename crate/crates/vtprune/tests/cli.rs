use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::{tempdir, TempDir};
use vtprune::cli;
use vtprune::io::{read_selection, write_npy};

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("vtprune").chain(args.iter().copied()), &mut out, &mut err);
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn write_random(path: &Path, shape: &[usize], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    write_npy(path, shape, &data).unwrap();
}

/// `frames x tokens x 16` features and a `3 x 16` prompt in a fresh directory.
fn fixture(frames: usize, tokens: usize) -> TempDir {
    let dir = tempdir().unwrap();
    write_random(&dir.path().join("feat.npy"), &[frames, tokens, 16], 7);
    write_random(&dir.path().join("query.npy"), &[3, 16], 8);
    dir
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn csv_rows(csv: &str) -> Vec<Vec<String>> {
    assert!(csv.ends_with("\r\n"));
    csv.split("\r\n").filter(|l| !l.is_empty()).skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn help_lists_defaults() {
    let o = run(&["prune", "--help"]);
    assert_eq!(o.code, 0);
    for needle in ["--tau", "[default: 0]", "--beta", "[default: 3]", "[default: 0.15]", "[default: exponential]"] {
        assert!(o.stdout.contains(needle), "missing {needle:?} in help:\n{}", o.stdout);
    }
    assert_eq!(run(&["flops", "--help"]).code, 0);
    assert_eq!(run(&["bench", "--help"]).code, 0);
}

#[test]
fn prune_budget_86_on_576_tokens() {
    let dir = fixture(2, 576);
    let o = run(&[
        "prune",
        "--features",
        &p(&dir, "feat.npy"),
        "--query-embeddings",
        &p(&dir, "query.npy"),
        "--out",
        &p(&dir, "sel.json"),
        "--no-timing",
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(o.stdout, "frame 0: kept 86/576 tokens\nframe 1: kept 86/576 tokens\n");
    let doc = read_selection(&dir.path().join("sel.json")).unwrap();
    assert!(doc.frames.iter().all(|f| f.budget == 86 && f.kept_indices.len() == 86));
    assert!(doc.timing_ms.is_none());
}

#[test]
fn prune_budget_206_on_2056_tokens() {
    let dir = fixture(1, 2056);
    let o = run(&[
        "prune",
        "--features",
        &p(&dir, "feat.npy"),
        "--no-text",
        "--ratio",
        "0.10",
        "--out",
        &p(&dir, "s.json"),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let doc = read_selection(&dir.path().join("s.json")).unwrap();
    assert_eq!(doc.frames[0].budget, 206);
    assert!(doc.timing_ms.is_some());
}

#[test]
fn prune_writes_features_and_flops() {
    let dir = fixture(2, 100);
    let o = run(&[
        "prune",
        "--features",
        &p(&dir, "feat.npy"),
        "--query-embeddings",
        &p(&dir, "query.npy"),
        "--weighting",
        "middle-peak",
        "--tau",
        "-1",
        "--beta",
        "none",
        "--cap-m",
        "50",
        "--out",
        &p(&dir, "s.json"),
        "--out-features",
        &p(&dir, "kept.npy"),
        "--flops-preset",
        "7b",
        "--text-tokens",
        "45",
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let doc = read_selection(&dir.path().join("s.json")).unwrap();
    let flops = doc.flops_report.unwrap();
    assert_eq!((flops.model.v_full, flops.model.v_pruned), (200, 30));
    assert!(flops.report.ratio > 0.0 && flops.report.ratio < 1.0);
    assert_eq!(doc.config.selection.beta, None);
    assert_eq!(doc.config.selection.cap_m, Some(50));
    let kept = vtprune::io::read_npy(&dir.path().join("kept.npy")).unwrap();
    assert_eq!(kept.shape, vec![2, 15, 16]);
}

#[test]
fn prune_accepts_directory_of_frames() {
    let dir = tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    write_random(&frames.join("b.npy"), &[20, 4], 1);
    write_random(&frames.join("a.npy"), &[40, 4], 2);
    let o = run(&["prune", "--features", frames.to_str().unwrap(), "--no-text", "--ratio", "0.5"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(o.stdout, "frame 0: kept 20/40 tokens\nframe 1: kept 10/20 tokens\n");
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = fixture(6, 300);
    let mut outputs = Vec::new();
    for workers in ["1", "2", "5", "0"] {
        let out = p(&dir, &format!("w{workers}.json"));
        let o = run(&[
            "prune",
            "--features",
            &p(&dir, "feat.npy"),
            "--query-embeddings",
            &p(&dir, "query.npy"),
            "--workers",
            workers,
            "--no-timing",
            "--out",
            &out,
        ]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        outputs.push(std::fs::read(out).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn usage_errors_exit_2_with_one_line() {
    let dir = fixture(1, 10);
    let feat = p(&dir, "feat.npy");
    for args in [
        vec!["prune", "--features", &feat, "--no-text", "--ratio", "0"],
        vec!["prune", "--features", &feat, "--no-text", "--ratio", "1.5"],
        vec!["prune", "--features", &feat],
        vec!["prune", "--features", &feat, "--no-text", "--bogus"],
        vec!["prune", "--features", &feat, "--no-text", "--alpha", "-1"],
        vec!["flops", "--text-tokens", "45", "--v-full", "576", "--v-pruned", "58"],
        vec!["flops", "--preset", "13b", "--text-tokens", "45", "--v-full", "576", "--v-pruned", "58"],
        vec!["flops", "--preset", "7b", "--text-tokens", "45", "--v-full", "576", "--v-pruned", "600"],
        vec!["bench", "--tokens", "0"],
        vec!["bench", "--redundancy", "1"],
        vec!["bench", "--strategies", "random"],
    ] {
        let o = run(&args);
        assert_eq!(o.code, 2, "{args:?}: {}", o.stderr);
        assert_eq!(o.stderr.lines().count(), 1, "{args:?}: {}", o.stderr);
    }
}

#[test]
fn bad_inputs_exit_codes() {
    let dir = fixture(1, 10);
    std::fs::write(dir.path().join("junk.npy"), b"not an array").unwrap();
    let missing = run(&["prune", "--features", &p(&dir, "missing.npy"), "--no-text"]);
    assert_eq!(missing.code, 1);
    let junk = run(&["prune", "--features", &p(&dir, "junk.npy"), "--no-text"]);
    assert_eq!(junk.code, 2);
    assert!(junk.stderr.contains("bad magic"), "{}", junk.stderr);
    write_random(&dir.path().join("q8.npy"), &[2, 8], 3);
    let mismatch = run(&["prune", "--features", &p(&dir, "feat.npy"), "--query-embeddings", &p(&dir, "q8.npy")]);
    assert_eq!(mismatch.code, 2);
    let unwritable =
        run(&["prune", "--features", &p(&dir, "feat.npy"), "--no-text", "--out", &p(&dir, "no/such/dir.json")]);
    assert_eq!(unwritable.code, 1);
}

#[test]
fn binary_exit_status() {
    let bin = env!("CARGO_BIN_EXE_vtprune");
    let ok = Command::new(bin)
        .args(["flops", "--preset", "7b", "--text-tokens", "45", "--v-full", "576", "--v-pruned", "58"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("r,v_pruned,flops_full,flops_pruned,ratio\r\n"));
    let io = Command::new(bin).args(["prune", "--features", "/nonexistent/x.npy", "--no-text"]).output().unwrap();
    assert_eq!(io.status.code(), Some(1));
    let usage = Command::new(bin).args(["prune"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn flops_image_ratio() {
    let o = run(&["flops", "--preset", "7b", "--text-tokens", "45", "--v-full", "576", "--v-pruned", "58"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rows = csv_rows(&o.stdout);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "");
    assert_eq!(rows[0][1], "58");
    let ratio: f64 = rows[0][4].parse().unwrap();
    assert!((ratio - 0.1613).abs() < 0.005, "{ratio}");
    assert!(o.stderr.contains("16.15%"), "{}", o.stderr);
}

#[test]
fn flops_baseline_cases() {
    for args in [
        vec!["flops", "--preset", "7b", "--text-tokens", "45", "--v-full", "576", "--v-pruned", "576"],
        vec![
            "flops",
            "--preset",
            "7b",
            "--text-tokens",
            "45",
            "--v-full",
            "576",
            "--v-pruned",
            "58",
            "--k-layer",
            "32",
        ],
        vec!["flops", "--d", "64", "--m", "128", "--T", "4", "--text-tokens", "3", "--v-full", "10", "--ratios", "1"],
    ] {
        let o = run(&args);
        assert_eq!(o.code, 0, "{args:?}: {}", o.stderr);
        assert_eq!(csv_rows(&o.stdout)[0][4], "1", "{args:?}");
    }
}

#[test]
fn flops_sweep_is_sorted_and_written() {
    let dir = tempdir().unwrap();
    let out = p(&dir, "sweep.csv");
    let o = run(&[
        "flops",
        "--preset",
        "7b",
        "--text-tokens",
        "25",
        "--v-full",
        "2056",
        "--ratios",
        "0.5,0.1,0.25",
        "--out",
        &out,
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.is_empty());
    let rows = csv_rows(&std::fs::read_to_string(out).unwrap());
    let rs: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(rs, ["0.1", "0.25", "0.5"]);
    assert_eq!(rows[0][1], "206");
}

#[test]
fn bench_is_deterministic() {
    let args = ["bench", "--seed", "3", "--frames", "2", "--tokens", "96", "--dims", "16", "--no-timing"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(
        a.stdout,
        run(&["bench", "--seed", "4", "--frames", "2", "--tokens", "96", "--dims", "16", "--no-timing"]).stdout
    );
    assert!(a.stdout.starts_with("strategy,r,recall,mean_pairwise_d\r\n"));
    let timed = run(&["bench", "--frames", "1", "--tokens", "32", "--ratios", "0.5"]);
    assert!(timed.stdout.starts_with("strategy,r,recall,mean_pairwise_d,micros\r\n"));
    assert_eq!(csv_rows(&timed.stdout).len(), 3);
}

#[test]
fn bench_full_ratio_recalls_everything() {
    let o = run(&["bench", "--ratios", "1", "--no-timing"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rows = csv_rows(&o.stdout);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[2] == "1.000000"), "{}", o.stdout);
}

#[test]
fn combined_recall_beats_diversity_only() {
    for seed in 0..10 {
        let o = run(&["bench", "--seed", &seed.to_string(), "--strategies", "diversity-only,combined", "--no-timing"]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        let rows = csv_rows(&o.stdout);
        let (div, comb) = rows.split_at(rows.len() / 2);
        for (d, c) in div.iter().zip(comb) {
            assert_eq!((d[0].as_str(), c[0].as_str()), ("diversity-only", "combined"));
            assert_eq!(d[1], c[1]);
            let (rd, rc): (f64, f64) = (d[2].parse().unwrap(), c[2].parse().unwrap());
            assert!(rc >= rd, "seed {seed} r {}: combined {rc} < diversity-only {rd}", c[1]);
        }
    }
}
