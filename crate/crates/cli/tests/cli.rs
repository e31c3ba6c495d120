use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smbne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smbne")).args(args).output().unwrap()
}

fn data_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn write_config(dir: &Path, method_block: &str) -> PathBuf {
    let text = format!(
        "[experiment]\nname = \"t\"\ndataset = \"{}\"\nlabel = \"species\"\nmethod = \"{}\"\nreplications = 5\nseed = 3\n\n[cgp]\nnodes = 10\narity = 3\n\n{}",
        data_path("iris.csv").display(),
        method_block.split(']').next().unwrap().trim_start_matches('['),
        method_block
    );
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn run_writes_result_files_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[random]\nbudget = 20\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = smbne(&["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    }
    for file in ["results.csv", "summary.csv", "traces/rep_000.csv", "traces/rep_004.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert!(a.join("timing.csv").exists());
    let results = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 6);
}

#[test]
fn seed_and_reps_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[cgpann]\nbudget = 21\n");
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let res = smbne(&["run", config.to_str().unwrap(), "--seed", seed, "--reps", "2", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0);
        fs::read_to_string(out.join("results.csv")).unwrap()
    };
    let first = run("1", "s1");
    assert_eq!(first.lines().count(), 3);
    assert_ne!(first, run("2", "s2"));
}

#[test]
fn compare_prints_ranking_and_test() {
    let dir = tempfile::tempdir().unwrap();
    let random = write_config(dir.path(), "[random]\nbudget = 5\n");
    let out_a = dir.path().join("a");
    assert_eq!(code(&smbne(&["run", random.to_str().unwrap(), "--out", out_a.to_str().unwrap()])), 0);
    let es = write_config(dir.path(), "[cgpann]\nbudget = 101\n");
    let out_b = dir.path().join("b");
    assert_eq!(code(&smbne(&["run", es.to_str().unwrap(), "--out", out_b.to_str().unwrap()])), 0);
    let res = smbne(&[
        "compare",
        out_a.join("results.csv").to_str().unwrap(),
        out_b.join("results.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0);
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.starts_with("rank"));
    assert!(text.contains("Wilcoxon rank-sum"));
}

#[test]
fn compare_rejects_small_samples() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    fs::write(
        &csv,
        "replication,seed,best_fitness,true_evals,surrogate_evals,status\n0,1,0.5,10,0,ok\n",
    )
    .unwrap();
    let res = smbne(&["compare", csv.to_str().unwrap(), csv.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.toml");
    assert_eq!(code(&smbne(&["run", missing.to_str().unwrap()])), 2);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[experiment]\nname = \"x\"\nbogus = 1\n").unwrap();
    assert_eq!(code(&smbne(&["run", bad.to_str().unwrap()])), 2);

    let config = write_config(dir.path(), "[random]\nbudget = 5\n");
    let text = fs::read_to_string(&config).unwrap().replace("iris.csv", "absent.csv");
    fs::write(&config, text).unwrap();
    assert_eq!(code(&smbne(&["run", config.to_str().unwrap()])), 2);
}

#[test]
fn gen_design_writes_requested_points() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, size) in [("factorial", "15"), ("lhs", "20")] {
        let out = dir.path().join(format!("{kind}.csv"));
        let res = smbne(&["gen-design", "--type", kind, "--dims", "4", "--size", size, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0);
        let text = fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), size.parse::<usize>().unwrap());
        assert!(text.lines().all(|l| l.split(',').count() == 4));
    }
    let out = dir.path().join("x.csv");
    // 3^2 = 9 is the largest three-level design in two dimensions.
    let res = smbne(&["gen-design", "--type", "factorial", "--dims", "2", "--size", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
}
