use std::path::Path;
use std::process::Command;

const SMALL: &str = "area_km2 = 0.05\nrepetitions = 2\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmshare"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn same_seed_gives_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    for (name, threads) in [("a", "1"), ("b", "2")] {
        let st = bin()
            .args(["run", "--seed", "17", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(tmp.path().join(name))
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
    }
    let (a, b) = (csvs(&tmp.path().join("a")), csvs(&tmp.path().join("b")));
    assert_eq!(a.len(), 4);
    assert_eq!(a, b);
    assert!(tmp.path().join("a/manifest.json").exists());
}

#[test]
fn replay_reproduces_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let st = bin()
        .args(["run", "--scheme", "hybrid", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&a)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let b = tmp.path().join("b");
    let st = bin()
        .args(["replay", "--manifest"])
        .arg(a.join("manifest.json"))
        .arg("--out")
        .arg(&b)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    assert_eq!(csvs(&a), csvs(&b));
}

#[test]
fn sweep_writes_points_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "area_km2 = 0.05\nrepetitions = 1\n");
    let out = tmp.path().join("s");
    let st = bin()
        .args(["sweep", "--axis", "policy", "--values", "joint,carrier-only", "--scheme", "licensed", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let summary = std::fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    // header plus p5, p50, p95 and mean for each of two points
    assert_eq!(summary.lines().count(), 1 + 2 * 4);
    assert!(summary.lines().skip(1).all(|l| l.starts_with("policy,")));
    let points = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(points, 2);
}

#[test]
fn config_errors_exit_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = bin()
        .args(["run", "--config"])
        .arg(tmp.path().join("absent.toml"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(!missing.stderr.is_empty());

    let bad = write_config(tmp.path(), "operators = 0\n");
    let st = bin().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(st.status.code(), Some(1));

    let st = bin().args(["run", "--scheme", "open"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let st = bin().args(["sweep", "--axis", "height", "--values", "1"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let st = bin().args(["run", "--no-such-flag"]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let st = bin().arg("--help").output().unwrap();
    assert_eq!(st.status.code(), Some(0));
}

#[test]
fn strict_convergence_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    // a window as long as the budget and a near-zero tolerance cannot be met
    let cfg = write_config(
        tmp.path(),
        "area_km2 = 0.05\nrepetitions = 2\n[association]\ntolerance = 1e-12\nwindow = 40\nmax_iterations = 40\n",
    );
    let out = tmp.path().join("o");
    let st = bin()
        .args(["run", "--strict-convergence", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(3));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"nonconverged\""));
    // without the flag the same run succeeds
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("p"))
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
}
