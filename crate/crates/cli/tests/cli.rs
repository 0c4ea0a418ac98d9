use std::path::Path;
use std::process::{Command, Output};

fn zimcal(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zimcal")).args(args).arg("--out-dir").arg(out).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Short chains so the smoke runs take seconds.
const QUICK: [&str; 12] = [
    "--set",
    "cv.stored=300",
    "--set",
    "cv.burn_in=200",
    "--set",
    "cv.k1=20",
    "--set",
    "cv.k2=10",
    "--set",
    "tune.rounds=3",
    "--set",
    "tune.sweeps=50",
];

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = zimcal(&["synth", "--preset", "synthetic-10", "--seed", "1", "--bogus"], dir.path());
    assert_eq!(unknown.status.code(), Some(2), "{}", stderr(&unknown));
    assert!(stderr(&unknown).contains("--bogus"));

    let no_config = zimcal(&["synth", "--seed", "1"], dir.path());
    assert_eq!(no_config.status.code(), Some(2));
    assert!(stderr(&no_config).contains("--config"));
    assert!(!dir.path().join("counts.csv").exists());

    let no_command = zimcal(&[], dir.path());
    assert_eq!(no_command.status.code(), Some(2));
}

#[test]
fn runtime_errors_are_one_machine_readable_line() {
    let dir = tempfile::tempdir().unwrap();
    let no_seed = zimcal(&["synth", "--preset", "synthetic-10"], dir.path());
    assert_eq!(no_seed.status.code(), Some(1));
    let msg = stderr(&no_seed);
    assert!(msg.starts_with("error[config]: "), "{msg}");
    assert_eq!(msg.trim_end().lines().count(), 1);

    let missing = zimcal(&["fit", "--config", "does-not-exist.cfg", "--seed", "1"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("does-not-exist.cfg"));
}

#[test]
fn adequacy_before_crossval_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let synth = zimcal(&["synth", "--preset", "synthetic-10", "--seed", "3"], dir.path());
    assert!(synth.status.success(), "{}", stderr(&synth));
    let adequacy = zimcal(&["adequacy", "--preset", "synthetic-10", "--seed", "3"], dir.path());
    assert_eq!(adequacy.status.code(), Some(1));
    let msg = stderr(&adequacy);
    assert!(msg.starts_with("error[missing-artifact]"), "{msg}");
    assert!(msg.contains("site_000.csv"), "{msg}");

    let predict = zimcal(&["predict", "--preset", "synthetic-10", "--seed", "3"], dir.path());
    assert_eq!(predict.status.code(), Some(1));
    assert!(stderr(&predict).contains("chain.bin"));
}

#[test]
fn crossval_on_the_ten_site_preset_writes_every_fold() {
    let dir = tempfile::tempdir().unwrap();
    let synth = zimcal(&["synth", "--preset", "synthetic-10", "--seed", "7"], dir.path());
    assert!(synth.status.success(), "{}", stderr(&synth));

    let mut args = vec!["crossval", "--preset", "synthetic-10", "--seed", "7", "--jobs", "2"];
    args.extend(QUICK);
    let cv = zimcal(&args, dir.path());
    assert!(cv.status.success(), "{}", stderr(&cv));
    for i in 0..10 {
        assert!(dir.path().join(format!("cv/site_{i:03}.csv")).exists(), "fold {i}");
    }
    let summary = std::fs::read_to_string(dir.path().join("cv_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 11);
    assert!(dir.path().join("coverage.csv").exists());

    let mut args = vec!["adequacy", "--preset", "synthetic-10", "--seed", "7", "--measure", "t1,t2"];
    args.extend(QUICK);
    let adequacy = zimcal(&args, dir.path());
    assert!(adequacy.status.success(), "{}", stderr(&adequacy));
    let table = std::fs::read_to_string(dir.path().join("adequacy.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().nth(1).unwrap().starts_with("t1,"));

    let bad = zimcal(&["crossval", "--preset", "synthetic-10", "--seed", "7", "--site", "10"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}
