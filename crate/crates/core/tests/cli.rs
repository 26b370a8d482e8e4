use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use levy_fk::pide::read_slab_bin;
use levy_fk::run::{read_record, FK_HEADER};

fn lfk(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lfk"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("LFK_THREADS", t);
    }
    cmd.output().unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_FK: &str = r#"
seed = 5
[model]
jumps = { kind = "two_point", alpha = 1.0, mass = 1.0 }
[problem]
rate = { family = "quadratic", c = 0.5 }
data = { family = "one" }
[method]
kind = "fk"
[numerics]
n_paths = 2000
points = [0.0, 0.5]
"#;

#[test]
fn fk_csv_is_reproducible_across_threads() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "fk.toml", SMALL_FK);
    let a = d.path().join("a.csv");
    let b = d.path().join("b.csv");
    assert!(lfk(&["fk", "--config", &cfg, "--out", a.to_str().unwrap()], Some("1")).status.success());
    assert!(lfk(&["fk", "--config", &cfg, "--out", b.to_str().unwrap()], Some("3")).status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next(), Some(FK_HEADER));
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let rec = read_record(&a).unwrap();
    assert!(rec.hash_matches());

    let c = d.path().join("c.csv");
    assert!(lfk(&["fk", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "6"], None).status.success());
    assert_ne!(text, std::fs::read_to_string(&c).unwrap());
    assert_eq!(read_record(&c).unwrap().config["seed"], 6);
}

#[test]
fn stdout_when_no_path() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "fk.toml", SMALL_FK);
    let out = lfk(&["run", "--config", &cfg, "--format", "json"], None);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let neg = write_config(d.path(), "neg.toml", &SMALL_FK.replace("[model]", "[model]\nsigma2 = -1.0"));
    let out = lfk(&["fk", "--config", &neg], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.sigma2"));

    let unknown = write_config(d.path(), "unknown.toml", &SMALL_FK.replace("[model]", "[model]\nsigma = 1.0"));
    assert_eq!(lfk(&["fk", "--config", &unknown], None).status.code(), Some(2));

    let wrong = write_config(d.path(), "wrong.toml", SMALL_FK);
    assert_eq!(lfk(&["pide", "--config", &wrong], None).status.code(), Some(2));

    let coarse = write_config(
        d.path(),
        "coarse.toml",
        r#"
[model]
sigma2 = 1.0
hbar = 0.01
[problem]
rate = { family = "quadratic", c = 0.5 }
data = { family = "scaled_gaussian", c = 0.5, normalized = false }
[method]
kind = "pide"
[numerics]
grid = { half_width = 4.0, n = 81, dt = 0.01 }
"#,
    );
    assert_eq!(lfk(&["pide", "--config", &coarse], None).status.code(), Some(4));

    assert_eq!(lfk(&["verify", "nightly"], None).status.code(), Some(2));
    assert_eq!(lfk(&["report"], None).status.code(), Some(2));
    let missing = d.path().join("missing.toml");
    assert_eq!(lfk(&["fk", "--config", missing.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn pide_binary_slab() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("slab.bin");
    let cfg = configs().join("pide.toml");
    let status = lfk(&["pide", "--config", cfg.to_str().unwrap(), "--format", "bin", "--out", out.to_str().unwrap()], None);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let slab = read_slab_bin(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!((slab.rows, slab.cols), (11, 2001));
    assert!(read_record(&out).unwrap().hash_matches());
}

#[test]
fn report_merges_sections() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "fk.toml", SMALL_FK);
    let a = d.path().join("a.csv");
    let b = d.path().join("b.csv");
    let s = d.path().join("sweep.csv");
    lfk(&["fk", "--config", &cfg, "--out", a.to_str().unwrap()], None);
    lfk(&["fk", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "9"], None);
    let sweep = configs().join("harmonic.toml");
    assert!(lfk(&["asymptotics", "--config", sweep.to_str().unwrap(), "--out", s.to_str().unwrap()], None).status.success());

    let merged = d.path().join("report.csv");
    let args = [a.to_str().unwrap(), b.to_str().unwrap(), s.to_str().unwrap()];
    let out = lfk(&["report", args[0], args[1], args[2], "--out", merged.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&merged).unwrap();
    let fk: Vec<&str> = text.split("\n\n").next().unwrap().lines().collect();
    assert_eq!(fk[0], "# fk");
    assert_eq!(fk.len(), 2 + 4);
    assert!(text.contains("# asymptotics.sweep\n"));

    // an fk record with a foreign header is a schema clash
    std::fs::write(&b, "t,p,u\n0,0,1\n").unwrap();
    assert_eq!(lfk(&["report", args[0], args[1]], None).status.code(), Some(2));
}

#[test]
fn verify_fast_passes() {
    let out = lfk(&["verify", "fast"], None);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{table}");
    assert!(table.contains("legendre closed form") && table.contains("5/5 criteria passed"));
}
