use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use ymblow_cli::table::{self, Table};

fn ymblow(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ymblow"));
    cmd.args(args).env_remove(ymblow_cli::OUTPUT_DIR_ENV);
    if let Some(d) = env_dir {
        cmd.env(ymblow_cli::OUTPUT_DIR_ENV, d);
    }
    cmd.output().expect("spawn ymblow")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn resolved(args: &[&str]) -> Vec<(String, String)> {
    let mut all = args.to_vec();
    all.push("--print-manifest");
    let o = ymblow(&all, None);
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o)
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(" = ").unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn value<'a>(m: &'a [(String, String)], key: &str) -> &'a str {
    &m.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no {key}")).1
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn empty_manifest_uses_documented_defaults() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "empty.txt", "");
    let m = resolved(&["evolve", "-c", &cfg]);
    assert_eq!(value(&m, "d"), "5");
    assert_eq!(value(&m, "sigma"), "10.0");
    assert_eq!(value(&m, "center"), "2.0");
    assert_eq!(value(&m, "r_max"), "8.0");
    assert_eq!(value(&m, "cfl"), "0.4");
    assert_eq!(value(&m, "amplitude"), "0.2");
    assert_eq!(value(&resolved(&["evolve", "-s", "d=4"]), "amplitude"), "0.5");
}

#[test]
fn flags_override_the_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "m.txt", "# comment\nd = 5\nA = 0.2\n");
    assert_eq!(value(&resolved(&["evolve", "-c", &cfg]), "amplitude"), "0.2");
    assert_eq!(value(&resolved(&["evolve", "-c", &cfg, "--set", "A=0.3"]), "amplitude"), "0.3");
}

#[test]
fn bad_manifests_report_the_line() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("cfl.txt", "d = 5\ncfl = 1.5\n", "line 2"),
        ("unknown.txt", "amplitude = 0.1\nspeed = 3\n", "line 2: unknown key `speed`"),
        ("type.txt", "sigma = wide\n", "line 1: `sigma` expects"),
        ("dup.txt", "A = 0.1\namplitude = 0.2\n", "line 2"),
        ("syntax.txt", "d 5\n", "line 1"),
    ];
    for (name, text, needle) in cases {
        let cfg = write(tmp.path(), name, text);
        let out = tmp.path().join(format!("{name}.out"));
        let o = ymblow(&["evolve", "-c", &cfg, "-o", out.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(stderr(&o).contains(needle), "{name}: {}", stderr(&o));
        assert!(!out.exists(), "{name} wrote output");
    }
    let o = ymblow(&["evolve", "-s", "cfl=1.5", "--print-manifest"], None);
    assert!(stderr(&o).contains("cfl") && stderr(&o).contains("0 < cfl < 1"), "{}", stderr(&o));
}

#[test]
fn unknown_command_is_rejected() {
    let o = ymblow(&["collapse"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_directory_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("from-env");
    let o = ymblow(&["evolve", "-s", "d=5", "-s", "A=0", "-s", "max_time=0.5"], Some(&dir));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.join("summary.json").exists());
    // the flag wins over the environment
    let flagged = tmp.path().join("from-flag");
    let o = ymblow(&["evolve", "-s", "d=5", "-s", "A=0", "-s", "max_time=0.5", "-o", flagged.to_str().unwrap()], Some(&dir));
    assert!(o.status.success());
    assert!(flagged.join("summary.json").exists());
}

#[test]
fn vacuum_run_writes_no_rescaled_profiles() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("vac");
    let o = ymblow(&["evolve", "-s", "d=5", "-s", "A=0", "-s", "max_time=1", "-o", dir.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let names: Vec<String> = contents(&dir).into_iter().map(|f| f.0).collect();
    assert!(names.iter().all(|n| !n.starts_with("rescaled_")), "{names:?}");
    let s = summary(&dir);
    assert_eq!(s["status"], "ok");
    assert_eq!(s["results"]["rescaled_snapshots"], 0);
    let series = Table::parse_as(&fs::read_to_string(dir.join("series.csv")).unwrap(), &table::SERIES).unwrap();
    assert!(series.floats("w_rr0").unwrap().iter().all(|w| *w == Some(0.0)));
}

#[test]
fn dispersing_run_exits_cleanly() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("disp");
    let o = ymblow(&["evolve", "-s", "d=5", "-s", "A=0.01", "-o", dir.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&dir);
    assert_eq!(s["schema"], "ymblow-summary v1");
    assert_eq!(s["results"]["outcome"]["kind"], "Dispersion");
    assert!(s["error"].is_null());
    let files: Vec<&str> = s["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert_eq!(files.first(), Some(&"manifest.txt"));
    assert_eq!(files.last(), Some(&"summary.json"));
    for f in &files {
        assert!(dir.join(f).exists(), "{f}");
    }
    Table::parse_as(&fs::read_to_string(dir.join("levels.csv")).unwrap(), &table::LEVELS).unwrap();
}

#[test]
fn failed_runs_still_write_a_summary() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("bad-bracket");
    // both ends disperse, so there is nothing to bisect
    let o = ymblow(&["bisect", "-s", "d=5", "-s", "a_lo=0.01", "-s", "a_hi=0.02", "-o", dir.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let s = summary(&dir);
    assert_eq!(s["status"], "error");
    assert!(s["error"]["kind"].as_str().unwrap().len() > 0);
    assert!(dir.join("manifest.txt").exists());
}

#[test]
fn shoot_exports_both_profiles() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("shoot");
    let o = ymblow(&["shoot", "-s", "d=5", "-o", dir.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let expected = [("W0", -1.6), ("W1", -72.392015913)];
    for (name, b) in expected {
        let t = Table::parse_as(&fs::read_to_string(dir.join(format!("profile_{name}.csv"))).unwrap(), &table::PROFILE).unwrap();
        assert_eq!(t.meta_value("name"), Some(name));
        let got: f64 = t.meta_value("b").unwrap().parse().unwrap();
        assert!((got - b).abs() < 1e-6 * b.abs(), "{name}: {got}");
        let w = t.floats("w").unwrap();
        assert_eq!(w[0], Some(1.0));
        assert!(w.len() > 100);
    }
}

#[test]
fn reruns_are_byte_identical_and_reproducible_from_the_manifest_copy() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = ["evolve", "-s", "d=5", "-s", "A=0.2", "-s", "max_time=0.9"];
    for dir in [&a, &b] {
        let mut all = args.to_vec();
        all.extend(["-o", dir.to_str().unwrap()]);
        let o = ymblow(&all, None);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(contents(&a), contents(&b));

    let c = tmp.path().join("c");
    let copy = a.join("manifest.txt");
    let o = ymblow(&["evolve", "-c", copy.to_str().unwrap(), "-o", c.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(contents(&a), contents(&c));
}

#[test]
fn written_tables_reject_schema_drift() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("drift");
    let o = ymblow(&["evolve", "-s", "d=5", "-s", "A=0.01", "-s", "max_time=1", "-o", dir.to_str().unwrap()], None);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.join("series.csv")).unwrap();
    let t = Table::parse_as(&text, &table::SERIES).unwrap();
    assert!(t.column("distance_W0").is_some());
    assert!(Table::parse_as(&text, &table::LEVELS).is_err());
    assert!(Table::parse_as(&text.replacen("series v1", "series v9", 1), &table::SERIES).is_err());
    assert!(Table::parse_as(&text.replacen("t,tau,", "time,tau,", 1), &table::SERIES).is_err());
}
