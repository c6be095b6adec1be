//! End-to-end acceptance checks. Runs as a plain binary so that the
//! verdict lines are printed even when everything passes.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use serde_json::Value;
use tempfile::TempDir;
use ymblow_cli::table::{self, Table};
use ymblow_core::evolve::{Evolution, EvolutionConfig, RunRecord};
use ymblow_core::model::{Dimension, FieldState};
use ymblow_core::selfsimilar::{find_profiles, SearchSettings, SimilarityOde};

const D5: Dimension = Dimension::SUPERCRITICAL;
const REFERENCE_A_STAR: f64 = 0.144296087005405;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

struct Runs {
    root: TempDir,
    /// Output directories in the order they were produced.
    dirs: Vec<(String, PathBuf)>,
}

impl Runs {
    fn ymblow(&mut self, name: &str, args: &[&str]) -> Value {
        let dir = self.root.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_ymblow"))
            .args(args)
            .arg("-o")
            .arg(&dir)
            .env_remove(ymblow_cli::OUTPUT_DIR_ENV)
            .output()
            .expect("spawn ymblow");
        if !out.status.success() {
            eprintln!("{name}: {}", String::from_utf8_lossy(&out.stderr));
        }
        self.dirs.push((name.to_string(), dir.clone()));
        summary(&dir)
    }
}

fn summary(dir: &Path) -> Value {
    let text = fs::read_to_string(dir.join("summary.json")).unwrap_or_else(|_| "null".into());
    serde_json::from_str(&text).unwrap_or(Value::Null)
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn distance<'a>(run: &'a Value, profile: &str) -> &'a Value {
    run["distances"]
        .as_array()
        .and_then(|ds| ds.iter().find(|d| d["profile"] == profile))
        .unwrap_or(&Value::Null)
}

fn unigrid(dr0: f64) -> RunRecord {
    let mut c = EvolutionConfig::new(D5, 0.05);
    c.dr0 = dr0;
    c.mesh.max_depth = 0;
    // the coarsest grid would otherwise report the smooth pulse as under-resolved
    c.mesh.points_per_scale = 8.0;
    c.stop.max_time = 4.0;
    c.stop.dispersion_window = 1e9;
    Evolution::new(c).unwrap().run().unwrap()
}

fn sup_diff(a: &FieldState, b: &FieldState, h: f64, r_max: f64) -> f64 {
    let n = (r_max / h).round() as usize;
    (0..=n).map(|k| k as f64 * h).map(|r| (a.w_at(r).unwrap() - b.w_at(r).unwrap()).abs()).fold(0.0, f64::max)
}

fn convergence(records: &[RunRecord]) -> Verdict {
    let final_time: Vec<f64> = records.iter().map(|r| r.outcome.final_time).collect();
    let h = 0.01;
    let e12 = sup_diff(&records[0].final_state, &records[1].final_state, h, 8.0);
    let e24 = sup_diff(&records[1].final_state, &records[2].final_state, h, 8.0);
    let order = (e12 / e24).log2();
    let same_time = final_time.iter().all(|t| (t - 4.0).abs() < 1e-9);
    verdict(same_time && order >= 1.9, format!("order {order:.3} (differences {e12:.3e}, {e24:.3e}) at t = {:?}", final_time))
}

fn conservation(records: &[RunRecord]) -> Verdict {
    let worst = records
        .iter()
        .flat_map(|rec| rec.series.rows.iter().map(move |r| ((r.e_total + r.flux_out - rec.initial_energy) / rec.initial_energy).abs()))
        .fold(0.0, f64::max);
    verdict(worst < 1e-3, format!("max relative drift {worst:.3e}"))
}

fn supercritical_blowup(evolve: &Value) -> Verdict {
    let r = &evolve["results"];
    let kind = r["outcome"]["kind"].as_str().unwrap_or("");
    let late = num(&distance(r, "W0")["late_max"]);
    let p = num(&r["outcome"]["rate_exponent"]);
    let pass = kind == "Blowup" && late < 0.02 && (0.95..=1.05).contains(&p);
    verdict(pass, format!("{kind}, distance to W0 after 1e8 growth <= {late:.4}, p = {p:.4}"))
}

fn critical_blowup(fit: &Value) -> Verdict {
    let r = &fit["results"];
    let kind = r["run"]["outcome"]["kind"].as_str().unwrap_or("");
    let growth = num(&r["run"]["curvature_growth"]);
    let dist = num(&distance(&r["run"], "WS")["final"]);
    let monotone = r["trend"]["monotone_decreasing"].as_bool().unwrap_or(false);
    let decades = num(&r["trend"]["decades"]);
    let alpha = num(&r["fit"]["alpha"]);
    let pass = kind == "Blowup" && dist < 0.03 && monotone && decades >= 2.0 && (0.03..=0.25).contains(&alpha);
    verdict(
        pass,
        format!("{kind}, distance to WS {dist:.4} at growth {growth:.2e}, ratio decreasing over {decades} decades: {monotone}, alpha = {alpha:.4}"),
    )
}

fn cone_limits(d4: &Value, d5: &Value) -> Verdict {
    let c4 = &d4["results"]["cone"];
    let c5 = &d5["results"]["cone"];
    let bubble = 16.0 * PI * PI;
    let limit = num(&c4["limit"]);
    let kinetic = num(&c4["kinetic_fraction"]);
    let decreasing = c5["decreasing"].as_bool().unwrap_or(false);
    let ratio = num(&c5["decade_ratio"]);
    let pass = ((limit - bubble) / bubble).abs() < 0.1 && kinetic < 0.1 && decreasing && ratio < 0.1;
    verdict(
        pass,
        format!("d=4 limit {limit:.3} (16 pi^2 = {bubble:.3}), kinetic fraction {kinetic:.4}; d=5 decreasing {decreasing}, decade ratio {ratio:.5}"),
    )
}

/// Closed-form stable profile in five dimensions.
fn w0(eta: f64) -> f64 {
    (1.0 - eta * eta) / (1.0 + 0.6 * eta * eta)
}

fn shooting() -> Verdict {
    let found = match find_profiles(&SimilarityOde::new(D5), &SearchSettings::default()) {
        Ok(f) => f,
        Err(e) => return verdict(false, format!("search failed: {e}")),
    };
    if found.len() < 2 {
        return verdict(false, format!("{} profiles found", found.len()));
    }
    let (g, x) = (&found[0], &found[1]);
    let pointwise = g.samples.eta.iter().zip(&g.samples.w).map(|(&e, &w)| (w - w0(e)).abs()).fold(0.0, f64::max);
    let pass = (g.b + 1.6).abs() < 1e-8 && pointwise < 1e-8 && x.residual < 1e-9;
    verdict(
        pass,
        format!("b0 = {:.12}, max |W - W0| = {pointwise:.2e}; W1 b = {:.9}, residual {:.2e}", g.b, x.b, x.residual),
    )
}

fn brackets_nest(dir: &Path) -> bool {
    let Ok(text) = fs::read_to_string(dir.join("bracket.csv")) else { return false };
    let Ok(t) = Table::parse_as(&text, &table::BRACKET) else { return false };
    let (Ok(lo), Ok(hi)) = (t.floats("a_lo"), t.floats("a_hi")) else { return false };
    let mut prev: Option<(f64, f64)> = None;
    for (l, h) in lo.iter().zip(&hi) {
        let (Some(l), Some(h)) = (l, h) else { continue };
        if l >= h || prev.is_some_and(|(pl, ph)| *l < pl || *h > ph) {
            return false;
        }
        prev = Some((*l, *h));
    }
    prev.is_some()
}

fn critical_amplitude(bisect: &Value, dir: &Path, departure: &Value) -> Verdict {
    let r = &bisect["results"];
    let a = num(&r["a_star"]);
    let width = num(&r["relative_width"]);
    let invariant = r["invariant_holds"].as_bool().unwrap_or(false) && brackets_nest(dir);
    let sig3 = |x: f64| format!("{:.2e}", x);
    let agrees = sig3(a) == sig3(REFERENCE_A_STAR);
    let w1 = num(&departure["results"]["critical_run"]["min_distance"]);
    let pass = agrees && width <= 1e-6 && invariant && w1 < 0.05;
    verdict(
        pass,
        format!("A* = {a:.10} (reference {REFERENCE_A_STAR}), relative width {width:.2e}, invariant {invariant}; min distance to W1 {w1:.4}"),
    )
}

fn scaling_laws(sweep: &Value, departure: &Value) -> Verdict {
    let k = num(&sweep["results"]["fit"]["exponent"]);
    let sides: Vec<f64> = departure["results"]["sides"]
        .as_array()
        .map(|s| s.iter().map(|side| num(&side["fit"]["exponent"])).collect())
        .unwrap_or_default();
    let pass = (k + 0.8).abs() <= 0.08 && sides.len() == 2 && sides.iter().all(|g| (g - 0.2).abs() <= 0.04);
    verdict(pass, format!("sweep exponent {k:.4}; departure exponents {sides:.4?}"))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(Result::ok)
                .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

fn determinism(runs: &Runs) -> Verdict {
    let mut differing = Vec::new();
    for (name, dir) in &runs.dirs {
        let manifest = dir.join("manifest.txt");
        let command = fs::read_to_string(&manifest)
            .ok()
            .and_then(|t| t.lines().find_map(|l| l.strip_prefix("command = ").map(str::to_string)))
            .unwrap_or_default();
        let again = runs.root.path().join(format!("{name}-again"));
        let ok = Command::new(env!("CARGO_BIN_EXE_ymblow"))
            .arg(&command)
            .arg("-c")
            .arg(&manifest)
            .arg("-o")
            .arg(&again)
            .env_remove(ymblow_cli::OUTPUT_DIR_ENV)
            .output()
            .is_ok_and(|o| o.status.success());
        if !ok || files(dir) != files(&again) {
            differing.push(name.clone());
        }
    }
    let detail = if differing.is_empty() {
        format!("{} manifests rerun byte-identically", runs.dirs.len())
    } else {
        format!("outputs differ for {differing:?}")
    };
    verdict(differing.is_empty(), detail)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    let report = |n: usize, title: &'static str, v: Verdict, results: &mut Vec<(usize, &str, Verdict)>| {
        println!("criterion {n} ({title}): {} | {} [{:.0} s]", if v.pass { "PASS" } else { "FAIL" }, v.detail, start.elapsed().as_secs_f64());
        results.push((n, title, v));
    };

    let t = Instant::now();
    let records: Vec<RunRecord> = [0.01, 0.005, 0.0025].into_iter().map(unigrid).collect();
    let mut v = convergence(&records);
    let secs = t.elapsed().as_secs_f64();
    v.pass &= secs < 120.0;
    v.detail += &format!(", {secs:.1} s");
    report(1, "solver convergence", v, &mut results);
    report(2, "energy conservation", conservation(&records), &mut results);

    let mut runs = Runs { root: TempDir::new().expect("temp dir"), dirs: Vec::new() };
    let evolve = runs.ymblow("evolve-d5", &["evolve", "-s", "d=5", "-s", "A=0.2"]);
    report(3, "supercritical blowup", supercritical_blowup(&evolve), &mut results);
    let fit = runs.ymblow("fit-lambda-d4", &["fit-lambda", "-s", "d=4", "-s", "A=0.5"]);
    report(4, "critical-dimension blowup", critical_blowup(&fit), &mut results);
    let cone4 = runs.ymblow("cone-d4", &["cone-energy", "-s", "d=4", "-s", "A=0.5"]);
    let cone5 = runs.ymblow("cone-d5", &["cone-energy", "-s", "d=5", "-s", "A=0.2"]);
    report(5, "light-cone energy", cone_limits(&cone4, &cone5), &mut results);
    report(6, "shooting", shooting(), &mut results);
    let bisect = runs.ymblow("bisect-d5", &["bisect", "-s", "d=5", "-s", "tolerance=1e-6"]);
    let sweep = runs.ymblow("sweep-d5", &["sweep-subcritical", "-s", "d=5"]);
    let a_star = sweep["results"]["threshold"]["a_star"].to_string();
    let departure = runs.ymblow("departure-d5", &["departure-scaling", "-s", "d=5", "-s", &format!("a_star={a_star}")]);
    let bisect_dir = runs.root.path().join("bisect-d5");
    report(7, "critical amplitude", critical_amplitude(&bisect, &bisect_dir, &departure), &mut results);
    report(8, "scaling laws", scaling_laws(&sweep, &departure), &mut results);
    report(9, "determinism", determinism(&runs), &mut results);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("{} of {} criteria pass in {:.0} s", results.len() - failed.len(), results.len(), start.elapsed().as_secs_f64());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing: {failed:?}");
        ExitCode::FAILURE
    }
}
