//! Batch pipelines behind the `kvlab` binary: run a config, write CSV/JSON
//! artifacts plus a manifest, and consolidate manifests into a report.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Frequencies, InitialData, Pipeline, ScheduleConfig};
use crate::dynamics::{bump_initial, fit_decay_rate, semidiscrete_decay_caveat, simulate};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::operators::{DiscreteGenerator, SystemState};
use crate::resolvent::{fit_growth_exponent, sweep, LambdaSchedule};
use crate::spectral::{dirichlet_modes, discrete_modes, generator_spectrum, verify_asymptotics, ModeSet};

pub const TOOL: &str = "kvlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_OUT: &str = "out";

/// Fit margin on one-sided decay floors.
pub const DECAY_MARGIN: f64 = 0.05;
/// Fit margin on resolvent growth ceilings.
pub const GROWTH_MARGIN: f64 = 0.5;
pub const GROWTH_BAND: (f64, f64) = (1.7, 2.3);
pub const GROWTH_MIN_R2: f64 = 0.95;

/// Command-line overrides of config fields.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub pipeline: Pipeline,
    /// sha256 of the effective config (with overrides, without `out`).
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_s: f64,
    /// Output file name to sha256.
    pub files: BTreeMap<String, String>,
    pub summary: Value,
    pub config: ExperimentConfig,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files and their hashes.
struct Artifacts {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Artifacts {
    fn write(&mut self, name: &str, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        fs::write(self.dir.join(name), &buf)?;
        self.files.insert(name.to_string(), sha256_hex(&buf));
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
        self.write(name, |w| w.write_all(text.as_bytes()))
    }
}

fn initial_state(gen: &DiscreteGenerator, kind: InitialData, seed: u64) -> SystemState {
    match kind {
        InitialData::Bump => bump_initial(gen),
        InitialData::Zero => gen.zero_state(),
        InitialData::Random => SystemState::random(gen.nodes(), gen.num_blocks(), &mut ChaCha8Rng::seed_from_u64(seed)),
    }
}

fn modes_for(cfg: &ExperimentConfig, freq: Frequencies, count: usize) -> Result<ModeSet> {
    match freq {
        Frequencies::Continuum => dirichlet_modes(cfg.domain, count),
        Frequencies::Discrete => discrete_modes(&cfg.grid()?, count),
    }
}

fn generator_matrix(gen: &DiscreteGenerator) -> CsrMatrix {
    let n = gen.nodes();
    let mut t = Vec::new();
    gen.for_each_entry(|br, bc, r, c, v| t.push((br * n + r, bc * n + c, v)));
    CsrMatrix::from_triplets(gen.state_dim(), gen.state_dim(), t)
}

fn run_simulate(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let p = cfg.simulate_params()?;
    let gen = cfg.generator()?;
    let u0 = initial_state(&gen, p.initial, cfg.seed);
    let trace = simulate(&gen, &u0, p.dt, p.t_final, p.sample_every)?;
    art.write("energy_trace.csv", |w| trace.write_csv(w))?;
    if p.export_matrices {
        art.write("stiffness.coo", |w| gen.stiffness().write_coordinate(w))?;
        art.write("damping.coo", |w| gen.damping().write_coordinate(w))?;
        art.write("generator.coo", |w| generator_matrix(&gen).write_coordinate(w))?;
    }
    let e0 = trace.initial_energy();
    Ok(json!({
        "samples": trace.len(),
        "initial_energy": e0,
        "final_energy": trace.final_energy(),
        "energy_ratio": if e0 > 0.0 { Some(trace.final_energy() / e0) } else { None },
        "non_increasing": trace.is_non_increasing(1e-10),
    }))
}

fn run_spectrum(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let p = cfg.spectrum_params()?;
    let mut summary = serde_json::Map::new();
    if let Some((b, c)) = cfg.coefficients.constant_values().filter(|(b, _)| *b > 0.0) {
        let a = cfg.coefficients.a;
        let modes = modes_for(cfg, p.frequencies, p.modes)?;
        let rep = verify_asymptotics(a, b, c, &modes, p.k_min)?;
        art.write("spectrum_report.csv", |w| rep.write_csv(w))?;
        let tail_from = p.tail_from.unwrap_or(p.k_min);
        let tail_gap = rep.tail_gap(tail_from);
        summary.insert(
            "asymptotics".into(),
            json!({
                "a": a, "b": b, "c": c,
                "modes": p.modes,
                "k_min": p.k_min,
                "tail_from": tail_from,
                "tail_gap": tail_gap,
                "gap_threshold": p.gap_threshold,
                "tail_pass": tail_gap < p.gap_threshold,
                "gap_monotone": rep.gap_monotone,
                "max_rel_gap": rep.max_rel_gap,
                "max_abs_re": rep.max_abs_re,
            }),
        );
    }
    if p.generator {
        let gen = cfg.generator()?;
        let mut spec = generator_spectrum(&gen)?;
        spec.sort_by(|x, y| x.im.total_cmp(&y.im).then(x.re.total_cmp(&y.re)));
        art.write("generator_spectrum.csv", |w| write_spectrum(w, &spec))?;
        let caveat = semidiscrete_decay_caveat(&gen)?;
        summary.insert(
            "generator".into(),
            json!({ "eigenvalues": spec.len(), "abscissa": caveat.abscissa, "t_star": caveat.t_star }),
        );
    }
    Ok(Value::Object(summary))
}

fn write_spectrum(w: &mut dyn Write, spec: &[Complex64]) -> std::io::Result<()> {
    writeln!(w, "re,im")?;
    for z in spec {
        writeln!(w, "{:.17e},{:.17e}", z.re, z.im)?;
    }
    Ok(())
}

fn run_resolvent(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let p = cfg.resolvent_params()?;
    let gen = cfg.generator()?;
    let schedule = match p.schedule {
        ScheduleConfig::AtModes { from, to, frequencies } => LambdaSchedule::AtModes(modes_for(cfg, frequencies, to)?.range(from, to)),
        ScheduleConfig::LogUniform { lo, hi, count } => LambdaSchedule::LogUniform { lo, hi, count },
    };
    let sw = sweep(&gen, &schedule, p.tol)?;
    art.write("resolvent_sweep.csv", |w| sw.write_csv(w))?;
    let usable: Vec<f64> = sw.lambdas.iter().zip(&sw.flagged).filter(|(_, f)| !**f).map(|(l, _)| *l).collect();
    let window = p.window.or_else(|| Some((*usable.first()?, *usable.last()?)));
    let (fit, fit_error) = match window.map(|w| fit_growth_exponent(&sw, w)) {
        Some(Ok(f)) => (Some(f), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, Some("no unflagged points".to_string())),
    };
    if let Some(f) = &fit {
        art.json("growth_fit.json", f)?;
    }
    Ok(json!({
        "points": sw.len(),
        "flagged": sw.flagged.iter().filter(|f| **f).count(),
        "unconverged": sw.converged.iter().filter(|c| !**c).count(),
        "failures": sw.failures,
        "worst_solve_residual": sw.worst_solve_residual,
        "frequency_limit": sw.frequency_limit,
        "constant_coefficients": cfg.coefficients.constant_values().is_some(),
        "beta": cfg.coefficients.beta(),
        "fit": fit,
        "fit_error": fit_error,
    }))
}

fn run_decay_fit(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let p = cfg.decay_fit_params()?;
    let gen = cfg.generator()?;
    let caveat = semidiscrete_decay_caveat(&gen)?;
    let window = match p.window.or_else(|| caveat.default_window()) {
        Some(w) => w,
        None => return Err(Error::config("decay_fit.window", "conservative system has no decay horizon; give a window")),
    };
    let t_final = p.t_final.unwrap_or(window.1);
    let u0 = initial_state(&gen, p.initial, cfg.seed);
    let trace = simulate(&gen, &u0, p.dt, t_final, p.sample_every)?;
    art.write("energy_trace.csv", |w| trace.write_csv(w))?;
    let fit = fit_decay_rate(&trace, window, p.model)?;
    art.json("decay_fit.json", &fit)?;
    let floor = cfg.coefficients.beta().map(|b| 2.0 / (2.0 + 4.0 * b));
    Ok(json!({
        "abscissa": caveat.abscissa,
        "t_star": caveat.t_star,
        "window": window,
        "t_final": t_final,
        "window_before_t_star": window.1 <= caveat.t_star,
        "beta": cfg.coefficients.beta(),
        "predicted_floor": floor,
        "fit": fit,
    }))
}

/// Loads, validates and runs the config at `path`, honouring the overrides.
/// Returns the manifest path.
pub fn run(pipeline: Pipeline, path: &Path, opts: &RunOptions) -> Result<(PathBuf, Manifest)> {
    let mut cfg = ExperimentConfig::load(path)?;
    if cfg.pipeline != pipeline {
        return Err(Error::config(
            "pipeline",
            format!("config selects `{}` but the `{}` subcommand was invoked", cfg.pipeline.as_str(), pipeline.as_str()),
        ));
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out = opts.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    run_config(&cfg, &out, opts.workers)
}

/// Runs an already validated config into `out`.
pub fn run_config(cfg: &ExperimentConfig, out: &Path, workers: Option<usize>) -> Result<(PathBuf, Manifest)> {
    cfg.validate()?;
    let workers = match workers {
        Some(0) => return Err(Error::config("workers", "must be at least 1")),
        Some(w) => w,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    fs::create_dir_all(out)?;
    let mut hashed = cfg.clone();
    hashed.out = None;
    let config_text = hashed.to_toml();
    let mut art = Artifacts {
        dir: out.to_path_buf(),
        files: BTreeMap::new(),
    };
    art.write("config.toml", |w| w.write_all(config_text.as_bytes()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let start = Instant::now();
    let summary = pool.install(|| match cfg.pipeline {
        Pipeline::Simulate => run_simulate(cfg, &mut art),
        Pipeline::Spectrum => run_spectrum(cfg, &mut art),
        Pipeline::Resolvent => run_resolvent(cfg, &mut art),
        Pipeline::DecayFit => run_decay_fit(cfg, &mut art),
    })?;
    let manifest = Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        pipeline: cfg.pipeline,
        config_hash: sha256_hex(config_text.as_bytes()),
        seed: cfg.seed,
        workers,
        wall_time_s: start.elapsed().as_secs_f64(),
        files: art.files,
        summary,
        config: cfg.clone(),
    };
    let path = out.join(MANIFEST_FILE);
    let mut w = BufWriter::new(fs::File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &manifest).expect("serializable");
    writeln!(w)?;
    w.flush()?;
    Ok((path, manifest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "INFO",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Prediction being tested, used for grouping.
    pub target: String,
    pub manifest: String,
    pub text: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub rows: Vec<ReportRow>,
    pub pass: usize,
    pub fail: usize,
    pub info: usize,
}

impl Report {
    /// Text table; rows are already grouped by target.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let mut current = None;
        for r in &self.rows {
            if current != Some(&r.target) {
                out.push_str(&format!("== {}\n", r.target));
                current = Some(&r.target);
            }
            out.push_str(&format!("  {:<60} [{}]\n", r.text, r.manifest));
        }
        out.push_str(&format!("{} pass, {} fail, {} info\n", self.pass, self.fail, self.info));
        out
    }
}

const TARGET_ASYMPTOTICS: &str = "eigenvalue asymptotics: Re λ ~ -c²/(2bμ²)";
const TARGET_GENERATOR: &str = "semi-discrete spectrum";
const TARGET_ENERGY: &str = "energy dissipation";

fn f(v: &Value, key: &str) -> Option<f64> {
    v.get(key).and_then(Value::as_f64)
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn rows_for(m: &Manifest, label: &str) -> Vec<ReportRow> {
    let row = |target: &str, text: String, verdict: Verdict| ReportRow {
        target: target.to_string(),
        manifest: label.to_string(),
        text,
        verdict,
    };
    let s = &m.summary;
    let mut rows = Vec::new();
    match m.pipeline {
        Pipeline::Spectrum => {
            if let Some(a) = s.get("asymptotics") {
                let gap = f(a, "tail_gap").unwrap_or(f64::NAN);
                let thr = f(a, "gap_threshold").unwrap_or(0.02);
                rows.push(row(
                    TARGET_ASYMPTOTICS,
                    format!("branch tail gap: {:.1}% ({} <{}%)", 100.0 * gap, verdict(gap < thr), 100.0 * thr),
                    verdict(gap < thr),
                ));
                let mono = a.get("gap_monotone").and_then(Value::as_bool).unwrap_or(false);
                rows.push(row(TARGET_ASYMPTOTICS, format!("gap decreasing in k: {mono}"), verdict(mono)));
            }
            if let Some(g) = s.get("generator") {
                rows.push(row(
                    TARGET_GENERATOR,
                    format!("spectral abscissa {:.3e}, t* = {}", f(g, "abscissa").unwrap_or(f64::NAN), fmt_t(g.get("t_star"))),
                    Verdict::Info,
                ));
            }
        }
        Pipeline::Simulate => {
            let ok = s.get("non_increasing").and_then(Value::as_bool).unwrap_or(false);
            rows.push(row(TARGET_ENERGY, format!("energy non-increasing: {ok}"), verdict(ok)));
            if let Some(r) = f(s, "energy_ratio") {
                rows.push(row(TARGET_ENERGY, format!("E(T)/E(0) = {r:.4e}"), Verdict::Info));
            }
        }
        Pipeline::Resolvent => {
            let beta = f(s, "beta");
            let constant = s.get("constant_coefficients").and_then(Value::as_bool).unwrap_or(false);
            let target = match beta {
                Some(b) => format!("resolvent growth <= λ^{}", 2.0 + 4.0 * b),
                None if constant => "resolvent growth ~ λ^2, decay t^-1".to_string(),
                None => "resolvent growth".to_string(),
            };
            match s.get("fit").filter(|v| !v.is_null()) {
                Some(fit) => {
                    let l = f(fit, "exponent").unwrap_or(f64::NAN);
                    let r2 = f(fit, "r_squared").unwrap_or(f64::NAN);
                    let implied = f(fit, "implied_decay").unwrap_or(f64::NAN);
                    let (text, v) = match beta {
                        Some(b) => {
                            let ceiling = 2.0 + 4.0 * b + GROWTH_MARGIN;
                            let ok = l <= ceiling;
                            (format!("exponent {l:.3} ({} <= {ceiling})", verdict(ok)), verdict(ok))
                        }
                        None if constant => {
                            let ok = l >= GROWTH_BAND.0 && l <= GROWTH_BAND.1 && r2 > GROWTH_MIN_R2;
                            (
                                format!("exponent {l:.3}, r² {r2:.3}, implied decay {implied:.3} ({} in [{}, {}])", verdict(ok), GROWTH_BAND.0, GROWTH_BAND.1),
                                verdict(ok),
                            )
                        }
                        None => (format!("exponent {l:.3}, implied decay {implied:.3}"), Verdict::Info),
                    };
                    rows.push(row(&target, text, v));
                }
                None => rows.push(row(
                    &target,
                    format!("no growth fit: {}", s.get("fit_error").and_then(Value::as_str).unwrap_or("unknown")),
                    Verdict::Info,
                )),
            }
        }
        Pipeline::DecayFit => {
            let fit = s.get("fit").cloned().unwrap_or(Value::Null);
            let alpha = f(&fit, "exponent").unwrap_or(f64::NAN);
            match f(s, "predicted_floor") {
                Some(floor) => {
                    let ok = alpha >= floor - DECAY_MARGIN;
                    rows.push(row(
                        &format!("energy decay at least t^-{floor:.3}"),
                        format!("fitted exponent {alpha:.3} ({} >= {:.3})", verdict(ok), floor - DECAY_MARGIN),
                        verdict(ok),
                    ));
                }
                None => rows.push(row(
                    "energy decay t^-1",
                    format!("fitted exponent {alpha:.3} (r² {:.3})", f(&fit, "r_squared").unwrap_or(f64::NAN)),
                    Verdict::Info,
                )),
            }
        }
    }
    rows
}

fn fmt_t(v: Option<&Value>) -> String {
    match v.and_then(Value::as_f64) {
        Some(t) => format!("{t:.3e}"),
        None => "inf".into(),
    }
}

fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Report(format!("{}: not a manifest ({e})", path.display())))?;
    if m.tool != TOOL {
        return Err(Error::Report(format!("{}: written by `{}`", path.display(), m.tool)));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    for (name, hash) in &m.files {
        let bytes = fs::read(dir.join(name)).map_err(|e| Error::Report(format!("{}: missing output {name} ({e})", path.display())))?;
        if &sha256_hex(&bytes) != hash {
            return Err(Error::Report(format!("{}: output {name} does not match its recorded hash", path.display())));
        }
    }
    Ok(m)
}

/// Consolidates manifests into `report.json` and `report.txt` under `out`.
pub fn report(paths: &[PathBuf], out: &Path) -> Result<Report> {
    if paths.is_empty() {
        return Err(Error::Report("no manifests given".into()));
    }
    let manifests = paths.iter().map(|p| load_manifest(p)).collect::<Result<Vec<_>>>()?;
    if let Some(m) = manifests.iter().find(|m| m.version != manifests[0].version) {
        return Err(Error::Report(format!("manifests come from different versions ({} and {})", manifests[0].version, m.version)));
    }
    let mut rows = Vec::new();
    for (p, m) in paths.iter().zip(&manifests) {
        let label = p.parent().and_then(|d| d.file_name()).map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string());
        rows.extend(rows_for(m, &label));
    }
    // group by target, keeping first-appearance order
    let mut order: Vec<String> = Vec::new();
    for r in &rows {
        if !order.contains(&r.target) {
            order.push(r.target.clone());
        }
    }
    rows.sort_by_key(|r| order.iter().position(|t| *t == r.target));
    let count = |v| rows.iter().filter(|r| r.verdict == v).count();
    let rep = Report {
        version: VERSION.into(),
        pass: count(Verdict::Pass),
        fail: count(Verdict::Fail),
        info: count(Verdict::Info),
        rows,
    };
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&rep).expect("serializable") + "\n")?;
    fs::write(out.join("report.txt"), rep.table())?;
    Ok(rep)
}

/// Machine-readable error body printed by the binary.
pub fn error_json(e: &Error) -> Value {
    let mut body = json!({ "kind": e.kind(), "message": e.to_string() });
    match e {
        Error::Config { field, .. } => body["field"] = json!(field),
        Error::InvalidParameter { name, .. } => body["field"] = json!(name),
        _ => {}
    }
    json!({ "error": body })
}

/// Exit status for an error: 2 for bad input, 1 for pipeline failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::Report(_) => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum_cfg() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
pipeline = "spectrum"
[domain]
kind = "interval"
length = 3.141592653589793
[grid]
n = 30
[coefficients]
damping = { value = 1.0 }
coupling = { value = 1.0 }
[spectrum]
modes = 120
k_min = 20
tail_from = 100
generator = true
"#,
        )
        .unwrap()
    }

    #[test]
    fn spectrum_manifest_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("spec");
        let (path, m) = run_config(&spectrum_cfg(), &out, Some(2)).unwrap();
        assert!(m.files.contains_key("spectrum_report.csv"));
        assert!(m.files.contains_key("generator_spectrum.csv"));
        let gap = m.summary["asymptotics"]["tail_gap"].as_f64().unwrap();
        assert!(gap < 0.02);
        let rep = report(&[path.clone()], &dir.path().join("rep")).unwrap();
        assert_eq!(rep.fail, 0);
        assert!(rep.rows[0].text.starts_with("branch tail gap: "));
        assert!(rep.rows[0].text.ends_with("(PASS <2%)"));
        assert!(dir.path().join("rep/report.txt").exists());

        // tampering with an output is detected
        fs::write(out.join("spectrum_report.csv"), "k\n").unwrap();
        assert!(report(&[path], &dir.path().join("rep")).unwrap_err().to_string().contains("hash"));
    }

    #[test]
    fn empty_report_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(report(&[], dir.path()), Err(Error::Report(_))));
    }

    #[test]
    fn outputs_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (_, a) = run_config(&spectrum_cfg(), &dir.path().join("a"), Some(1)).unwrap();
        let (_, b) = run_config(&spectrum_cfg(), &dir.path().join("b"), Some(3)).unwrap();
        assert_eq!(a.files, b.files);
        assert_eq!(a.config_hash, b.config_hash);
    }

    #[test]
    fn error_body() {
        let e = Error::config("coefficients.preset.eps", "ordering violated");
        let v = error_json(&e);
        assert_eq!(v["error"]["kind"], "config");
        assert_eq!(v["error"]["field"], "coefficients.preset.eps");
        assert_eq!(exit_code(&e), 2);
        assert_eq!(exit_code(&Error::Singular { pivot_ratio: 0.0 }), 1);
    }
}
