use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mobimpute::analytic::{gap_table, jittered_semicircle, write_bias_csv, write_figure_csv, AnalyticModel, SemicircleConfig};
use mobimpute::evaluation::{
    evaluate_records, imputed_measures, impose_missingness, parse_plt, read_plt_tree, segment, unscheduled_missingness, ErrorTable,
};
use mobimpute::features::{compute_features, feature_intervals, DailyFeatureVector, FeatureContext, Measure, FEATURE_DEFINITION_VERSION};
use mobimpute::imputer::{impute_trace, Method};
use mobimpute::io::{read_gps_csv, write_events_csv, write_features_csv, write_gps_csv};
use mobimpute::projection::{GpsRecord, ProjectionFrame};
use mobimpute::segmentation::MobilityTrace;
use mobimpute::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{InputFormat, RunConfig};

pub struct Subject {
    pub id: String,
    pub records: Vec<GpsRecord>,
    pub malformed: usize,
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "subject".into())
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    v.sort();
    Ok(v)
}

pub fn load_subjects(cfg: &RunConfig) -> Result<Vec<Subject>> {
    if cfg.inputs.is_empty() {
        bail!("no input paths given");
    }
    let mut out = Vec::new();
    for input in &cfg.inputs {
        match cfg.format {
            InputFormat::Csv => {
                let files = if input.is_dir() { csv_files(input)? } else { vec![input.clone()] };
                for f in files {
                    let file = File::open(&f).with_context(|| format!("opening {}", f.display()))?;
                    let records = read_gps_csv(file, cfg.max_accuracy_m).with_context(|| format!("reading {}", f.display()))?;
                    out.push(Subject { id: file_stem(&f), records, malformed: 0 });
                }
            }
            InputFormat::Plt if input.is_dir() => {
                for f in read_plt_tree(input).with_context(|| format!("reading {}", input.display()))? {
                    out.push(Subject { id: format!("{}_{}", f.user, file_stem(&f.path)), records: f.parsed.records, malformed: f.parsed.malformed });
                }
            }
            InputFormat::Plt => {
                let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
                let parsed = parse_plt(&bytes).with_context(|| format!("parsing {}", input.display()))?;
                out.push(Subject { id: file_stem(input), records: parsed.records, malformed: parsed.malformed });
            }
        }
    }
    for s in &mut out {
        s.records.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    Ok(out)
}

fn observed_trace(subject: &Subject, cfg: &RunConfig) -> Result<MobilityTrace> {
    let frame = ProjectionFrame::build(&subject.records).with_context(|| format!("subject {}", subject.id))?;
    let points = frame.project_all(&subject.records)?;
    Ok(segment(&subject.id, Some(frame), &points, &cfg.segmentation)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    feature_definitions: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    outputs: Vec<String>,
    subjects: Value,
}

fn write_manifest(cfg: &RunConfig, command: &str, outputs: &[PathBuf], subjects: Value) -> Result<()> {
    let rel = outputs
        .iter()
        .map(|p| p.strip_prefix(&cfg.out).unwrap_or(p).to_string_lossy().replace('\\', "/"))
        .collect();
    let manifest = Manifest {
        tool: "mobimpute",
        version: env!("CARGO_PKG_VERSION"),
        feature_definitions: FEATURE_DEFINITION_VERSION,
        command,
        config: cfg,
        outputs: rel,
        subjects,
    };
    let mut w = create(&cfg.out.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn impute(cfg: &RunConfig) -> Result<()> {
    let method = cfg.method()?;
    let b = if method.is_stochastic() { cfg.replicates } else { 1 };
    let mut outputs = Vec::new();
    let mut subjects = Vec::new();
    for s in load_subjects(cfg)? {
        let trace = observed_trace(&s, cfg)?;
        let imp = impute_trace(&trace, &method, b, cfg.seed)?;
        let mut files = Vec::new();
        for (i, rep) in imp.replicates.iter().enumerate() {
            let path = cfg.out.join(&s.id).join(format!("replicate_{i:03}.csv"));
            let mut w = create(&path)?;
            write_events_csv(rep, &mut w)?;
            w.flush()?;
            files.push(path.clone());
            outputs.push(path);
        }
        subjects.push(json!({
            "id": s.id,
            "records": s.records.len(),
            "malformed_lines": s.malformed,
            "events": trace.events.len(),
            "gaps": trace.gaps.len(),
            "replicates": files.len(),
            "psi_fallback": imp.psi_fallback,
        }));
    }
    write_manifest(cfg, "impute", &outputs, Value::Array(subjects))
}

fn subject_features(s: &Subject, cfg: &RunConfig, method: &Method) -> Result<(Vec<DailyFeatureVector>, bool)> {
    let trace = observed_trace(s, cfg)?;
    let ctx = FeatureContext::from_trace(&trace, cfg.feature_config());
    let b = if method.is_stochastic() { cfg.replicates } else { 1 };
    let imp = impute_trace(&trace, method, b, cfg.seed)?;
    let mut by_day: BTreeMap<i64, Vec<DailyFeatureVector>> = BTreeMap::new();
    for rep in &imp.replicates {
        for v in compute_features(rep, &ctx) {
            by_day.entry(v.day).or_default().push(v);
        }
    }
    let with_intervals = b >= 2;
    let mut out = Vec::with_capacity(by_day.len());
    for (_, vs) in by_day {
        out.push(if with_intervals { feature_intervals(&vs, cfg.alpha)? } else { vs.into_iter().next().unwrap() });
    }
    Ok((out, with_intervals))
}

pub fn features(cfg: &RunConfig) -> Result<()> {
    let method = cfg.method()?;
    let mut rows = Vec::new();
    let mut with_intervals = false;
    let mut subjects = Vec::new();
    for s in load_subjects(cfg)? {
        let (vs, iv) = subject_features(&s, cfg, &method)?;
        with_intervals |= iv;
        subjects.push(json!({ "id": s.id, "records": s.records.len(), "days": vs.len() }));
        rows.extend(vs.into_iter().map(|v| (s.id.clone(), v)));
    }
    let path = cfg.out.join("features.csv");
    let mut w = create(&path)?;
    write_features_csv(&rows, with_intervals, &mut w)?;
    w.flush()?;
    write_manifest(cfg, "features", &[path], Value::Array(subjects))
}

pub fn simulate_missingness(cfg: &RunConfig) -> Result<()> {
    let mut outputs = Vec::new();
    let mut subjects = Vec::new();
    for s in load_subjects(cfg)? {
        let kept = impose_missingness(&s.records, &cfg.schedule);
        let path = cfg.out.join(format!("{}.csv", s.id));
        let mut w = create(&path)?;
        write_gps_csv(&kept, &mut w)?;
        w.flush()?;
        outputs.push(path);
        subjects.push(json!({
            "id": s.id,
            "records_in": s.records.len(),
            "records_kept": kept.len(),
            "input_unscheduled_missingness": unscheduled_missingness(&s.records, &cfg.schedule, cfg.unscheduled_tolerance_s),
        }));
    }
    write_manifest(cfg, "simulate-missingness", &outputs, Value::Array(subjects))
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let methods: Vec<Method> = cfg.methods.iter().map(|m| Method::parse(m, cfg.nu, cfg.scale_mult)).collect::<mobimpute::Result<_>>()?;
    // trajectory files are single outings without home context
    let measures = match cfg.format {
        InputFormat::Plt => Measure::HOME_FREE.to_vec(),
        InputFormat::Csv => imputed_measures(),
    };
    let eval_cfg = mobimpute::evaluation::EvalConfig {
        segmentation: cfg.segmentation,
        features: cfg.feature_config(),
        replicates: cfg.replicates,
        seed: cfg.seed,
        measures,
    };
    let mut total: Option<ErrorTable> = None;
    let mut subjects = Vec::new();
    for s in load_subjects(cfg)? {
        match evaluate_records(&s.id, &s.records, &cfg.schedule, &methods, &eval_cfg) {
            Ok(t) => {
                subjects.push(json!({ "id": s.id, "records": s.records.len(), "status": "scored" }));
                match total.as_mut() {
                    Some(acc) => acc.merge(&t)?,
                    None => total = Some(t),
                }
            }
            Err(e @ (Error::InsufficientDensity(_) | Error::EmptyTrace)) if cfg.format == InputFormat::Plt => {
                eprintln!("skipping {}: {e}", s.id);
                subjects.push(json!({ "id": s.id, "records": s.records.len(), "status": format!("skipped: {e}") }));
            }
            Err(e) => return Err(anyhow::Error::new(e).context(format!("evaluating {}", s.id))),
        }
    }
    let Some(table) = total else {
        bail!("no input could be scored");
    };
    let csv_path = cfg.out.join("error_table.csv");
    let json_path = cfg.out.join("error_table.json");
    let mut w = create(&csv_path)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&json_path)?;
    table.write_json(&mut w)?;
    writeln!(w)?;
    w.flush()?;
    write_manifest(cfg, "evaluate", &[csv_path, json_path], Value::Array(subjects))
}

pub fn analytic(cfg: &RunConfig) -> Result<()> {
    let a = &cfg.analytic;
    let rows = gap_table(&a.ns, &a.thetas, a.d, a.sigma2, a.reps, cfg.seed)?;
    let gaps_path = cfg.out.join("gaps.csv");
    let mut w = create(&gaps_path)?;
    write_figure_csv(&rows, &mut w)?;
    w.flush()?;

    let model = AnalyticModel::new(a.semicircle_n, a.semicircle_theta0, a.semicircle_d, 0.0, 0.0)?;
    let sc = SemicircleConfig {
        blocks: a.blocks,
        step_s: a.step_s,
        replicates: cfg.replicates,
        alpha: cfg.alpha,
        seed: cfg.seed,
        scale_mult: cfg.scale_mult,
    };
    let mut bias = Vec::new();
    for &jitter in &a.jitters {
        bias.extend(jittered_semicircle(&model, jitter, &a.missing_grid, &sc)?.into_iter().map(|p| (jitter, p)));
    }
    let bias_path = cfg.out.join("semicircle.csv");
    let mut w = create(&bias_path)?;
    write_bias_csv(&bias, &mut w)?;
    w.flush()?;
    write_manifest(cfg, "analytic", &[gaps_path, bias_path], Value::Null)
}
