//! Scoring imputation methods against dense ground truth.
//!
//! A dense trace is degraded by an on/off sampling schedule, segmented,
//! imputed by each method and reduced to daily measures. Each day's mean
//! imputed measure is compared to the measure of the undegraded trace.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{compute_features, DailyFeatureVector, FeatureConfig, FeatureContext, Measure};
use crate::imputer::{impute_trace, Method};
use crate::kernels::DAY_S;
use crate::projection::{GpsRecord, PlanarPoint, ProjectionFrame};
use crate::segmentation::{extract_events, merge_pause_flanked_gaps, MobilityTrace, SegmentationConfig};

/// Truth with a median sampling interval above this is refused.
pub const MAX_TRUTH_MEDIAN_INTERVAL_S: f64 = 10.0;

/// Truth values smaller than this in magnitude get absolute errors.
pub const NEAR_ZERO: f64 = 1e-9;

pub trait Timed {
    fn time(&self) -> f64;
}

impl Timed for GpsRecord {
    fn time(&self) -> f64 {
        self.t
    }
}

impl Timed for PlanarPoint {
    fn time(&self) -> f64 {
        self.t
    }
}

impl Timed for f64 {
    fn time(&self) -> f64 {
        *self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnOffSchedule {
    pub on_s: f64,
    pub off_s: f64,
    #[serde(default)]
    pub phase_s: f64,
}

impl OnOffSchedule {
    pub fn new(on_s: f64, off_s: f64, phase_s: f64) -> Result<Self> {
        OnOffSchedule { on_s, off_s, phase_s }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.on_s > 0.0 && self.on_s.is_finite()) {
            return Err(Error::InvalidParameter(format!("on period must be positive, got {}", self.on_s)));
        }
        if !(self.off_s >= 0.0 && self.off_s.is_finite()) {
            return Err(Error::InvalidParameter(format!("off period must be non-negative, got {}", self.off_s)));
        }
        if !(self.phase_s >= 0.0 && self.phase_s.is_finite()) {
            return Err(Error::InvalidParameter(format!("phase must be non-negative, got {}", self.phase_s)));
        }
        Ok(self)
    }

    /// `"ON/OFF"` in minutes, e.g. `"2/10"`.
    pub fn parse_minutes(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("schedule must look like ON/OFF in minutes, got {s:?}"));
        let (on, off) = s.split_once('/').ok_or_else(bad)?;
        let on: f64 = on.trim().parse().map_err(|_| bad())?;
        let off: f64 = off.trim().parse().map_err(|_| bad())?;
        Self::new(on * 60.0, off * 60.0, 0.0)
    }

    pub fn cycle(&self) -> f64 {
        self.on_s + self.off_s
    }

    pub fn is_on(&self, t: f64) -> bool {
        (t - self.phase_s).rem_euclid(self.cycle()) < self.on_s
    }

    pub fn on_fraction(&self) -> f64 {
        self.on_s / self.cycle()
    }

    /// On-windows intersecting `[t0, t1]`, clipped to it.
    pub fn on_windows(&self, t0: f64, t1: f64) -> Vec<(f64, f64)> {
        let c = self.cycle();
        let mut k = ((t0 - self.phase_s) / c).floor();
        let mut out = Vec::new();
        loop {
            let start = self.phase_s + k * c;
            if start > t1 {
                break;
            }
            let (a, b) = (start.max(t0), (start + self.on_s).min(t1));
            if b > a {
                out.push((a, b));
            }
            k += 1.0;
        }
        out
    }
}

/// Keeps the points falling in on-periods.
pub fn impose_missingness<T: Timed + Clone>(points: &[T], schedule: &OnOffSchedule) -> Vec<T> {
    points.iter().filter(|p| schedule.is_on(p.time())).cloned().collect()
}

/// Fraction of scheduled on-time, within the span of the observations, with
/// no observation in the surrounding `tolerance_s` bin. On-windows are cut
/// into bins of `tolerance_s`; a bin counts as covered when an observation
/// falls inside it.
pub fn unscheduled_missingness<T: Timed>(points: &[T], schedule: &OnOffSchedule, tolerance_s: f64) -> f64 {
    let times: Vec<f64> = points.iter().map(|p| p.time()).collect();
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return 0.0;
    };
    let (mut total, mut missing) = (0.0, 0.0);
    for (a, b) in schedule.on_windows(t0, t1) {
        let mut s = a;
        while s < b {
            let e = (s + tolerance_s).min(b);
            let closed = e >= t1;
            let i = times.partition_point(|&t| t < s);
            let covered = i < times.len() && (times[i] < e || (closed && times[i] <= e));
            total += e - s;
            if !covered {
                missing += e - s;
            }
            s = e;
        }
    }
    if total > 0.0 {
        missing / total
    } else {
        0.0
    }
}

/// Running sums for one measure and method.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorCell {
    pub sum_signed: f64,
    pub sum_abs: f64,
    pub n: usize,
    /// Absolute errors, in measure units, of units whose truth was near zero.
    pub flagged_sum_abs: f64,
    pub n_flagged: usize,
}

impl ErrorCell {
    pub fn record(&mut self, estimate: f64, truth: f64) {
        if !(estimate.is_finite() && truth.is_finite()) {
            return;
        }
        if truth.abs() < NEAR_ZERO {
            self.flagged_sum_abs += (estimate - truth).abs();
            self.n_flagged += 1;
        } else {
            let rel = (estimate - truth) / truth * 100.0;
            self.sum_signed += rel;
            self.sum_abs += rel.abs();
            self.n += 1;
        }
    }

    pub fn merge(&mut self, other: &ErrorCell) {
        self.sum_signed += other.sum_signed;
        self.sum_abs += other.sum_abs;
        self.n += other.n;
        self.flagged_sum_abs += other.flagged_sum_abs;
        self.n_flagged += other.n_flagged;
    }

    /// Mean signed relative error, percent.
    pub fn signed(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum_signed / self.n as f64
        }
    }

    /// Mean absolute relative error, percent.
    pub fn abs(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum_abs / self.n as f64
        }
    }

    pub fn flagged_abs(&self) -> f64 {
        if self.n_flagged == 0 {
            f64::NAN
        } else {
            self.flagged_sum_abs / self.n_flagged as f64
        }
    }
}

/// Relative errors by measure (rows) and method (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub measures: Vec<Measure>,
    pub methods: Vec<String>,
    /// `cells[measure][method]`.
    pub cells: Vec<Vec<ErrorCell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ErrorSummary<'a> {
    measures: Vec<&'static str>,
    methods: &'a [String],
    signed_pct: Vec<Vec<f64>>,
    abs_pct: Vec<Vec<f64>>,
    flagged_abs: Vec<Vec<f64>>,
    units: Vec<Vec<usize>>,
    mean_abs_pct: Vec<f64>,
}

impl ErrorTable {
    pub fn new(measures: &[Measure], methods: &[String]) -> Self {
        ErrorTable {
            measures: measures.to_vec(),
            methods: methods.to_vec(),
            cells: vec![vec![ErrorCell::default(); methods.len()]; measures.len()],
        }
    }

    pub fn cell(&self, measure: Measure, method: &str) -> Option<&ErrorCell> {
        let i = self.measures.iter().position(|&m| m == measure)?;
        let j = self.methods.iter().position(|m| m == method)?;
        Some(&self.cells[i][j])
    }

    /// Compares one unit's estimates against its truth.
    pub fn record(&mut self, method: usize, estimate: &DailyFeatureVector, truth: &DailyFeatureVector) {
        for (i, &m) in self.measures.iter().enumerate() {
            self.cells[i][method].record(estimate.get(m), truth.get(m));
        }
    }

    /// Adds the sums of `other`, which must have the same shape.
    pub fn merge(&mut self, other: &ErrorTable) -> Result<()> {
        if self.measures != other.measures || self.methods != other.methods {
            return Err(Error::InvalidParameter("cannot merge error tables of different shape".into()));
        }
        for (row, orow) in self.cells.iter_mut().zip(&other.cells) {
            for (c, o) in row.iter_mut().zip(orow) {
                c.merge(o);
            }
        }
        Ok(())
    }

    /// Mean over measures of the absolute relative error; measures with
    /// only flagged units are skipped.
    pub fn mean_abs(&self, method: &str) -> f64 {
        let Some(j) = self.methods.iter().position(|m| m == method) else {
            return f64::NAN;
        };
        let vals: Vec<f64> = self.cells.iter().map(|row| row[j]).filter(|c| c.n > 0).map(|c| c.abs()).collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["measure".to_string()];
        for m in &self.methods {
            header.extend([m.clone(), format!("{m}_abs"), format!("{m}_flagged_abs"), format!("{m}_units")]);
        }
        w.write_record(&header)?;
        for (i, measure) in self.measures.iter().enumerate() {
            let mut rec = vec![measure.name().to_string()];
            for c in &self.cells[i] {
                rec.extend([c.signed().to_string(), c.abs().to_string(), c.flagged_abs().to_string(), (c.n + c.n_flagged).to_string()]);
            }
            w.write_record(&rec)?;
        }
        let mut rec = vec!["MeanAbsError".to_string()];
        for m in &self.methods {
            let v = self.mean_abs(m);
            rec.extend([v.to_string(), v.to_string(), String::new(), String::new()]);
        }
        w.write_record(&rec)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let grid = |f: &dyn Fn(&ErrorCell) -> f64| -> Vec<Vec<f64>> { self.cells.iter().map(|r| r.iter().map(f).collect()).collect() };
        let summary = ErrorSummary {
            measures: self.measures.iter().map(|m| m.name()).collect(),
            methods: &self.methods,
            signed_pct: grid(&|c| c.signed()),
            abs_pct: grid(&|c| c.abs()),
            flagged_abs: grid(&|c| c.flagged_abs()),
            units: self.cells.iter().map(|r| r.iter().map(|c| c.n + c.n_flagged).collect()).collect(),
            mean_abs_pct: self.methods.iter().map(|m| self.mean_abs(m)).collect(),
        };
        serde_json::to_writer_pretty(out, &summary)?;
        Ok(())
    }
}

/// Every measure except the observation count of missing minutes.
pub fn imputed_measures() -> Vec<Measure> {
    Measure::ALL.iter().copied().filter(|&m| m != Measure::MinsMissing).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub segmentation: SegmentationConfig,
    pub features: FeatureConfig,
    /// Replicates for stochastic methods.
    pub replicates: usize,
    pub seed: u64,
    pub measures: Vec<Measure>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            segmentation: SegmentationConfig::default(),
            features: FeatureConfig::default(),
            replicates: 100,
            seed: 0,
            measures: imputed_measures(),
        }
    }
}

fn median_interval(times: &[f64]) -> f64 {
    let mut d: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if d.is_empty() {
        return f64::INFINITY;
    }
    d.sort_by(|a, b| a.total_cmp(b));
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        (d[m - 1] + d[m]) / 2.0
    }
}

/// Refuses truth sampled more sparsely than the ground-truth tolerance.
pub fn check_truth_density<T: Timed>(points: &[T]) -> Result<()> {
    let times: Vec<f64> = points.iter().map(|p| p.time()).collect();
    let med = median_interval(&times);
    if med > MAX_TRUTH_MEDIAN_INTERVAL_S {
        return Err(Error::InsufficientDensity(format!(
            "median sampling interval is {med} s; ground truth needs at most {MAX_TRUTH_MEDIAN_INTERVAL_S} s"
        )));
    }
    Ok(())
}

/// Segments planar points and merges pause-flanked gaps.
pub fn segment(subject_id: &str, frame: Option<ProjectionFrame>, points: &[PlanarPoint], cfg: &SegmentationConfig) -> Result<MobilityTrace> {
    let mut trace = extract_events(points, cfg)?;
    trace.subject_id = subject_id.to_string();
    trace.frame = frame;
    Ok(merge_pause_flanked_gaps(&trace, cfg))
}

/// Per-day means over `replicates` imputations of `trace` by `method`.
pub fn mean_daily_features(trace: &MobilityTrace, method: &Method, replicates: usize, seed: u64, ctx: &FeatureContext) -> Result<BTreeMap<i64, DailyFeatureVector>> {
    let b = if method.is_stochastic() { replicates } else { 1 };
    let imputed = impute_trace(trace, method, b, seed)?;
    let mut sums: BTreeMap<i64, (DailyFeatureVector, usize)> = BTreeMap::new();
    for rep in &imputed.replicates {
        for v in compute_features(rep, ctx) {
            match sums.get_mut(&v.day) {
                Some((acc, n)) => {
                    for m in Measure::ALL {
                        acc.set(m, acc.get(m) + v.get(m));
                    }
                    acc.valid &= v.valid;
                    *n += 1;
                }
                None => {
                    sums.insert(v.day, (v, 1));
                }
            }
        }
    }
    Ok(sums
        .into_iter()
        .map(|(day, (mut acc, n))| {
            for m in Measure::ALL {
                acc.set(m, acc.get(m) / n as f64);
            }
            (day, acc)
        })
        .collect())
}

/// Scores `methods` on one dense planar trace degraded by `schedule`.
pub fn evaluate(subject_id: &str, truth: &[PlanarPoint], schedule: &OnOffSchedule, methods: &[Method], cfg: &EvalConfig) -> Result<ErrorTable> {
    check_truth_density(truth)?;
    let names: Vec<String> = methods.iter().map(|m| m.to_string()).collect();
    let mut table = ErrorTable::new(&cfg.measures, &names);

    let truth_trace = segment(subject_id, None, truth, &cfg.segmentation)?;
    let truth_ctx = FeatureContext::from_trace(&truth_trace, cfg.features);
    let truth_days = mean_daily_features(&truth_trace, &Method::Linear, 1, cfg.seed, &truth_ctx)?;

    let degraded_points = impose_missingness(truth, schedule);
    if degraded_points.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let degraded = segment(subject_id, None, &degraded_points, &cfg.segmentation)?;
    let ctx = FeatureContext::from_trace(&degraded, cfg.features);
    for (j, method) in methods.iter().enumerate() {
        let est = mean_daily_features(&degraded, method, cfg.replicates, cfg.seed, &ctx)?;
        for (day, e) in &est {
            if let Some(t) = truth_days.get(day) {
                table.record(j, e, t);
            }
        }
    }
    Ok(table)
}

/// Projects GPS records onto their own frame and scores them.
pub fn evaluate_records(subject_id: &str, truth: &[GpsRecord], schedule: &OnOffSchedule, methods: &[Method], cfg: &EvalConfig) -> Result<ErrorTable> {
    check_truth_density(truth)?;
    let frame = ProjectionFrame::build(truth)?;
    let points = frame.project_all(truth)?;
    evaluate(subject_id, &points, schedule, methods, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PltParse {
    pub records: Vec<GpsRecord>,
    pub malformed: usize,
}

fn parse_plt_line(line: &str) -> Option<GpsRecord> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() < 7 {
        return None;
    }
    let lat: f64 = f[0].parse().ok()?;
    let lon: f64 = f[1].parse().ok()?;
    let date = NaiveDate::parse_from_str(f[5], "%Y-%m-%d").ok()?;
    let time = NaiveTime::parse_from_str(f[6], "%H:%M:%S").ok()?;
    let t = date.and_time(time).and_utc().timestamp() as f64;
    GpsRecord::new(t, lat, lon, None).ok()
}

/// Parses a trajectory file of six header lines followed by
/// `lat,lon,0,altitude,days,date,time` rows in UTC.
pub fn parse_plt(bytes: &[u8]) -> Result<PltParse> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines = text.lines();
    for i in 0..6 {
        if lines.next().is_none() {
            return Err(Error::NotPlt(format!("only {i} header lines")));
        }
    }
    let mut out = PltParse { records: Vec::new(), malformed: 0 };
    for line in lines.filter(|l| !l.trim().is_empty()) {
        match parse_plt_line(line) {
            Some(r) => out.records.push(r),
            None => out.malformed += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PltFile {
    pub user: String,
    pub path: PathBuf,
    pub parsed: PltParse,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    v.sort();
    Ok(v)
}

/// Reads every `<user>/Trajectory/*.plt` under `root` (or under
/// `root/Data` when present), in path order.
pub fn read_plt_tree(root: &Path) -> Result<Vec<PltFile>> {
    let data = if root.join("Data").is_dir() { root.join("Data") } else { root.to_path_buf() };
    let mut out = Vec::new();
    for user_dir in sorted_entries(&data)?.into_iter().filter(|p| p.is_dir()) {
        let traj = user_dir.join("Trajectory");
        if !traj.is_dir() {
            continue;
        }
        let user = user_dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for path in sorted_entries(&traj)? {
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("plt")) {
                let parsed = parse_plt(&fs::read(&path)?)?;
                out.push(PltFile { user: user.clone(), path, parsed });
            }
        }
    }
    Ok(out)
}

/// Settings of the synthetic commuter model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommuterConfig {
    pub days: usize,
    /// Local calendar day of the first day.
    pub first_day: i64,
    pub sample_s: f64,
    pub gps_noise_m: f64,
    pub speed_mps: f64,
    pub route_jitter_m: f64,
}

impl Default for CommuterConfig {
    fn default() -> Self {
        CommuterConfig { days: 3, first_day: 4, sample_s: 10.0, gps_noise_m: 2.0, speed_mps: 8.0, route_jitter_m: 40.0 }
    }
}

struct Path2 {
    pts: Vec<(f64, f64)>,
}

impl Path2 {
    fn reversed(&self) -> Path2 {
        Path2 { pts: self.pts.iter().rev().copied().collect() }
    }
}

/// A winding route from `a` to `b` with a turn every 60 to 100 seconds.
fn winding_route<R: Rng>(a: (f64, f64), b: (f64, f64), speed: f64, rng: &mut R) -> Path2 {
    let dist = (b.0 - a.0).hypot(b.1 - a.1);
    let mut pts = vec![a];
    let mut cur = a;
    loop {
        let left = (b.0 - cur.0).hypot(b.1 - cur.1);
        let leg = rng.random_range(60.0..100.0) * speed;
        if left <= leg * 1.2 {
            break;
        }
        let heading = (b.1 - cur.1).atan2(b.0 - cur.0) + rng.random_range(-0.9..0.9);
        cur = (cur.0 + leg * heading.cos(), cur.1 + leg * heading.sin());
        pts.push(cur);
        if pts.len() > 4 + (dist / (40.0 * speed)) as usize * 4 {
            break;
        }
    }
    pts.push(b);
    Path2 { pts }
}

struct Sampler<'a, R: Rng> {
    out: Vec<PlanarPoint>,
    t: f64,
    pos: (f64, f64),
    cfg: &'a CommuterConfig,
    rng: &'a mut R,
}

impl<R: Rng> Sampler<'_, R> {
    fn emit(&mut self, x: f64, y: f64, t: f64) {
        let nx: f64 = self.rng.sample(StandardNormal);
        let ny: f64 = self.rng.sample(StandardNormal);
        self.out.push(PlanarPoint::new(x + self.cfg.gps_noise_m * nx, y + self.cfg.gps_noise_m * ny, t));
    }

    /// Stay at the current position until `until`.
    fn stay(&mut self, until: f64) {
        while self.t < until {
            let (x, y) = self.pos;
            self.emit(x, y, self.t);
            self.t += self.cfg.sample_s;
        }
    }

    /// Travel along `route` at `speed`, each waypoint displaced by jitter.
    fn travel(&mut self, route: &Path2, speed: f64, jitter: f64) {
        let n = route.pts.len();
        let mut pts: Vec<(f64, f64)> = route.pts.clone();
        for p in pts.iter_mut().take(n - 1).skip(1) {
            let jx: f64 = self.rng.sample(StandardNormal);
            let jy: f64 = self.rng.sample(StandardNormal);
            *p = (p.0 + jitter * jx, p.1 + jitter * jy);
        }
        pts[0] = self.pos;
        let mut clock = self.t;
        let mut next = self.t;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            let dur = len / speed;
            while next < clock + dur {
                let f = (next - clock) / dur;
                self.emit(a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1), next);
                next += self.cfg.sample_s;
            }
            clock += dur;
        }
        self.t = next;
        self.pos = pts[n - 1];
    }
}

/// A dense multi-day planar trace of someone living at the origin who
/// commutes to work on weekdays, walks to lunch, sometimes runs an evening
/// errand, and makes one outing on weekend days.
pub fn synthetic_commuter(seed: u64, cfg: &CommuterConfig) -> Vec<PlanarPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let home = (0.0, 0.0);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let dist = rng.random_range(3000.0..8000.0);
    let work = (dist * angle.cos(), dist * angle.sin());
    let lunch_a = rng.random_range(0.0..std::f64::consts::TAU);
    let lunch = (work.0 + 400.0 * lunch_a.cos(), work.1 + 400.0 * lunch_a.sin());
    let to_work = winding_route(home, work, cfg.speed_mps, &mut rng);
    let from_work = to_work.reversed();
    let walk = Path2 { pts: vec![work, ((work.0 + lunch.0) / 2.0 + 60.0, (work.1 + lunch.1) / 2.0), lunch] };
    let walk_back = walk.reversed();

    let t0 = cfg.first_day as f64 * DAY_S;
    let mut s = Sampler { out: Vec::new(), t: t0, pos: home, cfg, rng: &mut rng };
    for d in 0..cfg.days {
        let day = cfg.first_day + d as i64;
        let base = day as f64 * DAY_S;
        let weekend = crate::features::is_weekend(day);
        if !weekend {
            let leave = base + 8.0 * 3600.0 + s.rng.random_range(-1800.0..1800.0);
            s.stay(leave);
            s.travel(&to_work, cfg.speed_mps, cfg.route_jitter_m);
            let u = s.rng.random_range(-900.0..900.0);
            s.stay(base + 12.0 * 3600.0 + u);
            s.travel(&walk, 1.4, 5.0);
            let back = s.t + s.rng.random_range(1800.0..3600.0);
            s.stay(back);
            s.travel(&walk_back, 1.4, 5.0);
            let u = s.rng.random_range(-3600.0..3600.0);
            s.stay(base + 17.0 * 3600.0 + u);
            s.travel(&from_work, cfg.speed_mps, cfg.route_jitter_m);
            if s.rng.random::<f64>() < 0.5 {
                let a = s.rng.random_range(0.0..std::f64::consts::TAU);
                let r = s.rng.random_range(1000.0..2000.0);
                let shop = (r * a.cos(), r * a.sin());
                let go = winding_route(home, shop, 5.0, s.rng);
                let back = go.reversed();
                let u = s.rng.random_range(1800.0..3600.0);
                s.stay(s.t + u);
                s.travel(&go, 5.0, 20.0);
                let u = s.rng.random_range(1800.0..3600.0);
                s.stay(s.t + u);
                s.travel(&back, 5.0, 20.0);
            }
        } else {
            let u = s.rng.random_range(-3600.0..3600.0);
            s.stay(base + 13.0 * 3600.0 + u);
            let a = s.rng.random_range(0.0..std::f64::consts::TAU);
            let r = s.rng.random_range(2000.0..5000.0);
            let park = (r * a.cos(), r * a.sin());
            let go = winding_route(home, park, cfg.speed_mps, s.rng);
            let back = go.reversed();
            s.travel(&go, cfg.speed_mps, cfg.route_jitter_m);
            let u = s.rng.random_range(3600.0..7200.0);
            s.stay(s.t + u);
            s.travel(&back, cfg.speed_mps, cfg.route_jitter_m);
        }
        s.stay(base + DAY_S);
    }
    s.out
}
