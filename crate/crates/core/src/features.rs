//! Daily mobility measures.
//!
//! Measures are computed per local calendar day from a gap-free trace. Time
//! spent is integrated exactly along the piecewise-linear path, so flights
//! contribute in proportion to the time they spend in each region.
//!
//! Significant locations are pause-time clusters built by centroid-linkage
//! agglomeration; home is the one holding the most night-time pause time.
//! Routine measures compare hourly location-occupancy profiles between days.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imputer::confidence_interval;
use crate::kernels::DAY_S;
use crate::segmentation::{Event, EventKind, MobilityTrace};

/// Identifier of the measure definitions implemented here.
pub const FEATURE_DEFINITION_VERSION: &str = "mobility-features/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    Hometime,
    DistTravelled,
    RoG,
    MaxDiam,
    MaxHomeDist,
    SigLocsVisited,
    AvgFlightLen,
    StdFlightLen,
    AvgFlightDur,
    StdFlightDur,
    FracPause,
    SigLocEntropy,
    MinsMissing,
    CircdnRtn,
    WkEndDayRtn,
}

impl Measure {
    pub const ALL: [Measure; 15] = [
        Measure::Hometime,
        Measure::DistTravelled,
        Measure::RoG,
        Measure::MaxDiam,
        Measure::MaxHomeDist,
        Measure::SigLocsVisited,
        Measure::AvgFlightLen,
        Measure::StdFlightLen,
        Measure::AvgFlightDur,
        Measure::StdFlightDur,
        Measure::FracPause,
        Measure::SigLocEntropy,
        Measure::MinsMissing,
        Measure::CircdnRtn,
        Measure::WkEndDayRtn,
    ];

    /// Measures that need neither a home nor significant locations.
    pub const HOME_FREE: [Measure; 8] = [
        Measure::DistTravelled,
        Measure::RoG,
        Measure::MaxDiam,
        Measure::AvgFlightLen,
        Measure::StdFlightLen,
        Measure::AvgFlightDur,
        Measure::StdFlightDur,
        Measure::FracPause,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Hometime => "Hometime",
            Measure::DistTravelled => "DistTravelled",
            Measure::RoG => "RoG",
            Measure::MaxDiam => "MaxDiam",
            Measure::MaxHomeDist => "MaxHomeDist",
            Measure::SigLocsVisited => "SigLocsVisited",
            Measure::AvgFlightLen => "AvgFlightLen",
            Measure::StdFlightLen => "StdFlightLen",
            Measure::AvgFlightDur => "AvgFlightDur",
            Measure::StdFlightDur => "StdFlightDur",
            Measure::FracPause => "FracPause",
            Measure::SigLocEntropy => "SigLocEntropy",
            Measure::MinsMissing => "MinsMissing",
            Measure::CircdnRtn => "CircdnRtn",
            Measure::WkEndDayRtn => "WkEndDayRtn",
        }
    }

    pub fn index(self) -> usize {
        Measure::ALL.iter().position(|&m| m == self).unwrap()
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown measure {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub home_radius_m: f64,
    pub sigloc_radius_m: f64,
    pub sigloc_min_s: f64,
    pub night_start_h: f64,
    pub night_end_h: f64,
    /// Fixed offset of local time from UTC, in seconds.
    pub utc_offset_s: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            home_radius_m: 200.0,
            sigloc_radius_m: 200.0,
            sigloc_min_s: 1800.0,
            night_start_h: 0.0,
            night_end_h: 6.0,
            utc_offset_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificantLocation {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub total_pause_s: f64,
    pub is_home: bool,
}

impl SignificantLocation {
    fn dist(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

#[derive(Debug, Clone, Copy)]
struct Cluster {
    x: f64,
    y: f64,
    w: f64,
}

/// Centroid-linkage agglomeration of pause locations, weighted by pause
/// time. Clusters merge while the closest pair of centroids is within
/// `sigloc_radius_m`; those holding at least `sigloc_min_s` of pause time
/// are returned, largest first.
pub fn find_significant_locations<'a, I>(traces: I, cfg: &FeatureConfig) -> Vec<SignificantLocation>
where
    I: IntoIterator<Item = &'a MobilityTrace>,
{
    let mut clusters: Vec<Cluster> = traces
        .into_iter()
        .flat_map(|tr| tr.events.iter())
        .filter(|e| e.kind == EventKind::Pause && e.dt > 0.0)
        .map(|e| Cluster { x: e.x, y: e.y, w: e.dt })
        .collect();
    let n = clusters.len();
    let mut alive = vec![true; n];
    let d = |a: &Cluster, b: &Cluster| (a.x - b.x).hypot(a.y - b.y);
    let nearest = |clusters: &[Cluster], alive: &[bool], i: usize| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..clusters.len() {
            if j != i && alive[j] {
                let dij = d(&clusters[i], &clusters[j]);
                if dij < best.1 {
                    best = (j, dij);
                }
            }
        }
        best
    };
    let mut nn: Vec<(usize, f64)> = (0..n).map(|i| nearest(&clusters, &alive, i)).collect();
    loop {
        let mut pick = None;
        let mut best = f64::INFINITY;
        for i in 0..n {
            if alive[i] && nn[i].1 < best {
                best = nn[i].1;
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        if best > cfg.sigloc_radius_m {
            break;
        }
        let j = nn[i].0;
        let (a, b) = (clusters[i], clusters[j]);
        let w = a.w + b.w;
        clusters[i] = Cluster { x: (a.x * a.w + b.x * b.w) / w, y: (a.y * a.w + b.y * b.w) / w, w };
        alive[j] = false;
        nn[i] = nearest(&clusters, &alive, i);
        for k in 0..n {
            if !alive[k] || k == i {
                continue;
            }
            if nn[k].0 == i || nn[k].0 == j {
                nn[k] = nearest(&clusters, &alive, k);
            } else {
                let dk = d(&clusters[k], &clusters[i]);
                if dk < nn[k].1 {
                    nn[k] = (i, dk);
                }
            }
        }
    }
    let mut sig: Vec<Cluster> = (0..n).filter(|&i| alive[i] && clusters[i].w >= cfg.sigloc_min_s).map(|i| clusters[i]).collect();
    sig.sort_by(|a, b| b.w.total_cmp(&a.w).then(a.x.total_cmp(&b.x)).then(a.y.total_cmp(&b.y)));
    sig.into_iter()
        .enumerate()
        .map(|(id, c)| SignificantLocation { id, x: c.x, y: c.y, total_pause_s: c.w, is_home: false })
        .collect()
}

/// Nearest significant location within `radius` of `(x, y)`.
fn assign(locations: &[SignificantLocation], x: f64, y: f64, radius: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, loc) in locations.iter().enumerate() {
        let d = loc.dist(x, y);
        if d <= radius && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((k, d));
        }
    }
    best.map(|(k, _)| k)
}

/// Seconds of `[t0, t1)` falling inside the local night window.
fn night_overlap(t0: f64, t1: f64, cfg: &FeatureConfig) -> f64 {
    let (a, b) = (t0 + cfg.utc_offset_s, t1 + cfg.utc_offset_s);
    let (ns, ne) = (cfg.night_start_h * 3600.0, cfg.night_end_h * 3600.0);
    let mut total = 0.0;
    let mut day = (a / DAY_S).floor() - 1.0;
    while day * DAY_S <= b {
        let base = day * DAY_S;
        let windows: &[(f64, f64)] = if ns <= ne { &[(ns, ne)] } else { &[(0.0, ne), (ns, DAY_S)] };
        for &(ws, we) in windows {
            let lo = a.max(base + ws);
            let hi = b.min(base + we);
            if hi > lo {
                total += hi - lo;
            }
        }
        day += 1.0;
    }
    total
}

/// The location holding the most night-time pause time; ties go to the
/// larger total pause time, then the lowest id. Falls back to total pause
/// time when no pause touches the night window.
pub fn estimate_home<'a, I>(locations: &[SignificantLocation], traces: I, cfg: &FeatureConfig) -> Option<SignificantLocation>
where
    I: IntoIterator<Item = &'a MobilityTrace>,
{
    if locations.is_empty() {
        return None;
    }
    let mut night = vec![0.0; locations.len()];
    for tr in traces {
        for e in tr.events.iter().filter(|e| e.kind == EventKind::Pause) {
            if let Some(k) = assign(locations, e.x, e.y, cfg.sigloc_radius_m) {
                night[k] += night_overlap(e.t, e.t_end(), cfg);
            }
        }
    }
    let mut best = 0;
    for k in 1..locations.len() {
        let better = night[k] > night[best]
            || (night[k] == night[best] && locations[k].total_pause_s > locations[best].total_pause_s)
            || (night[k] == night[best]
                && locations[k].total_pause_s == locations[best].total_pause_s
                && locations[k].id < locations[best].id);
        if better {
            best = k;
        }
    }
    Some(SignificantLocation { is_home: true, ..locations[best] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyFeatureVector {
    /// Local calendar day, counted from 1970-01-01.
    pub day: i64,
    pub valid: bool,
    pub hometime_min: f64,
    pub dist_travelled_m: f64,
    pub rog_m: f64,
    pub max_diam_m: f64,
    pub max_home_dist_m: f64,
    pub sig_locs_visited: f64,
    pub avg_flight_len_m: f64,
    pub std_flight_len_m: f64,
    pub avg_flight_dur_s: f64,
    pub std_flight_dur_s: f64,
    pub frac_pause: f64,
    pub sig_loc_entropy: f64,
    pub mins_missing: f64,
    pub circdn_rtn: f64,
    pub wkend_day_rtn: f64,
    /// Per-measure `(lo, hi)` in `Measure::ALL` order.
    pub intervals: Option<Vec<(f64, f64)>>,
}

impl DailyFeatureVector {
    fn empty(day: i64) -> Self {
        DailyFeatureVector {
            day,
            valid: true,
            hometime_min: 0.0,
            dist_travelled_m: 0.0,
            rog_m: 0.0,
            max_diam_m: 0.0,
            max_home_dist_m: 0.0,
            sig_locs_visited: 0.0,
            avg_flight_len_m: 0.0,
            std_flight_len_m: 0.0,
            avg_flight_dur_s: 0.0,
            std_flight_dur_s: 0.0,
            frac_pause: 0.0,
            sig_loc_entropy: 0.0,
            mins_missing: 0.0,
            circdn_rtn: 0.0,
            wkend_day_rtn: 0.0,
            intervals: None,
        }
    }

    /// A day without any events: everything missing.
    pub fn invalid(day: i64) -> Self {
        let mut v = Self::empty(day);
        for m in Measure::ALL {
            v.set(m, f64::NAN);
        }
        v.valid = false;
        v.mins_missing = DAY_S / 60.0;
        v
    }

    pub fn get(&self, m: Measure) -> f64 {
        match m {
            Measure::Hometime => self.hometime_min,
            Measure::DistTravelled => self.dist_travelled_m,
            Measure::RoG => self.rog_m,
            Measure::MaxDiam => self.max_diam_m,
            Measure::MaxHomeDist => self.max_home_dist_m,
            Measure::SigLocsVisited => self.sig_locs_visited,
            Measure::AvgFlightLen => self.avg_flight_len_m,
            Measure::StdFlightLen => self.std_flight_len_m,
            Measure::AvgFlightDur => self.avg_flight_dur_s,
            Measure::StdFlightDur => self.std_flight_dur_s,
            Measure::FracPause => self.frac_pause,
            Measure::SigLocEntropy => self.sig_loc_entropy,
            Measure::MinsMissing => self.mins_missing,
            Measure::CircdnRtn => self.circdn_rtn,
            Measure::WkEndDayRtn => self.wkend_day_rtn,
        }
    }

    pub fn set(&mut self, m: Measure, v: f64) {
        let slot = match m {
            Measure::Hometime => &mut self.hometime_min,
            Measure::DistTravelled => &mut self.dist_travelled_m,
            Measure::RoG => &mut self.rog_m,
            Measure::MaxDiam => &mut self.max_diam_m,
            Measure::MaxHomeDist => &mut self.max_home_dist_m,
            Measure::SigLocsVisited => &mut self.sig_locs_visited,
            Measure::AvgFlightLen => &mut self.avg_flight_len_m,
            Measure::StdFlightLen => &mut self.std_flight_len_m,
            Measure::AvgFlightDur => &mut self.avg_flight_dur_s,
            Measure::StdFlightDur => &mut self.std_flight_dur_s,
            Measure::FracPause => &mut self.frac_pause,
            Measure::SigLocEntropy => &mut self.sig_loc_entropy,
            Measure::MinsMissing => &mut self.mins_missing,
            Measure::CircdnRtn => &mut self.circdn_rtn,
            Measure::WkEndDayRtn => &mut self.wkend_day_rtn,
        };
        *slot = v;
    }

    pub fn interval(&self, m: Measure) -> Option<(f64, f64)> {
        self.intervals.as_ref().map(|iv| iv[m.index()])
    }
}

/// Shared per-subject context for daily measures.
#[derive(Debug, Clone, Default)]
pub struct FeatureContext {
    pub locations: Vec<SignificantLocation>,
    pub home: Option<SignificantLocation>,
    pub cfg: FeatureConfig,
}

impl FeatureContext {
    /// Locations and home estimated from `observed`.
    pub fn from_trace(observed: &MobilityTrace, cfg: FeatureConfig) -> Self {
        let mut locations = find_significant_locations([observed], &cfg);
        let home = estimate_home(&locations, [observed], &cfg);
        if let Some(h) = home {
            locations[h.id].is_home = true;
        }
        FeatureContext { locations, home, cfg }
    }

    /// No home and no significant locations.
    pub fn without_locations(cfg: FeatureConfig) -> Self {
        FeatureContext { locations: Vec::new(), home: None, cfg }
    }
}

pub fn local_day(t: f64, utc_offset_s: f64) -> i64 {
    ((t + utc_offset_s) / DAY_S).floor() as i64
}

/// Start of local day `day`, in UTC seconds.
pub fn day_start(day: i64, utc_offset_s: f64) -> f64 {
    day as f64 * DAY_S - utc_offset_s
}

/// Saturday or Sunday.
pub fn is_weekend(day: i64) -> bool {
    // 1970-01-01 was a Thursday
    let dow = (day + 4).rem_euclid(7);
    dow == 0 || dow == 6
}

fn clip(e: &Event, t0: f64, t1: f64) -> Option<Event> {
    let a = e.t.max(t0);
    let b = e.t_end().min(t1);
    if !(b > a) {
        return None;
    }
    if a == e.t && b == e.t_end() {
        return Some(*e);
    }
    let (xa, ya) = e.position_at(a);
    let (xb, yb) = e.position_at(b);
    let frac = (b - a) / e.dt;
    Some(Event { x: xa, y: ya, t: a, dx: xb - xa, dy: yb - ya, dt: b - a, missing_s: e.missing_s * frac, ..*e })
}

/// Events of `trace` clipped to local calendar days.
pub fn split_days(trace: &MobilityTrace, utc_offset_s: f64) -> BTreeMap<i64, Vec<Event>> {
    let mut days: BTreeMap<i64, Vec<Event>> = BTreeMap::new();
    for e in &trace.events {
        let first = local_day(e.t, utc_offset_s);
        let last = local_day(e.t_end(), utc_offset_s);
        for day in first..=last {
            let s = day_start(day, utc_offset_s);
            if let Some(piece) = clip(e, s, s + DAY_S) {
                days.entry(day).or_default().push(piece);
            }
        }
    }
    days
}

/// Seconds the segment spends within `r` of `(hx, hy)`.
fn time_within(e: &Event, hx: f64, hy: f64, r: f64) -> f64 {
    let (px, py) = (e.x - hx, e.y - hy);
    let a = e.dx * e.dx + e.dy * e.dy;
    let c = px * px + py * py - r * r;
    if a == 0.0 {
        return if c <= 0.0 { e.dt } else { 0.0 };
    }
    let b = 2.0 * (e.dx * px + e.dy * py);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return 0.0;
    }
    let sq = disc.sqrt();
    let s1 = ((-b - sq) / (2.0 * a)).max(0.0);
    let s2 = ((-b + sq) / (2.0 * a)).min(1.0);
    (s2 - s1).max(0.0) * e.dt
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Time-weighted RMS distance of the path from its time-weighted centroid.
fn radius_of_gyration(events: &[Event]) -> f64 {
    let total: f64 = events.iter().map(|e| e.dt).sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let (ox, oy) = (events[0].x, events[0].y);
    let (mut sx, mut sy) = (0.0, 0.0);
    for e in events {
        sx += e.dt * (e.x - ox + e.dx / 2.0);
        sy += e.dt * (e.y - oy + e.dy / 2.0);
    }
    let (cx, cy) = (sx / total, sy / total);
    let mut ss = 0.0;
    for e in events {
        let (qx, qy) = (e.x - ox - cx, e.y - oy - cy);
        let (mx, my) = (qx + e.dx / 2.0, qy + e.dy / 2.0);
        ss += e.dt * (mx * mx + my * my + (e.dx * e.dx + e.dy * e.dy) / 12.0);
    }
    (ss / total).sqrt()
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Largest distance between any two of `points`, which must be sorted and
/// deduplicated. The farthest pair lies on the convex hull.
fn max_pairwise(points: &[(f64, f64)]) -> f64 {
    let hull: Vec<(f64, f64)> = if points.len() <= 3 {
        points.to_vec()
    } else {
        let mut lower: Vec<(f64, f64)> = Vec::new();
        for &p in points {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<(f64, f64)> = Vec::new();
        for &p in points.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        lower
    };
    let mut best: f64 = 0.0;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            best = best.max((a.0 - b.0).hypot(a.1 - b.1));
        }
    }
    best
}

/// Hourly occupancy shares over `locations.len() + 1` slots (the last is
/// everything else). `None` marks hours without any covered time.
pub type HourlyProfile = Vec<Option<Vec<f64>>>;

fn hourly_profile(events: &[Event], day: i64, ctx: &FeatureContext) -> HourlyProfile {
    let k = ctx.locations.len();
    let mut occ = vec![vec![0.0; k + 1]; 24];
    let start = day_start(day, ctx.cfg.utc_offset_s);
    for e in events {
        let slot = match e.kind {
            EventKind::Pause => assign(&ctx.locations, e.x, e.y, ctx.cfg.sigloc_radius_m).unwrap_or(k),
            EventKind::Flight => k,
        };
        let mut t = e.t;
        while t < e.t_end() {
            let hour = (((t - start) / 3600.0).floor() as i64).clamp(0, 23) as usize;
            let hour_end = start + (hour as f64 + 1.0) * 3600.0;
            let next = e.t_end().min(hour_end);
            if next <= t {
                break;
            }
            occ[hour][slot] += next - t;
            t = next;
        }
    }
    occ.into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            (total > 0.0).then(|| row.iter().map(|v| v / total).collect())
        })
        .collect()
}

/// Mean over commonly covered hours of the overlap `sum min(p, q)`.
pub fn routine_similarity(a: &HourlyProfile, b: &HourlyProfile) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (pa, pb) in a.iter().zip(b) {
        if let (Some(p), Some(q)) = (pa, pb) {
            sum += p.iter().zip(q).map(|(x, y)| x.min(*y)).sum::<f64>();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// All measures of one day except the two routine measures, which need the
/// other days of the study.
pub fn compute_daily_features(events: &[Event], day: i64, ctx: &FeatureContext) -> DailyFeatureVector {
    if events.is_empty() {
        return DailyFeatureVector::invalid(day);
    }
    let cfg = &ctx.cfg;
    let mut v = DailyFeatureVector::empty(day);

    let mut endpoints: Vec<(f64, f64)> = Vec::with_capacity(2 * events.len());
    for e in events {
        endpoints.push((e.x, e.y));
        endpoints.push((e.x + e.dx, e.y + e.dy));
    }
    endpoints.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    endpoints.dedup();

    match &ctx.home {
        Some(h) => {
            v.hometime_min = events.iter().map(|e| time_within(e, h.x, h.y, cfg.home_radius_m)).sum::<f64>() / 60.0;
            v.max_home_dist_m = endpoints.iter().map(|p| h.dist(p.0, p.1)).fold(0.0, f64::max);
        }
        None => {
            v.hometime_min = f64::NAN;
            v.max_home_dist_m = f64::NAN;
        }
    }

    let flights: Vec<&Event> = events.iter().filter(|e| e.kind == EventKind::Flight).collect();
    let lengths: Vec<f64> = flights.iter().map(|e| e.length()).collect();
    let durations: Vec<f64> = flights.iter().map(|e| e.dt).collect();
    v.dist_travelled_m = lengths.iter().sum();
    (v.avg_flight_len_m, v.std_flight_len_m) = mean_std(&lengths);
    (v.avg_flight_dur_s, v.std_flight_dur_s) = mean_std(&durations);
    v.rog_m = radius_of_gyration(events);
    v.max_diam_m = max_pairwise(&endpoints);

    let k = ctx.locations.len();
    let mut pause_time = vec![0.0; k + 1];
    for e in events.iter().filter(|e| e.kind == EventKind::Pause) {
        let slot = assign(&ctx.locations, e.x, e.y, cfg.sigloc_radius_m).unwrap_or(k);
        pause_time[slot] += e.dt;
    }
    let total_pause: f64 = pause_time.iter().sum();
    v.frac_pause = total_pause / DAY_S;
    v.sig_locs_visited = pause_time[..k].iter().filter(|&&t| t > 0.0).count() as f64;
    v.sig_loc_entropy = if total_pause > 0.0 {
        -pause_time
            .iter()
            .filter(|&&t| t > 0.0)
            .map(|&t| {
                let p = t / total_pause;
                p * p.ln()
            })
            .sum::<f64>()
    } else {
        0.0
    };
    let observed: f64 = events.iter().map(|e| e.observed_s()).sum();
    v.mins_missing = (DAY_S - observed).max(0.0) / 60.0;
    v
}

/// Daily measures for every local day the trace touches, including the
/// routine measures.
pub fn compute_features(trace: &MobilityTrace, ctx: &FeatureContext) -> Vec<DailyFeatureVector> {
    let days = split_days(trace, ctx.cfg.utc_offset_s);
    let mut vectors = Vec::with_capacity(days.len());
    let mut profiles = Vec::with_capacity(days.len());
    for (&day, events) in &days {
        vectors.push(compute_daily_features(events, day, ctx));
        profiles.push(hourly_profile(events, day, ctx));
    }
    let n = vectors.len();
    for i in 0..n {
        let (mut all, mut n_all) = (0.0, 0usize);
        let (mut same, mut n_same) = (0.0, 0usize);
        for j in 0..n {
            if i == j {
                continue;
            }
            let s = routine_similarity(&profiles[i], &profiles[j]);
            all += s;
            n_all += 1;
            if is_weekend(vectors[i].day) == is_weekend(vectors[j].day) {
                same += s;
                n_same += 1;
            }
        }
        vectors[i].circdn_rtn = if n_all > 0 { all / n_all as f64 } else { 0.0 };
        vectors[i].wkend_day_rtn = if n_same > 0 { same / n_same as f64 } else { 0.0 };
    }
    vectors
}

/// Point estimates (replicate means) with order-statistic intervals.
pub fn feature_intervals(replicates: &[DailyFeatureVector], alpha: f64) -> Result<DailyFeatureVector> {
    let first = replicates.first().ok_or_else(|| Error::InvalidParameter("no replicate vectors".into()))?;
    if replicates.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 replicates, got {}", replicates.len())));
    }
    let mut out = first.clone();
    out.valid = replicates.iter().all(|r| r.valid);
    let mut intervals = Vec::with_capacity(Measure::ALL.len());
    for m in Measure::ALL {
        let values: Vec<f64> = replicates.iter().map(|r| r.get(m)).collect();
        out.set(m, values.iter().sum::<f64>() / values.len() as f64);
        if values.iter().any(|v| v.is_nan()) {
            intervals.push((f64::NAN, f64::NAN));
        } else {
            intervals.push(confidence_interval(&values, alpha)?);
        }
    }
    out.intervals = Some(intervals);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn trace(events: Vec<Event>) -> MobilityTrace {
        MobilityTrace { subject_id: "s".into(), frame: None, events, gaps: vec![] }
    }

    fn cfg() -> FeatureConfig {
        FeatureConfig::default()
    }

    fn home_at(x: f64, y: f64) -> SignificantLocation {
        SignificantLocation { id: 0, x, y, total_pause_s: DAY_S, is_home: true }
    }

    // Brute-force centroid-linkage: repeatedly merge the globally closest
    // pair until none is within the radius.
    fn agglomerate_oracle(points: &[(f64, f64)], radius: f64) -> usize {
        let mut cl: Vec<(f64, f64, f64)> = points.iter().map(|p| (p.0, p.1, 1.0)).collect();
        loop {
            let mut best = (0, 0, f64::INFINITY);
            for i in 0..cl.len() {
                for j in i + 1..cl.len() {
                    let d = (cl[i].0 - cl[j].0).hypot(cl[i].1 - cl[j].1);
                    if d < best.2 {
                        best = (i, j, d);
                    }
                }
            }
            if best.2 > radius {
                return cl.len();
            }
            let (a, b) = (cl[best.0], cl[best.1]);
            let w = a.2 + b.2;
            cl[best.0] = ((a.0 * a.2 + b.0 * b.2) / w, (a.1 * a.2 + b.1 * b.2) / w, w);
            cl.remove(best.1);
        }
    }

    #[test]
    fn one_place_one_location() {
        let tr = trace(vec![Event::pause(5.0, 5.0, 0.0, 4000.0), Event::flight(5.0, 5.0, 4000.0, 10.0, 0.0, 10.0), Event::pause(5.0, 5.0, 4010.0, 4000.0)]);
        let locs = find_significant_locations([&tr], &cfg());
        assert_eq!(locs.len(), 1);
        assert_eq!((locs[0].x, locs[0].y), (5.0, 5.0));
        assert_eq!(locs[0].total_pause_s, 8000.0);
    }

    #[test]
    fn far_groups_are_separate() {
        let tr = trace(vec![Event::pause(0.0, 0.0, 0.0, 4000.0), Event::flight(0.0, 0.0, 4000.0, 10_000.0, 0.0, 1000.0), Event::pause(10_000.0, 0.0, 5000.0, 4000.0)]);
        assert_eq!(find_significant_locations([&tr], &cfg()).len(), 2);
    }

    #[test]
    fn triangle_clustering_depends_on_radius() {
        let s = 150.0;
        let pts = [(0.0, 0.0), (s, 0.0), (s / 2.0, s * 3f64.sqrt() / 2.0)];
        let tr = trace(pts.iter().enumerate().map(|(i, p)| Event::pause(p.0, p.1, i as f64 * 5000.0, 4000.0)).collect());
        for (radius, expected) in [(200.0, 1), (100.0, 3)] {
            assert_eq!(agglomerate_oracle(&pts, radius), expected);
            let c = FeatureConfig { sigloc_radius_m: radius, ..cfg() };
            assert_eq!(find_significant_locations([&tr], &c).len(), expected);
        }
    }

    #[test]
    fn no_pauses_no_locations() {
        let tr = trace(vec![Event::flight(0.0, 0.0, 0.0, 100.0, 0.0, 100.0)]);
        assert!(find_significant_locations([&tr], &cfg()).is_empty());
        assert!(estimate_home(&[], [&tr], &cfg()).is_none());
    }

    #[test]
    fn home_selection() {
        let a = SignificantLocation { id: 0, x: 0.0, y: 0.0, total_pause_s: 5000.0, is_home: false };
        let b = SignificantLocation { id: 1, x: 5000.0, y: 0.0, total_pause_s: 9000.0, is_home: false };
        // single location
        let tr = trace(vec![Event::pause(0.0, 0.0, 12.0 * 3600.0, 5000.0)]);
        assert_eq!(estimate_home(&[a], [&tr], &cfg()).unwrap().id, 0);
        // a holds all night time
        let tr = trace(vec![Event::pause(0.0, 0.0, 3600.0, 5000.0), Event::pause(5000.0, 0.0, 12.0 * 3600.0, 9000.0)]);
        let h = estimate_home(&[a, b], [&tr], &cfg()).unwrap();
        assert_eq!(h.id, 0);
        assert!(h.is_home);
        // equal night time, b has more total pause time
        let tr = trace(vec![
            Event::pause(0.0, 0.0, 3600.0, 1800.0),
            Event::pause(5000.0, 0.0, DAY_S + 3600.0, 1800.0),
        ]);
        assert_eq!(estimate_home(&[a, b], [&tr], &cfg()).unwrap().id, 1);
    }

    #[test]
    fn whole_day_at_home() {
        let ev = vec![Event::pause(10.0, 10.0, 0.0, DAY_S)];
        let ctx = FeatureContext::from_trace(&trace(ev.clone()), cfg());
        let v = compute_daily_features(&ev, 0, &ctx);
        assert_eq!(v.hometime_min, 1440.0);
        assert_eq!(v.dist_travelled_m, 0.0);
        assert_eq!(v.rog_m, 0.0);
        assert_eq!(v.frac_pause, 1.0);
        assert_eq!(v.sig_loc_entropy, 0.0);
        assert_eq!(v.sig_locs_visited, 1.0);
        assert_eq!(v.mins_missing, 0.0);
    }

    #[test]
    fn single_flight_statistics() {
        let ev = vec![Event::pause(0.0, 0.0, 0.0, 40_000.0), Event::flight(0.0, 0.0, 40_000.0, 60.0, 80.0, 100.0), Event::pause(60.0, 80.0, 40_100.0, 46_300.0)];
        let ctx = FeatureContext { home: Some(home_at(0.0, 0.0)), ..FeatureContext::without_locations(cfg()) };
        let v = compute_daily_features(&ev, 0, &ctx);
        assert_relative_eq!(v.dist_travelled_m, 100.0);
        assert_relative_eq!(v.avg_flight_len_m, 100.0);
        assert_eq!(v.std_flight_len_m, 0.0);
        assert_eq!(v.avg_flight_dur_s, 100.0);
        assert_relative_eq!(v.frac_pause * DAY_S + 100.0, DAY_S, epsilon = 1e-3);
        assert_relative_eq!(v.max_home_dist_m, 100.0);
        assert_relative_eq!(v.hometime_min, 1440.0);
    }

    #[test]
    fn two_places_half_a_day_each() {
        let ev = vec![Event::pause(0.0, 0.0, 0.0, DAY_S / 2.0), Event::pause(1000.0, 0.0, DAY_S / 2.0, DAY_S / 2.0)];
        let v = compute_daily_features(&ev, 0, &FeatureContext::without_locations(cfg()));
        assert_relative_eq!(v.max_diam_m, 1000.0);
        assert_relative_eq!(v.rog_m, 500.0, max_relative = 1e-12);
        assert!(v.hometime_min.is_nan());
    }

    #[test]
    fn rog_of_a_segment_matches_quadrature() {
        let ev = vec![Event::flight(3.0, -2.0, 0.0, 400.0, 300.0, 500.0), Event::pause(403.0, 298.0, 500.0, 250.0)];
        // midpoint-rule oracle
        let n = 200_000;
        let (mut pts, mut w) = (Vec::new(), Vec::new());
        for e in &ev {
            for k in 0..n {
                let t = e.t + e.dt * (k as f64 + 0.5) / n as f64;
                pts.push(e.position_at(t));
                w.push(e.dt / n as f64);
            }
        }
        let tw: f64 = w.iter().sum();
        let cx = pts.iter().zip(&w).map(|(p, w)| p.0 * w).sum::<f64>() / tw;
        let cy = pts.iter().zip(&w).map(|(p, w)| p.1 * w).sum::<f64>() / tw;
        let rog = (pts.iter().zip(&w).map(|(p, w)| w * ((p.0 - cx).powi(2) + (p.1 - cy).powi(2))).sum::<f64>() / tw).sqrt();
        let v = compute_daily_features(&ev, 0, &FeatureContext::without_locations(cfg()));
        assert_relative_eq!(v.rog_m, rog, max_relative = 1e-6);
    }

    #[test]
    fn hometime_counts_partial_flights() {
        // flight straight through a 200 m home disk at 10 m/s: 40 s inside
        let ev = vec![Event::flight(-1000.0, 0.0, 0.0, 2000.0, 0.0, 200.0)];
        let ctx = FeatureContext { home: Some(home_at(0.0, 0.0)), ..FeatureContext::without_locations(cfg()) };
        let v = compute_daily_features(&ev, 0, &ctx);
        assert_relative_eq!(v.hometime_min * 60.0, 40.0, epsilon = 1e-9);
    }

    #[test]
    fn entropy_for_equal_shares() {
        for k in [2usize, 4] {
            let locations: Vec<_> = (0..k)
                .map(|i| SignificantLocation { id: i, x: i as f64 * 5000.0, y: 0.0, total_pause_s: 1e4, is_home: false })
                .collect();
            let ev: Vec<_> = (0..k).map(|i| Event::pause(i as f64 * 5000.0, 0.0, i as f64 * 3600.0, 3600.0)).collect();
            let ctx = FeatureContext { locations, home: None, cfg: cfg() };
            let v = compute_daily_features(&ev, 0, &ctx);
            assert_relative_eq!(v.sig_loc_entropy, (k as f64).ln(), max_relative = 1e-12);
            assert_eq!(v.sig_locs_visited, k as f64);
        }
    }

    #[test]
    fn empty_day_is_invalid() {
        let v = compute_daily_features(&[], 3, &FeatureContext::default());
        assert!(!v.valid);
        assert_eq!(v.mins_missing, 1440.0);
    }

    #[test]
    fn days_split_at_local_midnight() {
        let ev = vec![Event::flight(0.0, 0.0, DAY_S - 100.0, 200.0, 0.0, 200.0)];
        let days = split_days(&trace(ev), 0.0);
        assert_eq!(days.len(), 2);
        assert_relative_eq!(days[&0][0].dx, 100.0);
        assert_relative_eq!(days[&1][0].x, 100.0);
        let shifted = split_days(&trace(vec![Event::pause(0.0, 0.0, 0.0, 10.0)]), -3600.0);
        assert!(shifted.contains_key(&-1));
        assert!(is_weekend(2)); // 1970-01-03, Saturday
        assert!(!is_weekend(0));
    }

    #[test]
    fn identical_days_have_full_routine() {
        let mut ev = Vec::new();
        for d in 0..3 {
            let base = d as f64 * DAY_S;
            ev.push(Event::pause(0.0, 0.0, base, 8.0 * 3600.0));
            ev.push(Event::flight(0.0, 0.0, base + 8.0 * 3600.0, 5000.0, 0.0, 1800.0));
            ev.push(Event::pause(5000.0, 0.0, base + 8.5 * 3600.0, 15.5 * 3600.0));
        }
        let tr = trace(ev);
        let ctx = FeatureContext::from_trace(&tr, cfg());
        let v = compute_features(&tr, &ctx);
        assert_eq!(v.len(), 3);
        for d in &v {
            assert_relative_eq!(d.circdn_rtn, 1.0, epsilon = 1e-12);
            assert!((0.0..=1.0).contains(&d.wkend_day_rtn));
        }
    }

    #[test]
    fn intervals_from_replicates() {
        let base = DailyFeatureVector::empty(0);
        let same = vec![base.clone(); 5];
        let out = feature_intervals(&same, 0.05).unwrap();
        assert!(out.intervals.as_ref().unwrap().iter().all(|(lo, hi)| lo == hi));

        let spread: Vec<_> = (1..=100)
            .map(|i| {
                let mut v = base.clone();
                v.dist_travelled_m = i as f64;
                v.rog_m = 1000.0 - i as f64;
                v
            })
            .collect();
        let out = feature_intervals(&spread, 0.05).unwrap();
        assert_eq!(out.interval(Measure::DistTravelled).unwrap(), (3.0, 97.0));
        assert_eq!(out.interval(Measure::RoG).unwrap(), (902.0, 996.0));
        assert_relative_eq!(out.dist_travelled_m, 50.5);
        assert!(feature_intervals(&spread[..1], 0.05).is_err());
    }

    #[test]
    fn hull_diameter_matches_all_pairs() {
        let mut pts: Vec<(f64, f64)> = (0..300)
            .map(|i| {
                let a = i as f64 * 2.399;
                let r = (i as f64).sqrt() * 13.0;
                ((r * a.cos()).round(), (r * a.sin()).round())
            })
            .collect();
        pts.extend([(0.0, 0.0), (5.0, 0.0), (10.0, 0.0)]);
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup();
        let mut brute: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                brute = brute.max((a.0 - b.0).hypot(a.1 - b.1));
            }
        }
        assert_eq!(max_pairwise(&pts), brute);
        assert_eq!(max_pairwise(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]), 3.0);
    }

    #[test]
    fn measure_names_round_trip() {
        for m in Measure::ALL {
            assert_eq!(m.name().parse::<Measure>().unwrap(), m);
            assert_eq!(Measure::ALL[m.index()], m);
        }
    }
}
