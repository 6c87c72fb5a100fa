//! Flight/pause segmentation of planar point sequences.
//!
//! Stationary runs (every point within `pause_radius_m` of the run's first
//! point for at least `min_pause_s`) become pauses located at the centroid of
//! their points. The remaining points are split into straight flights with
//! the rectangular method: a flight keeps growing while every intermediate
//! point stays within `pause_radius_m` of the chord, and is cut at the point
//! of largest deviation once one does not.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{PlanarPoint, ProjectionFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Flight,
    Pause,
}

impl EventKind {
    pub fn is_flight(self) -> bool {
        self == EventKind::Flight
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Flight => "flight",
            EventKind::Pause => "pause",
        }
    }
}

/// One flight or pause: start state plus displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub observed: bool,
    /// Seconds of this event that were not observed. Zero for ordinary
    /// observed events, `dt` for imputed ones, and the bridged gap length for
    /// pauses merged across a gap.
    #[serde(default)]
    pub missing_s: f64,
}

impl Event {
    pub fn flight(x: f64, y: f64, t: f64, dx: f64, dy: f64, dt: f64) -> Self {
        Event { kind: EventKind::Flight, x, y, t, dx, dy, dt, observed: true, missing_s: 0.0 }
    }

    pub fn pause(x: f64, y: f64, t: f64, dt: f64) -> Self {
        Event { kind: EventKind::Pause, x, y, t, dx: 0.0, dy: 0.0, dt, observed: true, missing_s: 0.0 }
    }

    pub fn start(&self) -> PlanarPoint {
        PlanarPoint::new(self.x, self.y, self.t)
    }

    pub fn end(&self) -> PlanarPoint {
        PlanarPoint::new(self.x + self.dx, self.y + self.dy, self.t + self.dt)
    }

    pub fn t_end(&self) -> f64 {
        self.t + self.dt
    }

    pub fn length(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    /// Donor events: fully observed.
    pub fn is_donor(&self) -> bool {
        self.observed && self.missing_s == 0.0
    }

    pub fn observed_s(&self) -> f64 {
        if self.observed {
            (self.dt - self.missing_s).max(0.0)
        } else {
            0.0
        }
    }

    /// Location at time `t`, linear within the event.
    pub fn position_at(&self, t: f64) -> (f64, f64) {
        let f = if self.dt > 0.0 { ((t - self.t) / self.dt).clamp(0.0, 1.0) } else { 0.0 };
        (self.x + f * self.dx, self.y + f * self.dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingInterval {
    pub t_start: f64,
    pub t_end: f64,
    pub anchor_start: PlanarPoint,
    pub anchor_end: PlanarPoint,
}

impl MissingInterval {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityTrace {
    pub subject_id: String,
    pub frame: Option<ProjectionFrame>,
    pub events: Vec<Event>,
    pub gaps: Vec<MissingInterval>,
}

impl MobilityTrace {
    pub fn t_first(&self) -> Option<f64> {
        let e = self.events.first().map(|e| e.t);
        let g = self.gaps.first().map(|g| g.t_start);
        match (e, g) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn t_last(&self) -> Option<f64> {
        let e = self.events.last().map(|e| e.t_end());
        let g = self.gaps.last().map(|g| g.t_end);
        match (e, g) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    /// Event that ends exactly at `t`, if any.
    pub fn event_ending_at(&self, t: f64) -> Option<&Event> {
        let idx = self.events.partition_point(|e| e.t_end() < t);
        self.events.get(idx).filter(|e| (e.t_end() - t).abs() < 1e-9)
    }

    pub fn event_starting_at(&self, t: f64) -> Option<&Event> {
        let idx = self.events.partition_point(|e| e.t < t);
        self.events.get(idx).filter(|e| (e.t - t).abs() < 1e-9)
    }

    /// Points reconstructed along the events, no further apart in time
    /// than `max_step_s`.
    pub fn reconstruct_points(&self, max_step_s: f64) -> Vec<PlanarPoint> {
        let mut out: Vec<PlanarPoint> = Vec::with_capacity(self.events.len() + 1);
        for e in &self.events {
            let steps = (e.dt / max_step_s).ceil().max(1.0) as usize;
            for k in 0..=steps {
                let t = if k == steps { e.t_end() } else { e.t + e.dt * k as f64 / steps as f64 };
                let (x, y) = if k == steps { (e.x + e.dx, e.y + e.dy) } else { e.position_at(t) };
                out.push(PlanarPoint::new(x, y, t));
            }
        }
        out.dedup_by(|b, a| (a.t - b.t).abs() < 1e-9);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub pause_radius_m: f64,
    pub min_pause_s: f64,
    pub gap_threshold_s: f64,
    pub pause_merge_m: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            pause_radius_m: 25.0,
            min_pause_s: 30.0,
            gap_threshold_s: 90.0,
            pause_merge_m: 50.0,
        }
    }
}

fn check_sorted(points: &[PlanarPoint]) -> Result<()> {
    for (i, w) in points.windows(2).enumerate() {
        if !(w[1].t >= w[0].t) {
            return Err(Error::Unsorted { index: i + 1, t: w[1].t });
        }
    }
    Ok(())
}

/// Every inter-point silence longer than the gap threshold.
pub fn detect_missing_intervals(points: &[PlanarPoint], cfg: &SegmentationConfig) -> Vec<MissingInterval> {
    points
        .windows(2)
        .filter(|w| w[1].t - w[0].t > cfg.gap_threshold_s)
        .map(|w| MissingInterval {
            t_start: w[0].t,
            t_end: w[1].t,
            anchor_start: w[0],
            anchor_end: w[1],
        })
        .collect()
}

/// Segments a sorted point sequence into events and missing intervals.
///
/// Gap anchors are placed on the reconstructed path, so a burst that ends in
/// a pause anchors the following gap at the pause location.
pub fn extract_events(points: &[PlanarPoint], cfg: &SegmentationConfig) -> Result<MobilityTrace> {
    check_sorted(points)?;
    let mut pts: Vec<PlanarPoint> = points.to_vec();
    pts.dedup_by(|b, a| a.t == b.t);

    let raw_gaps = detect_missing_intervals(&pts, cfg);
    let mut events = Vec::new();
    let mut gaps = Vec::with_capacity(raw_gaps.len());
    let mut start = 0;
    // (first, last) path positions of each burst
    let mut burst_ends: Vec<(PlanarPoint, PlanarPoint)> = Vec::new();
    let mut split_at: Vec<usize> = Vec::new();
    for (i, w) in pts.windows(2).enumerate() {
        if w[1].t - w[0].t > cfg.gap_threshold_s {
            split_at.push(i + 1);
        }
    }
    split_at.push(pts.len());
    for end in split_at {
        let burst = &pts[start..end];
        if burst.is_empty() {
            continue;
        }
        let evs = segment_burst(burst, cfg);
        let first = evs.first().map(|e| e.start()).unwrap_or(burst[0]);
        let last = evs.last().map(|e| e.end()).unwrap_or(burst[burst.len() - 1]);
        burst_ends.push((first, last));
        events.extend(evs);
        start = end;
    }
    for (k, g) in raw_gaps.iter().enumerate() {
        gaps.push(MissingInterval {
            t_start: g.t_start,
            t_end: g.t_end,
            anchor_start: PlanarPoint::new(burst_ends[k].1.x, burst_ends[k].1.y, g.t_start),
            anchor_end: PlanarPoint::new(burst_ends[k + 1].0.x, burst_ends[k + 1].0.y, g.t_end),
        });
    }
    Ok(MobilityTrace { subject_id: String::new(), frame: None, events, gaps })
}

/// Pause runs as inclusive index ranges.
fn pause_runs(pts: &[PlanarPoint], cfg: &SegmentationConfig) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let n = pts.len();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pts[j + 1].dist(&pts[i]) <= cfg.pause_radius_m {
            j += 1;
        }
        if j > i && pts[j].t - pts[i].t >= cfg.min_pause_s {
            runs.push((i, j));
            i = j + 1;
        } else {
            i += 1;
        }
    }
    runs
}

fn centroid(pts: &[PlanarPoint]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    (sx / n, sy / n)
}

fn segment_distance(p: &PlanarPoint, a: &PlanarPoint, b: &PlanarPoint) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let s = (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0);
    (p.x - a.x - s * vx).hypot(p.y - a.y - s * vy)
}

/// Breakpoint indices of the rectangular method over a polyline, including
/// both ends.
pub(crate) fn rectangular_breakpoints(poly: &[PlanarPoint], radius: f64) -> Vec<usize> {
    if poly.is_empty() {
        return Vec::new();
    }
    let mut kept = vec![0];
    let mut a = 0;
    let mut k = 1;
    while k < poly.len() {
        let mut far = None;
        let mut far_dev = radius;
        for m in a + 1..k {
            let dev = segment_distance(&poly[m], &poly[a], &poly[k]);
            if dev > far_dev {
                far_dev = dev;
                far = Some(m);
            }
        }
        match far {
            Some(m) => {
                kept.push(m);
                a = m;
                k = a + 1;
            }
            None => k += 1,
        }
    }
    if *kept.last().unwrap() != poly.len() - 1 {
        kept.push(poly.len() - 1);
    }
    kept
}

fn segment_burst(pts: &[PlanarPoint], cfg: &SegmentationConfig) -> Vec<Event> {
    if pts.len() < 2 {
        return Vec::new();
    }
    let runs = pause_runs(pts, cfg);
    // vertices of the path; `pause[k]` marks vertex k -> k+1 as a pause
    let mut verts: Vec<PlanarPoint> = Vec::new();
    let mut pause: Vec<bool> = Vec::new();
    let mut cursor = 0;

    let push_flights = |verts: &mut Vec<PlanarPoint>, pause: &mut Vec<bool>, free: &[PlanarPoint], tail: Option<PlanarPoint>| {
        let mut poly: Vec<PlanarPoint> = Vec::with_capacity(free.len() + 2);
        if let Some(v) = verts.last() {
            poly.push(*v);
        }
        poly.extend_from_slice(free);
        if let Some(t) = tail {
            poly.push(t);
        }
        if poly.is_empty() {
            return;
        }
        let skip_first = !verts.is_empty();
        for (n, idx) in rectangular_breakpoints(&poly, cfg.pause_radius_m).into_iter().enumerate() {
            if n == 0 && skip_first {
                continue;
            }
            if !verts.is_empty() {
                pause.push(false);
            }
            verts.push(poly[idx]);
        }
    };

    for &(i, j) in &runs {
        let (cx, cy) = centroid(&pts[i..=j]);
        let head = PlanarPoint::new(cx, cy, pts[i].t);
        push_flights(&mut verts, &mut pause, &pts[cursor..i], Some(head));
        verts.push(PlanarPoint::new(cx, cy, pts[j].t));
        pause.push(true);
        cursor = j + 1;
    }
    push_flights(&mut verts, &mut pause, &pts[cursor..], None);

    let mut events: Vec<Event> = Vec::with_capacity(pause.len());
    for (k, is_pause) in pause.iter().enumerate() {
        let (a, b) = (verts[k], verts[k + 1]);
        let dt = b.t - a.t;
        if !(dt > 0.0) {
            continue;
        }
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let ev = if *is_pause || (dx == 0.0 && dy == 0.0) {
            Event::pause(a.x, a.y, a.t, dt)
        } else {
            Event::flight(a.x, a.y, a.t, dx, dy, dt)
        };
        push_merging(&mut events, ev);
    }
    events
}

/// Appends an event, folding a pause into a directly preceding pause at the
/// same location.
fn push_merging(events: &mut Vec<Event>, ev: Event) {
    if let Some(last) = events.last_mut() {
        if last.kind == EventKind::Pause
            && ev.kind == EventKind::Pause
            && (last.t_end() - ev.t).abs() < 1e-9
            && last.x == ev.x
            && last.y == ev.y
        {
            last.dt = ev.t_end() - last.t;
            last.missing_s += ev.missing_s;
            return;
        }
    }
    events.push(ev);
}

enum Item {
    Ev(Event),
    Gap(MissingInterval),
}

/// Replaces each gap flanked by two pauses within `pause_merge_m` by one
/// longer pause at the duration-weighted mean location.
pub fn merge_pause_flanked_gaps(trace: &MobilityTrace, cfg: &SegmentationConfig) -> MobilityTrace {
    let mut items: Vec<Item> = Vec::with_capacity(trace.events.len() + trace.gaps.len());
    let (mut ei, mut gi) = (0, 0);
    while ei < trace.events.len() || gi < trace.gaps.len() {
        let take_gap = match (trace.events.get(ei), trace.gaps.get(gi)) {
            (Some(e), Some(g)) => g.t_start <= e.t,
            (None, Some(_)) => true,
            _ => false,
        };
        if take_gap {
            items.push(Item::Gap(trace.gaps[gi]));
            gi += 1;
        } else {
            items.push(Item::Ev(trace.events[ei]));
            ei += 1;
        }
    }

    let mut out: Vec<Item> = Vec::with_capacity(items.len());
    let mut iter = items.into_iter().peekable();
    while let Some(item) = iter.next() {
        match item {
            Item::Gap(g) => {
                let prev = match out.last() {
                    Some(Item::Ev(e)) if e.kind == EventKind::Pause && (e.t_end() - g.t_start).abs() < 1e-9 => Some(*e),
                    _ => None,
                };
                let next = match iter.peek() {
                    Some(Item::Ev(e)) if e.kind == EventKind::Pause && (e.t - g.t_end).abs() < 1e-9 => Some(*e),
                    _ => None,
                };
                match (prev, next) {
                    (Some(p), Some(n)) if p.start().dist(&n.start()) <= cfg.pause_merge_m => {
                        iter.next();
                        let (wp, wn) = (p.dt - p.missing_s, n.dt - n.missing_s);
                        let w = (wp + wn).max(f64::MIN_POSITIVE);
                        let merged = Event {
                            kind: EventKind::Pause,
                            x: (p.x * wp + n.x * wn) / w,
                            y: (p.y * wp + n.y * wn) / w,
                            t: p.t,
                            dx: 0.0,
                            dy: 0.0,
                            dt: n.t_end() - p.t,
                            observed: true,
                            missing_s: p.missing_s + g.duration() + n.missing_s,
                        };
                        out.pop();
                        out.push(Item::Ev(merged));
                    }
                    _ => out.push(Item::Gap(g)),
                }
            }
            ev => out.push(ev),
        }
    }

    let mut events = Vec::new();
    let mut gaps = Vec::new();
    for item in out {
        match item {
            Item::Ev(e) => events.push(e),
            Item::Gap(g) => gaps.push(g),
        }
    }
    let mut merged = MobilityTrace { subject_id: trace.subject_id.clone(), frame: trace.frame, events, gaps };
    reconnect(&mut merged);
    merged
}

/// Restores path continuity after pause locations moved: flights ending at
/// a pause end at its location, flights leaving a pause start there, and gap
/// anchors sit on the adjacent event endpoints.
pub fn reconnect(trace: &mut MobilityTrace) {
    let n = trace.events.len();
    for k in 0..n.saturating_sub(1) {
        let (a, b) = (trace.events[k], trace.events[k + 1]);
        if (a.t_end() - b.t).abs() > 1e-9 {
            continue;
        }
        match (a.kind, b.kind) {
            (EventKind::Flight, EventKind::Pause) => {
                trace.events[k].dx = b.x - a.x;
                trace.events[k].dy = b.y - a.y;
            }
            (EventKind::Pause, EventKind::Flight) => {
                let end = b.end();
                let f = &mut trace.events[k + 1];
                f.x = a.x;
                f.y = a.y;
                f.dx = end.x - a.x;
                f.dy = end.y - a.y;
            }
            _ => {}
        }
    }
    let mut events: Vec<Event> = Vec::with_capacity(n);
    for mut e in std::mem::take(&mut trace.events) {
        if e.kind == EventKind::Flight && e.dx == 0.0 && e.dy == 0.0 {
            e.kind = EventKind::Pause;
        }
        push_merging(&mut events, e);
    }
    trace.events = events;
    let snapshot = trace.clone();
    for g in &mut trace.gaps {
        if let Some(e) = snapshot.event_ending_at(g.t_start) {
            let p = e.end();
            g.anchor_start = PlanarPoint::new(p.x, p.y, g.t_start);
        }
        if let Some(e) = snapshot.event_starting_at(g.t_end) {
            g.anchor_end = PlanarPoint::new(e.x, e.y, g.t_end);
        }
    }
}

/// Projection, segmentation and pause-flanked gap merging in one step.
pub fn build_trace(
    subject_id: &str,
    frame: ProjectionFrame,
    points: &[PlanarPoint],
    cfg: &SegmentationConfig,
) -> Result<MobilityTrace> {
    let mut trace = extract_events(points, cfg)?;
    trace.subject_id = subject_id.to_string();
    trace.frame = Some(frame);
    Ok(merge_pause_flanked_gaps(&trace, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn line(n: usize, t0: f64, dt: f64, x0: f64, y0: f64, vx: f64, vy: f64) -> Vec<PlanarPoint> {
        (0..n)
            .map(|i| {
                let s = i as f64 * dt;
                PlanarPoint::new(x0 + vx * s, y0 + vy * s, t0 + s)
            })
            .collect()
    }

    fn coverage(trace: &MobilityTrace) -> f64 {
        trace.events.iter().map(|e| e.dt).sum::<f64>() + trace.gaps.iter().map(|g| g.duration()).sum::<f64>()
    }

    fn no_consecutive_pauses(trace: &MobilityTrace) -> bool {
        trace.events.windows(2).all(|w| {
            !(w[0].kind == EventKind::Pause
                && w[1].kind == EventKind::Pause
                && (w[0].t_end() - w[1].t).abs() < 1e-9)
        })
    }

    // Minimum number of rectangle-valid flights covering a polyline,
    // by exhaustive dynamic programming over breakpoints.
    fn min_flights_oracle(poly: &[PlanarPoint], r: f64) -> usize {
        let n = poly.len();
        let valid = |a: usize, b: usize| (a + 1..b).all(|m| segment_distance(&poly[m], &poly[a], &poly[b]) <= r);
        let mut best = vec![usize::MAX; n];
        best[0] = 0;
        for b in 1..n {
            for a in 0..b {
                if best[a] != usize::MAX && valid(a, b) {
                    best[b] = best[b].min(best[a] + 1);
                }
            }
        }
        best[n - 1]
    }

    #[test]
    fn collinear_constant_speed_is_one_flight() {
        let pts = line(61, 0.0, 1.0, 0.0, 0.0, 5.0, 2.0);
        let trace = extract_events(&pts, &SegmentationConfig::default()).unwrap();
        assert_eq!(trace.events.len(), 1);
        let e = trace.events[0];
        assert_eq!(e.kind, EventKind::Flight);
        assert_relative_eq!(e.dx, 300.0, epsilon = 1e-9);
        assert_relative_eq!(e.dy, 120.0, epsilon = 1e-9);
        assert_relative_eq!(e.dt, 60.0);
    }

    #[test]
    fn stationary_points_are_one_pause() {
        let pts: Vec<_> = (0..=600)
            .map(|i| PlanarPoint::new(100.0 + (i % 3) as f64, 50.0 - (i % 2) as f64, i as f64))
            .collect();
        let trace = extract_events(&pts, &SegmentationConfig::default()).unwrap();
        assert_eq!(trace.events.len(), 1);
        let e = trace.events[0];
        assert_eq!(e.kind, EventKind::Pause);
        assert_eq!((e.dx, e.dy), (0.0, 0.0));
        assert_relative_eq!(e.dt, 600.0);
        assert_relative_eq!(e.x, 101.0, epsilon = 0.01);
    }

    #[test]
    fn l_shaped_path_is_two_flights() {
        let mut pts = line(21, 0.0, 1.0, 0.0, 0.0, 5.0, 0.0);
        pts.extend(line(21, 20.0, 1.0, 100.0, 0.0, 0.0, 5.0).into_iter().skip(1));
        let cfg = SegmentationConfig::default();
        assert_eq!(min_flights_oracle(&pts, cfg.pause_radius_m), 2);
        let trace = extract_events(&pts, &cfg).unwrap();
        assert_eq!(trace.events.len(), 2);
        assert!(trace.events.iter().all(|e| e.kind == EventKind::Flight));
        assert_relative_eq!(trace.events[0].dx, 100.0, epsilon = 1e-9);
        assert_relative_eq!(trace.events[1].dy, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let pts = vec![PlanarPoint::new(0.0, 0.0, 5.0), PlanarPoint::new(0.0, 0.0, 1.0)];
        assert!(matches!(
            extract_events(&pts, &SegmentationConfig::default()),
            Err(Error::Unsorted { index: 1, .. })
        ));
    }

    #[test]
    fn dense_sampling_has_no_gaps() {
        let pts = line(600, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0);
        let cfg = SegmentationConfig { gap_threshold_s: 60.0, ..Default::default() };
        assert!(detect_missing_intervals(&pts, &cfg).is_empty());
    }

    #[test]
    fn on_off_bursts_give_one_gap() {
        let mut pts = line(121, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0);
        pts.extend(line(121, 720.0, 1.0, 2000.0, 0.0, 2.0, 0.0));
        let gaps = detect_missing_intervals(&pts, &SegmentationConfig::default());
        assert_eq!(gaps.len(), 1);
        assert_relative_eq!(gaps[0].duration(), 600.0);
    }

    #[test]
    fn gap_anchors_are_flanking_points() {
        let pts = vec![
            PlanarPoint::new(0.0, 0.0, 0.0),
            PlanarPoint::new(1.0, 0.0, 1.0),
            PlanarPoint::new(9.0, 9.0, 500.0),
            PlanarPoint::new(10.0, 9.0, 501.0),
            PlanarPoint::new(20.0, 5.0, 1000.0),
        ];
        let gaps = detect_missing_intervals(&pts, &SegmentationConfig::default());
        assert_eq!(gaps.len(), 2);
        assert_eq!(gaps[0].anchor_start, pts[1]);
        assert_eq!(gaps[0].anchor_end, pts[2]);
        assert_eq!(gaps[1].anchor_start, pts[3]);
        assert_eq!(gaps[1].anchor_end, pts[4]);
    }

    fn pause_gap_pause(second_x: f64) -> MobilityTrace {
        let mut pts: Vec<_> = (0..=120).map(|i| PlanarPoint::new(0.0, 0.0, i as f64)).collect();
        pts.extend((0..=120).map(|i| PlanarPoint::new(second_x, 0.0, 720.0 + i as f64)));
        extract_events(&pts, &SegmentationConfig::default()).unwrap()
    }

    #[test]
    fn nearby_pauses_merge_across_gap() {
        let trace = pause_gap_pause(30.0);
        assert_eq!(trace.gaps.len(), 1);
        let merged = merge_pause_flanked_gaps(&trace, &SegmentationConfig::default());
        assert!(merged.gaps.is_empty());
        assert_eq!(merged.events.len(), 1);
        let p = merged.events[0];
        assert_eq!(p.kind, EventKind::Pause);
        assert_relative_eq!(p.dt, 840.0);
        assert_relative_eq!(p.x, 15.0, epsilon = 1e-9);
        assert_relative_eq!(p.missing_s, 600.0);
        assert!(!p.is_donor());
    }

    #[test]
    fn distant_pauses_keep_gap() {
        let trace = pause_gap_pause(60.0);
        let merged = merge_pause_flanked_gaps(&trace, &SegmentationConfig::default());
        assert_eq!(merged.gaps.len(), 1);
        assert_eq!(merged.events.len(), 2);
    }

    #[test]
    fn flight_then_pause_keeps_gap() {
        let mut pts = line(61, 0.0, 1.0, 0.0, 0.0, 5.0, 0.0);
        pts.extend((0..=120).map(|i| PlanarPoint::new(310.0, 0.0, 700.0 + i as f64)));
        let trace = extract_events(&pts, &SegmentationConfig::default()).unwrap();
        let merged = merge_pause_flanked_gaps(&trace, &SegmentationConfig::default());
        assert_eq!(merged.gaps.len(), 1);
    }

    #[test]
    fn merge_keeps_neighbouring_flights_connected() {
        let cfg = SegmentationConfig::default();
        let mut pts = line(41, 0.0, 1.0, -400.0, 0.0, 10.0, 0.0);
        pts.extend((1..=120).map(|i| PlanarPoint::new(0.0, 0.0, 40.0 + i as f64)));
        pts.extend((0..=120).map(|i| PlanarPoint::new(40.0, 0.0, 800.0 + i as f64)));
        pts.extend(line(40, 921.0, 1.0, 50.0, 10.0, 0.0, 10.0));
        let merged = merge_pause_flanked_gaps(&extract_events(&pts, &cfg).unwrap(), &cfg);
        assert!(merged.gaps.is_empty());
        for w in merged.events.windows(2) {
            let (a, b) = (w[0].end(), w[1].start());
            assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        }
        assert!(no_consecutive_pauses(&merged));
    }

    #[test]
    fn single_point_burst_is_an_anchor() {
        let mut pts = line(31, 0.0, 1.0, 0.0, 0.0, 5.0, 0.0);
        pts.push(PlanarPoint::new(500.0, 500.0, 400.0));
        pts.extend(line(31, 800.0, 1.0, 600.0, 600.0, 5.0, 0.0));
        let trace = extract_events(&pts, &SegmentationConfig::default()).unwrap();
        assert_eq!(trace.gaps.len(), 2);
        assert_eq!(trace.gaps[0].anchor_end.x, 500.0);
        assert_eq!(trace.gaps[1].anchor_start.x, 500.0);
        assert_relative_eq!(coverage(&trace), 830.0, epsilon = 1e-6);
    }

    // Waypoint paths with long legs and clear turns, sampled at 1 Hz,
    // separated by stationary stops far from the route.
    fn waypoint_path(legs: &[(f64, f64)], stop_every: usize) -> Vec<PlanarPoint> {
        let speed = 5.0;
        let mut pts = vec![PlanarPoint::new(0.0, 0.0, 0.0)];
        let (mut x, mut y, mut t) = (0.0, 0.0, 0.0);
        for (k, &(len, heading)) in legs.iter().enumerate() {
            let steps = (len / speed).round() as usize;
            let (vx, vy) = (heading.cos() * speed, heading.sin() * speed);
            for _ in 0..steps {
                x += vx;
                y += vy;
                t += 1.0;
                pts.push(PlanarPoint::new(x, y, t));
            }
            if stop_every > 0 && k % stop_every == stop_every - 1 {
                for _ in 0..90 {
                    t += 1.0;
                    pts.push(PlanarPoint::new(x, y, t));
                }
            }
        }
        pts
    }

    fn legs_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((150.0f64..600.0, 0.8f64..2.3, prop::bool::ANY), 2..8).prop_map(|v| {
            let mut heading = 0.0;
            v.into_iter()
                .map(|(len, turn, left)| {
                    heading += if left { turn } else { -turn };
                    (len, heading)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn events_cover_observed_span(legs in legs_strategy(), gap_at in 0.1f64..0.9) {
            let cfg = SegmentationConfig::default();
            let mut pts = waypoint_path(&legs, 2);
            let cut = ((pts.len() as f64) * gap_at) as usize;
            let shift = 400.0;
            for p in pts.iter_mut().skip(cut) {
                p.t += shift;
            }
            let trace = extract_events(&pts, &cfg).unwrap();
            let span = pts.last().unwrap().t - pts[0].t;
            prop_assert!((coverage(&trace) - span).abs() < 1e-6);
            prop_assert!(no_consecutive_pauses(&trace));
            let merged = merge_pause_flanked_gaps(&trace, &cfg);
            prop_assert!((coverage(&merged) - span).abs() < 1e-6);
            prop_assert!(no_consecutive_pauses(&merged));
        }

        #[test]
        fn resegmentation_is_idempotent(legs in legs_strategy()) {
            let cfg = SegmentationConfig::default();
            let pts = waypoint_path(&legs, 3);
            let first = extract_events(&pts, &cfg).unwrap();
            let again = extract_events(&first.reconstruct_points(cfg.gap_threshold_s / 2.0), &cfg).unwrap();
            prop_assert_eq!(first.events.len(), again.events.len());
            for (a, b) in first.events.iter().zip(&again.events) {
                prop_assert_eq!(a.kind, b.kind);
                prop_assert!((a.x - b.x).abs() < 1e-6 && (a.y - b.y).abs() < 1e-6);
                prop_assert!((a.dx - b.dx).abs() < 1e-6 && (a.dy - b.dy).abs() < 1e-6);
                prop_assert!((a.t - b.t).abs() < 1e-9 && (a.dt - b.dt).abs() < 1e-9);
            }
        }
    }
}
