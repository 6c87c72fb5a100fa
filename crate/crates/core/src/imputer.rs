//! Hot-deck imputation of missing intervals.
//!
//! Each missing interval is filled by repeatedly drawing an event type and
//! then an observed event's displacement, both weighted by a kernel centred
//! on the current simulated location and time. The simulated path is then
//! bridged onto the two anchors of the interval.
//!
//! Randomness: replicate `b` of gap `g` uses a ChaCha8 generator seeded by
//! SplitMix64 over `(seed, g)` and set to stream `b`, so every replicate and
//! gap is reproducible on its own.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec, Weighter};
use crate::projection::PlanarPoint;
use crate::segmentation::{Event, EventKind, MissingInterval, MobilityTrace};

/// An imputation method: linear interpolation or kernel-weighted hot-deck.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Linear,
    HotDeck(KernelSpec),
}

impl Method {
    /// `"LI"` or one of the kernel family names, with default scales times
    /// `scale_mult`.
    pub fn parse(name: &str, nu: f64, scale_mult: f64) -> Result<Self> {
        if name.eq_ignore_ascii_case("LI") {
            return Ok(Method::Linear);
        }
        let family: KernelFamily = name.parse()?;
        Ok(Method::HotDeck(KernelSpec::with_defaults(family, nu, scale_mult)?))
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Method::HotDeck(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Linear => f.write_str("LI"),
            Method::HotDeck(spec) => write!(f, "{}", spec.family),
        }
    }
}

/// Displacement of one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub kind: EventKind,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Donor {
    z: PlanarPoint,
    disp: Displacement,
}

/// Consecutive pair of observed events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub prev_is_flight: bool,
    /// Index of the later event in the donor list.
    pub next: usize,
}

/// Observed events available for resampling.
#[derive(Debug, Clone, Default)]
pub struct EmpiricalPool {
    donors: Vec<Donor>,
    flights: Vec<usize>,
    pauses: Vec<usize>,
    transitions: Vec<Transition>,
}

impl EmpiricalPool {
    pub fn from_trace(trace: &MobilityTrace) -> Self {
        Self::from_events(&trace.events)
    }

    pub fn from_events(events: &[Event]) -> Self {
        let mut pool = EmpiricalPool::default();
        let mut prev: Option<&Event> = None;
        for e in events {
            if !e.is_donor() {
                prev = None;
                continue;
            }
            let idx = pool.donors.len();
            pool.donors.push(Donor {
                z: e.start(),
                disp: Displacement { kind: e.kind, dx: e.dx, dy: e.dy, dt: e.dt },
            });
            match e.kind {
                EventKind::Flight => pool.flights.push(idx),
                EventKind::Pause => pool.pauses.push(idx),
            }
            if let Some(p) = prev {
                if (p.t_end() - e.t).abs() < 1e-9 {
                    pool.transitions.push(Transition { prev_is_flight: p.kind.is_flight(), next: idx });
                }
            }
            prev = Some(e);
        }
        pool
    }

    pub fn n_flights(&self) -> usize {
        self.flights.len()
    }

    pub fn n_pauses(&self) -> usize {
        self.pauses.len()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn is_empty(&self) -> bool {
        self.donors.is_empty()
    }

    /// True when no observed flight has an observed successor, so the
    /// flight-continuation probability falls back to the flight fraction.
    pub fn psi_uses_fallback(&self) -> bool {
        !self.transitions.iter().any(|t| t.prev_is_flight)
    }

    fn fill_weights(&self, weighter: &Weighter, z: &PlanarPoint, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.donors.iter().map(|d| weighter.weight(z, &d.z)));
    }

    fn psi_from_weights(&self, w: &[f64]) -> PsiEstimate {
        let (mut num, mut den) = (0.0, 0.0);
        for t in self.transitions.iter().filter(|t| t.prev_is_flight) {
            let wj = w[t.next];
            den += wj;
            if self.donors[t.next].disp.kind.is_flight() {
                num += wj;
            }
        }
        if den > 0.0 {
            PsiEstimate { value: num / den, fallback: false }
        } else {
            let total = self.flights.len() + self.pauses.len();
            let value = if total > 0 { self.flights.len() as f64 / total as f64 } else { 0.0 };
            PsiEstimate { value, fallback: true }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, w: &[f64], is_flight: bool, rng: &mut R) -> Result<Displacement> {
        let idx = if is_flight { &self.flights } else { &self.pauses };
        if idx.is_empty() {
            return Err(Error::NoDonors(if is_flight { "flight" } else { "pause" }));
        }
        let total: f64 = idx.iter().map(|&i| w[i]).sum();
        let mut u = rng.random::<f64>() * total;
        for &i in idx {
            u -= w[i];
            if u < 0.0 {
                return Ok(self.donors[i].disp);
            }
        }
        Ok(self.donors[*idx.last().unwrap()].disp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiEstimate {
    pub value: f64,
    /// Set when no observed flight transitions exist and the global flight
    /// fraction was used instead.
    pub fallback: bool,
}

/// Probability that a flight follows a flight at `z_new`.
pub fn estimate_psi(pool: &EmpiricalPool, spec: &KernelSpec, z_new: &PlanarPoint) -> PsiEstimate {
    let mut w = Vec::new();
    pool.fill_weights(&Weighter::new(spec), z_new, &mut w);
    pool.psi_from_weights(&w)
}

/// One donor displacement drawn with probability proportional to its weight.
pub fn sample_event<R: Rng + ?Sized>(
    pool: &EmpiricalPool,
    spec: &KernelSpec,
    z_new: &PlanarPoint,
    is_flight: bool,
    rng: &mut R,
) -> Result<Displacement> {
    let mut w = Vec::new();
    pool.fill_weights(&Weighter::new(spec), z_new, &mut w);
    pool.draw(&w, is_flight, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedTrajectory {
    pub events: Vec<Event>,
    pub gap: MissingInterval,
    pub replicate_index: usize,
    pub seed: u64,
}

/// Simulates events over `gap` and bridges them onto its anchors.
pub fn simulate_gap<R: Rng + ?Sized>(
    trace: &MobilityTrace,
    gap: &MissingInterval,
    pool: &EmpiricalPool,
    spec: &KernelSpec,
    rng: &mut R,
) -> Result<Vec<Event>> {
    let duration = gap.duration();
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter(format!("gap duration must be positive, got {duration}")));
    }
    if pool.is_empty() {
        return Err(Error::NoDonors("event"));
    }
    let weighter = Weighter::new(spec);
    let mut w = Vec::with_capacity(pool.donors.len());
    let mut z = PlanarPoint::new(gap.anchor_start.x, gap.anchor_start.y, gap.t_start);
    let mut prev_flight: Option<bool> = trace.event_ending_at(gap.t_start).map(|e| e.kind.is_flight());
    let mut raw: Vec<Displacement> = Vec::new();
    let mut elapsed = 0.0;

    loop {
        pool.fill_weights(&weighter, &z, &mut w);
        let mut is_flight = match prev_flight {
            Some(false) => true,
            _ => {
                let psi = pool.psi_from_weights(&w).value;
                rng.random::<f64>() < psi
            }
        };
        if is_flight && pool.flights.is_empty() {
            is_flight = false;
        } else if !is_flight && pool.pauses.is_empty() {
            is_flight = true;
        }
        let d = pool.draw(&w, is_flight, rng)?;
        if elapsed + d.dt >= duration {
            break;
        }
        elapsed += d.dt;
        z = PlanarPoint::new(z.x + d.dx, z.y + d.dy, z.t + d.dt);
        prev_flight = Some(is_flight);
        match raw.last_mut() {
            Some(last) if last.kind == EventKind::Pause && d.kind == EventKind::Pause => last.dt += d.dt,
            _ => raw.push(d),
        }
    }
    // stretch the final kept event over the remainder of the gap
    if let Some(last) = raw.last_mut() {
        last.dt += duration - elapsed;
    }
    Ok(bridge(&raw, gap))
}

/// Bridges simulated displacements onto the gap anchors.
///
/// At each simulated event boundary `t_b` the location is
/// `G(t_b) = (tau1 - t_b)/T * (L(tau0) + S_b) + (t_b - tau0)/T * L(tau1)`,
/// with `S_b` the summed displacement so far; events connect consecutive
/// boundary locations with straight segments. No events means linear
/// interpolation.
pub fn bridge(raw: &[Displacement], gap: &MissingInterval) -> Vec<Event> {
    if raw.is_empty() {
        return linear_events(gap);
    }
    let (tau0, tau1) = (gap.t_start, gap.t_end);
    let span = tau1 - tau0;
    let (l0, l1) = (gap.anchor_start, gap.anchor_end);
    let mut events = Vec::with_capacity(raw.len());
    let (mut sx, mut sy) = (0.0, 0.0);
    let mut t_prev = tau0;
    let (mut gx_prev, mut gy_prev) = (l0.x, l0.y);
    for (b, d) in raw.iter().enumerate() {
        sx += d.dx;
        sy += d.dy;
        let last = b + 1 == raw.len();
        let t_b = if last { tau1 } else { t_prev + d.dt };
        let (gx, gy) = if last {
            (l1.x, l1.y)
        } else {
            let a = (tau1 - t_b) / span;
            let c = (t_b - tau0) / span;
            (a * (l0.x + sx) + c * l1.x, a * (l0.y + sy) + c * l1.y)
        };
        events.push(Event {
            kind: d.kind,
            x: gx_prev,
            y: gy_prev,
            t: t_prev,
            dx: gx - gx_prev,
            dy: gy - gy_prev,
            dt: t_b - t_prev,
            observed: false,
            missing_s: t_b - t_prev,
        });
        t_prev = t_b;
        gx_prev = gx;
        gy_prev = gy;
    }
    events
}

fn linear_events(gap: &MissingInterval) -> Vec<Event> {
    let (a, b) = (gap.anchor_start, gap.anchor_end);
    let dt = gap.duration();
    let mut e = if a.x == b.x && a.y == b.y {
        Event::pause(a.x, a.y, gap.t_start, dt)
    } else {
        Event::flight(a.x, a.y, gap.t_start, b.x - a.x, b.y - a.y, dt)
    };
    e.observed = false;
    e.missing_s = dt;
    vec![e]
}

/// Straight line between the anchors over the whole gap.
pub fn linear_interpolate(gap: &MissingInterval) -> Result<ImputedTrajectory> {
    if !(gap.duration() > 0.0) {
        return Err(Error::InvalidParameter(format!("gap duration must be positive, got {}", gap.duration())));
    }
    Ok(ImputedTrajectory { events: linear_events(gap), gap: *gap, replicate_index: 0, seed: 0 })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replicate `replicate` of gap `gap_index`.
pub fn stream_rng(seed: u64, replicate: usize, gap_index: usize) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed) ^ (gap_index as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(replicate as u64);
    rng
}

/// Imputes one gap for one replicate.
pub fn impute_gap(
    trace: &MobilityTrace,
    pool: &EmpiricalPool,
    method: &Method,
    gap_index: usize,
    replicate: usize,
    seed: u64,
) -> Result<ImputedTrajectory> {
    let gap = &trace.gaps[gap_index];
    let events = match method {
        Method::Linear => linear_interpolate(gap)?.events,
        Method::HotDeck(spec) => {
            let mut rng = stream_rng(seed, replicate, gap_index);
            simulate_gap(trace, gap, pool, spec, &mut rng)?
        }
    };
    Ok(ImputedTrajectory { events, gap: *gap, replicate_index: replicate, seed })
}

#[derive(Debug, Clone)]
pub struct Imputation {
    pub replicates: Vec<MobilityTrace>,
    /// The flight-continuation estimate fell back to the flight fraction.
    pub psi_fallback: bool,
}

/// Fills every gap `replicates` times. Linear interpolation yields
/// identical copies.
pub fn impute_trace(trace: &MobilityTrace, method: &Method, replicates: usize, seed: u64) -> Result<Imputation> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("at least one replicate is required".into()));
    }
    let pool = EmpiricalPool::from_trace(trace);
    let mut out = Vec::with_capacity(replicates);
    for b in 0..replicates {
        let mut events: Vec<Event> = Vec::with_capacity(trace.events.len() + 4 * trace.gaps.len());
        let mut next_obs = 0;
        for g in 0..trace.gaps.len() {
            let imputed = impute_gap(trace, &pool, method, g, b, seed)?;
            let t0 = trace.gaps[g].t_start;
            while next_obs < trace.events.len() && trace.events[next_obs].t < t0 {
                events.push(trace.events[next_obs]);
                next_obs += 1;
            }
            events.extend(imputed.events);
        }
        events.extend_from_slice(&trace.events[next_obs..]);
        out.push(MobilityTrace { subject_id: trace.subject_id.clone(), frame: trace.frame, events, gaps: Vec::new() });
    }
    Ok(Imputation { replicates: out, psi_fallback: method.is_stochastic() && !trace.gaps.is_empty() && pool.psi_uses_fallback() })
}

/// Order-statistic interval from `B` replicate values: ranks
/// `ceil(alpha/2 * B)` and `floor((1 - alpha/2) * B)`, 1-based and clamped.
pub fn confidence_interval(values: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let b = values.len();
    if b < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 replicates, got {b}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = b as f64;
    let lo = ((alpha / 2.0 * n) - 1e-9).ceil().clamp(1.0, n) as usize;
    let hi = (((1.0 - alpha / 2.0) * n) + 1e-9).floor().clamp(1.0, n) as usize;
    Ok((sorted[lo - 1], sorted[hi - 1]))
}
