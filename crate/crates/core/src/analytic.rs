//! A toy trajectory model with known expected gaps.
//!
//! A trace is `n` independent unit-time flights whose mean displacements turn
//! steadily from angle `theta0` to `-theta0`, so `theta0 = 0` is a straight
//! line and `theta0 = pi/2` a semicircle. For this model the expected mean
//! squared gap between the truth and either surrogate (hot-deck resampling
//! bridged onto the endpoints, or linear interpolation) has a closed form,
//! which the Monte Carlo routines check.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imputer::{confidence_interval, impute_trace, Method};
use crate::segmentation::{Event, MissingInterval, MobilityTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModel {
    pub n: usize,
    pub theta0: f64,
    /// Squared expected flight length.
    pub d: f64,
    pub sigma_x2: f64,
    pub sigma_y2: f64,
}

impl AnalyticModel {
    pub fn new(n: usize, theta0: f64, d: f64, sigma_x2: f64, sigma_y2: f64) -> Result<Self> {
        AnalyticModel { n, theta0, d, sigma_x2, sigma_y2 }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.theta0) {
            return Err(Error::InvalidParameter(format!("theta0 must lie in [0, pi/2], got {}", self.theta0)));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(Error::InvalidParameter(format!("d must be non-negative, got {}", self.d)));
        }
        if !(self.sigma_x2 >= 0.0 && self.sigma_y2 >= 0.0 && self.sigma_x2.is_finite() && self.sigma_y2.is_finite()) {
            return Err(Error::InvalidParameter("variances must be non-negative".into()));
        }
        Ok(self)
    }

    fn sigma2(&self) -> f64 {
        self.sigma_x2 + self.sigma_y2
    }
}

/// Mean displacement of step `t` in `0..n`.
pub fn mean_displacement(model: &AnalyticModel, t: usize) -> Result<(f64, f64)> {
    if t >= model.n {
        return Err(Error::InvalidParameter(format!("step {t} out of range 0..{}", model.n)));
    }
    let angle = if model.n == 1 {
        model.theta0
    } else {
        model.theta0 - 2.0 * model.theta0 * t as f64 / (model.n - 1) as f64
    };
    let r = model.d.sqrt();
    Ok((r * angle.cos(), r * angle.sin()))
}

fn means(model: &AnalyticModel) -> Vec<(f64, f64)> {
    (0..model.n).map(|t| mean_displacement(model, t).unwrap()).collect()
}

/// `n` displacements: the means plus independent Gaussian noise.
pub fn simulate_analytic_trace<R: Rng + ?Sized>(model: &AnalyticModel, rng: &mut R) -> Vec<(f64, f64)> {
    let (sx, sy) = (model.sigma_x2.sqrt(), model.sigma_y2.sqrt());
    means(model)
        .into_iter()
        .map(|(mx, my)| {
            let ex: f64 = rng.sample(StandardNormal);
            let ey: f64 = rng.sample(StandardNormal);
            (mx + sx * ex, my + sy * ey)
        })
        .collect()
}

/// Expected mean squared gap of the bridged hot-deck surrogate.
pub fn expected_gap_hotdeck(model: &AnalyticModel) -> f64 {
    (model.n as f64 - 1.0) / 3.0 * model.sigma2()
}

/// The mean-path term `M(t)` for `t = 0..=n`, one coordinate at a time.
///
/// Terms: `sum_{i<=t} mu_i^2 + (t/n)^2 S^2 - (2/n) P_t S
/// + 2 sum_{i<j<=t} (mu_i mu_j - S (mu_i + mu_j) / n)`, where `S` is the
/// total and `P_t` the partial sum of the means. `M` does not change when a
/// constant is added to every mean, so the means are centred first to keep
/// the terms small.
pub fn mean_path_term(model: &AnalyticModel) -> Vec<f64> {
    let n = model.n;
    let nf = n as f64;
    let mu = means(model);
    let mut out = vec![0.0; n + 1];
    for coord in 0..2 {
        let raw: Vec<f64> = mu.iter().map(|p| if coord == 0 { p.0 } else { p.1 }).collect();
        let centre = raw.iter().sum::<f64>() / nf;
        let m: Vec<f64> = raw.iter().map(|v| v - centre).collect();
        let s: f64 = m.iter().sum();
        let (mut sq, mut p, mut pairs, mut pair_sums) = (0.0, 0.0, 0.0, 0.0);
        for t in 0..=n {
            if t > 0 {
                let v = m[t - 1];
                // pairs (i, t) with i < t
                pairs += v * p;
                pair_sums += (t - 1) as f64 * v + p;
                sq += v * v;
                p += v;
            }
            let tf = t as f64;
            out[t] += sq + tf * tf / (nf * nf) * s * s - 2.0 / nf * p * s + 2.0 * (pairs - s / nf * pair_sums);
        }
    }
    out
}

/// Expected mean squared gap of linear interpolation.
pub fn expected_gap_li(model: &AnalyticModel) -> f64 {
    let m = mean_path_term(model);
    (model.n as f64 - 1.0) / 6.0 * model.sigma2() + m.iter().sum::<f64>() / (model.n as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Surrogate {
    /// Resampling from the true step distributions, bridged to the end.
    HotDeckOracle,
    Linear,
}

impl Surrogate {
    pub fn name(self) -> &'static str {
        match self {
            Surrogate::HotDeckOracle => "hotdeck",
            Surrogate::Linear => "LI",
        }
    }
}

fn mean_squared_gap(truth: &[(f64, f64)], resampled: Option<&[(f64, f64)]>) -> f64 {
    let n = truth.len();
    let nf = n as f64;
    let ln = truth.iter().fold((0.0, 0.0), |a, d| (a.0 + d.0, a.1 + d.1));
    let sn = resampled.map(|r| r.iter().fold((0.0, 0.0), |a, d| (a.0 + d.0, a.1 + d.1))).unwrap_or((0.0, 0.0));
    let (mut lx, mut ly, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0);
    let mut total = 0.0;
    for t in 0..=n {
        if t > 0 {
            lx += truth[t - 1].0;
            ly += truth[t - 1].1;
            if let Some(r) = resampled {
                sx += r[t - 1].0;
                sy += r[t - 1].1;
            }
        }
        let f = t as f64 / nf;
        let ex = lx - (f * (ln.0 - sn.0) + sx);
        let ey = ly - (f * (ln.1 - sn.1) + sy);
        total += ex * ex + ey * ey;
    }
    total / (nf + 1.0)
}

/// Average over `reps` fresh truths of the mean squared gap to `surrogate`.
pub fn monte_carlo_gap(model: &AnalyticModel, surrogate: Surrogate, reps: usize, seed: u64) -> Result<f64> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..reps {
        let truth = simulate_analytic_trace(model, &mut rng);
        sum += match surrogate {
            Surrogate::Linear => mean_squared_gap(&truth, None),
            Surrogate::HotDeckOracle => {
                let resampled = simulate_analytic_trace(model, &mut rng);
                mean_squared_gap(&truth, Some(&resampled))
            }
        };
    }
    Ok(sum / reps as f64)
}

/// Settings of the distance-travelled bias experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemicircleConfig {
    /// Number of evenly spaced missing blocks.
    pub blocks: usize,
    /// Duration of one step, seconds.
    pub step_s: f64,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Multiplier on the default temporal kernel scale.
    pub scale_mult: f64,
}

impl Default for SemicircleConfig {
    fn default() -> Self {
        SemicircleConfig { blocks: 8, step_s: 60.0, replicates: 100, alpha: 0.05, seed: 1, scale_mult: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub missing_fraction: f64,
    pub truth: f64,
    pub li: f64,
    pub tl_mean: f64,
    pub tl_lo: f64,
    pub tl_hi: f64,
}

impl BiasPoint {
    pub fn li_bias(&self) -> f64 {
        self.li - self.truth
    }

    pub fn band_width(&self) -> f64 {
        self.tl_hi - self.tl_lo
    }
}

fn distance(trace: &MobilityTrace) -> f64 {
    trace.events.iter().filter(|e| e.kind.is_flight()).map(|e| e.length()).sum()
}

/// Removes `missing_fraction` of the steps of `steps` as evenly spaced
/// blocks, one centred in each of `blocks` equal cycles.
pub fn remove_evenly(steps: &[Event], missing_fraction: f64, blocks: usize) -> MobilityTrace {
    let n = steps.len();
    let blocks = blocks.clamp(1, n.max(1));
    let mut drop = vec![false; n];
    for b in 0..blocks {
        let lo = b * n / blocks;
        let hi = (b + 1) * n / blocks;
        let len = hi - lo;
        let g = ((missing_fraction * len as f64).round() as usize).min(len.saturating_sub(2));
        let start = lo + (len - g) / 2;
        drop[start..start + g].iter_mut().for_each(|d| *d = true);
    }
    let mut events = Vec::new();
    let mut gaps = Vec::new();
    let mut i = 0;
    while i < n {
        if !drop[i] {
            events.push(steps[i]);
            i += 1;
            continue;
        }
        let j = (i..n).find(|&k| !drop[k]).unwrap_or(n);
        let first = &steps[i];
        let last = &steps[j - 1];
        gaps.push(MissingInterval {
            t_start: first.t,
            t_end: last.t_end(),
            anchor_start: first.start(),
            anchor_end: last.end(),
        });
        i = j;
    }
    MobilityTrace { subject_id: "semicircle".into(), frame: None, events, gaps }
}

/// Distance travelled on a jittered semicircle under increasing evenly
/// spaced missingness: truth, linear interpolation, and the temporally
/// local hot-deck mean with its order-statistic band.
///
/// `jitter_scale` is the per-step noise standard deviation in meters and
/// replaces the model's variances.
pub fn jittered_semicircle(model: &AnalyticModel, jitter_scale: f64, grid: &[f64], cfg: &SemicircleConfig) -> Result<Vec<BiasPoint>> {
    let model = AnalyticModel { sigma_x2: jitter_scale * jitter_scale, sigma_y2: jitter_scale * jitter_scale, ..*model }.validated()?;
    if grid.iter().any(|f| !(0.0..1.0).contains(f)) {
        return Err(Error::InvalidParameter("missing fractions must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let disp = simulate_analytic_trace(&model, &mut rng);
    let (mut x, mut y) = (0.0, 0.0);
    let steps: Vec<Event> = disp
        .iter()
        .enumerate()
        .map(|(i, &(dx, dy))| {
            let e = Event::flight(x, y, i as f64 * cfg.step_s, dx, dy, cfg.step_s);
            x += dx;
            y += dy;
            e
        })
        .collect();
    let full = MobilityTrace { subject_id: "semicircle".into(), frame: None, events: steps.clone(), gaps: Vec::new() };
    let truth = distance(&full);
    let tl = Method::parse("TL", 1.0, cfg.scale_mult)?;
    let mut out = Vec::with_capacity(grid.len());
    for &f in grid {
        let degraded = remove_evenly(&steps, f, cfg.blocks);
        let li = distance(&impute_trace(&degraded, &Method::Linear, 1, cfg.seed)?.replicates[0]);
        let reps = impute_trace(&degraded, &tl, cfg.replicates, cfg.seed)?;
        let values: Vec<f64> = reps.replicates.iter().map(distance).collect();
        let tl_mean = values.iter().sum::<f64>() / values.len() as f64;
        let (tl_lo, tl_hi) = if values.len() >= 2 { confidence_interval(&values, cfg.alpha)? } else { (tl_mean, tl_mean) };
        out.push(BiasPoint { missing_fraction: f, truth, li, tl_mean, tl_lo, tl_hi });
    }
    Ok(out)
}

/// One row of closed-form or simulated gap data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub n: usize,
    pub theta0: f64,
    pub method: String,
    pub value: f64,
}

/// Closed-form and Monte Carlo gaps for every `(n, theta0)` pair.
pub fn gap_table(ns: &[usize], thetas: &[f64], d: f64, sigma2: f64, reps: usize, seed: u64) -> Result<Vec<FigureRow>> {
    let mut rows = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        for (j, &theta0) in thetas.iter().enumerate() {
            let model = AnalyticModel::new(n, theta0, d, sigma2, sigma2)?;
            let cell_seed = seed ^ ((i as u64) << 32 | j as u64);
            let mut push = |method: &str, value: f64| rows.push(FigureRow { n, theta0, method: method.into(), value });
            push("hotdeck_closed", expected_gap_hotdeck(&model));
            push("LI_closed", expected_gap_li(&model));
            if reps > 0 {
                push("hotdeck_mc", monte_carlo_gap(&model, Surrogate::HotDeckOracle, reps, cell_seed)?);
                push("LI_mc", monte_carlo_gap(&model, Surrogate::Linear, reps, cell_seed)?);
            }
        }
    }
    Ok(rows)
}

pub fn write_figure_csv<W: Write>(rows: &[FigureRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BiasRow {
    jitter: f64,
    missing_fraction: f64,
    truth: f64,
    li: f64,
    tl_mean: f64,
    tl_lo: f64,
    tl_hi: f64,
}

/// Bias curves as CSV, one row per `(jitter, point)`.
pub fn write_bias_csv<W: Write>(rows: &[(f64, BiasPoint)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for &(jitter, p) in rows {
        w.serialize(BiasRow {
            jitter,
            missing_fraction: p.missing_fraction,
            truth: p.truth,
            li: p.li,
            tl_mean: p.tl_mean,
            tl_lo: p.tl_lo,
            tl_hi: p.tl_hi,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn model(n: usize, theta0: f64) -> AnalyticModel {
        AnalyticModel::new(n, theta0, 1.0, 1.0, 1.0).unwrap()
    }

    // Direct O(n^2) evaluation of the mean-path term, per coordinate.
    fn m_oracle(model: &AnalyticModel, t: usize) -> f64 {
        let n = model.n;
        let mu = means(model);
        let mut total = 0.0;
        for coord in 0..2 {
            let m: Vec<f64> = mu.iter().map(|p| if coord == 0 { p.0 } else { p.1 }).collect();
            let s: f64 = m.iter().sum();
            let mut v = 0.0;
            for i in 0..t {
                v += m[i] * m[i];
                for j in 0..n {
                    v -= 2.0 / n as f64 * m[i] * m[j];
                }
                for j in i + 1..t {
                    v += 2.0 * (m[i] * m[j] - s / n as f64 * (m[i] + m[j]));
                }
            }
            v += (t * t) as f64 / (n * n) as f64 * s * s;
            total += v;
        }
        total
    }

    #[test]
    fn mean_displacement_examples() {
        let m = AnalyticModel::new(11, 0.0, 4.0, 1.0, 1.0).unwrap();
        for t in 0..11 {
            assert_eq!(mean_displacement(&m, t).unwrap(), (2.0, 0.0));
        }
        let m = model(11, FRAC_PI_2);
        let (x, y) = mean_displacement(&m, 5).unwrap();
        assert_relative_eq!(x, 1.0);
        assert_eq!(y, 0.0);
        let (x, y) = mean_displacement(&m, 0).unwrap();
        assert!(x.abs() < 1e-15);
        assert_relative_eq!(y, 1.0);
        assert!(mean_displacement(&m, 11).is_err());
        assert_eq!(mean_displacement(&model(1, FRAC_PI_4), 0).unwrap().0, FRAC_PI_4.cos());
    }

    #[test]
    fn invalid_models() {
        assert!(AnalyticModel::new(0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(AnalyticModel::new(5, 2.0, 1.0, 1.0, 1.0).is_err());
        assert!(AnalyticModel::new(5, 0.5, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn deterministic_without_noise() {
        let m = AnalyticModel::new(20, 0.0, 9.0, 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = simulate_analytic_trace(&m, &mut rng);
        let len: f64 = d.iter().map(|p| p.0.hypot(p.1)).sum();
        assert_relative_eq!(len, 60.0);
        assert_eq!(monte_carlo_gap(&m, Surrogate::Linear, 10, 0).unwrap(), 0.0);
    }

    #[test]
    fn step_sample_mean_matches() {
        let m = AnalyticModel::new(5, FRAC_PI_4, 4.0, 1.0, 2.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = 10_000;
        let mut sum = vec![(0.0, 0.0); 5];
        for _ in 0..k {
            for (s, d) in sum.iter_mut().zip(simulate_analytic_trace(&m, &mut rng)) {
                s.0 += d.0;
                s.1 += d.1;
            }
        }
        for (t, s) in sum.iter().enumerate() {
            let (mx, my) = mean_displacement(&m, t).unwrap();
            assert!((s.0 / k as f64 - mx).abs() < 4.0 * (1.0 / k as f64).sqrt());
            assert!((s.1 / k as f64 - my).abs() < 4.0 * (2.25 / k as f64).sqrt());
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(expected_gap_hotdeck(&model(1, 0.0)), 0.0);
        assert_relative_eq!(expected_gap_hotdeck(&model(50, 0.0)), 98.0 / 3.0);
        let double = AnalyticModel::new(50, 0.3, 1.0, 2.0, 2.0).unwrap();
        assert_relative_eq!(expected_gap_hotdeck(&double), 2.0 * expected_gap_hotdeck(&model(50, 0.3)));
        assert_eq!(expected_gap_li(&model(1, FRAC_PI_2)), 0.0);
        assert!(expected_gap_li(&model(200, FRAC_PI_2)) > expected_gap_hotdeck(&model(200, FRAC_PI_2)));
    }

    #[test]
    fn mean_path_term_matches_direct_sum() {
        for (n, th) in [(2, FRAC_PI_2), (7, 0.4), (30, FRAC_PI_4), (60, FRAC_PI_2)] {
            let m = model(n, th);
            let fast = mean_path_term(&m);
            for t in 0..=n {
                assert!((fast[t] - m_oracle(&m, t)).abs() < 1e-8 * (1.0 + fast[t].abs()), "n={n} t={t}");
            }
            assert!(fast[0].abs() < 1e-9);
            assert!(fast[n].abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn straight_line_half_ratio() {
        for n in [2, 3, 50, 200, 800] {
            for s in [0.5, 1.0, 3.0] {
                let m = AnalyticModel::new(n, 0.0, 2.0, s, s).unwrap();
                let r = expected_gap_li(&m) / expected_gap_hotdeck(&m);
                assert!((r - 0.5).abs() < 1e-12, "n={n} ratio={r}");
            }
        }
    }

    #[test]
    fn monte_carlo_matches_closed_forms() {
        for (n, th) in [(50, 0.0), (50, FRAC_PI_2), (200, FRAC_PI_4)] {
            let m = model(n, th);
            let hd = monte_carlo_gap(&m, Surrogate::HotDeckOracle, 1000, 11).unwrap();
            let li = monte_carlo_gap(&m, Surrogate::Linear, 1000, 12).unwrap();
            assert!((hd / expected_gap_hotdeck(&m) - 1.0).abs() < 0.05, "n={n} hd={hd}");
            assert!((li / expected_gap_li(&m) - 1.0).abs() < 0.05, "n={n} li={li}");
        }
    }

    #[test]
    fn even_removal_shapes() {
        let steps: Vec<Event> = (0..100).map(|i| Event::flight(i as f64, 0.0, i as f64 * 10.0, 1.0, 0.0, 10.0)).collect();
        let full = remove_evenly(&steps, 0.0, 5);
        assert_eq!(full.events.len(), 100);
        assert!(full.gaps.is_empty());
        let half = remove_evenly(&steps, 0.5, 5);
        assert_eq!(half.events.len(), 50);
        assert_eq!(half.gaps.len(), 5);
        assert_eq!(half.gaps[0].t_start, 50.0);
        assert_eq!(half.gaps[0].anchor_end.x, 15.0);
    }

    #[test]
    fn semicircle_without_missingness_is_exact() {
        let m = AnalyticModel::new(120, FRAC_PI_2, 400.0, 0.0, 0.0).unwrap();
        let cfg = SemicircleConfig { replicates: 10, ..Default::default() };
        let pts = jittered_semicircle(&m, 5.0, &[0.0, 0.5], &cfg).unwrap();
        let p0 = pts[0];
        assert_eq!(p0.li, p0.truth);
        assert_eq!(p0.tl_lo, p0.truth);
        assert_eq!(p0.tl_hi, p0.truth);
        assert!(pts[1].li_bias() <= 0.0);
    }

    #[test]
    fn figure_csv_columns() {
        let rows = gap_table(&[10], &[0.0], 1.0, 1.0, 5, 0).unwrap();
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_figure_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,theta0,method,value\n"));
    }
}
