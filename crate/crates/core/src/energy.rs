//! Power traces, energy integration and power samplers.
//!
//! Trace files are plain text with one sample per line:
//!
//! ```text
//! # t_s   fast_W  slow_W  dram_W  other_W
//! 0.00    3.10    0.21    0.12    0.30
//! 0.25    3.12    0.21    0.13    0.30
//! ```
//!
//! The nominal sensor period is 250 ms but any strictly increasing
//! timestamps are accepted.

use std::path::Path;

use crate::error::{Error, Result};

/// Nominal sampling period of the power sensors, in seconds.
pub const NOMINAL_PERIOD_S: f64 = 0.25;

pub const DOMAINS: [&str; 4] = ["fast-cluster", "slow-cluster", "dram", "other"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerSample {
    pub t: f64,
    /// Watts for `fast-cluster`, `slow-cluster`, `dram`, `other`.
    pub watts: [f64; 4],
}

impl PowerSample {
    pub fn new(t: f64, watts: [f64; 4]) -> Self {
        Self { t, watts }
    }

    /// All power attributed to the `other` domain.
    pub fn total_only(t: f64, watts: f64) -> Self {
        Self {
            t,
            watts: [0.0, 0.0, 0.0, watts],
        }
    }

    pub fn total(&self) -> f64 {
        self.watts.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    pub joules: [f64; 4],
    pub total_joules: f64,
    /// Mean power over the window.
    pub avg_watts: f64,
}

/// Checks the trace invariants: strictly increasing time, non-negative power.
pub fn check_trace(trace: &[PowerSample]) -> std::result::Result<(), String> {
    for (i, s) in trace.iter().enumerate() {
        if !s.t.is_finite() || s.watts.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(format!("sample {i}: non-finite time or negative power"));
        }
        if i > 0 && s.t <= trace[i - 1].t {
            return Err(format!("sample {i}: timestamp {} not after {}", s.t, trace[i - 1].t));
        }
    }
    Ok(())
}

/// Piecewise-linear value of domain `d` at `t`, held constant past the ends.
fn value_at(trace: &[PowerSample], d: usize, t: f64) -> f64 {
    let first = &trace[0];
    let last = &trace[trace.len() - 1];
    if t <= first.t {
        return first.watts[d];
    }
    if t >= last.t {
        return last.watts[d];
    }
    let i = trace.partition_point(|s| s.t <= t);
    let (lo, hi) = (&trace[i - 1], &trace[i]);
    let w = (t - lo.t) / (hi.t - lo.t);
    lo.watts[d] + w * (hi.watts[d] - lo.watts[d])
}

/// Trapezoidal energy over `[t0, t1]`. Window edges between samples are
/// linearly interpolated; edges outside the trace hold the nearest sample.
/// Returns `None` for an empty trace or an empty window.
pub fn integrate_energy(trace: &[PowerSample], t0: f64, t1: f64) -> Option<EnergyReport> {
    if trace.is_empty() || !(t0 < t1) {
        return None;
    }
    let mut knots = vec![t0];
    knots.extend(trace.iter().map(|s| s.t).filter(|&t| t > t0 && t < t1));
    knots.push(t1);
    let mut joules = [0.0; 4];
    for (d, j) in joules.iter_mut().enumerate() {
        *j = knots
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (value_at(trace, d, w[0]) + value_at(trace, d, w[1])))
            .sum();
    }
    let total: f64 = joules.iter().sum();
    Some(EnergyReport {
        joules,
        total_joules: total,
        avg_watts: total / (t1 - t0),
    })
}

pub fn parse_trace(text: &str) -> std::result::Result<Vec<PowerSample>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        if fields.len() != 5 {
            return Err(format!("line {}: expected 5 fields, got {}", lineno + 1, fields.len()));
        }
        out.push(PowerSample::new(fields[0], [fields[1], fields[2], fields[3], fields[4]]));
    }
    check_trace(&out)?;
    Ok(out)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<PowerSample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_trace(&text).map_err(|msg| Error::Parse {
        path: path.to_path_buf(),
        msg,
    })
}

pub fn format_trace(trace: &[PowerSample]) -> String {
    let mut s = String::from("# t_s fast_W slow_W dram_W other_W\n");
    for p in trace {
        s.push_str(&format!("{} {} {} {} {}\n", p.t, p.watts[0], p.watts[1], p.watts[2], p.watts[3]));
    }
    s
}

/// Source of energy readings for a timed region on the benchmark timeline.
pub trait PowerSampler {
    fn start(&mut self, t: f64);
    /// Ends the region started by the last `start`; `None` when no energy is available.
    fn stop(&mut self, t: f64) -> Option<EnergyReport>;
}

/// No power information: records carry no energy columns.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoSampler;

impl PowerSampler for NoSampler {
    fn start(&mut self, _: f64) {}

    fn stop(&mut self, _: f64) -> Option<EnergyReport> {
        None
    }
}

/// Mock sensor reporting a constant total power.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPower {
    pub watts: f64,
    t0: f64,
}

impl ConstantPower {
    pub fn new(watts: f64) -> Self {
        Self { watts, t0: 0.0 }
    }
}

impl PowerSampler for ConstantPower {
    fn start(&mut self, t: f64) {
        self.t0 = t;
    }

    fn stop(&mut self, t: f64) -> Option<EnergyReport> {
        let j = self.watts * (t - self.t0);
        Some(EnergyReport {
            joules: [0.0, 0.0, 0.0, j],
            total_joules: j,
            avg_watts: self.watts,
        })
    }
}

/// Replays a pre-recorded trace whose time axis is the benchmark timeline.
#[derive(Clone, Debug)]
pub struct ReplaySampler {
    trace: Vec<PowerSample>,
    t0: f64,
}

impl ReplaySampler {
    pub fn new(trace: Vec<PowerSample>) -> std::result::Result<Self, String> {
        check_trace(&trace)?;
        Ok(Self { trace, t0: 0.0 })
    }
}

impl PowerSampler for ReplaySampler {
    fn start(&mut self, t: f64) {
        self.t0 = t;
    }

    fn stop(&mut self, t: f64) -> Option<EnergyReport> {
        integrate_energy(&self.trace, self.t0, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_ramp() {
        let tr = [PowerSample::total_only(0.0, 2.0), PowerSample::total_only(1.0, 4.0)];
        assert_eq!(integrate_energy(&tr, 0.0, 1.0).unwrap().total_joules, 3.0);
    }

    #[test]
    fn constant_five_watts() {
        let tr = [PowerSample::total_only(0.0, 5.0), PowerSample::total_only(2.0, 5.0)];
        assert_eq!(integrate_energy(&tr, 0.0, 2.0).unwrap().total_joules, 10.0);
    }

    #[test]
    fn sensor_period_trace() {
        let tr: Vec<_> = (0..40).map(|i| PowerSample::total_only(i as f64 * 0.25, 3.5)).collect();
        let e = integrate_energy(&tr, 0.0, 10.0).unwrap().total_joules;
        assert!((e - 35.0).abs() <= 1e-9);
    }

    #[test]
    fn replay_constant_half_second() {
        let tr: Vec<_> = [0.0, 0.25, 0.5].iter().map(|&t| PowerSample::total_only(t, 2.0)).collect();
        let mut s = ReplaySampler::new(tr).unwrap();
        s.start(0.0);
        assert_eq!(s.stop(0.5).unwrap().total_joules, 1.0);
    }

    #[test]
    fn window_inside_segment_interpolates() {
        let tr = [PowerSample::total_only(0.0, 0.0), PowerSample::total_only(2.0, 4.0)];
        // power = 2t, integral over [0.5, 1.5] = t^2 = 2.25 - 0.25
        let e = integrate_energy(&tr, 0.5, 1.5).unwrap().total_joules;
        assert!((e - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_trace_has_no_energy() {
        assert!(integrate_energy(&[], 0.0, 1.0).is_none());
        let mut s = NoSampler;
        s.start(0.0);
        assert!(s.stop(1.0).is_none());
    }

    #[test]
    fn domains_sum_to_total() {
        let tr = [
            PowerSample::new(0.0, [3.0, 0.5, 0.25, 0.25]),
            PowerSample::new(1.0, [3.0, 0.5, 0.25, 0.25]),
        ];
        let r = integrate_energy(&tr, 0.0, 1.0).unwrap();
        assert_eq!(r.joules, [3.0, 0.5, 0.25, 0.25]);
        assert_eq!(r.total_joules, 4.0);
    }

    #[test]
    fn parse_and_reject() {
        let tr = parse_trace("# header\n0 1 2 3 4\n0.25 1 2 3 4 # trailing\n\n").unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr[1].total(), 10.0);
        assert!(parse_trace("0 1 2 3\n").is_err());
        assert!(parse_trace("0 1 2 3 4\n0 1 2 3 4\n").is_err());
        assert!(parse_trace("0 1 -2 3 4\n").is_err());
        assert_eq!(parse_trace(&format_trace(&tr)).unwrap(), tr);
    }

    #[test]
    fn constant_sampler_identity() {
        let mut s = ConstantPower::new(4.0);
        s.start(1.0);
        let r = s.stop(3.5).unwrap();
        assert_eq!(r.total_joules, 10.0);
        assert_eq!(r.avg_watts, 4.0);
    }
}
