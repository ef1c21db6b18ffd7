use std::fmt::Write as _;

use serde::Serialize;

use super::sweep::OMEGA_FLOOR;
use super::Method;
use crate::analytic::{expect_sz_closed, ms_frequency, MethodId};
use crate::error::{Error, Result};
use crate::model::DriveParams;
use crate::su2::Spinor;

const RANGE_SLACK: f64 = 1e-9;

/// Sampled `⟨σz⟩(t)` trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    method: Method,
    hf_averaged: bool,
    params: DriveParams,
}

impl TimeSeries {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        method: Method,
        params: DriveParams,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::domain(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain(
                "sample times must be finite and strictly increasing",
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= 1.0 + RANGE_SLACK)) {
            return Err(Error::domain(format!(
                "<sigma_z> sample {v} outside [-1, 1]"
            )));
        }
        Ok(TimeSeries {
            times,
            values,
            method,
            hf_averaged: false,
            params,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn is_hf_averaged(&self) -> bool {
        self.hf_averaged
    }

    pub fn params(&self) -> &DriveParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// `t,value` rows with `%.12e` formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{}", format_float(*t), format_float(*v));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("time series serializes")
    }
}

/// C-style `%.12e` (`-1.234567890123e-04`); `nan` for NaN.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Multiples of `dt` inside [t_start, t_end].
pub fn sample_times(t_start: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let first = (t_start / dt - 1e-9).ceil().max(0.0) as u64;
    let last = (t_end / dt + 1e-9).floor() as u64;
    let mut out: Vec<f64> = Vec::with_capacity((last + 1).saturating_sub(first) as usize);
    for k in first..=last {
        let t = (k as f64 * dt).clamp(t_start, t_end);
        if out.last().is_none_or(|&prev| t > prev) {
            out.push(t);
        }
    }
    out
}

/// Closed-form trace evaluated at `times`.
pub fn closed_form_series(
    method: MethodId,
    p: &DriveParams,
    init: &Spinor,
    times: &[f64],
) -> Result<TimeSeries> {
    let values = times
        .iter()
        .map(|&t| expect_sz_closed(method, t, p, init).map(|v| v.clamp(-1.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new(times.to_vec(), values, Method::Analytic(method), *p)
}

/// Largest pointwise difference between two series sampled at the same times.
pub fn max_deviation(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    if a.len() != b.len()
        || a.times
            .iter()
            .zip(&b.times)
            .any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0))
    {
        return Err(Error::domain("series are not sampled at the same times"));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Centered moving average over one drive period `W = 2π/Ω_HF`.
///
/// Each output is the exact mean of the piecewise-linear interpolant over
/// `[t − W/2, t + W/2]`; samples closer than `W/2` to either end are dropped.
pub fn hf_average(series: &TimeSeries, p: &DriveParams) -> Result<TimeSeries> {
    let window = p.hf_period();
    let half = 0.5 * window;
    let (t, v) = (&series.times, &series.values);
    if series.span() < window {
        return Err(Error::domain(format!(
            "series spans {} but one drive period is {window}",
            series.span()
        )));
    }
    let max_spacing = t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if max_spacing > window / 10.0 * (1.0 + 1e-9) {
        return Err(Error::domain(format!(
            "sample spacing {max_spacing} exceeds a tenth of the drive period ({})",
            window / 10.0
        )));
    }

    let mut prefix = Vec::with_capacity(t.len());
    prefix.push(0.0);
    for i in 1..t.len() {
        prefix.push(prefix[i - 1] + 0.5 * (t[i] - t[i - 1]) * (v[i] + v[i - 1]));
    }
    // ∫ from t[0] to x of the interpolant; `seg` is the segment holding x.
    let cumulative = |x: f64, seg: usize| {
        let (a, b) = (t[seg], t[seg + 1]);
        let frac = (x - a) / (b - a);
        let vx = v[seg] + frac * (v[seg + 1] - v[seg]);
        prefix[seg] + 0.5 * (x - a) * (v[seg] + vx)
    };

    let (lo_bound, hi_bound) = (t[0] + half, t[t.len() - 1] - half);
    let tol = 1e-9 * window;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let (mut left, mut right) = (0usize, 0usize);
    for &center in t
        .iter()
        .filter(|&&c| c >= lo_bound - tol && c <= hi_bound + tol)
    {
        let a = (center - half).max(t[0]);
        let b = (center + half).min(t[t.len() - 1]);
        while left + 2 < t.len() && t[left + 1] <= a {
            left += 1;
        }
        while right + 2 < t.len() && t[right + 1] < b {
            right += 1;
        }
        let integral = cumulative(b, right) - cumulative(a, left);
        times.push(center);
        values.push((integral / (b - a)).clamp(-1.0, 1.0));
    }
    if times.is_empty() {
        return Err(Error::domain("series too short for one drive period"));
    }
    let mut out = TimeSeries::new(times, values, series.method, series.params)?;
    out.hf_averaged = true;
    Ok(out)
}

/// Half peak-to-peak excursion of the (HF-averaged) trace.
///
/// Raw numeric traces are HF-averaged first. The trace must cover
/// 1.25 periods of `2π/|Ω_ms|` (with `|Ω_ms|` floored at [`OMEGA_FLOOR`]).
pub fn extract_amplitude(series: &TimeSeries, p: &DriveParams) -> Result<f64> {
    let needs_average = series.method == Method::Numeric && !series.hf_averaged;
    let averaged;
    let trace = if needs_average {
        averaged = hf_average(series, p)?;
        &averaged
    } else {
        series
    };
    let omega = ms_frequency(p)?.abs().max(OMEGA_FLOOR);
    let required = 1.25 * std::f64::consts::TAU / omega;
    if trace.span() < required * (1.0 - 1e-12) || trace.len() < 3 {
        let margin = if needs_average { p.hf_period() } else { 0.0 };
        let start = series.times.first().copied().unwrap_or(0.0);
        return Err(Error::InsufficientSpan {
            span: trace.span(),
            required,
            t_end_needed: start + required + margin,
        });
    }
    let (max, min) = refined_extrema(&trace.times, &trace.values);
    Ok((0.5 * (max - min)).max(0.0))
}

// Extremes of the samples, refined by a parabola through the neighbours of
// interior extrema.
fn refined_extrema(t: &[f64], v: &[f64]) -> (f64, f64) {
    let argmax = (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best });
    let argmin = (0..v.len()).fold(0, |best, i| if v[i] < v[best] { i } else { best });
    let vertex = |i: usize| {
        if i == 0 || i + 1 == v.len() {
            return v[i];
        }
        let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        if (h0 - h1).abs() > 1e-9 * h0.max(h1) {
            return v[i];
        }
        let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
        let curvature = a - 2.0 * b + c;
        if curvature == 0.0 {
            return b;
        }
        b - (c - a).powi(2) / (8.0 * curvature)
    };
    (
        vertex(argmax).clamp(-1.0, 1.0),
        vertex(argmin).clamp(-1.0, 1.0),
    )
}
