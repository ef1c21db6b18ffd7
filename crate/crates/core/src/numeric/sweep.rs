use std::f64::consts::TAU;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::dopri::integrate_schrodinger;
use super::series::{extract_amplitude, format_float};
use super::{check_tol, Method};
use crate::analytic::{amplitude_closed, ms_frequency, MethodId};
use crate::error::{Error, Result};
use crate::model::DriveParams;
use crate::su2::Spinor;

/// Smallest frequency used when choosing integration horizons, so that
/// `|Ω_ms| ≈ 0` does not ask for an unbounded run.
pub const OMEGA_FLOOR: f64 = 1e-3;

const SLOW_PERIODS: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub omega_par: f64,
    pub method: Method,
    pub message: String,
}

/// Resonance amplitudes on an ω∥ grid, one column per method. Failed points
/// are `None` and listed in `failures`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub omega_par_grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub amplitudes: Vec<Vec<Option<f64>>>,
    pub failures: Vec<SweepFailure>,
}

impl SweepResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn column(&self, method: Method) -> Option<&[Option<f64>]> {
        self.methods
            .iter()
            .position(|&m| m == method)
            .map(|i| self.amplitudes[i].as_slice())
    }

    /// `omega_par,<method>...` rows; failed points are written as `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega_par");
        for m in &self.methods {
            out.push(',');
            out.push_str(m.name());
        }
        out.push('\n');
        for (i, w) in self.omega_par_grid.iter().enumerate() {
            out.push_str(&format_float(*w));
            for col in &self.amplitudes {
                let _ = write!(out, ",{}", format_float(col[i].unwrap_or(f64::NAN)));
            }
            out.push('\n');
        }
        out
    }
}

/// Integration horizon for a numeric amplitude: 1.5 slow periods plus one
/// drive period consumed by HF averaging.
pub fn numeric_horizon(p: &DriveParams) -> Result<f64> {
    let omega = ms_frequency(p)?.abs().max(OMEGA_FLOOR);
    Ok(SLOW_PERIODS * TAU / omega + p.hf_period())
}

/// Amplitude from integrating |+⟩, HF-averaging and measuring the excursion.
pub fn numeric_amplitude(p: &DriveParams, tol: f64) -> Result<f64> {
    let t_end = numeric_horizon(p)?;
    let traj = integrate_schrodinger(p, &Spinor::plus(), t_end, p.hf_period() / 32.0, tol)?;
    extract_amplitude(&traj.series, p)
}

fn point_amplitude(p: &DriveParams, method: Method, tol: f64) -> Result<f64> {
    match method {
        Method::Analytic(m) => amplitude_closed(m, p),
        Method::Numeric => numeric_amplitude(p, tol),
    }
}

fn validate(template: &DriveParams, grid: &[f64], methods: &[Method], tol: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("omega_par grid is empty"));
    }
    if grid.iter().any(|w| !w.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(
            "omega_par grid must be finite and strictly increasing",
        ));
    }
    if methods.is_empty() {
        return Err(Error::domain("no methods requested"));
    }
    if methods.contains(&Method::Analytic(MethodId::ExactR0)) && template.r() != 0.0 {
        return Err(Error::domain("the exact method requires r = 0"));
    }
    if methods.contains(&Method::Numeric) {
        check_tol(tol)?;
    }
    Ok(())
}

/// Computes every (ω∥, method) point in parallel, recording failures instead
/// of stopping. Errors only on invalid inputs.
pub fn resonance_sweep_collect(
    template: &DriveParams,
    grid: &[f64],
    methods: &[Method],
    tol: f64,
) -> Result<SweepResult> {
    validate(template, grid, methods, tol)?;
    let jobs: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|m| (0..grid.len()).map(move |g| (m, g)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(m, g)| {
            let p = template.with_omega_par(grid[g])?;
            point_amplitude(&p, methods[m], tol)
        })
        .collect();

    let mut amplitudes = vec![vec![None; grid.len()]; methods.len()];
    let mut failures = Vec::new();
    for (&(m, g), result) in jobs.iter().zip(results) {
        match result {
            Ok(a) => amplitudes[m][g] = Some(a),
            Err(e) => failures.push(SweepFailure {
                omega_par: grid[g],
                method: methods[m],
                message: e.to_string(),
            }),
        }
    }
    Ok(SweepResult {
        omega_par_grid: grid.to_vec(),
        methods: methods.to_vec(),
        amplitudes,
        failures,
    })
}

/// Like [`resonance_sweep_collect`] but fails on the first failing point,
/// tagged with its ω∥.
pub fn resonance_sweep(
    template: &DriveParams,
    grid: &[f64],
    methods: &[Method],
    tol: f64,
) -> Result<SweepResult> {
    validate(template, grid, methods, tol)?;
    let per_point: Vec<Result<Vec<f64>>> = grid
        .par_iter()
        .map(|&w| {
            let p = template.with_omega_par(w)?;
            methods
                .iter()
                .map(|&m| point_amplitude(&p, m, tol))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::SweepPoint {
                    omega_par: w,
                    source: Box::new(e),
                })
        })
        .collect();
    let mut amplitudes = vec![Vec::with_capacity(grid.len()); methods.len()];
    for row in per_point {
        for (col, a) in amplitudes.iter_mut().zip(row?) {
            col.push(Some(a));
        }
    }
    Ok(SweepResult {
        omega_par_grid: grid.to_vec(),
        methods: methods.to_vec(),
        amplitudes,
        failures: Vec::new(),
    })
}
