//! Affine communication cost for data shuffling and its calibration.
//!
//! A transfer of `m` MB of which a fraction `tau` actually crosses the network
//! costs `t_s + t_w * m * tau` seconds. One coefficient pair is used for every
//! process pair; intra- and inter-node links are not distinguished.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_fraction, ensure_non_negative, ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommParams {
    t_s: f64,
    t_w: f64,
}

impl CommParams {
    pub fn new(t_s: f64, t_w: f64) -> Result<Self> {
        ensure_non_negative("t_s", t_s)?;
        ensure_positive("t_w", t_w)?;
        Ok(Self { t_s, t_w })
    }

    /// Coefficients from the ping-pong calibration of the reference platform:
    /// 5.39e-3 s fixed, 3.35e-2 s/MB.
    pub fn reference_platform() -> Self {
        Self {
            t_s: 5.39e-3,
            t_w: 3.35e-2,
        }
    }

    /// Size-independent cost per transfer, seconds.
    pub fn t_s(&self) -> f64 {
        self.t_s
    }

    /// Size-proportional cost, seconds per MB.
    pub fn t_w(&self) -> f64 {
        self.t_w
    }

    /// Same params with the proportional cost multiplied by `factor`.
    pub fn with_scaled_t_w(&self, factor: f64) -> Result<Self> {
        Self::new(self.t_s, self.t_w * factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub msg_size: f64,
    pub elapsed: f64,
}

impl CalibrationSample {
    pub fn new(msg_size: f64, elapsed: f64) -> Result<Self> {
        ensure_positive("msg_size", msg_size)?;
        ensure_positive("elapsed", elapsed)?;
        Ok(Self { msg_size, elapsed })
    }
}

pub fn transfer_time(params: &CommParams, msg_size: f64, tau: f64) -> Result<f64> {
    ensure_non_negative("msg_size", msg_size)?;
    ensure_fraction("tau", tau)?;
    Ok(transfer_time_unchecked(params, msg_size, tau))
}

pub(crate) fn transfer_time_unchecked(params: &CommParams, msg_size: f64, tau: f64) -> f64 {
    params.t_s + params.t_w * msg_size * tau
}

/// Result of a least-squares calibration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommFit {
    pub params: CommParams,
    /// `elapsed - predicted` for each input sample, in input order.
    pub residuals: Vec<f64>,
    pub rmse: f64,
    /// Set when the raw intercept came out negative and was clamped to zero.
    pub intercept_clamped: bool,
    pub warnings: Vec<String>,
}

/// Ordinary least squares fit of `elapsed = t_s + t_w * msg_size`.
pub fn fit_comm_params(samples: &[CalibrationSample]) -> Result<CommFit> {
    if samples.len() < 2 {
        return Err(Error::Calibration(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    for s in samples {
        ensure_positive("msg_size", s.msg_size)?;
        ensure_positive("elapsed", s.elapsed)?;
    }

    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.msg_size).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.elapsed).sum::<f64>() / n;
    let (sxx, sxy) = samples.iter().fold((0.0, 0.0), |(sxx, sxy), s| {
        let dx = s.msg_size - mean_x;
        (sxx + dx * dx, sxy + dx * (s.elapsed - mean_y))
    });
    // Centered sums are exactly zero when all sizes coincide.
    if sxx <= f64::EPSILON * mean_x * mean_x * n {
        return Err(Error::Calibration(
            "all samples share one message size; the fit is singular".into(),
        ));
    }

    let t_w = sxy / sxx;
    if t_w.is_nan() || t_w <= 0.0 {
        return Err(Error::Calibration(format!(
            "fitted t_w = {t_w:e} s/MB is not positive; samples do not grow with message size"
        )));
    }
    let raw_t_s = mean_y - t_w * mean_x;
    let mut warnings = Vec::new();
    let intercept_clamped = raw_t_s < 0.0;
    let t_s = if intercept_clamped {
        warnings.push(format!(
            "fitted t_s = {raw_t_s:e} s is negative; clamped to 0"
        ));
        0.0
    } else {
        raw_t_s
    };

    let params = CommParams { t_s, t_w };
    let residuals: Vec<f64> = samples
        .iter()
        .map(|s| s.elapsed - transfer_time_unchecked(&params, s.msg_size, 1.0))
        .collect();
    let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();

    Ok(CommFit {
        params,
        residuals,
        rmse,
        intercept_clamped,
        warnings,
    })
}

#[derive(Debug, Deserialize)]
struct SampleRow {
    msg_size_mb: f64,
    elapsed_s: f64,
}

/// Reads samples from CSV with the header `msg_size_mb,elapsed_s`.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<CalibrationSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["msg_size_mb", "elapsed_s"] {
        return Err(Error::Config {
            line: 1,
            message: format!(
                "expected header `msg_size_mb,elapsed_s`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<SampleRow>().enumerate() {
        let line = i + 2;
        let row = row?;
        let sample =
            CalibrationSample::new(row.msg_size_mb, row.elapsed_s).map_err(|e| Error::Config {
                line,
                message: e.to_string(),
            })?;
        out.push(sample);
    }
    Ok(out)
}
