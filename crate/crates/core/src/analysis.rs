//! Statistical comparison of measured and modeled block series: Pearson
//! correlation, distributions, SNR traces, and the CSV interchange format.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rx_dsp::BlockSeries;

/// Pearson correlation result. `defined` is false when either input has zero
/// variance; `rho` is then reported as 0.0 so constant baselines stay
/// comparable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub rho: f64,
    pub defined: bool,
}

fn check_same_grid(a: &BlockSeries, b: &BlockSeries) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "series lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if let Some(i) = a
        .centers()
        .iter()
        .zip(b.centers())
        .position(|(x, y)| x != y)
    {
        return Err(Error::invalid(format!(
            "block grids differ first at index {i}: center {} vs {}",
            a.centers()[i],
            b.centers()[i]
        )));
    }
    Ok(())
}

/// Pearson correlation coefficient between two series on identical block
/// grids.
pub fn pearson(a: &BlockSeries, b: &BlockSeries) -> Result<Correlation> {
    check_same_grid(a, b)?;
    if a.len() < 2 {
        return Err(Error::invalid("need at least 2 blocks to correlate"));
    }
    for (name, s) in [("first", a), ("second", b)] {
        if let Some(i) = s.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "{name} series has non-finite value at block {i}"
            )));
        }
    }
    // A mathematically constant series has zero variance even when the
    // rounded mean does not subtract to exact zeros.
    let is_constant = |s: &BlockSeries| s.values().windows(2).all(|w| w[0] == w[1]);
    if is_constant(a) || is_constant(b) {
        return Ok(Correlation {
            rho: 0.0,
            defined: false,
        });
    }
    let n = a.len() as f64;
    let ma = a.mean();
    let mb = b.mean();
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.values().iter().zip(b.values()) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(Correlation {
            rho: 0.0,
            defined: false,
        });
    }
    Ok(Correlation {
        rho: (cov / n) / ((va / n).sqrt() * (vb / n).sqrt()),
        defined: true,
    })
}

/// Normalized histogram of the series values: `(bin_center, probability)`
/// rows whose probabilities sum to one. With `log_x` the bins are spaced
/// geometrically, which needs strictly positive values.
pub fn histogram(series: &BlockSeries, n_bins: usize, log_x: bool) -> Result<Vec<(f64, f64)>> {
    histogram_of(series.values(), n_bins, log_x)
}

pub(crate) fn histogram_of(values: &[f64], n_bins: usize, log_x: bool) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::invalid("cannot histogram an empty series"));
    }
    if n_bins < 2 {
        return Err(Error::invalid("need at least 2 bins"));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value at index {i}")));
    }
    let transformed: Vec<f64> = if log_x {
        if let Some(i) = values.iter().position(|&v| v <= 0.0) {
            return Err(Error::invalid(format!(
                "logarithmic bins need positive values, found {} at index {i}",
                values[i]
            )));
        }
        values.iter().map(|v| v.ln()).collect()
    } else {
        values.to_vec()
    };
    let lo = transformed.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = transformed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut counts = vec![0usize; n_bins];
    for &v in &transformed {
        let idx = if span == 0.0 {
            0
        } else {
            (((v - lo) / span * n_bins as f64) as usize).min(n_bins - 1)
        };
        counts[idx] += 1;
    }
    let total = values.len() as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mid = lo + (i as f64 + 0.5) / n_bins as f64 * span;
            let center = if log_x { mid.exp() } else { mid };
            (center, c as f64 / total)
        })
        .collect())
}

/// Converts a distortion-power series into an SNR series in dB:
/// `10 log10(signal_power / value)`. Zero-distortion blocks carry the
/// infinity sentinel.
pub fn snr_series(metrics: &BlockSeries, signal_power: f64) -> Result<BlockSeries> {
    if !(signal_power > 0.0) || !signal_power.is_finite() {
        return Err(Error::invalid("signal power must be positive and finite"));
    }
    let values: Vec<f64> = metrics
        .values()
        .iter()
        .map(|&v| {
            if v == 0.0 {
                f64::INFINITY
            } else {
                10.0 * (signal_power / v).log10()
            }
        })
        .collect();
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::invalid(format!(
            "negative distortion power at block {i}"
        )));
    }
    BlockSeries::new(metrics.block_size(), metrics.centers().to_vec(), values)
}

/// Empirical quantile (linear interpolation between order statistics),
/// `p` in [0, 1].
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("cannot take a percentile of nothing"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("percentile {p} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        Ok(sorted[i] + frac * (sorted[i + 1] - sorted[i]))
    } else {
        Ok(sorted[i])
    }
}

const CSV_HEADER: &str = "block_index,value";

/// Writes a block series as `block_index,value` CSV with LF endings.
pub fn write_series_csv(series: &BlockSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{CSV_HEADER}")?;
    for (c, v) in series.centers().iter().zip(series.values()) {
        writeln!(out, "{c},{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a series written by [`write_series_csv`]. The block size is
/// inferred from the center spacing (0 when only one block is present).
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<BlockSeries> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(1, "empty file, expected CSV header"))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::format(
            1,
            format!("expected header `{CSV_HEADER}`, got `{header}`"),
        ));
    }
    let mut centers = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (c, v) = line
            .split_once(',')
            .ok_or_else(|| Error::format(idx + 1, format!("expected `index,value`, got `{line}`")))?;
        centers.push(
            c.trim()
                .parse::<usize>()
                .map_err(|_| Error::format(idx + 1, format!("invalid block index `{c}`")))?,
        );
        values.push(
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::format(idx + 1, format!("invalid value `{v}`")))?,
        );
    }
    if centers.is_empty() {
        return Err(Error::format(2, "CSV contains no rows"));
    }
    let m = if centers.len() >= 2 {
        (centers[1] - centers[0]).saturating_sub(1)
    } else {
        0
    };
    BlockSeries::new(m, centers, values)
}
