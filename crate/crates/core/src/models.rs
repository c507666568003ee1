//! Analytical EEPN machinery: dispersion memory, group-delay profile,
//! frequency-dependent phase error (FDPE), the data-aided CPR mean phase,
//! and the time-varying distortion-power predictors.
//!
//! The central quantity is the moving variance of the local-oscillator phase
//! over the dispersion memory window: blocks where the LO phase wanders
//! within the window predict low distortion, blocks where it swings predict
//! a burst. `temporal_gn_predict` evaluates that in the time domain;
//! `fdpe_distortion` evaluates the same window through its spectral-sampling
//! twin.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{LinkParams, PhaseTrace};
use crate::error::{Error, Result};
use crate::rx_dsp::{block_centers, BlockSeries};

/// Dispersion-induced memory: duration `tau_cd = 2 pi |beta2 L| R` and its
/// length in samples at the symbol rate, `n_cd = round(R * tau_cd)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdMemory {
    tau_cd: f64,
    n_cd: usize,
}

impl CdMemory {
    pub fn tau_cd(&self) -> f64 {
        self.tau_cd
    }

    pub fn n_cd(&self) -> usize {
        self.n_cd
    }
}

/// Dispersion memory of a link, counted at the symbol rate.
pub fn cd_memory(params: &LinkParams) -> CdMemory {
    let tau_cd = 2.0 * std::f64::consts::PI * params.beta2_l().abs() * params.symbol_rate();
    CdMemory {
        tau_cd,
        n_cd: (params.symbol_rate() * tau_cd).round() as usize,
    }
}

/// Dispersion memory in samples when counted at an arbitrary rate (e.g. the
/// 2-samples-per-symbol DSP rate).
pub fn cd_memory_samples(params: &LinkParams, rate: f64) -> usize {
    (rate * cd_memory(params).tau_cd).round() as usize
}

/// Group delay of the dispersion-compensation all-pass on `n_bins` bins
/// spanning [-R/2, R/2]: `tau_g(f) = 2 pi beta2_l f`. The band edges sit at
/// +-tau_cd/2 in magnitude.
pub fn group_delay_profile(params: &LinkParams, n_bins: usize) -> Result<Vec<(f64, f64)>> {
    if n_bins < 2 {
        return Err(Error::invalid("need at least 2 frequency bins"));
    }
    let r = params.symbol_rate();
    let coeff = 2.0 * std::f64::consts::PI * params.beta2_l();
    Ok((0..n_bins)
        .map(|k| {
            let f = -r / 2.0 + k as f64 * r / (n_bins - 1) as f64;
            (f, coeff * f)
        })
        .collect())
}

/// Per-frequency-bin phase error at one time instant.
#[derive(Debug, Clone)]
pub struct SpectralPhaseError {
    /// Symbol index the spectrum is anchored to.
    pub center: usize,
    /// `(frequency in Hz, phase error in rad)` per bin.
    pub bins: Vec<(f64, f64)>,
}

fn check_symbol_rate(trace: &PhaseTrace, params: &LinkParams) -> Result<()> {
    let rel = (trace.sample_rate() - params.symbol_rate()).abs() / params.symbol_rate();
    if rel > 1e-9 {
        return Err(Error::invalid(format!(
            "trace rate {} does not match symbol rate {}",
            trace.sample_rate(),
            params.symbol_rate()
        )));
    }
    Ok(())
}

/// Frequency-dependent phase error at symbol `center`: bin k carries the LO
/// phase sample delayed by the compensation filter's group delay,
/// `trace[center + round(R * tau_g[k])]`. Delays span [-n_cd/2, n_cd/2].
pub fn fdpe(
    trace: &PhaseTrace,
    params: &LinkParams,
    center: usize,
    n_bins: usize,
) -> Result<SpectralPhaseError> {
    check_symbol_rate(trace, params)?;
    let profile = group_delay_profile(params, n_bins)?;
    let r = params.symbol_rate();
    let n = trace.len() as i64;
    let mut bins = Vec::with_capacity(n_bins);
    for (f, tau) in profile {
        let delay = (r * tau).round() as i64;
        let idx = center as i64 + delay;
        if idx < 0 || idx >= n {
            return Err(Error::out_of_range(format!(
                "FDPE at center {center} needs trace index {idx} (trace length {n})"
            )));
        }
        bins.push((f, trace.phases()[idx as usize]));
    }
    Ok(SpectralPhaseError { center, bins })
}

/// Centered moving average of the trace with window `n_cd + 1`: the phase a
/// data-aided CPR estimates and removes. Only full windows are produced;
/// returns the averaged trace together with the input index of its first
/// value.
pub fn idr_mean_phase(trace: &PhaseTrace, n_cd: usize) -> Result<(PhaseTrace, usize)> {
    let w = n_cd + 1;
    if trace.len() < w {
        return Err(Error::invalid(format!(
            "trace length {} shorter than averaging window {w}",
            trace.len()
        )));
    }
    let mut values = Vec::with_capacity(trace.len() - w + 1);
    for_each_window_agg(trace.phases(), w, |agg| values.push(agg.mean));
    Ok((PhaseTrace::new(values, trace.sample_rate())?, w / 2))
}

/// Moving population variance with the first value centered at index
/// `first_center` of the source trace.
#[derive(Debug, Clone)]
pub struct MovingSeries {
    first_center: usize,
    values: Vec<f64>,
}

impl MovingSeries {
    pub fn first_center(&self) -> usize {
        self.first_center
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at source index `i`, clamping into the valid center range.
    pub fn value_at_clamped(&self, i: usize) -> f64 {
        let idx = i
            .saturating_sub(self.first_center)
            .min(self.values.len() - 1);
        self.values[idx]
    }
}

/// Windows up to this length are evaluated directly per window; the
/// per-window mean adapts to the window, so even a near-degenerate pair of
/// samples keeps full relative accuracy.
const DIRECT_WINDOW_CUTOFF: usize = 64;

/// Population variance over every full centered window of `window` samples
/// (the divisor is `window`, not `window - 1`).
///
/// Single pass over the trace. Long windows are assembled by merging partial
/// aggregates (count, mean, M2) at block boundaries instead of differencing
/// prefix sums, which would lose the small-variance windows to cancellation;
/// each block is shifted by its leading sample so accuracy does not depend
/// on the absolute phase level.
pub fn moving_variance(trace: &PhaseTrace, window: usize) -> Result<MovingSeries> {
    if window == 0 {
        return Err(Error::invalid("window must be >= 1"));
    }
    let n = trace.len();
    if n < window {
        return Err(Error::invalid(format!(
            "trace length {n} shorter than window {window}"
        )));
    }
    let x = trace.phases();
    let mut values = Vec::with_capacity(n - window + 1);
    if window == 1 {
        values.resize(n, 0.0);
    } else if window <= DIRECT_WINDOW_CUTOFF {
        for s in 0..=n - window {
            values.push(direct_window_variance(&x[s..s + window]));
        }
    } else {
        for_each_window_agg(x, window, |agg| {
            values.push(agg.m2 / agg.count);
        });
    }
    Ok(MovingSeries {
        first_center: window / 2,
        values,
    })
}

/// Corrected two-pass population variance of one window.
fn direct_window_variance(win: &[f64]) -> f64 {
    let w = win.len() as f64;
    let mean = win.iter().sum::<f64>() / w;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for &v in win {
        let d = v - mean;
        s1 += d;
        s2 += d * d;
    }
    (s2 - s1 * s1 / w) / w
}

/// Running statistics of a sample set, combinable without revisiting samples.
#[derive(Clone, Copy)]
struct Agg {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Agg {
    const EMPTY: Agg = Agg {
        count: 0.0,
        mean: 0.0,
        m2: 0.0,
    };

    fn merge(a: Agg, b: Agg) -> Agg {
        if a.count == 0.0 {
            return b;
        }
        if b.count == 0.0 {
            return a;
        }
        let count = a.count + b.count;
        let delta = b.mean - a.mean;
        Agg {
            count,
            mean: a.mean + delta * b.count / count,
            m2: a.m2 + b.m2 + delta * delta * a.count * b.count / count,
        }
    }
}

/// Welford accumulator with a Neumaier carry on the squared-deviation sum,
/// keeping the accumulated M2 to a few ulps even over thousands of pushes.
#[derive(Clone, Copy)]
struct Welford {
    count: f64,
    mean: f64,
    m2: f64,
    carry: f64,
}

impl Welford {
    const EMPTY: Welford = Welford {
        count: 0.0,
        mean: 0.0,
        m2: 0.0,
        carry: 0.0,
    };

    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        let inc = delta * (x - self.mean);
        let sum = self.m2 + inc;
        self.carry += if self.m2.abs() >= inc.abs() {
            (self.m2 - sum) + inc
        } else {
            (inc - sum) + self.m2
        };
        self.m2 = sum;
    }

    fn agg(&self) -> Agg {
        Agg {
            count: self.count,
            mean: self.mean,
            m2: self.m2 + self.carry,
        }
    }
}

/// Calls `visit` with the aggregate of every full window of `w` samples, in
/// window-start order. O(n) time, O(w) scratch. Internally each block works
/// relative to its leading sample so M2 accuracy does not depend on the
/// absolute phase level; the visited mean is shifted back to absolute.
fn for_each_window_agg(x: &[f64], w: usize, mut visit: impl FnMut(Agg)) {
    let n = x.len();
    let n_out = n - w + 1;
    // suffix[k] aggregates x[base+k .. base+w); a window starting at base+k
    // is suffix[k] merged with the running aggregate of x[base+w .. start+w).
    let mut suffix = vec![Agg::EMPTY; w];
    let mut base = 0usize;
    while base < n_out {
        let shift = x[base];
        let mut acc = Welford::EMPTY;
        for k in (0..w).rev() {
            acc.push(x[base + k] - shift);
            suffix[k] = acc.agg();
        }
        let mut run = Welford::EMPTY;
        let starts = w.min(n_out - base);
        for off in 0..starts {
            let mut agg = Agg::merge(suffix[off], run.agg());
            agg.mean += shift;
            visit(agg);
            let next_tail = base + w + off;
            if next_tail < n {
                run.push(x[next_tail] - shift);
            }
        }
        base += w;
    }
}

/// Time-domain distortion-power prediction: the moving variance of the LO
/// phase over `n_cd + 1` symbols, averaged over the same non-overlapping
/// blocks of `m + 1` symbols as the measured metrics, on the same centers.
///
/// Near the trace edges, where the full variance window does not fit, the
/// nearest valid window value is used, so the block grid always matches the
/// measured grid exactly.
pub fn temporal_gn_predict(trace: &PhaseTrace, n_cd: usize, m: usize) -> Result<BlockSeries> {
    let mv = moving_variance(trace, n_cd + 1)?;
    let centers = block_centers(trace.len(), m);
    if centers.is_empty() {
        return Err(Error::invalid(format!(
            "trace of {} symbols holds no full block of {}",
            trace.len(),
            m + 1
        )));
    }
    let w = m + 1;
    let values = centers
        .iter()
        .enumerate()
        .map(|(b, _)| {
            let start = b * w;
            let sum: f64 = (start..start + w).map(|i| mv.value_at_clamped(i)).sum();
            sum / w as f64
        })
        .collect();
    BlockSeries::new(m, centers, values)
}

/// Frequency-domain twin of [`temporal_gn_predict`]: at each block center,
/// the FDPE is sampled on `m + 1` bins spanning [-R/2, R/2] and its mean
/// squared deviation from the CPR-compensated mean phase is taken.
///
/// Block centers too close to the trace edges are clamped to the nearest
/// position where both the FDPE span and the averaging window fit.
pub fn fdpe_distortion(trace: &PhaseTrace, params: &LinkParams, m: usize) -> Result<BlockSeries> {
    check_symbol_rate(trace, params)?;
    let mem = cd_memory(params);
    let n_cd = mem.n_cd();
    let n = trace.len();
    let r = params.symbol_rate();

    let delays: Vec<i64> = group_delay_profile(params, m + 1)?
        .into_iter()
        .map(|(_, tau)| (r * tau).round() as i64)
        .collect();
    let max_delay = delays.iter().map(|d| d.unsigned_abs() as usize).max().unwrap_or(0);
    let half = max_delay.max(n_cd - n_cd / 2);
    if n <= 2 * half {
        return Err(Error::invalid(format!(
            "trace of {n} symbols shorter than one dispersion window of {}",
            2 * half + 1
        )));
    }

    let (means, first_mean) = idr_mean_phase(trace, n_cd)?;
    let centers = block_centers(n, m);
    if centers.is_empty() {
        return Err(Error::invalid(format!(
            "trace of {n} symbols holds no full block of {}",
            m + 1
        )));
    }
    let phases = trace.phases();
    let values = centers
        .iter()
        .map(|&c| {
            let cc = c.clamp(half, n - 1 - half);
            let mean = means.phases()[cc - first_mean];
            let sum: f64 = delays
                .iter()
                .map(|&d| {
                    let p = phases[(cc as i64 + d) as usize];
                    (p - mean) * (p - mean)
                })
                .sum();
            sum / delays.len() as f64
        })
        .collect();
    BlockSeries::new(m, centers, values)
}

/// Constant-variance baseline on the shared block grid.
///
/// Without a seed the series is the constant `sigma2_const`. With a seed,
/// each block holds the sample mean power of `m + 1` complex Gaussian draws
/// of variance `sigma2_const`, mimicking a measured realization of a
/// time-invariant noise model.
pub fn sota_gn_predict(
    sigma2_const: f64,
    n_blocks: usize,
    m: usize,
    seed: Option<u64>,
) -> Result<BlockSeries> {
    if sigma2_const < 0.0 || !sigma2_const.is_finite() {
        return Err(Error::invalid("sigma2 must be finite and non-negative"));
    }
    if n_blocks == 0 {
        return Err(Error::invalid("need at least one block"));
    }
    let w = m + 1;
    let centers = (0..n_blocks).map(|b| b * w + m / 2).collect();
    let values: Vec<f64> = match seed {
        None => vec![sigma2_const; n_blocks],
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, (sigma2_const / 2.0).sqrt()).expect("finite std");
            (0..n_blocks)
                .map(|_| {
                    let mut acc = 0.0;
                    for _ in 0..w {
                        let re: f64 = normal.sample(&mut rng);
                        let im: f64 = normal.sample(&mut rng);
                        acc += re * re + im * im;
                    }
                    acc / w as f64
                })
                .collect()
        }
    };
    BlockSeries::new(m, centers, values)
}
