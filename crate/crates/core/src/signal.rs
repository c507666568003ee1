//! Signal containers, QAM constellation generation, root-raised-cosine pulse
//! shaping / matched filtering, and windowed spectral analysis.
//!
//! All operations are pure: they take references and return new containers,
//! so independent calls can run concurrently without shared state.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft;

/// Complex baseband sample sequence with an associated sample rate.
///
/// Invariants enforced at construction: non-empty, all samples finite,
/// positive sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("signal must be non-empty"));
        }
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::invalid(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same samples restamped with a new sample rate.
    pub fn with_sample_rate(mut self, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::invalid(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        self.sample_rate = sample_rate;
        Ok(self)
    }

    /// Total energy, `sum(|s|^2)`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Mean power, `energy / len`.
    pub fn mean_power(&self) -> f64 {
        self.energy() / self.len() as f64
    }

    /// Copy with `front` samples dropped at the start and `back` at the end.
    pub fn trimmed(&self, front: usize, back: usize) -> Result<Self> {
        if front + back >= self.len() {
            return Err(Error::invalid(format!(
                "trim of {front}+{back} leaves no samples from {}",
                self.len()
            )));
        }
        Self::new(
            self.samples[front..self.len() - back].to_vec(),
            self.sample_rate,
        )
    }
}

/// Square QAM constellation with Gray-coded bit labels and unit average power.
#[derive(Debug, Clone)]
pub struct Constellation {
    order: u32,
    points: Vec<Complex64>,
}

impl Constellation {
    /// Builds the Gray-mapped square constellation for order 4, 16 or 64.
    ///
    /// `points[label]` is the symbol whose bit label is `label`; the high
    /// half of the label Gray-encodes the in-phase level, the low half the
    /// quadrature level. The point set is scaled to unit average power.
    pub fn new(order: u32) -> Result<Self> {
        if !matches!(order, 4 | 16 | 64) {
            return Err(Error::invalid(format!(
                "unsupported QAM order {order}, expected 4, 16 or 64"
            )));
        }
        let side = (order as f64).sqrt() as u32; // 2, 4, 8
        let bits_per_axis = side.trailing_zeros();
        // Grid levels -(side-1), ..., side-1 in steps of 2.
        let level = |idx: u32| (2.0 * idx as f64) - (side as f64 - 1.0);
        let mean_sq: f64 = (0..side).map(|i| level(i).powi(2)).sum::<f64>() / side as f64;
        let scale = 1.0 / (2.0 * mean_sq).sqrt();

        let mut points = Vec::with_capacity(order as usize);
        for label in 0..order {
            let i_bits = label >> bits_per_axis;
            let q_bits = label & (side - 1);
            let i_idx = gray_decode(i_bits);
            let q_idx = gray_decode(q_bits);
            points.push(Complex64::new(level(i_idx) * scale, level(q_idx) * scale));
        }
        Ok(Self { order, points })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Average point power; unity by construction, exposed for checks.
    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

fn gray_decode(g: u32) -> u32 {
    let mut n = g;
    let mut mask = n >> 1;
    while mask != 0 {
        n ^= mask;
        mask >>= 1;
    }
    n
}

/// Draws `n` i.i.d. uniform symbols from the order-`order` QAM constellation.
///
/// Deterministic for a fixed seed. The result is stamped with a sample rate
/// of 1 Hz (one unit per symbol); callers stamp the physical symbol rate via
/// [`ComplexSignal::with_sample_rate`].
pub fn generate_qam(order: u32, n: usize, seed: u64) -> Result<ComplexSignal> {
    if n == 0 {
        return Err(Error::invalid("symbol count must be >= 1"));
    }
    let constellation = Constellation::new(order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = constellation.points();
    let samples = (0..n)
        .map(|_| points[rng.random_range(0..points.len())])
        .collect();
    ComplexSignal::new(samples, 1.0)
}

/// Root-raised-cosine taps over `span` symbols at `oversampling` samples per
/// symbol, normalized to unit energy so the shaping/matched cascade has unit
/// gain at symbol instants.
pub fn rrc_taps(rolloff: f64, span_symbols: usize, oversampling: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(Error::invalid(format!(
            "roll-off must be in [0, 1], got {rolloff}"
        )));
    }
    if oversampling < 2 {
        return Err(Error::invalid("oversampling must be >= 2"));
    }
    if span_symbols < 8 {
        return Err(Error::invalid("filter span must be >= 8 symbols"));
    }
    let n = span_symbols * oversampling + 1;
    let center = (span_symbols * oversampling) as f64 / 2.0;
    let mut taps = Vec::with_capacity(n);
    for i in 0..n {
        let t = (i as f64 - center) / oversampling as f64; // in symbol periods
        taps.push(rrc_value(t, rolloff));
    }
    let energy: f64 = taps.iter().map(|&h| h * h).sum();
    let norm = 1.0 / energy.sqrt();
    for h in &mut taps {
        *h *= norm;
    }
    Ok(taps)
}

fn rrc_value(t: f64, beta: f64) -> f64 {
    use std::f64::consts::PI;
    if t.abs() < 1e-12 {
        return 1.0 + beta * (4.0 / PI - 1.0);
    }
    if beta > 0.0 && ((4.0 * beta * t).abs() - 1.0).abs() < 1e-9 {
        // Removable singularity at |t| = 1/(4 beta).
        return (beta / 2.0_f64.sqrt())
            * ((1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin()
                + (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Zero-stuffs `symbols` by `oversampling` and applies the unit-energy RRC
/// filter. Output sample rate is `oversampling` times the input rate; the
/// filter is applied in centered "same" alignment so symbol `k` stays at
/// sample `k * oversampling`.
pub fn rrc_shape(
    symbols: &ComplexSignal,
    oversampling: usize,
    rolloff: f64,
    span_symbols: usize,
) -> Result<ComplexSignal> {
    let taps = rrc_taps(rolloff, span_symbols, oversampling)?;
    let n_up = symbols.len() * oversampling;
    let mut up = vec![Complex64::new(0.0, 0.0); n_up];
    for (k, &s) in symbols.samples().iter().enumerate() {
        up[k * oversampling] = s;
    }
    let shaped = fft::convolve_same(&up, &taps);
    ComplexSignal::new(shaped, symbols.sample_rate() * oversampling as f64)
}

/// Matched RRC filter followed by decimation to one sample per symbol,
/// phase-aligned to the symbol centers produced by [`rrc_shape`].
pub fn matched_downsample(
    signal: &ComplexSignal,
    oversampling: usize,
    rolloff: f64,
    span_symbols: usize,
) -> Result<ComplexSignal> {
    if signal.len() % oversampling != 0 {
        return Err(Error::invalid(format!(
            "signal length {} is not divisible by oversampling {}",
            signal.len(),
            oversampling
        )));
    }
    let taps = rrc_taps(rolloff, span_symbols, oversampling)?;
    let filtered = fft::convolve_same(signal.samples(), &taps);
    let symbols: Vec<Complex64> = filtered.iter().step_by(oversampling).copied().collect();
    ComplexSignal::new(symbols, signal.sample_rate() / oversampling as f64)
}

/// Unitary DFT of the `width` samples starting at `center - width/2`.
///
/// The 1/sqrt(width) scaling makes the transform energy-preserving:
/// `sum(|bins|^2) == sum(|window|^2)` up to rounding.
pub fn windowed_dft(signal: &ComplexSignal, center: usize, width: usize) -> Result<Vec<Complex64>> {
    if width == 0 {
        return Err(Error::invalid("window width must be >= 1"));
    }
    let half = width / 2;
    if center < half {
        return Err(Error::out_of_range(format!(
            "window of width {width} at center {center} starts before the signal"
        )));
    }
    let start = center - half;
    if start + width > signal.len() {
        return Err(Error::out_of_range(format!(
            "window of width {width} at center {center} ends past length {}",
            signal.len()
        )));
    }
    let mut buf = signal.samples()[start..start + width].to_vec();
    fft::fft_forward(&mut buf);
    let scale = 1.0 / (width as f64).sqrt();
    for b in &mut buf {
        *b *= scale;
    }
    Ok(buf)
}
