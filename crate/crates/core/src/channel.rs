//! Forward channel: chromatic dispersion, local-oscillator phase noise
//! (synthetic Wiener or replayed from a recorded trace), and additive
//! Gaussian noise.
//!
//! Sign convention, fixed once for the whole library: the analysis kernel is
//! e^{-j 2 pi f t}; the dispersive channel applies the all-pass phase
//! +2 pi^2 beta2L f^2 and the receiver-side compensation applies its
//! conjugate.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fft;
use crate::signal::ComplexSignal;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Real-valued unwrapped phase sequence (rad) with a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrace {
    phases: Vec<f64>,
    sample_rate: f64,
}

impl PhaseTrace {
    pub fn new(phases: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::invalid("phase trace must be non-empty"));
        }
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::invalid(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        if let Some(i) = phases.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("non-finite phase at index {i}")));
        }
        Ok(Self { phases, sample_rate })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Copy with `front`/`back` samples dropped.
    pub fn trimmed(&self, front: usize, back: usize) -> Result<Self> {
        if front + back >= self.len() {
            return Err(Error::invalid(format!(
                "trim of {front}+{back} leaves no samples from {}",
                self.len()
            )));
        }
        Self::new(
            self.phases[front..self.len() - back].to_vec(),
            self.sample_rate,
        )
    }

    /// Keeps every `step`-th sample, dividing the rate accordingly.
    pub fn decimated(&self, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::invalid("decimation step must be >= 1"));
        }
        Self::new(
            self.phases.iter().step_by(step).copied().collect(),
            self.sample_rate / step as f64,
        )
    }

    pub fn mean(&self) -> f64 {
        self.phases.iter().sum::<f64>() / self.len() as f64
    }

    /// Population variance of the whole trace.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.phases.iter().map(|p| (p - m).powi(2)).sum::<f64>() / self.len() as f64
    }
}

/// Physical and system constants of one link.
///
/// `beta2_l` is the signed accumulated dispersion beta2 * L in s^2. The
/// alternative (D*L, lambda) parametrization converts via
/// `beta2_l = -D*L * lambda^2 / (2 pi c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    symbol_rate: f64,
    beta2_l: f64,
    lo_linewidth: f64,
    tx_linewidth: f64,
    awgn_snr_db: f64,
}

impl LinkParams {
    pub fn new(
        symbol_rate: f64,
        beta2_l: f64,
        lo_linewidth: f64,
        tx_linewidth: f64,
        awgn_snr_db: f64,
    ) -> Result<Self> {
        if !(symbol_rate > 0.0) {
            return Err(Error::invalid("symbol rate must be positive"));
        }
        if lo_linewidth < 0.0 || tx_linewidth < 0.0 {
            return Err(Error::invalid("linewidths must be non-negative"));
        }
        if !beta2_l.is_finite() {
            return Err(Error::invalid("beta2*L must be finite"));
        }
        if awgn_snr_db.is_nan() {
            return Err(Error::invalid("AWGN SNR must not be NaN"));
        }
        Ok(Self {
            symbol_rate,
            beta2_l,
            lo_linewidth,
            tx_linewidth,
            awgn_snr_db,
        })
    }

    /// Builds parameters from accumulated dispersion D*L in ps/nm and the
    /// carrier wavelength in nm.
    ///
    /// The recorded link only states D*L; a carrier near 1550 nm is the
    /// conventional choice when the wavelength is not given.
    pub fn from_dispersion(
        symbol_rate: f64,
        dl_ps_per_nm: f64,
        wavelength_nm: f64,
        lo_linewidth: f64,
        tx_linewidth: f64,
        awgn_snr_db: f64,
    ) -> Result<Self> {
        if !(wavelength_nm > 0.0) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        let beta2_l = beta2_l_from_dispersion(dl_ps_per_nm, wavelength_nm);
        Self::new(symbol_rate, beta2_l, lo_linewidth, tx_linewidth, awgn_snr_db)
    }

    pub fn symbol_rate(&self) -> f64 {
        self.symbol_rate
    }

    pub fn beta2_l(&self) -> f64 {
        self.beta2_l
    }

    pub fn lo_linewidth(&self) -> f64 {
        self.lo_linewidth
    }

    pub fn tx_linewidth(&self) -> f64 {
        self.tx_linewidth
    }

    pub fn awgn_snr_db(&self) -> f64 {
        self.awgn_snr_db
    }

    /// Inverse of the (D*L, lambda) -> beta2*L conversion, in ps/nm.
    pub fn dl_ps_per_nm(&self, wavelength_nm: f64) -> f64 {
        let lambda = wavelength_nm * 1e-9;
        -self.beta2_l * 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (lambda * lambda) * 1e3
    }
}

/// `beta2_l = -D*L * lambda^2 / (2 pi c)`, with D*L in ps/nm and lambda in nm.
pub fn beta2_l_from_dispersion(dl_ps_per_nm: f64, wavelength_nm: f64) -> f64 {
    let dl_s_per_m = dl_ps_per_nm * 1e-12 / 1e-9;
    let lambda = wavelength_nm * 1e-9;
    -dl_s_per_m * lambda * lambda / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT)
}

/// Wiener (random-walk) phase trace: cumulative sum of i.i.d. zero-mean
/// Gaussian increments with variance `2 pi linewidth / rate` per step,
/// starting at zero. Deterministic per seed.
pub fn wiener_phase(linewidth: f64, n: usize, rate: f64, seed: u64) -> Result<PhaseTrace> {
    if linewidth < 0.0 {
        return Err(Error::invalid("linewidth must be non-negative"));
    }
    if n == 0 {
        return Err(Error::invalid("trace length must be >= 1"));
    }
    if !(rate > 0.0) {
        return Err(Error::invalid("rate must be positive"));
    }
    if linewidth == 0.0 {
        return PhaseTrace::new(vec![0.0; n], rate);
    }
    let sigma = (2.0 * std::f64::consts::PI * linewidth / rate).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phases = Vec::with_capacity(n);
    let mut acc = 0.0;
    phases.push(acc);
    for _ in 1..n {
        acc += normal.sample(&mut rng);
        phases.push(acc);
    }
    PhaseTrace::new(phases, rate)
}

const TRACE_HEADER_PREFIX: &str = "# sample_rate_hz=";

/// Loads a phase trace from the text format: line 1 `# sample_rate_hz=<f>`,
/// then one phase value (rad) per line. Blank lines are ignored; non-finite
/// or unparsable values are rejected with their line number.
pub fn load_phase_trace(path: impl AsRef<Path>) -> Result<PhaseTrace> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(1, "empty file, expected sample-rate header"))?;
    let rate_str = header
        .strip_prefix(TRACE_HEADER_PREFIX)
        .ok_or_else(|| Error::format(1, format!("expected `{TRACE_HEADER_PREFIX}<value>`")))?;
    let sample_rate: f64 = rate_str
        .trim()
        .parse()
        .map_err(|_| Error::format(1, format!("invalid sample rate `{rate_str}`")))?;
    let mut phases = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::format(idx + 1, format!("invalid phase value `{line}`")))?;
        if !v.is_finite() {
            return Err(Error::format(idx + 1, format!("non-finite phase value `{line}`")));
        }
        phases.push(v);
    }
    if phases.is_empty() {
        return Err(Error::format(2, "trace contains no phase values"));
    }
    PhaseTrace::new(phases, sample_rate)
}

/// Writes a trace in the format read by [`load_phase_trace`]. Values use the
/// shortest representation that parses back bit-exactly.
pub fn save_phase_trace(trace: &PhaseTrace, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{TRACE_HEADER_PREFIX}{}", trace.sample_rate())?;
    for p in trace.phases() {
        writeln!(out, "{p}")?;
    }
    out.flush()?;
    Ok(())
}

/// Subtracts the least-squares polynomial of the given degree, fitted over a
/// time axis normalized to [-1, 1].
///
/// The fit orthonormalizes the monomial basis on the sample grid
/// (modified Gram-Schmidt), so the residual is orthogonal to every fitted
/// power of t up to rounding.
pub fn detrend_poly(trace: &PhaseTrace, degree: usize) -> Result<PhaseTrace> {
    let n = trace.len();
    if n <= degree + 1 {
        return Err(Error::invalid(format!(
            "trace length {n} must exceed degree+1 = {}",
            degree + 1
        )));
    }
    let t: Vec<f64> = (0..n)
        .map(|i| 2.0 * i as f64 / (n - 1) as f64 - 1.0)
        .collect();

    // Orthonormal basis over the grid, built from 1, t, t^2, ...
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
    for d in 0..=degree {
        let mut v: Vec<f64> = t.iter().map(|&x| x.powi(d as i32)).collect();
        for q in &basis {
            let dot: f64 = v.iter().zip(q.iter()).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q.iter()) {
                *vi -= dot * qi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Numeric(format!(
                "rank-deficient polynomial basis at degree {d}"
            )));
        }
        for vi in &mut v {
            *vi /= norm;
        }
        basis.push(v);
    }

    let mut residual = trace.phases().to_vec();
    for q in &basis {
        let dot: f64 = residual.iter().zip(q.iter()).map(|(a, b)| a * b).sum();
        for (r, qi) in residual.iter_mut().zip(q.iter()) {
            *r -= dot * qi;
        }
    }
    PhaseTrace::new(residual, trace.sample_rate())
}

/// Linear interpolation of the unwrapped phase onto a grid at `target_rate`,
/// sharing the source time origin. The output covers the source duration
/// (last source sample time) rounded down to the target grid; positions are
/// clamped to the source span.
pub fn resample_phase(trace: &PhaseTrace, target_rate: f64) -> Result<PhaseTrace> {
    if !(target_rate > 0.0) || !target_rate.is_finite() {
        return Err(Error::invalid("target rate must be positive and finite"));
    }
    let n = trace.len();
    let src = trace.phases();
    let ratio = trace.sample_rate() / target_rate; // source samples per target sample
    let m = if n == 1 {
        1
    } else {
        ((n - 1) as f64 / ratio).floor() as usize + 1
    };
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let pos = (j as f64 * ratio).min((n - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        let frac = pos - i0 as f64;
        out.push(src[i0] + frac * (src[i1] - src[i0]));
    }
    PhaseTrace::new(out, target_rate)
}

/// Chromatic dispersion: frequency-domain all-pass with phase
/// `+2 pi^2 beta2_l f^2`, applied with a full-length FFT. Energy-preserving
/// up to FFT rounding.
pub fn apply_cd(signal: &ComplexSignal, beta2_l: f64) -> Result<ComplexSignal> {
    apply_dispersion_phase(signal, beta2_l, 1.0)
}

pub(crate) fn apply_dispersion_phase(
    signal: &ComplexSignal,
    beta2_l: f64,
    sign: f64,
) -> Result<ComplexSignal> {
    let n = signal.len();
    let rate = signal.sample_rate();
    let mut buf = signal.samples().to_vec();
    fft::fft_forward(&mut buf);
    let coeff = sign * 2.0 * std::f64::consts::PI.powi(2) * beta2_l;
    for (k, v) in buf.iter_mut().enumerate() {
        let f = fft::bin_frequency(k, n, rate);
        let phase = coeff * f * f;
        *v *= Complex64::new(phase.cos(), phase.sin());
    }
    fft::fft_inverse(&mut buf);
    ComplexSignal::new(buf, rate)
}

/// Samplewise multiplication by e^{j phi}; per-sample magnitude is
/// preserved. The trace must already be at the signal's rate and length.
pub fn apply_phase(signal: &ComplexSignal, trace: &PhaseTrace) -> Result<ComplexSignal> {
    if signal.len() != trace.len() {
        return Err(Error::invalid(format!(
            "signal length {} != trace length {}",
            signal.len(),
            trace.len()
        )));
    }
    if signal.sample_rate() != trace.sample_rate() {
        return Err(Error::invalid(format!(
            "signal rate {} != trace rate {}",
            signal.sample_rate(),
            trace.sample_rate()
        )));
    }
    let samples = signal
        .samples()
        .iter()
        .zip(trace.phases())
        .map(|(&s, &p)| s * Complex64::new(p.cos(), p.sin()))
        .collect();
    ComplexSignal::new(samples, signal.sample_rate())
}

/// Adds circular complex Gaussian noise with variance
/// `mean_power / 10^(snr_db/10)`, measured on the input. `snr_db` of
/// positive infinity disables the noise. Deterministic per seed.
pub fn add_awgn(signal: &ComplexSignal, snr_db: f64, seed: u64) -> Result<ComplexSignal> {
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR must not be NaN"));
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    let variance = signal.mean_power() / 10f64.powf(snr_db / 10.0);
    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("finite std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = signal
        .samples()
        .iter()
        .map(|&s| s + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    ComplexSignal::new(samples, signal.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::generate_qam;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_linewidth_gives_zero_trace() {
        let t = wiener_phase(0.0, 1000, 130e9, 1).unwrap();
        assert!(t.phases().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn wiener_increment_variance_matches_linewidth() {
        // 2 pi * 210 kHz / 130 GBd = 1.0150e-5 rad^2 per symbol.
        let n = 1_000_001;
        let t = wiener_phase(210e3, n, 130e9, 5).unwrap();
        let expect = 2.0 * PI * 210e3 / 130e9;
        assert_relative_eq!(expect, 1.015e-5, max_relative = 1e-3);
        let incs: Vec<f64> = t.phases().windows(2).map(|w| w[1] - w[0]).collect();
        let mean = incs.iter().sum::<f64>() / incs.len() as f64;
        let var = incs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / incs.len() as f64;
        assert!(
            (var - expect).abs() < 0.05 * expect,
            "var {var:e} vs {expect:e}"
        );
    }

    #[test]
    fn wiener_is_deterministic_per_seed() {
        let a = wiener_phase(100e3, 256, 1e9, 3).unwrap();
        let b = wiener_phase(100e3, 256, 1e9, 3).unwrap();
        assert_eq!(a.phases(), b.phases());
    }

    #[test]
    fn trace_round_trip_is_bitwise() {
        let dir = std::env::temp_dir().join("eepn_trace_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.txt");
        let t = wiener_phase(210e3, 500, 3.125e9, 11).unwrap();
        save_phase_trace(&t, &path).unwrap();
        let back = load_phase_trace(&path).unwrap();
        assert_eq!(t.phases(), back.phases());
        assert_eq!(t.sample_rate(), back.sample_rate());
    }

    #[test]
    fn trace_header_rate_is_parsed() {
        let dir = std::env::temp_dir().join("eepn_trace_header");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.txt");
        std::fs::write(&path, "# sample_rate_hz=3.125e9\n0.0\n0.5\n").unwrap();
        let t = load_phase_trace(&path).unwrap();
        assert_eq!(t.sample_rate(), 3.125e9);
        assert_eq!(t.phases(), &[0.0, 0.5]);
    }

    #[test]
    fn malformed_traces_report_line_numbers() {
        let dir = std::env::temp_dir().join("eepn_trace_bad");
        std::fs::create_dir_all(&dir).unwrap();

        let empty = dir.join("empty.txt");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(
            load_phase_trace(&empty),
            Err(Error::Format { line: 1, .. })
        ));

        let noheader = dir.join("noheader.txt");
        std::fs::write(&noheader, "0.1\n0.2\n").unwrap();
        assert!(matches!(
            load_phase_trace(&noheader),
            Err(Error::Format { line: 1, .. })
        ));

        let nan = dir.join("nan.txt");
        std::fs::write(&nan, "# sample_rate_hz=1e9\n0.1\nNaN\n").unwrap();
        assert!(matches!(
            load_phase_trace(&nan),
            Err(Error::Format { line: 3, .. })
        ));

        let junk = dir.join("junk.txt");
        std::fs::write(&junk, "# sample_rate_hz=1e9\n0.1\nabc\n").unwrap();
        assert!(matches!(
            load_phase_trace(&junk),
            Err(Error::Format { line: 3, .. })
        ));
    }

    #[test]
    fn detrend_reproduces_its_own_model_class() {
        let n = 4096;
        let t: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64 - 1.0).collect();
        let poly: Vec<f64> = t
            .iter()
            .map(|&x| 3.0 - 2.0 * x + 0.5 * x.powi(2) + x.powi(3) - 0.25 * x.powi(4) + 2.0 * x.powi(5))
            .collect();
        let peak = poly.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let trace = PhaseTrace::new(poly, 1e9).unwrap();
        let out = detrend_poly(&trace, 5).unwrap();
        for &v in out.phases() {
            assert!(v.abs() < 1e-8 * peak, "residual {v} vs peak {peak}");
        }
    }

    #[test]
    fn detrend_degree_zero_removes_mean() {
        let trace = PhaseTrace::new(vec![1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        let out = detrend_poly(&trace, 0).unwrap();
        assert_relative_eq!(out.phases()[0], -1.5, epsilon = 1e-12);
        assert_relative_eq!(out.phases()[3], 1.5, epsilon = 1e-12);
        assert!(out.mean().abs() < 1e-12);
    }

    #[test]
    fn detrend_never_increases_variance() {
        let n = 8192;
        let wiener = wiener_phase(1e6, n, 1e9, 17).unwrap();
        let t: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64 - 1.0).collect();
        let phases: Vec<f64> = wiener
            .phases()
            .iter()
            .zip(t.iter())
            .map(|(&w, &x)| w + 4.0 * x - 2.0 * x.powi(3))
            .collect();
        let trace = PhaseTrace::new(phases, 1e9).unwrap();
        let out = detrend_poly(&trace, 5).unwrap();
        assert!(out.variance() <= trace.variance());
    }

    #[test]
    fn detrend_residual_is_orthogonal_to_basis() {
        let n = 2048;
        let wiener = wiener_phase(1e6, n, 1e9, 23).unwrap();
        let out = detrend_poly(&wiener, 5).unwrap();
        let t: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64 - 1.0).collect();
        let scale: f64 = out.phases().iter().map(|x| x * x).sum::<f64>().sqrt();
        for d in 0..=5 {
            let basis: Vec<f64> = t.iter().map(|&x| x.powi(d)).collect();
            let bnorm: f64 = basis.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = out.phases().iter().zip(&basis).map(|(a, b)| a * b).sum();
            assert!(
                (dot / (scale * bnorm)).abs() < 1e-8,
                "degree {d} inner product {dot}"
            );
        }
    }

    #[test]
    fn detrend_rejects_short_traces() {
        let trace = PhaseTrace::new(vec![1.0, 2.0, 3.0], 1.0).unwrap();
        assert!(detrend_poly(&trace, 5).is_err());
    }

    #[test]
    fn resample_at_source_rate_is_identity() {
        let t = wiener_phase(1e5, 100, 2e9, 7).unwrap();
        let out = resample_phase(&t, 2e9).unwrap();
        assert_eq!(out.phases(), t.phases());
    }

    #[test]
    fn resample_is_exact_on_linear_ramps() {
        let n = 100;
        let ramp: Vec<f64> = (0..n).map(|i| 0.03 * i as f64).collect();
        let t = PhaseTrace::new(ramp, 1e9).unwrap();
        let out = resample_phase(&t, 3.7e9).unwrap();
        for (j, &v) in out.phases().iter().enumerate() {
            let expect = 0.03 * (j as f64 * 1e9 / 3.7e9);
            assert_relative_eq!(v, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn resample_preserves_duration_within_one_target_sample() {
        let n = 3125;
        let t = wiener_phase(210e3, n, 3.125e9, 13).unwrap();
        let out = resample_phase(&t, 130e9).unwrap();
        let src_duration = (n - 1) as f64 / 3.125e9;
        let dst_duration = (out.len() - 1) as f64 / 130e9;
        assert!(dst_duration <= src_duration + 1e-18);
        assert!(src_duration - dst_duration < 1.0 / 130e9);
    }

    #[test]
    fn cd_with_zero_dispersion_is_identity() {
        let sig = generate_qam(16, 256, 2).unwrap();
        let out = apply_cd(&sig, 0.0).unwrap();
        for (a, b) in out.samples().iter().zip(sig.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cd_preserves_energy() {
        let sig = generate_qam(16, 1024, 3).unwrap().with_sample_rate(260e9).unwrap();
        let out = apply_cd(&sig, -2.2958e-20).unwrap();
        let rel = (out.energy() - sig.energy()).abs() / sig.energy();
        assert!(rel < 1e-10, "relative energy change {rel:e}");
    }

    #[test]
    fn cd_rotates_a_tone_by_the_quadratic_phase() {
        // Single-bin oracle: a tone exactly on bin k acquires phase
        // 2 pi^2 beta2L f^2.
        let n = 256;
        let rate = 260e9;
        let k = 37;
        let f = k as f64 * rate / n as f64;
        let samples: Vec<Complex64> = (0..n)
            .map(|i| {
                let ang = 2.0 * PI * k as f64 * i as f64 / n as f64;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        let sig = ComplexSignal::new(samples, rate).unwrap();
        let beta2_l = -2.2958e-20;
        let out = apply_cd(&sig, beta2_l).unwrap();
        let expect = 2.0 * PI.powi(2) * beta2_l * f * f;
        for (y, x) in out.samples().iter().zip(sig.samples()) {
            let ratio = y / x;
            let mut diff = ratio.arg() - expect;
            diff -= 2.0 * PI * (diff / (2.0 * PI)).round();
            assert!(diff.abs() < 1e-9, "phase diff {diff}");
            assert_relative_eq!(ratio.norm(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn phase_application_rotates_and_inverts() {
        let sig = generate_qam(4, 128, 5).unwrap();
        let zero = PhaseTrace::new(vec![0.0; 128], 1.0).unwrap();
        let same = apply_phase(&sig, &zero).unwrap();
        assert_eq!(same.samples(), sig.samples());

        let c = 1.234;
        let rot = apply_phase(&sig, &PhaseTrace::new(vec![c; 128], 1.0).unwrap()).unwrap();
        for (y, x) in rot.samples().iter().zip(sig.samples()) {
            assert_relative_eq!(y.norm(), x.norm(), epsilon = 1e-15);
            assert_relative_eq!((y / x).arg(), c, epsilon = 1e-12);
        }

        let t = wiener_phase(1e6, 128, 1.0, 2).unwrap();
        let neg = PhaseTrace::new(t.phases().iter().map(|p| -p).collect(), 1.0).unwrap();
        let back = apply_phase(&apply_phase(&sig, &t).unwrap(), &neg).unwrap();
        for (y, x) in back.samples().iter().zip(sig.samples()) {
            assert!((y - x).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_application_rejects_mismatches() {
        let sig = generate_qam(4, 128, 5).unwrap();
        let short = PhaseTrace::new(vec![0.0; 64], 1.0).unwrap();
        assert!(apply_phase(&sig, &short).is_err());
        let wrong_rate = PhaseTrace::new(vec![0.0; 128], 2.0).unwrap();
        assert!(apply_phase(&sig, &wrong_rate).is_err());
    }

    #[test]
    fn infinite_snr_disables_noise() {
        let sig = generate_qam(16, 64, 1).unwrap();
        let out = add_awgn(&sig, f64::INFINITY, 9).unwrap();
        assert_eq!(out.samples(), sig.samples());
    }

    #[test]
    fn awgn_variance_matches_target() {
        let n = 1_000_000;
        let sig = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); n], 1.0).unwrap();
        let out = add_awgn(&sig, 10.0, 4).unwrap();
        let var: f64 = out
            .samples()
            .iter()
            .zip(sig.samples())
            .map(|(y, x)| (y - x).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((var - 0.1).abs() < 0.001, "noise variance {var}");
    }

    #[test]
    fn awgn_is_deterministic_per_seed() {
        let sig = generate_qam(16, 128, 1).unwrap();
        let a = add_awgn(&sig, 15.0, 7).unwrap();
        let b = add_awgn(&sig, 15.0, 7).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn dispersion_conversion_matches_hand_value_and_inverts() {
        // 18 ns/nm at 1550 nm: beta2L = -18 * (1.55e-6)^2 / (2 pi c) = -2.2958e-20 s^2.
        let p = LinkParams::from_dispersion(130e9, 18_000.0, 1550.0, 210e3, 0.0, 17.0).unwrap();
        assert_relative_eq!(p.beta2_l(), -2.2958e-20, max_relative = 1e-4);
        assert_relative_eq!(p.dl_ps_per_nm(1550.0), 18_000.0, max_relative = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cd_is_unitary_for_any_dispersion(
            seed in 0u64..500,
            beta_ps2 in -60_000.0f64..60_000.0,
        ) {
            let sig = generate_qam(16, 512, seed).unwrap().with_sample_rate(260e9).unwrap();
            let out = apply_cd(&sig, beta_ps2 * 1e-24).unwrap();
            let rel = (out.energy() - sig.energy()).abs() / sig.energy();
            prop_assert!(rel < 1e-10);
        }

        #[test]
        fn phase_rotation_preserves_magnitudes(seed in 0u64..500, lw in 0.0f64..1e7) {
            let sig = generate_qam(16, 256, seed).unwrap();
            let t = wiener_phase(lw, 256, 1.0, seed ^ 0xa5a5).unwrap();
            let out = apply_phase(&sig, &t).unwrap();
            for (y, x) in out.samples().iter().zip(sig.samples()) {
                prop_assert!((y.norm() - x.norm()).abs() <= 1e-15 * x.norm().max(1.0));
            }
        }
    }
}
