//! Internal FFT helpers: unnormalized transforms plus overlap-save
//! convolution with real-valued FIR taps.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place forward DFT, unnormalized (analysis kernel e^{-j2*pi*k*n/N}).
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

/// In-place inverse DFT including the 1/N normalization, so that
/// `fft_inverse(fft_forward(x))` round-trips up to rounding.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Signed bin frequency in Hz for bin `k` of an `n`-point DFT at `rate` Sa/s.
pub(crate) fn bin_frequency(k: usize, n: usize, rate: f64) -> f64 {
    let k = k as f64;
    let n = n as f64;
    if k < n / 2.0 {
        k * rate / n
    } else {
        (k - n) * rate / n
    }
}

/// Linear convolution of `x` with real taps `h`, trimmed to the centered
/// "same" alignment: output length equals `x.len()` and tap index
/// `(h.len()-1)/2` lands on the input sample it multiplies.
///
/// Uses overlap-save so memory stays proportional to the FFT block, not to
/// the signal.
pub(crate) fn convolve_same(x: &[Complex64], h: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let t = h.len();
    debug_assert!(t >= 1);
    if n == 0 {
        return Vec::new();
    }
    if t == 1 {
        return x.iter().map(|&v| v * h[0]).collect();
    }

    let full_len = n + t - 1;
    let offset = (t - 1) / 2; // start of the "same" slice in the full output

    // Small inputs: direct evaluation is cheaper than planning FFTs.
    if n * t <= 1 << 18 {
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, o) in out.iter_mut().enumerate() {
            let m = i + offset; // index into the full convolution
            let k_lo = m.saturating_sub(n - 1);
            let k_hi = (t - 1).min(m);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in k_lo..=k_hi {
                acc += x[m - k] * h[k];
            }
            *o = acc;
        }
        return out;
    }

    // Overlap-save: FFT block of size l, l - (t-1) fresh output samples each step.
    let l = (4 * (t - 1)).next_power_of_two().clamp(4096, 1 << 18);
    let step = l - (t - 1);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(l);
    let inv = planner.plan_fft_inverse(l);

    let mut kernel: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    kernel.resize(l, Complex64::new(0.0, 0.0));
    fwd.process(&mut kernel);

    let mut full = vec![Complex64::new(0.0, 0.0); full_len];
    let mut block = vec![Complex64::new(0.0, 0.0); l];
    let scale = 1.0 / l as f64;
    let mut out_pos = 0usize;
    while out_pos < full_len {
        // Block holds x[out_pos - (t-1) .. out_pos + step), zero outside the signal.
        for (j, b) in block.iter_mut().enumerate() {
            let idx = out_pos as i64 - (t as i64 - 1) + j as i64;
            *b = if idx >= 0 && (idx as usize) < n {
                x[idx as usize]
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fwd.process(&mut block);
        for (b, k) in block.iter_mut().zip(kernel.iter()) {
            *b *= k * scale;
        }
        inv.process(&mut block);
        let take = step.min(full_len - out_pos);
        full[out_pos..out_pos + take].copy_from_slice(&block[t - 1..t - 1 + take]);
        out_pos += take;
    }

    full[offset..offset + n].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_same(x: &[Complex64], h: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        let t = h.len();
        let offset = (t - 1) / 2;
        (0..n)
            .map(|i| {
                let m = i + offset;
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &tap) in h.iter().enumerate() {
                    if m >= k && m - k < n {
                        acc += x[m - k] * tap;
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn overlap_save_matches_direct() {
        // Force the FFT path by exceeding the direct-path size cutoff.
        let n = 3000;
        let t = 101;
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let h: Vec<f64> = (0..t).map(|k| ((k as f64) * 0.05).cos() / t as f64).collect();
        assert!(n * t > 1 << 18);
        let a = convolve_same(&x, &h);
        let b = direct_same(&x, &h);
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).norm() < 1e-10, "mismatch {u} vs {v}");
        }
    }

    #[test]
    fn same_alignment_keeps_impulse_position() {
        let mut x = vec![Complex64::new(0.0, 0.0); 64];
        x[20] = Complex64::new(1.0, 0.0);
        let h = vec![0.25, 0.5, 0.25];
        let y = convolve_same(&x, &h);
        assert!((y[20].re - 0.5).abs() < 1e-15);
        assert!((y[19].re - 0.25).abs() < 1e-15);
        assert!((y[21].re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bin_frequencies_are_signed() {
        assert_eq!(bin_frequency(0, 8, 8.0), 0.0);
        assert_eq!(bin_frequency(1, 8, 8.0), 1.0);
        assert_eq!(bin_frequency(7, 8, 8.0), -1.0);
        assert_eq!(bin_frequency(4, 8, 8.0), -4.0);
    }
}
