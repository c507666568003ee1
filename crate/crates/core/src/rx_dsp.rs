//! Static receiver chain: dispersion compensation, data-aided carrier phase
//! recovery, and blockwise distortion/SNR metrics.

use num_complex::Complex64;

use crate::channel::{apply_dispersion_phase, PhaseTrace};
use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

/// Per-block scalar series indexed by block-center symbol index.
///
/// `block_size` is the metric parameter M; each value summarizes one full
/// block of M+1 symbols. Values may carry the `f64::INFINITY` sentinel
/// (infinite SNR on error-free blocks) but never NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSeries {
    block_size: usize,
    centers: Vec<usize>,
    values: Vec<f64>,
}

impl BlockSeries {
    pub fn new(block_size: usize, centers: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if centers.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} centers vs {} values",
                centers.len(),
                values.len()
            )));
        }
        if centers.is_empty() {
            return Err(Error::invalid("block series must be non-empty"));
        }
        if centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("block centers must be strictly increasing"));
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::invalid(format!("NaN value at block {i}")));
        }
        Ok(Self {
            block_size,
            centers,
            values,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
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

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// Centers of the non-overlapping blocks of `m + 1` symbols that fit in a
/// sequence of `len` symbols: block b covers `[b(m+1), (b+1)(m+1))` and is
/// indexed by its center `b(m+1) + m/2`.
pub fn block_centers(len: usize, m: usize) -> Vec<usize> {
    let w = m + 1;
    (0..len / w).map(|b| b * w + m / 2).collect()
}

/// Receiver-side chromatic dispersion compensation: the conjugate all-pass
/// of the channel filter, so `apply_cdc(apply_cd(x))` round-trips to x up to
/// FFT rounding.
pub fn apply_cdc(signal: &ComplexSignal, beta2_l: f64) -> Result<ComplexSignal> {
    apply_dispersion_phase(signal, beta2_l, -1.0)
}

/// Carrier phase recovery by ideal data remodulation.
///
/// Per-symbol raw phase `arg(rx * conj(tx))` is unwrapped by
/// nearest-multiple-of-2pi continuation, smoothed by a centered moving
/// average of `window` symbols (shrinking at the edges), and derotated from
/// the input. Returns the corrected signal and the phase estimate.
pub fn cpr_idr(
    rx: &ComplexSignal,
    tx: &ComplexSignal,
    window: usize,
) -> Result<(ComplexSignal, PhaseTrace)> {
    if rx.len() != tx.len() {
        return Err(Error::invalid(format!(
            "rx length {} != tx length {}",
            rx.len(),
            tx.len()
        )));
    }
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid(format!(
            "CPR window must be odd and >= 1, got {window}"
        )));
    }
    if let Some(i) = tx.samples().iter().position(|s| s.norm_sqr() == 0.0) {
        return Err(Error::invalid(format!("zero tx symbol at index {i}")));
    }

    let n = rx.len();
    let mut raw = Vec::with_capacity(n);
    for (r, t) in rx.samples().iter().zip(tx.samples()) {
        raw.push((r * t.conj()).arg());
    }
    unwrap_in_place(&mut raw);

    // Centered moving average via prefix sums; the window shrinks near the
    // sequence edges.
    let half = window / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &p in &raw {
        acc += p;
        prefix.push(acc);
    }
    let mut est = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        est.push((prefix[hi] - prefix[lo]) / (hi - lo) as f64);
    }

    let corrected: Vec<Complex64> = rx
        .samples()
        .iter()
        .zip(&est)
        .map(|(&s, &p)| s * Complex64::new(p.cos(), -p.sin()))
        .collect();
    Ok((
        ComplexSignal::new(corrected, rx.sample_rate())?,
        PhaseTrace::new(est, rx.sample_rate())?,
    ))
}

fn unwrap_in_place(phases: &mut [f64]) {
    use std::f64::consts::TAU;
    for i in 1..phases.len() {
        let jump = ((phases[i] - phases[i - 1]) / TAU).round();
        phases[i] -= TAU * jump;
    }
}

/// Blocking policy for [`block_metrics_with_mode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockMode {
    /// Non-overlapping blocks of M+1 symbols (the default).
    NonOverlapping,
    /// One window of M+1 symbols per valid center (every symbol where the
    /// full window fits).
    Sliding,
}

/// Per-block distortion power and SNR.
#[derive(Debug, Clone)]
pub struct BlockMetrics {
    /// `sum(|rx - tx|^2) / (M+1)` per block.
    pub distortion: BlockSeries,
    /// `mean(|tx|^2) / distortion` per block; infinite where a block is
    /// error-free.
    pub snr: BlockSeries,
}

/// Blockwise distortion power and SNR over non-overlapping blocks of M+1
/// symbols.
pub fn block_metrics(rx: &ComplexSignal, tx: &ComplexSignal, m: usize) -> Result<BlockMetrics> {
    block_metrics_with_mode(rx, tx, m, BlockMode::NonOverlapping)
}

pub fn block_metrics_with_mode(
    rx: &ComplexSignal,
    tx: &ComplexSignal,
    m: usize,
    mode: BlockMode,
) -> Result<BlockMetrics> {
    if rx.len() != tx.len() {
        return Err(Error::invalid(format!(
            "rx length {} != tx length {}",
            rx.len(),
            tx.len()
        )));
    }
    let w = m + 1;
    if w > rx.len() {
        return Err(Error::invalid(format!(
            "need at least one full block of {w} symbols, have {}",
            rx.len()
        )));
    }

    let starts: Vec<usize> = match mode {
        BlockMode::NonOverlapping => (0..rx.len() / w).map(|b| b * w).collect(),
        BlockMode::Sliding => (0..=rx.len() - w).collect(),
    };
    let mut centers = Vec::with_capacity(starts.len());
    let mut sigma2 = Vec::with_capacity(starts.len());
    let mut snr = Vec::with_capacity(starts.len());
    for s in starts {
        let mut err = 0.0;
        let mut sig = 0.0;
        for i in s..s + w {
            err += (rx.samples()[i] - tx.samples()[i]).norm_sqr();
            sig += tx.samples()[i].norm_sqr();
        }
        let d = err / w as f64;
        centers.push(s + m / 2);
        sigma2.push(d);
        snr.push(if d == 0.0 {
            f64::INFINITY
        } else {
            (sig / w as f64) / d
        });
    }
    Ok(BlockMetrics {
        distortion: BlockSeries::new(m, centers.clone(), sigma2)?,
        snr: BlockSeries::new(m, centers, snr)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::apply_cd;
    use crate::signal::generate_qam;
    use approx::assert_relative_eq;

    #[test]
    fn cdc_inverts_cd_to_fft_rounding() {
        let sig = generate_qam(16, 2048, 1).unwrap().with_sample_rate(260e9).unwrap();
        let beta2_l = -2.2958e-20;
        let back = apply_cdc(&apply_cd(&sig, beta2_l).unwrap(), beta2_l).unwrap();
        let mut err = 0.0;
        for (y, x) in back.samples().iter().zip(sig.samples()) {
            err += (y - x).norm_sqr();
        }
        let rel = err / sig.energy();
        assert!(rel < 1e-10, "round-trip relative error {rel:e}");
    }

    #[test]
    fn cdc_with_zero_dispersion_is_identity() {
        let sig = generate_qam(4, 256, 2).unwrap();
        let out = apply_cdc(&sig, 0.0).unwrap();
        for (y, x) in out.samples().iter().zip(sig.samples()) {
            assert!((y - x).norm() < 1e-12);
        }
    }

    #[test]
    fn cdc_preserves_energy() {
        let sig = generate_qam(16, 1024, 9).unwrap().with_sample_rate(260e9).unwrap();
        let out = apply_cdc(&sig, 1e-20).unwrap();
        assert!((out.energy() - sig.energy()).abs() / sig.energy() < 1e-10);
    }

    #[test]
    fn cpr_removes_a_constant_rotation_exactly() {
        let tx = generate_qam(16, 512, 3).unwrap();
        for theta in [0.3, -2.5, 9.0] {
            let rot = Complex64::new(0.0, theta).exp();
            let rx = ComplexSignal::new(
                tx.samples().iter().map(|&s| s * rot).collect(),
                tx.sample_rate(),
            )
            .unwrap();
            let (corr, est) = cpr_idr(&rx, &tx, 65).unwrap();
            let residual: f64 = corr
                .samples()
                .iter()
                .zip(tx.samples())
                .map(|(y, x)| (y - x).norm_sqr())
                .sum::<f64>()
                / tx.len() as f64;
            assert!(residual < 1e-20, "residual power {residual:e}");
            // theta is recovered modulo 2 pi.
            let wrapped = theta - std::f64::consts::TAU * (theta / std::f64::consts::TAU).round();
            for &p in est.phases() {
                assert_relative_eq!(p, wrapped, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cpr_on_identical_signals_estimates_zero() {
        let tx = generate_qam(16, 256, 4).unwrap();
        let (_, est) = cpr_idr(&tx, &tx, 1).unwrap();
        assert!(est.phases().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn cpr_with_unit_window_tracks_a_slow_ramp_exactly() {
        let tx = generate_qam(4, 400, 5).unwrap();
        let ramp: Vec<f64> = (0..400).map(|i| 1e-3 * i as f64).collect();
        let rx = ComplexSignal::new(
            tx.samples()
                .iter()
                .zip(&ramp)
                .map(|(&s, &p)| s * Complex64::new(p.cos(), p.sin()))
                .collect(),
            tx.sample_rate(),
        )
        .unwrap();
        let (corr, est) = cpr_idr(&rx, &tx, 1).unwrap();
        for (p, r) in est.phases().iter().zip(&ramp) {
            assert_relative_eq!(p, r, epsilon = 1e-12);
        }
        for (y, x) in corr.samples().iter().zip(tx.samples()) {
            assert!((y - x).norm() < 1e-12);
        }
    }

    #[test]
    fn cpr_rejects_bad_inputs() {
        let tx = generate_qam(4, 64, 6).unwrap();
        assert!(cpr_idr(&tx, &tx, 2).is_err());
        assert!(cpr_idr(&tx, &tx, 0).is_err());
        let zero = ComplexSignal::new(vec![Complex64::new(0.0, 0.0); 64], 1.0).unwrap();
        assert!(matches!(
            cpr_idr(&tx, &zero, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn identical_signals_give_zero_distortion_and_infinite_snr() {
        let tx = generate_qam(16, 1002, 7).unwrap();
        let m = block_metrics(&tx, &tx, 500).unwrap();
        assert_eq!(m.distortion.len(), 2);
        assert!(m.distortion.values().iter().all(|&v| v == 0.0));
        assert!(m.snr.values().iter().all(|&v| v == f64::INFINITY));
    }

    #[test]
    fn constant_offset_gives_its_power_per_block() {
        let tx = generate_qam(16, 1002, 8).unwrap();
        let c = Complex64::new(0.03, -0.04);
        let rx = ComplexSignal::new(
            tx.samples().iter().map(|&s| s + c).collect(),
            tx.sample_rate(),
        )
        .unwrap();
        let m = block_metrics(&rx, &tx, 500).unwrap();
        for &v in m.distortion.values() {
            assert_relative_eq!(v, c.norm_sqr(), max_relative = 1e-12);
        }
    }

    #[test]
    fn awgn_block_distortion_follows_chi_square_statistics() {
        use crate::channel::add_awgn;
        let n = 501 * 2000;
        let tx = ComplexSignal::new(vec![Complex64::new(1.0, 0.0); n], 1.0).unwrap();
        let rx = add_awgn(&tx, 0.0, 21).unwrap(); // unit-variance noise
        let m = block_metrics(&rx, &tx, 500).unwrap();
        let mean = m.distortion.mean();
        let std = (m
            .distortion
            .values()
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / m.distortion.len() as f64)
            .sqrt();
        // Block means of 501 unit-mean exponential variates: mean 1,
        // standard deviation 1/sqrt(501) = 0.0447.
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
        assert!((std - 0.0447).abs() < 0.004, "std {std}");
    }

    #[test]
    fn metrics_are_invariant_to_a_global_phase() {
        let tx = generate_qam(16, 1002, 9).unwrap();
        let rx = crate::channel::add_awgn(&tx, 15.0, 3).unwrap();
        let rot = Complex64::new(0.0, 0.7).exp();
        let tx_r = ComplexSignal::new(
            tx.samples().iter().map(|&s| s * rot).collect(),
            tx.sample_rate(),
        )
        .unwrap();
        let rx_r = ComplexSignal::new(
            rx.samples().iter().map(|&s| s * rot).collect(),
            rx.sample_rate(),
        )
        .unwrap();
        let a = block_metrics(&rx, &tx, 500).unwrap();
        let b = block_metrics(&rx_r, &tx_r, 500).unwrap();
        for (u, v) in a.distortion.values().iter().zip(b.distortion.values()) {
            assert_relative_eq!(u, v, max_relative = 1e-12);
        }
    }

    #[test]
    fn sliding_mode_emits_one_window_per_valid_center() {
        let tx = generate_qam(4, 20, 10).unwrap();
        let m = block_metrics_with_mode(&tx, &tx, 4, BlockMode::Sliding).unwrap();
        assert_eq!(m.distortion.len(), 16);
        assert_eq!(m.distortion.centers()[0], 2);
        assert_eq!(*m.distortion.centers().last().unwrap(), 17);
    }

    #[test]
    fn too_short_input_is_rejected() {
        let tx = generate_qam(4, 100, 11).unwrap();
        assert!(block_metrics(&tx, &tx, 500).is_err());
    }

    #[test]
    fn block_grid_matches_blocking_rule() {
        assert_eq!(block_centers(1002, 500), vec![250, 751]);
        assert_eq!(block_centers(1503, 500), vec![250, 751, 1252]);
        assert_eq!(block_centers(500, 500), Vec::<usize>::new());
        let tx = generate_qam(4, 1503, 12).unwrap();
        let m = block_metrics(&tx, &tx, 500).unwrap();
        assert_eq!(m.distortion.centers(), block_centers(1503, 500).as_slice());
    }
}
