//! End-to-end chain checks assembled from the library primitives:
//! shaping -> dispersion -> noise -> compensation -> matched filter -> CPR
//! -> block metrics.

use eepn_core::channel::{add_awgn, apply_cd, apply_phase, wiener_phase, LinkParams};
use eepn_core::models::cd_memory;
use eepn_core::rx_dsp::{apply_cdc, block_metrics, cpr_idr};
use eepn_core::signal::{generate_qam, matched_downsample, rrc_shape};

const OS: usize = 2;
const ROLLOFF: f64 = 0.1;
const SPAN: usize = 128;
const CPR_W: usize = 65;
const M: usize = 500;

/// Runs the static chain and returns (mean blockwise SNR in dB, blocks).
fn run_chain(n_sym: usize, params: &LinkParams, seed: u64) -> (f64, usize) {
    let rate = params.symbol_rate();
    let tx = generate_qam(16, n_sym, seed)
        .unwrap()
        .with_sample_rate(rate)
        .unwrap();
    let mut wave = rrc_shape(&tx, OS, ROLLOFF, SPAN).unwrap();
    wave = apply_cd(&wave, params.beta2_l()).unwrap();
    if params.lo_linewidth() > 0.0 {
        let lo = wiener_phase(
            params.lo_linewidth(),
            wave.len(),
            wave.sample_rate(),
            seed ^ 0x10,
        )
        .unwrap();
        wave = apply_phase(&wave, &lo).unwrap();
    }
    if params.awgn_snr_db().is_finite() {
        // Reference the noise to the symbol-rate band: the shaped waveform
        // carries 1/OS of the symbol power per sample.
        let wave_snr = params.awgn_snr_db() - 10.0 * (OS as f64).log10();
        wave = add_awgn(&wave, wave_snr, seed ^ 0x20).unwrap();
    }
    wave = apply_cdc(&wave, params.beta2_l()).unwrap();
    let rx = matched_downsample(&wave, OS, ROLLOFF, SPAN).unwrap();

    let trim = SPAN + (cd_memory(params).n_cd() + 1) / 2 + CPR_W;
    let rx = rx.trimmed(trim, trim).unwrap();
    let tx = tx.trimmed(trim, trim).unwrap();
    let (corrected, _) = cpr_idr(&rx, &tx, CPR_W).unwrap();
    let metrics = block_metrics(&corrected, &tx, M).unwrap();

    let signal_power = tx.mean_power();
    let mean_sigma2 = metrics.distortion.mean();
    (
        10.0 * (signal_power / mean_sigma2).log10(),
        metrics.distortion.len(),
    )
}

#[test]
fn awgn_only_chain_calibrates_to_the_configured_snr() {
    let params = LinkParams::from_dispersion(130e9, 18_000.0, 1550.0, 0.0, 0.0, 15.0).unwrap();
    let (snr_db, blocks) = run_chain(1 << 16, &params, 42);
    assert!(blocks >= 100);
    assert!(
        (snr_db - 15.0).abs() < 0.1,
        "calibrated SNR {snr_db:.3} dB vs configured 15.0"
    );
}

#[test]
fn dispersion_roundtrip_is_transparent_inside_the_chain() {
    // With noise off, CD followed by CDC plus the matched-filter cascade
    // leaves only truncation-level residuals.
    let params =
        LinkParams::from_dispersion(130e9, 18_000.0, 1550.0, 0.0, 0.0, f64::INFINITY).unwrap();
    let (snr_db, _) = run_chain(1 << 15, &params, 7);
    assert!(snr_db > 50.0, "transparent-chain SNR {snr_db:.1} dB");
}
