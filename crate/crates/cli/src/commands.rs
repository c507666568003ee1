//! The four experiment commands: simulate, predict, compare, prep-trace.
//!
//! Each writes its artifacts under an output directory and also returns the
//! computed series so tests can consume them in-process.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use eepn_core::analysis::{
    histogram, pearson, read_series_csv, snr_series, write_series_csv, Correlation,
};
use eepn_core::channel::{
    add_awgn, apply_cd, apply_phase, detrend_poly, load_phase_trace, resample_phase,
    save_phase_trace, wiener_phase, PhaseTrace,
};
use eepn_core::models::{fdpe_distortion, sota_gn_predict, temporal_gn_predict};
use eepn_core::rx_dsp::{apply_cdc, block_metrics, cpr_idr, BlockSeries};
use eepn_core::signal::{generate_qam, matched_downsample, rrc_shape};

use crate::config::Config;
use crate::seeds::{stage_seed, Stage};

/// Results of one simulation run.
#[derive(Debug)]
pub struct SimulateOutputs {
    /// Measured blockwise distortion power.
    pub sigma2: BlockSeries,
    /// Measured blockwise SNR in dB.
    pub snr_db: BlockSeries,
    /// LO phase trace as applied, at the DSP rate.
    pub lo_trace: PhaseTrace,
    /// Aggregate SNR over all blocks, dB.
    pub mean_snr_db: f64,
}

/// Transmit-to-metrics chain: QAM -> RRC -> (Tx phase) -> CD -> LO phase ->
/// AWGN -> CDC -> matched filter -> warm-up trim -> CPR -> block metrics.
///
/// Writes `measured_sigma2.csv`, `measured_snr.csv`, `phase_trace.txt` and
/// `run_manifest.txt` into `out_dir`. A prepared LO trace may be supplied to
/// replay a recorded realization instead of drawing a synthetic one.
pub fn run_simulate(
    cfg: &Config,
    lo_override: Option<&PhaseTrace>,
    out_dir: &Path,
) -> Result<SimulateOutputs> {
    cfg.validate()?;
    let params = cfg.link_params()?;
    let os = cfg.oversampling;
    let dsp_rate = cfg.dsp_rate();
    let warm = cfg.warmup_symbols()?;
    if cfg.n_symbols < 2 * warm + cfg.block_m + 1 {
        bail!(
            "invalid argument: n_symbols = {} leaves no full block of {} after \
             discarding {warm} warm-up symbols per side",
            cfg.n_symbols,
            cfg.block_m + 1
        );
    }

    let tx = generate_qam(cfg.qam_order, cfg.n_symbols, stage_seed(cfg.seed, Stage::Symbols))?
        .with_sample_rate(cfg.symbol_rate_bd)?;
    let mut wave = rrc_shape(&tx, os, cfg.rrc_rolloff, cfg.rrc_span)?;

    if cfg.tx_linewidth_hz > 0.0 {
        let tx_phase = wiener_phase(
            cfg.tx_linewidth_hz,
            wave.len(),
            dsp_rate,
            stage_seed(cfg.seed, Stage::TxPhase),
        )?;
        wave = apply_phase(&wave, &tx_phase)?;
    }

    wave = apply_cd(&wave, params.beta2_l())?;

    let lo_trace = match lo_override {
        Some(trace) => {
            let resampled = resample_phase(trace, dsp_rate)?;
            if resampled.len() < wave.len() {
                bail!(
                    "invalid argument: LO trace covers {} DSP samples, run needs {}",
                    resampled.len(),
                    wave.len()
                );
            }
            resampled.trimmed(0, resampled.len() - wave.len())?
        }
        None => wiener_phase(
            cfg.lo_linewidth_hz,
            wave.len(),
            dsp_rate,
            stage_seed(cfg.seed, Stage::LoPhase),
        )?,
    };
    wave = apply_phase(&wave, &lo_trace)?;

    if cfg.snr_db.is_finite() {
        // The shaped waveform spreads each symbol's power over `os` samples;
        // reference the noise to the symbol-rate band so the blockwise SNR
        // calibrates to the configured value.
        let wave_snr = cfg.snr_db - 10.0 * (os as f64).log10();
        wave = add_awgn(&wave, wave_snr, stage_seed(cfg.seed, Stage::Awgn))?;
    }

    wave = apply_cdc(&wave, params.beta2_l())?;
    let rx = matched_downsample(&wave, os, cfg.rrc_rolloff, cfg.rrc_span)?;

    let rx = rx.trimmed(warm, warm)?;
    let tx = tx.trimmed(warm, warm)?;
    let (corrected, _phase_est) = cpr_idr(&rx, &tx, cfg.cpr_window)?;
    let metrics = block_metrics(&corrected, &tx, cfg.block_m)?;

    let signal_power = tx.mean_power();
    let snr_db = snr_series(&metrics.distortion, signal_power)?;
    let mean_snr_db = 10.0 * (signal_power / metrics.distortion.mean()).log10();

    fs::create_dir_all(out_dir)?;
    write_series_csv(&metrics.distortion, out_dir.join("measured_sigma2.csv"))?;
    write_series_csv(&snr_db, out_dir.join("measured_snr.csv"))?;
    save_phase_trace(&lo_trace, out_dir.join("phase_trace.txt"))?;
    fs::write(out_dir.join("run_manifest.txt"), cfg.manifest()?)?;

    Ok(SimulateOutputs {
        sigma2: metrics.distortion,
        snr_db,
        lo_trace,
        mean_snr_db,
    })
}

/// Results of one model-evaluation run.
#[derive(Debug)]
pub struct PredictOutputs {
    pub temporal: BlockSeries,
    pub fdpe: BlockSeries,
    pub sota: BlockSeries,
}

/// Evaluates the three distortion-power models on a phase trace, on the same
/// block grid [`run_simulate`] uses for the same config.
///
/// Writes `temporal_gn.csv`, `fdpe_distortion.csv` and `sota_gn.csv`. The
/// trace is resampled to the symbol rate and trimmed by the same warm-up as
/// the simulation. The constant of the baseline model defaults to the time
/// average of the time-varying prediction.
pub fn run_predict(cfg: &Config, trace_path: &Path, out_dir: &Path) -> Result<PredictOutputs> {
    cfg.validate()?;
    let params = cfg.link_params()?;
    let trace = load_phase_trace(trace_path)
        .with_context(|| format!("reading {}", trace_path.display()))?;
    let at_symbol_rate = resample_phase(&trace, cfg.symbol_rate_bd)?;

    let warm = cfg.warmup_symbols()?;
    if at_symbol_rate.len() < 2 * warm + cfg.block_m + 1 {
        bail!(
            "invalid argument: trace covers {} symbols, need more than {} for one block",
            at_symbol_rate.len(),
            2 * warm + cfg.block_m
        );
    }
    let trimmed = at_symbol_rate.trimmed(warm, warm)?;

    let temporal = temporal_gn_predict(&trimmed, cfg.n_cd_model()?, cfg.block_m)?;
    let fdpe = fdpe_distortion(&trimmed, &params, cfg.block_m)?;
    let sota = sota_gn_predict(temporal.mean(), temporal.len(), cfg.block_m, None)?;

    fs::create_dir_all(out_dir)?;
    write_series_csv(&temporal, out_dir.join("temporal_gn.csv"))?;
    write_series_csv(&fdpe, out_dir.join("fdpe_distortion.csv"))?;
    write_series_csv(&sota, out_dir.join("sota_gn.csv"))?;

    Ok(PredictOutputs {
        temporal,
        fdpe,
        sota,
    })
}

/// Comparison report between two block series.
#[derive(Debug)]
pub struct CompareReport {
    pub correlation: Correlation,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_blocks: usize,
}

impl CompareReport {
    pub fn render(&self) -> String {
        format!(
            "rho={}\ndefined={}\nmean_a={}\nmean_b={}\nn_blocks={}\n",
            self.correlation.rho,
            self.correlation.defined,
            self.mean_a,
            self.mean_b,
            self.n_blocks
        )
    }
}

const COMPARE_HIST_BINS: usize = 50;

/// Correlates two series CSV files on identical block grids and writes
/// `compare_report.txt`, `hist_a.csv` and `hist_b.csv`.
pub fn run_compare(series_a: &Path, series_b: &Path, out_dir: &Path) -> Result<CompareReport> {
    let a = read_series_csv(series_a)
        .with_context(|| format!("reading {}", series_a.display()))?;
    let b = read_series_csv(series_b)
        .with_context(|| format!("reading {}", series_b.display()))?;
    let correlation = pearson(&a, &b)?;
    let report = CompareReport {
        correlation,
        mean_a: a.mean(),
        mean_b: b.mean(),
        n_blocks: a.len(),
    };

    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("compare_report.txt"), report.render())?;
    write_histogram_csv(&a, out_dir.join("hist_a.csv"))?;
    write_histogram_csv(&b, out_dir.join("hist_b.csv"))?;
    Ok(report)
}

fn write_histogram_csv(series: &BlockSeries, path: impl AsRef<Path>) -> Result<()> {
    use std::io::Write;
    let hist = histogram(series, COMPARE_HIST_BINS, false)?;
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "bin_center,probability")?;
    for (c, p) in hist {
        writeln!(out, "{c},{p}")?;
    }
    Ok(())
}

/// Detrends a recorded phase trace with a least-squares polynomial (the
/// degree-5 default removes slow frequency drift between the lasers) and
/// resamples it to the target rate.
pub fn run_prep_trace(
    raw_trace: &Path,
    degree: usize,
    target_rate: f64,
    out: &Path,
) -> Result<()> {
    let trace = load_phase_trace(raw_trace)
        .with_context(|| format!("reading {}", raw_trace.display()))?;
    let detrended = detrend_poly(&trace, degree)?;
    let resampled = resample_phase(&detrended, target_rate)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    save_phase_trace(&resampled, out)?;
    Ok(())
}
