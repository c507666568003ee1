//! Flat `key = value` run configuration.
//!
//! Unknown keys are rejected so a typo cannot silently fall back to a
//! default. Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use eepn_core::channel::{beta2_l_from_dispersion, LinkParams};
use eepn_core::models::{cd_memory, cd_memory_samples};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config error at line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("config error: unknown key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },
    #[error("config error: field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the model's averaging window is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcdMode {
    /// `round(R * tau_cd)` at the symbol rate.
    Formula,
    /// The same memory counted at two samples per symbol, matching sample
    /// counts reported for 2x-oversampled receiver DSP.
    Paper,
}

impl NcdMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NcdMode::Formula => "formula",
            NcdMode::Paper => "paper",
        }
    }
}

/// One simulation/prediction run, fully specified.
#[derive(Debug, Clone)]
pub struct Config {
    pub symbol_rate_bd: f64,
    pub qam_order: u32,
    pub n_symbols: usize,
    pub oversampling: usize,
    pub rrc_rolloff: f64,
    pub rrc_span: usize,
    /// Accumulated dispersion D*L in ps/nm; ignored when `beta2l_ps2` is set.
    pub dl_ps_per_nm: Option<f64>,
    /// Signed accumulated dispersion beta2*L in ps^2; overrides `dl_ps_per_nm`.
    pub beta2l_ps2: Option<f64>,
    pub wavelength_nm: f64,
    pub lo_linewidth_hz: f64,
    pub tx_linewidth_hz: f64,
    pub snr_db: f64,
    pub cpr_window: usize,
    pub block_m: usize,
    pub n_cd_mode: NcdMode,
    pub seed: u64,
}

impl Default for Config {
    /// 130 GBd 16-QAM over 18 ns/nm of dispersion with a 210 kHz LO —
    /// the recorded-link operating point.
    fn default() -> Self {
        Config {
            symbol_rate_bd: 130e9,
            qam_order: 16,
            n_symbols: 1 << 18,
            oversampling: 2,
            rrc_rolloff: 0.01,
            rrc_span: 256,
            dl_ps_per_nm: Some(18_000.0),
            beta2l_ps2: None,
            wavelength_nm: 1550.0,
            lo_linewidth_hz: 210e3,
            tx_linewidth_hz: 0.0,
            snr_db: 17.0,
            cpr_window: 65,
            block_m: 500,
            n_cd_mode: NcdMode::Formula,
            seed: 1,
        }
    }
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse::<T>()
        .map_err(|_| field_err(field, format!("invalid value `{value}`")))
}

impl Config {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Parses overrides on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut dispersion_key_seen = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                text: line.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "symbol_rate_bd" => cfg.symbol_rate_bd = parse_num(key, value)?,
                "qam_order" => cfg.qam_order = parse_num(key, value)?,
                "n_symbols" => cfg.n_symbols = parse_num(key, value)?,
                "oversampling" => cfg.oversampling = parse_num(key, value)?,
                "rrc_rolloff" => cfg.rrc_rolloff = parse_num(key, value)?,
                "rrc_span" => cfg.rrc_span = parse_num(key, value)?,
                "dl_ps_per_nm" => {
                    cfg.dl_ps_per_nm = Some(parse_num(key, value)?);
                    if dispersion_key_seen {
                        return Err(field_err(key, "set either dl_ps_per_nm or beta2l_ps2, not both"));
                    }
                    dispersion_key_seen = true;
                }
                "beta2l_ps2" => {
                    cfg.beta2l_ps2 = Some(parse_num(key, value)?);
                    cfg.dl_ps_per_nm = None;
                    if dispersion_key_seen {
                        return Err(field_err(key, "set either dl_ps_per_nm or beta2l_ps2, not both"));
                    }
                    dispersion_key_seen = true;
                }
                "wavelength_nm" => cfg.wavelength_nm = parse_num(key, value)?,
                "lo_linewidth_hz" => cfg.lo_linewidth_hz = parse_num(key, value)?,
                "tx_linewidth_hz" => cfg.tx_linewidth_hz = parse_num(key, value)?,
                "snr_db" => cfg.snr_db = parse_num(key, value)?,
                "cpr_window" => cfg.cpr_window = parse_num(key, value)?,
                "block_m" => cfg.block_m = parse_num(key, value)?,
                "n_cd_mode" => {
                    cfg.n_cd_mode = match value {
                        "formula" => NcdMode::Formula,
                        "paper" => NcdMode::Paper,
                        other => {
                            return Err(field_err(key, format!(
                                "expected `formula` or `paper`, got `{other}`"
                            )))
                        }
                    }
                }
                "seed" => cfg.seed = parse_num(key, value)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        key: key.to_string(),
                        line: idx + 1,
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.symbol_rate_bd > 0.0) {
            return Err(field_err("symbol_rate_bd", "must be positive"));
        }
        if !matches!(self.qam_order, 4 | 16 | 64) {
            return Err(field_err("qam_order", "must be 4, 16 or 64"));
        }
        if self.n_symbols == 0 {
            return Err(field_err("n_symbols", "must be >= 1"));
        }
        if self.oversampling < 2 {
            return Err(field_err("oversampling", "must be >= 2"));
        }
        if !(0.0..=1.0).contains(&self.rrc_rolloff) {
            return Err(field_err("rrc_rolloff", "must be in [0, 1]"));
        }
        if self.rrc_span < 8 {
            return Err(field_err("rrc_span", "must be >= 8"));
        }
        if self.lo_linewidth_hz < 0.0 {
            return Err(field_err("lo_linewidth_hz", "must be >= 0"));
        }
        if self.tx_linewidth_hz < 0.0 {
            return Err(field_err("tx_linewidth_hz", "must be >= 0"));
        }
        if self.snr_db.is_nan() {
            return Err(field_err("snr_db", "must not be NaN"));
        }
        if self.cpr_window == 0 || self.cpr_window % 2 == 0 {
            return Err(field_err("cpr_window", "must be odd and >= 1"));
        }
        if self.block_m == 0 {
            return Err(field_err("block_m", "must be >= 1"));
        }
        if !(self.wavelength_nm > 0.0) {
            return Err(field_err("wavelength_nm", "must be positive"));
        }
        Ok(())
    }

    /// Resolved signed accumulated dispersion in s^2.
    pub fn beta2_l(&self) -> f64 {
        match (self.beta2l_ps2, self.dl_ps_per_nm) {
            (Some(ps2), _) => ps2 * 1e-24,
            (None, Some(dl)) => beta2_l_from_dispersion(dl, self.wavelength_nm),
            (None, None) => 0.0,
        }
    }

    pub fn link_params(&self) -> Result<LinkParams, ConfigError> {
        LinkParams::new(
            self.symbol_rate_bd,
            self.beta2_l(),
            self.lo_linewidth_hz,
            self.tx_linewidth_hz,
            self.snr_db,
        )
        .map_err(|e| field_err("symbol_rate_bd", e.to_string()))
    }

    /// DSP-rate (oversampled) sample rate in Sa/s.
    pub fn dsp_rate(&self) -> f64 {
        self.symbol_rate_bd * self.oversampling as f64
    }

    /// Averaging-window length in symbols for the time-varying model, per
    /// the configured counting mode.
    pub fn n_cd_model(&self) -> Result<usize, ConfigError> {
        let params = self.link_params()?;
        Ok(match self.n_cd_mode {
            NcdMode::Formula => cd_memory(&params).n_cd(),
            NcdMode::Paper => cd_memory_samples(&params, 2.0 * self.symbol_rate_bd),
        })
    }

    /// Symbols discarded at each end before metrics: the pulse-shaping span,
    /// half the physical dispersion memory (the full-length dispersion FFT
    /// wraps that many symbols circularly), and the CPR window.
    pub fn warmup_symbols(&self) -> Result<usize, ConfigError> {
        let params = self.link_params()?;
        let n_cd = cd_memory(&params).n_cd();
        Ok(self.rrc_span + (n_cd + 1) / 2 + self.cpr_window)
    }

    /// Manifest rendering: every field plus the derived quantities needed to
    /// reproduce the run.
    pub fn manifest(&self) -> Result<String, ConfigError> {
        use std::fmt::Write;
        let params = self.link_params()?;
        let mem = cd_memory(&params);
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("version", env!("CARGO_PKG_VERSION").to_string());
        kv("symbol_rate_bd", format!("{}", self.symbol_rate_bd));
        kv("qam_order", format!("{}", self.qam_order));
        kv("n_symbols", format!("{}", self.n_symbols));
        kv("oversampling", format!("{}", self.oversampling));
        kv("rrc_rolloff", format!("{}", self.rrc_rolloff));
        kv("rrc_span", format!("{}", self.rrc_span));
        if let Some(dl) = self.dl_ps_per_nm {
            kv("dl_ps_per_nm", format!("{dl}"));
        }
        kv("wavelength_nm", format!("{}", self.wavelength_nm));
        kv("beta2l_ps2", format!("{}", self.beta2_l() * 1e24));
        kv("lo_linewidth_hz", format!("{}", self.lo_linewidth_hz));
        kv("tx_linewidth_hz", format!("{}", self.tx_linewidth_hz));
        kv("snr_db", format!("{}", self.snr_db));
        kv("cpr_window", format!("{}", self.cpr_window));
        kv("block_m", format!("{}", self.block_m));
        kv("n_cd_mode", self.n_cd_mode.as_str().to_string());
        kv("seed", format!("{}", self.seed));
        kv("tau_cd_s", format!("{}", mem.tau_cd()));
        kv("n_cd_symbol_rate", format!("{}", mem.n_cd()));
        kv("n_cd_model_window", format!("{}", self.n_cd_model()?));
        kv("warmup_symbols", format!("{}", self.warmup_symbols()?));
        for stage in crate::seeds::Stage::ALL {
            kv(
                &format!("seed_{}", stage.name()),
                format!("{}", crate::seeds::stage_seed(self.seed, stage)),
            );
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_empty_config() {
        let cfg = Config::parse("").unwrap();
        assert_eq!(cfg.qam_order, 16);
        assert_eq!(cfg.n_cd_mode, NcdMode::Formula);
        assert_eq!(cfg.symbol_rate_bd, 130e9);
    }

    #[test]
    fn overrides_and_comments_parse() {
        let cfg = Config::parse(
            "# paper-scale run\nn_symbols = 2097152\nsnr_db = 25\nn_cd_mode = paper\n\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.n_symbols, 1 << 21);
        assert_eq!(cfg.snr_db, 25.0);
        assert_eq!(cfg.n_cd_mode, NcdMode::Paper);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn unknown_keys_are_named() {
        match Config::parse("symbl_rate_bd = 1e9\n") {
            Err(ConfigError::UnknownKey { key, line }) => {
                assert_eq!(key, "symbl_rate_bd");
                assert_eq!(line, 1);
            }
            other => panic!("expected unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn bad_values_name_their_field() {
        match Config::parse("snr_db = abc\n") {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "snr_db"),
            other => panic!("expected field error, got {other:?}"),
        }
        match Config::parse("qam_order = 32\n") {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "qam_order"),
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn beta2l_override_takes_precedence() {
        let cfg = Config::parse("beta2l_ps2 = -22958\n").unwrap();
        assert!(cfg.dl_ps_per_nm.is_none());
        assert!((cfg.beta2_l() - (-22958e-24)).abs() < 1e-30);
    }

    #[test]
    fn dispersion_defaults_to_the_recorded_link() {
        let cfg = Config::default();
        let b = cfg.beta2_l();
        assert!((b * 1e24 + 22958.0).abs() < 5.0, "beta2L {b:e}");
        assert_eq!(cfg.n_cd_model().unwrap(), 2438);
        let paper = Config::parse("n_cd_mode = paper\n").unwrap();
        assert_eq!(paper.n_cd_model().unwrap(), 4876);
    }

    #[test]
    fn infinite_snr_parses() {
        let cfg = Config::parse("snr_db = inf\n").unwrap();
        assert_eq!(cfg.snr_db, f64::INFINITY);
    }

    #[test]
    fn both_dispersion_keys_conflict() {
        assert!(Config::parse("dl_ps_per_nm = 18000\nbeta2l_ps2 = -22958\n").is_err());
    }
}
