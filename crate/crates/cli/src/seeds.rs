//! Sub-seed derivation: every random stage draws from its own stream,
//! derived from the single master seed by `splitmix64(master ^ stage_tag)`.

/// Randomized stages of a run, each with a fixed tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Symbols,
    LoPhase,
    TxPhase,
    Awgn,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Symbols, Stage::LoPhase, Stage::TxPhase, Stage::Awgn];

    fn tag(&self) -> u64 {
        match self {
            Stage::Symbols => 0x01,
            Stage::LoPhase => 0x02,
            Stage::TxPhase => 0x03,
            Stage::Awgn => 0x04,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Symbols => "symbols",
            Stage::LoPhase => "lo_phase",
            Stage::TxPhase => "tx_phase",
            Stage::Awgn => "awgn",
        }
    }
}

/// Deterministic per-stage seed for a master seed.
pub fn stage_seed(master: u64, stage: Stage) -> u64 {
    splitmix64(master ^ stage.tag())
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
