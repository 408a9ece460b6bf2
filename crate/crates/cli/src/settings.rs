use std::time::Duration;

use clap::{Args, ValueEnum};
use tablesynth::synth::{Mode, SynthSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "bi", alias = "bidirectional")]
    Bi,
    #[value(name = "forward-only")]
    ForwardOnly,
    /// Both modes, one report each (bench only).
    Both,
}

impl ModeArg {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Bi => vec![Mode::Bidirectional],
            ModeArg::ForwardOnly => vec![Mode::ForwardOnly],
            ModeArg::Both => vec![Mode::Bidirectional, Mode::ForwardOnly],
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SettingsArgs {
    /// Wall-clock budget per synthesis, e.g. 120s, 500ms, 2m.
    #[arg(long, env = "BEE_TIMEOUT", default_value = "120s", value_parser = parse_duration)]
    pub timeout: Duration,

    /// Most transformation statements stacked on an input table.
    #[arg(long, env = "BEE_MAX_DEPTH", default_value_t = 3)]
    pub max_depth: usize,

    /// Hypotheses drawn per depth before moving on.
    #[arg(long, env = "BEE_HYPOTHESIS_BOUND", default_value_t = 20)]
    pub hypothesis_bound: usize,

    #[arg(long, env = "BEE_MODE", value_enum, default_value = "bi")]
    pub mode: ModeArg,

    /// Accepted for reproducibility scripts; the engine is deterministic.
    #[arg(long, env = "BEE_SEED")]
    pub seed: Option<u64>,
}

impl SettingsArgs {
    pub fn settings(&self, mode: Mode) -> SynthSettings {
        SynthSettings {
            timeout: self.timeout,
            max_depth: self.max_depth,
            hypothesis_bound: self.hypothesis_bound,
            mode,
            ..SynthSettings::default()
        }
    }
}

/// `<number><unit>` with unit one of ns, us, ms, s, m, h; a bare number is
/// seconds.
pub fn parse_duration(s: &str) -> Result<Duration, String> {
    let s = s.trim();
    let split = s
        .find(|c: char| !c.is_ascii_digit() && c != '.')
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: f64 = num.parse().map_err(|_| format!("invalid duration `{s}`"))?;
    let secs = match unit.trim() {
        "ns" => n / 1e9,
        "us" | "µs" => n / 1e6,
        "ms" => n / 1e3,
        "" | "s" => n,
        "m" | "min" => n * 60.0,
        "h" => n * 3600.0,
        u => return Err(format!("unknown duration unit `{u}`")),
    };
    if !secs.is_finite() || secs <= 0.0 {
        return Err(format!("duration must be positive, got `{s}`"));
    }
    Ok(Duration::from_secs_f64(secs))
}
