use rmtgrid::covtest::TestConfig;
use rmtgrid::sa::{LawCheckConfig, TestFunction};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 1;
/// Windows in a flagged run before `lawcheck` reports an anomaly. Isolated
/// false flags on noise-only streams come in runs of at most a few windows.
pub const DEFAULT_MIN_RUN: usize = 10;

/// Settings shared by the stream-analysis commands, validated before any work starts.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub window_t: usize,
    pub stride: usize,
    pub q: usize,
    pub n_g: usize,
    pub alpha: f64,
    pub seed: u64,
    pub indicators: Vec<TestFunction>,
    pub law: LawCheckConfig,
    pub min_run: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TestConfig::default();
        Self {
            window_t: 240,
            stride: 1,
            q: t.q,
            n_g: t.n_g,
            alpha: t.alpha,
            seed: DEFAULT_SEED,
            indicators: Vec::new(),
            law: LawCheckConfig::default(),
            min_run: DEFAULT_MIN_RUN,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.window_t < 2 {
            return bad("--window must be at least 2");
        }
        if self.stride == 0 {
            return bad("--stride must be positive");
        }
        if self.min_run == 0 {
            return bad("--min-run must be positive");
        }
        if !(self.law.delta >= 0.0) || !(0.0..=1.0).contains(&self.law.min_fraction) || self.law.l == 0 {
            return bad("law tolerances out of range");
        }
        TestConfig { p: 2, n_g: self.n_g, q: self.q, alpha: self.alpha }
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Parses a comma-separated indicator list; `msr` is always reported and is skipped here.
    pub fn parse_indicators(list: &str) -> CliResult<Vec<TestFunction>> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty() && *s != "msr")
            .map(|s| s.parse::<TestFunction>().map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn rejections() {
        assert!(RunConfig { q: 1, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { alpha: 1.5, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { stride: 0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig::parse_indicators("msr,moment-2,bogus").is_err());
        assert_eq!(RunConfig::parse_indicators("msr, log-det").unwrap().len(), 1);
    }
}
