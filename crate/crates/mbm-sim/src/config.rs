//! Experiment settings: CLI flag values, the flat key-value config
//! file that mirrors them, and their merge into runnable specs.
//!
//! The config file holds one `key = value` pair per line with `#`
//! comments; keys are the long flag names without the leading dashes
//! (e.g. `scheme`, `snr-grid`). Flags override file values.

use std::collections::HashMap;
use std::path::Path;

use crate::channel::SnrConvention;
use crate::detectors::DetectorKind;
use crate::harness::StopRule;
use crate::modulation::Alphabet;
use crate::signalsets::{Scheme, SchemeConfig};
use crate::{Error, Result};

/// All tunable experiment settings; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub scheme: Option<String>,
    pub detector: Option<String>,
    pub users: Option<usize>,
    pub n_r: Option<usize>,
    pub m_rf: Option<usize>,
    pub n_t: Option<usize>,
    pub n_rf: Option<usize>,
    pub alphabet: Option<String>,
    pub snr_db: Option<f64>,
    pub snr_grid: Option<Vec<f64>>,
    pub nr_grid: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub min_errors: Option<u64>,
    pub max_uses: Option<u64>,
    pub snr_convention: Option<String>,
    pub out: Option<String>,
}

const KNOWN_KEYS: &[&str] = &[
    "scheme",
    "detector",
    "k",
    "nr",
    "mrf",
    "nt",
    "nrf",
    "alphabet",
    "snr-db",
    "snr-grid",
    "nr-grid",
    "seed",
    "min-errors",
    "max-uses",
    "snr-convention",
    "out",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: {value}")))
}

/// Comma-separated f64 list, e.g. `0,2,4.5`.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| parse_num("grid entry", p.trim()))
        .collect()
}

/// Comma-separated usize list, e.g. `48,64,128`.
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| parse_num("grid entry", p.trim()))
        .collect()
}

impl Settings {
    /// Parses the flat key-value config file format.
    pub fn from_config_text(text: &str) -> Result<Settings> {
        let mut map = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "config line {}: unknown key {key}",
                    lineno + 1
                )));
            }
            map.insert(key, value.trim().to_string());
        }
        let mut s = Settings::default();
        if let Some(v) = map.get("scheme") {
            s.scheme = Some(v.clone());
        }
        if let Some(v) = map.get("detector") {
            s.detector = Some(v.clone());
        }
        if let Some(v) = map.get("k") {
            s.users = Some(parse_num("k", v)?);
        }
        if let Some(v) = map.get("nr") {
            s.n_r = Some(parse_num("nr", v)?);
        }
        if let Some(v) = map.get("mrf") {
            s.m_rf = Some(parse_num("mrf", v)?);
        }
        if let Some(v) = map.get("nt") {
            s.n_t = Some(parse_num("nt", v)?);
        }
        if let Some(v) = map.get("nrf") {
            s.n_rf = Some(parse_num("nrf", v)?);
        }
        if let Some(v) = map.get("alphabet") {
            s.alphabet = Some(v.clone());
        }
        if let Some(v) = map.get("snr-db") {
            s.snr_db = Some(parse_num("snr-db", v)?);
        }
        if let Some(v) = map.get("snr-grid") {
            s.snr_grid = Some(parse_f64_list(v)?);
        }
        if let Some(v) = map.get("nr-grid") {
            s.nr_grid = Some(parse_usize_list(v)?);
        }
        if let Some(v) = map.get("seed") {
            s.seed = Some(parse_num("seed", v)?);
        }
        if let Some(v) = map.get("min-errors") {
            s.min_errors = Some(parse_num("min-errors", v)?);
        }
        if let Some(v) = map.get("max-uses") {
            s.max_uses = Some(parse_num("max-uses", v)?);
        }
        if let Some(v) = map.get("snr-convention") {
            s.snr_convention = Some(v.clone());
        }
        if let Some(v) = map.get("out") {
            s.out = Some(v.clone());
        }
        Ok(s)
    }

    pub fn from_config_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Settings::from_config_text(&text)
    }

    /// Overlays `overrides` (typically CLI flags) on top of `self`
    /// (typically file values).
    pub fn merged_with(self, overrides: Settings) -> Settings {
        Settings {
            scheme: overrides.scheme.or(self.scheme),
            detector: overrides.detector.or(self.detector),
            users: overrides.users.or(self.users),
            n_r: overrides.n_r.or(self.n_r),
            m_rf: overrides.m_rf.or(self.m_rf),
            n_t: overrides.n_t.or(self.n_t),
            n_rf: overrides.n_rf.or(self.n_rf),
            alphabet: overrides.alphabet.or(self.alphabet),
            snr_db: overrides.snr_db.or(self.snr_db),
            snr_grid: overrides.snr_grid.or(self.snr_grid),
            nr_grid: overrides.nr_grid.or(self.nr_grid),
            seed: overrides.seed.or(self.seed),
            min_errors: overrides.min_errors.or(self.min_errors),
            max_uses: overrides.max_uses.or(self.max_uses),
            snr_convention: overrides.snr_convention.or(self.snr_convention),
            out: overrides.out.or(self.out),
        }
    }

    fn require<T: Clone>(value: &Option<T>, name: &str) -> Result<T> {
        value
            .clone()
            .ok_or_else(|| Error::Config(format!("missing required setting: {name}")))
    }

    /// Builds the scheme configuration, enforcing per-scheme parameter
    /// requirements.
    pub fn scheme_config(&self) -> Result<SchemeConfig> {
        let scheme = Scheme::parse(&Self::require(&self.scheme, "scheme")?)?;
        let alphabet = Alphabet::parse(&Self::require(&self.alphabet, "alphabet")?)?;
        let users = Self::require(&self.users, "k")?;
        let n_r = Self::require(&self.n_r, "nr")?;
        let config = match scheme {
            Scheme::Mbm => {
                let m_rf = Self::require(&self.m_rf, "mrf")?;
                SchemeConfig::mbm(m_rf, alphabet, users, n_r)
            }
            Scheme::Cm => SchemeConfig::cm(alphabet, users, n_r),
            Scheme::Sm => {
                let n_t = Self::require(&self.n_t, "nt")?;
                SchemeConfig::sm(n_t, alphabet, users, n_r)
            }
            Scheme::Gsm => {
                let n_t = Self::require(&self.n_t, "nt")?;
                let n_rf = Self::require(&self.n_rf, "nrf")?;
                SchemeConfig::gsm(n_t, n_rf, alphabet, users, n_r)
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn detector(&self) -> Result<DetectorKind> {
        DetectorKind::parse(&Self::require(&self.detector, "detector")?)
    }

    pub fn convention(&self) -> Result<SnrConvention> {
        match &self.snr_convention {
            Some(v) => SnrConvention::parse(v),
            None => Ok(SnrConvention::Aggregate),
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        let mut rule = StopRule::default();
        if let Some(e) = self.min_errors {
            rule.min_bit_errors = e;
        }
        if let Some(u) = self.max_uses {
            rule.max_channel_uses = u;
        }
        rule
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }
}
