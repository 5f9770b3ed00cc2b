//! Experiment configuration: a flat `key = value` file, overridden by
//! command-line settings. Unknown keys and malformed values are config
//! errors.

use std::fmt::Write as _;
use std::hash::Hasher;
use std::path::Path;
use std::str::FromStr;

use fnv::FnvHasher;

use crate::error::{Error, Result};

macro_rules! config {
    ($( $(#[doc = $doc:literal])* $field:ident : $ty:ty = $default:expr, $key:literal; )*) => {
        /// Every setting a command may read, with its default.
        #[derive(Clone, Debug, PartialEq)]
        pub struct ExperimentConfig {
            $( $(#[doc = $doc])* pub $field: $ty, )*
        }

        impl Default for ExperimentConfig {
            fn default() -> Self {
                ExperimentConfig { $( $field: $default.into(), )* }
            }
        }

        impl ExperimentConfig {
            pub const KEYS: &'static [&'static str] = &[$( $key ),*];

            /// Sets one key from its text form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $( $key => self.$field = parse_value(key, value)?, )*
                    _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
                }
                Ok(())
            }

            /// All settings as sorted `key = value` lines.
            pub fn dump(&self) -> String {
                let mut lines = vec![$( format!("{} = {}", $key, self.$field) ),*];
                lines.sort();
                let mut s = String::new();
                for l in lines {
                    let _ = writeln!(s, "{l}");
                }
                s
            }
        }
    };
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse '{value}' for key '{key}'")))
}

config! {
    /// identity, bec36, bec (with l, r), bicm or table.
    system: String = "bec36", "system";
    l: usize = 3usize, "l";
    r: usize = 6usize, "r";
    eps: f64 = 0.47, "eps";
    /// Preset name (gray, natural, set-partition, id-optimized) or a
    /// mapping file.
    mapping: String = "gray", "mapping";
    /// Es/N0 in dB.
    snr: f64 = 5.76, "snr";
    gh_order: usize = 64usize, "gh_order";
    /// Decoder smoothing parameter n; 0 keeps the unsmoothed MAP curve.
    smoothing: f64 = 1000.0, "smoothing";
    /// Two-column sample files for system = table.
    phi_table: String = "", "phi_table";
    psi_table: String = "", "psi_table";
    sections: usize = 100usize, "L";
    w: usize = 8usize, "W";
    /// Bits per section for the interleaver.
    m: usize = 12usize, "M";
    max_iter: usize = 100_000usize, "max_iter";
    stall_tol: f64 = 1e-9, "stall_tol";
    /// Saturation margin below u_opt.
    delta: f64 = 1e-3, "delta";
    /// pinned or circular.
    boundary: String = "pinned", "boundary";
    /// Trajectory CSV keeps every k-th iterate.
    stride: usize = 10usize, "stride";
    n_grid: usize = 2048usize, "n_grid";
    fp_tol: f64 = 1e-12, "fp_tol";
    alpha: f64 = 0.05, "alpha";
    /// Comma-separated α values for gap and comparison sweeps.
    alphas: String = "0.1,0.05,0.025,0.0125", "alphas";
    pde_tol: f64 = 1e-8, "pde_tol";
    bvp_tol: f64 = 1e-10, "bvp_tol";
    /// Continuum task: profile, gap, compare or all.
    task: String = "profile", "task";
    chart_grid: usize = 200usize, "chart_grid";
    /// Also compute SNR thresholds in exit-chart.
    thresholds: bool = false, "thresholds";
    snr_lo: f64 = 4.5, "snr_lo";
    snr_hi: f64 = 6.5, "snr_hi";
    snr_tol: f64 = 1e-4, "snr_tol";
    eps_lo: f64 = 0.43, "eps_lo";
    eps_hi: f64 = 0.52, "eps_hi";
    eps_tol: f64 = 1e-6, "eps_tol";
    seed: u64 = 1u64, "seed";
    /// Output directory for CSV and text files.
    out: String = ".", "out";
}

impl ExperimentConfig {
    /// Applies a `key = value` text; '#' starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value: '{line}'", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{kv}' is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("stall_tol", self.stall_tol),
            ("delta", self.delta),
            ("fp_tol", self.fp_tol),
            ("pde_tol", self.pde_tol),
            ("bvp_tol", self.bvp_tol),
            ("snr_tol", self.snr_tol),
            ("eps_tol", self.eps_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.w == 0 || self.w > self.sections {
            return bad(format!("need L >= W >= 1, got L={}, W={}", self.sections, self.w));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return bad(format!("alpha must lie in (0, 0.5], got {}", self.alpha));
        }
        for a in self.alpha_list()? {
            if !(a > 0.0 && a <= 0.5) {
                return bad(format!("alphas entries must lie in (0, 0.5], got {a}"));
            }
        }
        if !(self.smoothing == 0.0 || self.smoothing >= 1.0) {
            return bad(format!("smoothing must be 0 or at least 1, got {}", self.smoothing));
        }
        if !(self.snr_lo < self.snr_hi) || !(self.eps_lo < self.eps_hi) {
            return bad("threshold brackets must satisfy lo < hi".into());
        }
        if !["pinned", "circular"].contains(&self.boundary.as_str()) {
            return bad(format!("boundary must be pinned or circular, got '{}'", self.boundary));
        }
        if !["profile", "gap", "compare", "all"].contains(&self.task.as_str()) {
            return bad(format!("task must be profile, gap, compare or all, got '{}'", self.task));
        }
        Ok(())
    }

    pub fn alpha_list(&self) -> Result<Vec<f64>> {
        self.alphas.split(',').map(|a| parse_value("alphas", a)).collect()
    }

    /// FNV-1a of the canonical dump without the output directory, so
    /// the same experiment hashes the same wherever it is written.
    pub fn hash(&self) -> u64 {
        let mut h = FnvHasher::default();
        for line in self.dump().lines().filter(|l| !l.starts_with("out = ")) {
            h.write(line.as_bytes());
            h.write(b"\n");
        }
        h.finish()
    }

    /// Comment line that opens every CSV written for this configuration.
    pub fn csv_header(&self) -> String {
        format!("# scsat {} config={:016x} seed={}\n", env!("CARGO_PKG_VERSION"), self.hash(), self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let mut c = ExperimentConfig::default();
        c.set("eps", "0.45").unwrap();
        c.set("L", "40").unwrap();
        let mut d = ExperimentConfig::default();
        d.apply_text(&c.dump()).unwrap();
        assert_eq!(c, d);
        assert_eq!(c.hash(), d.hash());
        assert_ne!(c.hash(), ExperimentConfig::default().hash());
        d.set("out", "elsewhere").unwrap();
        assert_eq!(c.hash(), d.hash());
    }

    #[test]
    fn every_key_is_settable() {
        let c = ExperimentConfig::default();
        assert_eq!(c.dump().lines().count(), ExperimentConfig::KEYS.len());
        for line in c.dump().lines() {
            let (k, v) = line.split_once(" = ").unwrap();
            let mut d = ExperimentConfig::default();
            d.set(k, v).unwrap();
            assert_eq!(c, d);
        }
    }

    #[test]
    fn bad_input_is_a_config_error() {
        let mut c = ExperimentConfig::default();
        assert!(c.set("nope", "1").unwrap_err().is_config());
        assert!(c.set("L", "-3").unwrap_err().is_config());
        assert!(c.apply_text("eps 0.4").unwrap_err().is_config());
        c.set("W", "0").unwrap();
        assert!(c.validate().unwrap_err().is_config());
        let mut c = ExperimentConfig::default();
        c.set("alpha", "0.7").unwrap();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.set("stall_tol", "0").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn comments_and_header() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# run\n\nseed = 9\n").unwrap();
        assert_eq!(c.seed, 9);
        assert!(c.csv_header().starts_with("# scsat "));
        assert!(c.csv_header().ends_with("seed=9\n"));
    }
}
