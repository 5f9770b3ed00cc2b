//! 16-QAM labelings and mapping files.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

const LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];

/// Shipped 16-QAM labelings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Gray,
    Natural,
    SetPartition,
    /// A labeling chosen so that the chart at 5.76 dB has two stable
    /// crossings with the (3, 6) decoder.
    IdOptimized,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Gray, Preset::Natural, Preset::SetPartition, Preset::IdOptimized];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Gray => "gray",
            Preset::Natural => "natural",
            Preset::SetPartition => "set-partition",
            Preset::IdOptimized => "id-optimized",
        }
    }

    /// Label at each grid position 4·row + col, row 0 on top.
    fn labels_by_position(self) -> [u8; 16] {
        let mut out = [0u8; 16];
        match self {
            Preset::Gray => {
                let g = [0u8, 1, 3, 2];
                for pos in 0..16 {
                    let (row, col) = (pos / 4, pos % 4);
                    out[pos] = (g[col] << 2) | g[3 - row];
                }
            }
            Preset::Natural => {
                for (pos, l) in out.iter_mut().enumerate() {
                    *l = pos as u8;
                }
            }
            Preset::SetPartition => {
                out = [0, 5, 1, 4, 10, 15, 11, 14, 2, 7, 3, 6, 8, 13, 9, 12];
            }
            Preset::IdOptimized => {
                out = [1, 4, 12, 15, 7, 2, 9, 10, 11, 14, 0, 3, 8, 13, 5, 6];
            }
        }
        out
    }

    pub fn constellation(self) -> Constellation {
        let mut pts = vec![Complex64::new(0.0, 0.0); 16];
        for (pos, &label) in self.labels_by_position().iter().enumerate() {
            pts[label as usize] = Complex64::new(LEVELS[pos % 4], LEVELS[3 - pos / 4]);
        }
        Constellation::new(pts).expect("preset is a valid labeling").named(self.name())
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mapping preset '{s}' (gray, natural, set-partition, id-optimized)")))
    }
}

/// Points indexed by their Q-bit label, scaled to unit average energy.
/// Bit 0 of a label in the sense of [`bit`] is its most significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    pub points: Vec<Complex64>,
    pub q: usize,
    pub name: String,
}

impl Constellation {
    /// Normalizes `points` (indexed by label) to unit average energy.
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        let m = points.len();
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::Model(format!("constellation size {m} is not a power of two >= 2")));
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
        if !(energy > 0.0) || points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::Model("constellation has no energy or non-finite points".into()));
        }
        for i in 0..m {
            for j in 0..i {
                if (points[i] - points[j]).norm() < 1e-9 * energy.sqrt() {
                    return Err(Error::Model(format!("labels {j} and {i} share a point")));
                }
            }
        }
        let s = energy.sqrt();
        Ok(Constellation {
            points: points.into_iter().map(|p| p / s).collect(),
            q: m.trailing_zeros() as usize,
            name: "custom".into(),
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.size() as f64
    }

    /// Parses a mapping file: one "bbbb re im" line per label. Blank
    /// lines and lines starting with '#' are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, Complex64)> = Vec::new();
        let mut width = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Config(format!("mapping line {}: {what}: '{line}'", n + 1));
            let mut parts = line.split_whitespace();
            let (Some(bits), Some(re), Some(im), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected 'label re im'"));
            };
            if bits.is_empty() || !bits.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(bad("label must be a bit string"));
            }
            if *width.get_or_insert(bits.len()) != bits.len() {
                return Err(bad("labels have different lengths"));
            }
            let label = usize::from_str_radix(bits, 2).map_err(|_| bad("label too long"))?;
            let re: f64 = re.parse().map_err(|_| bad("bad real part"))?;
            let im: f64 = im.parse().map_err(|_| bad("bad imaginary part"))?;
            entries.push((label, Complex64::new(re, im)));
        }
        let q = width.ok_or_else(|| Error::Config("mapping file is empty".into()))?;
        let m = 1usize << q;
        if entries.len() != m {
            return Err(Error::Config(format!("mapping has {} entries, expected {m}", entries.len())));
        }
        let mut pts = vec![None; m];
        for (label, p) in entries {
            if pts[label].replace(p).is_some() {
                return Err(Error::Config(format!("label {label:0q$b} appears twice")));
            }
        }
        Constellation::new(pts.into_iter().map(|p| p.expect("all labels present")).collect())
            .map_err(|e| Error::Config(format!("invalid mapping: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self::parse(&text)?.named(name))
    }

    /// Mapping-file text for this constellation.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (label, p) in self.points.iter().enumerate() {
            s.push_str(&format!("{label:0w$b} {:.17e} {:.17e}\n", p.re, p.im, w = self.q));
        }
        s
    }
}

/// Bit `q` of `label`, counting from the most significant of `width` bits.
pub fn bit(label: usize, q: usize, width: usize) -> usize {
    (label >> (width - 1 - q)) & 1
}
