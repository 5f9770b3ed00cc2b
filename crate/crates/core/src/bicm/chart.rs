//! EXIT chart in the (z, u) plane: demapper curve u = f₀(z) and decoder
//! curve u = g⁻¹(z), areas between them and the rate-loss decomposition.

use std::fmt::Write as _;

use super::decoder::MapDecoder;
use super::demod::DemodTable;
use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Intersection of the two curves. `z` is decoder output, `u` demapper
/// output; (z, u) is a fixed point of u ↦ f₀(g(u)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub z: f64,
    pub u: f64,
    pub stable: bool,
}

#[derive(Clone, Debug)]
pub struct ExitChart {
    pub snr_db: f64,
    pub q: usize,
    pub rate: f64,
    pub i_grid: Vec<f64>,
    /// f₀ on `i_grid`.
    pub demod_u: Vec<f64>,
    /// g on `i_grid`.
    pub decoder_z: Vec<f64>,
    /// f₀(g(I)) on `i_grid`.
    pub composite: Vec<f64>,
    pub crossings: Vec<Crossing>,
    /// Signed integrals of f₀ − g⁻¹ between consecutive sign changes,
    /// from z = 0 upward.
    pub regions: Vec<f64>,
    pub s_t: f64,
    pub s_m: f64,
    pub s_b: f64,
    /// Set when the regions are not one tunnel or the three-area pattern.
    pub degenerate: Option<String>,
    pub capacity: f64,
}

/// f₀(z) − g⁻¹(z).
fn gap(table: &DemodTable, dec: &MapDecoder, z: f64) -> f64 {
    table.f0(z).0 - dec.inverse(z)
}

/// Builds the chart with `n_grid` + 1 tabulation points. Crossings are
/// located by scanning 4096 cells and bisecting each sign change.
pub fn build_exit_chart(table: &DemodTable, dec: &MapDecoder, n_grid: usize) -> Result<ExitChart> {
    if n_grid < 2 {
        return Err(Error::Parameter(format!("chart grid needs at least 2 cells, got {n_grid}")));
    }
    let scan = 4096;
    let mut roots = Vec::new();
    let mut prev = gap(table, dec, 0.0);
    let mut z_prev = 0.0;
    for k in 1..=scan {
        let z = k as f64 / scan as f64;
        let cur = gap(table, dec, z);
        if cur != 0.0 && prev != 0.0 && cur.signum() != prev.signum() {
            roots.push(bisect(|t| gap(table, dec, t), z_prev, z, 1e-14)?);
        } else if cur == 0.0 && k < scan {
            roots.push(z);
        }
        if cur != 0.0 {
            prev = cur;
        }
        z_prev = z;
    }
    let mut bounds = vec![0.0];
    bounds.extend(&roots);
    bounds.push(1.0);
    let regions: Vec<f64> = bounds
        .windows(2)
        .map(|w| table.f0_integral(w[0], w[1]) - dec.inverse_integral(w[0], w[1]))
        .collect();
    let mut crossings: Vec<Crossing> = roots
        .iter()
        .map(|&z| {
            let h = 1e-7;
            let slope = gap(table, dec, (z + h).min(1.0)) - gap(table, dec, (z - h).max(0.0));
            Crossing { z, u: table.f0(z).0, stable: slope < 0.0 }
        })
        .collect();
    let top = table.f0(1.0).0;
    if top >= dec.i_jump {
        crossings.push(Crossing { z: 1.0, u: top, stable: true });
    }
    let (s_b, s_m, s_t, degenerate) = match regions.len() {
        1 => (regions[0].max(0.0), 0.0, 0.0, None),
        3 => (regions[0].max(0.0), (-regions[1]).max(0.0), regions[2].max(0.0), None),
        n => {
            let sb = regions[0].max(0.0);
            let (st, middle) = if n >= 3 { (regions[n - 1].max(0.0), &regions[1..n - 1]) } else { (0.0, &regions[1..]) };
            let sm: f64 = middle.iter().map(|r| r.abs()).sum();
            (sb, sm, st, Some(format!("{n} regions between the curves")))
        }
    };
    let i_grid: Vec<f64> = (0..=n_grid).map(|k| k as f64 / n_grid as f64).collect();
    let demod_u: Vec<f64> = i_grid.iter().map(|&i| table.f0(i).0).collect();
    let decoder_z: Vec<f64> = i_grid.iter().map(|&i| dec.g(i)).collect();
    let composite = decoder_z.iter().map(|&z| table.f0(z).0).collect();
    Ok(ExitChart {
        snr_db: table.snr_db,
        q: table.q,
        rate: dec.ensemble.rate(),
        i_grid,
        demod_u,
        decoder_z,
        composite,
        crossings,
        regions,
        s_t,
        s_m,
        s_b,
        degenerate,
        capacity: table.capacity,
    })
}

impl ExitChart {
    pub fn stable_crossings(&self) -> usize {
        self.crossings.iter().filter(|c| c.stable).count()
    }

    /// Whether the demapper curve stays above the decoder curve below
    /// the top fixed point.
    pub fn tunnel_open(&self) -> bool {
        self.regions.len() == 1 && self.regions[0] > 0.0
    }

    /// CSV rows "I,demod_u,decoder_z" without a header comment.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("I,demod_u,decoder_z\n");
        for ((i, u), z) in self.i_grid.iter().zip(&self.demod_u).zip(&self.decoder_z) {
            let _ = writeln!(s, "{i:.6},{u:.12},{z:.12}");
        }
        s
    }
}

/// C_CM − Qr = QS_b + Q(S_t − S_m), with every term reported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateLoss {
    pub c_cm: f64,
    pub qr: f64,
    pub q_sb: f64,
    pub q_st_minus_sm: f64,
    pub residual: f64,
}

pub fn rate_loss(chart: &ExitChart, r: f64) -> RateLoss {
    let q = chart.q as f64;
    let c_cm = chart.capacity;
    let qr = q * r;
    let q_sb = q * chart.s_b;
    let q_st_minus_sm = q * (chart.s_t - chart.s_m);
    RateLoss { c_cm, qr, q_sb, q_st_minus_sm, residual: c_cm - qr - q_sb - q_st_minus_sm }
}
