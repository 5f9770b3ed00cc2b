//! Coded modulation with iterative demapping: demapper and decoder EXIT
//! functions, EXIT charts, rate loss and SNR thresholds.

mod chart;
mod constellation;
mod decoder;
mod demod;

use std::fmt;
use std::sync::Arc;

pub use chart::{build_exit_chart, rate_loss, Crossing, ExitChart, RateLoss};
pub use constellation::{bit, Constellation, Preset};
pub use decoder::{decoder_map_exit, smooth_g, EbpPoint, MapDecoder, RegularEnsemble, SmoothDecoder};
pub use demod::{cm_capacity, demod_exit, monte_carlo_mask_log, BicmModel, DemodTable, Integration};

use crate::error::{Error, Result};
use crate::numeric::{bisect, bisect_predicate};
use crate::potential::{unique_min_predicate, ThresholdOptions};
use crate::system::{maps::Identity, Interval, Jet, MultiMap, SystemFunctions};

/// Decoder curve used inside φ.
#[derive(Clone, Debug)]
pub enum DecoderCurve {
    Map(MapDecoder),
    Smooth(SmoothDecoder),
}

impl DecoderCurve {
    pub fn new(ensemble: RegularEnsemble, smoothing: Option<f64>) -> Result<Self> {
        let map = MapDecoder::new(ensemble)?;
        Ok(match smoothing {
            Some(n) => DecoderCurve::Smooth(SmoothDecoder::new(map, n)?),
            None => DecoderCurve::Map(map),
        })
    }

    /// Value, slope and curvature. The unsmoothed curve reports its
    /// one-sided branch derivatives and zero curvature.
    pub fn jet(&self, i: f64) -> (f64, f64, f64) {
        match self {
            DecoderCurve::Map(d) => (d.g(i), d.g_d1(i), 0.0),
            DecoderCurve::Smooth(s) => s.jet(i),
        }
    }

    pub fn value(&self, i: f64) -> f64 {
        match self {
            DecoderCurve::Map(d) => d.g(i),
            DecoderCurve::Smooth(s) => s.value(i),
        }
    }

    pub fn map(&self) -> &MapDecoder {
        match self {
            DecoderCurve::Map(d) => d,
            DecoderCurve::Smooth(s) => &s.decoder,
        }
    }

    pub fn smoothing(&self) -> Option<f64> {
        match self {
            DecoderCurve::Map(_) => None,
            DecoderCurve::Smooth(s) => Some(s.n),
        }
    }
}

/// φ(v₁, …, v_{Q−1}) = f(g(v₁), …, g(v_{Q−1})).
pub struct BicmPhi {
    pub table: Arc<DemodTable>,
    pub decoder: DecoderCurve,
}

impl fmt::Debug for BicmPhi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BicmPhi").field("q", &self.table.q).field("snr_db", &self.table.snr_db).finish()
    }
}

impl MultiMap for BicmPhi {
    fn arity(&self) -> usize {
        self.table.q - 1
    }

    fn eval(&self, args: &[f64]) -> f64 {
        let g: Vec<f64> = args.iter().map(|&v| self.decoder.value(v.clamp(0.0, 1.0))).collect();
        self.table.exit_unchecked(&g)
    }

    fn diagonal_jet(&self, x: f64) -> Option<Jet> {
        let (g, g1, g2) = self.decoder.jet(x.clamp(0.0, 1.0));
        let (f, f1, f2) = self.table.f0(g);
        Some(Jet { value: f, d1: f1 * g1, d2: f2 * g1 * g1 + f1 * g2, laplacian: f1 * g2 })
    }

    /// f is affine in each argument and the arguments are independent, so
    /// the mean is f at the mean decoder outputs.
    fn tuple_mean(&self, values: &[f64], weights: &[f64]) -> Option<f64> {
        let mut m = 0.0;
        for (v, w) in values.iter().zip(weights) {
            m += w * self.decoder.value(v.clamp(0.0, 1.0));
        }
        Some(self.table.exit_unchecked(&vec![m; self.arity()]))
    }
}

/// The (φ, ψ) pair of the coupled system: φ as above, ψ the identity.
pub fn bicm_system(model: &BicmModel, ensemble: RegularEnsemble, smoothing: Option<f64>) -> Result<SystemFunctions> {
    let table = Arc::new(DemodTable::new(model)?);
    bicm_system_with(table, DecoderCurve::new(ensemble, smoothing)?, &model.constellation.name)
}

/// As [`bicm_system`] with a precomputed demapper table and decoder curve.
pub fn bicm_system_with(table: Arc<DemodTable>, decoder: DecoderCurve, label: &str) -> Result<SystemFunctions> {
    let snr = table.snr_db;
    let e = decoder.map().ensemble;
    let smoothing = decoder.smoothing();
    let phi = BicmPhi { table, decoder };
    let mut s = SystemFunctions::new(Arc::new(phi), Arc::new(Identity), Interval::UNIT, Interval::UNIT)?
        .named(format!("bicm({label},{snr}dB,({},{}))", e.l, e.r));
    s.smoothing = smoothing;
    Ok(s)
}

#[derive(Clone, Copy, Debug)]
pub struct SnrSearch {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    /// Smoothing parameter of the decoder curve for the potential.
    pub smoothing: f64,
    pub potential: ThresholdOptions,
}

impl Default for SnrSearch {
    fn default() -> Self {
        SnrSearch { lo: 4.5, hi: 6.5, tol: 1e-4, smoothing: 1000.0, potential: ThresholdOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SnrThresholds {
    pub mapping: String,
    pub capacity: f64,
    pub area: f64,
    pub potential: f64,
    pub ordered: bool,
}

impl SnrThresholds {
    pub fn report(&self) -> String {
        format!(
            "mapping: {}\nsnr_capacity_db: {:.4}\nsnr_area_db: {:.4}\nsnr_potential_db: {:.4}\nordered: {}\n",
            self.mapping, self.capacity, self.area, self.potential, self.ordered
        )
    }
}

/// SNR where C_CM = Qr.
pub fn capacity_threshold(model: &BicmModel, rate: f64, search: &SnrSearch) -> Result<f64> {
    let target = model.q() as f64 * rate;
    let mut failure = None;
    let out = bisect(
        |s| match cm_capacity(&model.at_snr(s)) {
            Ok(c) => c - target,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        search.lo,
        search.hi,
        search.tol,
    );
    match failure {
        Some(e) => Err(e),
        None => out,
    }
}

/// SNR where the chart first satisfies S_t ≥ S_m or opens the tunnel.
pub fn area_threshold(model: &BicmModel, ensemble: RegularEnsemble, search: &SnrSearch) -> Result<f64> {
    let dec = MapDecoder::new(ensemble)?;
    bisect_predicate(
        |s| {
            let t = DemodTable::new(&model.at_snr(s))?;
            let c = build_exit_chart(&t, &dec, 16)?;
            Ok(c.tunnel_open() || c.s_t >= c.s_m)
        },
        search.lo,
        search.hi,
        search.tol,
    )
}

/// SNR where u_opt becomes the unique global minimizer of the potential
/// of the smoothed system. Below the SNR where f₀(1) clears the decoder
/// jump there is no fixed point at (1, f₀(1)), and the predicate is false.
pub fn potential_snr_threshold(model: &BicmModel, ensemble: RegularEnsemble, search: &SnrSearch) -> Result<f64> {
    let curve = DecoderCurve::new(ensemble, Some(search.smoothing))?;
    let i_jump = curve.map().i_jump;
    bisect_predicate(
        |s| {
            let table = Arc::new(DemodTable::new(&model.at_snr(s))?);
            if table.f0(1.0).0 <= i_jump {
                return Ok(false);
            }
            let sys = bicm_system_with(table, curve.clone(), &model.constellation.name)?;
            unique_min_predicate(&sys, &search.potential)
        },
        search.lo,
        search.hi,
        search.tol,
    )
}

/// All three thresholds, computed in parallel.
pub fn snr_thresholds(model: &BicmModel, ensemble: RegularEnsemble, search: &SnrSearch) -> Result<SnrThresholds> {
    if !(search.lo < search.hi) {
        return Err(Error::Parameter(format!("empty SNR bracket [{}, {}]", search.lo, search.hi)));
    }
    let (cap, (area, pot)) = rayon::join(
        || capacity_threshold(model, ensemble.rate(), search),
        || rayon::join(|| area_threshold(model, ensemble, search), || potential_snr_threshold(model, ensemble, search)),
    );
    let (capacity, area, potential) = (cap?, area?, pot?);
    Ok(SnrThresholds {
        mapping: model.constellation.name.clone(),
        capacity,
        area,
        potential,
        ordered: capacity <= area && area <= potential,
    })
}
