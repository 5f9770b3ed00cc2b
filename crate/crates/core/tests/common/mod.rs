//! Random system generators shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scsat::system::{FnMap, Interval, Jet, SystemFunctions};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Smooth strictly increasing map of [0,1] into [lo, lo+span]: a blend of a
/// line and a logistic step, with closed-form derivatives.
#[derive(Clone, Copy, Debug)]
pub struct Logistic1 {
    pub lo: f64,
    pub span: f64,
    pub w: f64,
    pub k: f64,
    pub m: f64,
}

impl Logistic1 {
    pub fn random<R: Rng>(r: &mut R) -> Self {
        let lo = r.random_range(0.0..0.2);
        Logistic1 {
            lo,
            span: r.random_range(0.5..(1.0 - lo)),
            w: r.random_range(0.1..0.9),
            k: r.random_range(2.0..12.0),
            m: r.random_range(0.2..0.8),
        }
    }

    fn norm(&self) -> (f64, f64) {
        let s0 = sigmoid(-self.k * self.m);
        let s1 = sigmoid(self.k * (1.0 - self.m));
        (s0, s1 - s0)
    }

    pub fn jet(&self, x: f64) -> Jet {
        let (s0, den) = self.norm();
        let s = sigmoid(self.k * (x - self.m));
        let ds = self.k * s * (1.0 - s);
        let d2s = self.k * ds * (1.0 - 2.0 * s);
        let value = self.lo + self.span * (self.w * x + (1.0 - self.w) * (s - s0) / den);
        let d1 = self.span * (self.w + (1.0 - self.w) * ds / den);
        let d2 = self.span * (1.0 - self.w) * d2s / den;
        Jet { value, d1, d2, laplacian: d2 }
    }

    pub fn map(self) -> FnMap {
        FnMap::new(1, move |a| self.jet(a[0]).value).with_jet(move |x| self.jet(x))
    }
}

/// Random smooth d = d̃ = 1 system on the unit square.
pub fn random_scalar_system<R: Rng>(r: &mut R) -> (SystemFunctions, Logistic1, Logistic1) {
    let phi = Logistic1::random(r);
    let psi = Logistic1::random(r);
    let s = SystemFunctions::new(Arc::new(phi.map()), Arc::new(psi.map()), Interval::UNIT, Interval::UNIT)
        .unwrap()
        .named("random-1d");
    (s, phi, psi)
}

/// Random nondecreasing map of `arity` arguments on [0,1] into [lo, lo+span]:
/// a mixture of per-coordinate logistic steps and the coordinate product.
pub fn random_monotone_map<R: Rng>(r: &mut R, arity: usize) -> FnMap {
    let lo = r.random_range(0.0..0.3);
    let span = r.random_range(0.3..(1.0 - lo));
    let mix = r.random_range(0.0..1.0);
    let parts: Vec<Logistic1> = (0..arity)
        .map(|_| Logistic1 { lo: 0.0, span: 1.0, w: r.random_range(0.0..1.0), k: r.random_range(1.0..20.0), m: r.random_range(0.0..1.0) })
        .collect();
    FnMap::new(arity, move |a| {
        let mut s = 0.0;
        let mut p = 1.0;
        for (x, f) in a.iter().zip(&parts) {
            s += f.jet(*x).value;
            p *= x;
        }
        lo + span * (mix * s / a.len() as f64 + (1.0 - mix) * p)
    })
}

pub fn random_monotone_system<R: Rng>(r: &mut R) -> SystemFunctions {
    let d = r.random_range(1..=3);
    let dt = r.random_range(1..=3);
    SystemFunctions::new(
        Arc::new(random_monotone_map(r, d)),
        Arc::new(random_monotone_map(r, dt)),
        Interval::UNIT,
        Interval::UNIT,
    )
    .unwrap()
    .named("random-monotone")
}
