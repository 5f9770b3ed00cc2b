//! Coupled density evolution, the uncoupled recursion and fixed points of
//! u = φ₀(ψ₀(u)).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{bisect, kronecker, pairwise_sum};
use crate::system::{MultiMap, SystemFunctions, Which};

/// How indices outside the chain are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// v reads v_opt outside {W−1, …, L−1}; u indices never wrap.
    Pinned,
    /// Experimental: offsets wrap modulo L, sections 0..W−2 of v stay
    /// pinned at v_opt.
    Circular,
}

/// How window averages over W^d offset tuples are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumMode {
    /// Closed form for multilinear maps, enumeration within budget,
    /// quasi-random subsample beyond.
    Auto,
    /// Enumerate every tuple when W^d fits the budget, otherwise subsample.
    Exhaustive,
    /// Always use the quasi-random subsample.
    Subsample,
}

#[derive(Clone, Copy, Debug)]
pub struct DeOptions {
    pub max_iter: usize,
    pub stall_tol: f64,
    pub boundary: Boundary,
    pub sum_mode: SumMode,
    /// Largest W^d enumerated exactly.
    pub tuple_budget: u64,
    /// Tuples drawn when the budget is exceeded.
    pub subsample: usize,
    pub seed: u64,
    /// Record every `k`-th iterate (0 disables the trajectory).
    pub trajectory_stride: usize,
}

impl Default for DeOptions {
    fn default() -> Self {
        DeOptions {
            max_iter: 100_000,
            stall_tol: 1e-9,
            boundary: Boundary::Pinned,
            sum_mode: SumMode::Auto,
            tuple_budget: 1_000_000,
            subsample: 100_000,
            seed: 0,
            trajectory_stride: 0,
        }
    }
}

/// State of a coupled chain. `u` holds u_l(i); `v` holds the v_l(i−1)
/// used to produce it, for l ∈ {W−1, …, L−1} (stored at index l − W + 1).
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub sections: usize,
    pub w: usize,
    pub iteration: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub v_opt: f64,
    pub boundary: Boundary,
}

impl ChainState {
    /// u_l(0) = u_min everywhere; v initialised to ψ₀(u_min).
    pub fn initial(funcs: &SystemFunctions, sections: usize, w: usize, v_opt: f64, boundary: Boundary) -> Result<Self> {
        if w == 0 || sections == 0 || w > sections {
            return Err(Error::Parameter(format!("need 1 <= W <= L, got L={sections}, W={w}")));
        }
        let u0 = funcs.u_domain.lo;
        let v0 = funcs.diagonal_reduce(Which::Psi, u0)?;
        Ok(ChainState {
            sections,
            w,
            iteration: 0,
            u: vec![u0; sections],
            v: vec![v0; sections - w + 1],
            v_opt,
            boundary,
        })
    }

    /// v_l, reading v_opt outside the active set.
    pub fn v_at(&self, l: isize) -> f64 {
        let l = match self.boundary {
            Boundary::Pinned => l,
            Boundary::Circular => l.rem_euclid(self.sections as isize),
        };
        let first = self.w as isize - 1;
        if l < first || l >= self.sections as isize {
            self.v_opt
        } else {
            self.v[(l - first) as usize]
        }
    }

    /// v over all L sections with v_opt filled in.
    pub fn v_full(&self) -> Vec<f64> {
        (0..self.sections as isize).map(|l| self.v_at(l)).collect()
    }

    fn u_at(&self, l: isize) -> Option<f64> {
        match self.boundary {
            Boundary::Pinned => (l >= 0 && (l as usize) < self.sections).then(|| self.u[l as usize]),
            Boundary::Circular => Some(self.u[l.rem_euclid(self.sections as isize) as usize]),
        }
    }

    pub fn min_u(&self) -> f64 {
        self.u.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Mean of `map` over all tuples of `candidates` (uniformly weighted).
fn window_mean(map: &dyn MultiMap, candidates: &[f64], opts: &DeOptions, salt: u64) -> f64 {
    let w = candidates.len();
    let d = map.arity();
    if opts.sum_mode == SumMode::Auto {
        let weights = vec![1.0 / w as f64; w];
        if let Some(m) = map.tuple_mean(candidates, &weights) {
            return m;
        }
    }
    let total = (w as u64).checked_pow(d as u32);
    let fits = matches!(total, Some(t) if t <= opts.tuple_budget);
    if fits && opts.sum_mode != SumMode::Subsample {
        enumerate_mean(map, candidates)
    } else {
        subsample_mean(map, candidates, opts.subsample, opts.seed ^ salt)
    }
}

fn enumerate_mean(map: &dyn MultiMap, candidates: &[f64]) -> f64 {
    let w = candidates.len();
    let d = map.arity();
    let mut idx = vec![0usize; d];
    let mut args = vec![candidates[0]; d];
    let mut block = Vec::with_capacity(1024);
    let mut blocks = Vec::new();
    let mut count: u64 = 0;
    loop {
        block.push(map.eval(&args));
        count += 1;
        if block.len() == 1024 {
            blocks.push(pairwise_sum(&block));
            block.clear();
        }
        let mut j = 0;
        loop {
            if j == d {
                if !block.is_empty() {
                    blocks.push(pairwise_sum(&block));
                }
                return pairwise_sum(&blocks) / count as f64;
            }
            idx[j] += 1;
            if idx[j] < w {
                args[j] = candidates[idx[j]];
                break;
            }
            idx[j] = 0;
            args[j] = candidates[0];
            j += 1;
        }
    }
}

fn subsample_mean(map: &dyn MultiMap, candidates: &[f64], n: usize, seed: u64) -> f64 {
    let w = candidates.len();
    let d = map.arity();
    let mut args = vec![0.0; d];
    let vals: Vec<f64> = (0..n as u64)
        .map(|s| {
            for (j, a) in args.iter_mut().enumerate() {
                let k = ((kronecker(s, j, seed) * w as f64) as usize).min(w - 1);
                *a = candidates[k];
            }
            map.eval(&args)
        })
        .collect();
    pairwise_sum(&vals) / n as f64
}

/// One iteration of the coupled recursion: v_l(i) from u(i), then u(i+1).
pub fn de_step(state: &ChainState, funcs: &SystemFunctions, opts: &DeOptions) -> Result<ChainState> {
    let w = state.w;
    let first = w - 1;
    let psi = funcs.psi.as_ref();
    let phi = funcs.phi.as_ref();
    let u0 = funcs.u_domain.lo;

    let v: Vec<f64> = (first..state.sections)
        .into_par_iter()
        .map(|l| {
            let cand: Vec<f64> = (0..w)
                .map(|k| state.u_at(l as isize - k as isize).unwrap_or(u0))
                .collect();
            window_mean(psi, &cand, opts, l as u64)
        })
        .collect();
    let mid = ChainState { v, ..state.clone() };

    let u: Vec<f64> = (0..state.sections)
        .into_par_iter()
        .map(|l| {
            let cand: Vec<f64> = (0..w).map(|k| mid.v_at((l + k) as isize)).collect();
            window_mean(phi, &cand, opts, (l as u64) << 32)
        })
        .collect();
    Ok(ChainState { u, iteration: state.iteration + 1, ..mid })
}

/// A recorded iterate.
#[derive(Clone, Debug)]
pub struct Frame {
    pub iteration: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DeRun {
    pub state: ChainState,
    /// min_l u_l(i) for i = 0, 1, …
    pub min_history: Vec<f64>,
    pub converged: bool,
    pub trajectory: Vec<Frame>,
}

/// Iterates from u_l(0) = u_min with v_opt taken from the fixed-point scan.
pub fn de_run(funcs: &SystemFunctions, sections: usize, w: usize, opts: &DeOptions) -> Result<DeRun> {
    let report = find_fixed_points(funcs, 4096, 1e-12)?;
    de_run_with(funcs, sections, w, report.v_opt, opts)
}

/// Iterates from u_l(0) = u_min with an explicit boundary value.
pub fn de_run_with(funcs: &SystemFunctions, sections: usize, w: usize, v_opt: f64, opts: &DeOptions) -> Result<DeRun> {
    let mut state = ChainState::initial(funcs, sections, w, v_opt, opts.boundary)?;
    let mut min_history = vec![state.min_u()];
    let mut trajectory = Vec::new();
    let record = |s: &ChainState, t: &mut Vec<Frame>| {
        if opts.trajectory_stride > 0 && s.iteration % opts.trajectory_stride == 0 {
            t.push(Frame { iteration: s.iteration, u: s.u.clone(), v: s.v_full() });
        }
    };
    record(&state, &mut trajectory);
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let next = de_step(&state, funcs, opts)?;
        let change = next
            .u
            .iter()
            .zip(&state.u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        state = next;
        min_history.push(state.min_u());
        record(&state, &mut trajectory);
        if change < opts.stall_tol {
            converged = true;
            break;
        }
    }
    if opts.trajectory_stride > 0 && trajectory.last().map(|f| f.iteration) != Some(state.iteration) {
        trajectory.push(Frame { iteration: state.iteration, u: state.u.clone(), v: state.v_full() });
    }
    Ok(DeRun { state, min_history, converged, trajectory })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    pub u: f64,
    pub stability: Stability,
}

#[derive(Clone, Debug)]
pub struct FixedPointReport {
    pub u_opt: f64,
    pub v_opt: f64,
    pub u_bp: f64,
    pub v_bp: f64,
    pub points: Vec<FixedPoint>,
    /// Whether the uncoupled recursion from u_min settled within budget.
    pub converged: bool,
    pub iterations: usize,
    /// Every scanned point is a fixed point.
    pub degenerate: bool,
}

impl FixedPointReport {
    pub fn stable(&self) -> impl Iterator<Item = &FixedPoint> {
        self.points.iter().filter(|p| p.stability == Stability::Stable)
    }
}

const MARGINAL_SLOPE: f64 = 1e-9;

/// Roots of h(u) = u − φ₀(ψ₀(u)) located by a scan of `n_scan` points and
/// bisection to `fp_tol`, classified by the sign of h′.
pub fn find_fixed_points(funcs: &SystemFunctions, n_scan: usize, fp_tol: f64) -> Result<FixedPointReport> {
    if n_scan < 32 {
        return Err(Error::Parameter(format!("n_scan must be at least 32, got {n_scan}")));
    }
    let dom = funcs.u_domain;
    let comp = |u: f64| -> f64 {
        let u = dom.clamp(u);
        let v = funcs.v_domain.clamp(funcs.diagonal_reduce(Which::Psi, u).unwrap_or(f64::NAN));
        funcs.diagonal_reduce(Which::Phi, v).unwrap_or(f64::NAN)
    };
    let h = |u: f64| u - comp(u);
    let grid = crate::numeric::Uniform::new(dom.lo, dom.hi, n_scan).nodes();
    let hs: Vec<f64> = grid.iter().map(|&u| h(u)).collect();
    if hs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite value of u - phi0(psi0(u))".into()));
    }
    let slope = |u: f64| -> Result<f64> { Ok(1.0 - funcs.point(u)?.composite_d1()) };
    let classify = |u: f64| -> Result<Stability> {
        let s = slope(u)?;
        Ok(if s.abs() <= MARGINAL_SLOPE {
            Stability::Marginal
        } else if s > 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        })
    };

    let degenerate = hs.iter().all(|x| x.abs() <= fp_tol);
    let mut roots: Vec<f64> = Vec::new();
    if degenerate {
        roots = grid.clone();
    } else {
        for k in 0..n_scan {
            if hs[k].abs() <= fp_tol {
                roots.push(grid[k]);
            } else if k + 1 < n_scan && hs[k + 1].abs() > fp_tol && hs[k].signum() != hs[k + 1].signum() {
                roots.push(bisect(h, grid[k], grid[k + 1], fp_tol)?);
            }
        }
    }
    // Merge roots closer than the scan spacing resolves (touching nodes).
    roots.dedup_by(|a, b| (*a - *b).abs() <= fp_tol);
    if roots.is_empty() {
        return Err(Error::Numeric("no fixed point of u = phi0(psi0(u)) found".into()));
    }
    let mut points = Vec::with_capacity(roots.len());
    for &u in &roots {
        let stability = if degenerate { Stability::Marginal } else { classify(u)? };
        points.push(FixedPoint { u, stability });
    }

    let u_opt = if degenerate { dom.hi } else { *roots.last().unwrap() };
    let v_opt = funcs.diagonal_reduce(Which::Psi, u_opt)?;

    // Uncoupled recursion from u_min; it increases monotonically to the
    // smallest fixed point.
    let mut x = dom.lo;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 1_000_000 {
        let next = comp(x);
        iterations += 1;
        let done = (next - x).abs() <= fp_tol * 1e-2;
        x = next;
        if done {
            converged = true;
            break;
        }
    }
    let u_bp = if degenerate { dom.lo } else { roots[0] };
    Ok(FixedPointReport {
        u_opt,
        v_opt,
        u_bp,
        v_bp: funcs.diagonal_reduce(Which::Psi, u_bp)?,
        points,
        converged,
        iterations,
        degenerate,
    })
}

/// True iff min_l u_l ≥ u_opt − δ.
pub fn saturation_check(state: &ChainState, report: &FixedPointReport, delta: f64) -> bool {
    state.min_u() >= report.u_opt - delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{Identity, Interval};
    use std::sync::Arc;

    #[test]
    fn hand_computed_identity_step() {
        let s = SystemFunctions::identity();
        let st = ChainState::initial(&s, 3, 2, 1.0, Boundary::Pinned).unwrap();
        let next = de_step(&st, &s, &DeOptions::default()).unwrap();
        assert_eq!(next.v, vec![0.0, 0.0]);
        assert_eq!(next.u, vec![0.5, 0.0, 0.5]);
        assert_eq!(next.iteration, 1);
    }

    #[test]
    fn boundary_reads_are_exact() {
        let s = SystemFunctions::identity();
        let st = ChainState::initial(&s, 5, 3, 0.75, Boundary::Pinned).unwrap();
        assert_eq!(st.v_at(-1), 0.75);
        assert_eq!(st.v_at(1), 0.75);
        assert_eq!(st.v_at(2), 0.0);
        assert_eq!(st.v_at(5), 0.75);
        assert_eq!(st.v_at(9), 0.75);
    }

    #[test]
    fn w1_is_scalar_recursion() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        let mut st = ChainState::initial(&s, 4, 1, 1.0, Boundary::Pinned).unwrap();
        let mut x = 0.0;
        for _ in 0..50 {
            st = de_step(&st, &s, &DeOptions::default()).unwrap();
            x = s.diagonal_reduce(Which::Phi, s.diagonal_reduce(Which::Psi, x).unwrap()).unwrap();
            for &u in &st.u {
                assert_eq!(u, x);
            }
        }
    }

    #[test]
    fn zero_iterations_returns_initial() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        let opts = DeOptions { max_iter: 0, ..Default::default() };
        let run = de_run(&s, 10, 3, &opts).unwrap();
        assert_eq!(run.state.iteration, 0);
        assert!(run.state.u.iter().all(|&u| u == 0.0));
        assert_eq!(run.min_history.len(), 1);
    }

    #[test]
    fn invalid_width_rejected() {
        let s = SystemFunctions::identity();
        assert!(ChainState::initial(&s, 3, 0, 1.0, Boundary::Pinned).is_err());
        assert!(ChainState::initial(&s, 3, 4, 1.0, Boundary::Pinned).is_err());
    }

    #[test]
    fn closed_form_matches_enumeration() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        let mut st = ChainState::initial(&s, 20, 4, 1.0, Boundary::Pinned).unwrap();
        let auto = DeOptions::default();
        let ex = DeOptions { sum_mode: SumMode::Exhaustive, ..Default::default() };
        for _ in 0..5 {
            let a = de_step(&st, &s, &auto).unwrap();
            let b = de_step(&st, &s, &ex).unwrap();
            for (x, y) in a.u.iter().zip(&b.u) {
                assert!((x - y).abs() < 1e-14);
            }
            st = a;
        }
    }

    #[test]
    fn subsample_close_to_exact() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        let mut st = ChainState::initial(&s, 30, 5, 1.0, Boundary::Pinned).unwrap();
        let ex = DeOptions { sum_mode: SumMode::Exhaustive, ..Default::default() };
        let sub = DeOptions { sum_mode: SumMode::Subsample, subsample: 20_000, ..Default::default() };
        for _ in 0..4 {
            st = de_step(&st, &s, &ex).unwrap();
        }
        let a = de_step(&st, &s, &ex).unwrap();
        let b = de_step(&st, &s, &sub).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((x - y).abs() < 1e-3);
        }
    }

    #[test]
    fn bec_fixed_points() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        let r = find_fixed_points(&s, 1024, 1e-12).unwrap();
        assert_eq!(r.u_opt, 1.0);
        // Damped fixed-point oracle on the erasure probability x.
        let mut x: f64 = 1.0;
        for _ in 0..100_000 {
            let nx = 0.45 * (1.0 - (1.0 - x).powi(5)).powi(2);
            x = 0.5 * x + 0.5 * nx;
        }
        assert!((r.u_bp - (1.0 - x)).abs() < 1e-9, "{} vs {}", r.u_bp, 1.0 - x);
        assert!(r.converged);
        for p in &r.points {
            let h = p.u - s.diagonal_reduce(Which::Phi, s.diagonal_reduce(Which::Psi, p.u).unwrap()).unwrap();
            assert!(h.abs() <= 1e-10);
        }
        assert_eq!(r.stable().count(), 2);
    }

    #[test]
    fn identity_is_degenerate() {
        let r = find_fixed_points(&SystemFunctions::identity(), 64, 1e-10).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.u_opt, 1.0);
        assert!(r.points.iter().all(|p| p.stability == Stability::Marginal));
    }

    #[test]
    fn tangential_root_is_marginal() {
        // c(u) = u - (u - 0.5)^2 u (1 - u): roots at 0 and 1, double root at 0.5.
        let f = Arc::new(crate::system::Polynomial::new(vec![0.0, 1.25, -1.25, 2.0, -1.0]));
        let s = SystemFunctions::new(f, Arc::new(Identity), Interval::UNIT, Interval::UNIT).unwrap();
        let r = find_fixed_points(&s, 65, 1e-12).unwrap();
        assert!(r.points.iter().any(|p| (p.u - 0.5).abs() < 1e-9 && p.stability == Stability::Marginal));
    }

    #[test]
    fn saturation_trivial_cases() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        let r = find_fixed_points(&s, 256, 1e-12).unwrap();
        let mut st = ChainState::initial(&s, 5, 2, r.v_opt, Boundary::Pinned).unwrap();
        st.u = vec![1.0; 5];
        assert!(saturation_check(&st, &r, 1e-4));
        st.u = vec![r.u_bp; 5];
        assert!(!saturation_check(&st, &r, 1e-4));
    }
}
