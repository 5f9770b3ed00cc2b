//! The subcommands. Each one prints a plain-text report on stdout and
//! writes its CSV files into the configured output directory.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use scsat::bicm::{
    bicm_system, build_exit_chart, rate_loss, snr_thresholds, BicmModel, Constellation, DemodTable, Integration,
    MapDecoder, Preset, RegularEnsemble, SnrSearch,
};
use scsat::config::ExperimentConfig;
use scsat::continuum::{
    bvp_solve, continuum_grid, default_init, operator_gap, pde_relax, BvpOptions, Continuum, PdeOptions,
};
use scsat::de::{de_run_with, find_fixed_points, saturation_check, Boundary, DeOptions};
use scsat::interleaver::ScInterleaver;
use scsat::numeric::{OdeTol, Uniform};
use scsat::potential::{
    coordinate_map, potential as potential_profile, potential_equivalence_check, potential_threshold, Extremum,
    PotentialOptions, ThresholdOptions,
};
use scsat::system::{build_profile_table, Interval, SampledCurve, SystemFunctions};
use scsat::{Error, Result};

fn model(cfg: &ExperimentConfig) -> Result<BicmModel> {
    let constellation = match cfg.mapping.parse::<Preset>() {
        Ok(p) => p.constellation(),
        Err(e) if !Path::new(&cfg.mapping).exists() => return Err(e),
        Err(_) => Constellation::load(Path::new(&cfg.mapping))?,
    };
    if cfg.gh_order < 2 {
        return Err(Error::Config(format!("gh_order must be at least 2, got {}", cfg.gh_order)));
    }
    Ok(BicmModel::new(constellation, cfg.snr).with_integration(Integration::GaussHermite(cfg.gh_order)))
}

fn ensemble(cfg: &ExperimentConfig) -> Result<RegularEnsemble> {
    RegularEnsemble::new(cfg.l, cfg.r)
}

fn smoothing(cfg: &ExperimentConfig) -> Option<f64> {
    (cfg.smoothing > 0.0).then_some(cfg.smoothing)
}

fn sampled(path: &str) -> Result<SampledCurve> {
    if path.is_empty() {
        return Err(Error::Config("system = table needs phi_table and psi_table".into()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {path}: {e}")))?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let mut it = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty());
        let parse = |s: Option<&str>| {
            s.and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Config(format!("{path}: expected two numbers per line: '{line}'")))
        };
        xs.push(parse(it.next())?);
        ys.push(parse(it.next())?);
    }
    SampledCurve::new(xs, ys).map_err(|e| Error::Config(format!("{path}: {e}")))
}

fn range(c: &SampledCurve, xs: bool) -> Result<Interval> {
    let (lo, hi) = if xs { c.x_range() } else { c.y_range() };
    Interval::new(lo, hi)
}

/// The (φ, ψ) pair selected by `system`.
fn system(cfg: &ExperimentConfig) -> Result<SystemFunctions> {
    match cfg.system.as_str() {
        "identity" => Ok(SystemFunctions::identity()),
        "bec36" => SystemFunctions::bec_regular(3, 6, cfg.eps),
        "bec" => SystemFunctions::bec_regular(cfg.l, cfg.r, cfg.eps),
        "bicm" => bicm_system(&model(cfg)?, ensemble(cfg)?, smoothing(cfg)),
        "table" => {
            let phi = sampled(&cfg.phi_table)?;
            let psi = sampled(&cfg.psi_table)?;
            let (u_domain, v_domain) = (range(&psi, true)?, range(&phi, true)?);
            if !u_domain.contains(range(&phi, false)?.lo, 1e-9) || !u_domain.contains(range(&phi, false)?.hi, 1e-9) {
                return Err(Error::Config("phi_table values leave the psi_table domain".into()));
            }
            Ok(SystemFunctions::new(Arc::new(phi), Arc::new(psi), u_domain, v_domain)?.named("table"))
        }
        other => Err(Error::Config(format!("unknown system '{other}' (identity, bec36, bec, bicm, table)"))),
    }
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.out);
    fs::create_dir_all(&dir)?;
    Ok(dir.join(name))
}

/// Writes `body` after the provenance comment and returns the path.
fn write_csv(cfg: &ExperimentConfig, name: &str, body: &str) -> Result<PathBuf> {
    let path = out_path(cfg, name)?;
    fs::write(&path, format!("{}{body}", cfg.csv_header()))?;
    Ok(path)
}

pub fn de(cfg: &ExperimentConfig) -> Result<()> {
    let sys = system(cfg)?;
    let fp = find_fixed_points(&sys, 4096, cfg.fp_tol)?;
    let opts = DeOptions {
        max_iter: cfg.max_iter,
        stall_tol: cfg.stall_tol,
        boundary: if cfg.boundary == "circular" { Boundary::Circular } else { Boundary::Pinned },
        seed: cfg.seed,
        trajectory_stride: cfg.stride.max(1),
        ..DeOptions::default()
    };
    let run = de_run_with(&sys, cfg.sections, cfg.w, fp.v_opt, &opts)?;
    let min_u = run.state.min_u();
    let verdict = if saturation_check(&run.state, &fp, cfg.delta) {
        "saturated".to_string()
    } else if (min_u - fp.u_bp).abs() <= cfg.delta {
        "stalled at u_BP".to_string()
    } else {
        format!("not saturated (min u = {min_u:.6})")
    };

    let mut csv = String::from("iteration,section,u,v\n");
    for f in &run.trajectory {
        for (l, (u, v)) in f.u.iter().zip(&f.v).enumerate() {
            let _ = writeln!(csv, "{},{l},{u:.15e},{v:.15e}", f.iteration);
        }
    }
    let path = write_csv(cfg, "de_trajectory.csv", &csv)?;

    println!("system: {}", sys.name);
    println!("L: {}  W: {}", cfg.sections, cfg.w);
    println!("u_opt: {:.12}  u_BP: {:.12}", fp.u_opt, fp.u_bp);
    println!("iterations: {}  converged: {}", run.state.iteration, run.converged);
    println!("min u: {min_u:.12}");
    println!("trajectory: {}", path.display());
    println!("verdict: {verdict}");
    Ok(())
}

pub fn potential(cfg: &ExperimentConfig) -> Result<()> {
    let sys = system(cfg)?;
    let table = build_profile_table(&sys, cfg.n_grid)?;
    let p = potential_profile(&table, &PotentialOptions::default())?;
    let map = coordinate_map(&table, OdeTol::default()).ok();

    let mut csv = String::from("u,V,exponent,integrand,flagged");
    csv.push_str(if map.is_some() { ",f,V_tilde\n" } else { "\n" });
    for k in 0..p.grid.len() {
        let _ = write!(csv, "{:.12},{:.15e},{:.15e},{:.15e},{}", p.grid[k], p.v[k], p.exponent[k], p.integrand[k], p.flagged[k] as u8);
        if let Some(m) = &map {
            let _ = write!(csv, ",{:.15e},{:.15e}", m.f[k], m.v_tilde[k]);
        }
        csv.push('\n');
    }
    let path = write_csv(cfg, "potential.csv", &csv)?;

    println!("system: {}", sys.name);
    if let Some(n) = p.smoothing {
        println!("smoothing: {n}");
    }
    println!("u_opt: {:.12}", p.u_opt);
    if p.stationary.iter().all(|s| s.kind == Extremum::Marginal) && p.v.iter().all(|v| *v == 0.0) {
        println!("verdict: all points marginal; V ≡ 0");
    } else {
        let minima: Vec<_> = p.minima().collect();
        println!("minima: {}", minima.len());
        for m in &minima {
            println!("  u = {:.12}  V = {:.12e}{}", m.u, m.value, if m.boundary { "  (domain end)" } else { "" });
        }
        match map.as_ref().map(|m| potential_equivalence_check(&p, m)) {
            Some(Ok(eq)) => println!("coordinate equivalence: max deviation {:.3e} (relative {:.3e})", eq.absolute, eq.relative),
            Some(Err(e)) => println!("coordinate equivalence: not available ({e})"),
            None => println!("coordinate equivalence: not available"),
        }
        if p.u_opt_unique_min() {
            println!("verdict: unique global minimizer at u_opt");
        } else {
            let at = p.global_min_u.map_or("none".into(), |u| format!("{u:.12}"));
            println!("verdict: u_opt is not the unique global minimizer (lowest minimum at {at}, gap {:.3e})", p.gap);
        }
    }
    println!("potential: {}", path.display());
    Ok(())
}

fn search(cfg: &ExperimentConfig) -> SnrSearch {
    SnrSearch {
        lo: cfg.snr_lo,
        hi: cfg.snr_hi,
        tol: cfg.snr_tol,
        smoothing: if cfg.smoothing > 0.0 { cfg.smoothing } else { SnrSearch::default().smoothing },
        potential: ThresholdOptions { n_grid: cfg.n_grid, ..ThresholdOptions::default() },
    }
}

pub fn exit_chart(cfg: &ExperimentConfig) -> Result<()> {
    let m = model(cfg)?;
    let ens = ensemble(cfg)?;
    let table = DemodTable::new(&m)?;
    let chart = build_exit_chart(&table, &MapDecoder::new(ens)?, cfg.chart_grid)?;
    let loss = rate_loss(&chart, ens.rate());
    let path = write_csv(cfg, "exit_chart.csv", &chart.to_csv())?;

    println!("mapping: {}", m.constellation.name);
    println!("snr_db: {}  ensemble: ({}, {})", cfg.snr, ens.l, ens.r);
    println!("crossings (z, u):");
    for c in &chart.crossings {
        println!("  ({:.9}, {:.9})  {}", c.z, c.u, if c.stable { "stable" } else { "unstable" });
    }
    println!("stable crossings: {}", chart.stable_crossings());
    println!("tunnel open: {}", chart.tunnel_open());
    println!("S_t: {:.9e}  S_m: {:.9e}  S_b: {:.9e}", chart.s_t, chart.s_m, chart.s_b);
    if let Some(d) = &chart.degenerate {
        println!("note: {d}");
    }
    println!("C_CM: {:.9}  Qr: {:.9}", loss.c_cm, loss.qr);
    println!("Q*S_b: {:.9e}  Q*(S_t-S_m): {:.9e}", loss.q_sb, loss.q_st_minus_sm);
    println!("rate-loss residual: {:.3e}", loss.residual);
    println!("chart: {}", path.display());
    if cfg.thresholds {
        print!("{}", snr_thresholds(&m, ens, &search(cfg))?.report());
    }
    Ok(())
}

pub fn thresholds(cfg: &ExperimentConfig) -> Result<()> {
    match cfg.system.as_str() {
        "bicm" => {
            let s = search(cfg);
            print!("{}", snr_thresholds(&model(cfg)?, ensemble(cfg)?, &s)?.report());
            println!("smoothing: {}", s.smoothing);
        }
        "bec36" | "bec" => {
            let (l, r) = if cfg.system == "bec36" { (3, 6) } else { (cfg.l, cfg.r) };
            let ens = RegularEnsemble::new(l, r)?;
            let (bp, _) = ens.bp_threshold();
            let (map, _) = ens.map_threshold()?;
            let opts = ThresholdOptions { n_grid: cfg.n_grid, theta_tol: cfg.eps_tol, ..ThresholdOptions::default() };
            let pot = potential_threshold(|e| SystemFunctions::bec_regular(l, r, e), cfg.eps_lo, cfg.eps_hi, &opts)?;
            println!("ensemble: ({l}, {r})");
            println!("eps_bp: {bp:.10}");
            println!("eps_map: {map:.10}");
            println!("eps_potential: {pot:.8}");
        }
        other => return Err(Error::Config(format!("thresholds needs system bec36, bec or bicm, got '{other}'"))),
    }
    Ok(())
}

pub fn continuum(cfg: &ExperimentConfig) -> Result<()> {
    let sys = Continuum::new(&system(cfg)?, cfg.n_grid)?;
    println!("system: {}", sys.funcs.name);
    println!("u_opt: {:.12}", sys.u_opt());
    let all = cfg.task == "all";
    if all || cfg.task == "gap" {
        let alphas = cfg.alpha_list()?;
        let profile = |x: f64| 0.5 + 0.3 * (PI * x).cos();
        let r = operator_gap(&profile, &sys, &alphas)?;
        let mut csv = String::from("alpha,bulk,total\n");
        for k in 0..alphas.len() {
            let _ = writeln!(csv, "{},{:.12e},{:.12e}", r.alphas[k], r.bulk[k], r.total[k]);
        }
        let path = write_csv(cfg, "continuum_gap.csv", &csv)?;
        println!("gap bulk slope: {:.4}", r.bulk_slope);
        println!("gap: {}", path.display());
    }
    if all || cfg.task == "profile" {
        let g = continuum_grid(cfg.alpha)?;
        let init = default_init(&sys, g, cfg.alpha, cfg.sections, &DeOptions::default())?;
        let pde = pde_relax(&sys, &init, &PdeOptions { tol: cfg.pde_tol, ..PdeOptions::default() })?;
        let map = coordinate_map(&sys.table, OdeTol::default())?;
        let bvp = bvp_solve(&sys, &map, &pde.profile, &BvpOptions { tol: cfg.bvp_tol, ..BvpOptions::default() })?;
        let mut csv = String::from("x,init,pde,bvp\n");
        for k in 0..g.n {
            let _ = writeln!(
                csv,
                "{:.12},{:.15e},{:.15e},{:.15e}",
                g.node(k),
                init.values[k],
                pde.profile.values[k],
                bvp.profile.values[k]
            );
        }
        let path = write_csv(cfg, "continuum_profile.csv", &csv)?;
        let sup = pde.profile.values.iter().zip(&bvp.profile.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dip = bvp.profile.values.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("alpha: {}  grid: {}", cfg.alpha, g.n);
        println!("pde: converged {}  residual {:.3e}  t {:.3}", pde.converged, pde.residual, pde.t);
        println!("bvp: iterations {}  scaled residual {:.3e}  u-form residual {:.3e}", bvp.iterations, bvp.residual_g, bvp.residual_u);
        println!("sup |pde - bvp|: {sup:.3e}");
        if (dip - sys.u_opt()).abs() <= 1e-6 {
            println!("verdict: uniform profile at u_opt");
        } else {
            println!("verdict: profile dips to {dip:.9}");
        }
        println!("profile: {}", path.display());
    }
    if all || cfg.task == "compare" {
        let map = coordinate_map(&sys.table, OdeTol::default())?;
        let l = cfg.sections;
        let chain = Uniform::new(-1.0, 1.0 - 2.0 / l as f64, l);
        let mut csv = String::from("alpha,W,mean_abs_diff\n");
        let mut diffs = Vec::new();
        for alpha in cfg.alpha_list()? {
            let w = (alpha * l as f64).round() as usize;
            if w == 0 {
                println!("skipping alpha {alpha}: alpha*L rounds to 0");
                continue;
            }
            let g = continuum_grid(alpha)?;
            let init = default_init(&sys, g, alpha, l, &DeOptions::default())?;
            let b = bvp_solve(&sys, &map, &init, &BvpOptions { tol: cfg.bvp_tol, ..BvpOptions::default() })?;
            let run = de_run_with(&sys.funcs, l, w, sys.v_opt(), &DeOptions::default())?;
            let mad = (0..l).map(|k| (run.state.u[k] - b.profile.at(chain.node(k))).abs()).sum::<f64>() / l as f64;
            let _ = writeln!(csv, "{alpha},{w},{mad:.12e}");
            println!("alpha {alpha}: mean |DE - BVP| = {mad:.6e}");
            diffs.push(mad);
        }
        let path = write_csv(cfg, "continuum_compare.csv", &csv)?;
        println!("decreasing: {}", diffs.windows(2).all(|w| w[1] < w[0]));
        println!("compare: {}", path.display());
    }
    Ok(())
}

pub fn interleaver(cfg: &ExperimentConfig) -> Result<()> {
    let il = ScInterleaver::build(cfg.sections, cfg.w, cfg.m, cfg.seed)?;
    let path = out_path(cfg, "interleaver.txt")?;
    fs::write(&path, il.to_text())?;
    let bijection = il.is_bijection();
    let u = il.verify_uniformity();
    println!("L: {}  W: {}  M: {}  seed: {}", cfg.sections, cfg.w, cfg.m, cfg.seed);
    println!("bijection: {bijection}");
    if u.exact {
        println!("uniformity: exact ({} bits per offset)", cfg.m / cfg.w);
    } else {
        println!("uniformity: max deviation {}", u.max_deviation);
    }
    println!("table: {}", path.display());
    if !bijection {
        return Err(Error::Numeric("interleaver is not a bijection".into()));
    }
    Ok(())
}
