//! The experiment runners behind each subcommand.

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use mpbarrier::balls::{ball_energy, initial_balls, lower_bound_energy, singularities_of};
use mpbarrier::complex::CubicalComplex;
use mpbarrier::cones::retracted_energy;
use mpbarrier::cycles::{
    difference_class, flat_norm, jacobian_cycle, minmax_width, Chain, FlatMethod, WidthQuery,
};
use mpbarrier::degrees::{lambda_const, plaquette_windings, sphere_volume};
use mpbarrier::io::{save_chain, save_map};
use mpbarrier::maps::{p_energy, p_energy_masked, retract_to_skeleton, GridMap, Target};
use mpbarrier::mountainpass::{string_method, GLConfig, StringOptions};
use mpbarrier::paths::{
    fit_scaling, hang_lin_path, profile_energy, sequence_barrier, PathOptions, SequenceOptions, SwapOrder,
};

use crate::config::Loaded;
use crate::output::{fmt, Output, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Energy,
    Jacobian,
    Balls,
    FlatNorm,
    Width,
    HangLin,
    MountainPass,
    MainInequality,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Energy => "energy",
            Kind::Jacobian => "jacobian",
            Kind::Balls => "balls",
            Kind::FlatNorm => "flatnorm",
            Kind::Width => "width",
            Kind::HangLin => "hanglin",
            Kind::MountainPass => "mountainpass",
            Kind::MainInequality => "main-inequality",
        }
    }
}

pub fn run(kind: Kind, cfg: &Loaded, out: &mut Output) -> Result<()> {
    out.value("experiment", kind.name());
    match kind {
        Kind::Energy => energy(cfg, out),
        Kind::Jacobian => jacobian(cfg, out),
        Kind::Balls => balls(cfg, out),
        Kind::FlatNorm => flatnorm(cfg, out),
        Kind::Width => width(cfg, out),
        Kind::HangLin => hanglin(cfg, out),
        Kind::MountainPass => mountainpass(cfg, out),
        Kind::MainInequality => main_inequality(cfg, out),
    }
}

/// Energy of `u o Phi_k`: exact cone energy for circle maps on `T^2`,
/// masked refined-grid energy otherwise.
fn retracted(u: &GridMap, p: f64, refine: usize) -> Result<f64> {
    if u.target() == Target::Circle && u.grid().n() == 2 {
        return Ok(retracted_energy(u, p)?);
    }
    let k = u.target().k().unwrap_or(2);
    let r = retract_to_skeleton(u, k, refine)?;
    Ok(p_energy_masked(&r.map, &r.mask, p)?)
}

fn energy(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c = &cfg.config;
    cfg.require("sweep", "p", c.sweep.p.len())?;
    let u = cfg.map_u()?;
    save_map(&out.path("u.gmap"), &u)?;
    let k = c.target.k() as f64;
    let rows: Vec<(f64, f64, f64)> = c
        .sweep
        .p
        .par_iter()
        .map(|&p| Ok((p, p_energy(&u, p)?, retracted(&u, p, c.energy.refine)?)))
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = rows.iter().filter(|r| r.1 > 0.0).map(|r| (k - r.0) * r.2 / r.1).collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|&(p, e, er)| {
            let ratio = if e > 0.0 { fmt((k - p) * er / e) } else { String::new() };
            vec![fmt(p), fmt(e), fmt(er), ratio]
        })
        .collect();
    out.csv("energy.csv", &["p", "energy", "retracted_energy", "ratio"], &table)?;
    out.plot(
        "energy.svg",
        "p-energy and retracted energy",
        ("p", "energy"),
        &[
            ("E_p(u)", rows.iter().map(|r| (r.0, r.1)).collect()),
            ("E_p(retracted)", rows.iter().map(|r| (r.0, r.2)).collect()),
        ],
        false,
    )?;
    if !ratios.is_empty() {
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        out.verdict(Verdict::le(
            "retraction_growth",
            "max/min of (k-p) E_p(retracted)/E_p(u) < spread",
            hi / lo,
            c.energy.spread,
            0.0,
        ));
    }
    Ok(())
}

fn jacobian(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let u = cfg.map_u()?;
    save_map(&out.path("u.gmap"), &u)?;
    let t = jacobian_cycle(&u)?;
    save_chain(&out.path("jacobian.chain"), &t)?;
    let cx = t.complex().clone();
    let rows: Vec<Vec<String>> = t
        .terms()
        .map(|(i, v)| {
            let center = cx.center(&cx.cell(t.dim(), i));
            let mut r = vec![i.to_string(), v.to_string()];
            r.extend(center.iter().map(|&x| fmt(x)));
            r
        })
        .collect();
    let header: Vec<&str> = ["cell", "coefficient", "x", "y", "z"].into_iter().take(2 + cx.n()).collect();
    out.csv("jacobian.csv", &header, &rows)?;
    out.value("mass", t.mass());
    out.value("cells", rows.len());
    out.verdict(Verdict::holds("closed", "boundary of T(u) = 0", t.is_cycle()));
    if u.grid().n() == 2 && u.target() == Target::Circle {
        let total: i64 = plaquette_windings(&u)?.iter().sum();
        out.value("winding_total", total);
        out.verdict(Verdict::holds("winding_total", "sum of plaquette windings = 0", total == 0));
    }
    Ok(())
}

fn balls(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c = &cfg.config;
    cfg.require("sweep", "sigma", c.sweep.sigma.len())?;
    let u = cfg.map_u()?;
    if u.grid().n() != 2 {
        bail!("the ball experiment runs on T^2");
    }
    let sings = singularities_of(&u)?;
    let mut coll = initial_balls(&sings, c.balls.sigma0)?;
    let mut rows = Vec::new();
    let mut sigmas = c.sweep.sigma.clone();
    sigmas.sort_by(f64::total_cmp);
    let mut violations = Vec::new();
    for &s in &sigmas {
        coll = coll.grow_to_scale(s)?;
        violations.extend(coll.violations());
        for (i, b) in coll.balls.iter().enumerate() {
            rows.push(vec![
                fmt(s),
                i.to_string(),
                fmt(b.center[0]),
                fmt(b.center[1]),
                fmt(b.radius),
                b.aggregate.to_string(),
                b.members.len().to_string(),
            ]);
        }
    }
    out.csv("balls.csv", &["sigma", "ball", "x", "y", "radius", "aggregate", "members"], &rows)?;
    let trace: Vec<(f64, f64)> = coll.trace.iter().map(|t| (t.sigma, t.total_radius)).collect();
    let tr_rows: Vec<Vec<String>> = coll
        .trace
        .iter()
        .map(|t| vec![fmt(t.sigma), t.balls.to_string(), fmt(t.total_radius)])
        .collect();
    out.csv("balls_trace.csv", &["sigma", "balls", "total_radius"], &tr_rows)?;
    out.plot("balls_trace.svg", "ball construction", ("sigma", "total radius"), &[("total radius", trace)], false)?;
    out.value("singularities", sings.len());
    out.verdict(Verdict::holds("ball_invariants", "disjoint, covering, r >= sigma d", violations.is_empty()));
    if !violations.is_empty() {
        out.value("violations", &violations);
    }
    let k = c.target.k();
    let mut bound_rows = Vec::new();
    let mut ok = true;
    for &p in &c.sweep.p {
        for (i, b) in coll.balls.iter().enumerate().filter(|(_, b)| b.aggregate != 0) {
            let members: Vec<_> = b.members.iter().map(|&j| coll.singularities[j].clone()).collect();
            let lb = lower_bound_energy(&members, b.radius, p, k)?;
            let e = ball_energy(&u, b, p)?;
            ok &= lb <= e;
            bound_rows.push(vec![fmt(p), i.to_string(), fmt(lb), fmt(e)]);
        }
    }
    if !c.sweep.p.is_empty() {
        out.csv("ball_bounds.csv", &["p", "ball", "lower_bound", "energy"], &bound_rows)?;
        out.verdict(Verdict::holds("ball_energy_bound", "d F_p(r/2d) <= E_p on each ball", ok));
    }
    Ok(())
}

/// Random balanced 0-chain with at most `points` support points.
pub fn random_balanced_chain(cx: &CubicalComplex, rng: &mut ChaCha8Rng, points: usize, max_coef: i64) -> Result<Chain> {
    let nv = cx.num_cells(0);
    let mut terms: Vec<(usize, i64)> = (0..points.max(2) - 1)
        .map(|_| (rng.gen_range(0..nv), rng.gen_range(-max_coef..=max_coef)))
        .collect();
    let total: i64 = terms.iter().map(|t| t.1).sum();
    let mut rest = -total;
    // spread the balancing mass over further points within the coefficient bound
    while rest != 0 {
        let c = rest.clamp(-max_coef, max_coef);
        terms.push((rng.gen_range(0..nv), c));
        rest -= c;
    }
    Ok(Chain::from_terms(cx, 0, terms)?)
}

fn flatnorm(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c = &cfg.config;
    let g = cfg.grid()?;
    if g.n() != 2 {
        bail!("the flat-norm oracle comparison runs on T^2");
    }
    let cx = CubicalComplex::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let chains: Vec<Chain> = (0..c.flatnorm.trials)
        .map(|_| random_balanced_chain(&cx, &mut rng, c.flatnorm.points, c.flatnorm.max_coef))
        .collect::<Result<_>>()?;
    let results: Vec<(f64, f64, f64)> = chains
        .par_iter()
        .map(|t| {
            let a = flat_norm(t, FlatMethod::ExactFlow)?.value;
            let b = flat_norm(t, FlatMethod::Exhaustive)?.value;
            Ok((t.mass(), a, b))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .enumerate()
        .map(|(i, &(m, a, b))| vec![i.to_string(), fmt(m), fmt(a), fmt(b), (a == b).to_string()])
        .collect();
    out.csv("flatnorm.csv", &["trial", "mass", "exact_flow", "exhaustive", "equal"], &rows)?;
    let agree = results.iter().filter(|r| r.1 == r.2).count();
    out.value("agree", agree);
    out.verdict(Verdict::holds("oracle_equivalence", "EXACT_FLOW == EXHAUSTIVE", agree == results.len()));
    out.verdict(Verdict::holds("flat_le_mass", "F(T) <= M(T)", results.iter().all(|r| r.1 <= r.0 + 1e-12)));
    Ok(())
}

/// Class to sweep out: configured, or the difference class of the fixtures.
fn width_class(cfg: &Loaded) -> Result<Vec<i64>> {
    let w = &cfg.config.width;
    if !w.xi.is_empty() {
        return Ok(w.xi.clone());
    }
    Ok(difference_class(&cfg.map_u()?, &cfg.map_v()?)?)
}

fn compute_width(cfg: &Loaded, out: &mut Output) -> Result<(Vec<i64>, f64)> {
    let w = &cfg.config.width;
    let xi = width_class(cfg)?;
    let cx = CubicalComplex::build(2, w.m, &[0.0, 0.0])?;
    let r = minmax_width(&cx, &WidthQuery { xi: xi.clone(), delta: w.delta, mass_cap: w.cap })?;
    let rows = vec![vec![
        format!("{:?}", xi),
        w.m.to_string(),
        fmt(w.delta),
        fmt(w.cap),
        fmt(r.value),
        r.states_explored.to_string(),
    ]];
    out.csv("width.csv", &["xi", "m", "delta", "mass_cap", "width", "states"], &rows)?;
    out.value("xi", &xi);
    out.value("width", if r.found() { Some(r.value) } else { None });
    Ok((xi, r.value))
}

fn width(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let (_, l) = compute_width(cfg, out)?;
    out.verdict(Verdict::holds("width_found", "a sequence within the mass cap realizes xi", l.is_finite()));
    Ok(())
}

fn path_options(cfg: &Loaded) -> Result<PathOptions> {
    let h = &cfg.config.hanglin;
    let swap_order = match h.swap_order.as_str() {
        "base_axis" => SwapOrder::BaseAxis,
        "edge_index" => SwapOrder::EdgeIndex,
        other => bail!("config field hanglin.swap_order: unknown order {other:?}"),
    };
    Ok(PathOptions { samples_per_stage: h.samples_per_stage, swap_order })
}

fn hanglin(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c = &cfg.config;
    cfg.require("sweep", "p", c.sweep.p.len())?;
    let (u, v) = (cfg.map_u()?, cfg.map_v()?);
    save_map(&out.path("u.gmap"), &u)?;
    save_map(&out.path("v.gmap"), &v)?;
    let path = hang_lin_path(&u, &v, path_options(cfg)?)?;
    out.value("stages", path.stages().len());
    out.value("swaps", path.swap_edges().len());
    let profiles: Vec<(f64, Vec<f64>, f64)> = c
        .sweep
        .p
        .par_iter()
        .map(|&p| {
            let (e, sup) = profile_energy(&path, p)?;
            Ok((p, e, sup))
        })
        .collect::<Result<_>>()?;
    let mut prof_rows = Vec::new();
    for (p, e, _) in &profiles {
        for (s, en) in path.samples().iter().zip(e) {
            prof_rows.push(vec![fmt(*p), fmt(s.t), s.stage.to_string(), fmt(s.s), fmt(*en)]);
        }
    }
    out.csv("hanglin_profile.csv", &["p", "t", "stage", "s", "energy"], &prof_rows)?;
    let k = c.target.k() as f64;
    let rows: Vec<Vec<String>> =
        profiles.iter().map(|(p, _, sup)| vec![fmt(*p), fmt(1.0 / (k - p)), fmt(*sup)]).collect();
    out.csv("hanglin.csv", &["p", "inv_gap", "sup_energy"], &rows)?;
    let pts: Vec<(f64, f64)> = profiles.iter().map(|(p, _, sup)| (1.0 / (k - p), *sup)).collect();
    out.plot("hanglin.svg", "sup energy along the path", ("1/(k-p)", "sup E_p"), &[("sup", pts)], true)?;
    if profiles.len() >= 3 {
        let ps: Vec<f64> = profiles.iter().map(|r| r.0).collect();
        let sups: Vec<f64> = profiles.iter().map(|r| r.2).collect();
        let (cc, beta) = fit_scaling(&ps, &sups, c.target.k())?;
        out.value("fit_c", cc);
        out.value("fit_beta", beta);
        let h = &c.hanglin;
        out.verdict(Verdict::holds(
            "scaling_exponent",
            &format!("beta in [{}, {}]", h.beta_min, h.beta_max),
            (h.beta_min..=h.beta_max).contains(&beta),
        ));
    }
    Ok(())
}

fn string_opts(cfg: &Loaded) -> StringOptions {
    let m = &cfg.config.mountainpass;
    StringOptions { beads: m.beads, iters: m.iters, ..Default::default() }
}

fn mountainpass(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c = &cfg.config;
    cfg.require("sweep", "p", c.sweep.p.len())?;
    cfg.require("sweep", "epsilon", c.sweep.epsilon.len())?;
    let (u, v) = (cfg.map_u()?, cfg.map_v()?);
    let mut eps = c.sweep.epsilon.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let opts = string_opts(cfg);
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &p in &c.sweep.p {
        let hl = profile_energy(&hang_lin_path(&u, &v, path_options(cfg)?)?, p)?.1;
        let gl: Vec<_> = eps
            .par_iter()
            .map(|&e| Ok(string_method(&u, &v, &GLConfig::new(p, e)?, &opts)?))
            .collect::<Result<Vec<_>>>()?;
        let seq = if c.mountainpass.sequence {
            sequence_barrier(&u, &v, p, c.mountainpass.delta, 0, SequenceOptions { path: path_options(cfg)?, ..Default::default() })?
                .gamma_hat
        } else {
            f64::NAN
        };
        for (e, r) in eps.iter().zip(&gl) {
            rows.push(vec![
                fmt(p),
                fmt(*e),
                fmt(r.gamma_hat),
                fmt(r.interior_max),
                fmt(r.saddle_gradient_norm),
                r.iterations.to_string(),
                fmt(hl),
                fmt(seq),
            ]);
        }
        let upper = gl.iter().all(|r| r.gamma_hat <= hl * 1.05);
        let monotone = gl.windows(2).all(|w| w[1].gamma_hat >= w[0].gamma_hat * 0.98);
        out.verdict(Verdict::holds(&format!("gl_upper_p{p}"), "gamma_GL(eps) <= HL sup * 1.05", upper));
        out.verdict(Verdict::holds(&format!("gl_monotone_p{p}"), "gamma_GL non-decreasing as eps decreases (2%)", monotone));
        series.push((format!("p = {p}"), eps.iter().zip(&gl).map(|(e, r)| (*e, r.gamma_hat)).collect::<Vec<_>>()));
    }
    out.csv(
        "mountainpass.csv",
        &["p", "epsilon", "gamma_gl", "interior_max", "saddle_gradient", "iterations", "hanglin_sup", "sequence_barrier"],
        &rows,
    )?;
    let named: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
    out.plot("mountainpass.svg", "GL mountain-pass estimates", ("epsilon", "gamma_GL"), &named, true)?;
    Ok(())
}

fn main_inequality(cfg: &Loaded, out: &mut Output) -> Result<()> {
    let c = &cfg.config;
    cfg.require("sweep", "p", c.sweep.p.len())?;
    cfg.require("sweep", "epsilon", c.sweep.epsilon.len())?;
    let (u, v) = (cfg.map_u()?, cfg.map_v()?);
    save_map(&out.path("u.gmap"), &u)?;
    save_map(&out.path("v.gmap"), &v)?;
    let k = c.target.k();
    let (_, l_hat) = compute_width(cfg, out)?;
    let sigma = sphere_volume(k)?;
    let lam = lambda_const(k)?.powf(k as f64 / (k as f64 - 1.0));
    let opts = string_opts(cfg);
    let tol = c.mountainpass.tolerance;
    let mut rows = Vec::new();
    for &p in &c.sweep.p {
        let hl = profile_energy(&hang_lin_path(&u, &v, path_options(cfg)?)?, p)?.1;
        let seq = if c.mountainpass.sequence {
            sequence_barrier(&u, &v, p, c.mountainpass.delta, 0, SequenceOptions { path: path_options(cfg)?, ..Default::default() })?
                .gamma_hat
        } else {
            f64::NAN
        };
        for &e in &c.sweep.epsilon {
            let gl = string_method(&u, &v, &GLConfig::new(p, e)?, &opts)?.gamma_hat;
            let lhs = sigma * l_hat;
            let rhs = lam * (k as f64 - p) * gl;
            rows.push(vec![fmt(p), fmt(e), fmt(gl), fmt(hl), fmt(seq), fmt(lhs), fmt(rhs)]);
            // flush after every row so partial results survive a later failure
            out.csv("barrier.csv", &["p", "epsilon", "gamma_gl", "hanglin_sup", "sequence_barrier", "lhs", "rhs"], &rows)?;
            out.verdict(Verdict::le(
                &format!("main_inequality_p{p}_eps{e}"),
                "sigma_{k-1} L <= lambda^(k/(k-1)) (k-p) gamma",
                lhs,
                rhs,
                tol,
            ));
        }
    }
    Ok(())
}
