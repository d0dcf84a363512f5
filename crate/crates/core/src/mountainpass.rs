//! Ginzburg-Landau relaxations `E_{p,eps}` and a string-method saddle search.
//!
//! Maps are stored in ambient space (`R^2` for circle targets, `R^3` for
//! sphere targets); the penalty `F(x) = (1 - |x|^2)^2 / 4` vanishes exactly on
//! the unit sphere of that space.

use rayon::prelude::*;

use crate::complex::TorusGrid;
use crate::error::{Error, Result};
use crate::maps::{GridMap, Target};
use crate::paths::{hang_lin_barrier, sequence_barrier, PathOptions, SequenceOptions};

/// Regularization of `|dw|^2` in the p-Laplacian.
pub const GRADIENT_REG: f64 = 1e-12;
/// Width of the tubular neighbourhood on which the projection is used.
pub const PROJECTION_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GLConfig {
    pub p: f64,
    pub epsilon: f64,
}

impl GLConfig {
    pub fn new(p: f64, epsilon: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::OutOfRange(format!("p = {p} must exceed 1")));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::OutOfRange(format!("epsilon = {epsilon} must be positive")));
        }
        Ok(Self { p, epsilon })
    }
}

/// `F(x) = (1 - |x|^2)^2 / 4`.
pub fn potential(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|c| c * c).sum();
    0.25 * (1.0 - r2).powi(2)
}

/// Neighbour tables and sizes for repeated energy evaluations.
#[derive(Debug, Clone)]
struct Stencil {
    n: usize,
    dim: usize,
    h: f64,
    next: Vec<Vec<usize>>,
}

impl Stencil {
    fn new(grid: &TorusGrid, dim: usize) -> Self {
        let next = (0..grid.n())
            .map(|a| (0..grid.num_vertices()).map(|v| grid.shift(v, a, 1)).collect())
            .collect();
        Self { n: grid.n(), dim, h: grid.h(), next }
    }

    fn vertices(&self) -> usize {
        self.next[0].len()
    }

    fn cell_sq(&self, w: &[f64], v: usize) -> f64 {
        let d = self.dim;
        let mut g = 0.0;
        for a in 0..self.n {
            let u = self.next[a][v];
            for c in 0..d {
                let diff = w[u * d + c] - w[v * d + c];
                g += diff * diff;
            }
        }
        g / (self.h * self.h)
    }

    fn energy(&self, w: &[f64], cfg: &GLConfig) -> f64 {
        let vol = self.h.powi(self.n as i32);
        let d = self.dim;
        let pen = cfg.epsilon.powf(-cfg.p);
        let mut e = 0.0;
        for v in 0..self.vertices() {
            e += self.cell_sq(w, v).powf(0.5 * cfg.p) + pen * potential(&w[v * d..(v + 1) * d]);
        }
        e * vol
    }

    fn gradient(&self, w: &[f64], cfg: &GLConfig) -> Vec<f64> {
        let vol = self.h.powi(self.n as i32);
        let d = self.dim;
        let pen = cfg.epsilon.powf(-cfg.p);
        let mut g = vec![0.0; w.len()];
        for v in 0..self.vertices() {
            let coef = cfg.p * (self.cell_sq(w, v) + GRADIENT_REG).powf(0.5 * cfg.p - 1.0) * vol / (self.h * self.h);
            for a in 0..self.n {
                let u = self.next[a][v];
                for c in 0..d {
                    let diff = coef * (w[u * d + c] - w[v * d + c]);
                    g[u * d + c] += diff;
                    g[v * d + c] -= diff;
                }
            }
            let x = &w[v * d..(v + 1) * d];
            let r2: f64 = x.iter().map(|c| c * c).sum();
            for c in 0..d {
                g[v * d + c] -= pen * vol * (1.0 - r2) * x[c];
            }
        }
        g
    }
}

fn ambient_dim(w: &GridMap) -> Result<usize> {
    match w.target() {
        Target::Ambient(d) => Ok(d),
        _ => Err(Error::TargetMismatch("GL functionals act on ambient maps".into())),
    }
}

/// `E_{p,eps}(w) = sum |dw|^p h^n + eps^-p sum F(w) h^n` with Euclidean differences.
pub fn gl_energy(w: &GridMap, cfg: &GLConfig) -> Result<f64> {
    let w = w.to_ambient();
    let st = Stencil::new(w.grid(), ambient_dim(&w)?);
    Ok(st.energy(w.values(), cfg))
}

/// Gradient of [`gl_energy`] with respect to the vertex values.
pub fn gl_gradient(w: &GridMap, cfg: &GLConfig) -> Result<GridMap> {
    let w = w.to_ambient();
    let d = ambient_dim(&w)?;
    let st = Stencil::new(w.grid(), d);
    GridMap::ambient(w.grid().clone(), d, st.gradient(w.values(), cfg))
}

/// Nearest-point projection onto the unit circle (dim 2) or sphere (dim 3),
/// with the largest distance of a value from the target.
pub fn project_to_target(w: &GridMap) -> Result<(GridMap, f64)> {
    let d = match w.target() {
        Target::Ambient(d) => d,
        _ => return Ok((w.clone(), 0.0)),
    };
    let vals = w.values();
    let nv = w.grid().num_vertices();
    let mut worst = 0.0f64;
    let mut unsafe_vertices = Vec::new();
    let norms: Vec<f64> = (0..nv)
        .map(|v| vals[v * d..(v + 1) * d].iter().map(|c| c * c).sum::<f64>().sqrt())
        .collect();
    for (v, &r) in norms.iter().enumerate() {
        let dist = (r - 1.0).abs();
        if dist >= PROJECTION_RADIUS {
            unsafe_vertices.push(v);
        }
        worst = worst.max(dist);
    }
    if !unsafe_vertices.is_empty() {
        return Err(Error::ProjectionUnsafe { vertices: unsafe_vertices });
    }
    let grid = w.grid().clone();
    let map = if d == 2 {
        GridMap::circle(grid, (0..nv).map(|v| vals[2 * v + 1].atan2(vals[2 * v])).collect())?
    } else {
        let vecs = (0..nv)
            .map(|v| {
                let r = norms[v];
                [vals[3 * v] / r, vals[3 * v + 1] / r, vals[3 * v + 2] / r]
            })
            .collect();
        GridMap::sphere(grid, vecs)?
    };
    Ok((map, worst))
}

/// A discrete path of ambient maps with fixed endpoints.
#[derive(Debug, Clone)]
pub struct BeadPath {
    pub beads: Vec<GridMap>,
}

#[derive(Debug, Clone)]
pub struct StringOptions {
    pub beads: usize,
    pub iters: usize,
    /// Initial beads (for instance samples of a Hang-Lin path); linear
    /// ambient interpolation when `None`.
    pub init: Option<Vec<GridMap>>,
    /// Stop once the max bead energy changes by less than this (relative)
    /// over 50 iterations.
    pub tol: f64,
}

impl Default for StringOptions {
    fn default() -> Self {
        Self { beads: 12, iters: 2000, init: None, tol: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct StringResult {
    pub path: BeadPath,
    pub gamma_hat: f64,
    pub energies: Vec<f64>,
    /// Best max interior bead energy after each iteration.
    pub history: Vec<f64>,
    pub interior_max: f64,
    pub iterations: usize,
    /// Index of the highest bead and the Euclidean norm of its gradient.
    pub saddle: usize,
    pub saddle_gradient_norm: f64,
}

fn l2_distance(a: &[f64], b: &[f64], vol: f64) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() * vol).sqrt()
}

/// Equal-arclength redistribution in the discrete L^2 bead metric.
fn reparametrize(beads: &[Vec<f64>], vol: f64) -> Vec<Vec<f64>> {
    let nb = beads.len();
    let mut arc = vec![0.0; nb];
    for i in 1..nb {
        arc[i] = arc[i - 1] + l2_distance(&beads[i - 1], &beads[i], vol);
    }
    let total = arc[nb - 1];
    if total == 0.0 {
        return beads.to_vec();
    }
    let mut out = Vec::with_capacity(nb);
    out.push(beads[0].clone());
    let mut seg = 0;
    for j in 1..nb - 1 {
        let target = total * j as f64 / (nb - 1) as f64;
        while seg + 1 < nb - 1 && arc[seg + 1] < target {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let t = if len > 0.0 { (target - arc[seg]) / len } else { 0.0 };
        out.push(beads[seg].iter().zip(&beads[seg + 1]).map(|(a, b)| a + t * (b - a)).collect());
    }
    out.push(beads[nb - 1].clone());
    out
}

/// One backtracking gradient step; returns the new values, energy and step.
fn descend(st: &Stencil, cfg: &GLConfig, w: &[f64], e: f64, mut step: f64) -> (Vec<f64>, f64, f64) {
    let g = st.gradient(w, cfg);
    let g2: f64 = g.iter().map(|x| x * x).sum();
    if g2 == 0.0 {
        return (w.to_vec(), e, step);
    }
    while step > 1e-14 {
        let trial: Vec<f64> = w.iter().zip(&g).map(|(x, d)| x - step * d).collect();
        let te = st.energy(&trial, cfg);
        if te <= e - 1e-4 * step * g2 {
            return (trial, te, step * 1.25);
        }
        step *= 0.5;
    }
    (w.to_vec(), e, step)
}

/// String method between target-valued maps `u` and `v`.
///
/// Each iteration takes one backtracking descent step per interior bead and
/// then redistributes the beads by L^2 arclength. The string with the lowest
/// max interior energy seen so far is kept, so the reported history never
/// increases; 100 consecutive rises of the current string's max give
/// `Diverged`. The estimate is the max over all beads, endpoints included.
pub fn string_method(u: &GridMap, v: &GridMap, cfg: &GLConfig, opts: &StringOptions) -> Result<StringResult> {
    if matches!(u.target(), Target::Ambient(_)) || matches!(v.target(), Target::Ambient(_)) {
        return Err(Error::TargetMismatch("string endpoints must be target-valued".into()));
    }
    if u.target() != v.target() || u.grid() != v.grid() {
        return Err(Error::DimensionMismatch("endpoints must share grid and target".into()));
    }
    if opts.beads < 8 {
        return Err(Error::OutOfRange(format!("{} beads; at least 8 required", opts.beads)));
    }
    let (ua, va) = (u.to_ambient(), v.to_ambient());
    let d = ambient_dim(&ua)?;
    let grid = u.grid().clone();
    let st = Stencil::new(&grid, d);
    let vol = grid.h().powi(grid.n() as i32);
    let nb = opts.beads;
    let mut beads: Vec<Vec<f64>> = match &opts.init {
        Some(init) => {
            if init.len() != nb {
                return Err(Error::DimensionMismatch(format!("{} initial beads for {nb}", init.len())));
            }
            let mut b: Vec<Vec<f64>> = init.iter().map(|m| m.to_ambient().values().to_vec()).collect();
            b[0] = ua.values().to_vec();
            b[nb - 1] = va.values().to_vec();
            b
        }
        None => (0..nb)
            .map(|i| {
                let t = i as f64 / (nb - 1) as f64;
                ua.values().iter().zip(va.values()).map(|(a, b)| (1.0 - t) * a + t * b).collect()
            })
            .collect(),
    };
    let mut energies: Vec<f64> = beads.par_iter().map(|b| st.energy(b, cfg)).collect();
    let mut steps = vec![0.05; nb];
    let max_of = |e: &[f64]| e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let interior_max = |e: &[f64]| max_of(&e[1..e.len() - 1]);
    let mut history = Vec::new();
    let mut best = (beads.clone(), energies.clone());
    let mut last = interior_max(&energies);
    let mut rises = 0usize;
    let mut iterations = 0;
    for it in 0..opts.iters {
        iterations = it + 1;
        let updated: Vec<(Vec<f64>, f64, f64)> = (1..nb - 1)
            .into_par_iter()
            .map(|i| descend(&st, cfg, &beads[i], energies[i], steps[i]))
            .collect();
        for (k, (w, e, s)) in updated.into_iter().enumerate() {
            beads[k + 1] = w;
            energies[k + 1] = e;
            steps[k + 1] = s;
        }
        beads = reparametrize(&beads, vol);
        energies = beads.par_iter().map(|b| st.energy(b, cfg)).collect();
        let m = interior_max(&energies);
        rises = if m > last { rises + 1 } else { 0 };
        if rises >= 100 {
            return Err(Error::Diverged { iters: iterations });
        }
        last = m;
        if m <= interior_max(&best.1) {
            best = (beads.clone(), energies.clone());
        }
        let b = interior_max(&best.1);
        history.push(b);
        if b == 0.0 {
            break;
        }
        if history.len() > 50 {
            let old = history[history.len() - 51];
            if old - b <= opts.tol * old.abs() {
                break;
            }
        }
    }
    let (beads, energies) = best;
    let saddle = (1..nb - 1).fold(1, |k, i| if energies[i] > energies[k] { i } else { k });
    let g = st.gradient(&beads[saddle], cfg);
    let saddle_gradient_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let gamma_hat = max_of(&energies);
    let interior = interior_max(&energies);
    let beads = beads
        .into_iter()
        .map(|b| GridMap::ambient(grid.clone(), d, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(StringResult {
        path: BeadPath { beads },
        gamma_hat,
        energies,
        history,
        interior_max: interior,
        iterations,
        saddle,
        saddle_gradient_norm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichRow {
    pub epsilon: f64,
    pub gamma_gl: f64,
    pub saddle_gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub p: f64,
    pub rows: Vec<SandwichRow>,
    pub hang_lin: f64,
    pub sequence: f64,
    pub delta: f64,
    /// `gamma_GL(eps) <= hang_lin * (1 + upper_tol)` for every row.
    pub upper_ok: bool,
    /// `gamma_GL` non-decreasing as `eps` decreases, up to `noise_tol`.
    pub monotone_ok: bool,
    pub upper_tol: f64,
    pub noise_tol: f64,
}

/// Tabulates the GL mountain-pass estimates against the Hang-Lin and sequence barriers.
pub fn sandwich_report(
    u: &GridMap,
    v: &GridMap,
    p: f64,
    eps_list: &[f64],
    delta: f64,
    opts: &StringOptions,
) -> Result<SandwichReport> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::OutOfRange("epsilon list must be nonempty and decreasing".into()));
    }
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let r = string_method(u, v, &GLConfig::new(p, eps)?, opts)?;
            Ok(SandwichRow { epsilon: eps, gamma_gl: r.gamma_hat, saddle_gradient_norm: r.saddle_gradient_norm })
        })
        .collect::<Result<Vec<_>>>()?;
    let hang_lin = hang_lin_barrier(u, v, p, PathOptions::default())?.gamma_hat;
    let sequence = sequence_barrier(u, v, p, delta, 0, SequenceOptions::default())?.gamma_hat;
    let (upper_tol, noise_tol) = (0.05, 0.02);
    let upper_ok = rows.iter().all(|r| r.gamma_gl <= hang_lin * (1.0 + upper_tol));
    let monotone_ok = rows.windows(2).all(|w| w[1].gamma_gl >= w[0].gamma_gl * (1.0 - noise_tol));
    Ok(SandwichReport { p, rows, hang_lin, sequence, delta, upper_ok, monotone_ok, upper_tol, noise_tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::winding_map;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(p: f64, eps: f64) -> GLConfig {
        GLConfig::new(p, eps).unwrap()
    }

    #[test]
    fn energy_closed_forms() {
        let g = TorusGrid::unit(2, 8).unwrap();
        let c = GridMap::constant_circle(g.clone(), 0.7);
        assert!(gl_energy(&c, &cfg(1.7, 0.1)).unwrap().abs() < 1e-14);
        let zero = GridMap::ambient(g, 2, vec![0.0; 128]).unwrap();
        assert_relative_eq!(gl_energy(&zero, &cfg(1.7, 0.1)).unwrap(), 0.1f64.powf(-1.7) / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn target_valued_energy_is_close_to_p_energy() {
        let g = TorusGrid::unit(2, 64).unwrap();
        let u = GridMap::circle_from_fn(g, |x| {
            crate::maps::TWO_PI * x[0] + 0.5 * (crate::maps::TWO_PI * x[1]).sin()
        });
        for p in [1.5, 1.9] {
            let a = gl_energy(&u, &cfg(p, 0.1)).unwrap();
            let b = crate::maps::p_energy(&u, p).unwrap();
            assert!((a - b).abs() / b < 0.05, "{a} vs {b}");
            assert_relative_eq!(a, gl_energy(&u, &cfg(p, 0.01)).unwrap(), max_relative = 1e-9);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let g = TorusGrid::unit(2, 8).unwrap();
            let vals: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.2..1.2)).collect();
            let w = GridMap::ambient(g.clone(), 2, vals.clone()).unwrap();
            let c = cfg(1.5 + 0.02 * trial as f64, 0.2);
            let grad = gl_gradient(&w, &c).unwrap();
            for i in 0..128 {
                let hstep = 1e-6;
                let (mut a, mut b) = (vals.clone(), vals.clone());
                a[i] += hstep;
                b[i] -= hstep;
                let ea = gl_energy(&GridMap::ambient(g.clone(), 2, a).unwrap(), &c).unwrap();
                let eb = gl_energy(&GridMap::ambient(g.clone(), 2, b).unwrap(), &c).unwrap();
                let fd = (ea - eb) / (2.0 * hstep);
                let an = grad.values()[i];
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "trial {trial} comp {i}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn constant_maps_have_zero_gradient() {
        let g = TorusGrid::unit(2, 8).unwrap();
        let c = GridMap::constant_circle(g, 1.1);
        let grad = gl_gradient(&c, &cfg(1.8, 0.1)).unwrap();
        assert!(grad.values().iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-6);
    }

    #[test]
    fn projection_cases() {
        let g = TorusGrid::unit(2, 4).unwrap();
        let u = winding_map(g.clone(), &[1, 0]).unwrap();
        let (back, dist) = project_to_target(&u.to_ambient()).unwrap();
        assert!(dist < 1e-15);
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!(crate::maps::wrap_angle(a - b).abs() < 1e-12);
        }
        let scaled: Vec<f64> = u.to_ambient().values().iter().map(|x| 1.2 * x).collect();
        let (_, dist) = project_to_target(&GridMap::ambient(g.clone(), 2, scaled.clone()).unwrap()).unwrap();
        assert_relative_eq!(dist, 0.2, epsilon = 1e-12);
        let mut hole = scaled;
        hole[10] = 0.0;
        hole[11] = 0.0;
        match project_to_target(&GridMap::ambient(g, 2, hole).unwrap()) {
            Err(Error::ProjectionUnsafe { vertices }) => assert_eq!(vertices, vec![5]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn string_between_equal_maps_keeps_endpoint_energy() {
        let g = TorusGrid::unit(2, 8).unwrap();
        let u = winding_map(g, &[1, 0]).unwrap();
        let c = cfg(1.9, 0.1);
        let r = string_method(&u, &u, &c, &StringOptions { iters: 50, ..Default::default() }).unwrap();
        assert_relative_eq!(r.gamma_hat, gl_energy(&u, &c).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn string_between_constants_relaxes_to_the_target() {
        let g = TorusGrid::unit(2, 8).unwrap();
        let u = GridMap::constant_circle(g.clone(), 0.0);
        let v = GridMap::constant_circle(g, 1.0);
        let r = string_method(&u, &v, &cfg(1.8, 0.2), &StringOptions { iters: 5000, tol: 0.0, ..Default::default() }).unwrap();
        assert!(r.gamma_hat < 1e-6, "{}", r.gamma_hat);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn too_few_beads_are_rejected() {
        let g = TorusGrid::unit(2, 4).unwrap();
        let u = GridMap::constant_circle(g, 0.0);
        let o = StringOptions { beads: 5, ..Default::default() };
        assert!(matches!(string_method(&u, &u, &cfg(1.5, 0.1), &o), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn winding_barrier_stays_below_hang_lin() {
        let g = TorusGrid::unit(2, 16).unwrap();
        let u = winding_map(g.clone(), &[1, 0]).unwrap();
        let v = winding_map(g, &[2, 0]).unwrap();
        let opts = StringOptions { iters: 400, ..Default::default() };
        let rep = sandwich_report(&u, &v, 1.95, &[0.2, 0.1], 0.3, &opts).unwrap();
        assert!(rep.upper_ok, "{rep:?}");
        assert!(rep.rows.iter().all(|r| r.gamma_gl >= gl_energy(&v, &cfg(1.95, 0.1)).unwrap()));
    }
}
