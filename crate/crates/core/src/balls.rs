//! Growth-and-merge ball construction around point singularities and the
//! resulting degree energy lower bounds.
//!
//! Balls live in local charts of the unit torus: distances use the minimal
//! periodic image, and any radius reaching `1/2` aborts with
//! [`Error::Clamped`].

use crate::cones::retracted_energy_region;
use crate::degrees::{plaquette_windings, DegreeConstants};
use crate::error::{Error, Result};
use crate::maps::GridMap;

/// Relative slack used for tangency and containment tests.
const TOUCH_TOL: f64 = 1e-12;

/// Radius at which the flat-chart picture breaks down.
pub const INJECTIVITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Singularity {
    pub position: Vec<f64>,
    pub degree: i64,
}

impl Singularity {
    pub fn new(position: &[f64], degree: i64) -> Self {
        Self { position: position.to_vec(), degree }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Indices into the singularity list of the collection.
    pub members: Vec<usize>,
    /// `|sum of member degrees|`.
    pub aggregate: i64,
    /// `radius / sigma`, constant while the ball grows; `None` once frozen.
    growth: Option<f64>,
}

impl Ball {
    pub fn is_growing(&self) -> bool {
        self.growth.is_some()
    }
}

/// One row of the growth trace: scale, number of balls, total radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub sigma: f64,
    pub balls: usize,
    pub total_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallCollection {
    pub scale: f64,
    pub balls: Vec<Ball>,
    pub singularities: Vec<Singularity>,
    pub trace: Vec<TracePoint>,
}

/// Componentwise minimal periodic displacement `b - a`.
pub fn torus_displacement(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (y - x) - (y - x).round()).collect()
}

pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    torus_displacement(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
}

/// One ball of radius `sigma0 |d_j|` per singularity.
pub fn initial_balls(sings: &[Singularity], sigma0: f64) -> Result<BallCollection> {
    if !(sigma0 > 0.0) {
        return Err(Error::OutOfRange(format!("sigma0 = {sigma0} must be positive")));
    }
    if let Some(s) = sings.iter().find(|s| s.degree == 0) {
        return Err(Error::OutOfRange(format!("singularity at {:?} has degree 0", s.position)));
    }
    let big_d = 1 + sings.iter().map(|s| s.degree.abs()).max().unwrap_or(0);
    let reach = big_d as f64 * sigma0;
    for i in 0..sings.len() {
        for j in 0..i {
            if torus_distance(&sings[i].position, &sings[j].position) <= 2.0 * reach {
                return Err(Error::Overlap { sigma0 });
            }
        }
    }
    if reach >= INJECTIVITY {
        return Err(Error::Clamped { sigma: sigma0 });
    }
    let balls: Vec<Ball> = sings
        .iter()
        .enumerate()
        .map(|(i, s)| Ball {
            center: s.position.iter().map(|x| x.rem_euclid(1.0)).collect(),
            radius: sigma0 * s.degree.abs() as f64,
            members: vec![i],
            aggregate: s.degree.abs(),
            growth: Some(s.degree.abs() as f64),
        })
        .collect();
    let mut coll = BallCollection { scale: sigma0, balls, singularities: sings.to_vec(), trace: Vec::new() };
    coll.record();
    Ok(coll)
}

/// Singularities of a `T^2` circle map at the centers of winding plaquettes.
pub fn singularities_of(u: &GridMap) -> Result<Vec<Singularity>> {
    let w = plaquette_windings(u)?;
    let h = u.grid().h();
    Ok(w.iter()
        .enumerate()
        .filter(|(_, &d)| d != 0)
        .map(|(v, &d)| {
            let c: Vec<f64> = u.grid().vertex_position(v).iter().map(|x| (x + 0.5 * h).rem_euclid(1.0)).collect();
            Singularity { position: c, degree: d }
        })
        .collect())
}

impl BallCollection {
    fn record(&mut self) {
        self.trace.push(TracePoint {
            sigma: self.scale,
            balls: self.balls.len(),
            total_radius: self.total_radius(),
        });
    }

    pub fn total_radius(&self) -> f64 {
        self.balls.iter().map(|b| b.radius).sum()
    }

    fn set_scale(&mut self, sigma: f64) {
        for b in &mut self.balls {
            if let Some(rho) = b.growth {
                b.radius = rho * sigma;
            }
        }
        self.scale = sigma;
    }

    fn touching(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.balls[i], &self.balls[j]);
        let sum = a.radius + b.radius;
        torus_distance(&a.center, &b.center) <= sum * (1.0 + TOUCH_TOL)
    }

    fn merge(&mut self, i: usize, j: usize) {
        let (i, j) = (i.min(j), i.max(j));
        let b = self.balls.remove(j);
        let a = &self.balls[i];
        let radius = a.radius + b.radius;
        let disp = torus_displacement(&a.center, &b.center);
        let center: Vec<f64> = a
            .center
            .iter()
            .zip(&disp)
            .map(|(c, d)| (c + d * b.radius / radius).rem_euclid(1.0))
            .collect();
        let mut members = a.members.clone();
        members.extend(&b.members);
        members.sort_unstable();
        let net: i64 = members.iter().map(|&k| self.singularities[k].degree).sum();
        let growth = (net != 0).then(|| radius / self.scale);
        self.balls[i] = Ball { center, radius, members, aggregate: net.abs(), growth };
    }

    /// Merge touching balls until the collection is pairwise disjoint.
    fn resolve(&mut self) {
        'outer: loop {
            for i in 0..self.balls.len() {
                for j in i + 1..self.balls.len() {
                    if self.touching(i, j) {
                        self.merge(i, j);
                        self.record();
                        continue 'outer;
                    }
                }
            }
            return;
        }
    }

    fn check_clamp(&self) -> Result<()> {
        if self.balls.iter().any(|b| b.radius >= INJECTIVITY) {
            return Err(Error::Clamped { sigma: self.scale });
        }
        Ok(())
    }

    /// Event-driven growth to `sigma_target`: growing balls keep `r/sigma`
    /// fixed, zero-aggregate balls are frozen, tangent balls merge.
    pub fn grow_to_scale(&self, sigma_target: f64) -> Result<BallCollection> {
        if !(sigma_target > self.scale) {
            return Err(Error::OutOfRange(format!(
                "target scale {sigma_target} <= current {}",
                self.scale
            )));
        }
        let mut c = self.clone();
        loop {
            c.resolve();
            c.check_clamp()?;
            let mut next = sigma_target;
            let mut clamp_first = false;
            for b in &c.balls {
                if let Some(rho) = b.growth {
                    let t = INJECTIVITY / rho;
                    if t <= next {
                        next = t;
                        clamp_first = true;
                    }
                }
            }
            for i in 0..c.balls.len() {
                for j in i + 1..c.balls.len() {
                    let (a, b) = (&c.balls[i], &c.balls[j]);
                    let rate = a.growth.unwrap_or(0.0) + b.growth.unwrap_or(0.0);
                    if rate == 0.0 {
                        continue;
                    }
                    let fixed = if a.is_growing() { 0.0 } else { a.radius }
                        + if b.is_growing() { 0.0 } else { b.radius };
                    let t = (torus_distance(&a.center, &b.center) - fixed) / rate;
                    if t < next {
                        next = t;
                        clamp_first = false;
                    }
                }
            }
            c.set_scale(next.max(c.scale));
            if clamp_first {
                return Err(Error::Clamped { sigma: c.scale });
            }
            if next >= sigma_target {
                c.resolve();
                c.check_clamp()?;
                c.record();
                return Ok(c);
            }
        }
    }

    /// Violations of disjointness, coverage, nonemptiness, containment and
    /// `r >= sigma * d` (every ball is interior on the torus).
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.balls.len() {
            for j in i + 1..self.balls.len() {
                if self.touching(i, j) {
                    out.push(format!("balls {i} and {j} intersect"));
                }
            }
        }
        let mut seen = vec![0usize; self.singularities.len()];
        for (i, b) in self.balls.iter().enumerate() {
            if b.members.is_empty() {
                out.push(format!("ball {i} is empty"));
            }
            let net: i64 = b.members.iter().map(|&k| self.singularities[k].degree).sum();
            if net.abs() != b.aggregate {
                out.push(format!("ball {i} aggregate {} != |{net}|", b.aggregate));
            }
            for &k in &b.members {
                seen[k] += 1;
                let d = torus_distance(&b.center, &self.singularities[k].position);
                if d > b.radius * (1.0 + 1e-9) + 1e-12 {
                    out.push(format!("singularity {k} outside ball {i} ({d} > {})", b.radius));
                }
            }
            if b.radius < self.scale * b.aggregate as f64 * (1.0 - 1e-12) {
                out.push(format!("ball {i}: r = {} < sigma d = {}", b.radius, self.scale * b.aggregate as f64));
            }
        }
        for (k, &c) in seen.iter().enumerate() {
            if c != 1 {
                out.push(format!("singularity {k} covered {c} times"));
            }
        }
        out
    }
}

/// `d F_p(r / 2d)` with `d = |sum d_j|`, or 0 for `d = 0`.
pub fn lower_bound_energy(sings: &[Singularity], r: f64, p: f64, k: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange(format!("boundary distance {r} must be positive")));
    }
    let d = sings.iter().map(|s| s.degree).sum::<i64>().abs();
    if d == 0 {
        return Ok(0.0);
    }
    let d = d as f64;
    Ok(d * DegreeConstants::new(k)?.f_p(r / (2.0 * d), p)?)
}

/// Energy of the skeleton retraction of `u` on the squares centered in `ball`.
pub fn ball_energy(u: &GridMap, ball: &Ball, p: f64) -> Result<f64> {
    retracted_energy_region(u, p, |c| torus_distance(c, &ball.center) <= ball.radius)
}
