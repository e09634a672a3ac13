//! Geometric observables of label fields: radii, interface lengths, triple
//! junction angles, and the analytic targets they are compared against.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{gaussian_convolve, GridSpec, LabelField, ScalarField};
use crate::scheme::Trajectory;

/// Default half-width, in cells, of the window used to fit junction rays.
pub const JUNCTION_WINDOW: usize = 16;

/// Fit windows skip this many initial steps.
pub const TRANSIENT_STEPS: usize = 5;

/// Radii below this many cells are excluded from shrink-rate fits.
pub const MIN_RADIUS_CELLS: f64 = 8.0;

pub const MIN_FIT_SAMPLES: usize = 10;

/// Smoothing time per unit grid spacing for interface contours.
pub const CONTOUR_SMOOTHING: f64 = 0.1;

/// Radius of the ball with the same volume as `phase`.
pub fn disk_radius(labels: &LabelField, phase: usize) -> Result<f64> {
    let count = phase_count(labels, phase)?;
    radius_from_count(labels.grid(), count, phase)
}

fn phase_count(labels: &LabelField, phase: usize) -> Result<usize> {
    if phase >= labels.num_phases() {
        return Err(Error::PhaseIndex {
            phase,
            num_phases: labels.num_phases(),
        });
    }
    Ok(labels.labels().iter().filter(|&&l| l as usize == phase).count())
}

fn radius_from_count(grid: &GridSpec, count: usize, phase: usize) -> Result<f64> {
    if count == 0 {
        return Err(Error::EmptyPhase(phase));
    }
    let volume = count as f64 * grid.cell_volume();
    match grid.dim() {
        2 => Ok((volume / PI).sqrt()),
        3 => Ok((3.0 * volume / (4.0 * PI)).cbrt()),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Straight piece of a contour, in physical coordinates. Endpoints are not
/// wrapped back into the unit torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn midpoint(&self) -> [f64; 2] {
        [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMeasurement {
    pub pair: (usize, usize),
    /// Length in 2D, area in 3D.
    pub length: f64,
    /// Contour pieces; empty in 3D.
    pub segments: Vec<Segment>,
}

/// Measure of the interface between phases `i` and `j`.
///
/// In 2D this is the marching-squares contour of `1_i - 1_j` after a light
/// Gaussian smoothing whose time scales with the spacing, so the estimate
/// converges at first order under refinement. In 3D it is
/// the total area of cell faces separating `i` from `j`, which overestimates
/// oblique interfaces by a factor up to `sqrt(3)`.
pub fn interface_length(labels: &LabelField, i: usize, j: usize) -> Result<InterfaceMeasurement> {
    let n = labels.num_phases();
    for p in [i, j] {
        if p >= n {
            return Err(Error::PhaseIndex {
                phase: p,
                num_phases: n,
            });
        }
    }
    match labels.grid().dim() {
        2 => {
            let segments = if i == j {
                Vec::new()
            } else {
                smoothed_contour_segments(labels, i, j, CONTOUR_SMOOTHING * labels.grid().max_spacing())?
            };
            Ok(InterfaceMeasurement {
                pair: (i, j),
                length: segments.iter().map(Segment::length).sum(),
                segments,
            })
        }
        3 => Ok(InterfaceMeasurement {
            pair: (i, j),
            length: if i == j { 0.0 } else { face_area(labels, i, j) },
            segments: Vec::new(),
        }),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

fn face_area(labels: &LabelField, i: usize, j: usize) -> f64 {
    let grid = labels.grid();
    let lab = labels.labels();
    let mut area = 0.0;
    for axis in 0..3 {
        let face = grid.cell_volume() / grid.spacing(axis);
        let mut offset = [0isize; 3];
        offset[axis] = 1;
        let mut count = 0usize;
        for c in 0..grid.len() {
            let nb = grid.wrapped_index(&grid.coords(c), &offset);
            let (p, q) = (lab[c] as usize, lab[nb] as usize);
            if (p == i && q == j) || (p == j && q == i) {
                count += 1;
            }
        }
        area += count as f64 * face;
    }
    area
}

/// Labels of the 2x2 block whose lower corner cell is `(x, y)`, in the order
/// (0,0), (1,0), (1,1), (0,1).
fn block(labels: &LabelField, x: usize, y: usize) -> [usize; 4] {
    let s = labels.grid().sizes();
    let (x1, y1) = ((x + 1) % s[0], (y + 1) % s[1]);
    let at = |a: usize, b: usize| labels.labels()[a * s[1] + b] as usize;
    [at(x, y), at(x1, y), at(x1, y1), at(x, y1)]
}

/// Zero contour of `1_i - 1_j` through the 2x2 blocks of cell centres that
/// hold only phases `i` and `j`.
fn contour_segments(labels: &LabelField, i: usize, j: usize) -> Vec<Segment> {
    let (values, admit): (Vec<f64>, Vec<bool>) = labels
        .labels()
        .iter()
        .map(|&l| match l as usize {
            l if l == i => (1.0, true),
            l if l == j => (-1.0, true),
            _ => (0.0, false),
        })
        .unzip();
    march(labels.grid(), &values, &admit)
}

/// Zero contour of `G_t * (1_i - 1_j)` with `t` proportional to the spacing,
/// through blocks where `i` and `j` dominate every other phase after smoothing.
fn smoothed_contour_segments(labels: &LabelField, i: usize, j: usize, t: f64) -> Result<Vec<Segment>> {
    let grid = labels.grid();
    let (signed, both): (Vec<f64>, Vec<f64>) = labels
        .labels()
        .iter()
        .map(|&l| match l as usize {
            l if l == i => (1.0, 1.0),
            l if l == j => (-1.0, 1.0),
            _ => (0.0, 0.0),
        })
        .unzip();
    let signed = ScalarField::new(grid.clone(), signed)?;
    let both = ScalarField::new(grid.clone(), both)?;
    let f = gaussian_convolve(&signed, t)?;
    let s = gaussian_convolve(&both, t)?;
    let admit: Vec<bool> = f
        .values()
        .iter()
        .zip(s.values())
        .map(|(&f, &s)| 1.0 - s < 0.5 * (s - f.abs()))
        .collect();
    Ok(march(grid, f.values(), &admit))
}

/// Marching squares on cell-centre values over blocks whose four corners are
/// all admitted.
fn march(grid: &GridSpec, values: &[f64], admit: &[bool]) -> Vec<Segment> {
    let s = grid.sizes();
    let (h0, h1) = (grid.spacing(0), grid.spacing(1));
    const CORNER: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let mut out = Vec::new();
    for x in 0..s[0] {
        for y in 0..s[1] {
            let (x1, y1) = ((x + 1) % s[0], (y + 1) % s[1]);
            let idx = [x * s[1] + y, x1 * s[1] + y, x1 * s[1] + y1, x * s[1] + y1];
            if idx.iter().any(|&c| !admit[c]) {
                continue;
            }
            let v = idx.map(|c| values[c]);
            let positive = v.map(|x| x > 0.0);
            if positive.iter().all(|&p| p) || positive.iter().all(|&p| !p) {
                continue;
            }
            // Crossing point on edge k, which joins corner k to corner k+1.
            let cross = |e: usize| {
                let (a, b) = (v[e], v[(e + 1) % 4]);
                let w = a / (a - b);
                let (p, q) = (CORNER[e], CORNER[(e + 1) % 4]);
                [
                    (x as f64 + 0.5 + p[0] + w * (q[0] - p[0])) * h0,
                    (y as f64 + 0.5 + p[1] + w * (q[1] - p[1])) * h1,
                ]
            };
            let crossed: Vec<usize> = (0..4).filter(|&e| positive[e] != positive[(e + 1) % 4]).collect();
            if crossed.len() == 2 {
                out.push(Segment {
                    a: cross(crossed[0]),
                    b: cross(crossed[1]),
                });
            } else {
                // Saddle: cut off the two corners whose sign disagrees with the block mean.
                let mean_positive = v.iter().sum::<f64>() > 0.0;
                let pairs = if positive[0] != mean_positive { [(3, 0), (1, 2)] } else { [(0, 1), (2, 3)] };
                for (e, f) in pairs {
                    out.push(Segment {
                        a: cross(e),
                        b: cross(f),
                    });
                }
            }
        }
    }
    out
}

/// Minimal-image displacement `to - from` on the unit torus.
fn periodic_delta(from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
    let wrap = |d: f64| d - d.round();
    [wrap(to[0] - from[0]), wrap(to[1] - from[1])]
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionReport {
    /// Junction position in `[0, 1)^2`.
    pub location: [f64; 2],
    /// Incident phases in ascending order.
    pub phases: [usize; 3],
    /// `angles[k]` is the opening angle of `phases[k]`, in degrees.
    pub angles: [f64; 3],
    /// Fitted unit ray direction for each incident pair, keyed by the pair.
    pub rays: Vec<((usize, usize), [f64; 2])>,
}

impl JunctionReport {
    pub fn angle_of(&self, phase: usize) -> Option<f64> {
        self.phases.iter().position(|&p| p == phase).map(|k| self.angles[k])
    }
}

/// Triple junctions of a 2D labelling and their opening angles.
///
/// A junction is a cluster of 2x2 blocks showing three or more phases. Each
/// incident interface is fitted by a total-least-squares line through the
/// contour midpoints within `window` cells of the junction; the angle between
/// two consecutive rays belongs to the phase they enclose.
pub fn junction_angles(labels: &LabelField, window: usize) -> Result<Vec<JunctionReport>> {
    let grid = labels.grid();
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    if window < 8 {
        return Err(Error::Grid(format!("junction window must be at least 8 cells, got {window}")));
    }
    let s = grid.sizes();
    let (h0, h1) = (grid.spacing(0), grid.spacing(1));
    let mut sites = Vec::new();
    for x in 0..s[0] {
        for y in 0..s[1] {
            let b = block(labels, x, y);
            let mut distinct = b.to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() >= 3 {
                let point = [((x + 1) as f64 * h0).fract(), ((y + 1) as f64 * h1).fract()];
                sites.push((point, b));
            }
        }
    }
    let spacing = grid.max_spacing();
    let clusters = cluster_sites(&sites, 2.5 * spacing);
    let mut contours: HashMap<(usize, usize), Vec<Segment>> = HashMap::new();
    let radius = window as f64 * spacing;
    let mut reports = Vec::new();
    for members in clusters {
        let anchor = sites[members[0]].0;
        let mut mean = [0.0; 2];
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for &m in &members {
            let d = periodic_delta(anchor, sites[m].0);
            mean[0] += d[0];
            mean[1] += d[1];
            for &p in &sites[m].1 {
                *counts.entry(p).or_default() += 1;
            }
        }
        let k = members.len() as f64;
        let location = [
            (anchor[0] + mean[0] / k).rem_euclid(1.0),
            (anchor[1] + mean[1] / k).rem_euclid(1.0),
        ];
        let mut ranked: Vec<(usize, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut phases = [ranked[0].0, ranked[1].0, ranked[2].0];
        phases.sort_unstable();
        let pairs = [(phases[0], phases[1]), (phases[1], phases[2]), (phases[0], phases[2])];
        let mut rays = Vec::with_capacity(3);
        for &pair in &pairs {
            let segs = contours
                .entry(pair)
                .or_insert_with(|| contour_segments(labels, pair.0, pair.1));
            if let Some(dir) = fit_ray(location, segs, radius) {
                rays.push((pair, dir));
            }
        }
        if rays.len() == 3 {
            reports.push(junction_report(location, phases, rays));
        }
    }
    Ok(reports)
}

fn cluster_sites(sites: &[([f64; 2], [usize; 4])], reach: f64) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..sites.len()).collect();
    fn root(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for a in 0..sites.len() {
        for b in a + 1..sites.len() {
            let d = periodic_delta(sites[a].0, sites[b].0);
            if d[0].hypot(d[1]) <= reach {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = HashMap::new();
    for a in 0..sites.len() {
        let r = root(&mut parent, a);
        let g = *slot.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(a);
    }
    groups
}

/// Principal direction of the length-weighted segment midpoints within
/// `radius` of `origin`, oriented away from it.
fn fit_ray(origin: [f64; 2], segs: &[Segment], radius: f64) -> Option<[f64; 2]> {
    let pts: Vec<([f64; 2], f64)> = segs
        .iter()
        .filter_map(|s| {
            let d = periodic_delta(origin, s.midpoint());
            (d[0].hypot(d[1]) <= radius).then(|| (d, s.length()))
        })
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let w: f64 = pts.iter().map(|p| p.1).sum();
    let c = pts
        .iter()
        .fold([0.0; 2], |acc, (d, l)| [acc[0] + l * d[0] / w, acc[1] + l * d[1] / w]);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (d, l) in &pts {
        let (u, v) = (d[0] - c[0], d[1] - c[1]);
        sxx += l * u * u;
        sxy += l * u * v;
        syy += l * v * v;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut dir = [theta.cos(), theta.sin()];
    if dir[0] * c[0] + dir[1] * c[1] < 0.0 {
        dir = [-dir[0], -dir[1]];
    }
    Some(dir)
}

fn junction_report(
    location: [f64; 2],
    phases: [usize; 3],
    rays: Vec<((usize, usize), [f64; 2])>,
) -> JunctionReport {
    let mut order: Vec<(f64, usize)> = rays
        .iter()
        .enumerate()
        .map(|(k, (_, d))| (d[1].atan2(d[0]), k))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut angles = [0.0; 3];
    for w in 0..3 {
        let (t0, k0) = order[w];
        let (t1, k1) = order[(w + 1) % 3];
        let opening = (t1 - t0).rem_euclid(2.0 * PI).to_degrees();
        let (p, q) = (rays[k0].0, rays[k1].0);
        let shared = [p.0, p.1]
            .into_iter()
            .find(|x| *x == q.0 || *x == q.1)
            .expect("two distinct pairs of three phases share one phase");
        let slot = phases.iter().position(|&x| x == shared).expect("shared phase is incident");
        angles[slot] = opening;
    }
    JunctionReport {
        location,
        phases,
        angles,
        rays,
    }
}

/// Equilibrium opening angles, in degrees, of phases 1, 2, 3 at a triple
/// junction with tensions `sigma12`, `sigma13`, `sigma23`.
///
/// The angle of phase `k` is the exterior angle of the triangle of tensions
/// at the vertex opposite the tension that phase `k` does not touch.
pub fn young_angles(sigma12: f64, sigma13: f64, sigma23: f64) -> Result<[f64; 3]> {
    let (a, b, c) = (sigma12, sigma13, sigma23);
    let strict = a > 0.0 && b > 0.0 && c > 0.0 && a + b > c && a + c > b && b + c > a;
    if !strict || ![a, b, c].iter().all(|v| v.is_finite()) {
        return Err(Error::InadmissibleTensions(a, b, c));
    }
    let interior = |opp: f64, s: f64, t: f64| ((s * s + t * t - opp * opp) / (2.0 * s * t)).clamp(-1.0, 1.0).acos();
    let theta1 = PI - interior(c, a, b);
    let theta2 = PI - interior(b, a, c);
    let theta3 = 2.0 * PI - theta1 - theta2;
    Ok([theta1.to_degrees(), theta2.to_degrees(), theta3.to_degrees()])
}

/// Magnitude of `sigma12 t12 + sigma13 t13 + sigma23 t23` for interface rays
/// arranged with the given opening angles (degrees) of phases 1, 2, 3.
pub fn force_balance_residual(sigma12: f64, sigma13: f64, sigma23: f64, angles: [f64; 3]) -> f64 {
    let [t1, _, t3] = angles.map(f64::to_radians);
    // Ray 12 at angle 0; phase 1 opens to ray 13, phase 3 then opens to ray 23.
    let dirs = [0.0, t1, t1 + t3];
    let tensions = [sigma12, sigma13, sigma23];
    let (mut x, mut y) = (0.0, 0.0);
    for (s, d) in tensions.iter().zip(dirs) {
        x += s * d.cos();
        y += s * d.sin();
    }
    x.hypot(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkFit {
    /// Least-squares slope of `r^2` against time.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit, in units of `r^2`.
    pub residual: f64,
    pub samples: usize,
}

/// Fits `r(t)^2` for `phase` over the reports of a trajectory, skipping the
/// first few steps and radii below the resolution floor.
pub fn shrink_rate_fit(trajectory: &Trajectory, phase: usize) -> Result<ShrinkFit> {
    let grid = trajectory.initial.grid();
    let num_phases = trajectory.initial.num_phases();
    if phase >= num_phases {
        return Err(Error::PhaseIndex { phase, num_phases });
    }
    let mut samples = Vec::new();
    for r in &trajectory.reports {
        let count = r.phase_volumes[phase];
        if count == 0 {
            break;
        }
        samples.push((r.step, r.time, radius_from_count(grid, count, phase)?));
    }
    fit_squared_radius(&samples, MIN_RADIUS_CELLS * grid.max_spacing())
}

/// Least-squares line through `(t, r^2)` for samples `(step, t, r)` with
/// `step > TRANSIENT_STEPS` and `r >= min_radius`.
pub fn fit_squared_radius(samples: &[(usize, f64, f64)], min_radius: f64) -> Result<ShrinkFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(step, _, r)| *step > TRANSIENT_STEPS && *r >= min_radius)
        .map(|&(_, t, r)| (t, r * r))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::WindowTooShort {
            usable: pts.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let n = pts.len() as f64;
    let (mt, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + t / n, b + y / n));
    let (mut stt, mut sty) = (0.0, 0.0);
    for &(t, y) in &pts {
        stt += (t - mt) * (t - mt);
        sty += (t - mt) * (y - my);
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let intercept = my - slope * mt;
    let residual = (pts
        .iter()
        .map(|&(t, y)| (y - intercept - slope * t).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ShrinkFit {
        slope,
        intercept,
        residual,
        samples: pts.len(),
    })
}

/// One row of `probes.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub kind: String,
    pub step: usize,
    pub value: f64,
    pub target: f64,
}

impl ProbeRecord {
    pub fn new(kind: impl Into<String>, step: usize, value: f64, target: f64) -> Self {
        Self {
            kind: kind.into(),
            step,
            value,
            target,
        }
    }

    /// Relative error when the target is nonzero, absolute otherwise.
    pub fn error(&self) -> f64 {
        let diff = self.value - self.target;
        if self.target == 0.0 {
            diff.abs()
        } else {
            (diff / self.target).abs()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(n: usize, r: f64) -> LabelField {
        let grid = GridSpec::square(n).unwrap();
        LabelField::from_fn(grid, 2, |x| {
            u8::from((x[0] - 0.5).hypot(x[1] - 0.5) < r)
        })
        .unwrap()
    }

    fn sectors(n: usize, openings: [f64; 3]) -> LabelField {
        let grid = GridSpec::square(n).unwrap();
        let b1 = openings[0];
        let b2 = b1 + openings[1];
        LabelField::from_fn(grid, 3, |x| {
            let t = (x[1] - 0.5).atan2(x[0] - 0.5).to_degrees().rem_euclid(360.0);
            if t < b1 {
                0
            } else if t < b2 {
                1
            } else {
                2
            }
        })
        .unwrap()
    }

    fn rotate90(l: &LabelField) -> LabelField {
        let n = l.grid().sizes()[0];
        let mut out = vec![0u8; n * n];
        for x in 0..n {
            for y in 0..n {
                out[(n - 1 - y) * n + x] = l.labels()[x * n + y];
            }
        }
        LabelField::new(l.grid().clone(), l.num_phases(), out).unwrap()
    }

    fn nearest_center(reports: &[JunctionReport]) -> &JunctionReport {
        reports
            .iter()
            .min_by(|a, b| {
                let da = (a.location[0] - 0.5).hypot(a.location[1] - 0.5);
                let db = (b.location[0] - 0.5).hypot(b.location[1] - 0.5);
                da.total_cmp(&db)
            })
            .unwrap()
    }

    #[test]
    fn radius_of_rasterized_disk() {
        let r = disk_radius(&disk(256, 0.25), 1).unwrap();
        assert!((r - 0.25).abs() < 2.0 / 256.0);
    }

    #[test]
    fn radius_of_full_domain() {
        let l = LabelField::uniform(GridSpec::square(16).unwrap(), 2, 1).unwrap();
        assert!((disk_radius(&l, 1).unwrap() - (1.0 / PI).sqrt()).abs() < 1e-15);
        assert!(matches!(disk_radius(&l, 0), Err(Error::EmptyPhase(0))));
    }

    #[test]
    fn stripe_length() {
        let grid = GridSpec::square(64).unwrap();
        let l = LabelField::from_fn(grid, 2, |x| u8::from(x[0] < 0.5)).unwrap();
        let m = interface_length(&l, 0, 1).unwrap();
        assert!((m.length - 2.0).abs() < 2.0 / 64.0);
    }

    #[test]
    fn disk_circumference() {
        let m = interface_length(&disk(256, 0.25), 1, 0).unwrap();
        let target = 2.0 * PI * 0.25;
        assert!((m.length / target - 1.0).abs() < 0.03, "{}", m.length);
    }

    #[test]
    fn circumference_error_shrinks_under_refinement() {
        let target = 2.0 * PI * 0.25;
        let errs: Vec<f64> = [64, 128, 256, 512]
            .iter()
            .map(|&n| (interface_length(&disk(n, 0.25), 0, 1).unwrap().length - target).abs())
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..=2.4).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn no_contact_has_zero_length() {
        let l = disk(64, 0.2);
        let l3 = LabelField::new(l.grid().clone(), 3, l.labels().to_vec()).unwrap();
        assert_eq!(interface_length(&l3, 1, 2).unwrap().length, 0.0);
    }

    #[test]
    fn segments_stay_near_label_changes() {
        let l = disk(64, 0.3);
        let h = l.grid().spacing(0);
        for s in interface_length(&l, 0, 1).unwrap().segments {
            let m = s.midpoint();
            let r = (m[0] - 0.5).hypot(m[1] - 0.5);
            assert!((r - 0.3).abs() < 1.5 * h);
        }
    }

    #[test]
    fn face_area_of_slab() {
        let grid = GridSpec::new(&[16, 16, 16]).unwrap();
        let l = LabelField::from_fn(grid, 2, |x| u8::from(x[2] < 0.5)).unwrap();
        assert!((interface_length(&l, 0, 1).unwrap().length - 2.0).abs() < 1e-12);
        assert!((disk_radius(&l, 1).unwrap() - (3.0 * 0.5 / (4.0 * PI)).cbrt()).abs() < 1e-12);
    }

    #[test]
    fn young_angles_examples() {
        let eq = young_angles(1.0, 1.0, 1.0).unwrap();
        for a in eq {
            assert!((a - 120.0).abs() < 1e-9);
        }
        let t = young_angles(1.0, 1.0, 1.2).unwrap();
        assert!((t[0] - 106.260).abs() < 1e-3);
        assert!((t[1] - 126.870).abs() < 1e-3);
        assert!((t[2] - 126.870).abs() < 1e-3);
        assert!((t[1].to_radians().cos() + 0.6).abs() < 1e-12);
        assert!(force_balance_residual(1.0, 1.0, 1.2, t) < 1e-10);
        assert!(matches!(
            young_angles(1.0, 1.0, 2.5),
            Err(Error::InadmissibleTensions(..))
        ));
    }

    #[test]
    fn young_angles_balance_forces() {
        for &(a, b, c) in &[(1.0, 1.3, 0.7), (0.5, 0.9, 1.2), (2.0, 1.5, 1.1)] {
            let t = young_angles(a, b, c).unwrap();
            assert!((t.iter().sum::<f64>() - 360.0).abs() < 1e-9);
            assert!(force_balance_residual(a, b, c, t) < 1e-10);
        }
    }

    #[test]
    fn mercedes_junction_angles() {
        let l = sectors(256, [120.0, 120.0, 120.0]);
        let reports = junction_angles(&l, JUNCTION_WINDOW).unwrap();
        let j = nearest_center(&reports);
        assert!((j.location[0] - 0.5).abs() < 0.01 && (j.location[1] - 0.5).abs() < 0.01);
        for a in j.angles {
            assert!((a - 120.0).abs() < 2.0, "{:?}", j.angles);
        }
        assert!((j.angles.iter().sum::<f64>() - 360.0).abs() < 1e-9);
    }

    #[test]
    fn unequal_sectors_are_attributed_to_their_phase() {
        let l = sectors(256, [100.0, 130.0, 130.0]);
        let j = nearest_center(&junction_angles(&l, JUNCTION_WINDOW).unwrap()).clone();
        assert!((j.angle_of(0).unwrap() - 100.0).abs() < 2.0, "{:?}", j.angles);
        assert!((j.angle_of(1).unwrap() - 130.0).abs() < 2.0, "{:?}", j.angles);
        let r = rotate90(&l);
        let jr = nearest_center(&junction_angles(&r, JUNCTION_WINDOW).unwrap()).clone();
        for k in 0..3 {
            assert!((j.angles[k] - jr.angles[k]).abs() < 2.0);
        }
    }

    #[test]
    fn two_phase_field_has_no_junctions() {
        assert!(junction_angles(&disk(64, 0.3), 8).unwrap().is_empty());
    }

    #[test]
    fn fit_recovers_linear_law() {
        let samples: Vec<(usize, f64, f64)> = (0..40)
            .map(|k| {
                let t = k as f64 * 1e-3;
                (k, t, (0.09 - 2.0 * t).sqrt())
            })
            .collect();
        let fit = fit_squared_radius(&samples, 0.05).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-9);
        assert!(fit.residual < 1e-12);
        assert!(matches!(
            fit_squared_radius(&samples[..12], 0.05),
            Err(Error::WindowTooShort { .. })
        ));
    }
}
