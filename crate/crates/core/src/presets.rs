//! Initial labellings for runs and experiments.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{GridSpec, LabelField};

pub const PRESET_NAMES: [&str; 5] = ["disk", "stripe", "mercedes", "voronoi", "raw"];

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Ball of phase `inside` in phase `outside`.
    Disk {
        radius: f64,
        center: Vec<f64>,
        inside: usize,
        outside: usize,
    },
    /// Slab `offset <= x_axis < offset + width` of phase `inside`.
    Stripe {
        axis: usize,
        offset: f64,
        width: f64,
        inside: usize,
        outside: usize,
    },
    /// Three 120 degree sectors about `center` (2D only). `phases[k]` fills
    /// the sector starting at `90 + rotation + 120 k` degrees, angles measured
    /// from the first axis towards the second.
    Mercedes {
        center: [f64; 2],
        phases: [usize; 3],
        rotation: f64,
    },
    /// Periodic Voronoi cells of `seeds` uniform points; seed `k` gets phase
    /// `k mod N`.
    Voronoi { seeds: usize, seed: u64 },
    /// Label snapshot on disk.
    Raw { path: PathBuf },
}

impl InitialCondition {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Disk { .. } => "disk",
            Self::Stripe { .. } => "stripe",
            Self::Mercedes { .. } => "mercedes",
            Self::Voronoi { .. } => "voronoi",
            Self::Raw { .. } => "raw",
        }
    }

    pub fn build(&self, grid: &GridSpec, num_phases: usize) -> Result<LabelField> {
        let phase = |p: usize| -> Result<u8> {
            if p < num_phases {
                Ok(p as u8)
            } else {
                Err(Error::PhaseIndex {
                    phase: p,
                    num_phases,
                })
            }
        };
        match self {
            Self::Disk {
                radius,
                center,
                inside,
                outside,
            } => {
                if center.len() != grid.dim() {
                    return Err(Error::Dimension(format!(
                        "disk center has {} coordinates on a {}D grid",
                        center.len(),
                        grid.dim()
                    )));
                }
                let (i, o) = (phase(*inside)?, phase(*outside)?);
                LabelField::from_fn(grid.clone(), num_phases, |x| {
                    let r2: f64 = x
                        .iter()
                        .zip(center)
                        .map(|(a, c)| {
                            let d = a - c;
                            (d - d.round()).powi(2)
                        })
                        .sum();
                    if r2 < radius * radius {
                        i
                    } else {
                        o
                    }
                })
            }
            Self::Stripe {
                axis,
                offset,
                width,
                inside,
                outside,
            } => {
                if *axis >= grid.dim() {
                    return Err(Error::Dimension(format!("stripe axis {axis} on a {}D grid", grid.dim())));
                }
                let (i, o) = (phase(*inside)?, phase(*outside)?);
                LabelField::from_fn(grid.clone(), num_phases, |x| {
                    if (x[*axis] - offset).rem_euclid(1.0) < *width {
                        i
                    } else {
                        o
                    }
                })
            }
            Self::Mercedes {
                center,
                phases,
                rotation,
            } => {
                if grid.dim() != 2 {
                    return Err(Error::UnsupportedDimension(grid.dim()));
                }
                let p = [phase(phases[0])?, phase(phases[1])?, phase(phases[2])?];
                LabelField::from_fn(grid.clone(), num_phases, |x| {
                    let t = (x[1] - center[1]).atan2(x[0] - center[0]).to_degrees();
                    p[((t - 90.0 - rotation).rem_euclid(360.0) / 120.0) as usize % 3]
                })
            }
            Self::Voronoi { seeds, seed } => voronoi(grid, num_phases, *seeds, *seed),
            Self::Raw { path } => {
                let (labels, _) = crate::io::read_labels(path)?;
                if labels.grid() != grid || labels.num_phases() != num_phases {
                    return Err(Error::Dimension(format!(
                        "{} holds {:?} with {} phases, config expects {:?} with {num_phases}",
                        path.display(),
                        labels.grid().sizes(),
                        labels.num_phases(),
                        grid.sizes()
                    )));
                }
                Ok(labels)
            }
        }
    }
}

fn voronoi(grid: &GridSpec, num_phases: usize, seeds: usize, seed: u64) -> Result<LabelField> {
    if seeds < num_phases {
        return Err(Error::Dimension(format!(
            "voronoi needs at least one seed per phase: {seeds} seeds for {num_phases} phases"
        )));
    }
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..seeds)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    // Bucket the seeds so each cell only scans nearby ones.
    let buckets_per_axis = ((seeds as f64).powf(1.0 / d as f64).floor() as usize).max(1);
    let bucket_of = |x: &[f64]| -> Vec<usize> {
        x.iter()
            .map(|&v| ((v * buckets_per_axis as f64) as usize).min(buckets_per_axis - 1))
            .collect()
    };
    let flat = |b: &[usize]| b.iter().fold(0, |acc, &v| acc * buckets_per_axis + v);
    let mut buckets = vec![Vec::new(); buckets_per_axis.pow(d as u32)];
    for (k, p) in points.iter().enumerate() {
        buckets[flat(&bucket_of(p))].push(k);
    }
    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let t = x - y;
                (t - t.round()).powi(2)
            })
            .sum()
    };
    let width = 1.0 / buckets_per_axis as f64;
    let labels = (0..grid.len())
        .map(|c| {
            let x = grid.center(c);
            let home = bucket_of(&x);
            let mut best = (f64::INFINITY, usize::MAX);
            let mut ring = 0usize;
            loop {
                // Scan the shell of buckets at Chebyshev distance `ring`.
                let span = (2 * ring + 1).min(buckets_per_axis);
                let mut offsets = vec![vec![]];
                for _ in 0..d {
                    offsets = offsets
                        .into_iter()
                        .flat_map(|o: Vec<isize>| {
                            (0..span as isize).map(move |k| {
                                let mut o = o.clone();
                                o.push(k - ring as isize);
                                o
                            })
                        })
                        .collect();
                }
                for o in offsets {
                    if ring > 0 && 2 * ring < buckets_per_axis && o.iter().all(|v| v.unsigned_abs() < ring) {
                        continue;
                    }
                    let b: Vec<usize> = home
                        .iter()
                        .zip(&o)
                        .map(|(&h, &v)| (h as isize + v).rem_euclid(buckets_per_axis as isize) as usize)
                        .collect();
                    for &k in &buckets[flat(&b)] {
                        let d2 = dist2(&x, &points[k]);
                        if d2 < best.0 || (d2 == best.0 && k < best.1) {
                            best = (d2, k);
                        }
                    }
                }
                // Every unscanned seed is at least `ring * width` away.
                let covered = 2 * ring + 1 >= buckets_per_axis;
                if covered || (best.1 != usize::MAX && best.0.sqrt() <= ring as f64 * width) {
                    break;
                }
                ring += 1;
            }
            (best.1 % num_phases) as u8
        })
        .collect();
    LabelField::new(grid.clone(), num_phases, labels)
}
