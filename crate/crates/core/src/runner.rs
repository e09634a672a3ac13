//! Executes a resolved configuration and writes its run directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::Result;
use crate::experiments::RunMonitor;
use crate::field::LabelField;
use crate::io::{write_labels, write_pgm, write_probes, MetricsWriter};
use crate::presets::InitialCondition;
use crate::probes::{disk_radius, interface_length, junction_angles, young_angles, ProbeRecord, JUNCTION_WINDOW};
use crate::scheme::{run_with_observer, Flow};

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub steps: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub monitor: RunMonitor,
    pub warnings: Vec<String>,
    pub probes: usize,
}

fn snapshot(dir: &Path, name: &str, labels: &LabelField, step: usize, time: f64, pgm: bool) -> Result<()> {
    write_labels(&dir.join(name), labels, step, time)?;
    if pgm && labels.grid().dim() == 2 {
        write_pgm(&dir.join(format!("{name}.pgm")), labels)?;
    }
    Ok(())
}

/// Measurements of `labels` with analytic targets where the preset has one.
pub fn measure(cfg: &RunConfig, labels: &LabelField, step: usize, time: f64) -> Result<Vec<ProbeRecord>> {
    let mut out = Vec::new();
    let n = labels.num_phases();
    let sigma = cfg.material.sigma();
    let mu = cfg.material.mu();
    if let InitialCondition::Disk {
        radius,
        inside,
        outside,
        ..
    } = &cfg.initial
    {
        if labels.volumes()[*inside] > 0 && labels.grid().dim() == 2 {
            let rate = 2.0 * sigma[(*inside, *outside)] * mu[(*inside, *outside)];
            let target = (radius * radius - rate * time).max(0.0).sqrt();
            out.push(ProbeRecord::new("disk_radius", step, disk_radius(labels, *inside)?, target));
        }
    }
    if labels.grid().dim() != 2 {
        return Ok(out);
    }
    for i in 0..n {
        for j in i + 1..n {
            let m = interface_length(labels, i, j)?;
            if m.length > 0.0 {
                out.push(ProbeRecord::new(format!("interface_length_{i}_{j}"), step, m.length, f64::NAN));
            }
        }
    }
    if let InitialCondition::Mercedes { center, phases, .. } = &cfg.initial {
        let [p, q, r] = *phases;
        let target = young_angles(sigma[(p, q)], sigma[(p, r)], sigma[(q, r)]).ok();
        let mut sorted = *phases;
        sorted.sort_unstable();
        let central = junction_angles(labels, JUNCTION_WINDOW)?
            .into_iter()
            .filter(|j| j.phases == sorted)
            .min_by(|a, b| {
                let d = |l: [f64; 2]| (l[0] - center[0]).hypot(l[1] - center[1]);
                d(a.location).total_cmp(&d(b.location))
            });
        if let Some(j) = central {
            for (k, &phase) in phases.iter().enumerate() {
                let value = j.angle_of(phase).unwrap_or(f64::NAN);
                let t = target.map_or(f64::NAN, |t| t[k]);
                out.push(ProbeRecord::new(format!("junction_angle_{phase}"), step, value, t));
            }
        }
    }
    Ok(out)
}

/// Runs `cfg`, writing `config.echo`, `metrics.csv`, periodic and final
/// snapshots, and `probes.csv` when requested.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.echo"), cfg.echo())?;
    let initial = cfg.initial.build(&cfg.grid, cfg.material.num_phases())?;
    let pgm = cfg.output.pgm;
    snapshot(&dir, "snapshot_000000", &initial, 0, 0.0, pgm)?;
    let mut metrics = MetricsWriter::create(&dir.join("metrics.csv"), initial.num_phases())?;
    let mut monitor = RunMonitor::default();
    let mut probes = Vec::new();
    if cfg.output.probes {
        probes.extend(measure(cfg, &initial, 0, 0.0)?);
    }
    let every = cfg.scheme.record_every;
    let mut last = (0, 0.0);
    let trajectory = run_with_observer(&initial, &cfg.coeffs, &cfg.scheme, |report, labels| {
        metrics.write(report)?;
        monitor.observe(report, labels);
        last = (report.step, report.energy_after.total);
        if every > 0 && report.step % every == 0 {
            snapshot(&dir, &format!("snapshot_{:06}", report.step), labels, report.step, report.time, pgm)?;
            if cfg.output.probes {
                probes.extend(measure(cfg, labels, report.step, report.time)?);
            }
        }
        Ok(Flow::Continue)
    })?;
    metrics.finish()?;
    let steps = trajectory.steps_taken;
    let time = steps as f64 * cfg.scheme.h;
    snapshot(&dir, "final", &trajectory.final_state, steps, time, pgm)?;
    if cfg.output.probes {
        if every == 0 || steps % every != 0 {
            probes.extend(measure(cfg, &trajectory.final_state, steps, time)?);
        }
        write_probes(&dir.join("probes.csv"), &probes)?;
    }
    let initial_energy = trajectory.initial_energy.total;
    Ok(RunSummary {
        dir,
        steps,
        initial_energy,
        final_energy: if steps == 0 { initial_energy } else { last.1 },
        monitor,
        warnings: trajectory.warnings,
        probes: probes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const SMALL: &str = r#"
[material]
N = 2
sigma = [[0, 1], [1, 0]]
mu = [[0, 1], [1, 0]]

[grid]
dim = 2
sizes = [32, 32]

[scheme]
h = 2e-3
steps = 6
record_every = 3

[initial]
kind = "disk"
radius = 0.3

[output]
probes = true
"#;

    #[test]
    fn run_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse_config(SMALL).unwrap();
        cfg.set_output_dir(dir.path().join("out"));
        let s = execute(&cfg).unwrap();
        assert_eq!(s.steps, 6);
        assert_eq!(s.monitor.ledger_violations, 0);
        for f in [
            "config.echo",
            "metrics.csv",
            "probes.csv",
            "final.hdr",
            "final.raw",
            "final.pgm",
            "snapshot_000003.hdr",
            "snapshot_000006.raw",
        ] {
            assert!(s.dir.join(f).exists(), "{f} missing");
        }
        let metrics = fs::read_to_string(s.dir.join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 7);
        let probes = fs::read_to_string(s.dir.join("probes.csv")).unwrap();
        assert!(probes.lines().any(|l| l.starts_with("disk_radius,6,")));
        assert!(probes.lines().any(|l| l.starts_with("interface_length_0_1,0,") && l.ends_with(",,")));
    }

    #[test]
    fn rerun_reproduces_labels() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse_config(SMALL).unwrap();
        cfg.set_output_dir(dir.path().join("a"));
        execute(&cfg).unwrap();
        let echoed = parse_config(&fs::read_to_string(dir.path().join("a/config.echo")).unwrap()).unwrap();
        let mut again = echoed;
        again.set_output_dir(dir.path().join("b"));
        execute(&again).unwrap();
        let a = fs::read(dir.path().join("a/final.raw")).unwrap();
        let b = fs::read(dir.path().join("b/final.raw")).unwrap();
        assert_eq!(a, b);
    }
}
