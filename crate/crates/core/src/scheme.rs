//! The modified thresholding scheme: smooth each phase at two Gaussian time
//! scales, form the comparison functions, and relabel every cell by the phase
//! with the smallest comparison value.

use crate::convolution::{KernelOperator, Smoothed};
use crate::energy::{label_distance_sq, label_energy, EnergyBreakdown, Event, StepReport};
use crate::error::{Error, Result};
use crate::field::{GridSpec, LabelField, PhaseStack, ScalarField};
use crate::kernel::{check_scheme_coefficients, KernelCoefficients};

/// Rule for cells where several phases attain the minimal comparison value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Smallest phase index among exact minimizers.
    #[default]
    LowestIndex,
}

impl std::str::FromStr for TieBreak {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest-index" | "lowest_index" | "lowest" => Ok(Self::LowestIndex),
            other => Err(Error::Format(format!(
                "unknown tie_break rule {other:?}; available: lowest-index"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub h: f64,
    pub steps: usize,
    pub tie_break: TieBreak,
    /// Keep a snapshot every this many steps; 0 keeps none besides the final state.
    pub record_every: usize,
    /// Retain every [`StepReport`] in the trajectory (observers see them regardless).
    pub keep_reports: bool,
}

impl SchemeConfig {
    pub fn new(h: f64, steps: usize) -> Self {
        Self {
            h,
            steps,
            tie_break: TieBreak::LowestIndex,
            record_every: 0,
            keep_reports: true,
        }
    }
}

/// Result of the kernel resolution check.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    Resolved,
    /// `sqrt(beta h)` below two grid spacings: runs, but interfaces may pin.
    Marginal(String),
}

/// Hard error when `sqrt(beta h) < spacing / 2`, warning below `2 * spacing`.
pub fn check_resolution(grid: &GridSpec, coeffs: &KernelCoefficients, h: f64) -> Result<Resolution> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::NonpositiveTime(h));
    }
    let width = (coeffs.beta * h).sqrt();
    let spacing = grid.max_spacing();
    if width < 0.5 * spacing {
        return Err(Error::Resolution { width, spacing });
    }
    if width < 2.0 * spacing {
        return Ok(Resolution::Marginal(format!(
            "kernel marginally resolved: sqrt(beta*h) = {width:.3e} < 2 * spacing = {:.3e}",
            2.0 * spacing
        )));
    }
    Ok(Resolution::Resolved)
}

/// Pointwise argmin of the comparison functions.
pub fn threshold_labels(psi: &PhaseStack, template: &LabelField, tie_break: TieBreak) -> LabelField {
    let TieBreak::LowestIndex = tie_break;
    let m = psi.cells;
    let mut best = psi.phase(0).to_vec();
    let mut labels = vec![0u8; m];
    for i in 1..psi.num_phases {
        for ((b, l), &v) in best.iter_mut().zip(labels.iter_mut()).zip(psi.phase(i)) {
            // Strict comparison keeps the earlier (lower) index on exact ties.
            if v < *b {
                *b = v;
                *l = i as u8;
            }
        }
    }
    LabelField::new(template.grid().clone(), template.num_phases(), labels)
        .expect("labels are valid phase indices")
}

/// Convolve, compare and threshold on a fixed grid with fixed coefficients.
pub struct Stepper {
    op: KernelOperator,
    tie_break: TieBreak,
    resolution: Resolution,
}

/// A labelling together with its smoothed indicators and comparison functions.
pub struct State {
    pub labels: LabelField,
    pub smoothed: Smoothed,
    pub psi: PhaseStack,
}

impl Stepper {
    pub fn new(grid: &GridSpec, coeffs: &KernelCoefficients, h: f64, tie_break: TieBreak) -> Result<Self> {
        let resolution = check_resolution(grid, coeffs, h)?;
        check_scheme_coefficients(coeffs)?;
        Ok(Self {
            op: KernelOperator::new(grid, coeffs, h)?,
            tie_break,
            resolution,
        })
    }

    pub fn resolution(&self) -> &Resolution {
        &self.resolution
    }

    pub fn operator(&self) -> &KernelOperator {
        &self.op
    }

    pub fn prepare(&self, labels: LabelField) -> Result<State> {
        if labels.grid() != self.op.grid() {
            return Err(Error::Dimension("labels live on a different grid".into()));
        }
        if labels.num_phases() != self.op.coeffs().num_phases() {
            return Err(Error::Dimension(format!(
                "labels have {} phases, coefficients {}",
                labels.num_phases(),
                self.op.coeffs().num_phases()
            )));
        }
        let smoothed = self.op.smooth(&PhaseStack::from_labels(&labels));
        let psi = self.op.comparisons(&smoothed);
        Ok(State {
            labels,
            smoothed,
            psi,
        })
    }

    pub fn advance(&self, state: &State) -> Result<State> {
        self.prepare(threshold_labels(&state.psi, &state.labels, self.tie_break))
    }

    pub fn energy(&self, state: &State) -> EnergyBreakdown {
        label_energy(&state.labels, &state.smoothed, self.op.coeffs(), self.op.h())
    }
}

/// One thresholding step; also returns the comparison functions of `labels`.
pub fn threshold_step(
    labels: &LabelField,
    coeffs: &KernelCoefficients,
    h: f64,
) -> Result<(LabelField, Vec<ScalarField>)> {
    let stepper = Stepper::new(labels.grid(), coeffs, h, TieBreak::LowestIndex)?;
    let state = stepper.prepare(labels.clone())?;
    let next = threshold_labels(&state.psi, &state.labels, TieBreak::LowestIndex);
    Ok((next, state.psi.to_fields(labels.grid())))
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: LabelField,
    pub initial_energy: EnergyBreakdown,
    /// `(step, labels)` at the configured cadence.
    pub snapshots: Vec<(usize, LabelField)>,
    pub reports: Vec<StepReport>,
    pub final_state: LabelField,
    pub steps_taken: usize,
    pub h: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn final_step(&self) -> usize {
        self.steps_taken
    }
}

pub fn run(
    initial: &LabelField,
    coeffs: &KernelCoefficients,
    cfg: &SchemeConfig,
) -> Result<Trajectory> {
    run_with_observer(initial, coeffs, cfg, |_, _| Ok(Flow::Continue))
}

/// Returned by run observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    /// End the run after the current step.
    Stop,
}

/// Runs up to `cfg.steps` thresholding steps, calling `observer` after each one.
pub fn run_with_observer(
    initial: &LabelField,
    coeffs: &KernelCoefficients,
    cfg: &SchemeConfig,
    mut observer: impl FnMut(&StepReport, &LabelField) -> Result<Flow>,
) -> Result<Trajectory> {
    let stepper = Stepper::new(initial.grid(), coeffs, cfg.h, cfg.tie_break)?;
    let mut warnings = Vec::new();
    if let Resolution::Marginal(msg) = stepper.resolution() {
        warnings.push(msg.clone());
    }
    let mut state = stepper.prepare(initial.clone())?;
    let initial_energy = stepper.energy(&state);
    let ledger_rhs = initial_energy.total;
    let mut energy = initial_energy.clone();
    let mut dissipation = 0.0;
    let mut volumes = initial.volumes();
    let mut reports = Vec::new();
    let mut snapshots = Vec::new();
    let mut steps_taken = 0;
    for step in 1..=cfg.steps {
        steps_taken = step;
        let next = stepper.advance(&state)?;
        let next_energy = stepper.energy(&next);
        let dist_sq = label_distance_sq(&state.labels, &next.labels, &state.psi, &next.psi, cfg.h);
        dissipation += dist_sq / (2.0 * cfg.h);
        let next_volumes = next.labels.volumes();
        let events = volumes
            .iter()
            .zip(&next_volumes)
            .enumerate()
            .filter(|(_, (&before, &after))| before > 0 && after == 0)
            .map(|(p, _)| Event::VanishedPhase(p))
            .collect();
        let report = StepReport {
            step,
            time: step as f64 * cfg.h,
            energy_before: energy,
            energy_after: next_energy.clone(),
            dist_sq,
            ledger_lhs: next_energy.total + dissipation,
            ledger_rhs,
            phase_volumes: next_volumes.clone(),
            events,
        };
        let flow = observer(&report, &next.labels)?;
        if cfg.keep_reports {
            reports.push(report);
        }
        if cfg.record_every > 0 && step % cfg.record_every == 0 {
            snapshots.push((step, next.labels.clone()));
        }
        energy = next_energy;
        volumes = next_volumes;
        state = next;
        if flow == Flow::Stop {
            break;
        }
    }
    Ok(Trajectory {
        initial: initial.clone(),
        initial_energy,
        snapshots,
        reports,
        final_state: state.labels,
        steps_taken,
        h: cfg.h,
        warnings,
    })
}
