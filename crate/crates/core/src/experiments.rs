//! Delay, density and power scans over the three-pulse experiment, and the
//! extraction of the generated-signal efficiency from exit envelopes.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atom::{AtomSpec, DensityMatrix};
use crate::error::{Error, Result};
use crate::propagation::{
    propagate_sequence, MediumSpec, PropagationGrid, PropagationOptions, PropagationResult,
    CELL_LENGTH, REFERENCE_DENSITY,
};
use crate::pulses::{ExperimentTiming, SequenceSpec};

/// Depth `β = ηL/γ` of both channels at the reference density.
///
/// Frozen from a one-time bisection (`calibrate_depth`, target 0.37, default
/// experiment at zero delay, nz = 100, dt = 0.05 ns), rounded to 0.1; the
/// default experiment gives 0.370 with it. Rerun
/// `cargo test -p raman-core --test calibration -- --ignored` to reproduce.
pub const CALIBRATED_DEPTH: f64 = 13.7;

/// Efficiencies outside `[0, MAX_EFFICIENCY]` indicate a numerical failure.
pub const MAX_EFFICIENCY: f64 = 1.5;

/// The power-dependence claim: half power keeps ≥ 80% of the full-power
/// efficiency, 5% power keeps < 50%.
pub const HALF_POWER_MIN_RATIO: f64 = 0.8;
pub const LOW_POWER_MAX_RATIO: f64 = 0.5;

/// Pre-pulse ground-state populations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub pop_b: f64,
    pub pop_c: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState {
            pop_b: 0.5,
            pop_c: 0.5,
        }
    }
}

impl InitialState {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pop_b", self.pop_b), ("pop_c", self.pop_c)] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::invalid(
                    name,
                    format!("must lie in [0, 1] (got {v})"),
                ));
            }
        }
        if self.pop_b + self.pop_c > 1.0 + 1e-12 {
            return Err(Error::invalid("pop_c", "populations sum to more than 1"));
        }
        Ok(())
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        DensityMatrix::ground_mixture(self.pop_b, self.pop_c)
    }
}

/// Everything one propagation of the experiment needs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Experiment {
    pub atom: AtomSpec,
    pub timing: ExperimentTiming,
    pub medium: MediumSpec,
    pub grid: PropagationGrid,
    pub initial: InitialState,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            atom: AtomSpec::default(),
            timing: ExperimentTiming::default(),
            medium: MediumSpec::from_depth(REFERENCE_DENSITY, CELL_LENGTH, CALIBRATED_DEPTH),
            grid: PropagationGrid::default(),
            initial: InitialState::default(),
        }
    }
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.atom.validate().map_err(|e| e.within("atom"))?;
        self.timing.validate().map_err(|e| e.within("sequence"))?;
        self.medium.validate().map_err(|e| e.within("medium"))?;
        self.grid.validate().map_err(|e| e.within("grid"))?;
        self.initial.validate().map_err(|e| e.within("initial"))?;
        Ok(())
    }

    pub fn sequence(&self) -> Result<SequenceSpec> {
        self.timing.sequence().map_err(|e| e.within("sequence"))
    }

    pub fn window(&self) -> SignalWindow {
        SignalWindow::for_timing(&self.timing)
    }

    /// One propagation of the configured sequence.
    pub fn propagate(&self) -> Result<PropagationResult> {
        self.propagate_with(&PropagationOptions::default())
    }

    pub fn propagate_with(&self, options: &PropagationOptions) -> Result<PropagationResult> {
        self.validate()?;
        propagate_sequence(
            &self.sequence()?,
            &self.atom,
            &self.medium,
            &self.grid,
            &self.initial.density_matrix(),
            options,
        )
    }

    /// The full run, its probe-induced part and the resulting efficiency.
    ///
    /// The probe-induced part is the run with the probe minus an otherwise
    /// identical run without it. Both agree up to the probe's arrival, so the
    /// difference removes the transmitted coupling 2 and any emission left
    /// over from the couplings.
    pub fn simulate(&self, options: &PropagationOptions) -> Result<Simulation> {
        let run = self.propagate_with(options)?;
        let reference = Experiment {
            timing: self.timing.without_probe(),
            ..self.clone()
        }
        .propagate()?;
        let generated = PropagationResult {
            entry: run.entry.difference(&reference.entry)?,
            exit: run.exit.difference(&reference.exit)?,
            rho_snapshots: Vec::new(),
            convergence: None,
        };
        let window = self.window();
        if window.overlaps_coupling2(&self.sequence()?) {
            log::debug!(
                "coupling 2 reaches into the signal window at delay {} ns",
                self.timing.mutual_delay
            );
        }
        let efficiency = check_efficiency(extract_signal_amplitude(&generated, &window)?)?;
        Ok(Simulation {
            run,
            generated,
            window,
            efficiency,
        })
    }

    /// Probe-induced part of the exit fields; see [`Experiment::simulate`].
    pub fn generated(&self) -> Result<PropagationResult> {
        Ok(self.simulate(&PropagationOptions::default())?.generated)
    }

    /// Background-subtracted signal efficiency of this configuration.
    pub fn efficiency(&self) -> Result<f64> {
        Ok(self.simulate(&PropagationOptions::default())?.efficiency)
    }

    /// Canonical hash of the configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("experiment serializes");
        hex_digest(json.as_bytes())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn check_efficiency(eff: f64) -> Result<f64> {
    if eff.is_finite() && (0.0..=MAX_EFFICIENCY).contains(&eff) {
        Ok(eff)
    } else {
        Err(Error::Numerical(format!(
            "efficiency {eff} outside [0, {MAX_EFFICIENCY}]"
        )))
    }
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub run: PropagationResult,
    pub generated: PropagationResult,
    pub window: SignalWindow,
    pub efficiency: f64,
}

/// Analysis window on the a–b exit channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SignalWindow {
    pub t_start: f64,
    pub t_end: f64,
}

impl SignalWindow {
    pub fn new(t_start: f64, t_end: f64) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(Error::invalid(
                "window",
                format!("empty window [{t_start}, {t_end}]"),
            ));
        }
        Ok(SignalWindow { t_start, t_end })
    }

    /// From 5 ns before the probe switches on to 20 ns after it switches off.
    pub fn for_timing(timing: &ExperimentTiming) -> Self {
        let (on, off) = timing.probe_window();
        SignalWindow {
            t_start: on - 5.0,
            t_end: off + 20.0,
        }
    }

    /// Whether coupling 2 is above half-maximum somewhere inside the window.
    /// Background subtraction in [`Experiment::generated`] keeps such points
    /// usable.
    pub fn overlaps_coupling2(&self, seq: &SequenceSpec) -> bool {
        let (a, b) = seq.coupling2.half_max_interval();
        a < self.t_end && b > self.t_start
    }
}

/// `max_{τ∈window} |Ω_ab(L, τ)|` over the entry probe peak `max_{τ∈window} |Ω_ac(0, τ)|`.
pub fn extract_signal_amplitude(result: &PropagationResult, window: &SignalWindow) -> Result<f64> {
    let range = result.exit.indices_within(window.t_start, window.t_end);
    if range.is_empty() || window.t_end <= window.t_start {
        return Err(Error::invalid(
            "window",
            format!("no samples in [{}, {}] ns", window.t_start, window.t_end),
        ));
    }
    let signal = result.exit.samples()[range.clone()]
        .iter()
        .map(|s| s.omega_ab.norm())
        .fold(0.0, f64::max);
    let probe = result.entry.samples()[range]
        .iter()
        .map(|s| s.omega_ac.norm())
        .fold(0.0, f64::max);
    if signal == 0.0 {
        return Ok(0.0);
    }
    if probe == 0.0 {
        return Err(Error::Numerical("signal present without a probe".into()));
    }
    Ok(signal / probe)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Delay,
    Density,
    Power,
}

impl ScanKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScanKind::Delay => "delay",
            ScanKind::Density => "density",
            ScanKind::Power => "power",
        }
    }

    /// Default parameter grid of each scan.
    pub fn default_values(&self) -> Vec<f64> {
        match self {
            ScanKind::Delay => (-20..=20).map(|k| 5.0 * k as f64).collect(),
            ScanKind::Density => vec![0.4e11, 0.8e11, 1.0e11],
            ScanKind::Power => vec![0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub param: f64,
    pub efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanMetadata {
    pub kind: ScanKind,
    pub config_hash: String,
    pub nz: usize,
    pub dt: f64,
    pub t_end: f64,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    /// Sorted by `param`.
    pub records: Vec<ScanRecord>,
    pub metadata: ScanMetadata,
}

impl ScanResult {
    pub fn efficiency_at(&self, param: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.param == param)
            .map(|r| r.efficiency)
    }

    pub fn argmax(&self) -> Option<ScanRecord> {
        self.records
            .iter()
            .copied()
            .fold(None, |best: Option<ScanRecord>, r| match best {
                Some(b) if b.efficiency >= r.efficiency => Some(b),
                _ => Some(r),
            })
    }
}

/// Run `configure(base, value)` for every value on a pool of `threads`
/// workers (0 = all cores). The merged records are sorted by parameter, so the
/// output does not depend on scheduling.
fn run_scan<F>(
    kind: ScanKind,
    values: &[f64],
    base: &Experiment,
    threads: usize,
    configure: F,
) -> Result<ScanResult>
where
    F: Fn(&Experiment, f64) -> Experiment + Sync,
{
    base.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    let evaluated: Vec<Result<ScanRecord>> = pool.install(|| {
        values
            .par_iter()
            .map(|&param| {
                configure(base, param)
                    .efficiency()
                    .map(|efficiency| ScanRecord { param, efficiency })
                    .map_err(|e| Error::ScanPoint {
                        param,
                        source: Box::new(e),
                    })
            })
            .collect()
    });
    let mut records = evaluated.into_iter().collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.param.total_cmp(&b.param));

    let mut hasher = Sha256::new();
    hasher.update(kind.name());
    hasher.update(serde_json::to_string(base).expect("experiment serializes"));
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    let config_hash = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(ScanResult {
        records,
        metadata: ScanMetadata {
            kind,
            config_hash,
            nz: base.grid.nz,
            dt: base.grid.dt,
            t_end: base.grid.t_end,
            runtime_s: start.elapsed().as_secs_f64(),
        },
    })
}

/// Efficiency versus mutual delay between the couplings.
pub fn run_delay_scan(delays: &[f64], base: &Experiment, threads: usize) -> Result<ScanResult> {
    run_scan(ScanKind::Delay, delays, base, threads, |b, delay| {
        Experiment {
            timing: b.timing.with_delay(delay),
            ..b.clone()
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Both readings of the density dependence: amplitude (efficiency) and
/// intensity (efficiency²) against N, each fitted on log–log axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityFit {
    pub amplitude: FitResult,
    pub intensity: FitResult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityScan {
    pub scan: ScanResult,
    /// `None` when fewer than two positive points are available.
    pub fit: Option<DensityFit>,
}

/// Zero-delay efficiency versus atomic density, with η ∝ N.
pub fn run_density_scan(
    densities: &[f64],
    base: &Experiment,
    threads: usize,
) -> Result<DensityScan> {
    if let Some(&n) = densities.iter().find(|&&n| !(n.is_finite() && n > 0.0)) {
        return Err(Error::invalid(
            "scan.values",
            format!("densities must be > 0 (got {n})"),
        ));
    }
    let scan = run_scan(ScanKind::Density, densities, base, threads, |b, density| {
        Experiment {
            medium: b.medium.with_density(density),
            timing: b.timing.with_delay(0.0),
            ..b.clone()
        }
    })?;
    let fit = density_fit(&scan.records);
    if fit.is_none() {
        log::warn!("density fit needs at least two points with non-zero efficiency");
    }
    Ok(DensityScan { scan, fit })
}

pub fn density_fit(records: &[ScanRecord]) -> Option<DensityFit> {
    let amplitude: Vec<(f64, f64)> = records.iter().map(|r| (r.param, r.efficiency)).collect();
    let intensity: Vec<(f64, f64)> = amplitude.iter().map(|&(n, e)| (n, e * e)).collect();
    Some(DensityFit {
        amplitude: fit_power_law(&amplitude).ok()?,
        intensity: fit_power_law(&intensity).ok()?,
    })
}

/// Zero-delay efficiency versus pulse power. Every peak Rabi frequency is
/// scaled by `√scale`.
pub fn run_power_scan(scales: &[f64], base: &Experiment, threads: usize) -> Result<ScanResult> {
    if let Some(&s) = scales.iter().find(|&&s| !(s > 0.0 && s <= 1.0)) {
        return Err(Error::invalid(
            "scan.values",
            format!("power scale factors must lie in (0, 1] (got {s})"),
        ));
    }
    run_scan(ScanKind::Power, scales, base, threads, |b, scale| {
        Experiment {
            timing: b.timing.with_scaled_peaks(scale.sqrt()).with_delay(0.0),
            ..b.clone()
        }
    })
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::invalid(
            "points",
            format!("need at least 2 points (got {})", points.len()),
        ));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|&&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::invalid(
            "points",
            format!("values must be positive (got ({x}, {y}))"),
        ));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("points", "all x values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
    })
}

/// Outcome of comparing a power scan with the power-dependence claim.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerCheck {
    pub half_power_ratio: f64,
    pub low_power_ratio: f64,
    pub passed: bool,
}

/// Needs records at scale 1.0, 0.5 and 0.05.
pub fn power_dependence_check(scan: &ScanResult) -> Option<PowerCheck> {
    let full = scan.efficiency_at(1.0)?;
    if full <= 0.0 {
        return None;
    }
    let half_power_ratio = scan.efficiency_at(0.5)? / full;
    let low_power_ratio = scan.efficiency_at(0.05)? / full;
    Some(PowerCheck {
        half_power_ratio,
        low_power_ratio,
        passed: half_power_ratio >= HALF_POWER_MIN_RATIO && low_power_ratio < LOW_POWER_MAX_RATIO,
    })
}

/// Bisect the shared depth β in `[lo, hi]` until the zero-delay efficiency of
/// `base` matches `target` to `tolerance`. Assumes the efficiency rises with β
/// across the bracket.
pub fn calibrate_depth(
    base: &Experiment,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tolerance: f64,
) -> Result<f64> {
    let at = |beta: f64| {
        let medium = MediumSpec::from_depth(base.medium.density, base.medium.length, beta);
        Experiment {
            medium,
            timing: base.timing.with_delay(0.0),
            ..base.clone()
        }
        .efficiency()
    };
    let (e_lo, e_hi) = (at(lo)?, at(hi)?);
    if !(e_lo <= target && target <= e_hi) {
        return Err(Error::Numerical(format!(
            "target {target} not bracketed: efficiency {e_lo} at beta {lo}, {e_hi} at beta {hi}"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let e = at(mid)?;
        log::info!("calibration: beta = {mid:.6} -> efficiency {e:.6}");
        if (e - target).abs() <= tolerance {
            return Ok(mid);
        }
        if e < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
