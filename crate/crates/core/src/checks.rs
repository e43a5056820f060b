//! Analytic oracles for the single-atom dynamics, runnable without a config.

use serde::Serialize;

use crate::atom::{evolve, evolve_with, AtomSpec, DensityMatrix, FieldSample, Level, GAMMA};
use crate::error::Result;
use crate::pulses::{
    adiabaticity_metric, build_channel_envelopes, fstirap_sequence, stirap_sequence,
    EXPERIMENT_RABI,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// Measured quantity; compare with `limit` as described in `criterion`.
    pub value: f64,
    pub limit: f64,
    pub criterion: &'static str,
    pub passed: bool,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {}: {:.6e} ({})",
            self.name, self.value, self.criterion
        )
    }
}

fn below(name: &'static str, value: f64, limit: f64, criterion: &'static str) -> CheckOutcome {
    CheckOutcome {
        name,
        value,
        limit,
        criterion,
        passed: value <= limit,
    }
}

fn under(name: &'static str, value: f64, limit: f64, criterion: &'static str) -> CheckOutcome {
    CheckOutcome {
        name,
        value,
        limit,
        criterion,
        passed: value < limit,
    }
}

fn above(name: &'static str, value: f64, limit: f64, criterion: &'static str) -> CheckOutcome {
    CheckOutcome {
        name,
        value,
        limit,
        criterion,
        passed: value >= limit,
    }
}

pub const ORACLE_DT: f64 = 0.05;

/// Constant resonant field on a–b, atom starting in `b`, no relaxation:
/// `ρ_aa = sin²(Ωτ)`. Returns the largest deviation over `periods` periods.
pub fn rabi_error(omega: f64, periods: usize, dt: f64) -> Result<f64> {
    let steps = (periods as f64 * std::f64::consts::PI / omega / dt).ceil() as usize;
    let fields = vec![FieldSample::real(0.0, omega); steps + 1];
    let mut worst = 0.0f64;
    evolve_with(
        &DensityMatrix::pure_level(Level::B),
        &fields,
        &AtomSpec::closed(),
        dt,
        |k, rho| {
            let exact = (omega * k as f64 * dt).sin().powi(2);
            worst = worst.max((rho.population(Level::A) - exact).abs());
        },
    )?;
    Ok(worst)
}

/// No fields, atom starting in `a`, no repopulation: `ρ_aa = e^{−γτ}`.
pub fn decay_error(duration: f64, dt: f64) -> Result<f64> {
    let steps = (duration / dt).round() as usize;
    let atom = AtomSpec {
        repopulation: false,
        ..AtomSpec::default()
    };
    let mut worst = 0.0f64;
    evolve_with(
        &DensityMatrix::pure_level(Level::A),
        &vec![FieldSample::ZERO; steps + 1],
        &atom,
        dt,
        |k, rho| {
            let exact = (-atom.gamma_a * k as f64 * dt).exp();
            worst = worst.max((rho.population(Level::A) - exact).abs());
        },
    )?;
    Ok(worst)
}

/// Final `ρ_cc` of a Gaussian STIRAP pair on a closed atom starting in `b`.
pub fn stirap_transfer(peak: f64, width: f64, separation: f64, dt: f64) -> Result<f64> {
    let seq = stirap_sequence(peak, width, separation)?;
    let env = build_channel_envelopes(&seq, dt, (seq.minimal_window() / dt).ceil() * dt)?;
    let trajectory = evolve(
        &DensityMatrix::pure_level(Level::B),
        env.samples(),
        &AtomSpec::closed(),
        dt,
    )?;
    Ok(trajectory
        .last()
        .map_or(0.0, |rho| rho.population(Level::C)))
}

/// Final `|ρ_bc|` after fractional STIRAP from `b` on `atom`.
pub fn fstirap_coherence(peak: f64, width: f64, atom: &AtomSpec, dt: f64) -> Result<f64> {
    let seq = fstirap_sequence(peak, width)?;
    let env = build_channel_envelopes(&seq, dt, (seq.minimal_window() / dt).ceil() * dt)?;
    let trajectory = evolve(
        &DensityMatrix::pure_level(Level::B),
        env.samples(),
        atom,
        dt,
    )?;
    Ok(trajectory
        .last()
        .map_or(0.0, |rho| rho.element(Level::B, Level::C).norm()))
}

/// STIRAP pair used by the transfer checks: FWHM 70 ns, centres 42 ns apart
/// (overlap 28 ns, metric ≈ 14.7 at 10γ). Transfer is not monotone in the
/// separation at fixed width; this pair sits well inside the plateau.
pub const STIRAP_WIDTH: f64 = 70.0;
pub const STIRAP_SEPARATION: f64 = 42.0;
/// f-STIRAP width at which the shared edge is adiabatic at 10γ.
pub const FSTIRAP_WIDTH: f64 = 40.0;

/// The single-atom oracle suite at the experiment's Rabi frequency.
pub fn run_all() -> Result<Vec<CheckOutcome>> {
    let omega = EXPERIMENT_RABI;
    let metric =
        adiabaticity_metric(&stirap_sequence(omega, STIRAP_WIDTH, STIRAP_SEPARATION)?).metric;
    Ok(vec![
        below(
            "rabi",
            rabi_error(omega, 10, ORACLE_DT)?,
            1e-6,
            "max |rho_aa - sin^2(Omega t)| over 10 periods <= 1e-6",
        ),
        below(
            "decay",
            decay_error(10.0 / GAMMA, ORACLE_DT)?,
            1e-8,
            "max |rho_aa - exp(-gamma t)| <= 1e-8",
        ),
        above(
            "stirap_metric",
            metric,
            10.0,
            "adiabaticity metric of the transfer pair >= 10",
        ),
        above(
            "stirap_transfer",
            stirap_transfer(omega, STIRAP_WIDTH, STIRAP_SEPARATION, ORACLE_DT)?,
            0.99,
            "counter-intuitive order: final rho_cc >= 0.99",
        ),
        under(
            "stirap_reversed",
            stirap_transfer(omega, STIRAP_WIDTH, -STIRAP_SEPARATION, ORACLE_DT)?,
            0.9,
            "intuitive order: final rho_cc < 0.9",
        ),
        above(
            "fstirap_coherence",
            fstirap_coherence(omega, FSTIRAP_WIDTH, &AtomSpec::closed(), ORACLE_DT)?,
            0.49,
            "fractional STIRAP: final |rho_bc| >= 0.49",
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rabi_error_shrinks_with_the_step() {
        let coarse = rabi_error(EXPERIMENT_RABI, 2, 0.1).unwrap();
        let fine = rabi_error(EXPERIMENT_RABI, 2, 0.05).unwrap();
        assert!(fine < coarse / 8.0, "{coarse:e} -> {fine:e}");
    }

    #[test]
    fn display_names_the_verdict() {
        let c = below("x", 1.0, 2.0, "x <= 2");
        assert!(c.to_string().starts_with("PASS x"));
        assert!(!above("y", 1.0, 2.0, "y >= 2").passed);
    }
}
