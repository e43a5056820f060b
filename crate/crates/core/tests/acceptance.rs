//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use raman_core::atom::{evolve, AtomSpec, DensityMatrix, Level, GAMMA};
use raman_core::checks::{
    decay_error, fstirap_coherence, rabi_error, stirap_transfer, FSTIRAP_WIDTH, STIRAP_SEPARATION,
    STIRAP_WIDTH,
};
use raman_core::experiments::{
    power_dependence_check, run_delay_scan, run_density_scan, run_power_scan, Experiment, ScanKind,
};
use raman_core::output::scan_csv;
use raman_core::propagation::{MediumSpec, PropagationGrid, PropagationOptions};
use raman_core::pulses::{
    adiabaticity_metric, build_channel_envelopes, stirap_sequence, EXPERIMENT_RABI,
};
use raman_core::Result;

type Criterion = (&'static str, fn() -> Result<Verdict>);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn rabi() -> Result<Verdict> {
    let t = Instant::now();
    let err = rabi_error(EXPERIMENT_RABI, 10, 0.05)?;
    let el = t.elapsed();
    Ok(verdict(
        err <= 1e-6 && within(el, 1.0),
        format!("max |ρ_aa − sin²Ωτ| = {err:.2e} (≤ 1e-6), {el:.2?}"),
    ))
}

fn decay() -> Result<Verdict> {
    let t = Instant::now();
    let err = decay_error(10.0 / GAMMA, 0.05)?;
    let el = t.elapsed();
    Ok(verdict(
        err <= 1e-8 && within(el, 1.0),
        format!("max |ρ_aa − e^(−γτ)| = {err:.2e} (≤ 1e-8), {el:.2?}"),
    ))
}

fn stirap() -> Result<Verdict> {
    let t = Instant::now();
    let metric = adiabaticity_metric(&stirap_sequence(
        EXPERIMENT_RABI,
        STIRAP_WIDTH,
        STIRAP_SEPARATION,
    )?)
    .metric;
    let forward = stirap_transfer(EXPERIMENT_RABI, STIRAP_WIDTH, STIRAP_SEPARATION, 0.05)?;
    let reversed = stirap_transfer(EXPERIMENT_RABI, STIRAP_WIDTH, -STIRAP_SEPARATION, 0.05)?;
    let el = t.elapsed();
    Ok(verdict(
        metric >= 10.0 && forward >= 0.99 && reversed < 0.9 && within(el, 5.0),
        format!("metric {metric:.1}, ρ_cc {forward:.4} (≥ 0.99), reversed {reversed:.4} (< 0.9), {el:.2?}"),
    ))
}

fn fstirap() -> Result<Verdict> {
    let t = Instant::now();
    let c = fstirap_coherence(EXPERIMENT_RABI, FSTIRAP_WIDTH, &AtomSpec::closed(), 0.05)?;
    let el = t.elapsed();
    Ok(verdict(
        c >= 0.49 && within(el, 5.0),
        format!("|ρ_bc| = {c:.4} (≥ 0.49), {el:.2?}"),
    ))
}

fn delay_scan() -> Result<Verdict> {
    let t = Instant::now();
    let scan = run_delay_scan(&ScanKind::Delay.default_values(), &Experiment::default(), 0)?;
    let el = t.elapsed();
    let best = scan.argmax().expect("non-empty scan");
    let (lo, hi) = (
        scan.efficiency_at(-100.0).unwrap(),
        scan.efficiency_at(100.0).unwrap(),
    );
    Ok(verdict(
        best.param.abs() <= 5.0 && lo < 0.5 * best.efficiency && hi < 0.5 * best.efficiency && within(el, 600.0),
        format!(
            "max {:.4} at {} ns (0 ± 5), at −100 ns {:.3} and +100 ns {:.3} of max (< 0.5), {} points, {el:.1?}",
            best.efficiency,
            best.param,
            lo / best.efficiency,
            hi / best.efficiency,
            scan.records.len()
        ),
    ))
}

fn density_scan() -> Result<Verdict> {
    let t = Instant::now();
    let result = run_density_scan(
        &ScanKind::Density.default_values(),
        &Experiment::default(),
        0,
    )?;
    let el = t.elapsed();
    let effs: Vec<String> = result
        .scan
        .records
        .iter()
        .map(|r| format!("{:.3}", r.efficiency))
        .collect();
    Ok(match result.fit {
        Some(fit) => verdict(
            (fit.intensity.slope - 2.0).abs() <= 0.2 && within(el, 300.0),
            format!(
                "intensity slope {:.3} (2.0 ± 0.2), amplitude slope {:.3}, efficiencies [{}], {el:.1?}",
                fit.intensity.slope,
                fit.amplitude.slope,
                effs.join(", ")
            ),
        ),
        None => verdict(false, "no fit".into()),
    })
}

fn calibrated() -> Result<Verdict> {
    let t = Instant::now();
    let eff = Experiment::default().efficiency()?;
    let el = t.elapsed();
    Ok(verdict(
        (eff - 0.37).abs() <= 0.05 && within(el, 30.0),
        format!("efficiency {eff:.4} (0.37 ± 0.05), {el:.2?}"),
    ))
}

fn power() -> Result<Verdict> {
    let t = Instant::now();
    let scan = run_power_scan(&ScanKind::Power.default_values(), &Experiment::default(), 0)?;
    let el = t.elapsed();
    let check = power_dependence_check(&scan).expect("scan covers 1.0, 0.5 and 0.05");
    Ok(verdict(
        check.passed && within(el, 300.0),
        format!(
            "half power {:.3} of full (≥ 0.8), 5% power {:.3} of full (< 0.5), {el:.1?}",
            check.half_power_ratio, check.low_power_ratio
        ),
    ))
}

fn hygiene() -> Result<Verdict> {
    let t = Instant::now();
    let base = Experiment::default();

    // Per-step invariants along entry and exit slices of the default run.
    let nz = base.grid.nz;
    let run = base.propagate_with(&PropagationOptions {
        snapshots: vec![0, nz / 2, nz],
    })?;
    let (mut herm, mut trace, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for (_, trajectory) in &run.rho_snapshots {
        for rho in trajectory {
            herm = herm.max(rho.hermiticity_error());
            trace = trace.max((rho.trace() - 1.0).abs());
            min_eig = min_eig.min(rho.min_eigenvalue());
        }
    }
    let steps = run.entry.len() - 1;
    let trace_per_1000 = trace * 1000.0 / steps as f64;

    // Also a pure-state STIRAP run, where positivity is tightest.
    let seq = stirap_sequence(EXPERIMENT_RABI, STIRAP_WIDTH, STIRAP_SEPARATION)?;
    let env = build_channel_envelopes(&seq, 0.05, (seq.minimal_window() / 0.05).ceil() * 0.05)?;
    for rho in evolve(
        &DensityMatrix::pure_level(Level::B),
        env.samples(),
        &AtomSpec::closed(),
        0.05,
    )? {
        herm = herm.max(rho.hermiticity_error());
        min_eig = min_eig.min(rho.min_eigenvalue());
    }

    let order = rabi_error(EXPERIMENT_RABI, 4, 0.1)? / rabi_error(EXPERIMENT_RABI, 4, 0.05)?;

    let vacuum = Experiment {
        medium: MediumSpec {
            density: 0.0,
            eta_ac: 0.0,
            eta_ab: 0.0,
            ..base.medium
        },
        ..base.clone()
    }
    .propagate()?;
    let vacuum_err = vacuum.exit.difference(&vacuum.entry)?.max_abs();

    let eff = base.efficiency()?;
    let fine = Experiment {
        grid: PropagationGrid {
            nz: 2 * nz,
            ..base.grid.clone()
        },
        ..base
    }
    .efficiency()?;
    let nz_change = (fine - eff).abs() / eff;
    let el = t.elapsed();

    Ok(verdict(
        herm <= 1e-12
            && trace_per_1000 <= 1e-9
            && min_eig >= -1e-6
            && (12.0..=20.0).contains(&order)
            && vacuum_err <= 1e-12
            && nz_change < 0.01
            && within(el, 120.0),
        format!(
            "hermiticity {herm:.1e}, trace drift {trace_per_1000:.1e}/1000 steps, min eigenvalue {min_eig:.1e}, \
             RK4 order factor {order:.2}, vacuum {vacuum_err:.1e}, nz doubling {:.3}%, {el:.1?}",
            100.0 * nz_change
        ),
    ))
}

fn determinism() -> Result<Verdict> {
    let t = Instant::now();
    let base = Experiment {
        grid: PropagationGrid {
            nz: 20,
            ..Default::default()
        },
        ..Default::default()
    };
    let delays = [15.0, -20.0, 0.0, 5.0, -5.0, 100.0];
    let reference = scan_csv(&run_delay_scan(&delays, &base, 1)?.records);
    let mut identical = true;
    for threads in [1, 2, 4, 0] {
        identical &= scan_csv(&run_delay_scan(&delays, &base, threads)?.records) == reference;
    }
    let el = t.elapsed();
    Ok(verdict(
        identical,
        format!("delay-scan CSV byte-identical for threads 1, 2, 4 and all cores, {el:.1?}"),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Rabi oracle", rabi),
        ("decay oracle", decay),
        ("STIRAP transfer", stirap),
        ("maximal coherence", fstirap),
        ("delay-scan shape", delay_scan),
        ("density scaling", density_scan),
        ("calibrated amplitude", calibrated),
        ("power dependence", power),
        ("numerical hygiene", hygiene),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let v = check().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        if !v.passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            k + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
