use raman_core::atom::{evolve, AtomSpec, DensityMatrix, FieldSample, Level, C64};
use raman_core::checks::{stirap_transfer, STIRAP_SEPARATION, STIRAP_WIDTH};
use raman_core::experiments::{run_delay_scan, run_density_scan, Experiment, ScanKind};
use raman_core::propagation::PropagationGrid;
use raman_core::pulses::{adiabaticity_metric, stirap_sequence};

#[test]
fn trace_is_conserved_with_repopulation() {
    // Chirped, detuned fields on both arms with decay folded back into b and c.
    let atom = AtomSpec {
        delta_a: 0.02,
        delta_b: -0.01,
        deph_ab: 0.003,
        ..AtomSpec::default()
    };
    let fields: Vec<FieldSample> = (0..=1000)
        .map(|k| {
            let t = k as f64 * 0.05;
            FieldSample::new(
                C64::from_polar(0.3, 0.01 * t * t),
                C64::from_polar(0.2 * (0.1 * t).cos(), -0.3 * t),
            )
        })
        .collect();
    let trajectory = evolve(
        &DensityMatrix::ground_mixture(0.3, 0.7),
        &fields,
        &atom,
        0.05,
    )
    .unwrap();
    let drift = trajectory
        .iter()
        .map(|r| (r.trace() - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(drift <= 1e-9, "trace drift {drift:e} over 1000 steps");
    assert!(trajectory.iter().all(|r| r.min_eigenvalue() >= -1e-6));
}

#[test]
fn trace_decays_without_repopulation() {
    let atom = AtomSpec {
        repopulation: false,
        ..AtomSpec::default()
    };
    let fields = vec![FieldSample::real(0.1, 0.1); 2001];
    let trajectory = evolve(
        &DensityMatrix::ground_mixture(0.5, 0.5),
        &fields,
        &atom,
        0.05,
    )
    .unwrap();
    let traces: Vec<f64> = trajectory.iter().map(DensityMatrix::trace).collect();
    assert!(traces.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    assert!(*traces.last().unwrap() < 1.0);
}

#[test]
fn stirap_transfer_improves_with_adiabaticity() {
    let geometry = stirap_sequence(1.0, STIRAP_WIDTH, STIRAP_SEPARATION).unwrap();
    let per_unit_peak = adiabaticity_metric(&geometry).metric;
    let transfers: Vec<f64> = [2.0, 5.0, 10.0, 20.0]
        .iter()
        .map(|m| stirap_transfer(m / per_unit_peak, STIRAP_WIDTH, STIRAP_SEPARATION, 0.05).unwrap())
        .collect();
    assert!(transfers.windows(2).all(|w| w[1] > w[0]), "{transfers:?}");
    assert!(transfers[3] > 0.99, "{transfers:?}");
}

#[test]
fn pure_stirap_state_stays_pure() {
    let seq = stirap_sequence(0.37, STIRAP_WIDTH, STIRAP_SEPARATION).unwrap();
    let env = raman_core::pulses::build_channel_envelopes(
        &seq,
        0.05,
        (seq.minimal_window() / 0.05).ceil() * 0.05,
    )
    .unwrap();
    let trajectory = evolve(
        &DensityMatrix::pure_level(Level::B),
        env.samples(),
        &AtomSpec::closed(),
        0.05,
    )
    .unwrap();
    for rho in &trajectory {
        let m = rho.matrix();
        let purity = (m * m).trace().re;
        assert!((purity - 1.0).abs() < 1e-9);
    }
}

#[test]
fn efficiency_rises_with_density() {
    let base = Experiment {
        grid: PropagationGrid {
            nz: 50,
            ..Default::default()
        },
        ..Default::default()
    };
    let scan = run_density_scan(&ScanKind::Density.default_values(), &base, 0).unwrap();
    let effs: Vec<f64> = scan.scan.records.iter().map(|r| r.efficiency).collect();
    assert!(effs.windows(2).all(|w| w[1] > w[0]), "{effs:?}");
}

#[test]
fn delay_argmax_is_stable_under_refinement() {
    let delays = [-10.0, -5.0, 0.0, 5.0, 10.0];
    let base = Experiment::default();
    let refined = [
        base.clone(),
        Experiment {
            grid: PropagationGrid {
                dt: 0.025,
                ..base.grid.clone()
            },
            ..base.clone()
        },
        Experiment {
            grid: PropagationGrid {
                nz: 2 * base.grid.nz,
                ..base.grid.clone()
            },
            ..base.clone()
        },
    ];
    let argmax: Vec<f64> = refined
        .iter()
        .map(|e| {
            run_delay_scan(&delays, e, 0)
                .unwrap()
                .argmax()
                .unwrap()
                .param
        })
        .collect();
    assert!(
        argmax.iter().all(|a| (a - argmax[0]).abs() <= 5.0),
        "{argmax:?}"
    );
    assert_eq!(argmax[0], 0.0);
}
