//! Pulse shapes, sampled channel envelopes and the STIRAP / fractional-STIRAP
//! sequence builders.

use serde::{Deserialize, Serialize};

use crate::atom::{FieldSample, C64, GAMMA};
use crate::error::{Error, Result};

/// Edge time constant of the acousto-optic modulators, ns.
pub const AOM_RISE: f64 = 9.0;

/// Rabi frequency of every beam in the experiment, 10γ.
pub const EXPERIMENT_RABI: f64 = 10.0 * GAMMA;

/// Edge margin, in units of `rise`, that sampled windows must leave around a
/// smoothed-square pulse.
pub const EDGE_MARGIN: f64 = 5.0;

/// Half-width of a gaussian's support, in units of its FWHM. The pulse has
/// fallen to `2^-25` of its peak there.
const GAUSSIAN_SUPPORT: f64 = 2.5;

const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseShape {
    Gaussian {
        center: f64,
        fwhm: f64,
    },
    /// Flat top between `t_on` and `t_off` with tanh edges of time constant `rise`.
    SmoothedSquare {
        t_on: f64,
        t_off: f64,
        rise: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Peak Rabi frequency, rad/ns.
    pub peak_rabi: f64,
    #[serde(flatten)]
    pub shape: PulseShape,
}

/// Smoothed step `½(1 + tanh 2x)`.
fn edge(x: f64) -> f64 {
    0.5 * (1.0 + (2.0 * x).tanh())
}

impl PulseSpec {
    pub fn gaussian(peak_rabi: f64, center: f64, fwhm: f64) -> Self {
        PulseSpec {
            peak_rabi,
            shape: PulseShape::Gaussian { center, fwhm },
        }
    }

    pub fn smoothed_square(peak_rabi: f64, t_on: f64, t_off: f64, rise: f64) -> Self {
        PulseSpec {
            peak_rabi,
            shape: PulseShape::SmoothedSquare { t_on, t_off, rise },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_rabi.is_finite() && self.peak_rabi >= 0.0) {
            return Err(Error::invalid(
                "peak_rabi",
                format!("must be >= 0 (got {})", self.peak_rabi),
            ));
        }
        match self.shape {
            PulseShape::Gaussian { center, fwhm } => {
                if !center.is_finite() {
                    return Err(Error::invalid("center", "must be finite"));
                }
                if !(fwhm.is_finite() && fwhm > 0.0) {
                    return Err(Error::invalid("fwhm", format!("must be > 0 (got {fwhm})")));
                }
            }
            PulseShape::SmoothedSquare { t_on, t_off, rise } => {
                if !(t_on.is_finite() && t_off.is_finite() && t_off > t_on) {
                    return Err(Error::invalid(
                        "t_off",
                        format!("must exceed t_on (got {t_on}..{t_off})"),
                    ));
                }
                if !(rise.is_finite() && rise > 0.0) {
                    return Err(Error::invalid("rise", format!("must be > 0 (got {rise})")));
                }
            }
        }
        Ok(())
    }

    /// Rabi frequency at time `t`, in `[0, peak_rabi]`.
    pub fn eval(&self, t: f64) -> f64 {
        self.peak_rabi * self.profile(t)
    }

    fn profile(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::Gaussian { center, fwhm } => {
                let u = (t - center) / fwhm;
                (-FOUR_LN2 * u * u).exp()
            }
            PulseShape::SmoothedSquare { t_on, t_off, rise } => {
                edge((t - t_on) / rise) * edge((t_off - t) / rise)
            }
        }
    }

    fn middle(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian { center, .. } => center,
            PulseShape::SmoothedSquare { t_on, t_off, .. } => 0.5 * (t_on + t_off),
        }
    }

    /// Nominal switch-off time: `t_off`, or the trailing half-maximum of a gaussian.
    pub fn trailing_edge(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian { center, fwhm } => center + 0.5 * fwhm,
            PulseShape::SmoothedSquare { t_off, .. } => t_off,
        }
    }

    /// Nominal switch-on time: `t_on`, or the leading half-maximum of a gaussian.
    pub fn leading_edge(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian { center, fwhm } => center - 0.5 * fwhm,
            PulseShape::SmoothedSquare { t_on, .. } => t_on,
        }
    }

    /// Interval outside which the pulse is negligible.
    pub fn support(&self) -> (f64, f64) {
        match self.shape {
            PulseShape::Gaussian { center, fwhm } => (
                center - GAUSSIAN_SUPPORT * fwhm,
                center + GAUSSIAN_SUPPORT * fwhm,
            ),
            PulseShape::SmoothedSquare { t_on, t_off, rise } => {
                (t_on - EDGE_MARGIN * rise, t_off + EDGE_MARGIN * rise)
            }
        }
    }

    /// Interval where the pulse exceeds half of its own maximum.
    pub fn half_max_interval(&self) -> (f64, f64) {
        match self.shape {
            PulseShape::Gaussian { center, fwhm } => (center - 0.5 * fwhm, center + 0.5 * fwhm),
            PulseShape::SmoothedSquare { .. } => {
                let mid = self.middle();
                let half = 0.5 * self.profile(mid);
                let (lo, hi) = self.support();
                (self.crossing(lo, mid, half), self.crossing(mid, hi, half))
            }
        }
    }

    // Bisection for the time in [lo, hi] where the profile crosses `level`;
    // the profile is monotone on each side of the middle.
    fn crossing(&self, mut lo: f64, mut hi: f64, level: f64) -> f64 {
        let rising = self.profile(lo) < self.profile(hi);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m == lo || m == hi {
                break;
            }
            if (self.profile(m) < level) == rising {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn shifted(&self, dt: f64) -> Self {
        let shape = match self.shape {
            PulseShape::Gaussian { center, fwhm } => PulseShape::Gaussian {
                center: center + dt,
                fwhm,
            },
            PulseShape::SmoothedSquare { t_on, t_off, rise } => PulseShape::SmoothedSquare {
                t_on: t_on + dt,
                t_off: t_off + dt,
                rise,
            },
        };
        PulseSpec { shape, ..*self }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PulseSpec {
            peak_rabi: self.peak_rabi * factor,
            ..*self
        }
    }
}

/// Two couplings and an optional probe. Coupling 1 and the probe drive a–c,
/// coupling 2 drives a–b.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub coupling1: PulseSpec,
    pub coupling2: PulseSpec,
    pub probe: Option<PulseSpec>,
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        self.coupling1
            .validate()
            .map_err(|e| e.within("coupling1"))?;
        self.coupling2
            .validate()
            .map_err(|e| e.within("coupling2"))?;
        if let Some(probe) = &self.probe {
            probe.validate().map_err(|e| e.within("probe"))?;
            let gap = probe.leading_edge() - self.coupling1.trailing_edge();
            if gap <= 0.0 {
                return Err(Error::invalid(
                    "probe_gap",
                    format!("probe must start after coupling1 ends (gap {gap} ns)"),
                ));
            }
        }
        Ok(())
    }

    /// `t_off(coupling2) − t_off(coupling1)`, ns. Zero means coinciding tails.
    pub fn mutual_delay(&self) -> f64 {
        self.coupling2.trailing_edge() - self.coupling1.trailing_edge()
    }

    /// Probe switch-on minus coupling-1 switch-off, ns.
    pub fn probe_gap(&self) -> Option<f64> {
        self.probe
            .map(|p| p.leading_edge() - self.coupling1.trailing_edge())
    }

    fn pulses(&self) -> impl Iterator<Item = &PulseSpec> {
        [&self.coupling1, &self.coupling2]
            .into_iter()
            .chain(self.probe.as_ref())
    }

    /// Union of all pulse supports.
    pub fn span(&self) -> (f64, f64) {
        self.pulses()
            .map(PulseSpec::support)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                (lo.min(a), hi.max(b))
            })
    }

    /// Duration over which both couplings exceed half of their maxima.
    pub fn coupling_overlap(&self) -> f64 {
        let (a0, a1) = self.coupling1.half_max_interval();
        let (b0, b1) = self.coupling2.half_max_interval();
        (a1.min(b1) - a0.max(b0)).max(0.0)
    }

    pub fn couplings_overlap(&self) -> bool {
        self.coupling_overlap() > 0.0
    }

    pub fn shifted(&self, dt: f64) -> Self {
        SequenceSpec {
            coupling1: self.coupling1.shifted(dt),
            coupling2: self.coupling2.shifted(dt),
            probe: self.probe.map(|p| p.shifted(dt)),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SequenceSpec {
            coupling1: self.coupling1.scaled(factor),
            coupling2: self.coupling2.scaled(factor),
            probe: self.probe.map(|p| p.scaled(factor)),
        }
    }

    /// Time span that a sampled window must cover, rounded up to the next 10 ns.
    pub fn minimal_window(&self) -> f64 {
        (self.span().1 / 10.0).ceil() * 10.0
    }
}

/// Uniformly sampled complex Rabi frequencies on `t_k = k·dt`, `k = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEnvelope {
    dt: f64,
    samples: Vec<FieldSample>,
}

impl ChannelEnvelope {
    pub fn new(dt: f64, samples: Vec<FieldSample>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be > 0 (got {dt})")));
        }
        if let Some(k) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(
                "samples",
                format!("non-finite field at sample {k}"),
            ));
        }
        Ok(ChannelEnvelope { dt, samples })
    }

    pub fn zeros(dt: f64, t_end: f64) -> Result<Self> {
        let n = grid_steps(dt, t_end)?;
        ChannelEnvelope::new(dt, vec![FieldSample::ZERO; n + 1])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[FieldSample] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [FieldSample] {
        &mut self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    /// Sample indices with `t_start ≤ t_k ≤ t_end`.
    pub fn indices_within(&self, t_start: f64, t_end: f64) -> std::ops::Range<usize> {
        let lo = (t_start / self.dt).ceil().max(0.0) as usize;
        let hi = ((t_end / self.dt).floor() + 1.0).max(0.0) as usize;
        lo.min(self.len())..hi.min(self.len()).max(lo.min(self.len()))
    }

    pub fn max_abs_ac(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.omega_ac.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_ab(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.omega_ab.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_ac().max(self.max_abs_ab())
    }

    /// Sample-wise `self − other`; both envelopes must share the grid.
    pub fn difference(&self, other: &ChannelEnvelope) -> Result<ChannelEnvelope> {
        if self.len() != other.len() || self.dt != other.dt {
            return Err(Error::invalid("envelope", "time grids differ"));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| FieldSample::new(a.omega_ac - b.omega_ac, a.omega_ab - b.omega_ab))
            .collect();
        Ok(ChannelEnvelope {
            dt: self.dt,
            samples,
        })
    }
}

/// Number of steps `n` with `n·dt = t_end`.
pub fn grid_steps(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0 (got {dt})")));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::invalid(
            "t_end",
            format!("must be > 0 (got {t_end})"),
        ));
    }
    let n = (t_end / dt).round();
    if ((n * dt - t_end) / t_end).abs() > 1e-9 {
        return Err(Error::invalid(
            "t_end",
            format!("{t_end} ns is not a whole number of steps of {dt} ns"),
        ));
    }
    Ok(n as usize)
}

/// Sample a sequence on `[0, t_end]`: a–c carries coupling 1 plus the probe,
/// a–b carries coupling 2.
pub fn build_channel_envelopes(seq: &SequenceSpec, dt: f64, t_end: f64) -> Result<ChannelEnvelope> {
    seq.validate()?;
    let n = grid_steps(dt, t_end)?;
    let (lo, hi) = seq.span();
    if lo < 0.0 || hi > t_end {
        return Err(Error::invalid(
            "t_end",
            format!(
                "window [0, {t_end}] ns does not cover the pulses with margins [{lo}, {hi}] ns"
            ),
        ));
    }
    let samples = (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            let ac = seq.coupling1.eval(t) + seq.probe.map_or(0.0, |p| p.eval(t));
            FieldSample::new(C64::new(ac, 0.0), C64::new(seq.coupling2.eval(t), 0.0))
        })
        .collect();
    ChannelEnvelope::new(dt, samples)
}

/// Gaussian STIRAP pair of FWHM `width` whose centres are `separation` apart.
///
/// Positive `separation` is the counter-intuitive order (a–c before a–b) that
/// moves population from `b` to `c`; negative values give the intuitive order.
/// Pulses with `|separation| ≥ 2·width` do not transfer population and are
/// only logged.
pub fn stirap_sequence(peak: f64, width: f64, separation: f64) -> Result<SequenceSpec> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::invalid(
            "width",
            format!("must be > 0 (got {width})"),
        ));
    }
    if !separation.is_finite() {
        return Err(Error::invalid("separation", "must be finite"));
    }
    let middle = GAUSSIAN_SUPPORT * width + 0.5 * separation.abs();
    let seq = SequenceSpec {
        coupling1: PulseSpec::gaussian(peak, middle - 0.5 * separation, width),
        coupling2: PulseSpec::gaussian(peak, middle + 0.5 * separation, width),
        probe: None,
    };
    seq.validate()?;
    if separation.abs() >= 2.0 * width {
        log::warn!("STIRAP pulses separated by {separation} ns do not overlap (width {width} ns)");
    }
    Ok(seq)
}

/// Fractional STIRAP pair with a shared trailing edge.
///
/// The experiment's pair scaled to `width`: coupling 2 is a smoothed square of
/// duration `width`, coupling 1 lasts `7.5·width` and switches off together
/// with it, and both edges have time constant `0.45·width` (9 ns at 20 ns). On
/// the common tail `Ω₁/Ω₂ → 1`.
pub fn fstirap_sequence(peak: f64, width: f64) -> Result<SequenceSpec> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::invalid(
            "width",
            format!("must be > 0 (got {width})"),
        ));
    }
    let rise = AOM_RISE / 20.0 * width;
    let t_on = EDGE_MARGIN * rise;
    let t_off = t_on + 7.5 * width;
    let seq = SequenceSpec {
        coupling1: PulseSpec::smoothed_square(peak, t_on, t_off, rise),
        coupling2: PulseSpec::smoothed_square(peak, t_off - width, t_off, rise),
        probe: None,
    };
    seq.validate()?;
    Ok(seq)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Adiabaticity {
    /// Coupling overlap above half-maximum, ns.
    pub overlap: f64,
    /// `overlap · √(Ω₁² + Ω₂²)`.
    pub metric: f64,
    /// `metric ≥ 10`.
    pub adiabatic: bool,
}

pub const ADIABATIC_THRESHOLD: f64 = 10.0;

pub fn adiabaticity_metric(seq: &SequenceSpec) -> Adiabaticity {
    let overlap = seq.coupling_overlap();
    let metric = overlap * seq.coupling1.peak_rabi.hypot(seq.coupling2.peak_rabi);
    Adiabaticity {
        overlap,
        metric,
        adiabatic: metric >= ADIABATIC_THRESHOLD,
    }
}

/// Timing of the three-pulse experiment. Coupling 1 and the probe share one
/// beam (a–c), coupling 2 is the other beam (a–b). All pulses are smoothed
/// squares with the same edge time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentTiming {
    pub coupling1_peak: f64,
    pub coupling2_peak: f64,
    pub probe_peak: f64,
    /// Switch-on time of coupling 1, ns.
    pub start: f64,
    pub coupling1_duration: f64,
    pub coupling2_duration: f64,
    pub probe_duration: f64,
    /// Probe switch-on minus coupling-1 switch-off, ns.
    pub probe_gap: f64,
    /// Coupling-2 switch-off minus coupling-1 switch-off, ns.
    pub mutual_delay: f64,
    pub rise: f64,
}

impl Default for ExperimentTiming {
    fn default() -> Self {
        ExperimentTiming {
            coupling1_peak: EXPERIMENT_RABI,
            coupling2_peak: EXPERIMENT_RABI,
            probe_peak: EXPERIMENT_RABI,
            start: 50.0,
            coupling1_duration: 150.0,
            coupling2_duration: 20.0,
            probe_duration: 20.0,
            probe_gap: 100.0,
            mutual_delay: 0.0,
            rise: AOM_RISE,
        }
    }
}

impl ExperimentTiming {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("coupling1_peak", self.coupling1_peak),
            ("coupling2_peak", self.coupling2_peak),
            ("probe_peak", self.probe_peak),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be >= 0 (got {v})")));
            }
        }
        let positive = [
            ("coupling1_duration", self.coupling1_duration),
            ("coupling2_duration", self.coupling2_duration),
            ("probe_duration", self.probe_duration),
            ("probe_gap", self.probe_gap),
            ("rise", self.rise),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0 (got {v})")));
            }
        }
        for (name, v) in [("start", self.start), ("mutual_delay", self.mutual_delay)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn sequence(&self) -> Result<SequenceSpec> {
        self.validate()?;
        let c1_off = self.start + self.coupling1_duration;
        let c2_off = c1_off + self.mutual_delay;
        let probe_on = c1_off + self.probe_gap;
        Ok(SequenceSpec {
            coupling1: PulseSpec::smoothed_square(
                self.coupling1_peak,
                self.start,
                c1_off,
                self.rise,
            ),
            coupling2: PulseSpec::smoothed_square(
                self.coupling2_peak,
                c2_off - self.coupling2_duration,
                c2_off,
                self.rise,
            ),
            probe: Some(PulseSpec::smoothed_square(
                self.probe_peak,
                probe_on,
                probe_on + self.probe_duration,
                self.rise,
            )),
        })
    }

    /// Multiply every peak Rabi frequency by `factor`.
    pub fn with_scaled_peaks(&self, factor: f64) -> Self {
        ExperimentTiming {
            coupling1_peak: self.coupling1_peak * factor,
            coupling2_peak: self.coupling2_peak * factor,
            probe_peak: self.probe_peak * factor,
            ..self.clone()
        }
    }

    pub fn with_delay(&self, mutual_delay: f64) -> Self {
        ExperimentTiming {
            mutual_delay,
            ..self.clone()
        }
    }

    pub fn without_probe(&self) -> Self {
        ExperimentTiming {
            probe_peak: 0.0,
            ..self.clone()
        }
    }

    pub fn probe_window(&self) -> (f64, f64) {
        let on = self.start + self.coupling1_duration + self.probe_gap;
        (on, on + self.probe_duration)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn flat_top_and_off_state() {
        let rise = 9.0;
        let p = PulseSpec::smoothed_square(2.0, 100.0, 300.0, rise);
        let mid = 0.5 * ((100.0 + 5.0 * rise) + (300.0 - 5.0 * rise));
        assert_relative_eq!(p.eval(mid), 2.0, max_relative = 1e-4);
        assert!(p.eval(100.0 - 10.0 * rise) < 1e-6 * 2.0);
        assert!(p.eval(300.0 + 10.0 * rise) < 1e-6 * 2.0);
    }

    #[test]
    fn gaussian_half_max() {
        let p = PulseSpec::gaussian(3.0, 50.0, 12.0);
        assert_abs_diff_eq!(p.eval(44.0), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.eval(56.0), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.eval(50.0), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_pulses_rejected() {
        assert!(PulseSpec::smoothed_square(1.0, 10.0, 5.0, 1.0)
            .validate()
            .is_err());
        assert!(PulseSpec::smoothed_square(1.0, 0.0, 5.0, 0.0)
            .validate()
            .is_err());
        assert!(PulseSpec::gaussian(-1.0, 0.0, 5.0).validate().is_err());
        assert!(PulseSpec::gaussian(1.0, 0.0, 0.0).validate().is_err());
    }

    #[test]
    fn default_experiment_envelopes() {
        let seq = ExperimentTiming::default().sequence().unwrap();
        let env = build_channel_envelopes(&seq, 0.05, 400.0).unwrap();
        let half = 0.5 * EXPERIMENT_RABI;
        let count_pulses = |values: Vec<f64>| {
            values
                .windows(2)
                .filter(|w| w[0] < half && w[1] >= half)
                .count()
        };
        let ac: Vec<f64> = env.samples().iter().map(|s| s.omega_ac.re).collect();
        let ab: Vec<f64> = env.samples().iter().map(|s| s.omega_ab.re).collect();
        assert_eq!(count_pulses(ac), 2);
        assert_eq!(count_pulses(ab), 1);
        assert_eq!(env.len(), 8001);
        assert_abs_diff_eq!(seq.probe_gap().unwrap(), 100.0);
    }

    #[test]
    fn zero_peaks_give_zero_envelopes() {
        let seq = ExperimentTiming::default()
            .with_scaled_peaks(0.0)
            .sequence()
            .unwrap();
        let env = build_channel_envelopes(&seq, 0.05, 400.0).unwrap();
        assert!(env.samples().iter().all(|s| *s == FieldSample::ZERO));
    }

    #[test]
    fn coinciding_tails_at_zero_delay() {
        let seq = ExperimentTiming::default().sequence().unwrap();
        assert_eq!(seq.mutual_delay(), 0.0);
        let env = build_channel_envelopes(&seq, 0.05, 400.0).unwrap();
        let probe_on = seq.probe.unwrap().leading_edge();
        let last_above = |f: &dyn Fn(&FieldSample) -> f64| {
            let samples = env.samples();
            let end = env.indices_within(0.0, probe_on - 20.0).end;
            (0..end)
                .rev()
                .find(|&k| f(&samples[k]) >= 0.5 * EXPERIMENT_RABI)
                .unwrap()
        };
        let k1 = last_above(&|s| s.omega_ac.re);
        let k2 = last_above(&|s| s.omega_ab.re);
        assert!(k1.abs_diff(k2) <= 1, "{k1} vs {k2}");
    }

    #[test]
    fn window_too_short_rejected() {
        let seq = ExperimentTiming::default().sequence().unwrap();
        assert!(build_channel_envelopes(&seq, 0.05, 300.0).is_err());
        assert!(build_channel_envelopes(&seq, 0.05, 400.01).is_err());
    }

    #[test]
    fn stirap_order_and_overlap_flag() {
        let seq = stirap_sequence(EXPERIMENT_RABI, 27.0, 20.0).unwrap();
        assert!(seq.coupling1.trailing_edge() < seq.coupling2.trailing_edge());
        assert!(seq.couplings_overlap());
        let apart = stirap_sequence(EXPERIMENT_RABI, 27.0, 60.0).unwrap();
        assert!(!apart.couplings_overlap());
        assert!(apart.span().0 >= 0.0);
    }

    #[test]
    fn fstirap_shares_trailing_edge() {
        let seq = fstirap_sequence(EXPERIMENT_RABI, 20.0).unwrap();
        assert_eq!(seq.mutual_delay(), 0.0);
        assert!(seq.coupling1.leading_edge() < seq.coupling2.leading_edge());
    }

    #[test]
    fn fstirap_terminal_ratio() {
        // Last decade of decay: from 10% down to 1% of the peak.
        let seq = fstirap_sequence(EXPERIMENT_RABI, 20.0).unwrap();
        let t_off = seq.coupling1.trailing_edge();
        let mut t = t_off;
        let mut checked = 0;
        while seq.coupling2.eval(t) > 0.01 * EXPERIMENT_RABI {
            if seq.coupling2.eval(t) <= 0.1 * EXPERIMENT_RABI {
                let ratio = seq.coupling1.eval(t) / seq.coupling2.eval(t);
                assert!((ratio - 1.0).abs() <= 0.01, "ratio {ratio} at {t}");
                checked += 1;
            }
            t += 0.05;
        }
        assert!(checked > 10);
    }

    #[test]
    fn adiabaticity_examples() {
        let omega = 10.0 * GAMMA;
        // Two square pulses overlapping exactly 27 ns above half maximum.
        let seq = SequenceSpec {
            coupling1: PulseSpec::gaussian(omega, 100.0, 54.0),
            coupling2: PulseSpec::gaussian(omega, 127.0, 54.0),
            probe: None,
        };
        let a = adiabaticity_metric(&seq);
        assert_abs_diff_eq!(a.overlap, 27.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.metric, 200f64.sqrt(), epsilon = 1e-9);
        assert!(a.adiabatic);

        let weak = adiabaticity_metric(&seq.scaled(0.1));
        assert_abs_diff_eq!(weak.metric, 2f64.sqrt(), epsilon = 1e-9);
        assert!(!weak.adiabatic);

        let apart = stirap_sequence(omega, 10.0, 40.0).unwrap();
        let a = adiabaticity_metric(&apart);
        assert_eq!(a.metric, 0.0);
        assert!(!a.adiabatic);
    }

    #[test]
    fn smoothed_square_half_max_interval() {
        let p = PulseSpec::smoothed_square(1.0, 50.0, 200.0, 9.0);
        let (a, b) = p.half_max_interval();
        assert_abs_diff_eq!(a, 50.0, epsilon = 1e-6);
        assert_abs_diff_eq!(b, 200.0, epsilon = 1e-6);
        let peak = p.eval(125.0);
        assert_abs_diff_eq!(p.eval(a), 0.5 * peak, epsilon = 1e-12);
    }

    #[test]
    fn shift_moves_samples_by_whole_bins() {
        // dt and the shift are dyadic so sample times are exact.
        let dt = 0.0625;
        let seq = ExperimentTiming::default().sequence().unwrap();
        let base = build_channel_envelopes(&seq, dt, 400.0).unwrap();
        let shift = 3.25;
        let moved = build_channel_envelopes(&seq.shifted(shift), dt, 400.0).unwrap();
        let bins = (shift / dt).round() as usize;
        for k in bins..base.len() {
            assert_eq!(moved.samples()[k], base.samples()[k - bins]);
        }
    }

    proptest! {
        #[test]
        fn envelope_synthesis_is_linear(scale in 0.0..4.0f64) {
            let seq = ExperimentTiming::default().sequence().unwrap();
            let base = build_channel_envelopes(&seq, 0.1, 400.0).unwrap();
            let scaled = build_channel_envelopes(&seq.scaled(scale), 0.1, 400.0).unwrap();
            for (a, b) in base.samples().iter().zip(scaled.samples()) {
                prop_assert!((a.omega_ac * scale - b.omega_ac).norm() <= 1e-15 * scale.max(1.0));
                prop_assert!((a.omega_ab * scale - b.omega_ab).norm() <= 1e-15 * scale.max(1.0));
            }
        }

        #[test]
        fn pulse_values_bounded(t in -100.0..500.0f64, peak in 0.0..2.0f64) {
            let p = PulseSpec::smoothed_square(peak, 50.0, 200.0, 9.0);
            let v = p.eval(t);
            prop_assert!((0.0..=peak).contains(&v));
            let g = PulseSpec::gaussian(peak, 100.0, 30.0);
            prop_assert!((0.0..=peak).contains(&g.eval(t)));
        }
    }

    #[test]
    fn power_of_two_scaling_is_exact() {
        let seq = ExperimentTiming::default().sequence().unwrap();
        let base = build_channel_envelopes(&seq, 0.05, 400.0).unwrap();
        let doubled = build_channel_envelopes(&seq.scaled(2.0), 0.05, 400.0).unwrap();
        for (a, b) in base.samples().iter().zip(doubled.samples()) {
            assert_eq!(a.omega_ac * 2.0, b.omega_ac);
            assert_eq!(a.omega_ab * 2.0, b.omega_ab);
        }
    }
}
