//! Co-propagation of the two channel envelopes through the vapor cell.
//!
//! Fields are marched in `ξ = z` on the retarded time grid `τ = t − z/c`.
//! Each slice integrates its own density matrix over the whole time grid, and
//! the medium polarization feeds back as
//!
//! ```text
//! ∂Ω_ab/∂ξ = i η_ab ρ_ab(ξ, τ),    ∂Ω_ac/∂ξ = i η_ac ρ_ac(ξ, τ)
//! ```
//!
//! with `ρ_ab = ⟨a|ρ|b⟩`. Under `H = −(Ω_ab|a⟩⟨b| + …)` the coherence `ρ_ab`
//! follows `Ω_ab` (it is `iΩ_ab/Γ` for weak fields on ground-state atoms), so
//! the `+i` makes a resonant field decay and keeps the march covariant under
//! a global phase of either channel.

use serde::{Deserialize, Serialize};

use crate::atom::{evolve_with, AtomSpec, DensityMatrix, FieldSample, C64, GAMMA};
use crate::error::{Error, Result};
use crate::pulses::{build_channel_envelopes, ChannelEnvelope, SequenceSpec};

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Density of the experiment's vapor, atoms/cm³.
pub const REFERENCE_DENSITY: f64 = 1.0e11;
/// Cell length, cm.
pub const CELL_LENGTH: f64 = 2.5;

/// Field–medium coupling in Rabi units, rad/(ns·cm).
///
/// `η = ν N ℘ / (2 ε₀ c)` converts a polarization into a field gradient in
/// V/m². Multiplying by `℘/ħ` expresses the field as a Rabi frequency:
///
/// ```text
/// η [rad/(s·m)] = ν[rad/s] · N[m⁻³] · ℘²[C²m²] / (2 ε₀[F/m] · c[m/s] · ħ[J·s])
/// ```
///
/// Inputs: `nu` in rad/ns, `density` in atoms/cm³, `dipole` in C·m. The result
/// is rescaled by 1e-9 (s → ns) and 1e-2 (m → cm).
pub fn coupling_constant(nu: f64, density: f64, dipole: f64) -> f64 {
    let nu_si = nu * 1.0e9;
    let density_si = density * 1.0e6;
    let eta_si = nu_si * density_si * dipole * dipole / (2.0 * EPSILON_0 * SPEED_OF_LIGHT * HBAR);
    eta_si * 1.0e-9 * 1.0e-2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    /// Atoms/cm³.
    pub density: f64,
    /// Cell length, cm.
    pub length: f64,
    /// Coupling constants at `density`, rad/(ns·cm).
    pub eta_ac: f64,
    pub eta_ab: f64,
}

impl MediumSpec {
    /// Medium with the same depth `β = ηL/γ` on both channels.
    pub fn from_depth(density: f64, length: f64, beta: f64) -> Self {
        let eta = beta * GAMMA / length;
        MediumSpec {
            density,
            length,
            eta_ac: eta,
            eta_ab: eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density.is_finite() && self.density >= 0.0) {
            return Err(Error::invalid(
                "density",
                format!("must be >= 0 (got {})", self.density),
            ));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::invalid(
                "length",
                format!("must be > 0 (got {})", self.length),
            ));
        }
        for (name, v) in [("eta_ac", self.eta_ac), ("eta_ab", self.eta_ab)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be >= 0 (got {v})")));
            }
        }
        Ok(())
    }

    /// Same cell at another density; η scales linearly with N.
    pub fn with_density(&self, density: f64) -> Self {
        let scale = if self.density > 0.0 {
            density / self.density
        } else {
            0.0
        };
        MediumSpec {
            density,
            eta_ac: self.eta_ac * scale,
            eta_ab: self.eta_ab * scale,
            ..*self
        }
    }

    /// Depths `ηL/γ` of the (a–c, a–b) channels.
    pub fn depth(&self) -> (f64, f64) {
        (
            self.eta_ac * self.length / GAMMA,
            self.eta_ab * self.length / GAMMA,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationGrid {
    /// Number of slices along the cell.
    pub nz: usize,
    /// Time step, ns.
    pub dt: f64,
    /// End of the time window, ns.
    pub t_end: f64,
    /// Rerun at `nz/2` and report the change of the peak a–b field.
    pub convergence_check: bool,
}

impl Default for PropagationGrid {
    fn default() -> Self {
        PropagationGrid {
            nz: 100,
            dt: 0.05,
            t_end: 400.0,
            convergence_check: false,
        }
    }
}

impl PropagationGrid {
    pub fn validate(&self) -> Result<()> {
        if self.nz < 2 {
            return Err(Error::invalid(
                "nz",
                format!("must be >= 2 (got {})", self.nz),
            ));
        }
        crate::pulses::grid_steps(self.dt, self.t_end)?;
        Ok(())
    }
}

/// Optical coherences of one slice at one time: the sources of the two channels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Polarization {
    /// `ρ_ac = ⟨a|ρ|c⟩`, drives a–c.
    pub rho_ac: C64,
    /// `ρ_ab = ⟨a|ρ|b⟩`, drives a–b.
    pub rho_ab: C64,
}

/// Response of one medium slice to the local fields.
pub trait SliceDynamics: Sync {
    /// Fill `out` with one polarization per sample of `fields`. When
    /// `trajectory` is given it receives the full state on the same grid.
    fn polarization(
        &self,
        fields: &ChannelEnvelope,
        out: &mut Vec<Polarization>,
        trajectory: Option<&mut Vec<DensityMatrix>>,
    ) -> Result<()>;
}

/// Slices that obey the three-level Bloch equations from a common initial state.
#[derive(Clone, Debug)]
pub struct BlochMedium {
    pub atom: AtomSpec,
    pub rho0: DensityMatrix,
}

impl SliceDynamics for BlochMedium {
    fn polarization(
        &self,
        fields: &ChannelEnvelope,
        out: &mut Vec<Polarization>,
        mut trajectory: Option<&mut Vec<DensityMatrix>>,
    ) -> Result<()> {
        out.clear();
        if let Some(t) = trajectory.as_deref_mut() {
            t.clear();
        }
        evolve_with(
            &self.rho0,
            fields.samples(),
            &self.atom,
            fields.dt(),
            |_, rho| {
                let m = rho.matrix();
                out.push(Polarization {
                    rho_ac: m[(0, 2)],
                    rho_ab: m[(0, 1)],
                });
                if let Some(t) = trajectory.as_deref_mut() {
                    t.push(*rho);
                }
            },
        )?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub nz: usize,
    pub nz_coarse: usize,
    /// `max_τ |Ω_ab(L) − Ω_ab(0)|` at `nz` and `nz/2`.
    pub peak: f64,
    pub peak_coarse: f64,
    pub relative_change: f64,
    /// `relative_change ≤ 5%`.
    pub converged: bool,
}

pub const CONVERGENCE_TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub entry: ChannelEnvelope,
    pub exit: ChannelEnvelope,
    /// `(slice index, trajectory)`; slice `j` sits at `ξ = j·dξ`.
    pub rho_snapshots: Vec<(usize, Vec<DensityMatrix>)>,
    pub convergence: Option<ConvergenceReport>,
}

impl PropagationResult {
    /// Change of the a–b channel produced by the medium.
    pub fn generated_peak(&self) -> f64 {
        self.exit
            .samples()
            .iter()
            .zip(self.entry.samples())
            .map(|(x, e)| (x.omega_ab - e.omega_ab).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default)]
pub struct PropagationOptions {
    /// Slice indices in `0..=nz` whose trajectories are kept.
    pub snapshots: Vec<usize>,
}

/// March `entry` through `nz` slices of the medium with a Heun
/// predictor–corrector in ξ.
///
/// Each step predicts `Ω* = Ω_j + dξ S_j`, integrates the slice at `ξ + dξ`
/// under `Ω*`, and corrects with `Ω_{j+1} = Ω_j + dξ (S_j + S*)/2`. The
/// predicted source `S*` is carried to the next step.
pub fn propagate<D: SliceDynamics + ?Sized>(
    entry: &ChannelEnvelope,
    dynamics: &D,
    medium: &MediumSpec,
    nz: usize,
    options: &PropagationOptions,
) -> Result<PropagationResult> {
    medium.validate().map_err(|e| e.within("medium"))?;
    if nz < 2 {
        return Err(Error::invalid(
            "grid.nz",
            format!("must be >= 2 (got {nz})"),
        ));
    }
    let dxi = medium.length / nz as f64;
    let (eta_ac, eta_ab) = (medium.eta_ac, medium.eta_ab);
    let source = |p: &Polarization| {
        let i = C64::new(0.0, 1.0);
        (i * eta_ac * p.rho_ac, i * eta_ab * p.rho_ab)
    };

    let mut snapshots = Vec::new();
    let mut fields = entry.clone();
    let mut pol = Vec::with_capacity(entry.len());
    let mut trajectory = Vec::new();
    let wants = |j: usize| options.snapshots.contains(&j);

    dynamics.polarization(&fields, &mut pol, wants(0).then_some(&mut trajectory))?;
    if wants(0) {
        snapshots.push((0, std::mem::take(&mut trajectory)));
    }
    let mut predicted = fields.clone();
    let mut pol_next = Vec::with_capacity(entry.len());
    for j in 0..nz {
        for (p, (f, s)) in predicted
            .samples_mut()
            .iter_mut()
            .zip(fields.samples().iter().zip(&pol))
        {
            let (d_ac, d_ab) = source(s);
            *p = FieldSample::new(f.omega_ac + d_ac * dxi, f.omega_ab + d_ab * dxi);
        }
        let keep = wants(j + 1);
        dynamics.polarization(&predicted, &mut pol_next, keep.then_some(&mut trajectory))?;
        if keep {
            snapshots.push((j + 1, std::mem::take(&mut trajectory)));
        }
        for (f, (s0, s1)) in fields
            .samples_mut()
            .iter_mut()
            .zip(pol.iter().zip(&pol_next))
        {
            let (a0, b0) = source(s0);
            let (a1, b1) = source(s1);
            f.omega_ac += (a0 + a1) * (0.5 * dxi);
            f.omega_ab += (b0 + b1) * (0.5 * dxi);
        }
        std::mem::swap(&mut pol, &mut pol_next);
    }
    if fields.samples().iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical(
            "non-finite field after propagation".into(),
        ));
    }
    Ok(PropagationResult {
        entry: entry.clone(),
        exit: fields,
        rho_snapshots: snapshots,
        convergence: None,
    })
}

/// Propagate a sequence through a Bloch medium on the given grid, with the
/// optional `nz / 2` convergence rerun.
pub fn propagate_sequence(
    seq: &SequenceSpec,
    atom: &AtomSpec,
    medium: &MediumSpec,
    grid: &PropagationGrid,
    rho0: &DensityMatrix,
    options: &PropagationOptions,
) -> Result<PropagationResult> {
    grid.validate().map_err(|e| e.within("grid"))?;
    atom.validate().map_err(|e| e.within("atom"))?;
    let entry = build_channel_envelopes(seq, grid.dt, grid.t_end)?;
    let dynamics = BlochMedium {
        atom: atom.clone(),
        rho0: *rho0,
    };
    let mut result = propagate(&entry, &dynamics, medium, grid.nz, options)?;
    if grid.convergence_check {
        let coarse_nz = (grid.nz / 2).max(2);
        let coarse = propagate(
            &entry,
            &dynamics,
            medium,
            coarse_nz,
            &PropagationOptions::default(),
        )?;
        let peak = result.generated_peak();
        let peak_coarse = coarse.generated_peak();
        let relative_change = if peak > 0.0 {
            (peak - peak_coarse).abs() / peak
        } else {
            0.0
        };
        let report = ConvergenceReport {
            nz: grid.nz,
            nz_coarse: coarse_nz,
            peak,
            peak_coarse,
            relative_change,
            converged: relative_change <= CONVERGENCE_TOLERANCE,
        };
        if !report.converged {
            log::warn!("spatial grid not converged: peak a-b field changes by {:.2}% between nz = {} and {}",
                100.0 * relative_change, coarse_nz, grid.nz);
        }
        result.convergence = Some(report);
    }
    Ok(result)
}
