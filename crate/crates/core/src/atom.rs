//! Single-atom dynamics of the three-level Λ system.
//!
//! Levels are ordered `a` (excited), `b`, `c` (ground). Time is in ns and every
//! rate or Rabi frequency is an angular frequency in rad/ns. The Hamiltonian is
//! stored as `H/ħ`.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix3c = Matrix3<C64>;

/// Natural linewidth of the excited level, γ = 1/τ with τ = 27 ns.
pub const GAMMA: f64 = 1.0 / 27.0;

/// Measured ground-state coherence lifetime of ~10³ ns, applied as pure dephasing.
pub const GROUND_DEPHASING: f64 = 1.0e-3;

/// Largest accepted `dt · max|Ω|` for the fixed-step integrator.
pub const STABILITY_LIMIT: f64 = 0.05;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    A,
    B,
    C,
}

impl Level {
    pub const fn index(self) -> usize {
        match self {
            Level::A => 0,
            Level::B => 1,
            Level::C => 2,
        }
    }
}

/// Detunings and relaxation constants of one atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSpec {
    /// One-photon detuning of the excited level.
    pub delta_a: f64,
    pub delta_b: f64,
    pub delta_c: f64,
    /// Diagonal entries of the decay operator Γ.
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_c: f64,
    /// Pure dephasing added to the off-diagonal elements.
    pub deph_ab: f64,
    pub deph_ac: f64,
    pub deph_bc: f64,
    /// Return population decaying out of `a` to `b` and `c`, half each.
    pub repopulation: bool,
}

impl Default for AtomSpec {
    fn default() -> Self {
        AtomSpec {
            delta_a: 0.0,
            delta_b: 0.0,
            delta_c: 0.0,
            gamma_a: GAMMA,
            gamma_b: 0.0,
            gamma_c: 0.0,
            deph_ab: 0.0,
            deph_ac: 0.0,
            deph_bc: GROUND_DEPHASING,
            repopulation: true,
        }
    }
}

impl AtomSpec {
    /// Resonant atom without any relaxation.
    pub fn closed() -> Self {
        AtomSpec {
            gamma_a: 0.0,
            deph_bc: 0.0,
            repopulation: false,
            ..AtomSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let detunings = [
            ("delta_a", self.delta_a),
            ("delta_b", self.delta_b),
            ("delta_c", self.delta_c),
        ];
        for (name, v) in detunings {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite (got {v})")));
            }
        }
        let rates = [
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("gamma_c", self.gamma_c),
            ("deph_ab", self.deph_ab),
            ("deph_ac", self.deph_ac),
            ("deph_bc", self.deph_bc),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("rate must be finite and >= 0 (got {v})"),
                ));
            }
        }
        Ok(())
    }

    fn gamma(&self, level: usize) -> f64 {
        [self.gamma_a, self.gamma_b, self.gamma_c][level]
    }

    fn dephasing(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 1) => self.deph_ab,
            (0, 2) => self.deph_ac,
            (1, 2) => self.deph_bc,
            _ => 0.0,
        }
    }

    fn rates(&self) -> Rates {
        let g = |i: usize, j: usize| 0.5 * (self.gamma(i) + self.gamma(j)) + self.dephasing(i, j);
        Rates {
            split_ab: self.delta_b - self.delta_a,
            split_ac: self.delta_c - self.delta_a,
            split_bc: self.delta_c - self.delta_b,
            gamma_a: self.gamma_a,
            gamma_b: self.gamma_b,
            gamma_c: self.gamma_c,
            relax_ab: g(0, 1),
            relax_ac: g(0, 2),
            relax_bc: g(1, 2),
            repopulation: if self.repopulation {
                0.5 * self.gamma_a
            } else {
                0.0
            },
        }
    }
}

/// Complex Rabi frequencies of the two optical channels at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    /// Transition a–c (coupling 1 and probe).
    pub omega_ac: C64,
    /// Transition a–b (coupling 2 and generated signal).
    pub omega_ab: C64,
}

impl FieldSample {
    pub const ZERO: FieldSample = FieldSample {
        omega_ac: ZERO,
        omega_ab: ZERO,
    };

    pub fn new(omega_ac: C64, omega_ab: C64) -> Self {
        FieldSample { omega_ac, omega_ab }
    }

    pub fn real(omega_ac: f64, omega_ab: f64) -> Self {
        FieldSample::new(C64::new(omega_ac, 0.0), C64::new(omega_ab, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.omega_ac.is_finite() && self.omega_ab.is_finite()
    }

    /// Largest single-channel modulus.
    pub fn max_abs(&self) -> f64 {
        self.omega_ac.norm().max(self.omega_ab.norm())
    }

    fn midpoint(&self, other: &FieldSample) -> FieldSample {
        FieldSample {
            omega_ac: (self.omega_ac + other.omega_ac) * 0.5,
            omega_ab: (self.omega_ab + other.omega_ab) * 0.5,
        }
    }
}

/// 3×3 density matrix over the levels `{a, b, c}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(Matrix3c);

impl DensityMatrix {
    pub fn from_matrix(m: Matrix3c) -> Self {
        DensityMatrix(m)
    }

    /// All population in one level.
    pub fn pure_level(level: Level) -> Self {
        let mut m = Matrix3c::zeros();
        m[(level.index(), level.index())] = C64::new(1.0, 0.0);
        DensityMatrix(m)
    }

    /// Incoherent mixture of the ground levels.
    pub fn ground_mixture(pop_b: f64, pop_c: f64) -> Self {
        let mut m = Matrix3c::zeros();
        m[(1, 1)] = C64::new(pop_b, 0.0);
        m[(2, 2)] = C64::new(pop_c, 0.0);
        DensityMatrix(m)
    }

    /// Pure state `|ψ⟩⟨ψ|` from amplitudes over `(a, b, c)`.
    pub fn from_amplitudes(psi: [C64; 3]) -> Self {
        DensityMatrix(Matrix3c::from_fn(|i, j| psi[i] * psi[j].conj()))
    }

    pub fn matrix(&self) -> &Matrix3c {
        &self.0
    }

    pub fn element(&self, row: Level, col: Level) -> C64 {
        self.0[(row.index(), col.index())]
    }

    pub fn population(&self, level: Level) -> f64 {
        self.element(level, level).re
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `max |ρ − ρ†|` over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `|⟨ψ|ρ|ψ⟩|` for a normalized state over `(a, b, c)`.
    pub fn fidelity_with(&self, psi: [C64; 3]) -> f64 {
        let mut acc = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                acc += psi[i].conj() * self.0[(i, j)] * psi[j];
            }
        }
        acc.re
    }

    fn symmetrized(m: Matrix3c) -> Self {
        DensityMatrix((m + m.adjoint()) * C64::new(0.5, 0.0))
    }
}

fn check_fields(fields: &FieldSample) -> Result<()> {
    if fields.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("fields", "Rabi frequencies must be finite"))
    }
}

/// `H/ħ = −(Ω_ab|a⟩⟨b| + Ω_ac|a⟩⟨c| + h.c.) − Σ_j Δ_j |j⟩⟨j|` in rad/ns.
pub fn build_hamiltonian(fields: &FieldSample, atom: &AtomSpec) -> Result<Matrix3c> {
    check_fields(fields)?;
    atom.validate()?;
    let mut h = Matrix3c::zeros();
    h[(0, 1)] = -fields.omega_ab;
    h[(1, 0)] = -fields.omega_ab.conj();
    h[(0, 2)] = -fields.omega_ac;
    h[(2, 0)] = -fields.omega_ac.conj();
    h[(0, 0)] = C64::new(-atom.delta_a, 0.0);
    h[(1, 1)] = C64::new(-atom.delta_b, 0.0);
    h[(2, 2)] = C64::new(-atom.delta_c, 0.0);
    Ok(h)
}

/// `dρ/dτ = −i[H/ħ, ρ] − ½(Γρ + ρΓ) − D∘ρ`, plus the optional repopulation of
/// the ground levels, evaluated with full matrix products.
pub fn bloch_derivative(
    rho: &DensityMatrix,
    fields: &FieldSample,
    atom: &AtomSpec,
) -> Result<Matrix3c> {
    let h = build_hamiltonian(fields, atom)?;
    let r = &rho.0;
    let i = C64::new(0.0, 1.0);
    let gamma = Matrix3c::from_diagonal(&nalgebra::Vector3::new(
        C64::new(atom.gamma_a, 0.0),
        C64::new(atom.gamma_b, 0.0),
        C64::new(atom.gamma_c, 0.0),
    ));
    let mut d = (h * r - r * h) * (-i) - (gamma * r + r * gamma) * C64::new(0.5, 0.0);
    for row in 0..3 {
        for col in 0..3 {
            if row != col {
                d[(row, col)] -= r[(row, col)] * atom.dephasing(row, col);
            }
        }
    }
    if atom.repopulation {
        let back = 0.5 * atom.gamma_a * r[(0, 0)].re;
        d[(1, 1)] += back;
        d[(2, 2)] += back;
    }
    Ok(d)
}

/// Relaxation and detuning constants flattened for the hot loop.
#[derive(Clone, Copy, Debug)]
struct Rates {
    split_ab: f64,
    split_ac: f64,
    split_bc: f64,
    gamma_a: f64,
    gamma_b: f64,
    gamma_c: f64,
    relax_ab: f64,
    relax_ac: f64,
    relax_bc: f64,
    repopulation: f64,
}

/// Independent entries of a Hermitian 3×3 state.
#[derive(Clone, Copy, Debug)]
struct Packed {
    aa: f64,
    bb: f64,
    cc: f64,
    ab: C64,
    ac: C64,
    bc: C64,
}

impl Packed {
    fn from_matrix(m: &Matrix3c) -> Self {
        Packed {
            aa: m[(0, 0)].re,
            bb: m[(1, 1)].re,
            cc: m[(2, 2)].re,
            ab: m[(0, 1)],
            ac: m[(0, 2)],
            bc: m[(1, 2)],
        }
    }

    fn to_matrix(self) -> Matrix3c {
        let r = |x: f64| C64::new(x, 0.0);
        Matrix3c::new(
            r(self.aa),
            self.ab,
            self.ac,
            self.ab.conj(),
            r(self.bb),
            self.bc,
            self.ac.conj(),
            self.bc.conj(),
            r(self.cc),
        )
    }

    fn axpy(self, h: f64, k: &Packed) -> Packed {
        Packed {
            aa: self.aa + h * k.aa,
            bb: self.bb + h * k.bb,
            cc: self.cc + h * k.cc,
            ab: self.ab + k.ab * h,
            ac: self.ac + k.ac * h,
            bc: self.bc + k.bc * h,
        }
    }

    // Element-wise form of `bloch_derivative`; the two are checked against each other in tests.
    fn derivative(&self, f: &FieldSample, r: &Rates) -> Packed {
        let x = f.omega_ab;
        let y = f.omega_ac;
        let i = C64::new(0.0, 1.0);
        let excite_b = (x.conj() * self.ab).im;
        let excite_c = (y.conj() * self.ac).im;
        let decay_a = r.gamma_a * self.aa;
        Packed {
            aa: 2.0 * (excite_b + excite_c) - decay_a,
            bb: -2.0 * excite_b - r.gamma_b * self.bb + r.repopulation * self.aa,
            cc: -2.0 * excite_c - r.gamma_c * self.cc + r.repopulation * self.aa,
            ab: -i * (self.ab * r.split_ab + x * (self.aa - self.bb) - y * self.bc.conj())
                - self.ab * r.relax_ab,
            ac: -i * (self.ac * r.split_ac + y * (self.aa - self.cc) - x * self.bc)
                - self.ac * r.relax_ac,
            bc: -i * (self.bc * r.split_bc - x.conj() * self.ac + y * self.ab.conj())
                - self.bc * r.relax_bc,
        }
    }
}

fn check_step(samples: &[FieldSample], dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(
            "dt",
            format!("time step must be positive (got {dt})"),
        ));
    }
    let mut max_rabi = 0.0_f64;
    for s in samples {
        check_fields(s)?;
        max_rabi = max_rabi.max(s.max_abs());
    }
    if dt * max_rabi > STABILITY_LIMIT {
        return Err(Error::Stability {
            dt,
            max_rabi,
            required_dt: STABILITY_LIMIT / max_rabi,
        });
    }
    Ok(())
}

/// Fixed-step RK4 over a uniformly sampled envelope, calling `visit(k, ρ(t_k))`
/// for every grid point including `k = 0`.
///
/// Fields at half steps are the mean of the neighbouring samples. The state is
/// re-symmetrized to `(ρ + ρ†)/2` after every step.
pub fn evolve_with<F>(
    rho0: &DensityMatrix,
    samples: &[FieldSample],
    atom: &AtomSpec,
    dt: f64,
    mut visit: F,
) -> Result<DensityMatrix>
where
    F: FnMut(usize, &DensityMatrix),
{
    atom.validate()?;
    check_step(samples, dt)?;
    let rates = atom.rates();
    let mut rho = DensityMatrix::symmetrized(rho0.0);
    let mut state = Packed::from_matrix(&rho.0);
    if samples.is_empty() {
        return Ok(rho);
    }
    visit(0, &rho);
    for (k, pair) in samples.windows(2).enumerate() {
        let (f0, f1) = (&pair[0], &pair[1]);
        let fh = f0.midpoint(f1);
        let k1 = state.derivative(f0, &rates);
        let k2 = state.axpy(0.5 * dt, &k1).derivative(&fh, &rates);
        let k3 = state.axpy(0.5 * dt, &k2).derivative(&fh, &rates);
        let k4 = state.axpy(dt, &k3).derivative(f1, &rates);
        let h6 = dt / 6.0;
        state = state
            .axpy(h6, &k1)
            .axpy(2.0 * h6, &k2)
            .axpy(2.0 * h6, &k3)
            .axpy(h6, &k4);
        // Packed storage is Hermitian by construction, which is exactly (ρ + ρ†)/2.
        rho = DensityMatrix(state.to_matrix());
        visit(k + 1, &rho);
    }
    Ok(rho)
}

/// Trajectory `ρ(t_k)` on the envelope's time grid.
pub fn evolve(
    rho0: &DensityMatrix,
    samples: &[FieldSample],
    atom: &AtomSpec,
    dt: f64,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(samples.len());
    evolve_with(rho0, samples, atom, dt, |_, rho| out.push(*rho))?;
    Ok(out)
}

/// Normalized dark state `(α_b, α_c) ∝ (Ω_ac, −Ω_ab)`, satisfying
/// `Ω_ab α_b + Ω_ac α_c = 0`.
pub fn dark_state(omega_ac: C64, omega_ab: C64) -> Result<(C64, C64)> {
    if !(omega_ac.is_finite() && omega_ab.is_finite()) {
        return Err(Error::invalid("fields", "Rabi frequencies must be finite"));
    }
    let norm = (omega_ac.norm_sqr() + omega_ab.norm_sqr()).sqrt();
    if norm == 0.0 {
        return Err(Error::invalid(
            "fields",
            "dark state undefined when both fields vanish",
        ));
    }
    Ok((omega_ac / norm, -omega_ab / norm))
}
