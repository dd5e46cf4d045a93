//! Right-hand sides of the truncated rotating MHD system in its unfiltered,
//! filtered and limit forms, and their time integration.
//!
//! Integration is a Lawson (integrating-factor) RK4. The exactly solvable
//! linear part `E(h)` is removed from the stages:
//!
//! - unfiltered: `E(h)` = viscous decay composed with `L(h/ε)`
//! - filtered: `E(h)` = viscous decay
//! - limit: `E(h)` = identity
//!
//! The squared gradient norms entering the energy balance are integrated as
//! extra ODE components with the same stage weights, so the discrete balance
//! residual converges at fourth order.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::coriolis::{apply_generator, apply_group};
use crate::error::{Error, Result};
use crate::field::{derivative, laplacian, SpectralVectorField};
use crate::lattice::Lattice;
use crate::product::mhd_nonlinear_unchecked;
use crate::resonance::{qeps_state_unchecked, Q0_apply};
use crate::state::StateU;

/// Ratio bound `dt <= DT_GUARD · ε` for the unfiltered solver.
pub const DT_GUARD: f64 = 0.2;

/// States with `‖U‖² above this are treated as blown up.
const BLOWUP_ENERGY: f64 = 1e200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    UnfilteredMhd,
    FilteredMhd,
    LimitSystem,
}

/// Switches for individual terms; all on by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Terms {
    pub nonlinear: bool,
    pub coriolis: bool,
    pub coupling: bool,
    pub viscosity: bool,
}

impl Default for Terms {
    fn default() -> Self {
        Terms {
            nonlinear: true,
            coriolis: true,
            coupling: true,
            viscosity: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionProblem {
    pub system: System,
    /// Ignored by the limit system.
    pub eps: f64,
    pub initial: StateU,
    pub horizon: f64,
    pub dt: f64,
    /// Keep every `sample_stride`-th step; the first and last are always kept.
    pub sample_stride: usize,
    /// Sobolev index of the `H^s` monitor.
    pub s: f64,
    pub terms: Terms,
}

impl EvolutionProblem {
    pub fn new(system: System, eps: f64, initial: StateU, horizon: f64, dt: f64) -> Self {
        EvolutionProblem {
            system,
            eps,
            initial,
            horizon,
            dt,
            sample_stride: 1,
            s: 0.0,
            terms: Terms::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidProblem(
                "sample_stride must be at least 1".into(),
            ));
        }
        if self.system != System::LimitSystem && !(self.eps > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.system == System::UnfilteredMhd && self.terms.coriolis {
            let limit = DT_GUARD * self.eps;
            if self.dt > limit {
                return Err(Error::TimeStepGuard { dt: self.dt, limit });
            }
        }
        self.initial.u.require_divergence_free()?;
        self.initial.b.require_divergence_free()?;
        Ok(())
    }

    fn viscosities(&self) -> (f64, f64) {
        if self.system == System::LimitSystem || !self.terms.viscosity {
            (0.0, 0.0)
        } else {
            (self.eps, self.eps.sqrt())
        }
    }
}

/// Time integrals of the squared gradient norms, `[∫‖∇u‖², ∫‖∇b‖²,
/// ∫‖∇u‖²_{H^s}, ∫‖∇b‖²_{H^s}]`.
pub type Dissipation = [f64; 4];

#[derive(Clone, Debug)]
pub struct Sample {
    pub t: f64,
    pub state: StateU,
    pub dissipation: Dissipation,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub system: System,
    pub eps: f64,
    pub s: f64,
    /// `(ν_u, ν_b)` used by the run.
    pub viscosity: (f64, f64),
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories are nonempty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Writes `manifest.json`, one snapshot per sample and `ledger.csv`.
    pub fn export(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (i, s) in self.samples.iter().enumerate() {
            let name = format!("sample_{i:05}.json");
            std::fs::write(
                dir.join(&name),
                serde_json::to_string(&s.state.to_snapshot())?,
            )?;
            files.push(json!({ "t": s.t, "file": name }));
        }
        let manifest = json!({
            "system": self.system,
            "eps": self.eps,
            "s": self.s,
            "viscosity": [self.viscosity.0, self.viscosity.1],
            "samples": files,
        });
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        std::fs::write(dir.join("ledger.csv"), energy_report(self).to_csv())?;
        Ok(())
    }

    pub fn manifest(&self) -> Value {
        json!({
            "system": self.system,
            "eps": self.eps,
            "s": self.s,
            "times": self.times(),
        })
    }
}

fn gradient_sq(state: &StateU, s: f64) -> Dissipation {
    [
        state.u.grad_sobolev_sq(0.0),
        state.b.grad_sobolev_sq(0.0),
        state.u.grad_sobolev_sq(s),
        state.b.grad_sobolev_sq(s),
    ]
}

fn decay(f: &SpectralVectorField, nu: f64, h: f64) -> SpectralVectorField {
    if nu == 0.0 || h == 0.0 {
        return f.clone();
    }
    let l = f.lattice().clone();
    f.scale_modes(|i| (-nu * l.norm_sq(i) as f64 * h).exp())
}

/// `−[Q(U,U) + a₂U + L^ε U]` with `Q = (P(u·∇u) − P(b·∇b), u·∇b − b·∇u)`,
/// `a₂ = (−εΔ, −√εΔ)` and `L^ε = (P(u×e₃)/ε + √ε∂₃b, √ε∂₃u)`.
pub fn rhs_unfiltered(state: &StateU, eps: f64) -> Result<StateU> {
    check_eps(eps)?;
    require_admissible(state)?;
    Ok(rhs_unfiltered_terms(state, eps, Terms::default()))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidProblem(format!(
            "eps must be positive, got {eps}"
        )))
    }
}

fn require_admissible(state: &StateU) -> Result<()> {
    state.u.lattice().check_same(state.b.lattice())?;
    state.u.require_divergence_free()?;
    state.b.require_divergence_free()
}

fn coupling(u: &SpectralVectorField, b: &SpectralVectorField, eps: f64) -> StateU {
    let r = eps.sqrt();
    StateU {
        u: derivative(b, 3).scaled(r),
        b: derivative(u, 3).scaled(r),
    }
}

fn viscous(state: &StateU, eps: f64) -> StateU {
    StateU {
        u: laplacian(&state.u).scaled(eps),
        b: laplacian(&state.b).scaled(eps.sqrt()),
    }
}

pub fn rhs_unfiltered_terms(state: &StateU, eps: f64, terms: Terms) -> StateU {
    let mut out = nonstiff_unfiltered(state, eps, terms);
    if terms.coriolis {
        out.u.axpy(-1.0 / eps, &apply_generator(&state.u));
    }
    if terms.viscosity {
        out.axpy(1.0, &viscous(state, eps));
    }
    out
}

fn nonstiff_unfiltered(state: &StateU, eps: f64, terms: Terms) -> StateU {
    let mut out = StateU::zeros(state.lattice());
    if terms.nonlinear {
        out.axpy(-1.0, &mhd_nonlinear_unchecked(&state.u, &state.b));
    }
    if terms.coupling {
        out.axpy(-1.0, &coupling(&state.u, &state.b, eps));
    }
    out
}

/// `L̃ = √ε(L(−τ)∂₃b, ∂₃L(τ)v)`.
fn filtered_coupling(tau: f64, state: &StateU, eps: f64) -> StateU {
    let r = eps.sqrt();
    StateU {
        u: apply_group(-tau, &derivative(&state.b, 3)).scaled(r),
        b: derivative(&apply_group(tau, &state.u), 3).scaled(r),
    }
}

/// `−[Q^ε(V,V) + a₂V + L̃V]` at time `t`.
pub fn rhs_filtered(t: f64, state: &StateU, eps: f64) -> Result<StateU> {
    check_eps(eps)?;
    require_admissible(state)?;
    let mut out = nonstiff_filtered(t, state, eps, Terms::default());
    out.axpy(1.0, &viscous(state, eps));
    Ok(out)
}

fn nonstiff_filtered(t: f64, state: &StateU, eps: f64, terms: Terms) -> StateU {
    let tau = if terms.coriolis { t / eps } else { 0.0 };
    let mut out = StateU::zeros(state.lattice());
    if terms.nonlinear {
        out.axpy(-1.0, &qeps_state_unchecked(tau, state));
    }
    if terms.coupling {
        out.axpy(-1.0, &filtered_coupling(tau, state, eps));
    }
    out
}

/// `F^ε = −a₂V − L̃V`: what separates the filtered system from the limit one
/// besides the oscillating remainder.
pub fn forcing_residual(t: f64, state: &StateU, eps: f64) -> Result<StateU> {
    check_eps(eps)?;
    let mut out = viscous(state, eps);
    out.axpy(-1.0, &filtered_coupling(t / eps, state, eps));
    Ok(out)
}

/// `−Q⁰(V)`; the limit system is inviscid.
pub fn rhs_limit(state: &StateU) -> Result<StateU> {
    require_admissible(state)?;
    Ok(Q0_apply(state)?.scaled(-1.0))
}

struct Stepper<'a> {
    p: &'a EvolutionProblem,
    nu: (f64, f64),
}

impl Stepper<'_> {
    fn propagate(&self, state: &StateU, h: f64) -> StateU {
        let mut u = decay(&state.u, self.nu.0, h);
        if self.p.system == System::UnfilteredMhd && self.p.terms.coriolis {
            u = apply_group(h / self.p.eps, &u);
        }
        StateU {
            u,
            b: decay(&state.b, self.nu.1, h),
        }
    }

    fn nonstiff(&self, t: f64, state: &StateU) -> Result<StateU> {
        let p = self.p;
        Ok(match p.system {
            System::UnfilteredMhd => nonstiff_unfiltered(state, p.eps, p.terms),
            System::FilteredMhd => nonstiff_filtered(t, state, p.eps, p.terms),
            System::LimitSystem => {
                if p.terms.nonlinear {
                    Q0_apply(state)?.scaled(-1.0)
                } else {
                    StateU::zeros(state.lattice())
                }
            }
        })
    }

    /// One Lawson RK4 step; returns the new state and the dissipation
    /// increment.
    fn step(&self, t: f64, y: &StateU, h: f64) -> Result<(StateU, Dissipation)> {
        let s = self.p.s;
        let half = 0.5 * h;
        let k1 = self.nonstiff(t, y)?;
        let mut a = y.clone();
        a.axpy(half, &k1);
        let y2 = self.propagate(&a, half);
        let k2 = self.nonstiff(t + half, &y2)?;
        let ey_half = self.propagate(y, half);
        let mut y3 = ey_half.clone();
        y3.axpy(half, &k2);
        let k3 = self.nonstiff(t + half, &y3)?;
        let mut y4 = self.propagate(y, h);
        y4.axpy(h, &self.propagate(&k3, half));
        let k4 = self.nonstiff(t + h, &y4)?;

        let mut out = self.propagate(y, h);
        let mut mid = k2.clone();
        mid.axpy(1.0, &k3);
        let mut incr = self.propagate(&k1, h);
        incr.axpy(2.0, &self.propagate(&mid, half));
        incr.axpy(1.0, &k4);
        out.axpy(h / 6.0, &incr);

        let g = [
            gradient_sq(y, s),
            gradient_sq(&y2, s),
            gradient_sq(&y3, s),
            gradient_sq(&y4, s),
        ];
        let d: Dissipation =
            std::array::from_fn(|j| h / 6.0 * (g[0][j] + 2.0 * g[1][j] + 2.0 * g[2][j] + g[3][j]));
        Ok((out, d))
    }
}

pub fn integrate(problem: &EvolutionProblem) -> Result<Trajectory> {
    problem.validate()?;
    let nu = problem.viscosities();
    let stepper = Stepper { p: problem, nu };
    let mut traj = Trajectory {
        system: problem.system,
        eps: problem.eps,
        s: problem.s,
        viscosity: nu,
        samples: vec![Sample {
            t: 0.0,
            state: problem.initial.clone(),
            dissipation: [0.0; 4],
        }],
    };
    let full = (problem.horizon / problem.dt * (1.0 + 1e-12)).floor() as usize;
    let rest = problem.horizon - full as f64 * problem.dt;
    let steps = if rest > 1e-12 * problem.horizon.max(1.0) {
        full + 1
    } else {
        full
    };
    let mut y = problem.initial.clone();
    let mut diss = [0.0; 4];
    let mut t = 0.0;
    for i in 0..steps {
        let h = if i < full { problem.dt } else { rest };
        let (next, d) = stepper.step(t, &y, h)?;
        let t_next = if i + 1 == steps {
            problem.horizon
        } else {
            (i + 1) as f64 * problem.dt
        };
        let e = next.norm_l2_sq();
        if !next.is_finite() || !e.is_finite() || e > BLOWUP_ENERGY {
            return Err(Error::BlowUp {
                time: t_next,
                partial: Box::new(traj),
            });
        }
        for j in 0..4 {
            diss[j] += d[j];
        }
        y = next;
        t = t_next;
        if (i + 1) % problem.sample_stride == 0 || i + 1 == steps {
            traj.samples.push(Sample {
                t,
                state: y.clone(),
                dissipation: diss,
            });
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    pub energy_l2: f64,
    pub energy_hs: f64,
    /// `2ν_u ∫‖∇u‖²`
    pub dissipation_u: f64,
    /// `2ν_b ∫‖∇b‖²`
    pub dissipation_b: f64,
    /// `‖U(t)‖² + dissipation − ‖U(0)‖²`
    pub residual: f64,
    /// `‖U(t)‖²_{H^s} + 2ν_u∫‖∇u‖²_{H^s} + 2ν_b∫‖∇b‖²_{H^s}`
    pub hs_monitor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub s: f64,
    pub rows: Vec<LedgerRow>,
    /// `2‖U(0)‖²_{H^s}`
    pub hs_bound: f64,
    /// First sample time with `hs_monitor > hs_bound`.
    pub first_hs_violation: Option<f64>,
}

pub const LEDGER_CSV_HEADER: &str =
    "t,energy_l2,energy_hs,dissipation_u,dissipation_b,residual,hs_monitor";

impl EnergyLedger {
    pub fn max_abs_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.residual.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_hs_monitor(&self) -> f64 {
        self.rows.iter().map(|r| r.hs_monitor).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(LEDGER_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.t,
                r.energy_l2,
                r.energy_hs,
                r.dissipation_u,
                r.dissipation_b,
                r.residual,
                r.hs_monitor
            ));
        }
        out
    }
}

pub fn energy_report(traj: &Trajectory) -> EnergyLedger {
    let (nu_u, nu_b) = traj.viscosity;
    let s = traj.s;
    let first = &traj.samples[0];
    let e0 = first.state.norm_l2_sq();
    let hs_bound = 2.0 * first.state.sobolev_sq(s);
    let rows: Vec<LedgerRow> = traj
        .samples
        .iter()
        .map(|smp| {
            let d = smp.dissipation;
            let energy_l2 = smp.state.norm_l2_sq();
            let du = 2.0 * nu_u * d[0];
            let db = 2.0 * nu_b * d[1];
            let energy_hs = smp.state.sobolev_sq(s);
            LedgerRow {
                t: smp.t,
                energy_l2,
                energy_hs,
                dissipation_u: du,
                dissipation_b: db,
                residual: energy_l2 + du + db - e0,
                hs_monitor: energy_hs + 2.0 * nu_u * d[2] + 2.0 * nu_b * d[3],
            }
        })
        .collect();
    let first_hs_violation = rows.iter().find(|r| r.hs_monitor > hs_bound).map(|r| r.t);
    EnergyLedger {
        s,
        rows,
        hs_bound,
        first_hs_violation,
    }
}

/// `sup_t ‖a(t) − b(t)‖_{L²}` over common sample times, comparing the
/// velocity of `a` with `L(t/ε)` applied to the velocity of `b`, and the
/// magnetic fields directly.
pub fn frame_mismatch(unfiltered: &Trajectory, filtered: &Trajectory) -> Result<f64> {
    if unfiltered.samples.len() != filtered.samples.len() {
        return Err(Error::InvalidProblem(
            "trajectories have different sample counts".into(),
        ));
    }
    let eps = filtered.eps;
    let mut worst = 0.0f64;
    for (a, b) in unfiltered.samples.iter().zip(&filtered.samples) {
        if (a.t - b.t).abs() > 1e-12 * a.t.abs().max(1.0) {
            return Err(Error::InvalidProblem("sample times differ".into()));
        }
        let lv = apply_group(b.t / eps, &b.state.u);
        let du = (&a.state.u - &lv).norm_l2_sq();
        let db = (&a.state.b - &b.state.b).norm_l2_sq();
        worst = worst.max((du + db).sqrt());
    }
    Ok(worst)
}

/// Lattice of a problem, for callers that only hold the trajectory.
pub fn lattice_of(traj: &Trajectory) -> &Arc<Lattice> {
    traj.samples[0].state.lattice()
}
