//! Scenario runners. Each returns an [`Outcome`] whose verdicts can be
//! recomputed from its tables.

use std::path::PathBuf;
use std::sync::Arc;

use mhdlab_core::field::random_divfree;
use mhdlab_core::{Lattice, StateU};

use crate::config::{ExperimentConfig, Scenario};
use crate::report::Outcome;

pub mod converge;
pub mod dispersion;
pub mod energy;
pub mod probe;
pub mod resonance;

/// Per-invocation settings that are not part of the experiment itself.
#[derive(Clone, Debug, Default)]
pub struct Context {
    /// Where streamed outputs (the census) go; `None` keeps them in memory
    /// or skips them.
    pub out_dir: Option<PathBuf>,
    pub verbose: bool,
}

impl Context {
    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[mhdlab] {}", msg.as_ref());
        }
    }
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> anyhow::Result<Outcome> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Energy => energy::run(cfg, ctx),
        Scenario::Converge => converge::run(cfg, ctx),
        Scenario::Resonance => resonance::run(cfg, ctx),
        Scenario::Dispersion => dispersion::run(cfg, ctx),
        Scenario::Probe => probe::run(cfg, ctx),
    }
}

/// Random divergence-free `(u₀, b₀)` from `seed`, each scaled to
/// `‖·‖_{H^s} = amplitude/√2`.
pub fn initial_state(cfg: &ExperimentConfig, lattice: &Arc<Lattice>) -> StateU {
    let scale = |f: mhdlab_core::SpectralVectorField| {
        let norm = f.sobolev_sq(cfg.s).sqrt();
        if norm == 0.0 || cfg.amplitude == 0.0 {
            mhdlab_core::SpectralVectorField::zeros(lattice)
        } else {
            f.scaled(cfg.amplitude / (2f64.sqrt() * norm))
        }
    };
    let u = scale(random_divfree(cfg.seed, lattice, cfg.spectrum_decay));
    let b = scale(random_divfree(
        cfg.seed.wrapping_add(0x5851_f42d_4c95_7f2d),
        lattice,
        cfg.spectrum_decay,
    ));
    StateU { u, b }
}

/// `(dt, stride)` with `dt <= dt_max` and `T/dt` a multiple of
/// `checkpoints`, so that every run samples the same times.
pub fn aligned_step(horizon: f64, dt_max: f64, checkpoints: usize) -> (f64, usize) {
    let per = ((horizon / (checkpoints as f64 * dt_max)) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (horizon / (per * checkpoints) as f64, per)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mhdlab_core::make_lattice;

    #[test]
    fn initial_state_has_requested_norm() {
        let mut cfg = ExperimentConfig::defaults(Scenario::Converge);
        cfg.amplitude = 0.7;
        let l = make_lattice(cfg.n).unwrap();
        let u0 = initial_state(&cfg, &l);
        assert!((u0.sobolev_sq(cfg.s).sqrt() - 0.7).abs() < 1e-12);
        assert!(u0.is_divergence_free(1e-12));
        cfg.amplitude = 0.0;
        assert_eq!(initial_state(&cfg, &l).norm_l2_sq(), 0.0);
    }

    #[test]
    fn steps_align_with_checkpoints() {
        let (dt, per) = aligned_step(0.3, 6.25e-4, 30);
        assert!(dt <= 6.25e-4);
        assert_eq!(per, 16);
        let (dt, per) = aligned_step(0.3, 1e-3, 30);
        assert_eq!(per, 10);
        assert!((dt - 1e-3).abs() < 1e-15);
    }
}
