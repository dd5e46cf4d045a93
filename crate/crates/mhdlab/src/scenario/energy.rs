//! Galerkin energy identity and `H^s` bound for the unfiltered system.

use mhdlab_core::dynamics::{energy_report, integrate, EnergyLedger, EvolutionProblem, System};
use mhdlab_core::{make_lattice, Error};
use rayon::prelude::*;

use super::{initial_state, Context};
use crate::config::ExperimentConfig;
use crate::report::{Outcome, Table, Verdict};

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const ORDER_RANGE: (f64, f64) = (12.0, 20.0);

enum RunResult {
    Done(Box<EnergyLedger>, Box<EnergyLedger>),
    BlowUp(f64),
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> anyhow::Result<Outcome> {
    let l = make_lattice(cfg.n)?;
    let u0 = initial_state(cfg, &l);
    let runs: Vec<(f64, f64, RunResult)> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| -> anyhow::Result<_> {
            let dt = cfg.dt_for(eps);
            ctx.log(format!("energy: eps={eps} dt={dt}"));
            let ledger = |h: f64, stride: usize| -> anyhow::Result<Option<EnergyLedger>> {
                let mut p = EvolutionProblem::new(System::UnfilteredMhd, eps, u0.clone(), cfg.horizon, h);
                p.s = cfg.s;
                p.sample_stride = stride;
                match integrate(&p) {
                    Ok(t) => Ok(Some(energy_report(&t))),
                    Err(Error::BlowUp { .. }) => Ok(None),
                    Err(e) => Err(e.into()),
                }
            };
            let coarse = ledger(dt, cfg.sample_stride)?;
            let fine = ledger(0.5 * dt, 2 * cfg.sample_stride)?;
            Ok(match (coarse, fine) {
                (Some(a), Some(b)) => (eps, dt, RunResult::Done(Box::new(a), Box::new(b))),
                _ => (eps, dt, RunResult::BlowUp(cfg.horizon)),
            })
        })
        .collect::<anyhow::Result<_>>()?;

    let mut out = Outcome::new("energy");
    let mut ledger_tab = Table::new(
        "energy_ledger",
        &[
            "eps", "dt", "t", "energy_l2", "energy_hs", "dissipation_u", "dissipation_b",
            "residual", "hs_monitor",
        ],
    );
    let mut summary = Table::new(
        "energy_summary",
        &[
            "eps", "dt", "max_residual", "max_residual_half_dt", "order_ratio", "max_hs_monitor",
            "hs_bound",
        ],
    );
    for (eps, dt, r) in runs {
        let tag = format!("{eps}");
        let (a, b) = match r {
            RunResult::Done(a, b) => (a, b),
            RunResult::BlowUp(t) => {
                out.verdicts.push(Verdict::new(
                    &format!("no_blowup[eps={tag}]"),
                    false,
                    t,
                    "trajectory stays finite",
                ));
                continue;
            }
        };
        for row in &a.rows {
            ledger_tab.push(vec![
                eps.into(),
                dt.into(),
                row.t.into(),
                row.energy_l2.into(),
                row.energy_hs.into(),
                row.dissipation_u.into(),
                row.dissipation_b.into(),
                row.residual.into(),
                row.hs_monitor.into(),
            ]);
        }
        let (ra, rb) = (a.max_abs_residual(), b.max_abs_residual());
        let ratio = ra / rb;
        summary.push(vec![
            eps.into(),
            dt.into(),
            ra.into(),
            rb.into(),
            ratio.into(),
            a.max_hs_monitor().into(),
            a.hs_bound.into(),
        ]);
        out.verdicts.push(Verdict::at_most(&format!("energy_residual[eps={tag}]"), ra, RESIDUAL_TOL));
        if ra == 0.0 && rb == 0.0 {
            out.verdicts.push(Verdict::new(
                &format!("energy_order[eps={tag}]"),
                true,
                0.0,
                "residual vanishes identically",
            ));
        } else {
            out.verdicts.push(Verdict::within(
                &format!("energy_order[eps={tag}]"),
                ratio,
                ORDER_RANGE.0,
                ORDER_RANGE.1,
            ));
        }
        let hs_ratio = if a.hs_bound > 0.0 {
            a.max_hs_monitor() / a.hs_bound
        } else {
            0.0
        };
        out.verdicts.push(Verdict::at_most(&format!("hs_bound[eps={tag}]"), hs_ratio, 1.0));
    }
    out.metric("initial_hs", u0.sobolev_sq(cfg.s).sqrt());
    out.metric("initial_l2", u0.norm_l2_sq().sqrt());
    out.tables.push(ledger_tab);
    out.tables.push(summary);
    out.notes.push(
        "residual = ‖U(t)‖² + 2ε∫‖∇u‖² + 2√ε∫‖∇b‖² − ‖U(0)‖²; hs_bound verdict value is max monitor / (2‖U₀‖²_{H^s})"
            .into(),
    );
    Ok(out)
}
