//! Empirical product-law constants over random divergence-free fields.

use mhdlab_core::field::random_divfree;
use mhdlab_core::product::advect;
use mhdlab_core::resonance::qeps_apply;
use mhdlab_core::{make_lattice, SpectralVectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Context;
use crate::config::ExperimentConfig;
use crate::report::{Outcome, Table, Verdict};

pub const MIN_SAMPLES: usize = 100;
/// Allowed growth of the running maximum over the last quarter of samples.
pub const SATURATION_TOL: f64 = 0.10;
const DECAY_RANGE: (f64, f64) = (1.0, 5.0);

/// One probe draw: the two product-law ratios, the alternative functional and
/// the denominators.
#[derive(Clone, Copy, Debug)]
pub struct ProbeSample {
    pub decay: f64,
    pub t: f64,
    pub eps: f64,
    pub transport: f64,
    pub transport_alt: f64,
    pub transport_den: f64,
    pub filtered: f64,
    pub filtered_den: f64,
}

fn field(rng: &mut ChaCha8Rng, l: &std::sync::Arc<mhdlab_core::Lattice>, decay: f64) -> SpectralVectorField {
    random_divfree(rng.random(), l, decay)
}

/// `(max over everything) / (max over the first three quarters) − 1`.
pub fn last_quartile_increase(values: &[f64]) -> f64 {
    let cut = (3 * values.len()) / 4;
    let head = values[..cut].iter().copied().fold(0.0, f64::max);
    let all = values.iter().copied().fold(0.0, f64::max);
    if head > 0.0 {
        all / head - 1.0
    } else if all > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

pub fn draw(cfg: &ExperimentConfig) -> anyhow::Result<Vec<ProbeSample>> {
    let l = make_lattice(cfg.n)?;
    let sigma = cfg.s;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let decay = rng.random_range(DECAY_RANGE.0..DECAY_RANGE.1);
        let a = field(&mut rng, &l, decay);
        let b = field(&mut rng, &l, decay);
        let f = field(&mut rng, &l, decay);
        let g = field(&mut rng, &l, decay);
        let t = rng.random_range(0.0..cfg.horizon);
        let eps = cfg.eps_list[rng.random_range(0..cfg.eps_list.len())];

        let num = advect(&a, &b)?.inner_sobolev(&b, sigma).abs();
        let den = a.grad_sobolev_sq(sigma - 1.0).sqrt() * b.grad_sobolev_sq(sigma - 1.0);
        let alt_den = a.grad_sobolev_sq(sigma - 1.0).sqrt() * b.sobolev_sq(sigma);
        let qnum = qeps_apply(t, eps, &f, &g)?.inner_sobolev(&f, sigma).abs();
        let qden = f.sobolev_sq(sigma) * g.sobolev_sq(sigma + 1.0).sqrt();
        out.push(ProbeSample {
            decay,
            t,
            eps,
            transport: num / den,
            transport_alt: num / alt_den,
            transport_den: den,
            filtered: qnum / qden,
            filtered_den: qden,
        });
    }
    Ok(out)
}

pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> anyhow::Result<Outcome> {
    ctx.log(format!("probe: {} samples at n={}, sigma={}", cfg.samples, cfg.n, cfg.s));
    let samples = draw(cfg)?;
    let mut out = Outcome::new("probe");
    let mut tab = Table::new(
        "probe_samples",
        &[
            "index", "decay", "t", "eps", "transport_ratio", "transport_ratio_alt",
            "transport_den", "filtered_ratio", "filtered_den",
        ],
    );
    for (i, p) in samples.iter().enumerate() {
        tab.push(vec![
            i.into(),
            p.decay.into(),
            p.t.into(),
            p.eps.into(),
            p.transport.into(),
            p.transport_alt.into(),
            p.transport_den.into(),
            p.filtered.into(),
            p.filtered_den.into(),
        ]);
    }
    let tr: Vec<f64> = samples.iter().map(|p| p.transport).collect();
    let fr: Vec<f64> = samples.iter().map(|p| p.filtered).collect();
    let finite = samples
        .iter()
        .all(|p| p.transport.is_finite() && p.filtered.is_finite() && p.transport_alt.is_finite());
    out.verdicts.push(Verdict::new(
        "sample_count",
        samples.len() >= MIN_SAMPLES,
        samples.len() as f64,
        format!(">= {MIN_SAMPLES}"),
    ));
    out.verdicts.push(Verdict::new("ratios_finite", finite, 0.0, "every ratio finite"));
    let min_den = samples
        .iter()
        .map(|p| p.transport_den.min(p.filtered_den))
        .fold(f64::INFINITY, f64::min);
    out.verdicts.push(Verdict::new("denominators_positive", min_den > 0.0, min_den, "> 0"));
    if !samples.is_empty() {
        out.verdicts.push(Verdict::at_most(
            "transport_saturation",
            last_quartile_increase(&tr),
            SATURATION_TOL,
        ));
        out.verdicts.push(Verdict::at_most(
            "filtered_saturation",
            last_quartile_increase(&fr),
            SATURATION_TOL,
        ));
    }
    let shift = samples
        .iter()
        .map(|p| (p.transport_alt / p.transport - 1.0).abs())
        .fold(0.0, f64::max);
    out.verdicts.push(Verdict::new(
        "index_shift_matters",
        shift > 1e-6,
        shift,
        "ratios with ‖b‖_{H^σ} differ from those with ‖∇b‖_{H^{σ−1}}",
    ));
    out.metric("sigma", cfg.s);
    out.metric("transport_max", tr.iter().copied().fold(0.0, f64::max));
    out.metric("filtered_max", fr.iter().copied().fold(0.0, f64::max));
    out.tables.push(tab);
    out.notes.push(
        "transport = |⟨a·∇b, b⟩_{H^σ}| / (‖∇a‖_{H^{σ−1}} ‖∇b‖²_{H^{σ−1}}); filtered = |⟨Q^ε(t)(f,g), f⟩_{H^σ}| / (‖f‖²_{H^σ} ‖g‖_{H^{σ+1}}); σ = s".into(),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartile_increase() {
        assert!((last_quartile_increase(&[1.0, 2.0, 2.0, 2.2]) - 0.1).abs() < 1e-12);
        assert_eq!(last_quartile_increase(&[0.0; 4]), 0.0);
    }
}
