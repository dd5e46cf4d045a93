//! Triad phases, exact resonance detection, the filtered and limit quadratic
//! forms, and the oscillating remainder with its low/high split.
//!
//! Triad convention: `n = k + m`, `σ = (σ₁, σ₂, σ₃)` where `σ₁` labels the
//! output mode `n`, `σ₂` the first factor at `k` and `σ₃` the second at `m`.
//! The phase is `ω_σ = σ₁ω(n) − σ₂ω(k) − σ₃ω(m)` and a triad contributes
//!
//! `e^{−iτω_σ} C_σ(n,k,m) f_{σ₂}(k) g_{σ₃}(m) ν^{σ₁}(n)`,
//! `C_σ = (ν^{σ₂}(k)·im)(ν^{σ₃}(m), ν^{σ₁}(n))`,
//!
//! with `τ = t/ε`, `f_s = (v̂, ν^s)` and `g_s = (ŵ, ν^s)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;

use crate::coriolis::{apply_group, frames, EigenFrame, FrameTable, Sign};
use crate::error::{Error, Result};
use crate::field::{project_leray, vertical_average, SpectralVectorField};
use crate::lattice::{mode_norm_sq, Lattice, Mode};
use crate::product::{advect, mhd_nonlinear, mhd_nonlinear_unchecked};
use crate::state::StateU;
use crate::vec3::{self, C3};

/// Largest lattice radius for which triad tables and censuses are built.
pub const CENSUS_MAX_RADIUS: usize = 12;

/// Tolerance of the floating-point resonance cross-check.
pub const FLOAT_RESONANCE_TOL: f64 = 1e-9;

pub type Sigma = [Sign; 3];

/// All eight sign patterns, `+++` first, in the order used by
/// [`sigma_index`].
pub const ALL_SIGMAS: [Sigma; 8] = {
    use Sign::{Minus as M, Plus as P};
    [
        [P, P, P],
        [P, P, M],
        [P, M, P],
        [P, M, M],
        [M, P, P],
        [M, P, M],
        [M, M, P],
        [M, M, M],
    ]
};

pub fn sigma_index(s: Sigma) -> usize {
    s.iter()
        .fold(0, |acc, &x| 2 * acc + usize::from(x == Sign::Minus))
}

pub fn sigma_label(s: Sigma) -> String {
    s.iter().map(|x| x.symbol()).collect()
}

pub fn parse_sigma(text: &str) -> Option<Sigma> {
    let c: Vec<char> = text.chars().collect();
    if c.len() != 3 {
        return None;
    }
    let one = |ch: char| match ch {
        '+' => Some(Sign::Plus),
        '-' => Some(Sign::Minus),
        _ => None,
    };
    Some([one(c[0])?, one(c[1])?, one(c[2])?])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triad {
    pub n: Mode,
    pub k: Mode,
    pub m: Mode,
    pub sigma: Sigma,
    pub omega_sigma: f64,
    pub resonant: bool,
}

fn check_triad(n: Mode, k: Mode, m: Mode) -> Result<()> {
    if [k[0] + m[0], k[1] + m[1], k[2] + m[2]] != n {
        return Err(Error::DegenerateTriad(format!("{k:?} + {m:?} != {n:?}")));
    }
    if n == [0; 3] || k == [0; 3] || m == [0; 3] {
        return Err(Error::DegenerateTriad(format!(
            "zero mode in ({n:?}, {k:?}, {m:?})"
        )));
    }
    Ok(())
}

fn omega_unchecked(k: Mode) -> f64 {
    let [a, b, c] = k.map(f64::from);
    c / (a * a + b * b + c * c).sqrt()
}

pub fn omega_sigma(n: Mode, k: Mode, m: Mode, sigma: Sigma) -> Result<f64> {
    check_triad(n, k, m)?;
    Ok(omega_sigma_unchecked(n, k, m, sigma))
}

fn omega_sigma_unchecked(n: Mode, k: Mode, m: Mode, sigma: Sigma) -> f64 {
    sigma[0].value() as f64 * omega_unchecked(n)
        - sigma[1].value() as f64 * omega_unchecked(k)
        - sigma[2].value() as f64 * omega_unchecked(m)
}

/// Decides `σ₁n₃/√N = σ₂k₃/√K + σ₃m₃/√M` in integer arithmetic.
pub fn is_resonant_exact(n: Mode, k: Mode, m: Mode, sigma: Sigma) -> Result<bool> {
    check_triad(n, k, m)?;
    Ok(resonant_exact_unchecked(n, k, m, sigma))
}

fn resonant_exact_unchecked(n: Mode, k: Mode, m: Mode, sigma: Sigma) -> bool {
    let a = sigma[0].value() * n[2] as i64;
    let b = sigma[1].value() * k[2] as i64;
    let c = sigma[2].value() * m[2] as i64;
    let (nn, kk, mm) = (mode_norm_sq(n), mode_norm_sq(k), mode_norm_sq(m));
    // With x = a/√N, y = b/√K, z = c/√M the equation x = y + z holds iff
    // sign x = sign(y+z) and x² = (y+z)², and the latter squares to
    // D = a²KM − b²NM − c²NK = 2bcN√(KM), i.e. sign D = sign bc and
    // D² = 4b²c²N²KM.
    let rhs_sign = if b * c >= 0 {
        (b + c).signum()
    } else {
        // opposite signs: the larger of |y|, |z| wins
        let (y2, z2) = (b * b * mm, c * c * kk);
        match y2.cmp(&z2) {
            std::cmp::Ordering::Greater => b.signum(),
            std::cmp::Ordering::Less => c.signum(),
            std::cmp::Ordering::Equal => 0,
        }
    };
    if a.signum() != rhs_sign {
        return false;
    }
    match exact_squares_i128(a, b, c, nn, kk, mm) {
        Some(r) => r,
        None => exact_squares_big(a, b, c, nn, kk, mm),
    }
}

fn exact_squares_i128(a: i64, b: i64, c: i64, nn: i64, kk: i64, mm: i64) -> Option<bool> {
    let (a, b, c, nn, kk, mm) = (
        a as i128, b as i128, c as i128, nn as i128, kk as i128, mm as i128,
    );
    let t1 = a.checked_mul(a)?.checked_mul(kk)?.checked_mul(mm)?;
    let t2 = b.checked_mul(b)?.checked_mul(nn)?.checked_mul(mm)?;
    let t3 = c.checked_mul(c)?.checked_mul(nn)?.checked_mul(kk)?;
    let d = t1.checked_sub(t2)?.checked_sub(t3)?;
    let bc = b * c;
    if d.signum() != bc.signum() {
        return Some(false);
    }
    let lhs = d.checked_mul(d)?;
    let rhs = bc
        .checked_mul(bc)?
        .checked_mul(4)?
        .checked_mul(nn)?
        .checked_mul(nn)?
        .checked_mul(kk)?
        .checked_mul(mm)?;
    Some(lhs == rhs)
}

fn exact_squares_big(a: i64, b: i64, c: i64, nn: i64, kk: i64, mm: i64) -> bool {
    let [a, b, c, nn, kk, mm] = [a, b, c, nn, kk, mm].map(BigInt::from);
    let d = &a * &a * &kk * &mm - &b * &b * &nn * &mm - &c * &c * &nn * &kk;
    let bc = &b * &c;
    if d.sign() != bc.sign() {
        return false;
    }
    &d * &d == BigInt::from(4) * &bc * &bc * &nn * &nn * &kk * &mm
}

fn float_resonant(omega: f64) -> bool {
    omega.abs() < FLOAT_RESONANCE_TOL
}

/// Aggregate statistics of a triad census.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CensusStats {
    pub radius: usize,
    pub triads: usize,
    pub resonant: usize,
    /// `(total, resonant)` per sign pattern, indexed by [`sigma_index`].
    pub per_sigma: [(usize, usize); 8],
    /// `(total, resonant)` per output shell `|n|²`.
    pub per_shell: BTreeMap<i64, (usize, usize)>,
    /// Triads where the exact and floating-point tests disagree.
    pub float_disagreements: usize,
    /// Triads whose flag differs from that of `(−n, −k, −m, σ)`.
    pub negation_asymmetries: usize,
    /// Triads whose flag differs after flipping every third component.
    pub vertical_flip_asymmetries: usize,
    /// Smallest `|ω_σ|` over nonresonant triads with all modes `|·| <= low_cutoff`.
    pub min_nonresonant_omega: Option<f64>,
    pub low_cutoff: usize,
}

/// Streams every triad with `|n|,|k|,|m| <= lattice.n` to `sink` in a fixed
/// order (output mode, then first factor, then sign pattern) and returns the
/// census statistics.
pub fn census(
    lattice: &Lattice,
    sigma_filter: Option<&[Sigma]>,
    low_cutoff: Option<usize>,
    mut sink: impl FnMut(&Triad) -> Result<()>,
) -> Result<CensusStats> {
    let radius = lattice.radius();
    if radius > CENSUS_MAX_RADIUS {
        return Err(Error::CensusGuard(radius));
    }
    let sigmas: Vec<Sigma> = match sigma_filter {
        Some(f) if !f.is_empty() => f.to_vec(),
        _ => ALL_SIGMAS.to_vec(),
    };
    let low = low_cutoff.unwrap_or(radius);
    let low_sq = (low * low) as i64;
    let mut st = CensusStats {
        radius,
        low_cutoff: low,
        ..Default::default()
    };
    let flip = |x: Mode| [x[0], x[1], -x[2]];
    let neg = |x: Mode| [-x[0], -x[1], -x[2]];
    for &n in lattice.modes() {
        if n == [0; 3] {
            continue;
        }
        for &k in lattice.modes() {
            let m = [n[0] - k[0], n[1] - k[1], n[2] - k[2]];
            if k == [0; 3] || m == [0; 3] || !lattice.contains(m) {
                continue;
            }
            let is_low = mode_norm_sq(n).max(mode_norm_sq(k)).max(mode_norm_sq(m)) <= low_sq;
            for &s in &sigmas {
                let w = omega_sigma_unchecked(n, k, m, s);
                let r = resonant_exact_unchecked(n, k, m, s);
                let t = Triad {
                    n,
                    k,
                    m,
                    sigma: s,
                    omega_sigma: w,
                    resonant: r,
                };
                st.triads += 1;
                let e = &mut st.per_sigma[sigma_index(s)];
                e.0 += 1;
                let sh = st.per_shell.entry(mode_norm_sq(n)).or_default();
                sh.0 += 1;
                if r {
                    st.resonant += 1;
                    e.1 += 1;
                    sh.1 += 1;
                } else if is_low {
                    let a = w.abs();
                    st.min_nonresonant_omega =
                        Some(st.min_nonresonant_omega.map_or(a, |b: f64| b.min(a)));
                }
                if float_resonant(w) != r {
                    st.float_disagreements += 1;
                }
                if resonant_exact_unchecked(neg(n), neg(k), neg(m), s) != r {
                    st.negation_asymmetries += 1;
                }
                if resonant_exact_unchecked(flip(n), flip(k), flip(m), s) != r {
                    st.vertical_flip_asymmetries += 1;
                }
                sink(&t)?;
            }
        }
    }
    Ok(st)
}

/// Collects the full census into memory.
pub fn enumerate_triads(
    lattice: &Lattice,
    sigma_filter: Option<&[Sigma]>,
) -> Result<(Vec<Triad>, CensusStats)> {
    let mut all = Vec::new();
    let st = census(lattice, sigma_filter, None, |t| {
        all.push(*t);
        Ok(())
    })?;
    Ok((all, st))
}

pub const CENSUS_CSV_HEADER: &str = "n1,n2,n3,k1,k2,k3,m1,m2,m3,sigma,omega,resonant";

pub fn write_triad_csv(out: &mut impl Write, t: &Triad) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{:.16e},{}",
        t.n[0],
        t.n[1],
        t.n[2],
        t.k[0],
        t.k[1],
        t.k[2],
        t.m[0],
        t.m[1],
        t.m[2],
        sigma_label(t.sigma),
        t.omega_sigma,
        u8::from(t.resonant)
    )
}

#[derive(Clone, Copy, Debug)]
struct TriadPair {
    n: u32,
    k: u32,
    m: u32,
    max_norm_sq: i64,
}

#[derive(Clone, Copy, Debug)]
struct SigmaEntry {
    coef: Complex64,
    omega: f64,
    resonant: bool,
}

/// Precomputed interaction coefficients for every triad of a lattice.
pub(crate) struct InteractionTable {
    pairs: Vec<TriadPair>,
    entries: Vec<[SigmaEntry; 8]>,
    /// `(pair, sigma index)` of every exactly resonant term.
    resonant: Vec<(u32, u8)>,
}

fn interaction_coefficient(
    fk: &EigenFrame,
    fm: &EigenFrame,
    fnn: &EigenFrame,
    m: Mode,
    s: Sigma,
) -> Complex64 {
    let im = vec3::scale(&vec3::from_re(m.map(f64::from)), Complex64::new(0.0, 1.0));
    vec3::dot(fk.nu(s[1]), &im) * vec3::hdot(fm.nu(s[2]), fnn.nu(s[0]))
}

impl InteractionTable {
    fn new(lattice: &Arc<Lattice>) -> Result<Self> {
        if lattice.radius() > CENSUS_MAX_RADIUS {
            return Err(Error::CensusGuard(lattice.radius()));
        }
        let fr = frames(lattice);
        let mut pairs = Vec::new();
        let mut entries = Vec::new();
        let mut resonant = Vec::new();
        for ni in 0..lattice.len() {
            if ni == lattice.origin() {
                continue;
            }
            let n = lattice.mode(ni);
            for ki in 0..lattice.len() {
                if ki == lattice.origin() {
                    continue;
                }
                let k = lattice.mode(ki);
                let m = [n[0] - k[0], n[1] - k[1], n[2] - k[2]];
                let Some(mi) = lattice.index_of(m) else {
                    continue;
                };
                if mi == lattice.origin() {
                    continue;
                }
                let p = pairs.len() as u32;
                pairs.push(TriadPair {
                    n: ni as u32,
                    k: ki as u32,
                    m: mi as u32,
                    max_norm_sq: lattice
                        .norm_sq(ni)
                        .max(lattice.norm_sq(ki))
                        .max(lattice.norm_sq(mi)),
                });
                let row: [SigmaEntry; 8] = std::array::from_fn(|si| {
                    let s = ALL_SIGMAS[si];
                    let r = resonant_exact_unchecked(n, k, m, s);
                    if r {
                        resonant.push((p, si as u8));
                    }
                    SigmaEntry {
                        coef: interaction_coefficient(fr.get(ki), fr.get(mi), fr.get(ni), m, s),
                        omega: omega_sigma_unchecked(n, k, m, s),
                        resonant: r,
                    }
                });
                entries.push(row);
            }
        }
        Ok(InteractionTable {
            pairs,
            entries,
            resonant,
        })
    }
}

pub(crate) fn table(lattice: &Arc<Lattice>) -> Result<&InteractionTable> {
    if lattice.radius() > CENSUS_MAX_RADIUS {
        return Err(Error::CensusGuard(lattice.radius()));
    }
    Ok(lattice
        .interactions
        .get_or_init(|| InteractionTable::new(lattice).expect("radius checked above")))
}

/// One term of the triad expansion of the filtered quadratic form.
#[derive(Clone, Copy, Debug)]
pub struct InteractionTerm {
    pub triad: Triad,
    /// `C_σ(n,k,m)`.
    pub coefficient: Complex64,
    pub nu_out: C3,
    pub nu_k: C3,
    pub nu_m: C3,
}

impl InteractionTerm {
    /// Contribution to mode `n` at fast time `τ`.
    pub fn contribution(&self, tau: f64, vk: &C3, wm: &C3) -> C3 {
        let f = vec3::hdot(vk, &self.nu_k);
        let g = vec3::hdot(wm, &self.nu_m);
        let phase = Complex64::from_polar(1.0, -tau * self.triad.omega_sigma);
        vec3::scale(&self.nu_out, phase * self.coefficient * f * g)
    }
}

/// All interaction terms of a lattice, in census order.
pub fn interaction_terms(lattice: &Arc<Lattice>) -> Result<Vec<InteractionTerm>> {
    let tab = table(lattice)?;
    let fr = frames(lattice);
    let mut out = Vec::with_capacity(tab.pairs.len() * 8);
    for (p, row) in tab.pairs.iter().zip(&tab.entries) {
        for (si, e) in row.iter().enumerate() {
            let s = ALL_SIGMAS[si];
            out.push(InteractionTerm {
                triad: Triad {
                    n: lattice.mode(p.n as usize),
                    k: lattice.mode(p.k as usize),
                    m: lattice.mode(p.m as usize),
                    sigma: s,
                    omega_sigma: e.omega,
                    resonant: e.resonant,
                },
                coefficient: e.coef,
                nu_out: *fr.get(p.n as usize).nu(s[0]),
                nu_k: *fr.get(p.k as usize).nu(s[1]),
                nu_m: *fr.get(p.m as usize).nu(s[2]),
            });
        }
    }
    Ok(out)
}

/// Eigencoordinates `[(f̂,ν⁺), (f̂,ν⁻)]` of every mode.
fn coordinates(f: &SpectralVectorField, fr: &FrameTable) -> Vec<[Complex64; 2]> {
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let e = fr.get(i);
            [e.coord(c, Sign::Plus), e.coord(c, Sign::Minus)]
        })
        .collect()
}

fn sidx(s: Sign) -> usize {
    usize::from(s == Sign::Minus)
}

/// Which terms of the triad expansion to sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TermSet {
    All,
    Resonant,
}

fn triad_sum(
    tau: f64,
    v: &SpectralVectorField,
    w: &SpectralVectorField,
    set: TermSet,
) -> Result<SpectralVectorField> {
    let l = v.lattice();
    l.check_same(w.lattice())?;
    let tab = table(l)?;
    let fr = frames(l);
    let fv = coordinates(v, fr);
    let gw = coordinates(w, fr);
    // accumulate coordinates along ν^{σ₁}(n)
    let mut acc = vec![[Complex64::new(0.0, 0.0); 2]; l.len()];
    let mut add = |p: &TriadPair, si: usize, e: &SigmaEntry| {
        let s = ALL_SIGMAS[si];
        let amp = e.coef * fv[p.k as usize][sidx(s[1])] * gw[p.m as usize][sidx(s[2])];
        let ph = if tau == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, -tau * e.omega)
        };
        acc[p.n as usize][sidx(s[0])] += ph * amp;
    };
    match set {
        TermSet::All => {
            for (p, row) in tab.pairs.iter().zip(&tab.entries) {
                for (si, e) in row.iter().enumerate() {
                    add(p, si, e);
                }
            }
        }
        TermSet::Resonant => {
            for &(p, si) in &tab.resonant {
                let pair = &tab.pairs[p as usize];
                add(pair, si as usize, &tab.entries[p as usize][si as usize]);
            }
        }
    }
    Ok(SpectralVectorField::from_fn(l, |i, _| {
        let e = fr.get(i);
        let a = acc[i];
        std::array::from_fn(|j| a[0] * e.nu_plus[j] + a[1] * e.nu_minus[j])
    }))
}

/// `L(−τ) P (L(τ)v · ∇ L(τ)w)` with `τ = t/ε`, by group conjugation.
pub fn qeps_apply(
    t: f64,
    eps: f64,
    v: &SpectralVectorField,
    w: &SpectralVectorField,
) -> Result<SpectralVectorField> {
    let tau = fast_time(t, eps)?;
    let lv = apply_group(tau, v);
    let lw = apply_group(tau, w);
    Ok(apply_group(-tau, &project_leray(&advect(&lv, &lw)?)))
}

/// The same form as [`qeps_apply`], summed over interaction terms.
pub fn qeps_triad_sum(
    t: f64,
    eps: f64,
    v: &SpectralVectorField,
    w: &SpectralVectorField,
) -> Result<SpectralVectorField> {
    let tau = fast_time(t, eps)?;
    v.require_divergence_free()?;
    triad_sum(tau, v, w, TermSet::All)
}

fn fast_time(t: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "eps must be positive, got {eps}"
        )));
    }
    Ok(t / eps)
}

/// `q⁰(v,w)`: the exactly resonant part of the filtered form.
pub fn q0_bilinear(
    v: &SpectralVectorField,
    w: &SpectralVectorField,
) -> Result<SpectralVectorField> {
    v.require_divergence_free()?;
    triad_sum(0.0, v, w, TermSet::Resonant)
}

pub fn q0_apply(v: &SpectralVectorField) -> Result<SpectralVectorField> {
    q0_bilinear(v, v)
}

/// `Q⁰(V) = (q⁰(v,v) − avg P(b·∇b), v̄·∇b − b·∇v̄)`.
#[allow(non_snake_case)]
pub fn Q0_apply(state: &StateU) -> Result<StateU> {
    let (v, b) = (&state.u, &state.b);
    let q = q0_apply(v)?;
    let vbar = vertical_average(v);
    let mixed = mhd_nonlinear(&vbar, b)?;
    // mixed.u = P(v̄·∇v̄) − P(b·∇b); the first term has only k₃ = 0 modes
    let lorentz = vertical_average(&(&project_leray(&advect(&vbar, &vbar)?) - &mixed.u));
    Ok(StateU {
        u: &q - &lorentz,
        b: mixed.b,
    })
}

/// `Q^ε(V) = (q^ε(v,v) − L(−τ)P(b·∇b), L(τ)v·∇b − b·∇L(τ)v)`.
#[allow(non_snake_case)]
pub fn Qeps_apply(t: f64, eps: f64, state: &StateU) -> Result<StateU> {
    let tau = fast_time(t, eps)?;
    state.u.require_divergence_free()?;
    state.b.require_divergence_free()?;
    Ok(qeps_state_unchecked(tau, state))
}

pub(crate) fn qeps_state_unchecked(tau: f64, state: &StateU) -> StateU {
    let lv = apply_group(tau, &state.u);
    let q = mhd_nonlinear_unchecked(&lv, &state.b);
    StateU {
        u: apply_group(-tau, &q.u),
        b: q.b,
    }
}

/// Remainder block labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    /// Nonresonant part of the velocity self-interaction.
    A0,
    /// Oscillating part of the Lorentz force.
    A1,
    /// Oscillating velocity transporting `b`.
    A2,
    /// `b` stretched by the oscillating velocity.
    A3,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::A0, Block::A1, Block::A2, Block::A3];

    fn magnetic(self) -> bool {
        matches!(self, Block::A2 | Block::A3)
    }
}

/// One oscillating term `e^{−iτφ} amp` placed at mode `n`.
#[derive(Clone, Copy, Debug)]
pub struct PhaseTerm {
    pub block: Block,
    pub n: usize,
    pub phi: f64,
    pub amp: C3,
    /// Largest `|·|²` over the modes that must be low for the term to be
    /// counted in the low-frequency part.
    pub max_norm_sq: i64,
}

/// The remainder `Σ A_k = Q^ε(V) − Q⁰(V)` at fixed `V`, as a sum of pure
/// phases in the fast time `τ`.
#[derive(Clone, Debug)]
pub struct RemainderBlocks {
    lattice: Arc<Lattice>,
    pub tau: f64,
    pub terms: Vec<PhaseTerm>,
}

/// Low/high split of the remainder and the absorbed low part.
#[derive(Clone, Debug)]
pub struct RemainderSplit {
    pub cutoff: usize,
    /// Terms with every participating mode `|·| <= N`.
    pub low: StateU,
    pub high: StateU,
    /// Low terms weighted by `1/(iφ)`.
    pub absorbed: StateU,
}

/// Builds the phase expansion of `Q^ε(V) − Q⁰(V)` and records the fast time
/// `t/ε` at which it is evaluated.
pub fn oscillating_remainder(t: f64, eps: f64, state: &StateU) -> Result<RemainderBlocks> {
    let tau = fast_time(t, eps)?;
    let (v, b) = (&state.u, &state.b);
    let l = v.lattice().clone();
    l.check_same(b.lattice())?;
    v.require_divergence_free()?;
    b.require_divergence_free()?;
    let tab = table(&l)?;
    let fr = frames(&l);
    let fv = coordinates(v, fr);
    let mut terms = Vec::new();

    for (p, row) in tab.pairs.iter().zip(&tab.entries) {
        for (si, e) in row.iter().enumerate() {
            if e.resonant {
                continue;
            }
            let s = ALL_SIGMAS[si];
            let amp = e.coef * fv[p.k as usize][sidx(s[1])] * fv[p.m as usize][sidx(s[2])];
            if amp == Complex64::new(0.0, 0.0) {
                continue;
            }
            terms.push(PhaseTerm {
                block: Block::A0,
                n: p.n as usize,
                phi: e.omega,
                amp: vec3::scale(fr.get(p.n as usize).nu(s[0]), amp),
                max_norm_sq: p.max_norm_sq,
            });
        }
    }

    let lorentz = project_leray(&advect(b, b)?);
    for (i, c) in lorentz.coeffs().iter().enumerate() {
        if l.mode(i)[2] == 0 {
            continue;
        }
        let e = fr.get(i);
        for s in Sign::BOTH {
            terms.push(PhaseTerm {
                block: Block::A1,
                n: i,
                phi: s.value() as f64 * e.omega,
                amp: vec3::scale(e.nu(s), -e.coord(c, s)),
                max_norm_sq: l.norm_sq(i),
            });
        }
    }

    let bc = b.coeffs();
    let i1 = Complex64::new(0.0, 1.0);
    for p in &tab.pairs {
        let (ni, ki, mi) = (p.n as usize, p.k as usize, p.m as usize);
        let m = l.wavevector(mi);
        // A₂: oscillating velocity at k transports b at m
        if l.mode(ki)[2] != 0 {
            let e = fr.get(ki);
            for s in Sign::BOTH {
                let a = vec3::dot_re(e.nu(s), &m) * i1 * fv[ki][sidx(s)];
                terms.push(PhaseTerm {
                    block: Block::A2,
                    n: ni,
                    phi: -(s.value() as f64) * e.omega,
                    amp: vec3::scale(&bc[mi], a),
                    max_norm_sq: p.max_norm_sq,
                });
            }
        }
        // A₃: b at k stretches the oscillating velocity at m
        if l.mode(mi)[2] != 0 {
            let e = fr.get(mi);
            let a = -(vec3::dot_re(&bc[ki], &m) * i1);
            for s in Sign::BOTH {
                terms.push(PhaseTerm {
                    block: Block::A3,
                    n: ni,
                    phi: -(s.value() as f64) * e.omega,
                    amp: vec3::scale(e.nu(s), a * fv[mi][sidx(s)]),
                    max_norm_sq: p.max_norm_sq,
                });
            }
        }
    }
    Ok(RemainderBlocks {
        lattice: l,
        tau,
        terms,
    })
}

impl RemainderBlocks {
    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    /// Sum of the selected terms, each weighted by `weight(term)`, at fast
    /// time `tau`.
    pub fn sum_at(
        &self,
        tau: f64,
        mut select: impl FnMut(&PhaseTerm) -> Option<Complex64>,
    ) -> StateU {
        let l = &self.lattice;
        let mut u = vec![vec3::ZERO; l.len()];
        let mut b = vec![vec3::ZERO; l.len()];
        for t in &self.terms {
            let Some(w) = select(t) else { continue };
            let z = Complex64::from_polar(1.0, -tau * t.phi) * w;
            let dst = if t.block.magnetic() {
                &mut b[t.n]
            } else {
                &mut u[t.n]
            };
            for j in 0..3 {
                dst[j] += z * t.amp[j];
            }
        }
        StateU {
            u: SpectralVectorField::from_coeffs(l, u),
            b: SpectralVectorField::from_coeffs(l, b),
        }
    }

    pub fn block(&self, which: Block) -> StateU {
        self.sum_at(self.tau, |t| {
            (t.block == which).then_some(Complex64::new(1.0, 0.0))
        })
    }

    pub fn total(&self) -> StateU {
        self.sum_at(self.tau, |_| Some(Complex64::new(1.0, 0.0)))
    }
}

/// Splits the remainder at cutoff `N` into low and high parts and absorbs the
/// low part: `absorbed = Σ_low e^{−iτφ} amp / (iφ)`, so that at fixed `V`
/// `ε ∂_t absorbed + low = 0`.
pub fn split_and_absorb(blocks: &RemainderBlocks, cutoff: usize) -> Result<RemainderSplit> {
    let max = blocks.lattice.radius();
    if cutoff == 0 || cutoff > max {
        return Err(Error::TruncationRange {
            requested: cutoff,
            max,
        });
    }
    let c2 = (cutoff * cutoff) as i64;
    let one = Complex64::new(1.0, 0.0);
    let low = blocks.sum_at(blocks.tau, |t| (t.max_norm_sq <= c2).then_some(one));
    let high = blocks.sum_at(blocks.tau, |t| (t.max_norm_sq > c2).then_some(one));
    let absorbed = split_absorbed_at(blocks, cutoff, blocks.tau);
    Ok(RemainderSplit {
        cutoff,
        low,
        high,
        absorbed,
    })
}

/// The absorbed low part at an arbitrary fast time, with `V` held fixed.
pub fn split_absorbed_at(blocks: &RemainderBlocks, cutoff: usize, tau: f64) -> StateU {
    let c2 = (cutoff * cutoff) as i64;
    blocks.sum_at(tau, |t| {
        (t.max_norm_sq <= c2).then(|| Complex64::new(0.0, -1.0 / t.phi))
    })
}

/// `φ = W + ε R̃`.
pub fn corrector(w: &StateU, r_tilde: &StateU, eps: f64) -> Result<StateU> {
    w.lattice().check_same(r_tilde.lattice())?;
    let mut out = w.clone();
    if eps != 0.0 {
        out.axpy(eps, r_tilde);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_divfree;
    use crate::lattice::make_lattice;
    use Sign::{Minus as M, Plus as P};

    fn rel(a: &SpectralVectorField, b: &SpectralVectorField) -> f64 {
        (a - b).norm_l2() / b.norm_l2().max(a.norm_l2())
    }

    fn state(l: &Arc<Lattice>, seed: u64) -> StateU {
        StateU::new(
            random_divfree(seed, l, 1.5),
            random_divfree(seed + 77, l, 1.5),
        )
        .unwrap()
    }

    #[test]
    fn sigma_helpers() {
        for (i, s) in ALL_SIGMAS.iter().enumerate() {
            assert_eq!(sigma_index(*s), i);
            assert_eq!(parse_sigma(&sigma_label(*s)), Some(*s));
        }
        assert_eq!(sigma_label([P, M, P]), "+-+");
        assert_eq!(parse_sigma("++"), None);
    }

    #[test]
    fn phase_examples() {
        let w = omega_sigma([1, -1, 0], [1, 0, 1], [0, -1, -1], [P, P, P]).unwrap();
        assert!(w.abs() < 1e-15);
        assert!(is_resonant_exact([1, -1, 0], [1, 0, 1], [0, -1, -1], [P, P, P]).unwrap());
        let w = omega_sigma([1, 0, 1], [1, 0, 0], [0, 0, 1], [P, P, P]).unwrap();
        assert!((w - (std::f64::consts::FRAC_1_SQRT_2 - 1.0)).abs() < 1e-15);
        for s in ALL_SIGMAS {
            assert_eq!(
                omega_sigma([1, 1, 0], [1, 0, 0], [0, 1, 0], s).unwrap(),
                0.0
            );
            assert!(is_resonant_exact([1, 1, 0], [1, 0, 0], [0, 1, 0], s).unwrap());
            let exact = is_resonant_exact([1, 0, 1], [1, 0, 0], [0, 0, 1], s).unwrap();
            let w = omega_sigma([1, 0, 1], [1, 0, 0], [0, 0, 1], s).unwrap();
            assert_eq!(exact, w.abs() < FLOAT_RESONANCE_TOL, "{s:?}");
        }
        assert!(omega_sigma([1, 0, 0], [1, 0, 0], [0, 0, 0], [P, P, P]).is_err());
        assert!(is_resonant_exact([1, 0, 0], [1, 0, 1], [0, 0, 0], [P, P, P]).is_err());
    }

    #[test]
    fn opposite_sign_branch() {
        // ω(k) = 1/√2 and ω(m) = −1/√2 cancel against ω(n) = 0
        assert!(is_resonant_exact([2, 0, 0], [1, 0, 1], [1, 0, -1], [P, P, P]).unwrap());
        assert!(!is_resonant_exact([2, 0, 0], [1, 0, 1], [1, 0, -1], [P, P, M]).unwrap());
        assert!(!is_resonant_exact([2, 0, 0], [1, 0, 1], [1, 0, -1], [M, P, M]).unwrap());
    }

    #[test]
    fn big_integer_path_agrees() {
        let mut checked = 0;
        for a in -6i64..=6 {
            for b in -6i64..=6 {
                for c in -6i64..=6 {
                    for (nn, kk, mm) in [(36, 36, 36), (50, 25, 9), (45, 13, 20), (72, 41, 17)] {
                        let small = exact_squares_i128(a, b, c, nn, kk, mm).unwrap();
                        assert_eq!(small, exact_squares_big(a, b, c, nn, kk, mm));
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 0);
        // values that overflow the i128 path still get an answer
        let big = 1i64 << 40;
        assert!(exact_squares_i128(big, big, big, big, big, big).is_none());
        let _ = exact_squares_big(big, big, big, big, big, big);
    }

    #[test]
    fn census_matches_brute_force() {
        for radius in [1usize, 2] {
            let l = make_lattice(radius).unwrap();
            let (all, st) = enumerate_triads(&l, None).unwrap();
            let mut brute = Vec::new();
            let inside = |x: Mode| x != [0; 3] && mode_norm_sq(x) <= (radius * radius) as i64;
            let r = 2 * radius as i32;
            for n1 in -r..=r {
                for n2 in -r..=r {
                    for n3 in -r..=r {
                        for k1 in -r..=r {
                            for k2 in -r..=r {
                                for k3 in -r..=r {
                                    let (n, k) = ([n1, n2, n3], [k1, k2, k3]);
                                    let m = [n1 - k1, n2 - k2, n3 - k3];
                                    if inside(n) && inside(k) && inside(m) {
                                        brute.push((n, k, m));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            let mut got: Vec<(Mode, Mode, Mode)> = all.iter().map(|t| (t.n, t.k, t.m)).collect();
            got.sort();
            got.dedup();
            brute.sort();
            assert_eq!(got, brute);
            assert_eq!(st.triads, 8 * brute.len());
            assert_eq!(st.float_disagreements, 0);
        }
    }

    #[test]
    fn census_agreement_and_symmetry() {
        let l = make_lattice(3).unwrap();
        let st = census(&l, None, Some(2), |_| Ok(())).unwrap();
        assert_eq!(st.float_disagreements, 0);
        assert_eq!(st.negation_asymmetries, 0);
        assert_eq!(st.vertical_flip_asymmetries, 0);
        assert!(st.resonant > 0 && st.resonant < st.triads);
        assert!(st.min_nonresonant_omega.unwrap() > FLOAT_RESONANCE_TOL);
        let filt = census(&l, Some(&[[P, M, M]]), None, |_| Ok(())).unwrap();
        assert_eq!(filt.triads, st.per_sigma[sigma_index([P, M, M])].0);
        let guard = make_lattice(13).unwrap();
        assert!(matches!(
            census(&guard, None, None, |_| Ok(())),
            Err(Error::CensusGuard(13))
        ));
    }

    #[test]
    fn census_csv_rows() {
        let l = make_lattice(2).unwrap();
        let mut buf = Vec::new();
        let st = census(
            &l,
            None,
            None,
            |t| Ok(write_triad_csv(&mut buf, t).unwrap()),
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), st.triads);
        let first = text.lines().next().unwrap();
        assert_eq!(
            first.split(',').count(),
            CENSUS_CSV_HEADER.split(',').count()
        );
    }

    #[test]
    fn triad_sum_reproduces_reference_path() {
        let l = make_lattice(3).unwrap();
        for seed in 0..3 {
            let v = random_divfree(seed, &l, 1.0);
            let w = random_divfree(seed + 50, &l, 1.0);
            for t in [0.0, 0.7, 3.1] {
                let a = qeps_apply(t, 0.3, &v, &w).unwrap();
                let b = qeps_triad_sum(t, 0.3, &v, &w).unwrap();
                assert!(rel(&b, &a) <= 1e-11, "seed {seed} t {t}: {}", rel(&b, &a));
            }
        }
    }

    #[test]
    fn interaction_terms_sum_to_the_form() {
        let l = make_lattice(2).unwrap();
        let v = random_divfree(4, &l, 1.0);
        let w = random_divfree(5, &l, 1.0);
        let tau = 1.3;
        let mut acc = SpectralVectorField::zeros(&l);
        for term in interaction_terms(&l).unwrap() {
            let c = term.contribution(
                tau,
                &v.get(term.triad.k).unwrap(),
                &w.get(term.triad.m).unwrap(),
            );
            let i = l.index_of(term.triad.n).unwrap();
            acc.coeffs_mut()[i] = vec3::add(&acc.coeffs()[i], &c);
        }
        let want = qeps_apply(tau, 1.0, &v, &w).unwrap();
        assert!(rel(&acc, &want) < 1e-11);
    }

    #[test]
    fn qeps_at_zero_and_on_planar_modes() {
        let l = make_lattice(3).unwrap();
        let v = random_divfree(1, &l, 1.0);
        let a = qeps_apply(0.0, 0.1, &v, &v).unwrap();
        let b = project_leray(&advect(&v, &v).unwrap());
        assert!(rel(&a, &b) < 1e-14);

        let mut single = SpectralVectorField::zeros(&l);
        single
            .set_mode([1, 2, 0], vec3::from_re([2.0, -1.0, 0.5]))
            .unwrap();
        let n0 = qeps_apply(0.0, 1.0, &single, &single).unwrap().norm_l2();
        for t in [0.5, 2.0, 9.0] {
            let nt = qeps_apply(t, 1.0, &single, &single).unwrap().norm_l2();
            assert!((nt - n0).abs() <= 1e-14 * n0.max(1.0));
        }

        let flat = vertical_average(&v);
        let q0 = q0_apply(&flat).unwrap();
        let direct = project_leray(&advect(&flat, &flat).unwrap());
        assert!(rel(&q0, &direct) < 1e-12);
    }

    fn time_average_error(v: &SpectralVectorField, t_end: f64) -> f64 {
        let l = v.lattice();
        let h = 0.05;
        let steps = (t_end / h).round() as usize;
        let mut avg = SpectralVectorField::zeros(l);
        for i in 0..=steps {
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            avg.axpy(
                w * h / t_end,
                &qeps_triad_sum(i as f64 * h, 1.0, v, v).unwrap(),
            );
        }
        rel(&avg, &q0_apply(v).unwrap())
    }

    #[test]
    fn time_average_converges_to_resonant_form() {
        // The smallest nonresonant |ω_σ| at radius 3 is about 0.039, so the
        // averaging error decays like 1/(Tω_min) and only drops below 5%
        // for T of several hundred.
        let l = make_lattice(3).unwrap();
        let v = random_divfree(21, &l, 1.0);
        let short = time_average_error(&v, 200.0);
        let long = time_average_error(&v, 800.0);
        assert!(long <= 0.05, "{long}");
        assert!(short / long >= 3.0, "{short} {long}");
    }

    #[test]
    fn nonresonant_averages_decay_like_inverse_time() {
        let l = make_lattice(2).unwrap();
        let (all, _) = enumerate_triads(&l, None).unwrap();
        let mut worst: f64 = -10.0;
        for t in all.iter().filter(|t| !t.resonant).step_by(37) {
            let w = t.omega_sigma;
            // sup over a window of the running average of e^{−iτω}
            let env = |big: f64| -> f64 {
                (0..64)
                    .map(|j| big * (1.0 + j as f64 / 64.0))
                    .map(|tt| ((Complex64::from_polar(1.0, -tt * w) - 1.0) / (tt * w)).norm())
                    .fold(0.0, f64::max)
            };
            let ts = [20.0, 40.0, 80.0, 160.0, 320.0, 640.0];
            let xs: Vec<f64> = ts.iter().map(|t: &f64| t.ln()).collect();
            let ys: Vec<f64> = ts.iter().map(|&t| env(t).ln()).collect();
            let mx = xs.iter().sum::<f64>() / 6.0;
            let my = ys.iter().sum::<f64>() / 6.0;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
            worst = worst.max(sxy / sxx);
        }
        assert!(worst <= -0.8, "{worst}");
    }

    #[test]
    fn limit_form_is_energy_neutral() {
        let l = make_lattice(3).unwrap();
        let s = state(&l, 3);
        let q = Q0_apply(&s).unwrap();
        let scale = s.norm_l2_sq().powf(1.5);
        assert!(q.inner_l2(&s).abs() <= 1e-11 * scale);
        assert!(q.u.divergence_residual() <= 1e-12 * q.u.norm_l2());
        assert!(q.b.divergence_residual() <= 1e-12 * q.b.norm_l2());
        assert_eq!(Q0_apply(&StateU::zeros(&l)).unwrap().norm_l2_sq(), 0.0);
    }

    #[test]
    fn remainder_blocks_sum_to_difference() {
        let l = make_lattice(3).unwrap();
        let s = state(&l, 8);
        for (t, eps) in [(0.3, 0.1), (0.05, 0.025), (1.0, 1.0)] {
            let rb = oscillating_remainder(t, eps, &s).unwrap();
            let total = rb.total();
            let mut want = Qeps_apply(t, eps, &s).unwrap();
            want.axpy(-1.0, &Q0_apply(&s).unwrap());
            let err = total.max_abs_diff(&want) / want.norm_l2_sq().sqrt();
            assert!(err <= 1e-11, "{err:e}");
            let mut by_block = StateU::zeros(&l);
            for b in Block::ALL {
                by_block.axpy(1.0, &rb.block(b));
            }
            assert!(by_block.max_abs_diff(&total) <= 1e-13 * want.norm_l2_sq().sqrt());
        }
    }

    #[test]
    fn remainder_depends_on_fast_time_only() {
        let l = make_lattice(3).unwrap();
        let s = state(&l, 9);
        let a = oscillating_remainder(0.2, 0.1, &s).unwrap().total();
        let b = oscillating_remainder(0.02, 0.01, &s).unwrap().total();
        assert!(a.max_abs_diff(&b) <= 1e-14 * a.norm_l2_sq().sqrt());
    }

    #[test]
    fn planar_data_has_no_remainder() {
        let l = make_lattice(3).unwrap();
        let s = StateU::new(
            vertical_average(&random_divfree(1, &l, 1.0)),
            vertical_average(&random_divfree(2, &l, 1.0)),
        )
        .unwrap();
        let rb = oscillating_remainder(0.7, 0.1, &s).unwrap();
        for b in Block::ALL {
            assert!(rb.block(b).norm_l2_sq() <= 1e-28 * s.norm_l2_sq(), "{b:?}");
        }
    }

    #[test]
    fn split_reconstructs_and_absorbs() {
        let l = make_lattice(3).unwrap();
        let s = state(&l, 10);
        let eps = 0.05;
        let t = 0.4;
        let rb = oscillating_remainder(t, eps, &s).unwrap();
        let full = split_and_absorb(&rb, 3).unwrap();
        assert_eq!(full.high.norm_l2_sq(), 0.0);
        let sp = split_and_absorb(&rb, 2).unwrap();
        let sum = &sp.low + &sp.high;
        assert!(sum.max_abs_diff(&rb.total()) <= 1e-13 * sum.norm_l2_sq().sqrt());
        assert!(split_and_absorb(&rb, 0).is_err());
        assert!(split_and_absorb(&rb, 4).is_err());

        // ε ∂_t R̃ + R_N = 0 at fixed V, checked by finite differences
        let mut errs = Vec::new();
        for h in [1e-3, 1e-4] {
            let ahead = split_absorbed_at(&rb, 2, (t + h) / eps);
            let mut d = (&ahead - &sp.absorbed).scaled(eps / h);
            d.axpy(1.0, &sp.low);
            errs.push(d.norm_l2_sq().sqrt() / sp.low.norm_l2_sq().sqrt());
        }
        let rate = (errs[0] / errs[1]).log10();
        assert!((rate - 1.0).abs() < 0.1, "{errs:?}");
    }

    #[test]
    fn high_part_shrinks_with_cutoff() {
        let l = make_lattice(5).unwrap();
        let s = StateU::new(random_divfree(3, &l, 3.0), random_divfree(4, &l, 3.0)).unwrap();
        let rb = oscillating_remainder(0.3, 0.05, &s).unwrap();
        let norms: Vec<f64> = [2, 3, 4]
            .iter()
            .map(|&n| {
                let h = split_and_absorb(&rb, n).unwrap().high;
                (h.u.sobolev_sq(2.0) + h.b.sobolev_sq(2.0)).sqrt()
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
    }

    #[test]
    fn corrector_identities() {
        let l = make_lattice(2).unwrap();
        let w = state(&l, 1);
        let r = state(&l, 2);
        assert_eq!(corrector(&w, &r, 0.0).unwrap().max_abs_diff(&w), 0.0);
        let phi = corrector(&w, &r, 0.3).unwrap();
        let d = (&phi - &w).norm_l2_sq().sqrt();
        assert!((d - 0.3 * r.norm_l2_sq().sqrt()).abs() <= 1e-15 * d.max(1.0));
    }
}
