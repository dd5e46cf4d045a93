//! Dispersive kernel study.
//!
//! The kernel is `K(t, z) = ∫ ψ(ξ) exp(i t ξ₃/|ξ| + i z·ξ) dξ` over ℝ³, with
//! `ψ` a smooth cutoff equal to 1 on `{|ξ₃| > r, |ξ| ≤ R}`. Because `ψ` is
//! radial in `ξ_h` and even in `ξ₃`, `K` depends only on `ρ = |z_h|` and
//! `z₃`, and it is real:
//!
//! `K(t, ρ, z₃) = 4π Re ∫_{ξ₃>0} ∫₀^∞ ψ e^{i t ξ₃/|ξ| + i z₃ ξ₃} J₀(ρa) a da dξ₃`.
//!
//! `kernel_sup` evaluates this on a midpoint grid in `(a, ξ₃)`. A coarse
//! `(ρ, z₃)` table comes from one matrix product against `J₀` followed by a
//! zero-padded FFT along `ξ₃`. The best local maxima of the table are then
//! polished by direct evaluation. The `z₃` window is the FFT period `2π/Δξ₃`
//! centred on 0, and the `ρ` window is `[0, reach(t)]`. Both contain the
//! region swept by the group velocity, so the sup lies well inside them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling policy shared by every kernel evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    /// Upper bound on the `a` and `ξ₃` steps.
    pub max_step: f64,
    /// Spacing of the coarse `ρ` search grid.
    pub rho_step: f64,
    /// Zero-padding factor of the `z₃` transform.
    pub pad: usize,
    /// Coarse local maxima handed to refinement.
    pub candidates: usize,
    /// Largest table (in entries) any single evaluation may allocate.
    pub budget: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            max_step: 0.01,
            rho_step: 0.5,
            pad: 4,
            candidates: 6,
            budget: 1 << 25,
        }
    }
}

/// Frequency cutoff: `ψ = 1` on `C_{r,R}`, `ψ = 0` at distance `≥ δ` outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub delta: f64,
    #[serde(default)]
    pub grid: GridPolicy,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        CutoffSpec {
            r: 0.5,
            big_r: 2.0,
            delta: 0.25,
            grid: GridPolicy::default(),
        }
    }
}

impl CutoffSpec {
    pub fn new(r: f64, big_r: f64, delta: f64) -> Result<Self> {
        let spec = CutoffSpec {
            r,
            big_r,
            delta,
            grid: GridPolicy::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `0 < δ < r < R`; `δ < r` keeps the support away from `ξ = 0`, where
    /// the phase is singular.
    pub fn validate(&self) -> Result<()> {
        let (r, big_r, d) = (self.r, self.big_r, self.delta);
        if !(r.is_finite() && big_r.is_finite() && d.is_finite()) {
            return Err(Error::InvalidCutoff("non-finite parameter".into()));
        }
        if !(0.0 < d && d < r && r < big_r) {
            return Err(Error::InvalidCutoff(format!(
                "need 0 < delta < r < R, got r={r}, R={big_r}, delta={d}"
            )));
        }
        let g = &self.grid;
        if !(g.max_step > 0.0
            && g.max_step.is_finite()
            && g.rho_step > 0.0
            && g.rho_step.is_finite())
        {
            return Err(Error::InvalidCutoff("grid steps must be positive".into()));
        }
        if g.pad == 0 || g.candidates == 0 || g.budget == 0 {
            return Err(Error::InvalidCutoff(
                "pad, candidates and budget must be positive".into(),
            ));
        }
        Ok(())
    }

    fn xi3_range(&self) -> (f64, f64) {
        (self.r - self.delta, self.big_r + self.delta)
    }

    fn a_max(&self) -> f64 {
        let (lo, hi) = self.xi3_range();
        (hi * hi - lo * lo).sqrt()
    }

    /// Bound on `|∇_ξ (ξ₃/|ξ|)|` over the support, horizontal and vertical
    /// parts alike: `max a|ξ₃|/|ξ|³` and `max a²/|ξ|³` with `|ξ₃| ≥ r − δ`.
    pub fn group_speed(&self) -> f64 {
        2.0 / (3.0 * 3f64.sqrt() * (self.r - self.delta))
    }

    /// Radius of the `(ρ, |z₃|)` window searched at time `t`.
    pub fn reach(&self, t: f64) -> f64 {
        1.05 * self.group_speed() * t + 8.0
    }
}

/// `h(x)/(h(x) + h(1−x))` with `h(x) = e^{-1/x}`: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let h0 = (-1.0 / x).exp();
        let h1 = (-1.0 / (1.0 - x)).exp();
        h0 / (h0 + h1)
    }
}

fn psi_cyl(a2: f64, xi3: f64, spec: &CutoffSpec) -> f64 {
    let d = spec.delta;
    let vert = smoothstep((xi3.abs() - (spec.r - d)) / d);
    if vert == 0.0 {
        return 0.0;
    }
    vert * smoothstep((spec.big_r + d - (a2 + xi3 * xi3).sqrt()) / d)
}

/// Cutoff value at `ξ`. Depends on `ξ_h` only through `ξ₁² + ξ₂²`.
pub fn psi_eval(xi: [f64; 3], spec: &CutoffSpec) -> f64 {
    psi_cyl(xi[0] * xi[0] + xi[1] * xi[1], xi[2], spec)
}

/// Step sizes and table shapes used at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub da: f64,
    pub dxi3: f64,
    pub n_a: usize,
    pub n_xi3: usize,
    pub rho_max: f64,
    pub n_rho: usize,
    pub n_z: usize,
    /// Half-width of the `z₃` window, `π/Δξ₃`.
    pub z_extent: f64,
}

/// `Δa ≤ π/(reach + vt)` resolves `J₀(ρa)` together with the phase;
/// `Δξ₃ ≤ π/reach` makes the `z₃` period `2·reach` exceed the kernel's support.
pub fn resolution(t: f64, spec: &CutoffSpec) -> Result<Resolution> {
    spec.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "kernel time {t} must be >= 0"
        )));
    }
    let g = &spec.grid;
    let reach = spec.reach(t);
    let a_max = spec.a_max();
    let (lo, hi) = spec.xi3_range();
    let n_a = (a_max / g.max_step.min(PI / (reach + spec.group_speed() * t))).ceil() as usize;
    let n_xi3 = ((hi - lo) / g.max_step.min(PI / reach)).ceil() as usize;
    let dxi3 = (hi - lo) / n_xi3 as f64;
    let n_rho = (reach / g.rho_step).floor() as usize + 1;
    Ok(Resolution {
        da: a_max / n_a as f64,
        dxi3,
        n_a,
        n_xi3,
        rho_max: (n_rho - 1) as f64 * g.rho_step,
        n_rho,
        n_z: (g.pad * n_xi3).next_power_of_two(),
        z_extent: PI / dxi3,
    })
}

fn guard(t: f64, res: &Resolution, refine: bool, budget: usize) -> Result<()> {
    let quad = (res.n_a + 1) * res.n_xi3 * if refine { 4 } else { 1 };
    let points = quad.max(res.n_rho * res.n_a).max(res.n_rho * res.n_z);
    if points > budget {
        return Err(Error::ResolutionGuard { t, points, budget });
    }
    Ok(())
}

/// Weighted integrand on the `(a, ξ₃ > 0)` midpoint grid, row-major in `a`.
///
/// The `a` integrand is `a·g(a)` with `g` even, so the midpoint rule carries
/// an `O(Δa²)` endpoint error `(Δa²/24)·g(0)`. The last `a` node sits at 0
/// and holds the Euler–Maclaurin correction, which leaves `O(Δa⁴)`.
struct Quadrature {
    a: Vec<f64>,
    xi3: Vec<f64>,
    f: Vec<Complex64>,
}

impl Quadrature {
    fn build(t: f64, spec: &CutoffSpec, n_a: usize, n_xi3: usize) -> Self {
        let (lo, hi) = spec.xi3_range();
        let da = spec.a_max() / n_a as f64;
        let dxi3 = (hi - lo) / n_xi3 as f64;
        let mut a: Vec<f64> = (0..n_a).map(|i| (i as f64 + 0.5) * da).collect();
        a.push(0.0);
        let xi3: Vec<f64> = (0..n_xi3).map(|j| lo + (j as f64 + 0.5) * dxi3).collect();
        let w = 4.0 * PI * da * dxi3;
        let mut f = vec![Complex64::new(0.0, 0.0); (n_a + 1) * n_xi3];
        for (i, &ai) in a[..n_a].iter().enumerate() {
            let a2 = ai * ai;
            for (j, &x3) in xi3.iter().enumerate() {
                let p = psi_cyl(a2, x3, spec);
                if p != 0.0 {
                    let phase = t * x3 / (a2 + x3 * x3).sqrt();
                    f[i * n_xi3 + j] = Complex64::from_polar(w * p * ai, phase);
                }
            }
        }
        let w0 = -4.0 * PI * dxi3 * da * da / 24.0;
        for (j, &x3) in xi3.iter().enumerate() {
            f[n_a * n_xi3 + j] = Complex64::from_polar(w0 * psi_cyl(0.0, x3, spec), t);
        }
        Quadrature { a, xi3, f }
    }

    fn bessel_row(&self, rho: f64) -> Vec<Complex64> {
        let n = self.xi3.len();
        let mut g = vec![Complex64::new(0.0, 0.0); n];
        for (i, &ai) in self.a.iter().enumerate() {
            let j0 = libm::j0(rho * ai);
            for (gj, fj) in g.iter_mut().zip(&self.f[i * n..(i + 1) * n]) {
                *gj += fj * j0;
            }
        }
        g
    }

    fn value_from_row(&self, g: &[Complex64], z3: f64) -> f64 {
        g.iter()
            .zip(&self.xi3)
            .map(|(gj, &x3)| {
                let (s, c) = (z3 * x3).sin_cos();
                gj.re * c - gj.im * s
            })
            .sum()
    }
}

/// Direct evaluation of `K(t, ρ, z₃)` at the resolution chosen for `t`.
pub struct KernelEvaluator {
    t: f64,
    quad: Quadrature,
    cache: Vec<(f64, Vec<Complex64>)>,
}

impl KernelEvaluator {
    pub fn new(t: f64, spec: &CutoffSpec) -> Result<Self> {
        let res = resolution(t, spec)?;
        guard(t, &res, false, spec.grid.budget)?;
        Ok(Self::with_shape(t, spec, res.n_a, res.n_xi3))
    }

    fn with_shape(t: f64, spec: &CutoffSpec, n_a: usize, n_xi3: usize) -> Self {
        KernelEvaluator {
            t,
            quad: Quadrature::build(t, spec, n_a, n_xi3),
            cache: Vec::new(),
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// `K` is even in `ρ`; negative radii are folded.
    pub fn value(&mut self, rho: f64, z3: f64) -> f64 {
        let rho = rho.abs();
        let pos = match self.cache.iter().position(|(r, _)| *r == rho) {
            Some(p) => p,
            None => {
                if self.cache.len() >= 8 {
                    self.cache.remove(0);
                }
                self.cache.push((rho, self.quad.bessel_row(rho)));
                self.cache.len() - 1
            }
        };
        self.quad.value_from_row(&self.cache[pos].1, z3)
    }

    /// Compass search for a local maximum of `|K|`.
    fn climb(&mut self, start: (f64, f64), steps: (f64, f64)) -> (f64, f64, f64) {
        let (mut rho, mut z) = (start.0.abs(), start.1);
        let mut best = self.value(rho, z).abs();
        let (mut hr, mut hz) = steps;
        let mut evals = 0;
        while (hr > 1e-4 || hz > 1e-4) && evals < 400 {
            let mut moved = false;
            for (dr, dz) in [(hr, 0.0), (-hr, 0.0), (0.0, hz), (0.0, -hz)] {
                let (r1, z1) = ((rho + dr).abs(), z + dz);
                let v = self.value(r1, z1).abs();
                evals += 1;
                if v > best {
                    (rho, z, best) = (r1, z1, v);
                    moved = true;
                    break;
                }
            }
            if !moved {
                hr *= 0.5;
                hz *= 0.5;
            }
        }
        (rho, z, best)
    }
}

/// Sup of `|K(t, ·)|` over the search window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub t: f64,
    pub sup_abs: f64,
    pub rho_at: f64,
    pub z3_at: f64,
    /// `|sup at doubled (a, ξ₃) resolution − sup_abs|`, when computed.
    pub refinement_error: Option<f64>,
    pub resolution: Resolution,
}

impl KernelSample {
    pub fn relative_refinement_error(&self) -> Option<f64> {
        self.refinement_error.map(|e| e / self.sup_abs)
    }
}

fn coarse_candidates(q: &Quadrature, res: &Resolution, spec: &CutoffSpec) -> Vec<(f64, f64, f64)> {
    let (n_a, n_xi) = (q.a.len(), res.n_xi3);
    let n_z = res.n_z;
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n_z);
    let dz = 2.0 * PI / (n_z as f64 * res.dxi3);
    let z_of = |k: usize| {
        let k = if k < n_z / 2 {
            k as f64
        } else {
            k as f64 - n_z as f64
        };
        k * dz
    };
    let carrier: Vec<Complex64> = (0..n_z)
        .map(|k| Complex64::from_polar(1.0, z_of(k) * q.xi3[0]))
        .collect();
    let mut table = vec![0f32; res.n_rho * n_z];
    let block = 64usize;
    let mut jmat = vec![0.0f64; block * n_a];
    let mut gmat = vec![0.0f64; block * 2 * n_xi];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_z];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for p0 in (0..res.n_rho).step_by(block) {
        let rows = block.min(res.n_rho - p0);
        for r in 0..rows {
            let rho = (p0 + r) as f64 * spec.grid.rho_step;
            for (i, &ai) in q.a.iter().enumerate() {
                jmat[r * n_a + i] = libm::j0(rho * ai);
            }
        }
        // SAFETY: Complex64 is repr(C) {re, im}, so `f` is a dense
        // n_a × 2n_xi row-major f64 matrix; all strides match the buffers.
        unsafe {
            matrixmultiply::dgemm(
                rows,
                n_a,
                2 * n_xi,
                1.0,
                jmat.as_ptr(),
                n_a as isize,
                1,
                q.f.as_ptr() as *const f64,
                2 * n_xi as isize,
                1,
                0.0,
                gmat.as_mut_ptr(),
                2 * n_xi as isize,
                1,
            );
        }
        for r in 0..rows {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            let row = &gmat[r * 2 * n_xi..(r + 1) * 2 * n_xi];
            for j in 0..n_xi {
                buf[j] = Complex64::new(row[2 * j], row[2 * j + 1]);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            let out = &mut table[(p0 + r) * n_z..(p0 + r + 1) * n_z];
            for k in 0..n_z {
                out[k] = (carrier[k] * buf[k]).re.abs() as f32;
            }
        }
    }
    let mut peaks = Vec::new();
    for p in 0..res.n_rho {
        for k in 0..n_z {
            let v = table[p * n_z + k];
            if v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'nb: for dp in [-1i64, 0, 1] {
                for dk in [-1i64, 0, 1] {
                    let (pp, kk) = (p as i64 + dp, k as i64 + dk);
                    if (dp, dk) == (0, 0) || pp < 0 || kk < 0 {
                        continue;
                    }
                    let (pp, kk) = (pp as usize, kk as usize);
                    if pp >= res.n_rho || kk >= n_z || kk == n_z / 2 && k == n_z / 2 - 1 {
                        continue;
                    }
                    if table[pp * n_z + kk] > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                peaks.push((v as f64, p as f64 * spec.grid.rho_step, z_of(k)));
            }
        }
    }
    peaks.sort_by(|x, y| y.0.total_cmp(&x.0));
    peaks.truncate(spec.grid.candidates);
    peaks
}

/// `kernel_sup_with(t, spec, true)`.
pub fn kernel_sup(t: f64, spec: &CutoffSpec) -> Result<KernelSample> {
    kernel_sup_with(t, spec, true)
}

/// Sup of `|K(t, ·)|`; with `refine`, also the change in the sup when both
/// frequency steps are halved.
pub fn kernel_sup_with(t: f64, spec: &CutoffSpec, refine: bool) -> Result<KernelSample> {
    let res = resolution(t, spec)?;
    guard(t, &res, refine, spec.grid.budget)?;
    let mut ev = KernelEvaluator::with_shape(t, spec, res.n_a, res.n_xi3);
    let dz = 2.0 * PI / (res.n_z as f64 * res.dxi3);
    let steps = (0.5 * spec.grid.rho_step, 0.5 * dz);
    let mut best = (0.0, 0.0, 0.0);
    for (_, rho, z) in coarse_candidates(&ev.quad, &res, spec) {
        let (r1, z1, v) = ev.climb((rho, z), steps);
        if v > best.2 {
            best = (r1, z1, v);
        }
    }
    let refinement_error = if refine {
        let mut fine = KernelEvaluator::with_shape(t, spec, 2 * res.n_a, 2 * res.n_xi3);
        let (_, _, v) = fine.climb((best.0, best.1), (0.05, 0.05));
        Some((v - best.2).abs())
    } else {
        None
    };
    Ok(KernelSample {
        t,
        sup_abs: best.2,
        rho_at: best.0,
        z3_at: best.1,
        refinement_error,
        resolution: res,
    })
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    pub points: usize,
}

pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() {
        return Err(Error::DegenerateFit(format!(
            "{} abscissae vs {} values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateFit("need at least 2 points".into()));
    }
    if x.iter().chain(y).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::DegenerateFit(
            "values must be positive and finite".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 1e-24 * n {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok(LogLogFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        points: x.len(),
    })
}

pub const DECAY_WINDOW: (f64, f64) = (10.0, 400.0);
pub const MIN_DECAY_POINTS: usize = 6;

fn check_decay_times(t: &[f64]) -> Result<()> {
    if t.len() < MIN_DECAY_POINTS {
        return Err(Error::DegenerateFit(format!(
            "decay fit needs at least {MIN_DECAY_POINTS} times, got {}",
            t.len()
        )));
    }
    let (lo, hi) = DECAY_WINDOW;
    if let Some(bad) = t.iter().find(|&&v| !(lo..=hi).contains(&v)) {
        return Err(Error::DegenerateFit(format!(
            "time {bad} outside [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Decay exponent from precomputed sup values.
pub fn fit_decay_values(t: &[f64], sup_abs: &[f64]) -> Result<LogLogFit> {
    check_decay_times(t)?;
    fit_loglog(t, sup_abs)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub samples: Vec<KernelSample>,
    pub fit: LogLogFit,
}

pub fn fit_decay(spec: &CutoffSpec, t_list: &[f64]) -> Result<DecayReport> {
    check_decay_times(t_list)?;
    let samples = t_list
        .iter()
        .map(|&t| kernel_sup(t, spec))
        .collect::<Result<Vec<_>>>()?;
    let m: Vec<f64> = samples.iter().map(|s| s.sup_abs).collect();
    let fit = fit_decay_values(t_list, &m)?;
    Ok(DecayReport { samples, fit })
}

/// `log_spaced(a, b, n)`: `n ≥ 2` points from `a` to `b`, geometric.
pub fn log_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

pub const STRICHARTZ_EPS_RANGE: (f64, f64) = (1e-3, 1e-1);

/// Rescaled-time nodes on `[0, s_max]`: steps 0.25 to 10, 1 to 40, 5 to
/// 100, 25 to 400, 100 to 1000, then ratio 1.25, plus every node in `extra`.
pub fn graded_grid(s_max: f64, extra: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0];
    for (lo, hi, h) in [
        (0.0f64, 10.0f64, 0.25f64),
        (10.0, 40.0, 1.0),
        (40.0, 100.0, 5.0),
        (100.0, 400.0, 25.0),
        (400.0, 1000.0, 100.0),
    ] {
        let steps = ((hi - lo) / h).round() as usize;
        s.extend((1..=steps).map(|k| lo + k as f64 * h));
    }
    let mut x = 1000.0;
    while x < s_max {
        x *= 1.25;
        s.push(x);
    }
    s.retain(|&v| v < s_max);
    s.push(s_max);
    s.extend(extra.iter().copied().filter(|&v| v > 0.0 && v <= s_max));
    s.sort_by(f64::total_cmp);
    s.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrichartzReport {
    pub horizon: f64,
    pub eps: Vec<f64>,
    /// `Q(ε) = (ε ∫₀^{T/ε} m(s)⁴ ds)^{1/4}`.
    pub q: Vec<f64>,
    pub fit: LogLogFit,
    /// `(s, m(s))` on the rescaled-time grid.
    pub profile: Vec<(f64, f64)>,
}

/// Rescaled-time grid on which the profile must be sampled.
pub fn strichartz_nodes(eps_list: &[f64], horizon: f64) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "horizon {horizon} must be positive"
        )));
    }
    if eps_list.len() < 2 {
        return Err(Error::InvalidProblem("need at least two eps values".into()));
    }
    let (lo, hi) = STRICHARTZ_EPS_RANGE;
    if let Some(e) = eps_list
        .iter()
        .find(|&&e| !(e >= lo * (1.0 - 1e-12) && e <= hi * (1.0 + 1e-12)))
    {
        return Err(Error::InvalidProblem(format!(
            "eps {e} outside [{lo}, {hi}]"
        )));
    }
    let ends: Vec<f64> = eps_list.iter().map(|e| horizon / e).collect();
    let s_max = ends.iter().copied().fold(0.0, f64::max);
    Ok(graded_grid(s_max, &ends))
}

/// Trapezoid quadrature of `m⁴` on precomputed `(s, m)` samples.
pub fn strichartz_from_samples(
    eps_list: &[f64],
    horizon: f64,
    s: &[f64],
    m: &[f64],
) -> Result<StrichartzReport> {
    if s.len() != m.len() || s.is_empty() {
        return Err(Error::InvalidProblem("profile length mismatch".into()));
    }
    let mut q = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let end = horizon / eps;
        let mut integral = 0.0;
        let mut reached = false;
        for i in 1..s.len() {
            if s[i] > end * (1.0 + 1e-12) {
                break;
            }
            integral += 0.5 * (s[i] - s[i - 1]) * (m[i].powi(4) + m[i - 1].powi(4));
            reached = (s[i] - end).abs() <= 1e-12 * end;
        }
        if !reached {
            return Err(Error::InvalidProblem(format!(
                "profile grid does not contain s = {end}"
            )));
        }
        q.push((eps * integral).powf(0.25));
    }
    let fit = fit_loglog(eps_list, &q)?;
    Ok(StrichartzReport {
        horizon,
        eps: eps_list.to_vec(),
        q,
        fit,
        profile: s.iter().copied().zip(m.iter().copied()).collect(),
    })
}

/// Strichartz quantity for an explicit profile `m(s)`.
pub fn strichartz_from_profile(
    eps_list: &[f64],
    horizon: f64,
    m: impl Fn(f64) -> f64,
) -> Result<StrichartzReport> {
    let s = strichartz_nodes(eps_list, horizon)?;
    let v: Vec<f64> = s.iter().map(|&x| m(x)).collect();
    strichartz_from_samples(eps_list, horizon, &s, &v)
}

/// Kernel-level Strichartz quantity with `m(s) = sup_z |K(s, z)|`.
pub fn strichartz_scaling(
    spec: &CutoffSpec,
    eps_list: &[f64],
    horizon: f64,
) -> Result<StrichartzReport> {
    let s = strichartz_nodes(eps_list, horizon)?;
    let m = s
        .iter()
        .map(|&x| kernel_sup_with(x, spec, false).map(|k| k.sup_abs))
        .collect::<Result<Vec<_>>>()?;
    strichartz_from_samples(eps_list, horizon, &s, &m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> CutoffSpec {
        CutoffSpec::default()
    }

    /// `∫ψ` in spherical coordinates, midpoint in `|ξ|` and `cos θ`.
    fn psi_integral_spherical(spec: &CutoffSpec) -> f64 {
        let (nr, nc) = (2000, 2000);
        let rmax = spec.big_r + spec.delta;
        let (dr, dc) = (rmax / nr as f64, 2.0 / nc as f64);
        let mut sum = 0.0;
        for i in 0..nr {
            let r = (i as f64 + 0.5) * dr;
            for j in 0..nc {
                let c = -1.0 + (j as f64 + 0.5) * dc;
                let s = (1.0 - c * c).sqrt();
                sum += psi_eval([r * s, 0.0, r * c], spec) * r * r;
            }
        }
        2.0 * PI * sum * dr * dc
    }

    /// Plain 3D midpoint sum of the defining integral.
    fn kernel_direct_3d(t: f64, z: [f64; 3], spec: &CutoffSpec, h: f64) -> Complex64 {
        let l = spec.big_r + spec.delta;
        let n = (2.0 * l / h).ceil() as usize;
        let h = 2.0 * l / n as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let x = -l + (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = -l + (j as f64 + 0.5) * h;
                for k in 0..n {
                    let w = -l + (k as f64 + 0.5) * h;
                    let p = psi_eval([x, y, w], spec);
                    if p != 0.0 {
                        let norm = (x * x + y * y + w * w).sqrt();
                        let ph = t * w / norm + z[0] * x + z[1] * y + z[2] * w;
                        sum += Complex64::from_polar(p, ph);
                    }
                }
            }
        }
        sum * h * h * h
    }

    #[test]
    fn psi_values() {
        let s = spec();
        assert_eq!(psi_eval([0.0, 0.0, 1.25], &s), 1.0);
        assert_eq!(psi_eval([1.0, 0.7, -0.6], &s), 1.0);
        assert_eq!(psi_eval([0.0, 0.0, 2.5], &s), 0.0);
        assert_eq!(psi_eval([1.0, 0.0, 0.2], &s), 0.0);
        assert_eq!(psi_eval([0.0, 0.0, 0.0], &s), 0.0);
        let mid = psi_eval([0.0, 0.0, 2.125], &s);
        assert!((mid - 0.5).abs() < 1e-15);
        for k in 0..200 {
            let x = [0.03 * k as f64 - 3.0, 0.5, 0.017 * k as f64 - 1.7];
            let v = psi_eval(x, &s);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn psi_is_horizontally_radial() {
        let s = spec();
        for k in 0..50 {
            let xi = [0.05 * k as f64, 0.6, 0.3 + 0.04 * k as f64];
            let v = psi_eval(xi, &s);
            for exact in [[-xi[1], xi[0]], [xi[1], xi[0]], [-xi[0], -xi[1]]] {
                assert_eq!(v, psi_eval([exact[0], exact[1], xi[2]], &s));
            }
            // A rotation by a general angle perturbs |ξ| by a few ulps, and
            // |∇ψ| ≤ 2·max S'/δ = 4/δ.
            let norm = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
            let tol = (4.0 / s.delta) * 4.0 * f64::EPSILON * norm;
            for th in [0.3, 1.1, 2.0, 4.4] {
                let (sn, cs) = f64::sin_cos(th);
                let rot = [cs * xi[0] - sn * xi[1], sn * xi[0] + cs * xi[1], xi[2]];
                let d = (v - psi_eval(rot, &s)).abs();
                assert!(d <= tol, "{xi:?} {th} {d:e}");
            }
        }
    }

    #[test]
    fn invalid_cutoffs_rejected() {
        assert!(CutoffSpec::new(0.5, 2.0, 0.25).is_ok());
        for (r, big, d) in [
            (0.5, 0.4, 0.1),
            (0.5, 2.0, 0.5),
            (0.5, 2.0, 0.0),
            (-0.5, 2.0, 0.1),
        ] {
            assert!(matches!(
                CutoffSpec::new(r, big, d),
                Err(Error::InvalidCutoff(_))
            ));
        }
    }

    #[test]
    fn origin_value_at_zero_time_is_integral_of_psi() {
        let s = spec();
        let oracle = psi_integral_spherical(&s);
        let mut ev = KernelEvaluator::new(0.0, &s).unwrap();
        let k0 = ev.value(0.0, 0.0);
        assert!(((k0 - oracle) / oracle).abs() < 5e-3, "{k0} {oracle}");
        let sup = kernel_sup(0.0, &s).unwrap();
        assert!(((sup.sup_abs - k0) / k0).abs() < 1e-9);
        assert!(sup.rho_at < 0.05 && sup.z3_at.abs() < 0.05);
    }

    #[test]
    fn reduced_kernel_matches_direct_3d_sum() {
        let s = spec();
        let t = 1.5;
        let mut ev = KernelEvaluator::new(t, &s).unwrap();
        for z in [[0.0, 0.0, -0.4], [1.2, -0.7, -0.5], [-0.3, 2.0, 1.1]] {
            let direct = kernel_direct_3d(t, z, &s, 0.03);
            let rho = (z[0] * z[0] + z[1] * z[1]).sqrt();
            let reduced = ev.value(rho, z[2]);
            let scale = ev.value(0.0, 0.0).abs();
            assert!(
                (direct.re - reduced).abs() < 1e-6 * scale,
                "{direct} {reduced}"
            );
            assert!(direct.im.abs() < 1e-6 * scale);
            let rot = [-z[1], z[0], z[2]];
            let direct_rot = kernel_direct_3d(t, rot, &s, 0.03);
            assert!((direct_rot - direct).norm() < 1e-6 * scale);
        }
    }

    #[test]
    fn sup_is_bounded_by_its_initial_value() {
        let s = spec();
        let s0 = kernel_sup_with(0.0, &s, false).unwrap().sup_abs;
        for t in [0.25, 0.5, 1.0, 2.0, 5.0, 20.0] {
            let st = kernel_sup_with(t, &s, false).unwrap().sup_abs;
            assert!(st <= s0 * (1.0 + 1e-9), "t={t}: {st} > {s0}");
        }
    }

    #[test]
    fn refinement_is_stable_and_decay_beats_inverse_sqrt() {
        let s = spec();
        let a = kernel_sup(25.0, &s).unwrap();
        let b = kernel_sup(100.0, &s).unwrap();
        assert!(a.relative_refinement_error().unwrap() < 0.02);
        assert!(b.relative_refinement_error().unwrap() < 0.02);
        assert!(b.sup_abs / a.sup_abs <= 0.5 + 1e-9);
        assert!(b.z3_at.abs() <= b.resolution.z_extent);
        assert!(b.rho_at <= b.resolution.rho_max);
    }

    #[test]
    fn resolution_guard_fires() {
        let mut s = spec();
        s.grid.budget = 1000;
        assert!(matches!(
            kernel_sup(50.0, &s),
            Err(Error::ResolutionGuard { .. })
        ));
        assert!(kernel_sup(-1.0, &spec()).is_err());
    }

    #[test]
    fn synthetic_decay_fits() {
        let t = log_spaced(10.0, 400.0, 8);
        let m: Vec<f64> = t.iter().map(|v| v.powf(-0.5)).collect();
        let f = fit_decay_values(&t, &m).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        let c = vec![3.0; t.len()];
        assert!(fit_decay_values(&t, &c).unwrap().slope.abs() < 1e-12);
        assert!(matches!(
            fit_decay_values(&t[..5], &m[..5]),
            Err(Error::DegenerateFit(_))
        ));
        let mut wide = t.clone();
        wide[0] = 5.0;
        assert!(fit_decay_values(&wide, &m).is_err());
        assert!(fit_loglog(&[2.0, 2.0], &[1.0, 3.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn surrogate_profile_scales_like_quarter_power() {
        let eps = log_spaced(1e-3, 1e-1, 5);
        let horizon = 1e3;
        let r = strichartz_from_profile(&eps, horizon, |s| 1f64.min(s.powf(-0.5))).unwrap();
        assert!((r.fit.slope - 0.25).abs() < 1e-3, "{}", r.fit.slope);
        for (e, q) in eps.iter().zip(&r.q) {
            let exact = (e * (2.0 - e / horizon)).powf(0.25);
            // trapezoid error (h²/12)|f'(1)| at h = 0.25 is 0.5% of Q⁴
            assert!((q / exact - 1.0).abs() < 2e-3, "{q} {exact}");
        }
        assert!(r.q.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn graded_grid_contains_requested_nodes() {
        let g = graded_grid(5000.0, &[33.3, 1234.5]);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 5000.0);
        assert!(g.contains(&33.3) && g.contains(&1234.5) && g.contains(&10.0));
        assert!(strichartz_nodes(&[1e-2], 1.0).is_err());
        assert!(strichartz_nodes(&[1e-4, 1e-2], 1.0).is_err());
    }
}
