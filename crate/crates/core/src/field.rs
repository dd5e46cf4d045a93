//! Truncated Fourier representation of real periodic fields.
//!
//! A field stores one coefficient per lattice mode, including both members of
//! every `±k` pair, so Hermitian symmetry `f(-k) = conj f(k)` is an invariant
//! rather than an encoding. All reductions run over modes in the lattice's
//! lexicographic order.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lattice::{is_positive, Lattice, Mode};
use crate::vec3::{self, C3};

/// Relative tolerance on `max |k·f(k)|` when an operation requires a
/// divergence-free argument. Generous enough to absorb time-stepping roundoff.
pub const DIV_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SpectralVectorField {
    lattice: Arc<Lattice>,
    coeff: Vec<C3>,
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    lattice: Arc<Lattice>,
    coeff: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(lattice: &Arc<Lattice>) -> Self {
        ScalarField {
            lattice: lattice.clone(),
            coeff: vec![Complex64::new(0.0, 0.0); lattice.len()],
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeff
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeff
    }

    pub fn get(&self, k: Mode) -> Option<Complex64> {
        self.lattice.index_of(k).map(|i| self.coeff[i])
    }

    /// Sets `k` to `c` and `-k` to `conj(c)`.
    pub fn set_mode(&mut self, k: Mode, c: Complex64) -> Result<()> {
        let i = self.lattice.index_of(k).ok_or(Error::Domain(k))?;
        if i == self.lattice.origin() {
            return Err(Error::Domain(k));
        }
        self.coeff[i] = c;
        self.coeff[self.lattice.neg(i)] = c.conj();
        Ok(())
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.coeff.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.coeff
            .iter()
            .zip(&other.coeff)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl SpectralVectorField {
    pub fn zeros(lattice: &Arc<Lattice>) -> Self {
        SpectralVectorField {
            lattice: lattice.clone(),
            coeff: vec![vec3::ZERO; lattice.len()],
        }
    }

    pub(crate) fn from_coeffs(lattice: &Arc<Lattice>, coeff: Vec<C3>) -> Self {
        debug_assert_eq!(coeff.len(), lattice.len());
        SpectralVectorField {
            lattice: lattice.clone(),
            coeff,
        }
    }

    /// Builds a field mode by mode. The closure is called for every mode; the
    /// caller is responsible for Hermitian symmetry.
    pub fn from_fn(lattice: &Arc<Lattice>, mut f: impl FnMut(usize, Mode) -> C3) -> Self {
        let coeff = (0..lattice.len()).map(|i| f(i, lattice.mode(i))).collect();
        SpectralVectorField {
            lattice: lattice.clone(),
            coeff,
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[C3] {
        &self.coeff
    }

    pub fn coeffs_mut(&mut self) -> &mut [C3] {
        &mut self.coeff
    }

    pub fn get(&self, k: Mode) -> Option<C3> {
        self.lattice.index_of(k).map(|i| self.coeff[i])
    }

    /// Sets `k` to `c` and `-k` to `conj(c)`.
    pub fn set_mode(&mut self, k: Mode, c: C3) -> Result<()> {
        let i = self.lattice.index_of(k).ok_or(Error::Domain(k))?;
        if i == self.lattice.origin() {
            return Err(Error::Domain(k));
        }
        self.coeff[i] = c;
        self.coeff[self.lattice.neg(i)] = vec3::conj(&c);
        Ok(())
    }

    pub fn component(&self, axis: usize) -> ScalarField {
        ScalarField {
            lattice: self.lattice.clone(),
            coeff: self.coeff.iter().map(|c| c[axis]).collect(),
        }
    }

    pub fn from_components(parts: [&ScalarField; 3]) -> Result<Self> {
        parts[0].lattice.check_same(&parts[1].lattice)?;
        parts[0].lattice.check_same(&parts[2].lattice)?;
        let coeff = (0..parts[0].coeff.len())
            .map(|i| [parts[0].coeff[i], parts[1].coeff[i], parts[2].coeff[i]])
            .collect();
        Ok(SpectralVectorField {
            lattice: parts[0].lattice.clone(),
            coeff,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.iter().all(|c| vec3::norm_sq(c) == 0.0)
    }

    /// Largest `|f(-k) - conj f(k)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let l = &self.lattice;
        (0..l.len())
            .map(|i| {
                let d = vec3::sub(&self.coeff[l.neg(i)], &vec3::conj(&self.coeff[i]));
                vec3::norm_sq(&d).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn mean_abs(&self) -> f64 {
        vec3::norm_sq(&self.coeff[self.lattice.origin()]).sqrt()
    }

    /// `max_k |k · f(k)|`.
    pub fn divergence_residual(&self) -> f64 {
        (0..self.lattice.len())
            .map(|i| vec3::dot_re(&self.coeff[i], &self.lattice.wavevector(i)).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_divergence_free(&self, rel_tol: f64) -> bool {
        let scale = self.norm_l2() * self.lattice.radius() as f64;
        self.divergence_residual() <= rel_tol * scale.max(f64::MIN_POSITIVE)
    }

    pub(crate) fn require_divergence_free(&self) -> Result<()> {
        if self.is_divergence_free(DIV_TOL) {
            Ok(())
        } else {
            Err(Error::NotDivergenceFree {
                residual: self.divergence_residual(),
            })
        }
    }

    pub fn inner_l2(&self, other: &Self) -> f64 {
        self.coeff
            .iter()
            .zip(&other.coeff)
            .map(|(a, b)| vec3::hdot(a, b).re)
            .sum()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.coeff.iter().map(vec3::norm_sq).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    /// `Σ (1+|k|²)^s |f(k)|²`.
    pub fn sobolev_sq(&self, s: f64) -> f64 {
        let l = &self.lattice;
        self.coeff
            .iter()
            .enumerate()
            .map(|(i, c)| weight(l.norm_sq(i), s) * vec3::norm_sq(c))
            .sum()
    }

    /// `‖∇f‖²_{H^s} = Σ (1+|k|²)^s |k|² |f(k)|²`.
    pub fn grad_sobolev_sq(&self, s: f64) -> f64 {
        let l = &self.lattice;
        self.coeff
            .iter()
            .enumerate()
            .map(|(i, c)| weight(l.norm_sq(i), s) * l.norm_sq(i) as f64 * vec3::norm_sq(c))
            .sum()
    }

    /// `⟨f, g⟩_{H^s} = Σ (1+|k|²)^s Re(f(k)·conj g(k))`.
    pub fn inner_sobolev(&self, other: &Self, s: f64) -> f64 {
        let l = &self.lattice;
        self.coeff
            .iter()
            .zip(&other.coeff)
            .enumerate()
            .map(|(i, (a, b))| weight(l.norm_sq(i), s) * vec3::hdot(a, b).re)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeff
            .iter()
            .zip(&other.coeff)
            .map(|(a, b)| vec3::norm_sq(&vec3::sub(a, b)).sqrt())
            .fold(0.0, f64::max)
    }

    /// Mode-wise map.
    pub fn map_modes(&self, mut f: impl FnMut(usize, &C3) -> C3) -> Self {
        let coeff = self
            .coeff
            .iter()
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
        SpectralVectorField {
            lattice: self.lattice.clone(),
            coeff,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_modes(|_, c| vec3::scale_re(c, s))
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.coeff.iter_mut().zip(&other.coeff) {
            for j in 0..3 {
                x[j] += y[j] * a;
            }
        }
    }

    /// Multiplies mode `k` by a real scalar depending on the mode index.
    pub fn scale_modes(&self, f: impl Fn(usize) -> f64) -> Self {
        self.map_modes(|i, c| vec3::scale_re(c, f(i)))
    }

    pub fn to_snapshot(&self) -> Value {
        let l = &self.lattice;
        let modes: Vec<Value> = (0..l.len())
            .filter(|&i| is_positive(l.mode(i)))
            .map(|i| {
                let k = l.mode(i);
                let c = self.coeff[i];
                json!([k[0], k[1], k[2], c[0].re, c[0].im, c[1].re, c[1].im, c[2].re, c[2].im])
            })
            .collect();
        json!({ "n": l.radius(), "modes": modes })
    }

    /// Reads the snapshot format written by [`Self::to_snapshot`]. Only one
    /// representative of each `±k` pair is stored; partners are rebuilt.
    pub fn from_snapshot(value: &Value) -> Result<Self> {
        let n = value
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Snapshot("missing integer field `n`".into()))?;
        let lattice = crate::lattice::make_lattice(n as usize)?;
        let rows = value
            .get("modes")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Snapshot("missing array field `modes`".into()))?;
        let mut f = SpectralVectorField::zeros(&lattice);
        for (r, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .filter(|a| a.len() == 9)
                .ok_or_else(|| Error::Snapshot(format!("modes[{r}] must have 9 entries")))?;
            let mut k = [0i32; 3];
            for j in 0..3 {
                k[j] = row[j]
                    .as_i64()
                    .ok_or_else(|| Error::Snapshot(format!("modes[{r}][{j}] is not an integer")))?
                    as i32;
            }
            let mut v = [0.0f64; 6];
            for j in 0..6 {
                v[j] = row[3 + j].as_f64().ok_or_else(|| {
                    Error::Snapshot(format!("modes[{r}][{}] is not a number", 3 + j))
                })?;
            }
            if !is_positive(k) {
                return Err(Error::Snapshot(format!(
                    "modes[{r}]: {k:?} is not a positive representative"
                )));
            }
            let c = [
                Complex64::new(v[0], v[1]),
                Complex64::new(v[2], v[3]),
                Complex64::new(v[4], v[5]),
            ];
            f.set_mode(k, c)
                .map_err(|_| Error::Snapshot(format!("modes[{r}]: {k:?} outside lattice n={n}")))?;
        }
        Ok(f)
    }
}

#[inline]
pub(crate) fn weight(norm_sq: i64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        (1.0 + norm_sq as f64).powf(s)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&SpectralVectorField> for &SpectralVectorField {
            type Output = SpectralVectorField;
            fn $method(self, rhs: &SpectralVectorField) -> SpectralVectorField {
                assert_eq!(self.lattice.radius(), rhs.lattice.radius(), "lattice mismatch");
                let coeff = self
                    .coeff
                    .iter()
                    .zip(&rhs.coeff)
                    .map(|(a, b)| [a[0] $op b[0], a[1] $op b[1], a[2] $op b[2]])
                    .collect();
                SpectralVectorField { lattice: self.lattice.clone(), coeff }
            }
        }
    };
}
binop!(Add, add, +);
binop!(Sub, sub, -);

impl AddAssign<&SpectralVectorField> for SpectralVectorField {
    fn add_assign(&mut self, rhs: &SpectralVectorField) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&SpectralVectorField> for SpectralVectorField {
    fn sub_assign(&mut self, rhs: &SpectralVectorField) {
        self.axpy(-1.0, rhs);
    }
}

impl Neg for &SpectralVectorField {
    type Output = SpectralVectorField;
    fn neg(self) -> SpectralVectorField {
        self.scaled(-1.0)
    }
}

impl Mul<&SpectralVectorField> for f64 {
    type Output = SpectralVectorField;
    fn mul(self, rhs: &SpectralVectorField) -> SpectralVectorField {
        rhs.scaled(self)
    }
}

/// Deterministic random divergence-free field with coefficient envelope
/// `(1+|k|²)^(-decay/2)`.
pub fn random_divfree(
    seed: u64,
    lattice: &Arc<Lattice>,
    spectrum_decay: f64,
) -> SpectralVectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralVectorField::zeros(lattice);
    for i in 0..lattice.len() {
        let k = lattice.mode(i);
        if !is_positive(k) {
            continue;
        }
        let amp = (1.0 + lattice.norm_sq(i) as f64).powf(-0.5 * spectrum_decay);
        let mut c = vec3::ZERO;
        for cj in c.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *cj = Complex64::new(re, im) * amp;
        }
        let c = project_mode(&c, &lattice.wavevector(i));
        f.coeff[i] = c;
        f.coeff[lattice.neg(i)] = vec3::conj(&c);
    }
    f
}

#[inline]
pub(crate) fn project_mode(c: &C3, k: &[f64; 3]) -> C3 {
    let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    if kk == 0.0 {
        return vec3::ZERO;
    }
    let d = vec3::dot_re(c, k) / kk;
    [c[0] - d * k[0], c[1] - d * k[1], c[2] - d * k[2]]
}

/// Leray projection `f(k) - k (k·f(k))/|k|²`; the zero mode is left at zero.
pub fn project_leray(f: &SpectralVectorField) -> SpectralVectorField {
    let l = f.lattice.clone();
    f.map_modes(|i, c| project_mode(c, &l.wavevector(i)))
}

/// `∂_axis f`, multiplier `i k_axis`. Axes are numbered 1, 2, 3.
pub fn derivative(f: &SpectralVectorField, axis: usize) -> SpectralVectorField {
    assert!((1..=3).contains(&axis), "axis must be 1, 2 or 3");
    let l = f.lattice.clone();
    f.map_modes(|i, c| vec3::scale(c, Complex64::new(0.0, l.wavevector(i)[axis - 1])))
}

pub fn scalar_derivative(f: &ScalarField, axis: usize) -> ScalarField {
    assert!((1..=3).contains(&axis), "axis must be 1, 2 or 3");
    let l = &f.lattice;
    let coeff = f
        .coeff
        .iter()
        .enumerate()
        .map(|(i, c)| c * Complex64::new(0.0, l.wavevector(i)[axis - 1]))
        .collect();
    ScalarField {
        lattice: l.clone(),
        coeff,
    }
}

/// `Δf`, multiplier `-|k|²`.
pub fn laplacian(f: &SpectralVectorField) -> SpectralVectorField {
    let l = f.lattice.clone();
    f.scale_modes(|i| -(l.norm_sq(i) as f64))
}

/// `‖f‖_{H^s}` with weight `(1+|k|²)^s`; `s = 0` is the L² norm.
pub fn sobolev_norm(f: &SpectralVectorField, s: f64) -> f64 {
    f.sobolev_sq(s).sqrt()
}

/// The `x3`-average: keeps exactly the `k3 = 0` modes.
pub fn vertical_average(f: &SpectralVectorField) -> SpectralVectorField {
    let l = f.lattice.clone();
    f.map_modes(|i, c| if l.mode(i)[2] == 0 { *c } else { vec3::ZERO })
}

/// `f - vertical_average(f)`: keeps exactly the `k3 != 0` modes.
pub fn oscillating_part(f: &SpectralVectorField) -> SpectralVectorField {
    let l = f.lattice.clone();
    f.map_modes(|i, c| if l.mode(i)[2] != 0 { *c } else { vec3::ZERO })
}

fn check_threshold(f: &SpectralVectorField, cutoff: usize) -> Result<()> {
    let max = f.lattice.radius();
    if cutoff == 0 || cutoff > max {
        return Err(Error::TruncationRange {
            requested: cutoff,
            max,
        });
    }
    Ok(())
}

/// Keeps modes with `|k| <= cutoff`. The boundary shell belongs to the low part.
pub fn truncate_ball(f: &SpectralVectorField, cutoff: usize) -> Result<SpectralVectorField> {
    check_threshold(f, cutoff)?;
    let l = f.lattice.clone();
    let c2 = (cutoff * cutoff) as i64;
    Ok(f.map_modes(|i, c| if l.norm_sq(i) <= c2 { *c } else { vec3::ZERO }))
}

/// Keeps modes with `|k| > cutoff`, so that `truncate_ball + high_pass = f`.
pub fn high_pass(f: &SpectralVectorField, cutoff: usize) -> Result<SpectralVectorField> {
    check_threshold(f, cutoff)?;
    let l = f.lattice.clone();
    let c2 = (cutoff * cutoff) as i64;
    Ok(f.map_modes(|i, c| if l.norm_sq(i) > c2 { *c } else { vec3::ZERO }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_lattice;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn random_fields_are_admissible_and_deterministic() {
        let l = make_lattice(4).unwrap();
        let a = random_divfree(3, &l, 2.0);
        let b = random_divfree(3, &l, 2.0);
        assert_eq!(a.coeffs(), b.coeffs());
        assert_eq!(a.hermitian_defect(), 0.0);
        assert_eq!(a.mean_abs(), 0.0);
        assert!(a.divergence_residual() <= 1e-13 * a.norm_l2());
        let c2 = random_divfree(2, &l, 2.0);
        let c1 = random_divfree(1, &l, 2.0);
        assert!(c1.max_abs_diff(&c2) > 0.0);
    }

    #[test]
    fn random_envelope_follows_decay() {
        let l = make_lattice(6).unwrap();
        let f = random_divfree(11, &l, 4.0);
        let shell = |q: i64| -> f64 {
            (0..l.len())
                .filter(|&i| l.norm_sq(i) == q)
                .map(|i| vec3::norm_sq(&f.coeffs()[i]))
                .sum::<f64>()
                / (0..l.len()).filter(|&i| l.norm_sq(i) == q).count() as f64
        };
        // average energy per mode falls by orders of magnitude from |k|=1 to |k|=6
        assert!(shell(36) < 1e-3 * shell(1));
    }

    #[test]
    fn leray_kills_gradients_and_fixes_range() {
        let l = make_lattice(3).unwrap();
        let mut g = SpectralVectorField::zeros(&l);
        g.set_mode([1, 2, 0], [c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        let p = project_leray(&g);
        assert!(p.norm_l2() < 1e-15);

        let f = random_divfree(5, &l, 1.0);
        let pf = project_leray(&f);
        assert!(pf.max_abs_diff(&f) <= 1e-15);
    }

    #[test]
    fn leray_is_orthogonal_idempotent() {
        let l = make_lattice(4).unwrap();
        let mut f = SpectralVectorField::zeros(&l);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..l.len() {
            let k = l.mode(i);
            if is_positive(k) {
                let v: [f64; 6] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                f.set_mode(k, [c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5])])
                    .unwrap();
            }
        }
        let p = project_leray(&f);
        let pp = project_leray(&p);
        assert!(pp.max_abs_diff(&p) <= 1e-14 * p.norm_l2());
        let rest = &f - &p;
        assert!(p.inner_l2(&rest).abs() <= 1e-13 * f.norm_l2_sq());
    }

    #[test]
    fn derivative_multipliers() {
        let l = make_lattice(2).unwrap();
        let mut f = SpectralVectorField::zeros(&l);
        let v = [c(0.3, -0.2), c(1.0, 0.5), c(0.0, 0.0)];
        f.set_mode([0, 0, 1], v).unwrap();
        let d = derivative(&f, 3);
        let got = d.get([0, 0, 1]).unwrap();
        for j in 0..3 {
            assert_eq!(got[j], v[j] * Complex64::i());
        }
        assert_eq!(d.hermitian_defect(), 0.0);

        let flat = vertical_average(&random_divfree(1, &l, 0.0));
        assert!(derivative(&flat, 3).is_zero());

        let r = random_divfree(2, &l, 0.0);
        let a = derivative(&derivative(&r, 1), 2);
        let b = derivative(&derivative(&r, 2), 1);
        assert_eq!(a.coeffs(), b.coeffs());
    }

    #[test]
    fn sobolev_single_pair() {
        let l = make_lattice(2).unwrap();
        let mut f = SpectralVectorField::zeros(&l);
        f.set_mode([1, 1, 1], [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        assert_eq!(f.sobolev_sq(2.0), 32.0);
        assert_eq!(sobolev_norm(&f, 0.0), 2f64.sqrt());
    }

    #[test]
    fn sobolev_monotone_in_index() {
        let l = make_lattice(4).unwrap();
        let f = random_divfree(8, &l, 1.0);
        let mut prev = 0.0;
        for s in [0.0, 0.5, 1.0, 2.0, 3.5, 4.0] {
            let v = sobolev_norm(&f, s);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn vertical_split_is_orthogonal() {
        let l = make_lattice(4).unwrap();
        let f = random_divfree(4, &l, 1.0);
        let avg = vertical_average(&f);
        let osc = oscillating_part(&f);
        assert_eq!((&avg + &osc).coeffs(), f.coeffs());
        let sum = avg.norm_l2_sq() + osc.norm_l2_sq();
        assert!((sum - f.norm_l2_sq()).abs() <= 1e-14 * f.norm_l2_sq());
        assert!(vertical_average(&osc).is_zero());
        assert_eq!(vertical_average(&avg).coeffs(), avg.coeffs());
    }

    #[test]
    fn ball_truncation_split() {
        let l = make_lattice(4).unwrap();
        let f = random_divfree(6, &l, 1.0);
        assert_eq!(truncate_ball(&f, 4).unwrap().coeffs(), f.coeffs());
        for cutoff in 1..=4 {
            let lo = truncate_ball(&f, cutoff).unwrap();
            let hi = high_pass(&f, cutoff).unwrap();
            assert_eq!((&lo + &hi).coeffs(), f.coeffs());
            let sum = lo.norm_l2_sq() + hi.norm_l2_sq();
            assert!((sum - f.norm_l2_sq()).abs() <= 1e-14 * f.norm_l2_sq());
        }
        let mut g = SpectralVectorField::zeros(&l);
        g.set_mode([0, 0, 3], [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        assert!(truncate_ball(&g, 2).unwrap().is_zero());
        assert_eq!(high_pass(&g, 2).unwrap().coeffs(), g.coeffs());
        assert!(truncate_ball(&g, 0).is_err());
        assert!(high_pass(&g, 5).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let l = make_lattice(3).unwrap();
        let f = random_divfree(12, &l, 1.5);
        let text = serde_json::to_string(&f.to_snapshot()).unwrap();
        let back =
            SpectralVectorField::from_snapshot(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.coeffs(), f.coeffs());
    }

    #[test]
    fn snapshot_rejects_bad_rows() {
        let bad = json!({"n": 2, "modes": [[-1, 0, 0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]]});
        assert!(SpectralVectorField::from_snapshot(&bad).is_err());
        let outside = json!({"n": 1, "modes": [[1, 1, 0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]]});
        assert!(SpectralVectorField::from_snapshot(&outside).is_err());
    }
}
