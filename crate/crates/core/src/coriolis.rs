//! Eigen-decomposition of the Coriolis operator `L(u) = P(u × e₃)` and the
//! unitary group `L(t) = exp(-tL)` solving `∂_t u + L(u) = 0`.
//!
//! Convention, fixed by the generator tests below: `ν⁺(k)` has eigenvalue
//! `-iω(k)` under `û ↦ P̂(k)(û × e₃)`, `ν⁻(k)` has `+iω(k)`, so
//!
//! `L(t)û(k) = e^{iωt}(û,ν⁺)ν⁺ + e^{-iωt}(û,ν⁻)ν⁻`
//!
//! with `(a,b) = Σ a_j conj(b_j)`. Frames at negative representatives are the
//! complex conjugates of those at `-k`, which keeps real fields real.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{project_mode, SpectralVectorField};
use crate::lattice::{is_positive, Lattice, Mode};
use crate::vec3::{self, C3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigenFrame {
    pub k: Mode,
    pub omega: f64,
    pub nu_plus: C3,
    pub nu_minus: C3,
}

impl EigenFrame {
    pub fn nu(&self, s: Sign) -> &C3 {
        match s {
            Sign::Plus => &self.nu_plus,
            Sign::Minus => &self.nu_minus,
        }
    }

    /// Eigencoordinate `(c, ν^s)`.
    pub fn coord(&self, c: &C3, s: Sign) -> Complex64 {
        vec3::hdot(c, self.nu(s))
    }
}

/// `ω(k) = k₃/|k|`.
pub fn omega(k: Mode) -> Result<f64> {
    if k == [0, 0, 0] {
        return Err(Error::Domain(k));
    }
    let [a, b, c] = k.map(f64::from);
    Ok(c / (a * a + b * b + c * c).sqrt())
}

fn real_cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

pub fn eigenframe(k: Mode) -> Result<EigenFrame> {
    let om = omega(k)?;
    if !is_positive(k) {
        let p = eigenframe([-k[0], -k[1], -k[2]])?;
        return Ok(EigenFrame {
            k,
            omega: om,
            nu_plus: vec3::conj(&p.nu_plus),
            nu_minus: vec3::conj(&p.nu_minus),
        });
    }
    let kf = k.map(f64::from);
    let kh = real_cross(kf, [0.0, 0.0, 1.0]);
    // (e, f, k̂) is a right-handed orthonormal frame
    let e = if k[0] == 0 && k[1] == 0 {
        [1.0, 0.0, 0.0]
    } else {
        unit(kh)
    };
    let f = unit(real_cross(kf, e));
    let s = FRAC_1_SQRT_2;
    let mk =
        |sgn: f64| -> C3 { std::array::from_fn(|j| Complex64::new(s * e[j], -sgn * s * f[j])) };
    Ok(EigenFrame {
        k,
        omega: om,
        nu_plus: mk(1.0),
        nu_minus: mk(-1.0),
    })
}

/// Frames for every lattice mode; the origin holds a zero placeholder.
pub(crate) struct FrameTable {
    frames: Vec<EigenFrame>,
}

impl FrameTable {
    fn new(lattice: &Lattice) -> Self {
        let frames = (0..lattice.len())
            .map(|i| {
                let k = lattice.mode(i);
                eigenframe(k).unwrap_or(EigenFrame {
                    k,
                    omega: 0.0,
                    nu_plus: vec3::ZERO,
                    nu_minus: vec3::ZERO,
                })
            })
            .collect();
        FrameTable { frames }
    }

    pub(crate) fn get(&self, idx: usize) -> &EigenFrame {
        &self.frames[idx]
    }
}

pub(crate) fn frames(lattice: &Arc<Lattice>) -> &FrameTable {
    lattice.frames.get_or_init(|| FrameTable::new(lattice))
}

/// Frame of the lattice mode at `idx`, from the per-lattice cache.
pub fn frame_at(lattice: &Arc<Lattice>, idx: usize) -> EigenFrame {
    *frames(lattice).get(idx)
}

/// Mode-wise `P̂(k)(û(k) × e₃)`.
pub fn apply_generator(u: &SpectralVectorField) -> SpectralVectorField {
    let l = u.lattice().clone();
    u.map_modes(|i, c| project_mode(&[c[1], -c[0], Complex64::new(0.0, 0.0)], &l.wavevector(i)))
}

/// `L(t)u`. Any component along `k` is carried through unchanged.
pub fn apply_group(t: f64, u: &SpectralVectorField) -> SpectralVectorField {
    let l = u.lattice().clone();
    let table = frames(&l);
    u.map_modes(|i, c| {
        let fr = table.get(i);
        if fr.omega == 0.0 || t == 0.0 {
            return *c;
        }
        rotate_mode(fr, t, c)
    })
}

#[inline]
pub(crate) fn rotate_mode(fr: &EigenFrame, t: f64, c: &C3) -> C3 {
    let ap = fr.coord(c, Sign::Plus);
    let am = fr.coord(c, Sign::Minus);
    let ph = Complex64::from_polar(1.0, fr.omega * t);
    let cp = ap * ph;
    let cm = am * ph.conj();
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for j in 0..3 {
        // c − ap ν⁺ − am ν⁻ is the longitudinal part
        out[j] = c[j] + (cp - ap) * fr.nu_plus[j] + (cm - am) * fr.nu_minus[j];
    }
    out
}
