//! Truncated nonlinear products.
//!
//! Every product is the exact truncated convolution restricted to the ball.
//! [`convolve_direct`] is the O(M²) reference; the remaining functions use the
//! padded grid and agree with it up to rounding.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::Result;
use crate::field::{project_leray, ScalarField, SpectralVectorField};
use crate::grid::PaddedGrid;
use crate::lattice::Lattice;
use crate::state::StateU;
use crate::vec3::{self, C3};

pub(crate) fn grid(lattice: &Arc<Lattice>) -> &PaddedGrid {
    lattice.grid.get_or_init(|| PaddedGrid::new(lattice))
}

/// `h(n) = Σ_{k+m=n} f(k) g(m)` over lattice modes, kept for `|n| <= lattice.n`.
pub fn convolve_direct(f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    let l = f.lattice();
    l.check_same(g.lattice())?;
    let mut h = ScalarField::zeros(l);
    let fc = f.coeffs();
    let gc = g.coeffs();
    let out = h.coeffs_mut();
    for (i, &fi) in fc.iter().enumerate() {
        if fi == Complex64::new(0.0, 0.0) {
            continue;
        }
        let k = l.mode(i);
        for (j, &gj) in gc.iter().enumerate() {
            let m = l.mode(j);
            if let Some(t) = l.index_of([k[0] + m[0], k[1] + m[1], k[2] + m[2]]) {
                out[t] += fi * gj;
            }
        }
    }
    Ok(h)
}

/// Same product as [`convolve_direct`], evaluated on the padded grid.
pub fn multiply_dealiased(f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    let l = f.lattice();
    l.check_same(g.lattice())?;
    let grid = grid(l);
    let (x, y) = grid.synth_pair(|i| f.coeffs()[i], |i| g.coeffs()[i]);
    let p: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let zero = vec![0.0; p.len()];
    let (h, _) = grid.analyze_pair(&p, &zero);
    let mut out = ScalarField::zeros(l);
    out.coeffs_mut().copy_from_slice(&h);
    Ok(out)
}

/// `(1/M³) Σ_x |f(x)|²` over the padded grid, for Parseval checks.
pub fn grid_energy(f: &SpectralVectorField) -> f64 {
    let grid = grid(f.lattice());
    let c = f.coeffs();
    let (x0, x1) = grid.synth_pair(|i| c[i][0], |i| c[i][1]);
    let (x2, _) = grid.synth_pair(|i| c[i][2], |_| Complex64::new(0.0, 0.0));
    let sum: f64 = (0..x0.len())
        .map(|p| x0[p] * x0[p] + x1[p] * x1[p] + x2[p] * x2[p])
        .sum();
    sum / grid.points() as f64
}

/// Physical values of a list of real scalar lanes, two per transform.
fn synth_lanes(grid: &PaddedGrid, lanes: &[&dyn Fn(usize) -> Complex64]) -> Vec<Vec<f64>> {
    let zero = |_: usize| Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(lanes.len());
    for pair in lanes.chunks(2) {
        let b: &dyn Fn(usize) -> Complex64 = if pair.len() == 2 { pair[1] } else { &zero };
        let (x, y) = grid.synth_pair(pair[0], b);
        out.push(x);
        if pair.len() == 2 {
            out.push(y);
        }
    }
    out
}

fn analyze_lanes(grid: &PaddedGrid, lanes: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(lanes.len());
    for pair in lanes.chunks(2) {
        if pair.len() == 2 {
            let (a, b) = grid.analyze_pair(&pair[0], &pair[1]);
            out.push(a);
            out.push(b);
        } else {
            let zero = vec![0.0; pair[0].len()];
            out.push(grid.analyze_pair(&pair[0], &zero).0);
        }
    }
    out
}

/// `a·∇f = Σ_j a_j ∂_j f`, truncated to the ball. Requires `div a = 0`.
pub fn advect(a: &SpectralVectorField, f: &SpectralVectorField) -> Result<SpectralVectorField> {
    let l = a.lattice();
    l.check_same(f.lattice())?;
    a.require_divergence_free()?;
    let grid = grid(l);
    let ac = a.coeffs();
    let fc = f.coeffs();
    let mut lanes: Vec<Box<dyn Fn(usize) -> Complex64 + '_>> = Vec::with_capacity(12);
    for j in 0..3 {
        lanes.push(Box::new(move |i| ac[i][j]));
    }
    for j in 0..3 {
        for c in 0..3 {
            lanes.push(Box::new(move |i| {
                fc[i][c] * Complex64::new(0.0, l.wavevector(i)[j])
            }));
        }
    }
    let refs: Vec<&dyn Fn(usize) -> Complex64> = lanes.iter().map(|b| b.as_ref()).collect();
    let phys = synth_lanes(grid, &refs);
    let prod: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            (0..grid.points())
                .map(|p| (0..3).map(|j| phys[j][p] * phys[3 + 3 * j + c][p]).sum())
                .collect()
        })
        .collect();
    let spec = analyze_lanes(grid, &prod);
    let mut out = SpectralVectorField::from_fn(l, |i, _| [spec[0][i], spec[1][i], spec[2][i]]);
    out.coeffs_mut()[l.origin()] = vec3::ZERO;
    Ok(out)
}

/// `curl f`, multiplier `i k ×`.
pub fn curl(f: &SpectralVectorField) -> SpectralVectorField {
    let l = f.lattice().clone();
    f.map_modes(|i, c| {
        let ik = vec3::scale(&vec3::from_re(l.wavevector(i)), Complex64::new(0.0, 1.0));
        vec3::cross(&ik, c)
    })
}

/// `f × e₃`, a pure multiplier.
pub fn cross_e3(f: &SpectralVectorField) -> SpectralVectorField {
    f.map_modes(|_, c| [c[1], -c[0], Complex64::new(0.0, 0.0)])
}

/// `(curl b) × c`, truncated to the ball.
pub fn curl_cross(b: &SpectralVectorField, c: &SpectralVectorField) -> Result<SpectralVectorField> {
    let l = b.lattice();
    l.check_same(c.lattice())?;
    let w = curl(b);
    let grid = grid(l);
    let wc = w.coeffs();
    let cc = c.coeffs();
    let lanes: [&dyn Fn(usize) -> Complex64; 6] = [
        &|i| wc[i][0],
        &|i| wc[i][1],
        &|i| wc[i][2],
        &|i| cc[i][0],
        &|i| cc[i][1],
        &|i| cc[i][2],
    ];
    let p = synth_lanes(grid, &lanes);
    let n = grid.points();
    let prod: Vec<Vec<f64>> = (0..3)
        .map(|d| {
            let (a, bb) = ((d + 1) % 3, (d + 2) % 3);
            (0..n)
                .map(|x| p[a][x] * p[3 + bb][x] - p[bb][x] * p[3 + a][x])
                .collect()
        })
        .collect();
    let spec = analyze_lanes(grid, &prod);
    let mut out = SpectralVectorField::from_fn(l, |i, _| [spec[0][i], spec[1][i], spec[2][i]]);
    out.coeffs_mut()[l.origin()] = vec3::ZERO;
    Ok(out)
}

/// `(curl b) × e₃`, a pure multiplier.
pub fn curl_cross_e3(b: &SpectralVectorField) -> SpectralVectorField {
    cross_e3(&curl(b))
}

/// The MHD quadratic form `Q(U,U) = (P(u·∇u − b·∇b), u·∇b − b·∇u)`.
///
/// Evaluated in divergence form, `∂_j(u_j u_i − b_j b_i)` and
/// `∂_j(u_j b_i − b_j u_i)`, which needs five paired transforms in and five
/// out. Requires `div u = div b = 0`.
pub fn mhd_nonlinear(u: &SpectralVectorField, b: &SpectralVectorField) -> Result<StateU> {
    let l = u.lattice();
    l.check_same(b.lattice())?;
    u.require_divergence_free()?;
    b.require_divergence_free()?;
    Ok(mhd_nonlinear_unchecked(u, b))
}

pub(crate) fn mhd_nonlinear_unchecked(u: &SpectralVectorField, b: &SpectralVectorField) -> StateU {
    let l = u.lattice();
    let grid = grid(l);
    let uc = u.coeffs();
    let bc = b.coeffs();
    let lanes: [&dyn Fn(usize) -> Complex64; 6] = [
        &|i| uc[i][0],
        &|i| uc[i][1],
        &|i| uc[i][2],
        &|i| bc[i][0],
        &|i| bc[i][1],
        &|i| bc[i][2],
    ];
    let p = synth_lanes(grid, &lanes);
    let n = grid.points();
    // symmetric momentum flux S_ij = u_i u_j − b_i b_j (six lanes) and
    // antisymmetric induction flux A_ij = u_j b_i − b_j u_i (three lanes)
    const SYM: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
    const ANTI: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
    let mut flux: Vec<Vec<f64>> = Vec::with_capacity(9);
    for &(i, j) in &SYM {
        flux.push(
            (0..n)
                .map(|x| p[i][x] * p[j][x] - p[3 + i][x] * p[3 + j][x])
                .collect(),
        );
    }
    for &(i, j) in &ANTI {
        flux.push(
            (0..n)
                .map(|x| p[j][x] * p[3 + i][x] - p[3 + j][x] * p[i][x])
                .collect(),
        );
    }
    let s = analyze_lanes(grid, &flux);
    let sym = |i: usize, j: usize, idx: usize| -> Complex64 {
        let pos = SYM
            .iter()
            .position(|&(a, b)| (a, b) == (i.min(j), i.max(j)))
            .unwrap();
        s[pos][idx]
    };
    let anti = |i: usize, j: usize, idx: usize| -> Complex64 {
        if i == j {
            Complex64::new(0.0, 0.0)
        } else if i < j {
            s[6 + ANTI.iter().position(|&p| p == (i, j)).unwrap()][idx]
        } else {
            -s[6 + ANTI.iter().position(|&p| p == (j, i)).unwrap()][idx]
        }
    };
    let mut mom = vec![vec3::ZERO; l.len()];
    let mut ind = vec![vec3::ZERO; l.len()];
    for idx in 0..l.len() {
        if idx == l.origin() {
            continue;
        }
        let k = l.wavevector(idx);
        let mut a: C3 = vec3::ZERO;
        let mut c: C3 = vec3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let ikj = Complex64::new(0.0, k[j]);
                a[i] += ikj * sym(i, j, idx);
                c[i] += ikj * anti(i, j, idx);
            }
        }
        mom[idx] = a;
        ind[idx] = c;
    }
    let mom = project_leray(&SpectralVectorField::from_coeffs(l, mom));
    StateU {
        u: mom,
        b: SpectralVectorField::from_coeffs(l, ind),
    }
}
