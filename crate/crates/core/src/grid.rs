//! Padded physical grid used for exact quadratic products.
//!
//! With `M >= 4n+1` points per axis a product of two ball-truncated fields
//! (support `|k| <= 2n`) is represented without aliasing, so transform-based
//! products agree with the direct convolution up to rounding.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::lattice::Lattice;

pub(crate) struct PaddedGrid {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Flat grid index of each lattice mode.
    slot: Vec<usize>,
    /// Flat grid index of the negated wavevector of each grid point.
    mirror: Vec<usize>,
}

/// Smallest `2^a 3^b 5^c` that is `>= lo`.
pub(crate) fn smooth_size(lo: usize) -> usize {
    let mut m = lo.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

impl PaddedGrid {
    pub(crate) fn new(lattice: &Lattice) -> Self {
        let m = smooth_size(4 * lattice.radius() + 1);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let wrap = |x: i32| -> usize { x.rem_euclid(m as i32) as usize };
        let slot = lattice
            .modes()
            .iter()
            .map(|k| (wrap(k[0]) * m + wrap(k[1])) * m + wrap(k[2]))
            .collect();
        let neg = |i: usize| (m - i) % m;
        let mut mirror = vec![0; m * m * m];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    mirror[(a * m + b) * m + c] = (neg(a) * m + neg(b)) * m + neg(c);
                }
            }
        }
        PaddedGrid {
            m,
            fwd,
            inv,
            slot,
            mirror,
        }
    }

    pub(crate) fn points(&self) -> usize {
        self.m * self.m * self.m
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let m = self.m;
        let plan = if forward { &self.fwd } else { &self.inv };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // last axis is contiguous
        plan.process_with_scratch(buf, &mut scratch);
        let mut lines = vec![Complex64::new(0.0, 0.0); buf.len()];
        for stride in [m, m * m] {
            // gather lines along the strided axis, transform, scatter back
            let mut l = 0;
            for base in 0..buf.len() {
                if (base / stride) % m != 0 {
                    continue;
                }
                for j in 0..m {
                    lines[l * m + j] = buf[base + j * stride];
                }
                l += 1;
            }
            plan.process_with_scratch(&mut lines, &mut scratch);
            let mut l = 0;
            for base in 0..buf.len() {
                if (base / stride) % m != 0 {
                    continue;
                }
                for j in 0..m {
                    buf[base + j * stride] = lines[l * m + j];
                }
                l += 1;
            }
        }
    }

    /// Physical values of two real fields given by their lattice coefficients.
    pub(crate) fn synth_pair(
        &self,
        a: impl Fn(usize) -> Complex64,
        b: impl Fn(usize) -> Complex64,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.points()];
        let i = Complex64::new(0.0, 1.0);
        for (idx, &s) in self.slot.iter().enumerate() {
            buf[s] = a(idx) + i * b(idx);
        }
        self.transform(&mut buf, false);
        (
            buf.iter().map(|z| z.re).collect(),
            buf.iter().map(|z| z.im).collect(),
        )
    }

    /// Lattice coefficients of two real physical fields; modes outside the
    /// ball are discarded.
    pub(crate) fn analyze_pair(&self, x: &[f64], y: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut buf: Vec<Complex64> = x
            .iter()
            .zip(y)
            .map(|(&p, &q)| Complex64::new(p, q))
            .collect();
        self.transform(&mut buf, true);
        let scale = 1.0 / self.points() as f64;
        let mut fa = Vec::with_capacity(self.slot.len());
        let mut fb = Vec::with_capacity(self.slot.len());
        for &s in &self.slot {
            let z = buf[s];
            let zm = buf[self.mirror[s]].conj();
            fa.push((z + zm) * (0.5 * scale));
            fb.push((z - zm) * Complex64::new(0.0, -0.5 * scale));
        }
        (fa, fb)
    }
}
