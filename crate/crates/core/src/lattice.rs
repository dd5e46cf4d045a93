//! Friedrichs-truncated wavenumber lattice.
//!
//! Modes are the integer points of the closed Euclidean ball `|k| <= n`,
//! enumerated in lexicographic order of `(k1, k2, k3)`. The set is closed
//! under `k -> -k`. The origin is part of the mode set but every field keeps
//! its coefficient there at zero.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::coriolis::FrameTable;
use crate::error::{Error, Result};
use crate::grid::PaddedGrid;
use crate::resonance::InteractionTable;

pub type Mode = [i32; 3];

pub const MAX_RADIUS: usize = 32;

pub struct Lattice {
    n: usize,
    modes: Vec<Mode>,
    wave: Vec<[f64; 3]>,
    norm_sq: Vec<i64>,
    neg: Vec<usize>,
    lookup: Vec<i32>,
    origin: usize,
    pub(crate) frames: OnceLock<FrameTable>,
    pub(crate) grid: OnceLock<PaddedGrid>,
    pub(crate) interactions: OnceLock<InteractionTable>,
}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lattice")
            .field("n", &self.n)
            .field("modes", &self.modes.len())
            .finish()
    }
}

/// Builds the ball lattice of radius `n` (`1 <= n <= 32`).
pub fn make_lattice(n: usize) -> Result<Arc<Lattice>> {
    if n == 0 || n > MAX_RADIUS {
        return Err(Error::LatticeRange(n));
    }
    let r = n as i32;
    let r2 = (n * n) as i64;
    let side = 2 * n + 1;
    let mut lookup = vec![-1i32; side * side * side];
    let mut modes = Vec::new();
    for k1 in -r..=r {
        for k2 in -r..=r {
            for k3 in -r..=r {
                let q = (k1 * k1 + k2 * k2 + k3 * k3) as i64;
                if q <= r2 {
                    let idx = modes.len();
                    lookup[cube_index(n, [k1, k2, k3])] = idx as i32;
                    modes.push([k1, k2, k3]);
                }
            }
        }
    }
    let wave = modes
        .iter()
        .map(|k| [k[0] as f64, k[1] as f64, k[2] as f64])
        .collect();
    let norm_sq = modes.iter().map(|k| mode_norm_sq(*k)).collect();
    let neg = modes
        .iter()
        .map(|k| lookup[cube_index(n, [-k[0], -k[1], -k[2]])] as usize)
        .collect();
    let origin = lookup[cube_index(n, [0, 0, 0])] as usize;
    Ok(Arc::new(Lattice {
        n,
        modes,
        wave,
        norm_sq,
        neg,
        lookup,
        origin,
        frames: OnceLock::new(),
        grid: OnceLock::new(),
        interactions: OnceLock::new(),
    }))
}

fn cube_index(n: usize, k: Mode) -> usize {
    let side = 2 * n + 1;
    let o = n as i32;
    (((k[0] + o) as usize) * side + (k[1] + o) as usize) * side + (k[2] + o) as usize
}

pub fn mode_norm_sq(k: Mode) -> i64 {
    let [a, b, c] = k.map(|x| x as i64);
    a * a + b * b + c * c
}

/// `true` for the representative of each `±k` pair whose first nonzero
/// component is positive.
pub fn is_positive(k: Mode) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

impl Lattice {
    pub fn radius(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, idx: usize) -> Mode {
        self.modes[idx]
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        self.wave[idx]
    }

    pub fn norm_sq(&self, idx: usize) -> i64 {
        self.norm_sq[idx]
    }

    /// Index of `-k`.
    pub fn neg(&self, idx: usize) -> usize {
        self.neg[idx]
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn index_of(&self, k: Mode) -> Option<usize> {
        let r = self.n as i32;
        if k.iter().any(|c| c.abs() > r) {
            return None;
        }
        let i = self.lookup[cube_index(self.n, k)];
        (i >= 0).then_some(i as usize)
    }

    pub fn contains(&self, k: Mode) -> bool {
        self.index_of(k).is_some()
    }

    pub(crate) fn check_same(&self, other: &Lattice) -> Result<()> {
        if self.n != other.n {
            return Err(Error::LatticeMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_count(n: i32) -> usize {
        let mut c = 0;
        for a in -n..=n {
            for b in -n..=n {
                for d in -n..=n {
                    if a * a + b * b + d * d <= n * n {
                        c += 1;
                    }
                }
            }
        }
        c
    }

    #[test]
    fn radius_one_has_seven_modes() {
        let l = make_lattice(1).unwrap();
        assert_eq!(l.len(), 7);
        for k in [
            [0, 0, 0],
            [1, 0, 0],
            [-1, 0, 0],
            [0, 1, 0],
            [0, -1, 0],
            [0, 0, 1],
            [0, 0, -1],
        ] {
            assert!(l.contains(k));
        }
    }

    #[test]
    fn counts_match_brute_force() {
        assert_eq!(make_lattice(2).unwrap().len(), 33);
        for n in 1..=6 {
            assert_eq!(make_lattice(n).unwrap().len(), brute_count(n as i32));
        }
    }

    #[test]
    fn out_of_range_radius_rejected() {
        assert!(matches!(make_lattice(0), Err(Error::LatticeRange(0))));
        assert!(make_lattice(33).is_err());
        assert!(make_lattice(32).is_ok());
    }

    #[test]
    fn closed_under_negation_and_sorted() {
        let l = make_lattice(4).unwrap();
        for i in 0..l.len() {
            let k = l.mode(i);
            let j = l.neg(i);
            assert_eq!(l.mode(j), [-k[0], -k[1], -k[2]]);
            assert_eq!(l.index_of(k), Some(i));
        }
        assert!(l.modes().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(l.mode(l.origin()), [0, 0, 0]);
    }
}
