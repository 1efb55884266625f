//! Digitally shifted Sobol sequences on the unit cube.

use rand::Rng;

use crate::error::{Error, Result};

const BITS: usize = 32;

/// Primitive polynomials and initial direction numbers (Joe & Kuo, 21201-dim
/// table), first 32 dimensions.
const DIRECTIONS: [(u32, &[u32]); 32] = [
    (1, &[1]),
    (3, &[1]),
    (7, &[1, 3]),
    (11, &[1, 3, 1]),
    (13, &[1, 1, 1]),
    (19, &[1, 1, 3, 3]),
    (25, &[1, 3, 5, 13]),
    (37, &[1, 1, 5, 5, 17]),
    (41, &[1, 1, 5, 5, 5]),
    (47, &[1, 1, 7, 11, 19]),
    (55, &[1, 1, 5, 1, 1]),
    (59, &[1, 1, 1, 3, 11]),
    (61, &[1, 3, 5, 5, 31]),
    (67, &[1, 3, 3, 9, 7, 49]),
    (91, &[1, 1, 1, 15, 21, 21]),
    (97, &[1, 3, 1, 13, 27, 49]),
    (103, &[1, 1, 1, 15, 7, 5]),
    (109, &[1, 3, 1, 15, 13, 25]),
    (115, &[1, 1, 5, 5, 19, 61]),
    (131, &[1, 3, 7, 11, 23, 15, 103]),
    (137, &[1, 3, 7, 13, 13, 15, 69]),
    (143, &[1, 1, 3, 13, 7, 35, 63]),
    (145, &[1, 3, 5, 9, 1, 25, 53]),
    (157, &[1, 3, 1, 13, 9, 35, 107]),
    (167, &[1, 3, 1, 5, 27, 61, 31]),
    (171, &[1, 1, 5, 11, 19, 41, 61]),
    (185, &[1, 3, 5, 3, 3, 13, 69]),
    (191, &[1, 1, 7, 13, 1, 19, 1]),
    (193, &[1, 3, 7, 5, 13, 19, 59]),
    (203, &[1, 1, 3, 9, 25, 29, 41]),
    (211, &[1, 3, 5, 13, 23, 1, 55]),
    (213, &[1, 3, 7, 3, 13, 59, 17]),
];

pub const MAX_DIM: usize = DIRECTIONS.len();

#[derive(Debug, Clone)]
pub struct Sobol {
    // v[d][k]: direction number for bit k, already shifted into the top bits.
    v: Vec<[u32; BITS]>,
    shift: Vec<u32>,
}

impl Sobol {
    /// Unscrambled sequence; the first point is the origin.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Unsupported(format!(
                "Sobol sequences support 1..={MAX_DIM} dimensions, got {dim}"
            )));
        }
        let mut v = Vec::with_capacity(dim);
        for &(poly, init) in DIRECTIONS.iter().take(dim) {
            let mut m = [0u64; BITS];
            if poly == 1 {
                m.iter_mut().for_each(|x| *x = 1);
            } else {
                let deg = (32 - poly.leading_zeros() - 1) as usize;
                for (j, &val) in init.iter().enumerate().take(deg) {
                    m[j] = val as u64;
                }
                for j in deg..BITS {
                    let mut newv = m[j - deg];
                    let mut pow2 = 1u64;
                    for k in 0..deg {
                        pow2 <<= 1;
                        if (poly >> (deg - 1 - k)) & 1 == 1 {
                            newv ^= pow2 * m[j - k - 1];
                        }
                    }
                    m[j] = newv;
                }
            }
            let mut row = [0u32; BITS];
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = (m[k] << (BITS - 1 - k)) as u32;
            }
            v.push(row);
        }
        Ok(Self { v, shift: vec![0; dim] })
    }

    /// Sequence with a random digital shift drawn from `seed`.
    pub fn scrambled(dim: usize, seed: u64) -> Result<Self> {
        let mut s = Self::new(dim)?;
        let mut rng = crate::rng::rng(seed);
        s.shift.iter_mut().for_each(|x| *x = rng.random());
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn point(&self, index: u32) -> Vec<f64> {
        let gray = index ^ (index >> 1);
        self.v
            .iter()
            .zip(&self.shift)
            .map(|(row, &shift)| {
                let mut acc = 0u32;
                for (k, &dir) in row.iter().enumerate() {
                    if (gray >> k) & 1 == 1 {
                        acc ^= dir;
                    }
                }
                ((acc ^ shift) as f64 + 0.5) / 4_294_967_296.0
            })
            .collect()
    }

    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n as u32).map(|i| self.point(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_prefix() {
        // Reference prefix of the unscrambled 3-d sequence.
        let expected = [
            [0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25],
            [0.25, 0.75, 0.75],
            [0.375, 0.375, 0.625],
            [0.875, 0.875, 0.125],
            [0.625, 0.125, 0.875],
            [0.125, 0.625, 0.375],
        ];
        let s = Sobol::new(3).unwrap();
        for (i, row) in expected.iter().enumerate() {
            let p = s.point(i as u32);
            for d in 0..3 {
                assert!((p[d] - row[d]).abs() < 1e-9, "point {i} dim {d}: {}", p[d]);
            }
        }
    }

    #[test]
    fn stratifies_each_dimension() {
        let s = Sobol::scrambled(MAX_DIM, 11).unwrap();
        let pts = s.points(64);
        for d in 0..MAX_DIM {
            let mut bins = [0usize; 64];
            for p in &pts {
                bins[(p[d] * 64.0) as usize] += 1;
            }
            assert!(bins.iter().all(|&b| b == 1), "dim {d} not stratified");
        }
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(Sobol::new(0).is_err());
        assert!(Sobol::new(MAX_DIM + 1).is_err());
    }
}
