//! Unscrambled Sobol sequence with Joe–Kuo direction numbers.

use ndarray::Array2;

use super::sobol_table::JOE_KUO;
use crate::error::{Error, Result};

const BITS: usize = 32;

/// Largest supported dimension.
pub const MAX_DIM: usize = JOE_KUO.len() + 1;

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (31 - k);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim - 1];
    let s = s as usize;
    for k in 0..s.min(BITS) {
        v[k] = m[k] << (31 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for l in 1..s {
            if (a >> (s - 1 - l)) & 1 == 1 {
                x ^= v[k - l];
            }
        }
        v[k] = x;
    }
    v
}

/// Gray-code Sobol generator; the all-zero initial point is never emitted.
#[derive(Debug, Clone)]
pub struct Sobol {
    dirs: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u32,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("Sobol dimension must be >= 1".into()));
        }
        if dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "Sobol dimension {dim} exceeds the direction-number table ({MAX_DIM})"
            )));
        }
        Ok(Self {
            dirs: (0..dim).map(direction_numbers).collect(),
            state: vec![0; dim],
            index: 0,
        })
    }

    /// Writes the next point into `out`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        let c = self.index.trailing_ones() as usize;
        self.index = self.index.wrapping_add(1);
        for ((x, v), o) in self.state.iter_mut().zip(&self.dirs).zip(out.iter_mut()) {
            *x ^= v[c];
            *o = *x as f64 / 4_294_967_296.0;
        }
    }
}

/// First `n` Sobol points in `(0, 1)^dim` (zero point skipped), one per row.
pub fn sobol_design(dim: usize, n: usize) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("Sobol design needs n >= 1".into()));
    }
    let mut gen = Sobol::new(dim)?;
    let mut out = Array2::zeros((n, dim));
    for mut row in out.rows_mut() {
        gen.next_into(row.as_slice_mut().expect("standard layout"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_prefix() {
        let d = sobol_design(1, 3).unwrap();
        assert_eq!(d.column(0).to_vec(), vec![0.5, 0.75, 0.25]);
        assert_eq!(sobol_design(2, 1).unwrap().row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(sobol_design(0, 3).is_err());
        assert!(sobol_design(MAX_DIM + 1, 3).is_err());
        assert!(sobol_design(2, 0).is_err());
        assert!(sobol_design(MAX_DIM, 3).is_ok());
    }

    #[test]
    fn dyadic_van_der_corput() {
        for k in 1..12 {
            let n = (1usize << k) - 1;
            let d = sobol_design(1, n).unwrap();
            let mut got: Vec<u64> = d.column(0).iter().map(|x| (x * (1u64 << k) as f64) as u64).collect();
            got.sort_unstable();
            assert_eq!(got, (1..(1u64 << k)).collect::<Vec<_>>());
            for x in d.column(0) {
                assert_eq!(x * (1u64 << k) as f64, (x * (1u64 << k) as f64).round());
            }
        }
    }

    #[test]
    fn matches_reference_generator() {
        // new-joe-kuo-6.21201, unscrambled, points 1..=16, first 10 dimensions
        let expected: [[f64; 10]; 16] = [
            [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75, 0.75],
            [0.25, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75, 0.25, 0.25, 0.25],
            [0.375, 0.375, 0.625, 0.875, 0.375, 0.125, 0.375, 0.875, 0.875, 0.625],
            [0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875, 0.375, 0.375, 0.125],
            [0.625, 0.125, 0.875, 0.625, 0.625, 0.875, 0.125, 0.125, 0.125, 0.375],
            [0.125, 0.625, 0.375, 0.125, 0.125, 0.375, 0.625, 0.625, 0.625, 0.875],
            [0.1875, 0.3125, 0.9375, 0.4375, 0.5625, 0.3125, 0.4375, 0.9375, 0.9375, 0.3125],
            [0.6875, 0.8125, 0.4375, 0.9375, 0.0625, 0.8125, 0.9375, 0.4375, 0.4375, 0.8125],
            [0.9375, 0.0625, 0.6875, 0.1875, 0.3125, 0.5625, 0.1875, 0.1875, 0.1875, 0.5625],
            [0.4375, 0.5625, 0.1875, 0.6875, 0.8125, 0.0625, 0.6875, 0.6875, 0.6875, 0.0625],
            [0.3125, 0.1875, 0.3125, 0.5625, 0.9375, 0.4375, 0.0625, 0.0625, 0.0625, 0.9375],
            [0.8125, 0.6875, 0.8125, 0.0625, 0.4375, 0.9375, 0.5625, 0.5625, 0.5625, 0.4375],
            [0.5625, 0.4375, 0.0625, 0.8125, 0.1875, 0.6875, 0.3125, 0.8125, 0.8125, 0.1875],
            [0.0625, 0.9375, 0.5625, 0.3125, 0.6875, 0.1875, 0.8125, 0.3125, 0.3125, 0.6875],
            [0.09375, 0.46875, 0.46875, 0.65625, 0.28125, 0.96875, 0.53125, 0.84375, 0.46875, 0.15625],
        ];
        let d = sobol_design(10, 16).unwrap();
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(d.row(i).to_vec(), row.to_vec(), "point {}", i + 1);
        }
    }

    #[test]
    fn high_dimensions_match_reference_generator() {
        // dimensions 53, 60, 64 (1-based) of points 101 and 1024
        let d = sobol_design(64, 1024).unwrap();
        let pick = |i: usize| vec![d[[i, 52]], d[[i, 59]], d[[i, 63]]];
        assert_eq!(pick(100), vec![0.5703125, 0.6640625, 0.1484375]);
        assert_eq!(pick(1023), vec![0.17529296875, 0.38037109375, 0.96630859375]);
    }
}
