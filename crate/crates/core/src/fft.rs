//! Multi-dimensional complex FFT on row-major arrays, with cached plans.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static PLAN_CACHE: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLAN_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry((len, inverse))
            .or_insert_with(|| {
                PLANNER.with(|p| {
                    if inverse {
                        p.borrow_mut().plan_fft_inverse(len)
                    } else {
                        p.borrow_mut().plan_fft_forward(len)
                    }
                })
            })
            .clone()
    })
}

/// Unnormalized FFT along every axis of a row-major `dims` array.
/// Forward uses the e^{-i} kernel, inverse e^{+i}; neither divides by the length.
pub fn fftn(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    debug_assert_eq!(data.len(), dims.iter().product::<usize>());
    for axis in 0..dims.len() {
        fft_axis(data, dims, axis, inverse);
    }
}

fn fft_axis(data: &mut [Complex64], dims: &[usize], axis: usize, inverse: bool) {
    let len = dims[axis];
    let stride: usize = dims[axis + 1..].iter().product();
    let block = stride * len;
    let fft = plan(len, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    if stride == 1 {
        for line in data.chunks_exact_mut(len) {
            fft.process_with_scratch(line, &mut scratch);
        }
        return;
    }

    let mut line = vec![Complex64::default(); len];
    for chunk in data.chunks_exact_mut(block) {
        for off in 0..stride {
            for (i, v) in line.iter_mut().enumerate() {
                *v = chunk[i * stride + off];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (i, v) in line.iter().enumerate() {
                chunk[i * stride + off] = *v;
            }
        }
    }
}

/// Smallest even integer >= `x` whose prime factors are all <= 7
/// (keeps the mixed-radix FFT away from Bluestein's algorithm).
pub fn next_fast_even(x: usize) -> usize {
    let mut m = if x % 2 == 0 { x.max(2) } else { x + 1 };
    loop {
        let mut r = m;
        for p in [2usize, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_2d() {
        let dims = [8usize, 8];
        let mut data: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let orig = data.clone();
        fftn(&mut data, &dims, false);
        fftn(&mut data, &dims, true);
        let scale = 64.0;
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / scale - b).norm() < 1e-12);
        }
    }

    #[test]
    fn fast_even_sizes() {
        assert_eq!(next_fast_even(49), 50);
        assert_eq!(next_fast_even(64), 64);
        assert_eq!(next_fast_even(67), 70);
        assert_eq!(next_fast_even(121), 126);
    }
}
