//! Independent per-mode oracle for the constant-coefficient dynamics: the
//! (d+2) x (d+2) symbol matrix of the linear system assembled directly from
//! its dispersion relations, and a scaling-and-squaring matrix exponential.
//!
//! Nothing here calls the spectral operators or the time stepper; the whole
//! point is to check them from the side.

use crate::physics::Constitutive;
use num_complex::Complex64;

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::default(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if a == Complex64::default() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn scale(&mut self, a: f64) {
        for v in self.data.iter_mut() {
            *v *= a;
        }
    }

    pub fn add_assign(&mut self, other: &CMatrix) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y;
        }
    }

    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.at(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        (0..n)
            .map(|i| (0..n).map(|j| self.at(i, j) * v[j]).sum())
            .collect()
    }
}

/// `exp(A)` by scaling and squaring with a Taylor kernel: the argument is
/// scaled below norm 1/2, the series is run to machine saturation, and the
/// result squared back.
pub fn expm(a: &CMatrix) -> CMatrix {
    let norm = a.one_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let mut scaled = a.clone();
    scaled.scale(0.5f64.powi(squarings as i32));

    let mut result = CMatrix::identity(a.n);
    let mut term = CMatrix::identity(a.n);
    for k in 1..=40 {
        term = term.matmul(&scaled);
        term.scale(1.0 / k as f64);
        result.add_assign(&term);
        if term.one_norm() < 1e-18 * result.one_norm().max(1.0) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// Symbol of the linear system at wavenumber `k`: the generator acting on the
/// coefficient vector `(rho, u_1 .. u_d, theta)`.
///
/// `d rho = -i k . u`;
/// `d u_m = -mu(1)(|k|^2 u_m + k_m (k . u)) - i k_m rho - i k_m theta`;
/// `d theta = -kappa |k|^2 theta`.
pub fn symbol_matrix(k: &[f64], laws: &Constitutive) -> CMatrix {
    let d = k.len();
    let n = d + 2;
    let mu1 = laws.mu1();
    let kappa = laws.kappa0();
    let k2: f64 = k.iter().map(|x| x * x).sum();
    let mut a = CMatrix::zeros(n);
    for m in 0..d {
        a.set(0, 1 + m, Complex64::new(0.0, -k[m]));
        a.set(1 + m, 0, Complex64::new(0.0, -k[m]));
        a.set(1 + m, d + 1, Complex64::new(0.0, -k[m]));
        for j in 0..d {
            let visc = -mu1 * (if m == j { k2 } else { 0.0 } + k[m] * k[j]);
            a.set(1 + m, 1 + j, Complex64::new(visc, 0.0));
        }
    }
    a.set(d + 1, d + 1, Complex64::new(-kappa * k2, 0.0));
    a
}

/// Exact linear-mode propagation: coefficients at time `t` from coefficients
/// at time 0.
pub fn propagate_mode(k: &[f64], laws: &Constitutive, t: f64, v0: &[Complex64]) -> Vec<Complex64> {
    let mut a = symbol_matrix(k, laws);
    a.scale(t);
    expm(&a).apply(v0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laws() -> Constitutive {
        Constitutive::preset("const-mu").unwrap()
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = CMatrix::zeros(4);
        assert_eq!(expm(&z), CMatrix::identity(4));
    }

    #[test]
    fn expm_diagonal() {
        let mut a = CMatrix::zeros(2);
        a.set(0, 0, Complex64::new(-1.0, 0.0));
        a.set(1, 1, Complex64::new(0.0, 2.0));
        let e = expm(&a);
        assert!((e.at(0, 0) - Complex64::new((-1.0f64).exp(), 0.0)).norm() < 1e-14);
        let expect = Complex64::new(2.0f64.cos(), 2.0f64.sin());
        assert!((e.at(1, 1) - expect).norm() < 1e-14);
        assert!(e.at(0, 1).norm() < 1e-15);
    }

    #[test]
    fn expm_nilpotent_exact() {
        // [[0,1],[0,0]] exponentiates to [[1,1],[0,1]]
        let mut a = CMatrix::zeros(2);
        a.set(0, 1, Complex64::new(1.0, 0.0));
        let e = expm(&a);
        assert!((e.at(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((e.at(0, 1) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn heat_row_decouples() {
        let l = laws();
        let k = [1.0, 0.0];
        let v0 = vec![
            Complex64::default(),
            Complex64::default(),
            Complex64::default(),
            Complex64::new(1.0, 0.0),
        ];
        let v1 = propagate_mode(&k, &l, 1.0, &v0);
        let expect = (-l.kappa0()).exp();
        assert!((v1[3] - Complex64::new(expect, 0.0)).norm() < 1e-12);
        // the coupling runs the other way: theta drives u, which drives rho
        assert!(v1[0].norm() > 1e-3);
        assert!(v1[1].norm() > 1e-3);
    }

    #[test]
    fn zero_mode_is_frozen() {
        let l = laws();
        let k = [0.0, 0.0];
        let v0 = vec![
            Complex64::new(0.3, 0.0),
            Complex64::new(-0.1, 0.0),
            Complex64::new(0.2, 0.0),
            Complex64::new(0.7, 0.0),
        ];
        let v1 = propagate_mode(&k, &l, 5.0, &v0);
        for (a, b) in v1.iter().zip(&v0) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
