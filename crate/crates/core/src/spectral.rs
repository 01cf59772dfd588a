//! Discrete Fourier representation of real fields on a periodic box,
//! spectral differential operators, the sharp frequency cutoff, and
//! alias-controlled pointwise products on an oversampled grid.
//!
//! Convention: the forward transform carries the volume element
//! (`dx^d`), the inverse carries `1/volume`, so for the default box
//! `[0, 2pi)^d` the coefficient of a constant `c` at `k = 0` is
//! `c (2pi)^d` and Parseval reads `||f||_{L2}^2 = volume^{-1} sum |f^|^2`.

use crate::error::{Error, Result};
use crate::fft::{fftn, next_fast_even};
use num_complex::Complex64;
use std::f64::consts::PI;

pub const MAX_D: usize = 4;

/// Uniform periodic lattice: `n` points per dimension on a box of side `box_length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    d: usize,
    n: usize,
    box_length: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, box_length: f64) -> Result<Self> {
        if !(2..=4).contains(&d) {
            return Err(Error::InvalidParam(format!("dimension must be 2, 3 or 4, got {d}")));
        }
        if n % 2 != 0 || n < 8 {
            return Err(Error::InvalidParam(format!("n must be even and >= 8, got {n}")));
        }
        if !(box_length > 0.0) {
            return Err(Error::InvalidParam(format!("box_length must be positive, got {box_length}")));
        }
        Ok(Self { d, n, box_length })
    }

    /// Box `[0, 2pi)^d`, integer frequencies.
    pub fn standard(d: usize, n: usize) -> Result<Self> {
        Self::new(d, n, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn points_per_dim(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.d as i32)
    }

    /// Fundamental wavenumber `2pi / L` (1 on the standard box).
    pub fn k_unit(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Largest resolved per-dimension frequency index, `n/2 - 1`.
    pub fn max_freq(&self) -> i64 {
        self.n as i64 / 2 - 1
    }

    pub fn dims(&self) -> [usize; MAX_D] {
        let mut dims = [1usize; MAX_D];
        dims[..self.d].fill(self.n);
        dims
    }

    /// Signed integer frequency vector of a flat row-major lattice index.
    #[inline]
    pub fn decode(&self, mut flat: usize) -> [i64; MAX_D] {
        let n = self.n as i64;
        let mut f = [0i64; MAX_D];
        for axis in (0..self.d).rev() {
            let m = (flat % self.n) as i64;
            f[axis] = if m < n / 2 { m } else { m - n };
            flat /= self.n;
        }
        f
    }

    /// Flat index of a signed integer frequency vector.
    #[inline]
    pub fn encode(&self, freq: &[i64; MAX_D]) -> usize {
        let n = self.n as i64;
        let mut flat = 0usize;
        for axis in 0..self.d {
            let m = freq[axis].rem_euclid(n) as usize;
            flat = flat * self.n + m;
        }
        flat
    }

    /// Squared physical wavenumber `|k|^2` at a flat index.
    #[inline]
    pub fn k_norm2(&self, flat: usize) -> f64 {
        let f = self.decode(flat);
        let unit = self.k_unit();
        let mut acc = 0.0;
        for axis in 0..self.d {
            let k = unit * f[axis] as f64;
            acc += k * k;
        }
        acc
    }

    /// Flat index of the frequency `-k`.
    #[inline]
    pub fn conj_index(&self, flat: usize) -> usize {
        let f = self.decode(flat);
        let mut neg = [0i64; MAX_D];
        for axis in 0..self.d {
            neg[axis] = -f[axis];
        }
        self.encode(&neg)
    }

    /// True if any component of the frequency sits on the Nyquist row `-n/2`.
    #[inline]
    pub fn on_nyquist(&self, flat: usize) -> bool {
        let f = self.decode(flat);
        let ny = -(self.n as i64) / 2;
        f[..self.d].iter().any(|&c| c == ny)
    }
}

/// Complex Fourier coefficients of a real scalar or vector field.
/// Layout is component-major: `coeffs[c * grid.len() + flat]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub comps: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid, comps: usize) -> Self {
        Self {
            grid,
            comps,
            coeffs: vec![Complex64::default(); comps * grid.len()],
        }
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.coeffs[c * len..(c + 1) * len]
    }

    pub fn is_scalar(&self) -> bool {
        self.comps == 1
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Max over retained pairs of `|coeff(-k) - conj(coeff(k))|`, absolute.
    pub fn hermitian_residual(&self) -> f64 {
        let len = self.grid.len();
        let mut worst = 0.0f64;
        for c in 0..self.comps {
            let data = self.comp(c);
            for flat in 0..len {
                let other = self.grid.conj_index(flat);
                if other < flat {
                    continue;
                }
                let r = (data[other] - data[flat].conj()).norm();
                if r > worst {
                    worst = r;
                }
            }
        }
        worst
    }

    pub fn assert_hermitian(&self, tol: f64) -> Result<()> {
        let scale = self.max_abs_coeff().max(1.0);
        let residual = self.hermitian_residual();
        if residual > tol * scale {
            return Err(Error::SymmetryViolation { residual, tol: tol * scale });
        }
        Ok(())
    }

    /// Project onto the Hermitian-symmetric subspace (used after time steps
    /// to scrub rounding drift).
    pub fn symmetrize(&mut self) {
        let grid = self.grid;
        let len = grid.len();
        for c in 0..self.comps {
            let data = self.comp_mut(c);
            for flat in 0..len {
                let other = grid.conj_index(flat);
                if other < flat {
                    continue;
                }
                if other == flat {
                    data[flat] = Complex64::new(data[flat].re, 0.0);
                } else {
                    let avg = 0.5 * (data[flat] + data[other].conj());
                    data[flat] = avg;
                    data[other] = avg.conj();
                }
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in self.coeffs.iter_mut() {
            *c *= a;
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Parseval `L^2` norm over all components.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.coeffs.iter().map(|c| c.norm_sqr()).collect();
        (pairwise_sum(&sq) / self.grid.volume()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Real samples on the physical lattice, component-major like `SpectralField`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: Grid,
    pub comps: usize,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: Grid, comps: usize) -> Self {
        Self {
            grid,
            comps,
            values: vec![0.0; comps * grid.len()],
        }
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        let len = self.grid.len();
        &self.values[c * len..(c + 1) * len]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Deterministic reduction order for norm sums.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn forward_dft(f: &RealField) -> Result<SpectralField> {
    if !f.values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("forward_dft input"));
    }
    let grid = f.grid;
    let dims = grid.dims();
    let len = grid.len();
    let dx_d = (grid.box_length / grid.n as f64).powi(grid.d as i32);
    let mut out = SpectralField::zeros(grid, f.comps);
    let mut buf = vec![Complex64::default(); len];
    for c in 0..f.comps {
        for (b, &v) in buf.iter_mut().zip(f.comp(c)) {
            *b = Complex64::new(v, 0.0);
        }
        fftn(&mut buf, &dims[..grid.d], false);
        for (o, b) in out.comp_mut(c).iter_mut().zip(&buf) {
            *o = b * dx_d;
        }
    }
    Ok(out)
}

pub fn inverse_dft(field: &SpectralField) -> Result<RealField> {
    field.assert_hermitian(1e-12)?;
    let grid = field.grid;
    let dims = grid.dims();
    let len = grid.len();
    let inv_vol = 1.0 / grid.volume();
    let mut out = RealField::zeros(grid, field.comps);
    let mut buf = vec![Complex64::default(); len];
    for c in 0..field.comps {
        buf.copy_from_slice(field.comp(c));
        fftn(&mut buf, &dims[..grid.d], true);
        let dst = &mut out.values[c * len..(c + 1) * len];
        for (o, b) in dst.iter_mut().zip(&buf) {
            *o = b.re * inv_vol;
        }
    }
    Ok(out)
}

fn zero_nyquist(field: &mut SpectralField) {
    let grid = field.grid;
    let len = grid.len();
    for flat in 0..len {
        if grid.on_nyquist(flat) {
            for c in 0..field.comps {
                field.comp_mut(c)[flat] = Complex64::default();
            }
        }
    }
}

/// `grad f`: component m carries `i k_m f^(k)`. Nyquist rows are zeroed.
pub fn gradient(f: &SpectralField) -> Result<SpectralField> {
    if !f.is_scalar() {
        return Err(Error::RankMismatch { expected: 1, got: f.comps });
    }
    let grid = f.grid;
    let unit = grid.k_unit();
    let len = grid.len();
    let mut out = SpectralField::zeros(grid, grid.dim());
    let src = f.comp(0);
    for flat in 0..len {
        let fr = grid.decode(flat);
        let v = src[flat];
        for m in 0..grid.dim() {
            let km = unit * fr[m] as f64;
            out.comp_mut(m)[flat] = Complex64::new(0.0, km) * v;
        }
    }
    zero_nyquist(&mut out);
    Ok(out)
}

/// `div v = sum_m i k_m v^_m(k)`; exactly mean-free.
pub fn divergence(v: &SpectralField) -> Result<SpectralField> {
    let d = v.grid.dim();
    if v.comps != d {
        return Err(Error::RankMismatch { expected: d, got: v.comps });
    }
    let grid = v.grid;
    let unit = grid.k_unit();
    let len = grid.len();
    let mut out = SpectralField::zeros(grid, 1);
    for flat in 0..len {
        let fr = grid.decode(flat);
        let mut acc = Complex64::default();
        for m in 0..d {
            let km = unit * fr[m] as f64;
            acc += Complex64::new(0.0, km) * v.comp(m)[flat];
        }
        out.comp_mut(0)[flat] = acc;
    }
    zero_nyquist(&mut out);
    Ok(out)
}

/// `Delta f`: every component multiplied by `-|k|^2`.
pub fn laplacian(f: &SpectralField) -> Result<SpectralField> {
    let grid = f.grid;
    let len = grid.len();
    let mut out = f.clone();
    for flat in 0..len {
        let k2 = grid.k_norm2(flat);
        for c in 0..out.comps {
            out.comp_mut(c)[flat] *= -k2;
        }
    }
    zero_nyquist(&mut out);
    Ok(out)
}

/// `grad div v`: component m carries `-k_m (k . v^)`.
pub fn grad_div(v: &SpectralField) -> Result<SpectralField> {
    let d = v.grid.dim();
    if v.comps != d {
        return Err(Error::RankMismatch { expected: d, got: v.comps });
    }
    let grid = v.grid;
    let unit = grid.k_unit();
    let len = grid.len();
    let mut out = SpectralField::zeros(grid, d);
    for flat in 0..len {
        let fr = grid.decode(flat);
        let mut kdotv = Complex64::default();
        for m in 0..d {
            kdotv += unit * fr[m] as f64 * v.comp(m)[flat];
        }
        for m in 0..d {
            let km = unit * fr[m] as f64;
            out.comp_mut(m)[flat] = -km * kdotv;
        }
    }
    zero_nyquist(&mut out);
    Ok(out)
}

/// Sharp spectral cutoff: coefficients with `|k| > 1/eps` are zeroed.
pub fn truncate(f: &SpectralField, eps: f64) -> Result<SpectralField> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParam(format!("eps must be positive, got {eps}")));
    }
    let cutoff2 = (1.0 / eps) * (1.0 / eps);
    let grid = f.grid;
    let len = grid.len();
    let mut out = f.clone();
    for flat in 0..len {
        if grid.k_norm2(flat) > cutoff2 {
            for c in 0..out.comps {
                out.comp_mut(c)[flat] = Complex64::default();
            }
        }
    }
    Ok(out)
}

/// Residual of `(1 - J_eps) f` in `L^2`, used by the truncation-preservation checks.
pub fn truncation_residual(f: &SpectralField, eps: f64) -> f64 {
    let cutoff2 = (1.0 / eps) * (1.0 / eps);
    let grid = f.grid;
    let len = grid.len();
    let mut sq = Vec::new();
    for c in 0..f.comps {
        let data = f.comp(c);
        for flat in 0..len {
            if grid.k_norm2(flat) > cutoff2 {
                sq.push(data[flat].norm_sqr());
            }
        }
    }
    (pairwise_sum(&sq) / grid.volume()).sqrt()
}

/// Oversampled physical grid used for dealiased products and compositions.
///
/// `m` points per dimension: `pad * (2 K + 2)` rounded up to an FFT-friendly
/// even size, where `K` is the bandwidth the caller promises its inputs obey.
/// For full-lattice inputs (`K = n/2 - 1`) this is the classical `pad * n` grid.
#[derive(Debug, Clone, Copy)]
pub struct PaddedGrid {
    grid: Grid,
    m: usize,
}

impl PaddedGrid {
    /// Grid for inputs band-limited to per-axis frequency `<= k_band`.
    pub fn for_band(grid: Grid, k_band: usize, pad: f64) -> Result<Self> {
        if !(pad >= 1.0) {
            return Err(Error::InvalidParam(format!("pad must be >= 1, got {pad}")));
        }
        let want = (pad * (2 * k_band + 2) as f64).ceil() as usize;
        let m = next_fast_even(want.max(2 * k_band + 2));
        Ok(Self { grid, m })
    }

    /// Grid for arbitrary lattice inputs.
    pub fn full(grid: Grid, pad: f64) -> Result<Self> {
        Self::for_band(grid, grid.n / 2 - 1, pad)
    }

    pub fn points_per_dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.grid.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn fine_dims(&self) -> [usize; MAX_D] {
        let mut dims = [1usize; MAX_D];
        dims[..self.grid.d].fill(self.m);
        dims
    }

    fn embed(&self, buf: &mut [Complex64], f: &SpectralField, c: usize, factor: Complex64) {
        let grid = self.grid;
        let d = grid.d;
        let m = self.m as i64;
        let src = f.comp(c);
        for flat in 0..grid.len() {
            let v = src[flat];
            if v == Complex64::default() {
                continue;
            }
            let fr = grid.decode(flat);
            if fr[..d].iter().any(|&fi| fi >= m / 2 || fi < -m / 2) {
                // outside the fine lattice; band-limited inputs never hit this
                continue;
            }
            let mut dst = 0usize;
            for axis in 0..d {
                dst = dst * self.m + fr[axis].rem_euclid(m) as usize;
            }
            buf[dst] += factor * v;
        }
    }

    /// Physical samples of one component on the fine grid.
    pub fn sample(&self, f: &SpectralField, c: usize) -> Vec<f64> {
        let mut buf = vec![Complex64::default(); self.len()];
        self.embed(&mut buf, f, c, Complex64::new(1.0, 0.0));
        fftn(&mut buf, &self.fine_dims()[..self.grid.d], true);
        let inv_vol = 1.0 / self.grid.volume();
        buf.into_iter().map(|z| z.re * inv_vol).collect()
    }

    /// Physical samples of two Hermitian-symmetric components with a single
    /// transform: the second rides in the imaginary part of the first.
    pub fn sample_pair(
        &self,
        fa: &SpectralField,
        ca: usize,
        fb: &SpectralField,
        cb: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut buf = vec![Complex64::default(); self.len()];
        self.embed(&mut buf, fa, ca, Complex64::new(1.0, 0.0));
        self.embed(&mut buf, fb, cb, Complex64::new(0.0, 1.0));
        fftn(&mut buf, &self.fine_dims()[..self.grid.d], true);
        let inv_vol = 1.0 / self.grid.volume();
        let mut a = Vec::with_capacity(buf.len());
        let mut b = Vec::with_capacity(buf.len());
        for z in buf {
            a.push(z.re * inv_vol);
            b.push(z.im * inv_vol);
        }
        (a, b)
    }

    /// Samples of many Hermitian-symmetric components, two per transform.
    pub fn sample_batch(&self, reqs: &[(&SpectralField, usize)]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(reqs.len());
        let mut pairs = reqs.chunks_exact(2);
        for pair in &mut pairs {
            let (a, b) = self.sample_pair(pair[0].0, pair[0].1, pair[1].0, pair[1].1);
            out.push(a);
            out.push(b);
        }
        for &(f, c) in pairs.remainder() {
            out.push(self.sample(f, c));
        }
        out
    }

    /// Forward transform of fine-grid samples, restricted to the coarse lattice.
    pub fn lift(&self, samples: &[f64]) -> SpectralField {
        let grid = self.grid;
        let d = grid.d;
        let m = self.m as i64;
        debug_assert_eq!(samples.len(), self.len());
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fftn(&mut buf, &self.fine_dims()[..d], false);
        let dxf_d = (grid.box_length / self.m as f64).powi(d as i32);
        let mut out = SpectralField::zeros(grid, 1);
        let dst = out.comp_mut(0);
        for flat in 0..grid.len() {
            let fr = grid.decode(flat);
            if fr[..d].iter().any(|&fi| fi >= m / 2 || fi < -m / 2) {
                continue;
            }
            let mut idx = 0usize;
            for axis in 0..d {
                idx = idx * self.m + fr[axis].rem_euclid(m) as usize;
            }
            dst[flat] = buf[idx] * dxf_d;
        }
        out
    }

    /// Forward transform of two real sample sets with a single transform,
    /// separated afterwards through the Hermitian symmetry of real data.
    pub fn lift_pair(&self, sa: &[f64], sb: &[f64]) -> (SpectralField, SpectralField) {
        let grid = self.grid;
        let d = grid.d;
        let m = self.m as i64;
        debug_assert_eq!(sa.len(), self.len());
        debug_assert_eq!(sb.len(), self.len());
        let mut buf: Vec<Complex64> =
            sa.iter().zip(sb).map(|(&x, &y)| Complex64::new(x, y)).collect();
        fftn(&mut buf, &self.fine_dims()[..d], false);
        let dxf_d = (grid.box_length / self.m as f64).powi(d as i32);
        let mut fa = SpectralField::zeros(grid, 1);
        let mut fb = SpectralField::zeros(grid, 1);
        let da = fa.coeffs.as_mut_slice();
        let db = fb.coeffs.as_mut_slice();
        for flat in 0..grid.len() {
            let fr = grid.decode(flat);
            if fr[..d].iter().any(|&fi| fi >= m / 2 || fi < -m / 2) {
                continue;
            }
            let mut idx = 0usize;
            let mut neg = 0usize;
            for axis in 0..d {
                idx = idx * self.m + fr[axis].rem_euclid(m) as usize;
                neg = neg * self.m + (-fr[axis]).rem_euclid(m) as usize;
            }
            let z = buf[idx];
            let w = buf[neg].conj();
            da[flat] = (z + w) * (0.5 * dxf_d);
            db[flat] = (z - w) * Complex64::new(0.0, -0.5 * dxf_d);
        }
        (fa, fb)
    }

    /// Lifts of many real sample sets, two per transform.
    pub fn lift_batch(&self, cols: &[Vec<f64>]) -> Vec<SpectralField> {
        let mut out = Vec::with_capacity(cols.len());
        let mut pairs = cols.chunks_exact(2);
        for pair in &mut pairs {
            let (a, b) = self.lift_pair(&pair[0], &pair[1]);
            out.push(a);
            out.push(b);
        }
        for col in pairs.remainder() {
            out.push(self.lift(col));
        }
        out
    }
}

/// Dealiased pointwise product. Scalar x scalar, scalar x vector, or
/// componentwise for equal component counts.
pub fn pointwise_product(a: &SpectralField, b: &SpectralField, pad: f64) -> Result<SpectralField> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let pg = PaddedGrid::full(a.grid, pad)?;
    let (scalar, other) = if a.is_scalar() {
        (a, b)
    } else if b.is_scalar() {
        (b, a)
    } else if a.comps == b.comps {
        let s = pg.sample(a, 0);
        let mut out = SpectralField::zeros(a.grid, a.comps);
        for c in 0..a.comps {
            let sa = if c == 0 { s.clone() } else { pg.sample(a, c) };
            let sb = pg.sample(b, c);
            let prod: Vec<f64> = sa.iter().zip(&sb).map(|(x, y)| x * y).collect();
            let lifted = pg.lift(&prod);
            out.comp_mut(c).copy_from_slice(lifted.comp(0));
        }
        return Ok(out);
    } else {
        return Err(Error::RankMismatch { expected: a.comps, got: b.comps });
    };
    let s = pg.sample(scalar, 0);
    let mut out = SpectralField::zeros(a.grid, other.comps);
    for c in 0..other.comps {
        let so = pg.sample(other, c);
        let prod: Vec<f64> = s.iter().zip(&so).map(|(x, y)| x * y).collect();
        let lifted = pg.lift(&prod);
        out.comp_mut(c).copy_from_slice(lifted.comp(0));
    }
    Ok(out)
}

/// Pointwise composition `law(f)` evaluated on the oversampled grid and
/// re-truncated to the lattice. The law must be defined on the sample range.
pub fn compose_pointwise<F>(f: &SpectralField, law: F, pad: f64) -> Result<SpectralField>
where
    F: Fn(f64) -> f64,
{
    if !f.is_scalar() {
        return Err(Error::RankMismatch { expected: 1, got: f.comps });
    }
    let pg = PaddedGrid::full(f.grid, pad)?;
    let samples = pg.sample(f, 0);
    let mapped: Vec<f64> = samples.iter().map(|&x| law(x)).collect();
    if !mapped.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("compose_pointwise law output"));
    }
    Ok(pg.lift(&mapped))
}

/// Max of `|f|` over the oversampled physical grid (band-limited fields can
/// peak between coarse-grid points).
pub fn linf_oversampled(f: &SpectralField, pad: f64) -> Result<f64> {
    let pg = PaddedGrid::full(f.grid, pad)?;
    let mut worst = 0.0f64;
    for c in 0..f.comps {
        for v in pg.sample(f, c) {
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_x1(grid: Grid) -> RealField {
        let mut f = RealField::zeros(grid, 1);
        let n = grid.points_per_dim();
        let len = grid.len();
        let d = grid.dim();
        for flat in 0..len {
            let i1 = flat / n.pow((d - 1) as u32);
            let x1 = grid.box_length() * i1 as f64 / n as f64;
            f.values[flat] = x1.cos();
        }
        f
    }

    fn sin_x1(grid: Grid) -> RealField {
        let mut f = RealField::zeros(grid, 1);
        let n = grid.points_per_dim();
        let len = grid.len();
        let d = grid.dim();
        for flat in 0..len {
            let i1 = flat / n.pow((d - 1) as u32);
            let x1 = grid.box_length() * i1 as f64 / n as f64;
            f.values[flat] = x1.sin();
        }
        f
    }

    #[test]
    fn constant_field_transforms_to_zero_mode() {
        let grid = Grid::standard(2, 16).unwrap();
        let mut f = RealField::zeros(grid, 1);
        f.values.fill(3.5);
        let fh = forward_dft(&f).unwrap();
        let vol = grid.volume();
        assert!((fh.comp(0)[0] - Complex64::new(3.5 * vol, 0.0)).norm() < 1e-10);
        for flat in 1..grid.len() {
            assert!(fh.comp(0)[flat].norm() < 1e-10);
        }
    }

    #[test]
    fn cosine_has_two_modes() {
        let grid = Grid::standard(2, 16).unwrap();
        let fh = forward_dft(&cos_x1(grid)).unwrap();
        let vol = grid.volume();
        let plus = grid.encode(&[1, 0, 0, 0]);
        let minus = grid.encode(&[-1, 0, 0, 0]);
        assert!((fh.comp(0)[plus] - Complex64::new(vol / 2.0, 0.0)).norm() < 1e-9);
        assert!((fh.comp(0)[minus] - Complex64::new(vol / 2.0, 0.0)).norm() < 1e-9);
        for flat in 0..grid.len() {
            if flat != plus && flat != minus {
                assert!(fh.comp(0)[flat].norm() < 1e-9);
            }
        }
    }

    #[test]
    fn roundtrip_random_field() {
        let grid = Grid::standard(2, 32).unwrap();
        let mut f = RealField::zeros(grid, 1);
        let mut state = 0x243f6a88u64;
        for v in f.values.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        }
        let back = inverse_dft(&forward_dft(&f).unwrap()).unwrap();
        let scale = f.max_abs();
        let err = f
            .values
            .iter()
            .zip(&back.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err / scale <= 1e-12, "roundtrip error {err}");
    }

    #[test]
    fn gradient_of_sin_is_cos() {
        let grid = Grid::standard(2, 16).unwrap();
        let fh = forward_dft(&sin_x1(grid)).unwrap();
        let g = gradient(&fh).unwrap();
        let expect = forward_dft(&cos_x1(grid)).unwrap();
        let mut diff = SpectralField::zeros(grid, 1);
        diff.comp_mut(0).copy_from_slice(g.comp(0));
        diff.axpy(-1.0, &expect);
        assert!(diff.max_abs_coeff() < 1e-9);
        assert!(g.comp(1).iter().all(|c| c.norm() < 1e-10));
    }

    #[test]
    fn div_grad_equals_laplacian() {
        let grid = Grid::standard(2, 16).unwrap();
        let mut f = RealField::zeros(grid, 1);
        for (i, v) in f.values.iter_mut().enumerate() {
            *v = ((i * 7919 % 101) as f64 / 101.0) - 0.5;
        }
        let fh = forward_dft(&f).unwrap();
        let lhs = divergence(&gradient(&fh).unwrap()).unwrap();
        let rhs = laplacian(&fh).unwrap();
        let diff = lhs.sub(&rhs);
        assert!(diff.max_abs_coeff() < 1e-9 * fh.max_abs_coeff().max(1.0));
    }

    #[test]
    fn grad_div_kills_divergence_free_mode() {
        let grid = Grid::standard(2, 16).unwrap();
        // mode k = (1, 0) with u^ perpendicular to k: u = (0, cos(x1))
        let mut v = SpectralField::zeros(grid, 2);
        let vol = grid.volume();
        let plus = grid.encode(&[1, 0, 0, 0]);
        let minus = grid.encode(&[-1, 0, 0, 0]);
        v.comp_mut(1)[plus] = Complex64::new(vol / 2.0, 0.0);
        v.comp_mut(1)[minus] = Complex64::new(vol / 2.0, 0.0);
        let gd = grad_div(&v).unwrap();
        assert!(gd.max_abs_coeff() < 1e-12);
    }

    #[test]
    fn truncate_cutoff_behavior() {
        let grid = Grid::standard(2, 32).unwrap();
        let mut f = SpectralField::zeros(grid, 1);
        let idx = grid.encode(&[5, 0, 0, 0]);
        f.comp_mut(0)[idx] = Complex64::new(1.0, 0.0);
        f.comp_mut(0)[grid.conj_index(idx)] = Complex64::new(1.0, 0.0);
        let kept = truncate(&f, 0.1).unwrap();
        assert_eq!(kept, f);
        let gone = truncate(&f, 0.3).unwrap();
        assert!(gone.max_abs_coeff() == 0.0);
        assert!(truncate(&f, -1.0).is_err());
    }

    #[test]
    fn product_of_cosines() {
        let grid = Grid::standard(2, 32).unwrap();
        let c = forward_dft(&cos_x1(grid)).unwrap();
        let p = pointwise_product(&c, &c, 2.0).unwrap();
        // cos^2 = 1/2 + cos(2 x1)/2
        let vol = grid.volume();
        let zero = grid.encode(&[0, 0, 0, 0]);
        let two = grid.encode(&[2, 0, 0, 0]);
        assert!((p.comp(0)[zero] - Complex64::new(vol / 2.0, 0.0)).norm() < 1e-12 * vol);
        assert!((p.comp(0)[two] - Complex64::new(vol / 4.0, 0.0)).norm() < 1e-12 * vol);
    }

    #[test]
    fn compose_identity_and_square() {
        let grid = Grid::standard(2, 32).unwrap();
        let c = forward_dft(&cos_x1(grid)).unwrap();
        let same = compose_pointwise(&c, |x| x, 2.0).unwrap();
        assert!(same.sub(&c).max_abs_coeff() < 1e-10);
        let sq = compose_pointwise(&c, |x| x * x, 2.0).unwrap();
        let prod = pointwise_product(&c, &c, 2.0).unwrap();
        assert!(sq.sub(&prod).max_abs_coeff() < 1e-10);
    }

    #[test]
    fn truncate_rejects_vacuum_of_parameters() {
        let grid = Grid::new(2, 7, 1.0);
        assert!(grid.is_err());
        assert!(Grid::new(5, 16, 1.0).is_err());
        assert!(Grid::new(2, 16, -1.0).is_err());
    }

    #[test]
    fn divergence_is_mean_free() {
        let grid = Grid::standard(2, 16).unwrap();
        let mut v = RealField::zeros(grid, 2);
        for (i, x) in v.values.iter_mut().enumerate() {
            *x = ((i * 2654435761 % 97) as f64 / 97.0) - 0.4;
        }
        let vh = forward_dft(&v).unwrap();
        let div = divergence(&vh).unwrap();
        assert_eq!(div.comp(0)[0], Complex64::default());
    }

    fn hermitian_noise(grid: Grid, comps: usize, salt: usize) -> SpectralField {
        let mut f = SpectralField::zeros(grid, comps);
        for c in 0..comps {
            for (i, v) in f.comp_mut(c).iter_mut().enumerate() {
                let a = ((i * 2654435761 + salt * 97) % 1009) as f64 / 1009.0 - 0.5;
                let b = ((i * 40503 + salt * 31) % 811) as f64 / 811.0 - 0.5;
                *v = Complex64::new(a, b);
            }
        }
        f.symmetrize();
        truncate(&f, 1.0 / 6.0).unwrap()
    }

    #[test]
    fn paired_sampling_matches_single_sampling() {
        let grid = Grid::standard(2, 16).unwrap();
        let f = hermitian_noise(grid, 1, 1);
        let g = hermitian_noise(grid, 1, 2);
        let pg = PaddedGrid::for_band(grid, 6, 2.0).unwrap();
        let (a, b) = pg.sample_pair(&f, 0, &g, 0);
        let a1 = pg.sample(&f, 0);
        let b1 = pg.sample(&g, 0);
        for i in 0..a.len() {
            assert!((a[i] - a1[i]).abs() < 1e-13);
            assert!((b[i] - b1[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn paired_lift_matches_single_lift() {
        let grid = Grid::standard(2, 16).unwrap();
        let f = hermitian_noise(grid, 1, 3);
        let g = hermitian_noise(grid, 1, 4);
        let pg = PaddedGrid::for_band(grid, 6, 2.0).unwrap();
        let sa = pg.sample(&f, 0);
        let sb = pg.sample(&g, 0);
        let (la, lb) = pg.lift_pair(&sa, &sb);
        let ra = pg.lift(&sa);
        let rb = pg.lift(&sb);
        assert!(la.sub(&ra).l2_norm() < 1e-12);
        assert!(lb.sub(&rb).l2_norm() < 1e-12);
        // odd batch falls back to a single transform for the tail
        let batch = pg.lift_batch(&[sa.clone(), sb.clone(), sa.clone()]);
        assert_eq!(batch.len(), 3);
        assert!(batch[2].sub(&ra).l2_norm() < 1e-12);
    }
}
