//! Dyadic partition of unity on the frequency lattice, blockwise Sobolev
//! norms, and the direct weighted-coefficient cross-check norm.
//!
//! The low-frequency cutoff `chi` is a mollified radial step: identically 1
//! for `r <= 3/4`, identically 0 for `r >= 4/3`, with the standard
//! `exp(-1/x)` bridge in between. The ring function is the telescope
//! `phi(xi) = chi(xi/2) - chi(xi)`, which puts its support in
//! `3/4 <= |xi| <= 8/3` and makes the partition identity exact on any
//! finite lattice.

use crate::error::{Error, Result};
use crate::spectral::{pairwise_sum, Grid, SpectralField};

/// Smooth transition: 0 at t <= 0, 1 at t >= 1, monotone in between.
fn bump_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Radial low-pass cutoff: 1 on `r <= 3/4`, 0 on `r >= 4/3`.
pub fn chi(r: f64) -> f64 {
    1.0 - bump_step((r - 0.75) / (4.0 / 3.0 - 0.75))
}

/// Ring cutoff `phi(r) = chi(r/2) - chi(r)`, supported in `[3/4, 8/3]`.
pub fn phi(r: f64) -> f64 {
    chi(r / 2.0) - chi(r)
}

/// Tabulated dyadic cutoffs on the lattice radii of one grid.
#[derive(Debug, Clone)]
pub struct LPFrame {
    grid: Grid,
    j_max: i32,
    /// `weights[0]` is the `chi` block (j = -1); `weights[1 + j]` is `phi(2^{-j} .)`.
    weights: Vec<Vec<f64>>,
}

/// Per-block `L^2` norms `||Delta_j f||` for `j = -1 ..= j_max`.
#[derive(Debug, Clone)]
pub struct DyadicSpectrum {
    pub block_norms: Vec<f64>,
}

impl DyadicSpectrum {
    pub fn norm(&self, j: i32) -> f64 {
        self.block_norms[(j + 1) as usize]
    }
}

pub fn build_frame(grid: Grid) -> LPFrame {
    let len = grid.len();
    let r_max = ((grid.dim() as f64).sqrt() * grid.points_per_dim() as f64 / 2.0) * grid.k_unit();
    // Smallest j_max with r_max <= (3/4) 2^{j_max + 1}: the partition then
    // telescopes to exactly 1 at every lattice point.
    let j_max = ((r_max / 0.75).log2().ceil() as i32 - 1).max(0);
    let mut weights = Vec::with_capacity((j_max + 2) as usize);
    let radii: Vec<f64> = (0..len).map(|flat| grid.k_norm2(flat).sqrt()).collect();
    weights.push(radii.iter().map(|&r| chi(r)).collect());
    for j in 0..=j_max {
        let scale = (2.0f64).powi(-j);
        weights.push(radii.iter().map(|&r| phi(scale * r)).collect());
    }
    LPFrame { grid, j_max, weights }
}

impl LPFrame {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// Cutoff value of block `j` (`-1 ..= j_max`) at a flat lattice index.
    pub fn weight(&self, j: i32, flat: usize) -> f64 {
        self.weights[(j + 1) as usize][flat]
    }

    pub fn check_block(&self, j: i32) -> Result<()> {
        if j < -1 || j > self.j_max {
            return Err(Error::BlockOutOfRange { j, j_max: self.j_max });
        }
        Ok(())
    }

    /// Max over the lattice of `|chi + sum_j phi(2^{-j} .) - 1|`.
    pub fn partition_residual(&self) -> f64 {
        let len = self.grid.len();
        let mut worst = 0.0f64;
        for flat in 0..len {
            let mut sum = 0.0;
            for w in &self.weights {
                sum += w[flat];
            }
            worst = worst.max((sum - 1.0).abs());
        }
        worst
    }
}

/// `Delta_j f`: coefficients multiplied by the tabulated cutoff of block `j`.
pub fn dyadic_block(f: &SpectralField, j: i32, frame: &LPFrame) -> Result<SpectralField> {
    frame.check_block(j)?;
    let len = f.grid.len();
    let w = &frame.weights[(j + 1) as usize];
    let mut out = f.clone();
    for c in 0..out.comps {
        let data = out.comp_mut(c);
        for flat in 0..len {
            data[flat] *= w[flat];
        }
    }
    Ok(out)
}

/// `||Delta_j f||_{L^2}` without materializing the block.
pub fn block_l2(f: &SpectralField, j: i32, frame: &LPFrame) -> Result<f64> {
    frame.check_block(j)?;
    let len = f.grid.len();
    let w = &frame.weights[(j + 1) as usize];
    let mut sq = Vec::with_capacity(f.comps * len);
    for c in 0..f.comps {
        let data = f.comp(c);
        for flat in 0..len {
            let x = w[flat];
            sq.push(x * x * data[flat].norm_sqr());
        }
    }
    Ok((pairwise_sum(&sq) / f.grid.volume()).sqrt())
}

pub fn dyadic_spectrum(f: &SpectralField, frame: &LPFrame) -> Result<DyadicSpectrum> {
    let mut block_norms = Vec::with_capacity((frame.j_max + 2) as usize);
    for j in -1..=frame.j_max {
        block_norms.push(block_l2(f, j, frame)?);
    }
    Ok(DyadicSpectrum { block_norms })
}

/// Nonhomogeneous Sobolev norm `(sum_{j >= -1} 2^{2js} ||Delta_j f||^2)^{1/2}`.
pub fn sobolev_norm(f: &SpectralField, s: f64, frame: &LPFrame) -> f64 {
    let len = f.grid.len();
    let inv_vol = 1.0 / f.grid.volume();
    // per-point multiplier sum_j 2^{2js} w_j(k)^2
    let mut factor = vec![0.0f64; len];
    for (idx, w) in frame.weights.iter().enumerate() {
        let j = idx as i32 - 1;
        let pw = (2.0f64).powf(2.0 * j as f64 * s);
        for flat in 0..len {
            factor[flat] += pw * w[flat] * w[flat];
        }
    }
    let mut sq = Vec::with_capacity(f.comps * len);
    for c in 0..f.comps {
        let data = f.comp(c);
        for flat in 0..len {
            sq.push(factor[flat] * data[flat].norm_sqr() * inv_vol);
        }
    }
    pairwise_sum(&sq).sqrt()
}

/// Homogeneous dyadic norm: all blocks with lattice support, `k = 0` excluded.
pub fn homogeneous_norm(f: &SpectralField, s: f64, frame: &LPFrame) -> f64 {
    let grid = f.grid;
    let len = grid.len();
    let inv_vol = 1.0 / grid.volume();
    let k_min = grid.k_unit();
    // smallest j whose ring reaches down to the first nonzero radius
    let j_lo = (3.0 * k_min / 8.0).log2().floor() as i32 + 1;
    let mut factor = vec![0.0f64; len];
    for flat in 1..len {
        let r = grid.k_norm2(flat).sqrt();
        if r == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for j in j_lo..=frame.j_max {
            let w = phi((2.0f64).powi(-j) * r);
            if w > 0.0 {
                acc += (2.0f64).powf(2.0 * j as f64 * s) * w * w;
            }
        }
        factor[flat] = acc;
    }
    let mut sq = Vec::with_capacity(f.comps * len);
    for c in 0..f.comps {
        let data = f.comp(c);
        for flat in 1..len {
            sq.push(factor[flat] * data[flat].norm_sqr() * inv_vol);
        }
    }
    pairwise_sum(&sq).sqrt()
}

/// Cross-check oracle: `(sum_k (1 + |k|^2)^s |f^(k)|^2 / vol)^{1/2}`.
pub fn direct_weighted_norm(f: &SpectralField, s: f64) -> f64 {
    let grid = f.grid;
    let len = grid.len();
    let inv_vol = 1.0 / grid.volume();
    let mut sq = Vec::with_capacity(f.comps * len);
    for c in 0..f.comps {
        let data = f.comp(c);
        for flat in 0..len {
            let w = (1.0 + grid.k_norm2(flat)).powf(s);
            sq.push(w * data[flat].norm_sqr() * inv_vol);
        }
    }
    pairwise_sum(&sq).sqrt()
}
