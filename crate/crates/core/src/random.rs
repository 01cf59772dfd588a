//! Seeded random band-limited fields: Hermitian by construction, mean-zero,
//! with a power-law spectral envelope, plus initial data rescaled to hit a
//! prescribed energy exactly.

use crate::error::{Error, Result};
use crate::lp::LPFrame;
use crate::physics::FlowState;
use crate::spectral::{Grid, SpectralField};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Envelope of the random spectrum: active frequencies `0 < |k| <= k_band`,
/// amplitudes damped like `(1 + |k|^2)^{-decay/2}`.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumShape {
    pub k_band: usize,
    pub decay: f64,
}

impl SpectrumShape {
    pub fn validate(&self, grid: Grid) -> Result<()> {
        if self.k_band == 0 {
            return Err(Error::InvalidParam("k_band must be >= 1".into()));
        }
        if self.k_band as i64 > grid.max_freq() {
            return Err(Error::InvalidParam(format!(
                "k_band {} exceeds the lattice maximum {}",
                self.k_band,
                grid.max_freq()
            )));
        }
        Ok(())
    }
}

impl Default for SpectrumShape {
    fn default() -> Self {
        Self { k_band: 8, decay: 4.0 }
    }
}

/// Draw one Hermitian, mean-zero field. Coefficients are filled in flat-index
/// order from the stream, so the output is a pure function of the generator
/// state.
pub fn random_field(
    grid: Grid,
    comps: usize,
    shape: &SpectrumShape,
    rng: &mut ChaCha8Rng,
) -> Result<SpectralField> {
    shape.validate(grid)?;
    let mut f = SpectralField::zeros(grid, comps);
    let band2 = (shape.k_band * shape.k_band) as f64;
    let vol = grid.volume();
    for c in 0..comps {
        let coeffs = f.comp_mut(c);
        for flat in 0..grid.len() {
            let k2 = grid.k_norm2(flat);
            if k2 == 0.0 || k2 > band2 || grid.on_nyquist(flat) {
                continue;
            }
            let conj = grid.conj_index(flat);
            if conj < flat {
                continue; // filled together with its partner
            }
            let amp = vol * (1.0 + k2).powf(-shape.decay / 2.0);
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            let v = Complex64::new(amp * re, amp * im);
            coeffs[flat] = v;
            coeffs[conj] = v.conj();
        }
    }
    Ok(f)
}

/// Random initial data rescaled so the initial energy equals `eta` exactly.
/// `eta = 0` yields the zero state. Deterministic per seed.
pub fn gen_initial(
    grid: Grid,
    s: f64,
    frame: &LPFrame,
    eta: f64,
    shape: &SpectrumShape,
    seed: u64,
) -> Result<FlowState> {
    if eta < 0.0 {
        return Err(Error::InvalidParam(format!("eta must be nonnegative, got {eta}")));
    }
    if eta == 0.0 {
        return Ok(FlowState::zeros(grid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = FlowState::zeros(grid);
    state.rho = random_field(grid, 1, shape, &mut rng)?;
    state.u = random_field(grid, grid.dim(), shape, &mut rng)?;
    state.theta = random_field(grid, 1, shape, &mut rng)?;
    let e = crate::energy::energy_e0(&state, s, frame);
    if e == 0.0 {
        return Err(Error::InvalidParam(
            "random draw produced a zero state; cannot rescale to positive energy".into(),
        ));
    }
    let a = (eta / e).sqrt();
    state.rho.scale(a);
    state.u.scale(a);
    state.theta.scale(a);
    Ok(state)
}
