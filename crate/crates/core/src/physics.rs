//! Constitutive laws, the nonlinearities of the reduced system, the
//! linear/nonlinear split used by the energy monitor, and the sharply
//! truncated right-hand side integrated by the time stepper.
//!
//! All nonlinear terms are evaluated pointwise on an oversampled physical
//! grid and transformed back; the density equation keeps its divergence
//! form so the mean of the density perturbation is conserved exactly.

use crate::error::{Error, GuardKind, Result};
use crate::spectral::{
    divergence, grad_div, gradient, laplacian, truncate, Grid, PaddedGrid, SpectralField,
};

/// Dense polynomial, coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let d: Vec<f64> = self
            .0
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| i as f64 * c)
            .collect();
        Polynomial(d)
    }
}

/// The smooth scalar laws with the reference-state normalizations:
/// `mu(1) > 0`, `Pe'(1) = 1`, `kappa(0) > 0`; `c_v = 1` and `R = 1` fixed.
#[derive(Debug, Clone)]
pub struct Constitutive {
    mu: Polynomial,
    mu_prime: Polynomial,
    pe_prime: Polynomial,
    kappa: Polynomial,
    kappa_prime: Polynomial,
}

impl Constitutive {
    pub fn custom(mu: Polynomial, pe: Polynomial, kappa: Polynomial) -> Result<Self> {
        let pe_prime = pe.derivative();
        let laws = Self {
            mu_prime: mu.derivative(),
            kappa_prime: kappa.derivative(),
            mu,
            pe_prime,
            kappa,
        };
        if !(laws.mu1() > 0.0) {
            return Err(Error::InvalidParam(format!("mu(1) must be positive, got {}", laws.mu1())));
        }
        if (laws.pe_prime.eval(1.0) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "Pe'(1) must equal 1, got {}",
                laws.pe_prime.eval(1.0)
            )));
        }
        if !(laws.kappa0() > 0.0) {
            return Err(Error::InvalidParam(format!(
                "kappa(0) must be positive, got {}",
                laws.kappa0()
            )));
        }
        Ok(laws)
    }

    /// `const-mu`: mu = 1, Pe = x, kappa = 1 + theta^2.
    /// `linear-mu`: same but mu = x, exercising the mu' terms.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "const-mu" => Self::custom(
                Polynomial::new(vec![1.0]),
                Polynomial::new(vec![0.0, 1.0]),
                Polynomial::new(vec![1.0, 0.0, 1.0]),
            ),
            "linear-mu" => Self::custom(
                Polynomial::new(vec![0.0, 1.0]),
                Polynomial::new(vec![0.0, 1.0]),
                Polynomial::new(vec![1.0, 0.0, 1.0]),
            ),
            other => Err(Error::Config(format!("unknown constitutive preset '{other}'"))),
        }
    }

    pub fn mu(&self, x: f64) -> f64 {
        self.mu.eval(x)
    }

    pub fn mu_prime(&self, x: f64) -> f64 {
        self.mu_prime.eval(x)
    }

    pub fn pe_prime(&self, x: f64) -> f64 {
        self.pe_prime.eval(x)
    }

    pub fn kappa_fn(&self, x: f64) -> f64 {
        self.kappa.eval(x)
    }

    pub fn kappa_prime(&self, x: f64) -> f64 {
        self.kappa_prime.eval(x)
    }

    /// Reference shear viscosity `mu(1)`.
    pub fn mu1(&self) -> f64 {
        self.mu.eval(1.0)
    }

    /// Constant conductivity `kappa = kappa(0)` of the linear part.
    pub fn kappa0(&self) -> f64 {
        self.kappa.eval(0.0)
    }

    pub fn mu_is_constant(&self) -> bool {
        self.mu_prime.0.iter().all(|&c| c == 0.0)
    }
}

/// Perturbation density, velocity, and temperature at one time.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub rho: SpectralField,
    pub u: SpectralField,
    pub theta: SpectralField,
    pub t: f64,
}

impl FlowState {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            rho: SpectralField::zeros(grid, 1),
            u: SpectralField::zeros(grid, grid.dim()),
            theta: SpectralField::zeros(grid, 1),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> Grid {
        self.rho.grid
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid();
        if self.u.grid != grid || self.theta.grid != grid {
            return Err(Error::GridMismatch);
        }
        if self.rho.comps != 1 {
            return Err(Error::RankMismatch { expected: 1, got: self.rho.comps });
        }
        if self.u.comps != grid.dim() {
            return Err(Error::RankMismatch { expected: grid.dim(), got: self.u.comps });
        }
        if self.theta.comps != 1 {
            return Err(Error::RankMismatch { expected: 1, got: self.theta.comps });
        }
        Ok(())
    }

    pub fn truncated(&self, eps: f64) -> Result<FlowState> {
        Ok(FlowState {
            rho: truncate(&self.rho, eps)?,
            u: truncate(&self.u, eps)?,
            theta: truncate(&self.theta, eps)?,
            t: self.t,
        })
    }

    pub fn symmetrize(&mut self) {
        self.rho.symmetrize();
        self.u.symmetrize();
        self.theta.symmetrize();
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.rho
            .hermitian_residual()
            .max(self.u.hermitian_residual())
            .max(self.theta.hermitian_residual())
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.u.is_finite() && self.theta.is_finite()
    }

    /// `self += a * deriv`, leaving the timestamp untouched.
    pub fn axpy(&mut self, a: f64, deriv: &StateDerivative) {
        self.rho.axpy(a, &deriv.rho);
        self.u.axpy(a, &deriv.u);
        self.theta.axpy(a, &deriv.theta);
    }

    /// Combined `L^2` norm of the triple.
    pub fn l2_norm(&self) -> f64 {
        let r = self.rho.l2_norm();
        let u = self.u.l2_norm();
        let t = self.theta.l2_norm();
        (r * r + u * u + t * t).sqrt()
    }

    pub fn sub(&self, other: &FlowState) -> FlowState {
        FlowState {
            rho: self.rho.sub(&other.rho),
            u: self.u.sub(&other.u),
            theta: self.theta.sub(&other.theta),
            t: self.t,
        }
    }
}

/// Time derivative of a `FlowState`.
#[derive(Debug, Clone)]
pub struct StateDerivative {
    pub rho: SpectralField,
    pub u: SpectralField,
    pub theta: SpectralField,
}

impl StateDerivative {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            rho: SpectralField::zeros(grid, 1),
            u: SpectralField::zeros(grid, grid.dim()),
            theta: SpectralField::zeros(grid, 1),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &StateDerivative) {
        self.rho.axpy(a, &other.rho);
        self.u.axpy(a, &other.u);
        self.theta.axpy(a, &other.theta);
    }

    pub fn scale(&mut self, a: f64) {
        self.rho.scale(a);
        self.u.scale(a);
        self.theta.scale(a);
    }

    pub fn l2_norm(&self) -> f64 {
        let r = self.rho.l2_norm();
        let u = self.u.l2_norm();
        let t = self.theta.l2_norm();
        (r * r + u * u + t * t).sqrt()
    }

    pub fn sub(&self, other: &StateDerivative) -> StateDerivative {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.u.is_finite() && self.theta.is_finite()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.rho
            .max_abs_coeff()
            .max(self.u.max_abs_coeff())
            .max(self.theta.max_abs_coeff())
    }
}

/// Admissible distance from vacuum: `min(rho + 1)` on the oversampled grid
/// must stay at or above this before any division.
pub const VACUUM_FLOOR: f64 = 0.25;

fn comp_field(f: &SpectralField, c: usize) -> SpectralField {
    let mut out = SpectralField::zeros(f.grid, 1);
    out.comp_mut(0).copy_from_slice(f.comp(c));
    out
}

/// All physical-space samples a right-hand-side evaluation needs, on one
/// oversampled grid.
struct PhysWorkspace {
    d: usize,
    rho: Vec<f64>,
    theta: Vec<f64>,
    u: Vec<Vec<f64>>,
    grad_rho: Vec<Vec<f64>>,
    grad_theta: Vec<Vec<f64>>,
    /// `grad_u[m][j]` holds the samples of d u_m / d x_j.
    grad_u: Vec<Vec<Vec<f64>>>,
    lap_theta: Vec<f64>,
    /// Samples of `(Delta u + grad div u)_m`.
    visc_u: Vec<Vec<f64>>,
    div_u: Vec<f64>,
}

impl PhysWorkspace {
    fn build(state: &FlowState, pg: PaddedGrid, time: f64) -> Result<Self> {
        state.validate()?;
        let d = state.grid().dim();

        let grad_rho_s = gradient(&state.rho)?;
        let grad_theta_s = gradient(&state.theta)?;
        let lap_theta_s = laplacian(&state.theta)?;
        let mut visc_s = laplacian(&state.u)?;
        visc_s.axpy(1.0, &grad_div(&state.u)?);
        let grad_u_s: Vec<SpectralField> = (0..d)
            .map(|m| gradient(&comp_field(&state.u, m)))
            .collect::<Result<_>>()?;

        // one ordered list of every component we need in physical space, so
        // the sampler can amortize two components per transform
        let mut reqs: Vec<(&SpectralField, usize)> = vec![(&state.rho, 0), (&state.theta, 0)];
        for m in 0..d {
            reqs.push((&state.u, m));
        }
        for g in &grad_u_s {
            for j in 0..d {
                reqs.push((g, j));
            }
        }
        for m in 0..d {
            reqs.push((&visc_s, m));
        }
        for j in 0..d {
            reqs.push((&grad_rho_s, j));
        }
        for j in 0..d {
            reqs.push((&grad_theta_s, j));
        }
        reqs.push((&lap_theta_s, 0));
        let mut cols = pg.sample_batch(&reqs).into_iter();

        let rho = cols.next().unwrap();
        let min_total = rho.iter().fold(f64::INFINITY, |m, &r| m.min(r + 1.0));
        if !min_total.is_finite() {
            return Err(Error::GuardBreach { kind: GuardKind::NonFinite, time, value: min_total });
        }
        if min_total < VACUUM_FLOOR {
            return Err(Error::GuardBreach { kind: GuardKind::Vacuum, time, value: min_total });
        }
        let theta = cols.next().unwrap();
        let u: Vec<Vec<f64>> = (0..d).map(|_| cols.next().unwrap()).collect();
        let grad_u: Vec<Vec<Vec<f64>>> =
            (0..d).map(|_| (0..d).map(|_| cols.next().unwrap()).collect()).collect();
        let visc_u: Vec<Vec<f64>> = (0..d).map(|_| cols.next().unwrap()).collect();
        let grad_rho: Vec<Vec<f64>> = (0..d).map(|_| cols.next().unwrap()).collect();
        let grad_theta: Vec<Vec<f64>> = (0..d).map(|_| cols.next().unwrap()).collect();
        let lap_theta = cols.next().unwrap();

        let npts = rho.len();
        let mut div_u = vec![0.0; npts];
        for m in 0..d {
            for (dv, g) in div_u.iter_mut().zip(&grad_u[m][m]) {
                *dv += g;
            }
        }

        Ok(Self {
            d,
            rho,
            theta,
            u,
            grad_rho,
            grad_theta,
            grad_u,
            lap_theta,
            visc_u,
            div_u,
        })
    }

    fn len(&self) -> usize {
        self.rho.len()
    }

    /// Momentum nonlinearity (the F1 summands) at one sample point.
    fn f1_at(&self, laws: &Constitutive, i: usize, m: usize) -> f64 {
        let total = self.rho[i] + 1.0;
        let visc_coef = laws.mu(total) / total - laws.mu1();
        let mut acc = visc_coef * self.visc_u[m][i];
        acc += self.theta[i] / total * self.grad_rho[m][i];
        if !laws.mu_is_constant() {
            let mp = laws.mu_prime(total) / total;
            let mut stress_dot_gradrho = 0.0;
            for j in 0..self.d {
                stress_dot_gradrho +=
                    (self.grad_u[m][j][i] + self.grad_u[j][m][i]) * self.grad_rho[j][i];
            }
            acc += mp * stress_dot_gradrho;
        }
        acc -= (laws.pe_prime(total) - 1.0) * self.grad_rho[m][i];
        acc
    }

    /// Heat nonlinearity (the F2 summands) at one sample point.
    fn f2_at(&self, laws: &Constitutive, i: usize) -> f64 {
        let total = self.rho[i] + 1.0;
        let th = self.theta[i];
        let mut acc = (laws.kappa_fn(th) / total - laws.kappa0()) * self.lap_theta[i];
        let mut stress_contract = 0.0;
        for m in 0..self.d {
            for j in 0..self.d {
                stress_contract += (self.grad_u[m][j][i] + self.grad_u[j][m][i]) * self.grad_u[m][j][i];
            }
        }
        acc += laws.mu(total) / total * stress_contract;
        acc -= th * self.div_u[i];
        let mut gt2 = 0.0;
        for j in 0..self.d {
            gt2 += self.grad_theta[j][i] * self.grad_theta[j][i];
        }
        acc += laws.kappa_prime(th) / total * gt2;
        acc
    }

    fn convective_u_at(&self, i: usize, m: usize) -> f64 {
        (0..self.d).map(|j| self.u[j][i] * self.grad_u[m][j][i]).sum()
    }

    fn convective_theta_at(&self, i: usize) -> f64 {
        (0..self.d).map(|j| self.u[j][i] * self.grad_theta[j][i]).sum()
    }
}

fn lift_vector(pg: &PaddedGrid, grid: Grid, cols: Vec<Vec<f64>>) -> SpectralField {
    let d = cols.len();
    let mut out = SpectralField::zeros(grid, d);
    for (m, col) in cols.into_iter().enumerate() {
        let lifted = pg.lift(&col);
        out.comp_mut(m).copy_from_slice(lifted.comp(0));
    }
    out
}

/// The four-summand momentum nonlinearity of the reduced system.
pub fn eval_f1(state: &FlowState, laws: &Constitutive, pad: f64) -> Result<SpectralField> {
    let pg = PaddedGrid::full(state.grid(), pad)?;
    let ws = PhysWorkspace::build(state, pg, state.t)?;
    let npts = ws.len();
    let cols: Vec<Vec<f64>> = (0..ws.d)
        .map(|m| (0..npts).map(|i| ws.f1_at(laws, i, m)).collect())
        .collect();
    Ok(lift_vector(&pg, state.grid(), cols))
}

/// The four-summand heat nonlinearity of the reduced system.
pub fn eval_f2(state: &FlowState, laws: &Constitutive, pad: f64) -> Result<SpectralField> {
    let pg = PaddedGrid::full(state.grid(), pad)?;
    let ws = PhysWorkspace::build(state, pg, state.t)?;
    let npts = ws.len();
    let col: Vec<f64> = (0..npts).map(|i| ws.f2_at(laws, i)).collect();
    Ok(pg.lift(&col))
}

/// Constant-coefficient part of the split system: `d rho = -div u`,
/// `d u = mu(1)(Delta u + grad div u) - grad rho - grad theta`,
/// `d theta = kappa Delta theta`.
pub fn eval_linear_rhs(state: &FlowState, laws: &Constitutive) -> Result<StateDerivative> {
    state.validate()?;
    let mu1 = laws.mu1();
    let kappa = laws.kappa0();

    let mut drho = divergence(&state.u)?;
    drho.scale(-1.0);

    let mut du = laplacian(&state.u)?;
    du.axpy(1.0, &grad_div(&state.u)?);
    du.scale(mu1);
    du.axpy(-1.0, &gradient(&state.rho)?);
    du.axpy(-1.0, &gradient(&state.theta)?);

    let mut dtheta = laplacian(&state.theta)?;
    dtheta.scale(kappa);

    Ok(StateDerivative { rho: drho, u: du, theta: dtheta })
}

/// The three nonlinear remainders of the linear split, untruncated.
pub fn eval_g_terms(
    state: &FlowState,
    laws: &Constitutive,
    pad: f64,
) -> Result<(SpectralField, SpectralField, SpectralField)> {
    let pg = PaddedGrid::full(state.grid(), pad)?;
    g_terms_on(state, laws, pg)
}

fn g_terms_on(
    state: &FlowState,
    laws: &Constitutive,
    pg: PaddedGrid,
) -> Result<(SpectralField, SpectralField, SpectralField)> {
    let ws = PhysWorkspace::build(state, pg, state.t)?;
    let npts = ws.len();
    let d = ws.d;
    let grid = state.grid();

    // pooled so the lifter can amortize two sample sets per transform:
    // mass flux rho*u, then F1 - u.grad u, then F2 - u.grad theta
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(2 * d + 1);
    for m in 0..d {
        cols.push((0..npts).map(|i| ws.rho[i] * ws.u[m][i]).collect());
    }
    for m in 0..d {
        cols.push(
            (0..npts)
                .map(|i| ws.f1_at(laws, i, m) - ws.convective_u_at(i, m))
                .collect(),
        );
    }
    cols.push((0..npts).map(|i| ws.f2_at(laws, i) - ws.convective_theta_at(i)).collect());

    let mut lifted = pg.lift_batch(&cols).into_iter();
    let mut mass_flux = SpectralField::zeros(grid, d);
    for m in 0..d {
        mass_flux.comp_mut(m).copy_from_slice(lifted.next().unwrap().comp(0));
    }
    // G1 = -div(rho u), kept in divergence form for exact mean conservation
    let mut g1 = divergence(&mass_flux)?;
    g1.scale(-1.0);

    let mut g2 = SpectralField::zeros(grid, d);
    for m in 0..d {
        g2.comp_mut(m).copy_from_slice(lifted.next().unwrap().comp(0));
    }
    let g3 = lifted.next().unwrap();

    Ok((g1, g2, g3))
}

/// Untruncated right-hand side of the reduced system, assembled from the
/// F-form nonlinearities (used as the cross-check route for the G split).
pub fn eval_full_rhs(state: &FlowState, laws: &Constitutive, pad: f64) -> Result<StateDerivative> {
    let pg = PaddedGrid::full(state.grid(), pad)?;
    let ws = PhysWorkspace::build(state, pg, state.t)?;
    let npts = ws.len();
    let d = ws.d;
    let grid = state.grid();

    let mut deriv = eval_linear_rhs(state, laws)?;

    let mass_flux_cols: Vec<Vec<f64>> = (0..d)
        .map(|m| (0..npts).map(|i| ws.rho[i] * ws.u[m][i]).collect())
        .collect();
    let mass_flux = lift_vector(&pg, grid, mass_flux_cols);
    deriv.rho.axpy(-1.0, &divergence(&mass_flux)?);

    let f1_conv_cols: Vec<Vec<f64>> = (0..d)
        .map(|m| {
            (0..npts)
                .map(|i| ws.f1_at(laws, i, m) - ws.convective_u_at(i, m))
                .collect()
        })
        .collect();
    deriv.u.axpy(1.0, &lift_vector(&pg, grid, f1_conv_cols));

    let f2_conv_col: Vec<f64> = (0..npts)
        .map(|i| ws.f2_at(laws, i) - ws.convective_theta_at(i))
        .collect();
    deriv.theta.axpy(1.0, &pg.lift(&f2_conv_col));

    Ok(deriv)
}

/// Per-axis integer frequency bound implied by the cutoff `|k| <= 1/eps`.
pub fn band_limit(grid: Grid, eps: f64) -> usize {
    let by_eps = ((1.0 / eps) / grid.k_unit()).floor() as usize;
    by_eps.min(grid.points_per_dim() / 2 - 1)
}

/// Right-hand side of the sharply truncated approximate system: linear terms
/// act on the truncated fields as written; every nonlinear term is evaluated
/// on truncated fields and wrapped in an outer cutoff.
pub fn eval_truncated_rhs(
    state: &FlowState,
    eps: f64,
    laws: &Constitutive,
    pad: f64,
) -> Result<StateDerivative> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParam(format!("eps must be positive, got {eps}")));
    }
    let grid = state.grid();
    let st = state.truncated(eps)?;
    let pg = PaddedGrid::for_band(grid, band_limit(grid, eps), pad)?;

    let mut deriv = eval_linear_rhs(&st, laws)?;
    let (g1, g2, g3) = g_terms_on(&st, laws, pg)?;
    deriv.rho.axpy(1.0, &truncate(&g1, eps)?);
    deriv.u.axpy(1.0, &truncate(&g2, eps)?);
    deriv.theta.axpy(1.0, &truncate(&g3, eps)?);
    Ok(deriv)
}
