//! Explicit RK4 time stepping of the truncated system, with guard-event
//! detection and per-save diagnostic rows. One run is one logical writer
//! advancing the state; monitors receive read-only snapshots.

use crate::error::{Error, GuardKind, Result};
use crate::lp::{sobolev_norm, LPFrame};
use crate::physics::{band_limit, eval_truncated_rhs, Constitutive, FlowState, StateDerivative};
use crate::spectral::{gradient, truncation_residual, Grid, PaddedGrid};

pub const C_STAB: f64 = 2.5;

/// Admissibility thresholds of the a priori estimate.
#[derive(Debug, Clone, Copy)]
pub struct Guards {
    pub rho_linf: f64,
    pub theta_linf: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Self { rho_linf: 0.5, theta_linf: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub grid: Grid,
    /// Sobolev index of the monitored norms, must exceed d/2.
    pub s: f64,
    pub eps: f64,
    /// Fixed step; `None` picks the stability estimate.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub pad: f64,
    pub laws: Constitutive,
    pub guards: Guards,
    pub save_every: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.grid.dim() as f64;
        if !(self.s > d / 2.0) {
            return Err(Error::InvalidParam(format!(
                "s must exceed d/2 = {}, got {}",
                d / 2.0,
                self.s
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParam(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidParam(format!("t_end must be positive, got {}", self.t_end)));
        }
        let stable = stable_dt_estimate(self);
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidParam(format!("dt must be positive, got {dt}")));
            }
            if dt > stable * (1.0 + 1e-12) {
                return Err(Error::InvalidParam(format!(
                    "dt = {dt} exceeds the stability estimate {stable}"
                )));
            }
        }
        if self.save_every == 0 {
            return Err(Error::InvalidParam("save_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn effective_dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| stable_dt_estimate(self))
    }
}

/// Explicit-scheme step bound for the stiffest retained multiplier:
/// `C_stab / (max(2 mu(1), kappa) k_max^2)` with the cutoff-capped `k_max`.
pub fn stable_dt_estimate(config: &SolverConfig) -> f64 {
    let grid = config.grid;
    let k_lattice = (grid.points_per_dim() as f64 / 2.0 - 1.0) * grid.k_unit();
    let k_max = k_lattice.min(1.0 / config.eps).max(grid.k_unit());
    let stiff = (2.0 * config.laws.mu1()).max(config.laws.kappa0());
    C_STAB / (stiff * k_max * k_max)
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    GuardBreach(GuardEvent),
    NonFinite { time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardEvent {
    pub kind: GuardKind,
    pub time: f64,
    pub value: f64,
}

/// Norms sampled at one saved time.
#[derive(Debug, Clone)]
pub struct DiagRow {
    pub t: f64,
    /// Squared H^s norms of rho, u, theta.
    pub hs_rho_sq: f64,
    pub hs_u_sq: f64,
    pub hs_theta_sq: f64,
    /// Squared dissipation integrands: grad rho in H^{s-1}, grad u and
    /// grad theta in H^s.
    pub grad_rho_hsm1_sq: f64,
    pub grad_u_hs_sq: f64,
    pub grad_theta_hs_sq: f64,
    pub l2_state: f64,
    pub rho_mean: f64,
    pub hermitian_residual: f64,
    pub truncation_residual: f64,
}

impl DiagRow {
    pub fn instantaneous_energy(&self) -> f64 {
        self.hs_rho_sq + self.hs_u_sq + self.hs_theta_sq
    }

    pub fn compute(state: &FlowState, s: f64, frame: &LPFrame, eps: f64) -> Result<Self> {
        let hs_rho = sobolev_norm(&state.rho, s, frame);
        let hs_u = sobolev_norm(&state.u, s, frame);
        let hs_theta = sobolev_norm(&state.theta, s, frame);
        let grad_rho = gradient(&state.rho)?;
        let grad_theta = gradient(&state.theta)?;
        let gr = sobolev_norm(&grad_rho, s - 1.0, frame);
        let gt = sobolev_norm(&grad_theta, s, frame);
        let mut gu_sq = 0.0;
        for m in 0..state.grid().dim() {
            let mut comp = crate::spectral::SpectralField::zeros(state.grid(), 1);
            comp.comp_mut(0).copy_from_slice(state.u.comp(m));
            let g = gradient(&comp)?;
            let val = sobolev_norm(&g, s, frame);
            gu_sq += val * val;
        }
        let trunc = truncation_residual(&state.rho, eps)
            .max(truncation_residual(&state.u, eps))
            .max(truncation_residual(&state.theta, eps));
        Ok(Self {
            t: state.t,
            hs_rho_sq: hs_rho * hs_rho,
            hs_u_sq: hs_u * hs_u,
            hs_theta_sq: hs_theta * hs_theta,
            grad_rho_hsm1_sq: gr * gr,
            grad_u_hs_sq: gu_sq,
            grad_theta_hs_sq: gt * gt,
            l2_state: state.l2_norm(),
            rho_mean: state.rho.comp(0)[0].re / state.grid().volume(),
            hermitian_residual: state.hermitian_residual(),
            truncation_residual: trunc,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub rows: Vec<DiagRow>,
    pub termination: Termination,
    pub final_state: FlowState,
}

impl RunRecord {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }
}

pub type RhsFn<'a> = dyn Fn(&FlowState) -> Result<StateDerivative> + 'a;

/// Classical 4-stage explicit step. The output is re-truncated (a no-op up
/// to rounding when the evaluator preserves the cutoff) and re-symmetrized.
pub fn step_rk4(state: &FlowState, dt: f64, rhs: &RhsFn, eps: Option<f64>) -> Result<FlowState> {
    let t0 = state.t;

    let k1 = rhs(state)?;

    let mut stage = state.clone();
    stage.axpy(dt / 2.0, &k1);
    stage.t = t0 + dt / 2.0;
    let k2 = rhs(&stage)?;

    let mut stage = state.clone();
    stage.axpy(dt / 2.0, &k2);
    stage.t = t0 + dt / 2.0;
    let k3 = rhs(&stage)?;

    let mut stage = state.clone();
    stage.axpy(dt, &k3);
    stage.t = t0 + dt;
    let k4 = rhs(&stage)?;

    let mut next = state.clone();
    next.axpy(dt / 6.0, &k1);
    next.axpy(dt / 3.0, &k2);
    next.axpy(dt / 3.0, &k3);
    next.axpy(dt / 6.0, &k4);
    next.t = t0 + dt;
    if !next.is_finite() {
        return Err(Error::NonFinite("rk4 step"));
    }
    if let Some(eps) = eps {
        next = next.truncated(eps)?;
    }
    next.symmetrize();
    Ok(next)
}

fn check_guards(
    state: &FlowState,
    guards: &Guards,
    eps: f64,
    pad: f64,
) -> Result<Option<GuardEvent>> {
    if !state.is_finite() {
        return Ok(Some(GuardEvent {
            kind: GuardKind::NonFinite,
            time: state.t,
            value: f64::NAN,
        }));
    }
    // the state is kept inside the cutoff band, so the band-sized padded
    // grid is already the oversampled grid for its content
    let pg = PaddedGrid::for_band(state.grid(), band_limit(state.grid(), eps), pad)?;
    let (rho_s, theta_s) = pg.sample_pair(&state.rho, 0, &state.theta, 0);
    let rho_max = rho_s.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if rho_max > guards.rho_linf {
        return Ok(Some(GuardEvent { kind: GuardKind::RhoLinf, time: state.t, value: rho_max }));
    }
    let theta_max = theta_s.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if theta_max > guards.theta_linf {
        return Ok(Some(GuardEvent {
            kind: GuardKind::ThetaLinf,
            time: state.t,
            value: theta_max,
        }));
    }
    Ok(None)
}

/// Step the truncated system until the horizon or a guard event. The initial
/// state is projected onto the cutoff first. Deterministic for a given
/// config and initial state.
pub fn integrate<M>(
    config: &SolverConfig,
    initial: &FlowState,
    frame: &LPFrame,
    mut monitor: M,
) -> Result<RunRecord>
where
    M: FnMut(&FlowState, &DiagRow),
{
    config.validate()?;
    let eps = config.eps;
    let dt = config.effective_dt();
    let laws = config.laws.clone();
    let pad = config.pad;

    let mut state = initial.truncated(eps)?;
    state.t = 0.0;

    let mut rows = Vec::new();
    if let Some(event) = check_guards(&state, &config.guards, eps, pad)? {
        let row = DiagRow::compute(&state, config.s, frame, eps)?;
        monitor(&state, &row);
        rows.push(row);
        return Ok(RunRecord {
            rows,
            termination: Termination::GuardBreach(event),
            final_state: state,
        });
    }

    let rhs = |st: &FlowState| eval_truncated_rhs(st, eps, &laws, pad);

    let steps = (config.t_end / dt).ceil() as usize;
    let row = DiagRow::compute(&state, config.s, frame, eps)?;
    monitor(&state, &row);
    rows.push(row);

    for step in 1..=steps {
        let next = match step_rk4(&state, dt, &rhs, Some(eps)) {
            Ok(next) => next,
            Err(Error::GuardBreach { kind, value, .. }) => {
                // a stage dove below the vacuum floor: discard the step
                return Ok(RunRecord {
                    rows,
                    termination: Termination::GuardBreach(GuardEvent {
                        kind,
                        time: state.t,
                        value,
                    }),
                    final_state: state,
                });
            }
            Err(Error::NonFinite(_)) => {
                return Ok(RunRecord {
                    rows,
                    termination: Termination::NonFinite { time: state.t },
                    final_state: state,
                });
            }
            Err(e) => return Err(e),
        };
        if let Some(event) = check_guards(&next, &config.guards, eps, pad)? {
            // the breaching step is discarded; the event carries the pre-step time
            let event = GuardEvent { time: state.t, ..event };
            let termination = if event.kind == GuardKind::NonFinite {
                Termination::NonFinite { time: state.t }
            } else {
                Termination::GuardBreach(event)
            };
            return Ok(RunRecord { rows, termination, final_state: state });
        }
        state = next;
        if step % config.save_every == 0 || step == steps {
            let row = DiagRow::compute(&state, config.s, frame, eps)?;
            monitor(&state, &row);
            rows.push(row);
        }
    }

    Ok(RunRecord { rows, termination: Termination::Completed, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::build_frame;
    use num_complex::Complex64;

    fn config(grid: Grid, eps: f64, t_end: f64) -> SolverConfig {
        SolverConfig {
            grid,
            s: 3.0,
            eps,
            dt: None,
            t_end,
            pad: 2.0,
            laws: Constitutive::preset("const-mu").unwrap(),
            guards: Guards::default(),
            save_every: 10,
            seed: 0,
        }
    }

    #[test]
    fn stability_estimate_formula() {
        let grid = Grid::standard(2, 64).unwrap();
        let cfg = config(grid, 1.0 / 16.0, 1.0);
        let dt = stable_dt_estimate(&cfg);
        assert!((dt - 2.5 / 512.0).abs() < 1e-15);
        // doubling k_max quarters dt (on a lattice wide enough to hold it)
        let wide = Grid::standard(2, 128).unwrap();
        let cfg2 = config(wide, 1.0 / 32.0, 1.0);
        let dt2 = stable_dt_estimate(&cfg2);
        assert!((dt / dt2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let grid = Grid::standard(2, 16).unwrap();
        let cfg = config(grid, 1.0 / 4.0, 0.5);
        let frame = build_frame(grid);
        let rec = integrate(&cfg, &FlowState::zeros(grid), &frame, |_, _| {}).unwrap();
        assert!(rec.completed());
        assert_eq!(rec.final_state.l2_norm(), 0.0);
    }

    #[test]
    fn oversized_initial_rho_breaches_at_t0() {
        let grid = Grid::standard(2, 16).unwrap();
        let cfg = config(grid, 1.0 / 4.0, 0.5);
        let frame = build_frame(grid);
        let mut st = FlowState::zeros(grid);
        let vol = grid.volume();
        let k = grid.encode(&[1, 0, 0, 0]);
        st.rho.comp_mut(0)[k] = Complex64::new(0.3 * vol, 0.0);
        st.rho.comp_mut(0)[grid.conj_index(k)] = Complex64::new(0.3 * vol, 0.0);
        let rec = integrate(&cfg, &st, &frame, |_, _| {}).unwrap();
        match rec.termination {
            Termination::GuardBreach(e) => {
                assert_eq!(e.kind, GuardKind::RhoLinf);
                assert_eq!(e.time, 0.0);
                assert!(e.value > 0.5);
            }
            other => panic!("expected breach, got {other:?}"),
        }
    }

    #[test]
    fn heat_mode_single_step_accuracy() {
        // pure heat mode: one RK4 step vs exp(-kappa |k|^2 dt), local error O(dt^5)
        let grid = Grid::standard(2, 16).unwrap();
        let laws = Constitutive::preset("const-mu").unwrap();
        let mut st = FlowState::zeros(grid);
        let vol = grid.volume();
        let k = grid.encode(&[1, 0, 0, 0]);
        st.theta.comp_mut(0)[k] = Complex64::new(0.1 * vol / 2.0, 0.0);
        st.theta.comp_mut(0)[grid.conj_index(k)] = Complex64::new(0.1 * vol / 2.0, 0.0);
        let rhs = |s: &FlowState| crate::physics::eval_linear_rhs(s, &laws);
        let err_at = |dt: f64| {
            let next = step_rk4(&st, dt, &rhs, None).unwrap();
            let lambda = -laws.kappa0();
            let exact = (lambda * dt).exp();
            let got = next.theta.comp(0)[k] / st.theta.comp(0)[k];
            (got - Complex64::new(exact, 0.0)).norm()
        };
        let e1 = err_at(0.1);
        let e2 = err_at(0.05);
        let ratio = e1 / e2;
        assert!((ratio - 32.0).abs() < 4.0, "dt-halving ratio {ratio}");
    }

    #[test]
    fn saved_states_remain_truncated_and_mean_free() {
        let grid = Grid::standard(2, 32).unwrap();
        let mut cfg = config(grid, 1.0 / 8.0, 0.5);
        cfg.save_every = 5;
        let frame = build_frame(grid);
        let mut st = FlowState::zeros(grid);
        let vol = grid.volume();
        for (f, a) in [(1i64, 0.01), (2, 0.005)] {
            let k = grid.encode(&[f, 1, 0, 0]);
            st.rho.comp_mut(0)[k] = Complex64::new(a * vol / 2.0, 0.0);
            st.rho.comp_mut(0)[grid.conj_index(k)] = Complex64::new(a * vol / 2.0, 0.0);
            st.u.comp_mut(0)[k] = Complex64::new(a * vol / 2.0, 0.0);
            st.u.comp_mut(0)[grid.conj_index(k)] = Complex64::new(a * vol / 2.0, 0.0);
        }
        let rec = integrate(&cfg, &st, &frame, |_, _| {}).unwrap();
        assert!(rec.completed());
        for row in &rec.rows {
            assert!(row.truncation_residual <= 1e-12);
            assert!(row.hermitian_residual <= 1e-12 * vol);
            assert!(row.rho_mean.abs() <= 1e-14);
        }
    }

    #[test]
    fn determinism_bitwise() {
        let grid = Grid::standard(2, 16).unwrap();
        let cfg = config(grid, 1.0 / 4.0, 0.2);
        let frame = build_frame(grid);
        let mut st = FlowState::zeros(grid);
        let vol = grid.volume();
        let k = grid.encode(&[1, 1, 0, 0]);
        st.theta.comp_mut(0)[k] = Complex64::new(0.01 * vol / 2.0, 0.0);
        st.theta.comp_mut(0)[grid.conj_index(k)] = Complex64::new(0.01 * vol / 2.0, 0.0);
        let a = integrate(&cfg, &st, &frame, |_, _| {}).unwrap();
        let b = integrate(&cfg, &st, &frame, |_, _| {}).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.hs_theta_sq.to_bits(), rb.hs_theta_sq.to_bits());
            assert_eq!(ra.l2_state.to_bits(), rb.l2_state.to_bits());
        }
    }
}
