//! Empirical constants for the dyadic-analysis toolbox: block gradient
//! ratios, product and composition laws, the transport commutator, and the
//! transport-divergence integral. Each inequality is measured as the maximal
//! observed LHS/RHS ratio over a seeded random ensemble — nothing here
//! asserts a particular constant, only finiteness and stability.

use crate::energy::l2_pairing;
use crate::error::{Error, Result};
use crate::lp::{dyadic_block, sobolev_norm, LPFrame};
use crate::random::{random_field, SpectrumShape};
use crate::snapshot::{write_snapshot, SnapshotMeta};
use crate::spectral::{
    divergence, gradient, laplacian, linf_oversampled, pointwise_product, Grid, SpectralField,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// How the measurement ensemble is drawn.
#[derive(Debug, Clone)]
pub struct RandomFieldEnsembleSpec {
    pub grid: Grid,
    pub size: usize,
    pub seed: u64,
    /// Sobolev index of the measured inequalities; must exceed d/2.
    pub sigma: f64,
    pub shape: SpectrumShape,
    pub pad: f64,
}

impl RandomFieldEnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::InvalidParam(format!(
                "ensemble size must be >= 2, got {}",
                self.size
            )));
        }
        if !(self.sigma > self.grid.dim() as f64 / 2.0) {
            return Err(Error::InvalidParam(format!(
                "sigma must exceed d/2, got {}",
                self.sigma
            )));
        }
        self.shape.validate(self.grid)?;
        if 2 * self.shape.k_band as i64 > self.grid.max_freq() {
            return Err(Error::InvalidParam(format!(
                "k_band {} too wide: quadratic products must fit the lattice",
                self.shape.k_band
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LemmaMeasurement {
    pub id: &'static str,
    pub max_ratio: f64,
    /// Ensemble index of the field realizing the maximum.
    pub witness_index: usize,
    pub witness_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct MeasuredConstantsReport {
    pub seed: u64,
    pub size: usize,
    pub measurements: Vec<LemmaMeasurement>,
    /// Per-block maxima of the weighted commutator ratio, index `j + 1`.
    pub commutator_ratio_by_j: Vec<f64>,
}

impl MeasuredConstantsReport {
    pub fn measurement(&self, id: &str) -> Option<&LemmaMeasurement> {
        self.measurements.iter().find(|m| m.id == id)
    }

    /// Maxima of the commutator ratio over low blocks (`j < split`) and high
    /// blocks (`j >= split`); stability means the high max does not outgrow
    /// the low max.
    pub fn commutator_j_split(&self, split: i32) -> (f64, f64) {
        let mut low = 0.0f64;
        let mut high = 0.0f64;
        for (idx, &r) in self.commutator_ratio_by_j.iter().enumerate() {
            let j = idx as i32 - 1;
            if j < split {
                low = low.max(r);
            } else {
                high = high.max(r);
            }
        }
        (low, high)
    }
}

/// Gradient of every component, flattened to `comps * d` components.
fn grad_tensor(f: &SpectralField) -> Result<SpectralField> {
    let grid = f.grid;
    let d = grid.dim();
    let mut out = SpectralField::zeros(grid, f.comps * d);
    for c in 0..f.comps {
        let mut scalar = SpectralField::zeros(grid, 1);
        scalar.comp_mut(0).copy_from_slice(f.comp(c));
        let g = gradient(&scalar)?;
        for m in 0..d {
            out.comp_mut(c * d + m).copy_from_slice(g.comp(m));
        }
    }
    Ok(out)
}

/// `u . grad f` for scalar `f`, dealiased.
fn advect(u: &SpectralField, f: &SpectralField, pad: f64) -> Result<SpectralField> {
    let g = gradient(f)?;
    let prod = pointwise_product(u, &g, pad)?;
    let mut out = SpectralField::zeros(f.grid, 1);
    let dst = out.comp_mut(0);
    for c in 0..prod.comps {
        for (acc, v) in dst.iter_mut().zip(prod.comp(c)) {
            *acc += v;
        }
    }
    Ok(out)
}

/// Transport commutator applied to a scalar: `u . grad (block f) - block (u . grad f)`.
pub fn commutator(
    u: &SpectralField,
    f: &SpectralField,
    j: i32,
    frame: &LPFrame,
    pad: f64,
) -> Result<SpectralField> {
    let adv_f = advect(u, f, pad)?;
    let f_j = dyadic_block(f, j, frame)?;
    let mut out = advect(u, &f_j, pad)?;
    out.axpy(-1.0, &dyadic_block(&adv_f, j, frame)?);
    Ok(out)
}

struct Tracker {
    id: &'static str,
    max_ratio: f64,
    witness_index: usize,
    witness: Option<SpectralField>,
    hits: usize,
}

impl Tracker {
    fn new(id: &'static str) -> Self {
        Self { id, max_ratio: 0.0, witness_index: 0, witness: None, hits: 0 }
    }

    fn offer(&mut self, ratio: f64, index: usize, field: &SpectralField) -> Result<()> {
        if !ratio.is_finite() {
            return Err(Error::NonFinite(self.id));
        }
        self.hits += 1;
        if ratio > self.max_ratio || self.witness.is_none() {
            self.max_ratio = self.max_ratio.max(ratio);
            self.witness_index = index;
            self.witness = Some(field.clone());
        }
        Ok(())
    }

    fn finish(
        self,
        sigma: f64,
        witness_dir: Option<&Path>,
        out: &mut Vec<LemmaMeasurement>,
    ) -> Result<()> {
        if self.hits == 0 {
            return Err(Error::InvalidParam(format!(
                "degenerate ensemble: no usable sample for '{}'",
                self.id
            )));
        }
        let witness_path = match (witness_dir, &self.witness) {
            (Some(dir), Some(field)) => {
                let path = dir.join(format!("{}.witness.fnss", self.id));
                let meta = SnapshotMeta { s: sigma, eps: 0.0, t: 0.0 };
                write_snapshot(field, &meta, &path)?;
                Some(path)
            }
            _ => None,
        };
        out.push(LemmaMeasurement {
            id: self.id,
            max_ratio: self.max_ratio,
            witness_index: self.witness_index,
            witness_path,
        });
        Ok(())
    }
}

const TINY: f64 = 1e-300;

/// Measure all the toolbox constants over one seeded ensemble. When
/// `witness_dir` is set, the field realizing each maximum is stored there.
pub fn lemma_suite(
    spec: &RandomFieldEnsembleSpec,
    frame: &LPFrame,
    witness_dir: Option<&Path>,
) -> Result<MeasuredConstantsReport> {
    spec.validate()?;
    let grid = spec.grid;
    let d = grid.dim();
    let sigma = spec.sigma;
    let pad = spec.pad;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut bernstein = Tracker::new("block-gradient-ratio");
    let mut product = Tracker::new("product-law");
    let mut compose = Tracker::new("composition-vanishing-at-zero");
    let mut compose_diff = Tracker::new("composition-difference");
    let mut commut = Tracker::new("transport-commutator");
    let mut transport = Tracker::new("transport-divergence-integral");
    let mut comm_by_j = vec![0.0f64; (frame.j_max() + 2) as usize];

    for i in 0..spec.size {
        let f = random_field(grid, 1, &spec.shape, &mut rng)?;
        let g = random_field(grid, 1, &spec.shape, &mut rng)?;
        let u = random_field(grid, d, &spec.shape, &mut rng)?;
        let rho = random_field(grid, 1, &spec.shape, &mut rng)?;

        // block gradient ratio: derivative strength vs the dyadic scale 2^j
        for j in 0..=frame.j_max() {
            let f_j = dyadic_block(&f, j, frame)?;
            let nf = f_j.l2_norm();
            if nf < TINY {
                continue;
            }
            let ng = gradient(&f_j)?.l2_norm();
            bernstein.offer(ng / (2f64.powi(j) * nf), i, &f)?;
        }

        // product law in H^sigma
        let fg = pointwise_product(&f, &g, pad)?;
        let denom = sobolev_norm(&f, sigma, frame) * linf_oversampled(&g, pad)?
            + sobolev_norm(&g, sigma, frame) * linf_oversampled(&f, pad)?;
        if denom > TINY {
            product.offer(sobolev_norm(&fg, sigma, frame) / denom, i, &f)?;
        }

        // composition with a law vanishing at zero
        let ef = crate::spectral::compose_pointwise(&f, |x| x.exp() - 1.0, pad)?;
        let nf = sobolev_norm(&f, sigma, frame);
        if nf > TINY {
            compose.offer(sobolev_norm(&ef, sigma, frame) / nf, i, &f)?;
        }

        // composition difference with a law whose derivative vanishes at zero
        let cf = crate::spectral::compose_pointwise(&f, |x| x.cos() - 1.0, pad)?;
        let cg = crate::spectral::compose_pointwise(&g, |x| x.cos() - 1.0, pad)?;
        let diff = f.sub(&g);
        let denom = sobolev_norm(&diff, sigma, frame)
            * (sobolev_norm(&f, sigma, frame) + sobolev_norm(&g, sigma, frame));
        if denom > TINY {
            compose_diff.offer(sobolev_norm(&cf.sub(&cg), sigma, frame) / denom, i, &f)?;
        }

        // transport commutator, weighted by 2^{j(sigma+1)}
        let grad_u = grad_tensor(&u)?;
        let comm_denom =
            sobolev_norm(&grad_u, sigma + 1.0, frame) * sobolev_norm(&f, sigma + 1.0, frame);
        if comm_denom > TINY {
            let adv_f = advect(&u, &f, pad)?;
            for j in -1..=frame.j_max() {
                let f_j = dyadic_block(&f, j, frame)?;
                let mut comm = advect(&u, &f_j, pad)?;
                comm.axpy(-1.0, &dyadic_block(&adv_f, j, frame)?);
                let ratio = 2f64.powf(j as f64 * (sigma + 1.0)) * comm.l2_norm() / comm_denom;
                commut.offer(ratio, i, &f)?;
                let slot = (j + 1) as usize;
                comm_by_j[slot] = comm_by_j[slot].max(ratio);
            }
        }

        // transport-divergence integral against the block Laplacian
        let grad_rho = gradient(&rho)?;
        let div_rhou = divergence(&pointwise_product(&rho, &u, pad)?)?;
        let tr_denom = sobolev_norm(&rho, sigma + 1.0, frame)
            * (sobolev_norm(&grad_rho, sigma, frame).powi(2)
                + sobolev_norm(&grad_u, sigma + 1.0, frame).powi(2));
        if tr_denom > TINY {
            for j in 0..=frame.j_max() {
                let a = dyadic_block(&div_rhou, j, frame)?;
                let b = laplacian(&dyadic_block(&rho, j, frame)?)?;
                let val = l2_pairing(&a, &b).abs();
                transport.offer(2f64.powf(2.0 * j as f64 * sigma) * val / tr_denom, i, &rho)?;
            }
        }
    }

    let mut measurements = Vec::with_capacity(6);
    bernstein.finish(sigma, witness_dir, &mut measurements)?;
    product.finish(sigma, witness_dir, &mut measurements)?;
    compose.finish(sigma, witness_dir, &mut measurements)?;
    compose_diff.finish(sigma, witness_dir, &mut measurements)?;
    commut.finish(sigma, witness_dir, &mut measurements)?;
    transport.finish(sigma, witness_dir, &mut measurements)?;

    Ok(MeasuredConstantsReport {
        seed: spec.seed,
        size: spec.size,
        measurements,
        commutator_ratio_by_j: comm_by_j,
    })
}

/// CSV: one row per measured constant.
pub fn write_constants_csv(report: &MeasuredConstantsReport, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "lemma_id,seed,size,max_ratio,witness")?;
    for m in &report.measurements {
        writeln!(
            f,
            "{},{},{},{:.12e},{}",
            m.id,
            report.seed,
            report.size,
            m.max_ratio,
            m.witness_path.as_ref().map_or("NA".into(), |p| p.display().to_string()),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::build_frame;
    use num_complex::Complex64;

    fn small_spec(grid: Grid) -> RandomFieldEnsembleSpec {
        RandomFieldEnsembleSpec {
            grid,
            size: 6,
            seed: 2024,
            sigma: 2.0,
            shape: SpectrumShape { k_band: 7, decay: 3.0 },
            pad: 2.0,
        }
    }

    #[test]
    fn suite_produces_finite_ratios() {
        let grid = Grid::standard(2, 32).unwrap();
        let frame = build_frame(grid);
        let rep = lemma_suite(&small_spec(grid), &frame, None).unwrap();
        assert_eq!(rep.measurements.len(), 6);
        for m in &rep.measurements {
            assert!(m.max_ratio.is_finite() && m.max_ratio > 0.0, "{}: {}", m.id, m.max_ratio);
        }
    }

    #[test]
    fn suite_deterministic() {
        let grid = Grid::standard(2, 32).unwrap();
        let frame = build_frame(grid);
        let a = lemma_suite(&small_spec(grid), &frame, None).unwrap();
        let b = lemma_suite(&small_spec(grid), &frame, None).unwrap();
        for (x, y) in a.measurements.iter().zip(&b.measurements) {
            assert_eq!(x.max_ratio.to_bits(), y.max_ratio.to_bits());
        }
    }

    #[test]
    fn commutator_vanishes_for_constant_transport() {
        let grid = Grid::standard(2, 32).unwrap();
        let frame = build_frame(grid);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(grid, 1, &SpectrumShape { k_band: 6, decay: 2.0 }, &mut rng).unwrap();
        let mut u = SpectralField::zeros(grid, 2);
        u.comp_mut(0)[0] = Complex64::new(0.7 * grid.volume(), 0.0);
        u.comp_mut(1)[0] = Complex64::new(-0.2 * grid.volume(), 0.0);
        for j in -1..=frame.j_max() {
            let c = commutator(&u, &f, j, &frame, 2.0).unwrap();
            assert!(c.l2_norm() <= 1e-12, "block {j}: {}", c.l2_norm());
        }
    }

    #[test]
    fn transport_integral_vanishes_without_velocity() {
        let grid = Grid::standard(2, 32).unwrap();
        let frame = build_frame(grid);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho =
            random_field(grid, 1, &SpectrumShape { k_band: 6, decay: 2.0 }, &mut rng).unwrap();
        let u = SpectralField::zeros(grid, 2);
        let div_rhou = divergence(&pointwise_product(&rho, &u, 2.0).unwrap()).unwrap();
        for j in 0..=frame.j_max() {
            let a = dyadic_block(&div_rhou, j, &frame).unwrap();
            let b = laplacian(&dyadic_block(&rho, j, &frame).unwrap()).unwrap();
            assert!(l2_pairing(&a, &b).abs() <= 1e-14);
        }
    }

    #[test]
    fn witness_snapshots_written() {
        let grid = Grid::standard(2, 32).unwrap();
        let frame = build_frame(grid);
        let dir = tempfile::tempdir().unwrap();
        let rep = lemma_suite(&small_spec(grid), &frame, Some(dir.path())).unwrap();
        for m in &rep.measurements {
            let p = m.witness_path.as_ref().unwrap();
            assert!(p.exists(), "{}", p.display());
        }
        let csv = dir.path().join("constants.csv");
        write_constants_csv(&rep, &csv).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn rejects_overwide_band() {
        let grid = Grid::standard(2, 16).unwrap();
        let frame = build_frame(grid);
        let mut spec = small_spec(grid);
        spec.shape.k_band = 5; // products reach 10 > max_freq 7
        assert!(lemma_suite(&spec, &frame, None).is_err());
    }
}
