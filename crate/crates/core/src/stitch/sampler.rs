//! Two-step sampler: `A ~ Unif(0,1)`, then a uniform direction scaled onto
//! the boundary of the level-`A` ellipsoid.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{interpolate_xi, spectral_scale, CalibrationTable};
use crate::error::{invalid, Error, Result};
use crate::rng::{substream, unit_sphere};
use crate::special::chi2_quantile;

/// Draws per RNG stream when sampling.
const BLOCK: usize = 1024;

/// Which square root of `J(xi)^{-1}` maps the sphere onto the ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SquareRoot {
    /// `E diag(xi / sqrt(lambda)) E'`.
    #[default]
    Symmetric,
    /// `L^{-T}` with `J(xi) = L L'`.
    Cholesky,
}

/// One draw from the stitched mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub alpha: f64,
    pub working: Vec<f64>,
    pub natural: Vec<f64>,
}

/// Draws from the stitched mixture with their level labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSampleSet {
    pub names: Vec<String>,
    pub draws: Vec<Draw>,
    pub seed: u64,
}

impl WeightedSampleSet {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn natural(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.iter().map(|d| d.natural.as_slice())
    }

    pub fn working(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.iter().map(|d| d.working.as_slice())
    }

    /// Columns `alpha`, `w_<name>` per working coordinate, `<name>` per
    /// natural coordinate.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["alpha".to_string()];
        header.extend(self.names.iter().map(|n| format!("w_{n}")));
        header.extend(self.names.iter().cloned());
        out.write_record(&header)?;
        for d in &self.draws {
            let mut rec = vec![d.alpha.to_string()];
            rec.extend(d.working.iter().map(f64::to_string));
            rec.extend(d.natural.iter().map(f64::to_string));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, seed: u64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let cols = header.len();
        if cols < 3 || (cols - 1) % 2 != 0 || &header[0] != "alpha" {
            return Err(invalid(
                "sample CSV needs columns alpha, w_<name>..., <name>...",
            ));
        }
        let d = (cols - 1) / 2;
        let names: Vec<String> = header.iter().skip(1 + d).map(str::to_string).collect();
        for (j, n) in names.iter().enumerate() {
            if header[1 + j] != format!("w_{n}") {
                return Err(invalid(format!(
                    "sample CSV column {} should be w_{n}",
                    2 + j
                )));
            }
        }
        let mut draws = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(i as u64 + 2, |p| p.line());
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse {
                    line,
                    message: format!("row {}: {e}", i + 1),
                })?;
            if vals.len() != cols {
                return Err(Error::Parse {
                    line,
                    message: format!("row {}: expected {cols} fields", i + 1),
                });
            }
            draws.push(Draw {
                alpha: vals[0],
                working: vals[1..1 + d].to_vec(),
                natural: vals[1 + d..].to_vec(),
            });
        }
        Ok(Self { names, draws, seed })
    }
}

/// The stitched mixture `Q*` represented by a calibration table.
#[derive(Debug, Clone)]
pub struct StitchSampler {
    table: CalibrationTable,
    eigvecs: DMatrix<f64>,
    center: DVector<f64>,
    root: SquareRoot,
}

impl StitchSampler {
    pub fn new(table: CalibrationTable) -> Result<Self> {
        table.validate()?;
        Ok(Self {
            eigvecs: table.eigvec_matrix(),
            center: DVector::from_column_slice(&table.center),
            table,
            root: SquareRoot::Symmetric,
        })
    }

    pub fn with_root(mut self, root: SquareRoot) -> Self {
        self.root = root;
        self
    }

    pub fn table(&self) -> &CalibrationTable {
        &self.table
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn xi(&self, alpha: f64) -> Vec<f64> {
        interpolate_xi(&self.table, alpha)
    }

    /// `J(xi(alpha))` on the working scale.
    pub fn scaled_information(&self, alpha: f64) -> DMatrix<f64> {
        spectral_scale(&self.eigvecs, &self.table.eigvals, &self.xi(alpha))
            .expect("validated table")
            .0
    }

    fn root_matrix(&self, alpha: f64) -> DMatrix<f64> {
        let (j, s) = spectral_scale(&self.eigvecs, &self.table.eigvals, &self.xi(alpha))
            .expect("validated table");
        match self.root {
            SquareRoot::Symmetric => s,
            SquareRoot::Cholesky => {
                let l = j.cholesky().expect("J(xi) is positive definite").l();
                l.transpose()
                    .try_inverse()
                    .expect("triangular factor is invertible")
            }
        }
    }

    /// The point `psi_hat + sqrt(F_d^{-1}(1 - alpha)) S u`.
    pub fn boundary_point(&self, alpha: f64, u: &[f64]) -> Result<Draw> {
        let d = self.dim();
        if u.len() != d {
            return Err(invalid("direction has the wrong dimension"));
        }
        let radius = chi2_quantile(d, 1.0 - alpha)?.sqrt();
        let step = self.root_matrix(alpha) * DVector::from_column_slice(u) * radius;
        let psi = &self.center + step;
        let working: Vec<f64> = psi.iter().copied().collect();
        Ok(Draw {
            alpha,
            natural: self.table.scale.from_working(&working),
            working,
        })
    }

    /// A uniform point on the level-`alpha` boundary.
    pub fn draw_at<R: Rng + ?Sized>(&self, alpha: f64, rng: &mut R) -> Result<Draw> {
        let u = unit_sphere(self.dim(), rng);
        self.boundary_point(alpha, &u)
    }

    /// One draw from `Q*`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw> {
        // open interval: a level of exactly 0 would put the point at infinity
        let alpha = loop {
            let a: f64 = rng.random();
            if a > 0.0 {
                break a;
            }
        };
        self.draw_at(alpha, rng)
    }

    /// `n` draws; block `b` of 1024 draws uses stream `(seed, b)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<WeightedSampleSet> {
        let blocks = n.div_ceil(BLOCK);
        let parts: Vec<Result<Vec<Draw>>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = substream(seed, b as u64);
                let len = BLOCK.min(n - b * BLOCK);
                (0..len).map(|_| self.draw(&mut rng)).collect()
            })
            .collect();
        let mut draws = Vec::with_capacity(n);
        for p in parts {
            draws.extend(p?);
        }
        Ok(WeightedSampleSet {
            names: self.table.param_names.clone(),
            draws,
            seed,
        })
    }

    /// Relative deviation of the draw's quadratic form under `J(xi)` from
    /// the level's squared radius.
    pub fn boundary_residual(&self, draw: &Draw) -> f64 {
        let d = self.dim();
        let q = chi2_quantile(d, 1.0 - draw.alpha).expect("level in (0,1)");
        let diff = DVector::from_column_slice(&draw.working) - &self.center;
        let form = (diff.transpose() * self.scaled_information(draw.alpha) * &diff)[(0, 0)];
        ((form - q) / q.max(f64::MIN_POSITIVE)).abs()
    }
}

/// `E_{Q*} h` by conditioning on the level: average `h` over `k_per_alpha`
/// boundary draws at each grid level, then integrate over `(0, 1)` with the
/// trapezoid rule on the grid, holding the end values constant out to 0
/// and 1. Level `i` uses stream `(seed, i)`.
pub fn rao_blackwell_expectation<H>(
    sampler: &StitchSampler,
    h: H,
    k_per_alpha: usize,
    seed: u64,
) -> Result<f64>
where
    H: Fn(&[f64]) -> f64 + Sync,
{
    if k_per_alpha == 0 {
        return Err(invalid("need at least one draw per level"));
    }
    let grid = &sampler.table().alpha_grid;
    let means: Vec<Result<f64>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let mut rng = substream(seed, i as u64);
            let mut acc = 0.0;
            for _ in 0..k_per_alpha {
                let draw = sampler.draw_at(alpha, &mut rng)?;
                let v = h(&draw.natural);
                if !v.is_finite() {
                    return Err(invalid(format!("h is not finite at {:?}", draw.natural)));
                }
                acc += v;
            }
            Ok(acc / k_per_alpha as f64)
        })
        .collect();
    let means = means.into_iter().collect::<Result<Vec<f64>>>()?;
    let last = grid.len() - 1;
    let mut total = grid[0] * means[0] + (1.0 - grid[last]) * means[last];
    for i in 0..last {
        total += 0.5 * (grid[i + 1] - grid[i]) * (means[i] + means[i + 1]);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::WorkingScale;
    use crate::stitch::alpha_grid;

    pub(crate) fn gaussian_table(eigvals: Vec<f64>, eigvecs: Vec<Vec<f64>>) -> CalibrationTable {
        let d = eigvals.len();
        let grid = alpha_grid(100, 0.001, 0.999).unwrap();
        CalibrationTable {
            xi_rows: vec![vec![1.0; d]; grid.len()],
            alpha_grid: grid,
            center: vec![0.5; d],
            eigvecs,
            eigvals,
            diagnostics: Vec::new(),
            seed: 0,
            model: "gauss".into(),
            param_names: (0..d).map(|i| format!("t{i}")).collect(),
            scale: WorkingScale::identity(d),
        }
    }

    fn rotated() -> CalibrationTable {
        let (c, s) = (0.6, 0.8);
        gaussian_table(vec![2.0, 9.0], vec![vec![c, -s], vec![s, c]])
    }

    #[test]
    fn draws_lie_on_their_boundary() {
        let sampler = StitchSampler::new(rotated()).unwrap();
        let set = sampler.sample(3000, 1).unwrap();
        for d in &set.draws {
            assert!(sampler.boundary_residual(d) < 1e-8, "{d:?}");
        }
        let chol = sampler
            .clone()
            .with_root(SquareRoot::Cholesky)
            .sample(500, 1)
            .unwrap();
        for d in &chol.draws {
            assert!(sampler.boundary_residual(d) < 1e-8);
        }
    }

    #[test]
    fn one_dimensional_draws_are_symmetric() {
        let t = gaussian_table(vec![4.0], vec![vec![1.0]]);
        let sampler = StitchSampler::new(t).unwrap();
        let a = sampler.boundary_point(0.3, &[1.0]).unwrap();
        let b = sampler.boundary_point(0.3, &[-1.0]).unwrap();
        let r = chi2_quantile(1, 0.7).unwrap().sqrt() / 2.0;
        assert!((a.working[0] - 0.5 - r).abs() < 1e-12);
        assert!((b.working[0] - 0.5 + r).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_block_stable() {
        let sampler = StitchSampler::new(rotated()).unwrap();
        let a = sampler.sample(2500, 9).unwrap();
        let b = sampler.sample(2500, 9).unwrap();
        assert_eq!(a, b);
        let short = sampler.sample(1500, 9).unwrap();
        assert_eq!(short.draws[..], a.draws[..1500]);
    }

    #[test]
    fn csv_round_trip() {
        let sampler = StitchSampler::new(rotated()).unwrap();
        let set = sampler.sample(50, 2).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let back = WeightedSampleSet::read_csv(buf.as_slice(), 2).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn rao_blackwell_constant_and_indicator() {
        let sampler = StitchSampler::new(rotated()).unwrap();
        let c = rao_blackwell_expectation(&sampler, |_| 2.5, 5, 1).unwrap();
        assert!((c - 2.5).abs() < 1e-12);
        let j = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let info = &j * DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 9.0])) * j.transpose();
        for alpha0 in [0.1, 0.5, 0.9] {
            let q0 = chi2_quantile(2, 1.0 - alpha0).unwrap();
            let info = info.clone();
            let h = move |t: &[f64]| {
                let v = DVector::from_vec(vec![t[0] - 0.5, t[1] - 0.5]);
                ((v.transpose() * &info * &v)[(0, 0)] <= q0) as u8 as f64
            };
            let e = rao_blackwell_expectation(&sampler, h, 20, 3).unwrap();
            assert!((e - (1.0 - alpha0)).abs() < 0.02, "alpha0={alpha0} got {e}");
        }
    }
}
