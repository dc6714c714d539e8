//! Possibility-measure primitives.
//!
//! A contour is held either functionally ([`PossibilityContour`]) or as a
//! gridded [`ContourTable`]; tables are the exchange format between the
//! oracle, the stitched approximation and the CLI.

mod gaussian;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use gaussian::{gaussian_contour, Ellipsoid, GaussianPossibility, BOUNDARY_RTOL};

use crate::error::{invalid, Error, Result};

/// Pointwise plausibility function on a `d`-dimensional parameter space.
pub trait PossibilityContour {
    fn dim(&self) -> usize;
    fn eval(&self, theta: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> PossibilityContour for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, theta: &[f64]) -> f64 {
        (self.1)(theta)
    }
}

/// Provenance of a contour table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub model: String,
    pub data: String,
    pub replicates: usize,
    pub seed: u64,
    /// `(point index, message)` for points whose evaluation failed.
    pub failures: Vec<(usize, String)>,
}

/// A contour evaluated on a finite set of parameter points.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourTable {
    pub names: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub meta: TableMeta,
}

impl ContourTable {
    pub fn new(names: Vec<String>, points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(invalid("points and values differ in length"));
        }
        if let Some(p) = points.iter().find(|p| p.len() != names.len()) {
            return Err(invalid(format!(
                "point of dimension {} in a table with {} coordinates",
                p.len(),
                names.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("plausibility {v} outside [0, 1]")));
        }
        Ok(Self {
            names,
            points,
            values,
            meta: TableMeta::default(),
        })
    }

    /// Tabulate a functional contour on `points`.
    pub fn from_contour<C: PossibilityContour + ?Sized>(
        contour: &C,
        names: Vec<String>,
        points: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let values = points
            .iter()
            .map(|p| contour.eval(p).clamp(0.0, 1.0))
            .collect();
        Self::new(names, points, values)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Write as CSV: coordinate columns then `plaus`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push("plaus");
        wr.write_record(&header)?;
        for (p, v) in self.points.iter().zip(&self.values) {
            let mut row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            row.push(v.to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        if header.is_empty() || &header[header.len() - 1] != "plaus" {
            return Err(Error::Parse {
                line: 1,
                message: "last column must be `plaus`".into(),
            });
        }
        let names: Vec<String> = header
            .iter()
            .take(header.len() - 1)
            .map(String::from)
            .collect();
        let mut points = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let nums = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?;
            let (v, p) = nums.split_last().ok_or_else(|| Error::Parse {
                line,
                message: "empty row".into(),
            })?;
            points.push(p.to_vec());
            values.push(*v);
        }
        Self::new(names, points, values)
    }
}

/// Sup of the contour over a hypothesis, plus whether the hypothesis missed
/// every grid point (in which case `value` is the empty-sup convention 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisPossibility {
    pub value: f64,
    pub missed_grid: bool,
}

pub fn hypothesis_possibility<P>(table: &ContourTable, member: P) -> Result<HypothesisPossibility>
where
    P: Fn(&[f64]) -> bool,
{
    if table.is_empty() {
        return Err(invalid("empty contour table"));
    }
    let mut best: Option<f64> = None;
    for (p, &v) in table.points.iter().zip(&table.values) {
        if member(p) {
            best = Some(best.map_or(v, |b| b.max(v)));
        }
    }
    Ok(HypothesisPossibility {
        value: best.unwrap_or(0.0),
        missed_grid: best.is_none(),
    })
}

/// Conjugate lower probability `1 - Pi(H^c)`.
pub fn necessity<P>(table: &ContourTable, member: P) -> Result<f64>
where
    P: Fn(&[f64]) -> bool,
{
    Ok(1.0 - hypothesis_possibility(table, |p| !member(p))?.value)
}

/// Grid points with plausibility at least `alpha`.
pub fn alpha_cut(table: &ContourTable, alpha: f64) -> Result<Vec<Vec<f64>>> {
    if table.is_empty() {
        return Err(invalid("empty contour table"));
    }
    Ok(table
        .points
        .iter()
        .zip(&table.values)
        .filter(|(_, &v)| v >= alpha)
        .map(|(p, _)| p.clone())
        .collect())
}

/// Choquet upper expectation of a nonnegative `h` over `domain`.
///
/// On a finite domain `s -> sup{pi : h > s}` is a step function that
/// changes only at the distinct values of `h`, so the integral is summed
/// exactly over those steps. The part below `inf h` contributes
/// `inf h * max pi`.
pub fn choquet_upper_expectation<C, H>(contour: &C, h: H, domain: &[Vec<f64>]) -> Result<f64>
where
    C: PossibilityContour + ?Sized,
    H: Fn(&[f64]) -> f64,
{
    if domain.is_empty() {
        return Err(invalid("empty integration domain"));
    }
    let mut pairs = Vec::with_capacity(domain.len());
    for p in domain {
        let hv = h(p);
        if !(hv >= 0.0) || !hv.is_finite() {
            return Err(invalid(format!(
                "h must be finite and nonnegative, got {hv}"
            )));
        }
        pairs.push((hv, contour.eval(p)));
    }
    // descending in h; running max of pi gives sup over {h >= level}
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut total = 0.0;
    let mut running = 0.0f64;
    let mut i = 0;
    while i < pairs.len() {
        let level = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == level {
            running = running.max(pairs[i].1);
            i += 1;
        }
        let next = if i < pairs.len() { pairs[i].0 } else { 0.0 };
        total += (level - next) * running;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gauss_table(step: f64) -> ContourTable {
        let g = GaussianPossibility::standard(1);
        let n = (8.0 / step).round() as usize;
        let pts: Vec<Vec<f64>> = (0..=n).map(|i| vec![-4.0 + i as f64 * step]).collect();
        ContourTable::from_contour(&g, vec!["theta".into()], pts).unwrap()
    }

    #[test]
    fn hypothesis_sup_over_whole_grid_is_max() {
        let t = gauss_table(0.01);
        let h = hypothesis_possibility(&t, |_| true).unwrap();
        assert_eq!(h.value, t.max_value());
        assert!(!h.missed_grid);
        let (imax, _) = t
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let at = t.points[imax][0];
        let h = hypothesis_possibility(&t, |p| p[0] == at).unwrap();
        assert_eq!(h.value, t.max_value());
    }

    #[test]
    fn hypothesis_upper_tail_gaussian() {
        let t = gauss_table(0.001);
        let h = hypothesis_possibility(&t, |p| p[0] >= 1.959_964).unwrap();
        assert!((h.value - 0.05).abs() < 1e-3);
    }

    #[test]
    fn empty_hypothesis_flags_miss() {
        let t = gauss_table(0.1);
        let h = hypothesis_possibility(&t, |p| p[0] > 100.0).unwrap();
        assert_eq!(h.value, 0.0);
        assert!(h.missed_grid);
        let empty = ContourTable::new(vec!["a".into()], vec![], vec![]).unwrap();
        assert!(hypothesis_possibility(&empty, |_| true).is_err());
    }

    #[test]
    fn necessity_edges() {
        let t = gauss_table(0.1);
        assert_eq!(necessity(&t, |_| true).unwrap(), 1.0);
        assert_eq!(necessity(&t, |_| false).unwrap(), 0.0);
        let nec = necessity(&t, |p| p[0] > 0.5).unwrap();
        let pos = hypothesis_possibility(&t, |p| p[0] > 0.5).unwrap().value;
        assert!(nec <= pos);
    }

    #[test]
    fn alpha_cut_edges_and_gaussian_interval() {
        let t = gauss_table(0.001);
        assert_eq!(alpha_cut(&t, 0.0).unwrap().len(), t.len());
        assert!(alpha_cut(&t, t.max_value() + 1e-9).unwrap().is_empty());
        let cut = alpha_cut(&t, 0.05).unwrap();
        let lo = cut.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = cut.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (lo + 1.96).abs() < 2e-3 && (hi - 1.96).abs() < 2e-3,
            "{lo} {hi}"
        );
    }

    #[test]
    fn choquet_constant_and_indicator() {
        let t = gauss_table(0.01);
        let g = GaussianPossibility::standard(1);
        let v = choquet_upper_expectation(&g, |_| 2.5, &t.points).unwrap();
        assert_relative_eq!(v, 2.5 * t.max_value(), epsilon = 1e-12);
        let ind = |p: &[f64]| if p[0] > 1.0 { 1.0 } else { 0.0 };
        let v = choquet_upper_expectation(&g, ind, &t.points).unwrap();
        let h = hypothesis_possibility(&t, |p| p[0] > 1.0).unwrap().value;
        assert_eq!(v, h);
        assert!(choquet_upper_expectation(&g, |_| -1.0, &t.points).is_err());
    }

    #[test]
    fn choquet_square_matches_riemann_oracle() {
        // Independent route: for h = theta², sup{pi : h > s} = 1 - F_1(s) in
        // closed form; integrate it with a fine midpoint rule.
        let g = GaussianPossibility::standard(1);
        let pts: Vec<Vec<f64>> = (0..=120_000)
            .map(|i| vec![-6.0 + i as f64 * 1e-4])
            .collect();
        let v = choquet_upper_expectation(&g, |p| p[0] * p[0], &pts).unwrap();
        let n = 200_000;
        let ds = 36.0 / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) * ds;
                crate::special::chi2_sf(1, s) * ds
            })
            .sum();
        assert!((v - oracle).abs() < 1e-3, "{v} vs {oracle}");
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let t = gauss_table(0.5);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta,plaus\n"));
        let back = ContourTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back.points, t.points);
        assert_eq!(back.values, t.values);
        assert!(ContourTable::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(ContourTable::new(vec!["a".into()], vec![vec![0.0]], vec![1.5]).is_err());
    }

    proptest! {
        #[test]
        fn alpha_cuts_nest(values in prop::collection::vec(0.0f64..=1.0, 1..60), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let pts: Vec<Vec<f64>> = (0..values.len()).map(|i| vec![i as f64]).collect();
            let t = ContourTable::new(vec!["x".into()], pts, values).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let big = alpha_cut(&t, lo).unwrap();
            let small = alpha_cut(&t, hi).unwrap();
            prop_assert!(small.iter().all(|p| big.contains(p)));
        }

        #[test]
        fn possibility_plus_necessity_of_complement(values in prop::collection::vec(0.0f64..=1.0, 1..60), cut in 0usize..60) {
            let pts: Vec<Vec<f64>> = (0..values.len()).map(|i| vec![i as f64]).collect();
            let t = ContourTable::new(vec!["x".into()], pts, values).unwrap();
            let member = |p: &[f64]| (p[0] as usize) < cut;
            let pos = hypothesis_possibility(&t, member).unwrap().value;
            let nec_c = necessity(&t, |p| !member(p)).unwrap();
            prop_assert_eq!(pos + nec_c, 1.0);
        }

        #[test]
        fn choquet_indicator_is_possibility(values in prop::collection::vec(0.0f64..=1.0, 1..60), cut in 0usize..60) {
            let pts: Vec<Vec<f64>> = (0..values.len()).map(|i| vec![i as f64]).collect();
            let t = ContourTable::new(vec!["x".into()], pts.clone(), values.clone()).unwrap();
            let contour = (1usize, |p: &[f64]| values[p[0] as usize]);
            let member = |p: &[f64]| (p[0] as usize) < cut;
            let v = choquet_upper_expectation(&contour, |p| if member(p) { 1.0 } else { 0.0 }, &pts).unwrap();
            prop_assert_eq!(v, hypothesis_possibility(&t, member).unwrap().value);
        }
    }
}
