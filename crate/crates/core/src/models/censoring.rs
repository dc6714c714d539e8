use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CensoredObs;
use crate::error::{invalid, Result};

/// Discrete estimate of the censoring distribution. An atom at `+inf`
/// means "never censored".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringEstimate {
    pub atoms: Vec<f64>,
    pub masses: Vec<f64>,
}

impl CensoringEstimate {
    pub fn new(atoms: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != masses.len() {
            return Err(invalid(
                "censoring atoms and masses must be nonempty and equal length",
            ));
        }
        if atoms.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("censoring atoms must be strictly ascending"));
        }
        if masses.iter().any(|m| !(*m >= 0.0)) {
            return Err(invalid("censoring masses must be nonnegative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("censoring masses sum to {total}, not 1")));
        }
        Ok(Self { atoms, masses })
    }

    /// Point mass at `at` (`f64::INFINITY` for no censoring).
    pub fn degenerate(at: f64) -> Self {
        Self {
            atoms: vec![at],
            masses: vec![1.0],
        }
    }

    pub fn is_uncensored(&self) -> bool {
        self.atoms.len() == 1 && self.atoms[0] == f64::INFINITY
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, m) in self.atoms.iter().zip(&self.masses) {
            acc += m;
            if u < acc {
                return *a;
            }
        }
        *self.atoms.last().expect("nonempty")
    }
}

/// Product-limit estimate of the distribution of the times flagged `jump`.
/// Ties: at-risk counts include every observation at the tied time. Mass
/// left over after the last observed time is placed on that time.
pub(crate) fn product_limit(time: &[f64], jump: &[bool]) -> CensoringEstimate {
    let mut order: Vec<usize> = (0..time.len()).collect();
    order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
    let n = time.len();
    let mut surv = 1.0;
    let mut atoms = Vec::new();
    let mut masses = Vec::new();
    let mut i = 0;
    while i < n {
        let t = time[order[i]];
        let at_risk = (n - i) as f64;
        let mut jumps = 0usize;
        let mut j = i;
        while j < n && time[order[j]] == t {
            if jump[order[j]] {
                jumps += 1;
            }
            j += 1;
        }
        if jumps > 0 {
            let next = surv * (1.0 - jumps as f64 / at_risk);
            atoms.push(t);
            masses.push(surv - next);
            surv = next;
        }
        i = j;
    }
    if surv > 0.0 {
        let last = time[order[n - 1]];
        if atoms.last() == Some(&last) {
            *masses.last_mut().expect("nonempty") += surv;
        } else {
            atoms.push(last);
            masses.push(surv);
        }
    }
    // absorb rounding so masses sum to one
    let total: f64 = masses.iter().sum();
    for m in &mut masses {
        *m /= total;
    }
    CensoringEstimate { atoms, masses }
}

/// Reverse Kaplan-Meier: censorings play the role of events.
pub fn kaplan_meier_censoring(z: &CensoredObs) -> Result<CensoringEstimate> {
    if z.is_empty() {
        return Err(invalid("empty dataset"));
    }
    if z.event.iter().all(|&e| e) {
        log::warn!("no censored observations; censoring estimate is degenerate at +inf");
        return Ok(CensoringEstimate::degenerate(f64::INFINITY));
    }
    let jump: Vec<bool> = z.event.iter().map(|&e| !e).collect();
    Ok(product_limit(&z.time, &jump))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_censored_observation() {
        let g = kaplan_meier_censoring(&CensoredObs::new(vec![5.0], vec![false])).unwrap();
        assert_eq!(g.atoms, vec![5.0]);
        assert_eq!(g.masses, vec![1.0]);
    }

    #[test]
    fn event_then_censoring() {
        let g =
            kaplan_meier_censoring(&CensoredObs::new(vec![1.0, 2.0], vec![true, false])).unwrap();
        assert_eq!(g.atoms, vec![2.0]);
        assert_eq!(g.masses, vec![1.0]);
    }

    #[test]
    fn tail_mass_goes_to_largest_time() {
        // censored at 1, event at 2: G jumps 1/2 at 1, remaining 1/2 on 2
        let g =
            kaplan_meier_censoring(&CensoredObs::new(vec![1.0, 2.0], vec![false, true])).unwrap();
        assert_eq!(g.atoms, vec![1.0, 2.0]);
        assert!((g.masses[0] - 0.5).abs() < 1e-15 && (g.masses[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uncensored_data_is_degenerate_at_infinity() {
        let g =
            kaplan_meier_censoring(&CensoredObs::new(vec![1.0, 2.0], vec![true, true])).unwrap();
        assert!(g.is_uncensored());
    }

    #[test]
    fn double_swap_on_uncensored_data_is_empirical() {
        let t = vec![3.0, 1.0, 2.0, 2.0, 5.0];
        let g = product_limit(&t, &[true; 5]);
        assert_eq!(g.atoms, vec![1.0, 2.0, 3.0, 5.0]);
        let want = [0.2, 0.4, 0.2, 0.2];
        for (m, w) in g.masses.iter().zip(want) {
            assert!((m - w).abs() < 1e-12);
        }
    }

    #[test]
    fn validation() {
        assert!(CensoringEstimate::new(vec![2.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(CensoringEstimate::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(CensoringEstimate::new(vec![1.0, 2.0], vec![0.5, 0.5]).is_ok());
    }
}
