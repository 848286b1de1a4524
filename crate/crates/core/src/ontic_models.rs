//! Finite ontic models and brute-force checks of the no-go bounds.
//!
//! A model has `K` preparations, each a distribution over `L` ontic states,
//! and for every ontic state a response distribution over `d` click outcomes
//! plus a final no-click outcome.

use rand::Rng;

use crate::error::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOnticModel {
    preparations: Vec<Vec<f64>>,
    responses: Vec<Vec<f64>>,
}

fn check_row(row: &[f64], what: &str, index: usize) -> Result<()> {
    if let Some(bad) = row.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::domain(format!("{what} row {index} has invalid entry {bad}")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::domain(format!("{what} row {index} sums to {sum}")));
    }
    Ok(())
}

impl DiscreteOnticModel {
    /// `preparations[k][l] = P(l|Q_k)`, `responses[l][r] = P(r|M,l)` with
    /// `r = d` the no-click outcome.
    pub fn new(preparations: Vec<Vec<f64>>, responses: Vec<Vec<f64>>) -> Result<Self> {
        let ontic = responses.len();
        if ontic == 0 || preparations.is_empty() {
            return Err(Error::domain(
                "model needs at least one preparation and one ontic state",
            ));
        }
        let outcomes = responses[0].len();
        if outcomes < 2 {
            return Err(Error::domain("responses need at least one click outcome and no-click"));
        }
        for (k, row) in preparations.iter().enumerate() {
            if row.len() != ontic {
                return Err(Error::DimMismatch {
                    left: ontic,
                    right: row.len(),
                });
            }
            check_row(row, "preparation", k)?;
        }
        for (l, row) in responses.iter().enumerate() {
            if row.len() != outcomes {
                return Err(Error::DimMismatch {
                    left: outcomes,
                    right: row.len(),
                });
            }
            check_row(row, "response", l)?;
        }
        Ok(Self {
            preparations,
            responses,
        })
    }

    pub fn preparation_count(&self) -> usize {
        self.preparations.len()
    }

    /// Number of click outcomes `d`.
    pub fn outcome_count(&self) -> usize {
        self.responses[0].len() - 1
    }

    pub fn ontic_count(&self) -> usize {
        self.responses.len()
    }

    pub fn preparations(&self) -> &[Vec<f64>] {
        &self.preparations
    }

    pub fn responses(&self) -> &[Vec<f64>] {
        &self.responses
    }

    /// `P(clk|l)`, summed over click outcomes.
    pub fn click_given_ontic(&self, l: usize) -> f64 {
        let d = self.outcome_count();
        self.responses[l][..d].iter().sum()
    }

    /// Ontic states that never produce a click.
    pub fn never_click_states(&self) -> Vec<usize> {
        (0..self.ontic_count())
            .filter(|&l| self.click_given_ontic(l) == 0.0)
            .collect()
    }

    /// `P(r|M,Q_k)` for every outcome, no-click last.
    pub fn outcome_probabilities(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.outcome_count() + 1];
        for (p, resp) in self.preparations[k].iter().zip(&self.responses) {
            for (o, r) in out.iter_mut().zip(resp) {
                *o += p * r;
            }
        }
        out
    }

    pub fn click_probability(&self, k: usize) -> f64 {
        (0..self.ontic_count())
            .map(|l| self.preparations[k][l] * self.click_given_ontic(l))
            .sum()
    }

    fn check_outcomes_cover_preparations(&self) -> Result<()> {
        if self.preparation_count() > self.outcome_count() {
            return Err(Error::domain(format!(
                "{} preparations but only {} outcomes",
                self.preparation_count(),
                self.outcome_count()
            )));
        }
        Ok(())
    }
}

/// `sum_l min_k P(l|Q_k)`.
pub fn overlap_epsilon(model: &DiscreteOnticModel) -> f64 {
    (0..model.ontic_count())
        .map(|l| {
            model
                .preparations
                .iter()
                .map(|row| row[l])
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// `sum_k P(k|M,Q_k)`.
///
/// This is at least [`overlap_epsilon`] whenever `K = d` and no ontic state
/// puts weight on the no-click outcome.
pub fn predicted_lhs(model: &DiscreteOnticModel) -> Result<f64> {
    model.check_outcomes_cover_preparations()?;
    Ok((0..model.preparation_count())
        .map(|k| {
            model.preparations[k]
                .iter()
                .zip(&model.responses)
                .map(|(p, resp)| p * resp[k])
                .sum::<f64>()
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapReport {
    pub epsilon: f64,
    /// `sum_l min_k P(l|Q_k, clk)`.
    pub epsilon0: f64,
    pub lhs_sum: f64,
    /// `sum_k P(k|Q_k, clk)`.
    pub lhs_sum_clk: f64,
    /// `lhs_sum_clk >= epsilon0` up to 1e-12.
    pub bound_satisfied: bool,
}

/// Click-conditioned version of the bound.
///
/// Conditions every preparation on a click via Bayes' rule and compares
/// `sum_k P(k|Q_k, clk)` with the conditioned overlap. The bound holds for
/// every model with `K = d`.
pub fn predicted_lhs_conditioned(model: &DiscreteOnticModel) -> Result<OverlapReport> {
    model.check_outcomes_cover_preparations()?;
    let kk = model.preparation_count();
    let click_prob: Vec<f64> = (0..kk).map(|k| model.click_probability(k)).collect();
    if let Some(k) = click_prob.iter().position(|&p| p <= 0.0) {
        return Err(Error::ZeroClickProbability { k });
    }
    let epsilon0 = (0..model.ontic_count())
        .map(|l| {
            let clk = model.click_given_ontic(l);
            (0..kk)
                .map(|k| clk * model.preparations[k][l] / click_prob[k])
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>();
    let lhs_sum_clk = (0..kk)
        .map(|k| model.outcome_probabilities(k)[k] / click_prob[k])
        .sum::<f64>();
    Ok(OverlapReport {
        epsilon: overlap_epsilon(model),
        epsilon0,
        lhs_sum: predicted_lhs(model)?,
        lhs_sum_clk,
        bound_satisfied: lhs_sum_clk >= epsilon0 - 1e-12,
    })
}

/// Outcome probabilities `P(j|Q_k)` of a `d x d` experiment, with a
/// no-click column.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub probabilities: Vec<Vec<f64>>,
    pub no_click: Vec<f64>,
}

impl ProbabilityTable {
    pub fn dim(&self) -> usize {
        self.probabilities.len()
    }

    /// `sum_k P(k|Q_k) / sum_j P(j|Q_k)`.
    pub fn epsilon(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, row)| row[k] / row.iter().sum::<f64>())
            .sum()
    }

    /// Expected counts for `trials` trains per preparation, rounded.
    pub fn to_counts(&self, trials: u64) -> Result<crate::apparatus::ClickCounts> {
        let scale = |p: f64| (p * trials as f64).round() as u64;
        let counts: Vec<Vec<u64>> = self
            .probabilities
            .iter()
            .map(|row| row.iter().map(|&p| scale(p)).collect())
            .collect();
        let no_clicks = counts
            .iter()
            .map(|row: &Vec<u64>| trials.saturating_sub(row.iter().sum()))
            .collect();
        crate::apparatus::ClickCounts::new(counts, no_clicks)
    }
}

/// Statistics of the classical mixtures `rho_k` spread evenly over every
/// basis state except `k`: `P(j|Q_k) = 1/(d-1)` for `j != k`.
pub fn classical_mixture_statistics(d: usize) -> Result<ProbabilityTable> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must be at least 2, got {d}")));
    }
    let p = 1.0 / (d - 1) as f64;
    Ok(ProbabilityTable {
        probabilities: (0..d)
            .map(|k| (0..d).map(|j| if j == k { 0.0 } else { p }).collect())
            .collect(),
        no_click: vec![0.0; d],
    })
}

/// Random model for property tests.
///
/// Each ontic state joins the never-click set with probability
/// `no_click_mass`; the remaining states answer with a random no-click weight
/// in `[0, no_click_mass)` and spread the rest over the `d` click outcomes.
/// Preparation rows are sparse random distributions, each guaranteed some
/// weight on a clicking state.
pub fn random_model<R: Rng + ?Sized>(
    preparations: usize,
    d: usize,
    ontic_count: usize,
    no_click_mass: f64,
    rng: &mut R,
) -> Result<DiscreteOnticModel> {
    if preparations == 0 || d == 0 || ontic_count == 0 {
        return Err(Error::domain("model sizes must be positive"));
    }
    if !(0.0..1.0).contains(&no_click_mass) {
        return Err(Error::domain(format!("no_click_mass {no_click_mass} outside [0, 1)")));
    }

    let mut never_click: Vec<bool> = (0..ontic_count).map(|_| rng.random::<f64>() < no_click_mass).collect();
    if never_click.iter().all(|&x| x) {
        let l = rng.random_range(0..ontic_count);
        never_click[l] = false;
    }
    let clicking: Vec<usize> = (0..ontic_count).filter(|&l| !never_click[l]).collect();

    let responses = never_click
        .iter()
        .map(|&silent| {
            let mut row = vec![0.0; d + 1];
            if silent {
                row[d] = 1.0;
                return row;
            }
            let silent_part = if no_click_mass > 0.0 {
                rng.random::<f64>() * no_click_mass
            } else {
                0.0
            };
            let weights = sparse_weights(d, 0.3, rng);
            for (r, w) in row.iter_mut().zip(weights) {
                *r = w * (1.0 - silent_part);
            }
            row[d] = silent_part;
            normalize(&mut row);
            row
        })
        .collect();

    let preparations = (0..preparations)
        .map(|_| {
            let mut row = sparse_weights(ontic_count, 0.3, rng);
            if clicking.iter().all(|&l| row[l] == 0.0) {
                let l = clicking[rng.random_range(0..clicking.len())];
                row[l] = rng.random::<f64>() + 1e-3;
                normalize(&mut row);
            }
            row
        })
        .collect();

    DiscreteOnticModel::new(preparations, responses)
}

/// Exponential weights with each entry zeroed with probability `sparsity`,
/// at least one entry kept.
fn sparse_weights<R: Rng + ?Sized>(n: usize, sparsity: f64, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < sparsity {
                0.0
            } else {
                -(1.0 - rng.random::<f64>()).ln()
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    normalize(&mut w);
    w
}

fn normalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= s);
    // Fold the rounding residue into the largest entry.
    let residue = 1.0 - row.iter().sum::<f64>();
    if let Some(m) = row.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *m += residue;
    }
}

/// A model the click-conditioned test cannot exclude: every preparation puts
/// half its weight on one shared never-click state, and the other half on a
/// private state that always answers some outcome other than its own index.
/// Gives `epsilon = 1/2`, `epsilon0 = 0`, and `sum_k P(k|Q_k, clk) = 0`.
pub fn detection_loophole_fixture(d: usize) -> Result<DiscreteOnticModel> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must be at least 2, got {d}")));
    }
    let ontic = d + 1;
    let preparations = (0..d)
        .map(|k| {
            let mut row = vec![0.0; ontic];
            row[0] = 0.5;
            row[k + 1] = 0.5;
            row
        })
        .collect();
    let responses = (0..ontic)
        .map(|l| {
            let mut row = vec![0.0; d + 1];
            if l == 0 {
                row[d] = 1.0;
            } else {
                row[l % d] = 1.0;
            }
            row
        })
        .collect();
    DiscreteOnticModel::new(preparations, responses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRandomSource;
    use approx::assert_abs_diff_eq;

    fn model(preps: Vec<Vec<f64>>, resp: Vec<Vec<f64>>) -> DiscreteOnticModel {
        DiscreteOnticModel::new(preps, resp).unwrap()
    }

    #[test]
    fn construction_checks() {
        assert!(DiscreteOnticModel::new(vec![vec![0.5, 0.4]], vec![vec![1.0, 0.0]; 2]).is_err());
        assert!(DiscreteOnticModel::new(vec![vec![1.5, -0.5]], vec![vec![1.0, 0.0]; 2]).is_err());
        assert!(DiscreteOnticModel::new(vec![vec![1.0]], vec![vec![1.0, 0.0]; 2]).is_err());
        assert!(DiscreteOnticModel::new(vec![vec![0.5, 0.5]], vec![vec![1.0, 0.0]; 2]).is_ok());
    }

    #[test]
    fn epsilon_examples() {
        let resp = vec![vec![1.0, 0.0, 0.0]; 3];
        let same = model(vec![vec![0.2, 0.3, 0.5]; 2], resp.clone());
        assert_abs_diff_eq!(overlap_epsilon(&same), 1.0, epsilon = 1e-15);
        let disjoint = model(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]], resp.clone());
        assert_eq!(overlap_epsilon(&disjoint), 0.0);
        let half = model(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]], resp);
        assert_abs_diff_eq!(overlap_epsilon(&half), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn lhs_examples() {
        // Ontic state l only ever answers outcome (l+1) mod 2; preparation k
        // sits on l = k, so P(k|Q_k) = 0 and epsilon is forced to 0.
        let m = model(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]],
        );
        assert_eq!(predicted_lhs(&m).unwrap(), 0.0);
        assert_eq!(overlap_epsilon(&m), 0.0);

        for (kk, d) in [(3usize, 3usize), (2, 4), (4, 4)] {
            let mut uniform = vec![1.0 / d as f64; d];
            uniform.push(0.0);
            let m = model(vec![vec![0.25, 0.75]; kk], vec![uniform; 2]);
            assert_abs_diff_eq!(predicted_lhs(&m).unwrap(), kk as f64 / d as f64, epsilon = 1e-14);
        }

        let too_many = model(vec![vec![1.0]; 3], vec![vec![0.5, 0.5, 0.0]]);
        assert!(predicted_lhs(&too_many).is_err());
    }

    #[test]
    fn conditioning_on_sure_click_changes_nothing() {
        let mut r = SeededRandomSource::new(3).rng();
        for _ in 0..100 {
            let m = random_model(4, 4, 6, 0.0, &mut r).unwrap();
            let rep = predicted_lhs_conditioned(&m).unwrap();
            assert_abs_diff_eq!(rep.lhs_sum_clk, rep.lhs_sum, epsilon = 1e-12);
            assert_abs_diff_eq!(rep.epsilon0, rep.epsilon, epsilon = 1e-12);
            assert!(m.never_click_states().is_empty());
        }
    }

    #[test]
    fn loophole_fixture() {
        for d in [2usize, 3, 10] {
            let m = detection_loophole_fixture(d).unwrap();
            let rep = predicted_lhs_conditioned(&m).unwrap();
            assert_abs_diff_eq!(rep.epsilon, 0.5, epsilon = 1e-15);
            assert_eq!(rep.epsilon0, 0.0);
            assert_eq!(rep.lhs_sum_clk, 0.0);
            assert!(rep.bound_satisfied);
            assert_eq!(m.never_click_states(), vec![0]);
        }
    }

    #[test]
    fn zero_click_precondition() {
        let m = model(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
        );
        assert!(matches!(
            predicted_lhs_conditioned(&m),
            Err(Error::ZeroClickProbability { k: 0 })
        ));
    }

    #[test]
    fn classical_mixture() {
        let t = classical_mixture_statistics(3).unwrap();
        assert_eq!(t.probabilities[0], vec![0.0, 0.5, 0.5]);
        for row in &t.probabilities {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
        assert_eq!(t.epsilon(), 0.0);
        let c = classical_mixture_statistics(7).unwrap().to_counts(6000).unwrap();
        for k in 0..7 {
            assert_eq!(c.counts()[k][k], 0);
            assert_eq!(c.trials_per_k()[k], 6000);
        }
        assert!(classical_mixture_statistics(1).is_err());
    }

    #[test]
    fn generator_properties() {
        let mut r = SeededRandomSource::new(5).rng();
        let single = random_model(3, 3, 1, 0.0, &mut r).unwrap();
        assert_eq!(overlap_epsilon(&single), 1.0);
        let a = random_model(3, 4, 8, 0.4, &mut SeededRandomSource::new(9).rng()).unwrap();
        let b = random_model(3, 4, 8, 0.4, &mut SeededRandomSource::new(9).rng()).unwrap();
        assert_eq!(a, b);
        assert!(random_model(3, 4, 8, 1.0, &mut r).is_err());
    }

    #[test]
    fn bounds_hold_on_random_models() {
        let mut r = SeededRandomSource::new(13).rng();
        for i in 0..2000 {
            let d = 2 + i % 6;
            let l = 1 + i % 9;
            let clean = random_model(d, d, l, 0.0, &mut r).unwrap();
            assert!(predicted_lhs(&clean).unwrap() >= overlap_epsilon(&clean) - 1e-12);

            let lossy = random_model(d, d, l, 0.6, &mut r).unwrap();
            let rep = predicted_lhs_conditioned(&lossy).unwrap();
            assert!(rep.bound_satisfied, "{rep:?}");
            for k in 0..d {
                let total: f64 = lossy.outcome_probabilities(k).iter().sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            }
        }
    }
}
