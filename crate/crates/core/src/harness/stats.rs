//! Survival statistics over episodes-to-success.
//!
//! One-sided tests always ask whether the first group is better: faster to
//! succeed (smaller times) or higher success rate.

use crate::error::{Error, Result};
use crate::record::RunRecord;
use crate::rng::Rng;

/// Per-run times with right-censoring flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalData {
    pub times: Vec<f64>,
    pub censored: Vec<bool>,
}

impl SurvivalData {
    pub fn new(times: Vec<f64>, censored: Vec<bool>) -> Result<Self> {
        if times.len() != censored.len() {
            return Err(Error::Stats(format!(
                "{} times but {} censoring flags",
                times.len(),
                censored.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Stats("times must be finite and >= 0".into()));
        }
        Ok(Self { times, censored })
    }

    pub fn uncensored(times: Vec<f64>) -> Self {
        let censored = vec![false; times.len()];
        Self { times, censored }
    }

    /// Successful runs at their success episode if it is within `tau`,
    /// everything else censored at `tau`.
    pub fn from_records(records: &[&RunRecord], tau: f64) -> Self {
        let mut times = Vec::with_capacity(records.len());
        let mut censored = Vec::with_capacity(records.len());
        for r in records {
            let t = r.episodes_to_success as f64;
            if r.success && t <= tau {
                times.push(t);
                censored.push(false);
            } else {
                times.push(tau);
                censored.push(true);
            }
        }
        Self { times, censored }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn events(&self) -> usize {
        self.censored.iter().filter(|c| !**c).count()
    }

    fn concat(&self, other: &Self) -> Self {
        Self {
            times: [self.times.as_slice(), other.times.as_slice()].concat(),
            censored: [self.censored.as_slice(), other.censored.as_slice()].concat(),
        }
    }
}

/// Kaplan–Meier curve as `(time, survival just after time)` at each event
/// time. At tied times events are counted before censorings.
pub fn kaplan_meier(data: &SurvivalData) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.times[a].total_cmp(&data.times[b]));
    let mut at_risk = data.len();
    let mut s = 1.0;
    let mut curve = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let t = data.times[order[k]];
        let mut deaths = 0;
        let mut leaving = 0;
        while k < order.len() && data.times[order[k]] == t {
            if !data.censored[order[k]] {
                deaths += 1;
            }
            leaving += 1;
            k += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            curve.push((t, s));
        }
        at_risk -= leaving;
    }
    curve
}

/// Restricted mean survival time: area under the Kaplan–Meier curve on
/// `[0, tau]`.
///
/// Computed by redistributing each censored run's mass equally over the runs
/// after it (events sort before censorings at tied times). Mass that cannot be
/// redistributed survives to `tau`. Weights stay unnormalized until the final
/// division, so uncensored integer times give exactly their mean.
pub fn rmst(data: &SurvivalData, tau: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Stats("rmst of empty data".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::Stats("tau must be > 0".into()));
    }
    if data.times.iter().any(|&t| t > tau) {
        return Err(Error::Stats("all times must be <= tau".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| {
        data.times[a]
            .total_cmp(&data.times[b])
            .then(data.censored[a].cmp(&data.censored[b]))
    });
    let mut weight = vec![1.0; order.len()];
    let mut area = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let later = order.len() - k - 1;
        if !data.censored[i] {
            area += weight[k] * data.times[i];
        } else if later == 0 {
            area += weight[k] * tau;
        } else {
            let share = weight[k] / later as f64;
            weight[k + 1..].iter_mut().for_each(|w| *w += share);
        }
    }
    Ok(area / data.len() as f64)
}

/// Signed log-rank statistic `(O_a - E_a, Var)` over pooled event times.
pub fn log_rank_statistic(a: &SurvivalData, b: &SurvivalData) -> (f64, f64) {
    let mut times: Vec<f64> = a
        .times
        .iter()
        .zip(&a.censored)
        .chain(b.times.iter().zip(&b.censored))
        .filter(|(_, c)| !**c)
        .map(|(t, _)| *t)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let count = |d: &SurvivalData, t: f64| {
        let at_risk = d.times.iter().filter(|&&x| x >= t).count() as f64;
        let events = d
            .times
            .iter()
            .zip(&d.censored)
            .filter(|(x, c)| **x == t && !**c)
            .count() as f64;
        (at_risk, events)
    };
    let (mut u, mut v) = (0.0, 0.0);
    for t in times {
        let (na, da) = count(a, t);
        let (nb, db) = count(b, t);
        let n = na + nb;
        let d = da + db;
        u += da - d * na / n;
        if n > 1.0 {
            v += d * (na / n) * (nb / n) * (n - d) / (n - 1.0);
        }
    }
    (u, v)
}

/// One-sided log-rank p-value for "a succeeds faster than b":
/// `0.5 erfc(Z / sqrt 2)` with `Z = (O_a - E_a) / sqrt(Var)`.
pub fn log_rank_one_sided(a: &SurvivalData, b: &SurvivalData) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Stats("log-rank needs two non-empty groups".into()));
    }
    if a.events() + b.events() == 0 {
        return Err(Error::Stats("log-rank needs at least one event".into()));
    }
    let (u, v) = log_rank_statistic(a, b);
    if v <= 0.0 {
        return Ok(0.5);
    }
    let z = u / v.sqrt();
    Ok(0.5 * libm::erfc(z / std::f64::consts::SQRT_2))
}

/// One-sided permutation test for "a has the smaller RMST":
/// `p = (1 + #{perm delta <= observed delta}) / (n_perm + 1)`.
pub fn permutation_test_rmst(
    a: &SurvivalData,
    b: &SurvivalData,
    n_perm: usize,
    tau: f64,
    rng: &mut Rng,
) -> Result<f64> {
    if n_perm == 0 {
        return Err(Error::Stats("n_perm must be >= 1".into()));
    }
    let observed = rmst(a, tau)? - rmst(b, tau)?;
    let pooled = a.concat(b);
    let na = a.len();
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    let mut hits = 0usize;
    for _ in 0..n_perm {
        rng.shuffle(&mut idx);
        let pick = |range: &[usize]| SurvivalData {
            times: range.iter().map(|&i| pooled.times[i]).collect(),
            censored: range.iter().map(|&i| pooled.censored[i]).collect(),
        };
        let delta = rmst(&pick(&idx[..na]), tau)? - rmst(&pick(&idx[na..]), tau)?;
        if delta <= observed {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (n_perm + 1) as f64)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

fn choose_exact(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(c)
}

/// One-sided Fisher exact test for "rate a > rate b": the hypergeometric
/// upper tail `P(X >= successes_a)` given both margins.
pub fn fisher_exact_one_sided(successes_a: u64, n_a: u64, successes_b: u64, n_b: u64) -> Result<f64> {
    if successes_a > n_a || successes_b > n_b {
        return Err(Error::Stats("successes cannot exceed group size".into()));
    }
    let n = n_a + n_b;
    let k = successes_a + successes_b;
    let terms = (successes_a..=k.min(n_a)).filter(|&x| k - x <= n_b);
    let exact = || -> Option<f64> {
        let mut num: u128 = 0;
        for x in terms.clone() {
            num = num.checked_add(choose_exact(n_a, x)?.checked_mul(choose_exact(n_b, k - x)?)?)?;
        }
        Some(num as f64 / choose_exact(n, k)? as f64)
    };
    if let Some(p) = exact() {
        return Ok(p.min(1.0));
    }
    let denom = ln_choose(n, k);
    let p: f64 = terms
        .map(|x| (ln_choose(n_a, x) + ln_choose(n_b, k - x) - denom).exp())
        .sum();
    Ok(p.min(1.0))
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmst_mean_equivalence() {
        let d = SurvivalData::uncensored(vec![2.0, 4.0, 6.0]);
        assert_eq!(rmst(&d, 10.0).unwrap(), 4.0);
        let times = vec![17.0, 3.0, 990.0, 4.0, 4.0, 251.0, 1.0];
        let mean = times.iter().sum::<f64>() / 7.0;
        assert_eq!(rmst(&SurvivalData::uncensored(times), 1000.0).unwrap(), mean);
    }

    #[test]
    fn rmst_matches_kaplan_meier_area() {
        let mut rng = Rng::new(12);
        for _ in 0..200 {
            let n = 1 + rng.below(12) as usize;
            let times: Vec<f64> = (0..n).map(|_| (1 + rng.below(20)) as f64).collect();
            let censored: Vec<bool> = (0..n).map(|_| rng.below(3) == 0).collect();
            let d = SurvivalData::new(times, censored).unwrap();
            let mut area = 0.0;
            let (mut prev_t, mut prev_s) = (0.0, 1.0);
            for (t, s) in kaplan_meier(&d) {
                area += (t - prev_t) * prev_s;
                prev_t = t;
                prev_s = s;
            }
            area += (20.0 - prev_t) * prev_s;
            assert!((rmst(&d, 20.0).unwrap() - area).abs() < 1e-9);
        }
    }

    #[test]
    fn rmst_all_censored() {
        let d = SurvivalData::new(vec![10.0; 4], vec![true; 4]).unwrap();
        assert_eq!(rmst(&d, 10.0).unwrap(), 10.0);
    }

    #[test]
    fn rmst_mixed_matches_step_integration() {
        // Times 3, 5+, 5, 8, 12+ with tau = 12. Events before censorings at 5.
        // S: 1 on [0,3), 4/5 on [3,5), 4/5 * 3/4 = 3/5 on [5,8), 3/5 * 1/2 on [8,12].
        let d = SurvivalData::new(vec![3.0, 5.0, 5.0, 8.0, 12.0], vec![false, true, false, false, true]).unwrap();
        let expect = 3.0 + 2.0 * 0.8 + 3.0 * 0.6 + 4.0 * 0.3;
        assert!((rmst(&d, 12.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn rmst_errors() {
        assert!(rmst(&SurvivalData::uncensored(vec![]), 5.0).is_err());
        assert!(rmst(&SurvivalData::uncensored(vec![6.0]), 5.0).is_err());
        assert!(rmst(&SurvivalData::uncensored(vec![1.0]), 0.0).is_err());
        assert!(SurvivalData::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn log_rank_identical_groups() {
        let a = SurvivalData::new(vec![3.0, 7.0, 9.0, 10.0], vec![false, false, false, true]).unwrap();
        assert_eq!(log_rank_one_sided(&a, &a).unwrap(), 0.5);
    }

    #[test]
    fn log_rank_separated_groups() {
        let a = SurvivalData::uncensored(vec![1.0, 2.0, 3.0]);
        let b = SurvivalData::uncensored(vec![100.0, 200.0, 300.0]);
        // tests/oracles/logrank_oracle.py
        let p = log_rank_one_sided(&a, &b).unwrap();
        assert!(p < 0.05);
        assert!((p - 0.012301174976820896).abs() < 1e-12);
        let q = log_rank_one_sided(&b, &a).unwrap();
        assert!((p + q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_rank_with_ties_and_censoring() {
        // tests/oracles/logrank_oracle.py
        let a = SurvivalData::new(vec![3.0, 5.0, 5.0, 8.0, 12.0], vec![false, true, false, false, true]).unwrap();
        let b = SurvivalData::new(vec![4.0, 6.0, 6.0, 9.0, 12.0, 12.0], vec![false, false, false, false, true, true]).unwrap();
        let (u, v) = log_rank_statistic(&a, &b);
        assert!((u - 0.4795815295815296).abs() < 1e-12);
        assert!((v - 1.502483518966203).abs() < 1e-12);
        assert!((log_rank_one_sided(&a, &b).unwrap() - 0.3478051481064899).abs() < 1e-12);
    }

    #[test]
    fn log_rank_needs_events() {
        let a = SurvivalData::new(vec![5.0], vec![true]).unwrap();
        assert!(log_rank_one_sided(&a, &a).is_err());
        assert!(log_rank_one_sided(&a, &SurvivalData::uncensored(vec![])).is_err());
    }

    #[test]
    fn permutation_floor_and_symmetry() {
        let a = SurvivalData::uncensored(vec![1.0, 2.0, 3.0, 4.0]);
        let b = SurvivalData::uncensored(vec![50.0, 60.0, 70.0, 80.0]);
        let p = permutation_test_rmst(&a, &b, 999, 100.0, &mut Rng::new(1)).unwrap();
        assert!(p >= 1.0 / 1000.0);
        assert!(p < 0.05);
        let same = permutation_test_rmst(&a, &a, 2000, 100.0, &mut Rng::new(2)).unwrap();
        assert!(same > 0.5, "{same}");
        assert!(permutation_test_rmst(&a, &b, 0, 100.0, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn fisher_corner() {
        let p = fisher_exact_one_sided(5, 5, 0, 5).unwrap();
        assert!((p - 1.0 / 252.0).abs() < 1e-15);
        assert_eq!(fisher_exact_one_sided(0, 5, 5, 5).unwrap(), 1.0);
        assert!(fisher_exact_one_sided(6, 5, 0, 5).is_err());
    }

    #[test]
    fn mean_std_basic() {
        assert_eq!(mean_std(&[]), None);
        assert_eq!(mean_std(&[2.0]), Some((2.0, 0.0)));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
