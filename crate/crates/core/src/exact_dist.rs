//! Closed-form stationary laws and per-vertex dollar marginals.
//!
//! Model 1 is uniform on the state space, so the marginal at a vertex is a
//! ratio of state counts and tends to a geometric law, itself close to an
//! exponential density at high money temperature. Model 2 is multinomial
//! with degree-proportional cell probabilities; its marginals are binomial
//! and tend to Poisson on regular graphs.
//!
//! Rational values are exact. The floating builders are for scales where
//! exact arithmetic is pointless (a thousand agents, a hundred thousand
//! dollars).

use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::combinatorics::{binomial, multinomial};
use crate::graph::{Graph, Vertex};
use crate::state_space::{count_states, MoneyConfig};

/// Default size (decimal digits) above which [`NumericMode::Auto`] switches
/// to floating point.
pub const DEFAULT_DIGIT_BUDGET: usize = 80;

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Model-1 stationary probability of any configuration: uniform.
pub fn model1_stationary_prob(n: usize, m: u64, _c: &MoneyConfig) -> BigRational {
    ratio(BigUint::one(), count_states(n, m))
}

/// Model-1 stationary probability that a given vertex holds `d` dollars:
/// `C(M+N-d-2, N-2) / C(M+N-1, N-1)`, zero for `d > m`.
pub fn model1_marginal(n: usize, m: u64, d: u64) -> BigRational {
    if d > m {
        return BigRational::zero();
    }
    if n == 1 {
        return if d == m {
            BigRational::one()
        } else {
            BigRational::zero()
        };
    }
    let (n, m, d) = (n as i64, m as i64, d as i64);
    ratio(binomial(m + n - d - 2, n - 2), binomial(m + n - 1, n - 1))
}

/// Large-population limit of the model-1 marginal at temperature `t`:
/// geometric, `(1/(t+1)) (t/(t+1))^d`.
pub fn model1_marginal_limit(t: f64, d: u64) -> f64 {
    (1.0 / (t + 1.0)) * (t / (t + 1.0)).powf(d as f64)
}

/// Exponential density `e^{-d/t} / t`.
pub fn exponential_density(t: f64, d: f64) -> f64 {
    (-d / t).exp() / t
}

/// Stationary law of a single bill's walk: `deg(w) / Σ_z deg(z)`.
pub fn bill_marginal(g: &Graph, w: Vertex) -> BigRational {
    let total = 2 * g.edge_count();
    BigRational::new(BigInt::from(g.degree(w)), BigInt::from(total))
}

/// Model-2 stationary probability: multinomial with cell probabilities
/// given by [`bill_marginal`].
pub fn model2_stationary_prob(g: &Graph, c: &MoneyConfig) -> BigRational {
    let total_degree = BigUint::from(2 * g.edge_count());
    let mut num = multinomial(c.counts());
    for (w, &k) in c.counts().iter().enumerate() {
        num *= BigUint::from(g.degree(w as Vertex)).pow(k);
    }
    ratio(num, total_degree.pow(c.total() as u32))
}

/// Model-2 stationary probability that `x` holds `d` dollars:
/// `Binomial(m, deg(x)/Σdeg)` at `d`.
pub fn model2_marginal(g: &Graph, x: Vertex, m: u64, d: u64) -> BigRational {
    if d > m {
        return BigRational::zero();
    }
    let deg = g.degree(x) as u64;
    let total = 2 * g.edge_count() as u64;
    let num = binomial(m as i64, d as i64)
        * BigUint::from(deg).pow(d as u32)
        * BigUint::from(total - deg).pow((m - d) as u32);
    ratio(num, BigUint::from(total).pow(m as u32))
}

/// Poisson probability mass `t^d e^{-t} / d!`.
pub fn poisson_pmf(t: f64, d: u64) -> f64 {
    let ln_fact: f64 = (2..=d).map(|k| (k as f64).ln()).sum();
    (d as f64 * t.ln() - t - ln_fact).exp()
}

/// Model-1 marginal over `d = 0..=m` in floating point, by the exact ratio
/// `p(d+1)/p(d) = (m-d)/(m+n-d-2)` from `p(0) = (n-1)/(m+n-1)`.
pub fn model1_marginal_f64(n: usize, m: u64) -> Vec<f64> {
    if n == 1 {
        let mut v = vec![0.0; m as usize + 1];
        v[m as usize] = 1.0;
        return v;
    }
    let (nf, mf) = (n as f64, m as f64);
    let mut probs = Vec::with_capacity(m as usize + 1);
    let mut p = (nf - 1.0) / (mf + nf - 1.0);
    for d in 0..=m {
        probs.push(p);
        let df = d as f64;
        if d < m {
            p *= (mf - df) / (mf + nf - df - 2.0);
        }
    }
    probs
}

/// `Binomial(m, p)` pmf over `0..=m`.
///
/// Built outward from the mode by ratio recurrences and normalized over the
/// full support, which avoids both underflow of `(1-p)^m` and cancellation
/// in log-factorials.
pub fn binomial_pmf_f64(m: u64, p: f64) -> Vec<f64> {
    let len = m as usize + 1;
    if p <= 0.0 || p >= 1.0 {
        let mut v = vec![0.0; len];
        v[if p <= 0.0 { 0 } else { m as usize }] = 1.0;
        return v;
    }
    let odds = p / (1.0 - p);
    let mf = m as f64;
    let mode = (((mf + 1.0) * p).floor() as usize).min(m as usize);
    let mut w = vec![0.0; len];
    w[mode] = 1.0;
    for d in mode..m as usize {
        let df = d as f64;
        w[d + 1] = w[d] * (mf - df) / (df + 1.0) * odds;
    }
    for d in (1..=mode).rev() {
        let df = d as f64;
        w[d - 1] = w[d] * df / (mf - df + 1.0) / odds;
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Geometric limit over `0..=d_max`.
pub fn model1_limit_f64(t: f64, d_max: u64) -> Vec<f64> {
    (0..=d_max).map(|d| model1_marginal_limit(t, d)).collect()
}

/// Poisson pmf over `0..=d_max`.
pub fn poisson_f64(t: f64, d_max: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(d_max as usize + 1);
    let ln_t = t.ln();
    let mut ln_fact = 0.0;
    for d in 0..=d_max {
        if d > 1 {
            ln_fact += (d as f64).ln();
        }
        out.push((d as f64 * ln_t - t - ln_fact).exp());
    }
    out
}

/// Representation requested for a [`DollarMarginal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericMode {
    Exact,
    Float,
    /// Exact while the relevant integers stay within this many decimal
    /// digits, floating point beyond.
    Auto {
        digit_budget: usize,
    },
}

impl Default for NumericMode {
    fn default() -> Self {
        NumericMode::Auto {
            digit_budget: DEFAULT_DIGIT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Probs {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

/// Probability of holding `d` dollars, for `d = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DollarMarginal {
    pub probs: Probs,
}

impl DollarMarginal {
    /// Model-1 marginal at any vertex of any connected graph on `n` vertices.
    pub fn model1(n: usize, m: u64, mode: NumericMode) -> Self {
        let exact = match mode {
            NumericMode::Exact => true,
            NumericMode::Float => false,
            NumericMode::Auto { digit_budget } => {
                count_states(n, m).to_string().len() <= digit_budget
            }
        };
        let probs = if exact {
            Probs::Exact((0..=m).map(|d| model1_marginal(n, m, d)).collect())
        } else {
            Probs::Float(model1_marginal_f64(n, m))
        };
        DollarMarginal { probs }
    }

    /// Model-2 marginal at vertex `x`.
    pub fn model2(g: &Graph, x: Vertex, m: u64, mode: NumericMode) -> Self {
        let exact = match mode {
            NumericMode::Exact => true,
            NumericMode::Float => false,
            NumericMode::Auto { digit_budget } => {
                // Digits of the common denominator (Σ deg)^m.
                let digits = m as f64 * ((2 * g.edge_count()) as f64).log10();
                digits <= digit_budget as f64
            }
        };
        let probs = if exact {
            Probs::Exact((0..=m).map(|d| model2_marginal(g, x, m, d)).collect())
        } else {
            let p = g.degree(x) as f64 / (2 * g.edge_count()) as f64;
            Probs::Float(binomial_pmf_f64(m, p))
        };
        DollarMarginal { probs }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.probs, Probs::Exact(_))
    }

    pub fn len(&self) -> usize {
        match &self.probs {
            Probs::Exact(v) => v.len(),
            Probs::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Probability at `d`; zero beyond the support.
    pub fn get_f64(&self, d: usize) -> f64 {
        match &self.probs {
            Probs::Exact(v) => v.get(d).map_or(0.0, rational_to_f64),
            Probs::Float(v) => v.get(d).copied().unwrap_or(0.0),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        (0..self.len()).map(|d| self.get_f64(d)).collect()
    }

    /// `|Σ_d p(d) - 1|`; exactly zero in exact mode.
    pub fn normalization_error(&self) -> f64 {
        match &self.probs {
            Probs::Exact(v) => {
                let s: BigRational = v.iter().sum();
                rational_to_f64(&(s - BigRational::one())).abs()
            }
            Probs::Float(v) => (v.iter().sum::<f64>() - 1.0).abs(),
        }
    }

    /// Two-column CSV `d,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,probability\n");
        for d in 0..self.len() {
            writeln!(out, "{},{}", d, self.get_f64(d)).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpec;
    use crate::state_space::{enumerate, DEFAULT_ENUM_CAP};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn cfg(v: &[u32]) -> MoneyConfig {
        MoneyConfig::new(v.to_vec()).unwrap()
    }

    #[test]
    fn model1_stationary_examples() {
        assert_eq!(model1_stationary_prob(2, 1, &cfg(&[1, 0])), q(1, 2));
        for c in enumerate(3, 2, DEFAULT_ENUM_CAP).unwrap() {
            assert_eq!(model1_stationary_prob(3, 2, &c), q(1, 6));
        }
    }

    #[test]
    fn model1_marginal_examples() {
        for d in 0..=3 {
            assert_eq!(model1_marginal(2, 3, d), q(1, 4));
        }
        assert_eq!(model1_marginal(3, 2, 0), q(1, 2));
        assert!(model1_marginal(3, 2, 3).is_zero());
        assert_eq!(model1_marginal(1, 4, 4), BigRational::one());
    }

    #[test]
    fn model1_marginal_is_count_ratio() {
        for n in 2..=5 {
            for m in 0..=6u64 {
                let total: BigRational = (0..=m).map(|d| model1_marginal(n, m, d)).sum();
                assert_eq!(total, BigRational::one());
                for d in 0..=m {
                    let brute = enumerate(n, m, DEFAULT_ENUM_CAP)
                        .unwrap()
                        .filter(|c| u64::from(c.get(0)) == d)
                        .count();
                    let by_counts = ratio(count_states(n - 1, m - d), count_states(n, m));
                    assert_eq!(model1_marginal(n, m, d), by_counts);
                    assert_eq!(
                        model1_marginal(n, m, d),
                        ratio(BigUint::from(brute), count_states(n, m))
                    );
                }
            }
        }
    }

    #[test]
    fn geometric_limit_examples() {
        assert_eq!(model1_marginal_limit(1.0, 0), 0.5);
        assert_eq!(model1_marginal_limit(1.0, 1), 0.25);
        assert!((model1_marginal_limit(100.0, 0) - 1.0 / 101.0).abs() < 1e-15);
        assert!((model1_marginal_limit(100.0, 0) - 0.009901).abs() < 5e-7);
        let sum: f64 = model1_limit_f64(3.0, 400).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_examples() {
        assert!((exponential_density(100.0, 0.0) - 0.01).abs() < 1e-15);
        assert!((exponential_density(100.0, 100.0) - 0.003679).abs() < 5e-7);
        let worst = (0..=1000u64)
            .map(|d| (model1_marginal_limit(100.0, d) - exponential_density(100.0, d as f64)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 2e-4, "{worst}");
    }

    #[test]
    fn bill_marginal_examples() {
        let k5 = GraphSpec::Complete(5).build().unwrap();
        let c6 = GraphSpec::Cycle(6).build().unwrap();
        for g in [&k5, &c6] {
            for w in 0..g.vertex_count() as Vertex {
                assert_eq!(bill_marginal(g, w), q(1, g.vertex_count() as i64));
            }
        }
        let star = GraphSpec::Star(4).build().unwrap();
        assert_eq!(bill_marginal(&star, 0), q(1, 2));
        assert_eq!(bill_marginal(&star, 1), q(1, 6));
        let total: BigRational = (0..4).map(|w| bill_marginal(&star, w)).sum();
        assert_eq!(total, BigRational::one());
        let p2 = GraphSpec::Path(2).build().unwrap();
        assert_eq!(bill_marginal(&p2, 1), q(1, 2));
    }

    #[test]
    fn model2_stationary_examples() {
        let k2 = GraphSpec::Complete(2).build().unwrap();
        assert_eq!(model2_stationary_prob(&k2, &cfg(&[1, 1])), q(1, 2));
        assert_eq!(model2_stationary_prob(&k2, &cfg(&[2, 0])), q(1, 4));
    }

    #[test]
    fn model2_marginal_examples() {
        let k2 = GraphSpec::Complete(2).build().unwrap();
        assert_eq!(model2_marginal(&k2, 0, 2, 1), q(1, 2));
        let star = GraphSpec::Star(4).build().unwrap();
        assert_eq!(model2_marginal(&star, 1, 1, 1), q(1, 6));
        let total: BigRational = (0..=7).map(|d| model2_marginal(&star, 2, 7, d)).sum();
        assert_eq!(total, BigRational::one());
        assert!(model2_marginal(&star, 2, 7, 8).is_zero());
    }

    #[test]
    fn model2_multinomial_sums_and_marginalizes() {
        for spec in [
            GraphSpec::Path(2),
            GraphSpec::Path(3),
            GraphSpec::Complete(3),
            GraphSpec::Star(4),
            GraphSpec::Path(4),
            GraphSpec::Cycle(4),
            GraphSpec::Complete(4),
        ] {
            let g = spec.build().unwrap();
            let n = g.vertex_count();
            for m in 0..=4u64 {
                let states: Vec<_> = enumerate(n, m, DEFAULT_ENUM_CAP).unwrap().collect();
                let total: BigRational = states.iter().map(|c| model2_stationary_prob(&g, c)).sum();
                assert_eq!(total, BigRational::one(), "{spec} m={m}");
                for x in 0..n as Vertex {
                    for d in 0..=m {
                        let summed: BigRational = states
                            .iter()
                            .filter(|c| u64::from(c.get(x)) == d)
                            .map(|c| model2_stationary_prob(&g, c))
                            .sum();
                        assert_eq!(summed, model2_marginal(&g, x, m, d));
                    }
                }
            }
        }
    }

    #[test]
    fn poisson_examples() {
        let e1 = (-1.0f64).exp();
        assert!((poisson_pmf(1.0, 0) - 0.367879).abs() < 5e-7);
        assert!((poisson_pmf(1.0, 1) - e1).abs() < 1e-15);
        let vec = poisson_f64(1.0, 30);
        assert!((vec[0] - poisson_pmf(1.0, 0)).abs() < 1e-16);
        assert!((vec[7] - poisson_pmf(1.0, 7)).abs() < 1e-16);
        // Binomial(1000, 1/1000) vs Poisson(1).
        let b = binomial_pmf_f64(1000, 1e-3);
        let p = poisson_f64(1.0, 1000);
        let tv: f64 = b.iter().zip(&p).map(|(a, c)| (a - c).abs()).sum::<f64>() / 2.0;
        assert!(tv <= 0.002, "{tv}");
    }

    #[test]
    fn float_builders_agree_with_exact() {
        for (n, m) in [(2usize, 9u64), (5, 12), (10, 40)] {
            let f = model1_marginal_f64(n, m);
            for d in 0..=m {
                let e = rational_to_f64(&model1_marginal(n, m, d));
                assert!(
                    (f[d as usize] - e).abs() <= 1e-14 * e.max(1e-300),
                    "{n} {m} {d}"
                );
            }
        }
        let star = GraphSpec::Star(5).build().unwrap();
        let f = binomial_pmf_f64(30, 0.125);
        for d in 0..=30 {
            let e = rational_to_f64(&model2_marginal(&star, 1, 30, d));
            assert!((f[d as usize] - e).abs() <= 1e-13 * e + 1e-300, "{d}");
        }
    }

    #[test]
    fn float_normalization_at_scale() {
        let m1 = DollarMarginal::model1(1000, 100_000, NumericMode::default());
        assert!(!m1.is_exact());
        assert!(
            m1.normalization_error() <= 1e-12,
            "{}",
            m1.normalization_error()
        );
        let k = GraphSpec::Complete(1000).build().unwrap();
        let m2 = DollarMarginal::model2(&k, 0, 100_000, NumericMode::default());
        assert!(!m2.is_exact());
        assert!(m2.normalization_error() <= 1e-12);
        let half = binomial_pmf_f64(100_000, 0.5);
        assert!((half.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(half[50_000] > 0.0);
    }

    #[test]
    fn exact_mode_is_exact() {
        let m1 = DollarMarginal::model1(4, 6, NumericMode::default());
        assert!(m1.is_exact());
        assert_eq!(m1.normalization_error(), 0.0);
        let star = GraphSpec::Star(4).build().unwrap();
        let m2 = DollarMarginal::model2(&star, 0, 10, NumericMode::Exact);
        // Binomial(10, 1/2).
        assert_eq!(
            m2.probs,
            Probs::Exact(
                (0..=10)
                    .map(|d| ratio(binomial(10, d), BigUint::from(1024u32)))
                    .collect()
            )
        );
        assert_eq!(m2.to_csv().lines().count(), 12);
    }

    #[test]
    fn limits_tighten_with_population() {
        let t = 5.0;
        let gaps: Vec<f64> = [10usize, 100, 1000]
            .iter()
            .map(|&n| {
                let m = 5 * n as u64;
                let finite = model1_marginal_f64(n, m);
                (0..=50)
                    .map(|d| (finite[d] - model1_marginal_limit(t, d as u64)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }
}
