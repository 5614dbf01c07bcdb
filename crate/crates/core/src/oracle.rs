//! Brute-force verification on small instances: exact transition matrices
//! over the enumerated state space, stationarity, detailed balance,
//! irreducibility and period.

use std::collections::VecDeque;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{transition_prob, ModelKind};
use crate::exact_dist::{
    model1_marginal, model1_stationary_prob, model2_marginal, model2_stationary_prob,
    rational_to_f64,
};
use crate::graph::{Graph, Vertex};
use crate::state_space::{enumerate, rank, MoneyConfig, StateError};

/// State spaces up to this size are solved by exact elimination.
pub const EXACT_SOLVE_LIMIT: usize = 200;

/// Convergence tolerance of the lazy power iteration (L1 change per sweep).
pub const POWER_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("distribution has {dist} entries but the matrix has {matrix} states")]
    DimensionMismatch { dist: usize, matrix: usize },
    #[error("chain is not irreducible")]
    NotIrreducible,
}

/// Sparse stochastic matrix over states in rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    /// Row `i` lists `(column, probability)` with strictly increasing columns.
    rows: Vec<Vec<(usize, BigRational)>>,
}

impl TransitionMatrix {
    /// Builds a matrix from dense rows, dropping zeros. Used for hand-made
    /// test chains.
    pub fn from_dense(dense: &[Vec<BigRational>]) -> Self {
        let rows = dense
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(j, p)| (j, p.clone()))
                    .collect()
            })
            .collect();
        TransitionMatrix { rows }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, BigRational)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> BigRational {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |(c, _)| *c)
            .map(|k| row[k].1.clone())
            .unwrap_or_else(|_| BigRational::zero())
    }

    pub fn row_sum(&self, i: usize) -> BigRational {
        self.rows[i].iter().map(|(_, p)| p).sum()
    }

    pub fn is_stochastic(&self) -> bool {
        (0..self.size()).all(|i| {
            self.row_sum(i).is_one()
                && self.rows[i]
                    .iter()
                    .all(|(_, p)| !p.is_negative() && *p <= BigRational::one())
        })
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(j, _)| *j).collect())
            .collect()
    }

    fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.size()];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, _) in row {
                pred[*j].push(i);
            }
        }
        pred
    }
}

/// Exact transition matrix of `model` on `g` with `m` dollars.
pub fn build_matrix(
    model: ModelKind,
    g: &Graph,
    m: u64,
    cap: u64,
) -> Result<(Vec<MoneyConfig>, TransitionMatrix), OracleError> {
    let states: Vec<MoneyConfig> = enumerate(g.vertex_count(), m, cap)?.collect();
    let rows = states
        .par_iter()
        .map(|from| {
            // Candidates: staying put, or one dollar along an oriented edge.
            let mut targets = vec![from.clone()];
            for &(u, v) in g.edges() {
                for (x, y) in [(u, v), (v, u)] {
                    if from.get(x) > 0 {
                        targets.push(from.apply_move(x, y));
                    }
                }
            }
            let mut row: Vec<(usize, BigRational)> = targets
                .into_iter()
                .map(|to| {
                    let j = rank(&to).to_usize().expect("enumerated space fits usize");
                    (j, to)
                })
                .collect::<std::collections::BTreeMap<_, _>>()
                .into_iter()
                .map(|(j, to)| {
                    let p = transition_prob(model, g, from, &to).expect("same graph and total");
                    (j, p)
                })
                .collect();
            row.retain(|(_, p)| !p.is_zero());
            row
        })
        .collect();
    Ok((states, TransitionMatrix { rows }))
}

/// Largest `|π(i) p(i,j) - π(j) p(j,i)|` over all ordered pairs. Zero
/// certifies reversibility of `p` with respect to `pi`.
pub fn check_detailed_balance(
    p: &TransitionMatrix,
    pi: &[BigRational],
) -> Result<BigRational, OracleError> {
    if pi.len() != p.size() {
        return Err(OracleError::DimensionMismatch {
            dist: pi.len(),
            matrix: p.size(),
        });
    }
    // Pairs with both entries zero contribute nothing; every other pair
    // shows up in at least one row.
    let worst = (0..p.size())
        .into_par_iter()
        .map(|i| {
            p.row(i)
                .iter()
                .map(|(j, pij)| (&pi[i] * pij - &pi[*j] * p.get(*j, i)).abs())
                .max()
                .unwrap_or_else(BigRational::zero)
        })
        .max()
        .unwrap_or_else(BigRational::zero);
    Ok(worst)
}

/// True iff every state reaches every other through nonzero entries.
pub fn check_irreducible(p: &TransitionMatrix) -> bool {
    if p.size() == 0 {
        return false;
    }
    let reaches_all = |adj: Vec<Vec<usize>>| {
        let mut seen = vec![false; adj.len()];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == adj.len()
    };
    reaches_all(p.successors()) && reaches_all(p.predecessors())
}

/// Period of an irreducible chain: gcd of `level(i) + 1 - level(j)` over
/// all nonzero entries `(i, j)`, with BFS levels from state 0.
pub fn period(p: &TransitionMatrix) -> Result<u64, OracleError> {
    if !check_irreducible(p) {
        return Err(OracleError::NotIrreducible);
    }
    let succ = p.successors();
    let mut level = vec![u64::MAX; succ.len()];
    level[0] = 0;
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for &j in &succ[i] {
            if level[j] == u64::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let mut g = 0u64;
    for (i, row) in succ.iter().enumerate() {
        for &j in row {
            let diff = (level[i] as i64 + 1 - level[j] as i64).unsigned_abs();
            g = g.gcd(&diff);
        }
    }
    Ok(g)
}

/// A probability vector over states in rank order.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

impl Distribution {
    pub fn len(&self) -> usize {
        match self {
            Distribution::Exact(v) => v.len(),
            Distribution::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_f64(&self, i: usize) -> f64 {
        match self {
            Distribution::Exact(v) => rational_to_f64(&v[i]),
            Distribution::Float(v) => v[i],
        }
    }

    pub fn as_exact(&self) -> Option<&[BigRational]> {
        match self {
            Distribution::Exact(v) => Some(v),
            Distribution::Float(_) => None,
        }
    }

    /// Largest entrywise gap to an exact reference, as a float.
    pub fn max_abs_diff(&self, reference: &[BigRational]) -> f64 {
        match self {
            Distribution::Exact(v) => v
                .iter()
                .zip(reference)
                .map(|(a, b)| rational_to_f64(&(a - b).abs()))
                .fold(0.0, f64::max),
            Distribution::Float(v) => v
                .iter()
                .zip(reference)
                .map(|(a, b)| (a - rational_to_f64(b)).abs())
                .fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Exact elimination up to [`EXACT_SOLVE_LIMIT`] states, iteration above.
    Auto,
    Exact,
    PowerIteration,
}

/// The unique stationary distribution of an irreducible chain.
pub fn solve_stationary(p: &TransitionMatrix) -> Result<Distribution, OracleError> {
    solve_stationary_with(p, SolveMethod::Auto)
}

pub fn solve_stationary_with(
    p: &TransitionMatrix,
    method: SolveMethod,
) -> Result<Distribution, OracleError> {
    if !check_irreducible(p) {
        return Err(OracleError::NotIrreducible);
    }
    let exact = match method {
        SolveMethod::Auto => p.size() <= EXACT_SOLVE_LIMIT,
        SolveMethod::Exact => true,
        SolveMethod::PowerIteration => false,
    };
    Ok(if exact {
        Distribution::Exact(solve_exact(p))
    } else {
        Distribution::Float(solve_power(p))
    })
}

/// Solves `π (P - I) = 0`, `Σ π = 1` by Gauss–Jordan elimination over the
/// rationals. The balance equation of the last state is replaced by the
/// normalization, which is valid because the system has rank `n - 1`.
fn solve_exact(p: &TransitionMatrix) -> Vec<BigRational> {
    let n = p.size();
    // Row r of the system is the balance equation of state r:
    // Σ_i π(i) (P(i, r) - δ(i, r)) = 0.
    let mut a = vec![vec![BigRational::zero(); n + 1]; n];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for (j, pij) in p.row(i) {
            a[*j][i] += pij;
        }
        a[i][i] -= BigRational::one();
    }
    a[n - 1] = vec![BigRational::one(); n + 1];

    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .expect("irreducible chains give a nonsingular system");
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for v in a[col][col..].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (v, pv) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *v -= &factor * pv;
            }
        }
    }
    a.into_iter().map(|row| row[n].clone()).collect()
}

/// Power iteration on the lazy chain `(P + I) / 2`, which has the same
/// stationary vector and is aperiodic even when `P` is not.
fn solve_power(p: &TransitionMatrix) -> Vec<f64> {
    let n = p.size();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            p.row(i)
                .iter()
                .map(|(j, q)| (*j, rational_to_f64(q)))
                .collect()
        })
        .collect();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..10_000_000 {
        next.copy_from_slice(&pi);
        next.iter_mut().for_each(|v| *v *= 0.5);
        for (i, row) in rows.iter().enumerate() {
            let mass = 0.5 * pi[i];
            for &(j, q) in row {
                next[j] += mass * q;
            }
        }
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= sum);
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if change < POWER_TOLERANCE {
            break;
        }
    }
    pi
}

/// `Σ π(c)` over states `c` (rank order) with `c[x] = d`.
pub fn marginal_from_dist(
    pi: &[BigRational],
    n: usize,
    m: u64,
    x: Vertex,
    d: u64,
) -> Result<BigRational, OracleError> {
    let states = enumerate(n, m, u64::MAX)?;
    if states.len() != pi.len() {
        return Err(OracleError::DimensionMismatch {
            dist: pi.len(),
            matrix: states.len(),
        });
    }
    Ok(states
        .zip(pi)
        .filter(|(c, _)| u64::from(c.get(x)) == d)
        .map(|(_, p)| p)
        .sum())
}

/// Closed-form stationary law of `model` over `states`.
pub fn closed_form_stationary(
    model: ModelKind,
    g: &Graph,
    states: &[MoneyConfig],
) -> Vec<BigRational> {
    let n = g.vertex_count();
    states
        .iter()
        .map(|c| match model {
            ModelKind::EdgeUniform => model1_stationary_prob(n, c.total(), c),
            ModelKind::DollarUniform => model2_stationary_prob(g, c),
        })
        .collect()
}

fn closed_form_marginal(model: ModelKind, g: &Graph, x: Vertex, m: u64, d: u64) -> BigRational {
    match model {
        ModelKind::EdgeUniform => model1_marginal(g.vertex_count(), m, d),
        ModelKind::DollarUniform => model2_marginal(g, x, m, d),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Instance {
    pub model: u8,
    pub graph: String,
    pub n: usize,
    pub edges: usize,
    pub m: u64,
    pub states: usize,
}

/// Result of checking one instance against the closed forms.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub instance: Instance,
    pub rows_stochastic: bool,
    pub irreducible: bool,
    pub period: Option<u64>,
    pub exact_solve: bool,
    pub max_db_violation: f64,
    pub max_db_violation_exact: String,
    pub max_stationary_error: f64,
    pub max_marginal_error: f64,
    pub max_marginal_error_exact: Option<String>,
    pub passed: bool,
}

/// Runs every check for `model` on `g` with `m` dollars.
pub fn verify(
    model: ModelKind,
    g: &Graph,
    graph_label: &str,
    m: u64,
    cap: u64,
) -> Result<OracleReport, OracleError> {
    verify_with(model, g, graph_label, m, cap, SolveMethod::Auto)
}

pub fn verify_with(
    model: ModelKind,
    g: &Graph,
    graph_label: &str,
    m: u64,
    cap: u64,
    method: SolveMethod,
) -> Result<OracleReport, OracleError> {
    let n = g.vertex_count();
    let (states, p) = build_matrix(model, g, m, cap)?;
    let rows_stochastic = p.is_stochastic();
    let irreducible = check_irreducible(&p);
    let period = period(&p).ok();

    let closed = closed_form_stationary(model, g, &states);
    let db = check_detailed_balance(&p, &closed)?;

    let (exact_solve, stationary_error, marginal_error, marginal_exact) = if irreducible {
        let solved = solve_stationary_with(&p, method)?;
        let stationary_error = solved.max_abs_diff(&closed);
        let mut worst_exact = BigRational::zero();
        let mut worst = 0.0f64;
        for x in 0..n as Vertex {
            for d in 0..=m {
                let reference = closed_form_marginal(model, g, x, m, d);
                match &solved {
                    Distribution::Exact(pi) => {
                        let gap = (marginal_from_dist(pi, n, m, x, d)? - &reference).abs();
                        worst = worst.max(rational_to_f64(&gap));
                        worst_exact = worst_exact.max(gap);
                    }
                    Distribution::Float(pi) => {
                        let est: f64 = states
                            .iter()
                            .zip(pi)
                            .filter(|(c, _)| u64::from(c.get(x)) == d)
                            .map(|(_, v)| v)
                            .sum();
                        worst = worst.max((est - rational_to_f64(&reference)).abs());
                    }
                }
            }
        }
        let exact = solved.as_exact().is_some();
        (
            exact,
            stationary_error,
            worst,
            exact.then(|| worst_exact.to_string()),
        )
    } else {
        (false, f64::NAN, f64::NAN, None)
    };

    let tolerance = if exact_solve { 0.0 } else { 1e-12 };
    let passed = rows_stochastic
        && irreducible
        && db.is_zero()
        && stationary_error <= tolerance
        && marginal_error <= tolerance;

    Ok(OracleReport {
        instance: Instance {
            model: model.number(),
            graph: graph_label.to_string(),
            n,
            edges: g.edge_count(),
            m,
            states: states.len(),
        },
        rows_stochastic,
        irreducible,
        period,
        exact_solve,
        max_db_violation: rational_to_f64(&db),
        max_db_violation_exact: db.to_string(),
        max_stationary_error: stationary_error,
        max_marginal_error: marginal_error,
        max_marginal_error_exact: marginal_exact,
        passed,
    })
}
