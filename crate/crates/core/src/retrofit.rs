//! Graph retrofitting of drug vectors and the magnitude-preserving rescale.
//!
//! The solver sweeps terms in sorted order and replaces each vector that has
//! neighbors by
//!
//! ```text
//! q_i <- (a * qhat_i + w_i * sum_{j in N(i)} q_j) / (a + w_i * |N(i)|)
//! ```
//!
//! with `a = alpha` and `w_i = beta / |N(i)|` under inverse-degree weighting
//! (so the denominator is `alpha + beta = 1`), or `w_i = beta` under uniform
//! weighting. Each replacement is the exact minimizer, in `q_i`, of
//!
//! ```text
//! Psi = sum_i [ a_i ||q_i - qhat_i||^2 + (beta / 2) sum_{j in N(i)} ||q_i - q_j||^2 ]
//! ```
//!
//! where `a_i = alpha * |N(i)|` (inverse degree) or `alpha` (uniform), so the
//! sweeps are block coordinate descent and never increase `Psi`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::embedding::VectorTable;
use crate::error::{Error, Result};
use crate::lexicon::LexiconGraph;
use crate::scalar::{norm, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NeighborWeighting {
    /// `beta_ij = beta / |N(i)|`.
    #[default]
    InverseDegree,
    /// `beta_ij = beta` for every edge.
    Uniform,
}

impl FromStr for NeighborWeighting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "inverse_degree" | "inverse-degree" => Ok(NeighborWeighting::InverseDegree),
            "uniform" => Ok(NeighborWeighting::Uniform),
            other => Err(format!("unknown weighting `{other}` (inverse_degree or uniform)")),
        }
    }
}

impl fmt::Display for NeighborWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeighborWeighting::InverseDegree => "inverse_degree",
            NeighborWeighting::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrofitConfig<T> {
    pub alpha: T,
    pub beta: T,
    /// Maximum number of sweeps.
    pub iterations: usize,
    /// Early stop once the largest row change of a sweep falls below this.
    pub tolerance: T,
    /// Scale rows to unit norm before iterating.
    pub normalize_first: bool,
    /// Restore each row to the norm of its raw input afterwards.
    pub rescale_after: bool,
    pub weighting: NeighborWeighting,
}

impl<T: Real> RetrofitConfig<T> {
    /// `alpha = 1 - beta`, ten sweeps, `1e-6` early stop, no normalization.
    pub fn with_beta(beta: T) -> Self {
        RetrofitConfig {
            alpha: T::one() - beta,
            beta,
            iterations: 10,
            tolerance: T::of(1e-6),
            normalize_first: false,
            rescale_after: false,
            weighting: NeighborWeighting::InverseDegree,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = T::zero()..=T::one();
        if !unit.contains(&self.alpha) || !unit.contains(&self.beta) {
            return Err(Error::Config(format!(
                "alpha ({}) and beta ({}) must lie in [0, 1]",
                self.alpha, self.beta
            )));
        }
        if (self.alpha + self.beta - T::one()).abs() > T::of(1e-9) {
            return Err(Error::Config(format!(
                "alpha + beta must equal 1, got {} + {}",
                self.alpha, self.beta
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("retrofitting needs at least one iteration".into()));
        }
        if self.tolerance.is_nan() || self.tolerance < T::zero() {
            return Err(Error::Config("tolerance must be non-negative".into()));
        }
        Ok(())
    }

    fn edge_weight(&self, degree: usize) -> T {
        match self.weighting {
            NeighborWeighting::InverseDegree => self.beta / T::of(degree as f64),
            NeighborWeighting::Uniform => self.beta,
        }
    }

    fn anchor_weight(&self, degree: usize) -> T {
        match self.weighting {
            NeighborWeighting::InverseDegree => self.alpha * T::of(degree as f64),
            NeighborWeighting::Uniform => self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrofitResult<T> {
    pub drug_vectors: VectorTable<T>,
    pub updated_terms: usize,
    pub unchanged_terms: usize,
    /// Graph terms with no row in the vector table.
    pub ignored_graph_terms: usize,
    /// Largest Euclidean row change of each sweep.
    pub max_change: Vec<T>,
    /// Rows the rescale step could not scale (zero retrofitted norm).
    pub degenerate_rows: usize,
}

impl<T> RetrofitResult<T> {
    pub fn sweeps(&self) -> usize {
        self.max_change.len()
    }
}

/// Adjacency restricted to rows of the table, in table ids.
struct TableGraph {
    neighbors: Vec<Vec<usize>>,
    /// Row ids in sorted term order.
    order: Vec<usize>,
    ignored: usize,
}

impl TableGraph {
    fn new<T: Real>(table: &VectorTable<T>, graph: &LexiconGraph) -> Self {
        let mut neighbors = vec![Vec::new(); table.len()];
        let mut ignored = 0;
        for term in graph.terms() {
            match table.id(term) {
                Some(i) => neighbors[i] = graph.neighbors(term).filter_map(|n| table.id(n)).collect(),
                None => ignored += 1,
            }
        }
        let mut order: Vec<usize> = (0..table.len()).collect();
        order.sort_by(|&a, &b| table.term(a).cmp(table.term(b)));
        TableGraph {
            neighbors,
            order,
            ignored,
        }
    }
}

fn anchors<T: Real>(original: &VectorTable<T>, config: &RetrofitConfig<T>) -> VectorTable<T> {
    if config.normalize_first {
        original.normalized()
    } else {
        original.clone()
    }
}

/// Retrofits every row of `drug_vectors` to its lexicon neighbors.
pub fn retrofit<T: Real>(
    drug_vectors: &VectorTable<T>,
    graph: &LexiconGraph,
    config: &RetrofitConfig<T>,
) -> Result<RetrofitResult<T>> {
    retrofit_with_frozen(drug_vectors, graph, config, &HashSet::new())
}

/// As [`retrofit`], holding the rows named in `frozen` fixed: they act as
/// neighbors but are never updated.
pub fn retrofit_with_frozen<T: Real>(
    drug_vectors: &VectorTable<T>,
    graph: &LexiconGraph,
    config: &RetrofitConfig<T>,
    frozen: &HashSet<&str>,
) -> Result<RetrofitResult<T>> {
    config.validate()?;
    let tg = TableGraph::new(drug_vectors, graph);
    let anchor = anchors(drug_vectors, config);
    let mut current = anchor.clone();
    let dim = drug_vectors.dim();
    let updatable: Vec<usize> = tg
        .order
        .iter()
        .copied()
        .filter(|&i| !tg.neighbors[i].is_empty() && !frozen.contains(drug_vectors.term(i)))
        .collect();

    let mut next = vec![T::zero(); dim];
    let mut max_change = Vec::new();
    if !updatable.is_empty() {
        for _ in 0..config.iterations {
            let mut sweep_max = T::zero();
            for &i in &updatable {
                let nbrs = &tg.neighbors[i];
                let w = config.edge_weight(nbrs.len());
                let denom = config.alpha + w * T::of(nbrs.len() as f64);
                next.copy_from_slice(anchor.row(i));
                next.iter_mut().for_each(|v| *v = *v * config.alpha);
                for &j in nbrs {
                    for (acc, &q) in next.iter_mut().zip(current.row(j)) {
                        *acc = *acc + w * q;
                    }
                }
                let row = current.row_mut(i);
                let mut change = T::zero();
                for (r, &v) in row.iter_mut().zip(&next) {
                    let updated = v / denom;
                    change = change + (updated - *r) * (updated - *r);
                    *r = updated;
                }
                sweep_max = sweep_max.max(change.sqrt());
            }
            max_change.push(sweep_max);
            if sweep_max < config.tolerance {
                break;
            }
        }
    }

    let updated_terms = updatable.len();
    let mut degenerate_rows = 0;
    if config.rescale_after {
        let moved: HashSet<usize> = updatable.iter().copied().collect();
        for i in 0..current.len() {
            if !moved.contains(&i) {
                current.row_mut(i).copy_from_slice(drug_vectors.row(i));
            }
        }
        let rescaled = rescale(drug_vectors, &current)?;
        degenerate_rows = rescaled.degenerate_rows;
        current = rescaled.table;
    }
    Ok(RetrofitResult {
        drug_vectors: current,
        updated_terms,
        unchanged_terms: drug_vectors.len() - updated_terms,
        ignored_graph_terms: tg.ignored,
        max_change,
        degenerate_rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled<T> {
    pub table: VectorTable<T>,
    pub degenerate_rows: usize,
}

/// Gives each retrofitted row the Euclidean norm of its original row while
/// keeping the retrofitted direction. Zero-norm retrofitted rows are
/// replaced by the original row and counted as degenerate.
pub fn rescale<T: Real>(original: &VectorTable<T>, retrofitted: &VectorTable<T>) -> Result<Rescaled<T>> {
    if original.terms() != retrofitted.terms() || original.dim() != retrofitted.dim() {
        return Err(Error::Config("rescale needs tables with identical keys and dimension".into()));
    }
    let mut table = retrofitted.clone();
    let mut degenerate_rows = 0;
    for i in 0..table.len() {
        let target = norm(original.row(i));
        let row = table.row_mut(i);
        let current = norm(row);
        if current == T::zero() {
            row.copy_from_slice(original.row(i));
            degenerate_rows += 1;
            continue;
        }
        let factor = target / current;
        row.iter_mut().for_each(|v| *v = *v * factor);
    }
    Ok(Rescaled {
        table,
        degenerate_rows,
    })
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// Objective minimized by the solver, evaluated for `current` against the
/// anchors derived from `original` (normalized when `normalize_first`).
/// Anchor weight `alpha * |N(i)|` (inverse degree) or `alpha` (uniform);
/// each unordered edge carries total weight `beta`.
pub fn objective_value<T: Real>(
    current: &VectorTable<T>,
    original: &VectorTable<T>,
    graph: &LexiconGraph,
    config: &RetrofitConfig<T>,
) -> T {
    let tg = TableGraph::new(original, graph);
    let anchor = anchors(original, config);
    let half_beta = config.beta / T::of(2.0);
    let mut total = T::zero();
    for i in 0..original.len() {
        let nbrs = &tg.neighbors[i];
        if nbrs.is_empty() {
            continue;
        }
        total = total + config.anchor_weight(nbrs.len()) * sq_dist(current.row(i), anchor.row(i));
        for &j in nbrs {
            total = total + half_beta * sq_dist(current.row(i), current.row(j));
        }
    }
    total
}

/// Largest Euclidean distance between a row and its update computed from
/// the current iterate; zero at the solver's fixed point.
pub fn fixed_point_residual<T: Real>(
    current: &VectorTable<T>,
    original: &VectorTable<T>,
    graph: &LexiconGraph,
    config: &RetrofitConfig<T>,
) -> T {
    let tg = TableGraph::new(original, graph);
    let anchor = anchors(original, config);
    let mut worst = T::zero();
    for i in 0..original.len() {
        let nbrs = &tg.neighbors[i];
        if nbrs.is_empty() {
            continue;
        }
        let w = config.edge_weight(nbrs.len());
        let denom = config.alpha + w * T::of(nbrs.len() as f64);
        let mut err = T::zero();
        for k in 0..original.dim() {
            let mut v = config.alpha * anchor.row(i)[k];
            for &j in nbrs {
                v = v + w * current.row(j)[k];
            }
            let d = v / denom - current.row(i)[k];
            err = err + d * d;
        }
        worst = worst.max(err.sqrt());
    }
    worst
}
