//! Bipartite pre-processing and maximum-weight matching.
//!
//! Incentive matrices produced by a policy are first masked (repaired
//! targets, targets already claimed by another crew, cargo rules), then
//! resolved into conflict-free crew/target pairs. Matching is
//! maximum-cardinality first, maximum-weight second: crews never idle while
//! a permitted target exists, even when every incentive is negative.

use crate::env::{EnvState, TargetRef};
use crate::error::{Error, Result};

/// Dense crew x target weight matrix; rows are crews, columns are targets
/// (depots first, then the initially damaged nodes, in fixed order).
#[derive(Debug, Clone, PartialEq)]
pub struct IncentiveMatrix {
    n_crews: usize,
    n_targets: usize,
    values: Vec<f64>,
}

impl IncentiveMatrix {
    /// Builds a matrix, rejecting non-finite entries; masked pairs are the
    /// mask's business, never a sentinel value here.
    pub fn new(n_crews: usize, n_targets: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_crews * n_targets {
            return Err(Error::ShapeMismatch {
                got_rows: values.len().checked_div(n_targets).unwrap_or(0),
                got_cols: n_targets,
                want_rows: n_crews,
                want_cols: n_targets,
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "incentive matrix contains non-finite entry {bad}"
            )));
        }
        Ok(Self {
            n_crews,
            n_targets,
            values,
        })
    }

    pub fn from_fn(
        n_crews: usize,
        n_targets: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n_crews * n_targets);
        for c in 0..n_crews {
            for t in 0..n_targets {
                values.push(f(c, t));
            }
        }
        Self::new(n_crews, n_targets, values)
    }

    pub fn n_crews(&self) -> usize {
        self.n_crews
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn get(&self, crew: usize, target: usize) -> f64 {
        self.values[crew * self.n_targets + target]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Boolean permission mask over the same crew x target layout
/// (true = pair may be matched).
#[derive(Debug, Clone, PartialEq)]
pub struct MatchMask {
    n_crews: usize,
    n_targets: usize,
    allowed: Vec<bool>,
}

impl MatchMask {
    pub fn new_all(n_crews: usize, n_targets: usize, allowed: bool) -> Self {
        Self {
            n_crews,
            n_targets,
            allowed: vec![allowed; n_crews * n_targets],
        }
    }

    pub fn from_values(n_crews: usize, n_targets: usize, allowed: Vec<bool>) -> Self {
        assert_eq!(allowed.len(), n_crews * n_targets, "mask shape");
        Self {
            n_crews,
            n_targets,
            allowed,
        }
    }

    pub fn n_crews(&self) -> usize {
        self.n_crews
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn allowed(&self, crew: usize, target: usize) -> bool {
        self.allowed[crew * self.n_targets + target]
    }

    pub fn set(&mut self, crew: usize, target: usize, value: bool) {
        self.allowed[crew * self.n_targets + target] = value;
    }
}

/// Conflict-free crew/target pairs, sorted by crew index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Assignment {
    pub fn total_weight(&self, omega: &IncentiveMatrix) -> f64 {
        self.pairs.iter().map(|&(c, t)| omega.get(c, t)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn target_of(&self, crew: usize) -> Option<usize> {
        self.pairs
            .iter()
            .find(|&&(c, _)| c == crew)
            .map(|&(_, t)| t)
    }
}

/// Builds the permission mask for the current environment state.
///
/// Forbidden pairs:
///   (a) damaged-node columns already claimed by another crew,
///   (b) columns of repaired targets,
///   (c) damaged-node columns for crews carrying nothing,
///   (d) depot columns for crews already at full capacity,
/// plus every column of a crew that still holds an assignment (those rows
/// do not take part in matching at all).
pub fn preprocess_mask(state: &EnvState) -> MatchMask {
    let n_crews = state.n_crews();
    let n_targets = state.n_targets();
    let capacity = state.config().crew_capacity;

    let mut claimed = vec![false; state.n_damaged_initial()];
    for crew in state.crews() {
        if let Some(TargetRef::Damaged(t)) = crew.assignment {
            claimed[t] = true;
        }
    }

    let mut mask = MatchMask::new_all(n_crews, n_targets, false);
    for (c, crew) in state.crews().iter().enumerate() {
        if crew.assignment.is_some() {
            continue;
        }
        for t in 0..n_targets {
            let ok = match state.target(t) {
                TargetRef::Depot(_) => crew.cargo < capacity,
                TargetRef::Damaged(d) => {
                    let ds = &state.damaged_states()[d];
                    ds.damaged && !claimed[d] && crew.cargo > 0
                }
            };
            mask.set(c, t, ok);
        }
    }
    mask
}

/// Big-M padding cost that strictly dominates any achievable weight-sum
/// difference, making the square solver maximize permitted cardinality first.
fn forbidden_cost(n: usize, max_abs: f64) -> f64 {
    2.0 * (n as f64 + 1.0) * (max_abs + 1.0)
}

/// Rectangular assignment problem (rows <= cols), minimizing total cost.
/// Every row is matched; returns the column per row. Deterministic for a
/// fixed input.
fn solve_rectangular_min(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    // Hungarian with row/column potentials and shortest augmenting paths,
    // O(rows^2 * cols). Indexing is 1-based with column 0 as the virtual
    // start.
    debug_assert!(rows <= cols);
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut matched_row = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; rows];
    for j in 1..=cols {
        if matched_row[j] != 0 {
            row_to_col[matched_row[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Among matchings of maximum cardinality restricted to permitted pairs,
/// returns one maximizing the summed incentive. Ties resolve toward the
/// lexicographically smallest (by crew id, then target id) pair set.
pub fn max_weight_matching(omega: &IncentiveMatrix, mask: &MatchMask) -> Assignment {
    assert_eq!(
        omega.n_crews(),
        mask.n_crews(),
        "mask/incentive row mismatch"
    );
    assert_eq!(
        omega.n_targets(),
        mask.n_targets(),
        "mask/incentive column mismatch"
    );
    let rows = omega.n_crews();
    let cols = omega.n_targets();

    let mut max_abs = 0.0f64;
    let mut any_allowed = false;
    for c in 0..rows {
        for t in 0..cols {
            if mask.allowed(c, t) {
                any_allowed = true;
                max_abs = max_abs.max(omega.get(c, t).abs());
            }
        }
    }
    if !any_allowed {
        return Assignment { pairs: Vec::new() };
    }

    // Solve with rows <= cols (transpose when crews outnumber targets);
    // the big-M cost on forbidden cells makes the solver maximize permitted
    // cardinality before weight.
    let big = forbidden_cost(rows.max(cols), max_abs);
    let transpose = rows > cols;
    let (r, c_n) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut cost = vec![big; r * c_n];
    for crew in 0..rows {
        for t in 0..cols {
            if mask.allowed(crew, t) {
                let (i, j) = if transpose { (t, crew) } else { (crew, t) };
                cost[i * c_n + j] = -omega.get(crew, t);
            }
        }
    }

    let row_to_col = solve_rectangular_min(&cost, r, c_n);
    let mut pairs: Vec<(usize, usize)> = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| if transpose { (j, i) } else { (i, j) })
        .filter(|&(crew, t)| crew < rows && t < cols && mask.allowed(crew, t))
        .collect();
    pairs.sort_unstable();
    canonicalize(&mut pairs, omega, mask);

    let assignment = Assignment { pairs };
    debug_assert!(conflict_free(&assignment));
    assignment
}

fn conflict_free(a: &Assignment) -> bool {
    let mut crews: Vec<usize> = a.pairs.iter().map(|&(c, _)| c).collect();
    let mut targets: Vec<usize> = a.pairs.iter().map(|&(_, t)| t).collect();
    crews.sort_unstable();
    crews.dedup();
    targets.sort_unstable();
    targets.dedup();
    crews.len() == a.pairs.len() && targets.len() == a.pairs.len()
}

/// Weight-preserving rewrites toward the lexicographically smallest pair
/// set: swap targets between crew pairs, or move a crew to a free smaller
/// column, whenever the total weight is exactly unchanged. Each rewrite
/// strictly decreases the target vector ordered by crew id, so this
/// terminates.
fn canonicalize(pairs: &mut [(usize, usize)], omega: &IncentiveMatrix, mask: &MatchMask) {
    let cols = omega.n_targets();
    loop {
        let mut changed = false;
        let mut used = vec![false; cols];
        for &(_, t) in pairs.iter() {
            used[t] = true;
        }
        for pair in pairs.iter_mut() {
            let (c, t) = *pair;
            for t2 in 0..t {
                if !used[t2] && mask.allowed(c, t2) && omega.get(c, t2) == omega.get(c, t) {
                    used[t] = false;
                    used[t2] = true;
                    *pair = (c, t2);
                    changed = true;
                    break;
                }
            }
        }
        for i in 0..pairs.len() {
            for j in (i + 1)..pairs.len() {
                let (ci, ti) = pairs[i];
                let (cj, tj) = pairs[j];
                if tj < ti
                    && mask.allowed(ci, tj)
                    && mask.allowed(cj, ti)
                    && omega.get(ci, tj) + omega.get(cj, ti)
                        == omega.get(ci, ti) + omega.get(cj, tj)
                {
                    pairs[i] = (ci, tj);
                    pairs[j] = (cj, ti);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}
