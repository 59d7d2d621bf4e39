//! Minimum-cost bipartite assignment (Hungarian method with potentials).
//!
//! Runs in O(n²m) for an `n × m` matrix with `n ≤ m`; taller matrices are
//! solved on their transpose. Infeasible entries are replaced by a penalty
//! larger than any feasible total, so the solver first maximizes the number
//! of feasible pairs and then minimizes their cost. Pairs that land on an
//! infeasible entry are reported as unmatched.

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
    feasible: Vec<bool>,
}

impl CostMatrix {
    /// Row-major costs, all entries feasible.
    pub fn new(rows: usize, cols: usize, costs: Vec<f64>) -> Self {
        assert_eq!(costs.len(), rows * cols, "cost matrix shape");
        Self {
            rows,
            cols,
            feasible: vec![true; costs.len()],
            costs,
        }
    }

    pub fn with_mask(rows: usize, cols: usize, costs: Vec<f64>, feasible: Vec<bool>) -> Self {
        assert_eq!(costs.len(), rows * cols, "cost matrix shape");
        assert_eq!(feasible.len(), rows * cols, "feasibility mask shape");
        Self {
            rows,
            cols,
            costs,
            feasible,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let costs: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, costs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.costs[row * self.cols + col]
    }

    pub fn is_feasible(&self, row: usize, col: usize) -> bool {
        self.feasible[row * self.cols + col]
    }
}

/// Result of solving a [`CostMatrix`]; rows are detections, columns tracklets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, cost: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(r, c)| cost.get(r, c)).sum()
    }
}

pub fn hungarian(cost: &CostMatrix) -> Assignment {
    let (n, m) = (cost.rows, cost.cols);
    if n == 0 || m == 0 {
        return Assignment {
            matches: Vec::new(),
            unmatched_rows: (0..n).collect(),
            unmatched_cols: (0..m).collect(),
        };
    }

    let mut span = 0.0f64;
    let mut any_feasible = false;
    for (c, ok) in cost.costs.iter().zip(&cost.feasible) {
        if *ok {
            assert!(c.is_finite(), "feasible cost must be finite");
            span = span.max(c.abs());
            any_feasible = true;
        }
    }
    if !any_feasible {
        return Assignment {
            matches: Vec::new(),
            unmatched_rows: (0..n).collect(),
            unmatched_cols: (0..m).collect(),
        };
    }
    let penalty = (2.0 * span + 1.0) * (n.min(m) as f64 + 1.0);

    let transpose = n > m;
    let (r, c) = if transpose { (m, n) } else { (n, m) };
    let at = |i: usize, j: usize| -> f64 {
        let (row, col) = if transpose { (j, i) } else { (i, j) };
        let k = row * m + col;
        if cost.feasible[k] {
            cost.costs[k]
        } else {
            penalty
        }
    };

    let pairs = solve_rectangular(r, c, at);
    let mut matches: Vec<(usize, usize)> = pairs
        .into_iter()
        .map(|(i, j)| if transpose { (j, i) } else { (i, j) })
        .filter(|&(row, col)| cost.is_feasible(row, col))
        .collect();
    matches.sort_unstable();

    let mut row_used = vec![false; n];
    let mut col_used = vec![false; m];
    for &(row, col) in &matches {
        row_used[row] = true;
        col_used[col] = true;
    }
    Assignment {
        unmatched_rows: (0..n).filter(|&i| !row_used[i]).collect(),
        unmatched_cols: (0..m).filter(|&j| !col_used[j]).collect(),
        matches,
    }
}

/// Assigns every one of `n` rows to a distinct column of `m ≥ n`.
fn solve_rectangular(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    debug_assert!(n <= m);
    // 1-based potentials; column 0 is the virtual root of each search
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| (owner[j] - 1, j - 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry() {
        let a = hungarian(&CostMatrix::from_rows(&[vec![3.0]]));
        assert_eq!(a.matches, vec![(0, 0)]);
    }

    #[test]
    fn two_by_two() {
        let m = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let a = hungarian(&m);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
        assert_eq!(a.total_cost(&m), 4.0);
    }

    #[test]
    fn tall_and_wide() {
        let wide = CostMatrix::from_rows(&[vec![5.0, 1.0, 3.0], vec![1.0, 5.0, 3.0]]);
        let a = hungarian(&wide);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
        assert_eq!(a.unmatched_cols, vec![2]);

        let tall = CostMatrix::from_rows(&[vec![5.0, 1.0], vec![1.0, 5.0], vec![0.5, 0.5]]);
        let a = hungarian(&tall);
        assert_eq!(a.total_cost(&tall), 1.5);
        assert_eq!(a.matches.len(), 2);
        assert_eq!(a.unmatched_rows.len(), 1);
    }

    #[test]
    fn infeasible_pairs_are_dropped() {
        let m = CostMatrix::with_mask(
            2,
            2,
            vec![1.0, 1e5, 1e5, 1e5],
            vec![true, false, false, false],
        );
        let a = hungarian(&m);
        assert_eq!(a.matches, vec![(0, 0)]);
        assert_eq!(a.unmatched_rows, vec![1]);
        assert_eq!(a.unmatched_cols, vec![1]);
    }

    #[test]
    fn prefers_more_feasible_pairs_over_lower_cost() {
        // (0,0) alone costs 0, but (0,1)+(1,0) covers both rows
        let m = CostMatrix::with_mask(
            2,
            2,
            vec![0.0, 10.0, 10.0, 0.0],
            vec![true, true, true, false],
        );
        let a = hungarian(&m);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn all_infeasible_is_empty() {
        let m = CostMatrix::with_mask(2, 3, vec![0.0; 6], vec![false; 6]);
        let a = hungarian(&m);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_rows, vec![0, 1]);
        assert_eq!(a.unmatched_cols, vec![0, 1, 2]);
    }

    #[test]
    fn empty_matrix() {
        let a = hungarian(&CostMatrix::new(0, 3, vec![]));
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_cols, vec![0, 1, 2]);
    }
}
