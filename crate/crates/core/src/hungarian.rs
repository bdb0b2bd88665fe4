//! Optimal assignment (Hungarian method with row/column potentials), O(n³).

/// Minimum-cost perfect matching on a square cost matrix. Returns, for each
/// row, the column assigned to it.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual start column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r - 1][col - 1] - u[r] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}

/// Maximum-weight matching on a rectangular weight matrix; the smaller side
/// is padded with zero-weight dummies. Returns the total matched weight and
/// the matched `(row, col)` pairs between real rows and columns.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let size = rows.max(cols);
    if size == 0 {
        return (0.0, Vec::new());
    }
    let max = weights.iter().flatten().copied().fold(0.0f64, f64::max);
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|r| {
            (0..size)
                .map(|c| {
                    let w = if r < rows && c < cols { weights[r][c] } else { 0.0 };
                    max - w
                })
                .collect()
        })
        .collect();
    let assignment = min_cost_assignment(&cost);
    let pairs: Vec<(usize, usize)> = assignment
        .into_iter()
        .enumerate()
        .filter(|&(r, c)| r < rows && c < cols)
        .collect();
    let total = pairs.iter().map(|&(r, c)| weights[r][c]).sum();
    (total, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_three_by_three() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = min_cost_assignment(&cost);
        let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn rectangular_matching() {
        let w = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let (total, pairs) = max_weight_matching(&w);
        assert_eq!(total, 2.0);
        assert_eq!(pairs.len(), 2);
    }

    #[test]
    fn empty() {
        assert!(min_cost_assignment(&[]).is_empty());
        assert_eq!(max_weight_matching(&[]).0, 0.0);
    }
}
