//! Minimum-cost assignment (Kuhn-Munkres with potentials), O(n²m).

use crate::error::{CtdError, Result};

/// Minimum-cost injective assignment over a rectangular `rows × cols`
/// matrix. Returns, for each row, its column (or `None` when there are more
/// rows than columns), and the total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<(Vec<Option<usize>>, f64)> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != m) {
        return Err(CtdError::Invalid("ragged cost matrix".into()));
    }
    if cost.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CtdError::NonFinite("hungarian"));
    }
    if n == 0 || m == 0 {
        return Ok((vec![None; n], 0.0));
    }
    if n > m {
        let t: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
        let (cols, total) = hungarian(&t)?;
        let mut rows = vec![None; n];
        for (j, i) in cols.into_iter().enumerate() {
            if let Some(i) = i {
                rows[i] = Some(j);
            }
        }
        return Ok((rows, total));
    }
    // 1-based potentials formulation; rows are matched into columns
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            rows[p[j] - 1] = Some(j - 1);
        }
    }
    let total = rows
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| cost[i][j]))
        .sum();
    Ok((rows, total))
}

/// Maximum-weight injective assignment.
pub fn hungarian_max(weight: &[Vec<f64>]) -> Result<(Vec<Option<usize>>, f64)> {
    let neg: Vec<Vec<f64>> = weight.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let (a, c) = hungarian(&neg)?;
    Ok((a, -c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let (a, c) = hungarian(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(a, vec![Some(0), Some(1)]);
        assert_eq!(c, 2.0);
        let (a, c) = hungarian(&[vec![0.0, 5.0, 5.0], vec![5.0, 0.0, 5.0], vec![5.0, 5.0, 0.0]]).unwrap();
        assert_eq!(a, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(c, 0.0);
        assert!(hungarian(&[vec![f64::NAN]]).is_err());
    }

    #[test]
    fn rectangular() {
        let (a, c) = hungarian(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0]]).unwrap();
        assert_eq!(c, 3.0);
        assert_eq!(a, vec![Some(1), Some(0)]);
        let (a, c) = hungarian(&[vec![4.0, 2.0], vec![1.0, 0.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(c, 3.0);
        assert_eq!(a.iter().filter(|x| x.is_some()).count(), 2);
    }
}
