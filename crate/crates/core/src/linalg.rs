//! Dense Gaussian elimination with partial pivoting.
//!
//! The systems solved here are at most 9x9, so a plain row-major solver is
//! all that is needed.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: {rows}x{cols} matrix against rhs of length {rhs}")]
    Dimension { rows: usize, cols: usize, rhs: usize },
}

/// Solve `a x = b` for square `a` given as rows.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(LinalgError::Dimension {
            rows: a.len(),
            cols: a.first().map_or(0, Vec::len),
            rhs: n,
        });
    }
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let tiny = scale * 1e-14;

    // augmented [a | b]
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("non-empty range");
        let pivot = m[pivot_row][col];
        if pivot.abs() <= tiny || pivot == 0.0 {
            return Err(LinalgError::Singular { column: col, pivot });
        }
        m.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = m[row][col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][n] - tail) / m[row][row];
    }
    Ok(x)
}

/// `max_i |(a x - b)_i|`
pub fn residual_inf(a: &[Vec<f64>], x: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let lhs: f64 = row.iter().zip(x).map(|(p, q)| p * q).sum();
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_pivoting() {
        let a = vec![vec![0.0, 1.0], vec![1.0, 1.0]];
        let x = solve(&a, &[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn three_by_three() {
        let a = vec![
            vec![2.0, 1.0, -1.0],
            vec![-3.0, -1.0, 2.0],
            vec![-2.0, 1.0, 2.0],
        ];
        let b = [8.0, -11.0, -3.0];
        let x = solve(&a, &b).unwrap();
        for (got, want) in x.iter().zip([2.0, 3.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(residual_inf(&a, &x, &b) < 1e-12);
    }

    #[test]
    fn singular_and_mismatched() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(solve(&a, &[1.0, 2.0]), Err(LinalgError::Singular { .. })));
        assert!(matches!(solve(&a, &[1.0]), Err(LinalgError::Dimension { .. })));
    }
}
