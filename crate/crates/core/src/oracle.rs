//! Brute-force references: textbook objective evaluation and exhaustive
//! subset search.
//!
//! Nothing here shares code with the objective module's linear algebra.
//! Determinants come from Gaussian elimination with partial pivoting and
//! eigenvalues from cyclic Jacobi rotations on plain `Vec<Vec<f64>>`.

#![allow(clippy::needless_range_loop)]

use rayon::prelude::*;

use crate::candidate::{CandidateMatrix, SensorSubset};
use crate::error::{Error, Result};
use crate::objective::ObjectiveKind;
use crate::selection::ScoredSubset;

/// Largest number of subsets [`exhaustive_best`] agrees to enumerate.
pub const ENUMERATION_GUARD: u128 = 10_000_000;

type Dense = Vec<Vec<f64>>;

fn measurement_matrix(u: &CandidateMatrix, s: &SensorSubset) -> Dense {
    s.indices().iter().map(|&i| u.row(i).to_vec()).collect()
}

fn transpose(a: &Dense) -> Dense {
    let rows = a.len();
    let cols = a[0].len();
    (0..cols).map(|j| (0..rows).map(|i| a[i][j]).collect()).collect()
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for t in 0..k {
                acc += a[i][t] * b[t][j];
            }
            c[i][j] = acc;
        }
    }
    c
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(mut a: Dense) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for row in col + 1..n {
            let factor = a[row][col] / p;
            if factor != 0.0 {
                for j in col..n {
                    a[row][j] -= factor * a[col][j];
                }
            }
        }
    }
    det
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps.
pub fn symmetric_eigenvalues(mut a: Dense) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let total: f64 = a.iter().flatten().map(|v| v * v).sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Objective of `s` computed the textbook way: form `C`, multiply out
/// `C C^T` or `C^T C`, then take a determinant or the smallest eigenvalue.
pub fn naive_eval(u: &CandidateMatrix, s: &SensorSubset, kind: ObjectiveKind) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySubset);
    }
    let s = SensorSubset::new(s.indices().to_vec(), u.rows())?;
    let c = measurement_matrix(u, &s);
    let ct = transpose(&c);
    let m = if s.len() <= u.cols() { matmul(&c, &ct) } else { matmul(&ct, &c) };
    let value = match kind {
        ObjectiveKind::D => determinant(m),
        ObjectiveKind::E => symmetric_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min),
    };
    Ok(value.max(0.0))
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Advances `comb` to the next combination of `0..n` in lexicographic
/// order. Returns false once the last combination has been passed.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn better(a: &ScoredSubset, b: &ScoredSubset) -> bool {
    a.value > b.value || (a.value == b.value && a.subset.canonical() < b.subset.canonical())
}

/// Globally optimal subset of size `p` by enumerating every combination.
/// Ties go to the lexicographically smallest index set.
pub fn exhaustive_best(u: &CandidateMatrix, p: usize, kind: ObjectiveKind) -> Result<ScoredSubset> {
    let n = u.rows();
    if p == 0 || p > n {
        return Err(Error::InvalidParameter(format!("subset size p={p} must be in 1..={n}")));
    }
    let count = binomial(n, p);
    if count > ENUMERATION_GUARD {
        return Err(Error::GuardExceeded { count, guard: ENUMERATION_GUARD });
    }
    // Partition by the first (smallest) index; each range is enumerated in
    // lexicographic order and the partial winners are reduced in index order.
    let partial: Vec<Option<ScoredSubset>> = (0..=n - p)
        .into_par_iter()
        .map(|first| -> Result<Option<ScoredSubset>> {
            let mut best: Option<ScoredSubset> = None;
            let mut comb: Vec<usize> = (first..first + p).collect();
            loop {
                if comb[0] != first {
                    break;
                }
                let subset = SensorSubset::new(comb.clone(), n)?;
                let value = naive_eval(u, &subset, kind)?;
                let cand = ScoredSubset { subset, value };
                if best.as_ref().is_none_or(|b| better(&cand, b)) {
                    best = Some(cand);
                }
                if !next_combination(&mut comb, n) {
                    break;
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let mut best: Option<ScoredSubset> = None;
    for cand in partial.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    Ok(best.expect("at least one combination"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_elimination_det() {
        assert_eq!(determinant(vec![vec![100.0, 10.0], vec![10.0, 2.0]]), 100.0);
        assert_eq!(determinant(vec![vec![0.0, 1.0], vec![1.0, 0.0]]), -1.0);
        assert_eq!(determinant(vec![vec![1.0, 2.0], vec![2.0, 4.0]]), 0.0);
    }

    #[test]
    fn jacobi_eigenvalues() {
        let mut ev = symmetric_eigenvalues(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        let mut ev = symmetric_eigenvalues(vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        ev.sort_by(f64::total_cmp);
        // Roots of the characteristic polynomial: 3 and 3 +- sqrt(3).
        assert!((ev[0] - (3.0 - 3f64.sqrt())).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
        assert!((ev[2] - (3.0 + 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(10000, 10), 2_743_355_077_591_282_538_231_819_720_749_000);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut c = vec![0, 1];
        let mut all = vec![c.clone()];
        while next_combination(&mut c, 4) {
            all.push(c.clone());
        }
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn hand_checked_instance() {
        let u = CandidateMatrix::from_rows(&[[10.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let best = exhaustive_best(&u, 2, ObjectiveKind::D).unwrap();
        assert_eq!(best.subset.canonical(), vec![0, 1]);
        assert_eq!(best.value, 100.0);
        let sub = |ix: &[usize]| SensorSubset::new(ix.to_vec(), 3).unwrap();
        assert_eq!(naive_eval(&u, &sub(&[0, 2]), ObjectiveKind::D).unwrap(), 100.0);
        assert_eq!(naive_eval(&u, &sub(&[1, 2]), ObjectiveKind::D).unwrap(), 1.0);

        let all = exhaustive_best(&u, 3, ObjectiveKind::E).unwrap();
        assert_eq!(all.subset.canonical(), vec![0, 1, 2]);
        for kind in [ObjectiveKind::D, ObjectiveKind::E] {
            let one = exhaustive_best(&u, 1, kind).unwrap();
            assert_eq!(one.subset.canonical(), vec![0]);
            assert_eq!(one.value, 100.0);
        }
    }

    #[test]
    fn guard_refuses_large_enumerations() {
        let u = CandidateMatrix::from_row_major(60, 1, vec![1.0; 60]).unwrap();
        assert!(matches!(exhaustive_best(&u, 10, ObjectiveKind::D), Err(Error::GuardExceeded { .. })));
        assert!(exhaustive_best(&u, 0, ObjectiveKind::D).is_err());
    }
}
