//! D- and E-optimality objectives.
//!
//! For a subset of `p` rows forming the measurement matrix `C` (`p x r`):
//!
//! * `f_D = det(C C^T)` when `p <= r`, `det(C^T C)` otherwise;
//! * `f_E = lambda_min(C C^T)` when `p <= r`, `lambda_min(C^T C)` otherwise.
//!
//! [`eval_direct`] builds the relevant Gram matrix from scratch on every
//! call. [`GramState`] caches `C^T C`, `C C^T` and a Cholesky factor so that
//! [`eval_extended`] can score `S + {i}` in `O(r^2)` for the D criterion:
//! the matrix determinant lemma `det(A + u u^T) = det(A) (1 + u^T A^-1 u)`
//! above `r` rows, and the bordered-Gram identity
//! `det(G') = det(G) (u^T u - g^T G^-1 g)` with `g = C u` below.
//! The E criterion has no cheap rank-one eigenvalue update, so the extended
//! matrix is assembled and handed to a dense symmetric eigensolver.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::candidate::{CandidateMatrix, SensorSubset};
use crate::error::{Error, Result};

/// Negative round-off smaller than this (relative to the matrix scale) is
/// clamped to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Relative pivot threshold below which a Cholesky factor is treated as
/// singular and the incremental path falls back to direct evaluation.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveKind {
    /// Determinant criterion.
    D,
    /// Minimum-eigenvalue criterion.
    E,
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveKind::D => write!(f, "D"),
            ObjectiveKind::E => write!(f, "E"),
        }
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d" => Ok(ObjectiveKind::D),
            "e" => Ok(ObjectiveKind::E),
            other => Err(Error::InvalidParameter(format!("unknown objective {other:?}, expected d or e"))),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maps tiny negative round-off to zero; anything more negative than the
/// tolerance (relative to `scale`) is an error.
fn clamp_nonnegative(value: f64, scale: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP_TOLERANCE * scale.abs().max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::NegativeObjective { value })
    }
}

fn diag_product(m: &DMatrix<f64>) -> f64 {
    m.diagonal().iter().product()
}

fn max_diag(m: &DMatrix<f64>) -> f64 {
    m.diagonal().iter().cloned().fold(0.0, f64::max)
}

/// Objective of a symmetric PSD matrix (the Gram matrix of the selected rows).
fn psd_objective(m: DMatrix<f64>, kind: ObjectiveKind) -> Result<f64> {
    match kind {
        ObjectiveKind::D => {
            // Hadamard: det <= product of the diagonal, so that is the scale.
            let scale = diag_product(&m);
            let det = match Cholesky::new(m.clone()) {
                Some(ch) => ch.l_dirty().diagonal().iter().map(|d| d * d).product(),
                None => m.lu().determinant(),
            };
            clamp_nonnegative(det, scale)
        }
        ObjectiveKind::E => {
            let scale = max_diag(&m);
            let min = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
            clamp_nonnegative(min, scale)
        }
    }
}

/// `C C^T` for the given rows.
fn row_gram(u: &CandidateMatrix, indices: &[usize]) -> DMatrix<f64> {
    let p = indices.len();
    let mut g = DMatrix::zeros(p, p);
    for a in 0..p {
        let ra = u.row(indices[a]);
        for b in a..p {
            let v = dot(ra, u.row(indices[b]));
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

/// `C^T C` for the given rows.
fn column_gram(u: &CandidateMatrix, indices: &[usize]) -> DMatrix<f64> {
    let r = u.cols();
    let mut a = DMatrix::zeros(r, r);
    for &i in indices {
        add_outer(&mut a, u.row(i));
    }
    a
}

fn add_outer(a: &mut DMatrix<f64>, x: &[f64]) {
    let r = x.len();
    for j in 0..r {
        for i in 0..r {
            a[(i, j)] += x[i] * x[j];
        }
    }
}

fn validate_subset(u: &CandidateMatrix, s: &SensorSubset) -> Result<()> {
    for &i in s.indices() {
        u.check_index(i)?;
    }
    // SensorSubset::new rejects duplicates, but subsets built through `with`
    // against another matrix are re-checked here.
    SensorSubset::new(s.indices().to_vec(), u.rows()).map(|_| ())
}

/// Evaluates the objective of `s` from scratch.
pub fn eval_direct(u: &CandidateMatrix, s: &SensorSubset, kind: ObjectiveKind) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySubset);
    }
    validate_subset(u, s)?;
    let m = if s.len() <= u.cols() {
        row_gram(u, s.indices())
    } else {
        column_gram(u, s.indices())
    };
    psd_objective(m, kind)
}

/// Cholesky factor that is only kept when every pivot is comfortably
/// positive.
fn factorize(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if m.nrows() == 0 {
        return None;
    }
    let scale = max_diag(m);
    let ch = Cholesky::new(m.clone())?;
    let min_pivot = ch.l_dirty().diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
    (min_pivot > PIVOT_TOLERANCE * scale).then_some(ch)
}

/// Cached Gram matrices of a subset.
///
/// Immutable once built: [`extend_state`] returns a fresh state.
#[derive(Debug, Clone)]
pub struct GramState {
    subset: SensorSubset,
    /// `C^T C`, `r x r`.
    gram: DMatrix<f64>,
    /// `C C^T`, `p x p`; kept while `p <= r + 1`.
    row_gram: Option<DMatrix<f64>>,
    /// Cholesky factor of `C C^T` while `p < r`, of `C^T C` from `p >= r`.
    factor: Option<Cholesky<f64, Dyn>>,
    /// `f_D` of the subset (1 for the empty subset).
    det: f64,
}

impl GramState {
    pub fn subset(&self) -> &SensorSubset {
        &self.subset
    }

    pub fn subset_size(&self) -> usize {
        self.subset.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn row_gram(&self) -> Option<&DMatrix<f64>> {
        self.row_gram.as_ref()
    }

    /// Objective of the subset this state describes.
    pub fn value(&self, kind: ObjectiveKind) -> Result<f64> {
        let p = self.subset.len();
        if p == 0 {
            return Err(Error::EmptySubset);
        }
        match kind {
            ObjectiveKind::D => Ok(self.det),
            ObjectiveKind::E => {
                let r = self.gram.nrows();
                let m = match &self.row_gram {
                    Some(g) if p <= r => g.clone(),
                    _ => self.gram.clone(),
                };
                psd_objective(m, kind)
            }
        }
    }

    fn assemble(u: &CandidateMatrix, subset: SensorSubset, gram: DMatrix<f64>, row_gram: Option<DMatrix<f64>>) -> Result<Self> {
        let p = subset.len();
        let r = u.cols();
        let (factor, det) = if p == 0 {
            (None, 1.0)
        } else {
            let branch = if p < r {
                row_gram.as_ref().expect("row gram kept below r rows")
            } else {
                &gram
            };
            let factor = factorize(branch);
            let det = match &factor {
                Some(ch) => ch.l_dirty().diagonal().iter().map(|d| d * d).product(),
                None => psd_objective(branch.clone(), ObjectiveKind::D)?,
            };
            (factor, det)
        };
        Ok(Self { subset, gram, row_gram, factor, det })
    }
}

/// Builds the cached state for `s` directly from its rows. `s` may be empty.
pub fn build_state(u: &CandidateMatrix, s: &SensorSubset) -> Result<GramState> {
    validate_subset(u, s)?;
    let gram = column_gram(u, s.indices());
    let row_gram = (s.len() <= u.cols() + 1).then(|| row_gram(u, s.indices()));
    GramState::assemble(u, s.clone(), gram, row_gram)
}

fn check_candidate(u: &CandidateMatrix, state: &GramState, candidate: usize) -> Result<()> {
    u.check_index(candidate)?;
    if state.subset.contains(candidate) {
        return Err(Error::DuplicateIndex(candidate));
    }
    Ok(())
}

/// Bordered row Gram `[[G, g], [g^T, x^T x]]`.
fn bordered(g_mat: &DMatrix<f64>, g: &[f64], xx: f64) -> DMatrix<f64> {
    let p = g.len();
    let mut m = g_mat.clone().resize(p + 1, p + 1, 0.0);
    for (j, &gj) in g.iter().enumerate() {
        m[(p, j)] = gj;
        m[(j, p)] = gj;
    }
    m[(p, p)] = xx;
    m
}

fn with_outer(a: &DMatrix<f64>, x: &[f64]) -> DMatrix<f64> {
    let mut m = a.clone();
    add_outer(&mut m, x);
    m
}

/// Objective of `S + {candidate}` where `S` is the subset owning `state`.
/// `state` is not modified.
pub fn eval_extended(u: &CandidateMatrix, state: &GramState, candidate: usize, kind: ObjectiveKind) -> Result<f64> {
    check_candidate(u, state, candidate)?;
    let p = state.subset.len();
    let r = u.cols();
    let x = u.row(candidate);
    let xx = dot(x, x);

    if p == 0 {
        return Ok(xx);
    }

    if p < r {
        let g: Vec<f64> = state.subset.indices().iter().map(|&i| dot(u.row(i), x)).collect();
        let g_mat = state.row_gram.as_ref().expect("row gram kept below r rows");
        match (kind, &state.factor) {
            (ObjectiveKind::D, Some(ch)) => {
                let gv = DVector::from_column_slice(&g);
                let solved = ch.solve(&gv);
                let schur = xx - gv.dot(&solved);
                clamp_nonnegative(state.det * schur, state.det * xx)
            }
            _ => psd_objective(bordered(g_mat, &g, xx), kind),
        }
    } else {
        match (kind, &state.factor) {
            (ObjectiveKind::D, Some(ch)) => {
                let xv = DVector::from_column_slice(x);
                let quad = xv.dot(&ch.solve(&xv));
                clamp_nonnegative(state.det * (1.0 + quad), state.det * (1.0 + quad).abs())
            }
            _ => psd_objective(with_outer(&state.gram, x), kind),
        }
    }
}

/// State for `S + {candidate}`.
pub fn extend_state(u: &CandidateMatrix, state: &GramState, candidate: usize) -> Result<GramState> {
    check_candidate(u, state, candidate)?;
    let x = u.row(candidate);
    let subset = state.subset.with(candidate)?;
    let p_new = subset.len();
    let gram = with_outer(&state.gram, x);
    let row_gram = if p_new <= u.cols() + 1 {
        match &state.row_gram {
            Some(g_mat) => {
                let g: Vec<f64> = state.subset.indices().iter().map(|&i| dot(u.row(i), x)).collect();
                Some(bordered(g_mat, &g, dot(x, x)))
            }
            None => Some(row_gram(u, subset.indices())),
        }
    } else {
        None
    };
    GramState::assemble(u, subset, gram, row_gram)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> CandidateMatrix {
        CandidateMatrix::from_rows(rows).unwrap()
    }

    fn s(ix: &[usize], n: usize) -> SensorSubset {
        SensorSubset::new(ix.to_vec(), n).unwrap()
    }

    #[test]
    fn single_row_values() {
        let u = m(&[&[3.0, 4.0]]);
        assert_eq!(eval_direct(&u, &s(&[0], 1), ObjectiveKind::D).unwrap(), 25.0);
        assert_eq!(eval_direct(&u, &s(&[0], 1), ObjectiveKind::E).unwrap(), 25.0);
        let empty = build_state(&u, &SensorSubset::empty()).unwrap();
        assert_eq!(eval_extended(&u, &empty, 0, ObjectiveKind::D).unwrap(), 25.0);
        assert_eq!(eval_extended(&u, &empty, 0, ObjectiveKind::E).unwrap(), 25.0);
    }

    #[test]
    fn identity_min_eigenvalue() {
        let u = CandidateMatrix::identity(2).unwrap();
        assert_eq!(eval_direct(&u, &s(&[0, 1], 2), ObjectiveKind::E).unwrap(), 1.0);
        assert_eq!(eval_direct(&u, &s(&[0, 1], 2), ObjectiveKind::D).unwrap(), 1.0);
    }

    #[test]
    fn direct_errors() {
        let u = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(eval_direct(&u, &SensorSubset::empty(), ObjectiveKind::D), Err(Error::EmptySubset));
        let foreign = SensorSubset::new(vec![5], 10).unwrap();
        assert_eq!(
            eval_direct(&u, &foreign, ObjectiveKind::E),
            Err(Error::IndexOutOfRange { index: 5, rows: 2 })
        );
    }

    #[test]
    fn rank_deficient_is_zero() {
        // Two parallel rows: C C^T is singular.
        let u = m(&[&[1.0, 2.0, 0.0], &[2.0, 4.0, 0.0], &[0.0, 0.0, 1.0]]);
        let both = s(&[0, 1], 3);
        assert_eq!(eval_direct(&u, &both, ObjectiveKind::D).unwrap(), 0.0);
        assert_eq!(eval_direct(&u, &both, ObjectiveKind::E).unwrap(), 0.0);
        let st = build_state(&u, &s(&[0], 3)).unwrap();
        assert_eq!(eval_extended(&u, &st, 1, ObjectiveKind::D).unwrap(), 0.0);
        // Oversampled but the third column is never touched.
        let v = m(&[&[1.0, 0.0], &[2.0, 0.0], &[3.0, 0.0]]);
        let st = build_state(&v, &s(&[0, 1], 3)).unwrap();
        assert_eq!(eval_extended(&v, &st, 2, ObjectiveKind::D).unwrap(), 0.0);
        assert_eq!(eval_extended(&v, &st, 2, ObjectiveKind::E).unwrap(), 0.0);
    }

    #[test]
    fn build_state_examples() {
        let u = m(&[&[3.0, 4.0]]);
        let empty = build_state(&u, &SensorSubset::empty()).unwrap();
        assert_eq!(empty.subset_size(), 0);
        assert_eq!(empty.gram(), &DMatrix::zeros(2, 2));
        let one = build_state(&u, &s(&[0], 1)).unwrap();
        assert_eq!(one.gram(), &DMatrix::from_row_slice(2, 2, &[9.0, 12.0, 12.0, 16.0]));
        assert_eq!(one.value(ObjectiveKind::D).unwrap(), 25.0);
    }

    #[test]
    fn extend_examples() {
        let u = m(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let empty = build_state(&u, &SensorSubset::empty()).unwrap();
        let one = extend_state(&u, &empty, 0).unwrap();
        assert_eq!(one.gram(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(one.subset_size(), 1);
        assert_eq!(empty.subset_size(), 0);
        assert_eq!(extend_state(&u, &one, 0).unwrap_err(), Error::DuplicateIndex(0));
        assert_eq!(eval_extended(&u, &one, 0, ObjectiveKind::D).unwrap_err(), Error::DuplicateIndex(0));
        assert_eq!(
            eval_extended(&u, &one, 7, ObjectiveKind::D).unwrap_err(),
            Error::IndexOutOfRange { index: 7, rows: 2 }
        );
    }

    #[test]
    fn clamp_behaviour() {
        assert_eq!(clamp_nonnegative(-1e-14, 1.0).unwrap(), 0.0);
        assert_eq!(clamp_nonnegative(-1e-10, 1e3).unwrap(), 0.0);
        assert!(clamp_nonnegative(-1e-6, 1.0).is_err());
        assert_eq!(clamp_nonnegative(2.5, 1.0).unwrap(), 2.5);
    }

    #[test]
    fn parses_kind() {
        assert_eq!("d".parse::<ObjectiveKind>().unwrap(), ObjectiveKind::D);
        assert_eq!("E".parse::<ObjectiveKind>().unwrap(), ObjectiveKind::E);
        assert!("a".parse::<ObjectiveKind>().is_err());
    }
}
