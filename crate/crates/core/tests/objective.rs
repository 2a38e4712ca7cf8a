#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use sensor_select::experiment::generate_candidates;
use sensor_select::oracle::naive_eval;
use sensor_select::{
    build_state, eval_direct, eval_extended, extend_state, CandidateMatrix, ObjectiveKind, SensorSubset, StreamKey,
};

const KINDS: [ObjectiveKind; 2] = [ObjectiveKind::D, ObjectiveKind::E];

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn subset(ix: &[usize], n: usize) -> SensorSubset {
    SensorSubset::new(ix.to_vec(), n).unwrap()
}

/// Sum of outer products, written out longhand.
fn naive_gram(u: &CandidateMatrix, ix: &[usize]) -> Vec<Vec<f64>> {
    let r = u.cols();
    let mut a = vec![vec![0.0; r]; r];
    for &i in ix {
        let row = u.row(i);
        for p in 0..r {
            for q in 0..r {
                a[p][q] += row[p] * row[q];
            }
        }
    }
    a
}

fn assert_gram_matches(u: &CandidateMatrix, ix: &[usize], tol: f64) {
    let state = build_state(u, &SensorSubset::new(ix.to_vec(), u.rows()).unwrap()).unwrap();
    let expect = naive_gram(u, ix);
    let scale = expect.iter().flatten().map(|v| v.abs()).fold(1.0, f64::max);
    for p in 0..u.cols() {
        for q in 0..u.cols() {
            assert!((state.gram()[(p, q)] - expect[p][q]).abs() <= tol * scale);
        }
    }
}

#[test]
fn seeded_two_row_determinant() {
    let u = generate_candidates(6, 2, StreamKey::new(42)).unwrap();
    let s = subset(&[0, 3], 6);
    // 2x2 determinant of C C^T by hand.
    let (a, b) = (u.row(0), u.row(3));
    let aa = a[0] * a[0] + a[1] * a[1];
    let bb = b[0] * b[0] + b[1] * b[1];
    let ab = a[0] * b[0] + a[1] * b[1];
    let by_hand = aa * bb - ab * ab;
    let direct = eval_direct(&u, &s, ObjectiveKind::D).unwrap();
    let naive = naive_eval(&u, &s, ObjectiveKind::D).unwrap();
    assert!(rel_err(direct, by_hand) < 1e-12);
    assert!(rel_err(direct, naive) < 1e-12);
    assert_gram_matches(&u, &[0, 3], 1e-14);
}

#[test]
fn extended_matches_direct_for_every_candidate() {
    let u = generate_candidates(8, 3, StreamKey::new(42)).unwrap();
    let base = subset(&[1, 4], 8);
    let state = build_state(&u, &base).unwrap();
    for kind in KINDS {
        for i in (0..8).filter(|i| !base.contains(*i)) {
            let ext = base.with(i).unwrap();
            let inc = eval_extended(&u, &state, i, kind).unwrap();
            let direct = eval_direct(&u, &ext, kind).unwrap();
            let naive = naive_eval(&u, &ext, kind).unwrap();
            assert!(rel_err(inc, direct) <= 1e-8, "{kind} candidate {i}: {inc} vs {direct}");
            assert!(rel_err(inc, naive) <= 1e-8, "{kind} candidate {i}: {inc} vs naive {naive}");
        }
    }
}

#[test]
fn extension_chain_agrees_with_rebuild() {
    let u = generate_candidates(6, 2, StreamKey::new(42)).unwrap();
    let chain = [5, 0, 2, 3];
    let mut state = build_state(&u, &SensorSubset::empty()).unwrap();
    for (step, &i) in chain.iter().enumerate() {
        let before = state.subset_size();
        let next = extend_state(&u, &state, i).unwrap();
        assert_eq!(state.subset_size(), before);
        assert_eq!(next.subset_size(), before + 1);
        state = next;
        let rebuilt = build_state(&u, &subset(&chain[..=step], 6)).unwrap();
        let diff = (state.gram() - rebuilt.gram()).abs().max();
        assert!(diff <= 1e-10, "step {step}: {diff}");
        if let (Some(a), Some(b)) = (state.row_gram(), rebuilt.row_gram()) {
            assert!((a - b).abs().max() <= 1e-10);
        }
        for kind in KINDS {
            let a = state.value(kind).unwrap();
            let b = rebuilt.value(kind).unwrap();
            assert!(rel_err(a, b) <= 1e-10);
        }
    }
}

#[test]
fn branch_boundary_agrees() {
    // p == r: both C C^T and C^T C give the same determinant and spectrum.
    for seed in 0..20 {
        let u = generate_candidates(12, 4, StreamKey::new(seed)).unwrap();
        let ix = [0, 3, 7, 9];
        let rows: Vec<Vec<f64>> = ix.iter().map(|&i| u.row(i).to_vec()).collect();
        let cct = sensor_select::oracle::determinant(
            (0..4).map(|a| (0..4).map(|b| rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum()).collect()).collect(),
        );
        let ctc = sensor_select::oracle::determinant(naive_gram(&u, &ix));
        assert!(rel_err(cct, ctc) <= 1e-8);
        let s = subset(&ix, 12);
        let d = eval_direct(&u, &s, ObjectiveKind::D).unwrap();
        assert!(rel_err(d, ctc) <= 1e-8);
        // Extending from p = r - 1 uses the bordered path; from p = r the
        // determinant lemma. Both must land on the direct value.
        let below = build_state(&u, &subset(&ix[..3], 12)).unwrap();
        let at = build_state(&u, &s).unwrap();
        for kind in KINDS {
            let via_border = eval_extended(&u, &below, ix[3], kind).unwrap();
            assert!(rel_err(via_border, eval_direct(&u, &s, kind).unwrap()) <= 1e-8);
            let over = s.with(11).unwrap();
            let via_lemma = eval_extended(&u, &at, 11, kind).unwrap();
            assert!(rel_err(via_lemma, naive_eval(&u, &over, kind).unwrap()) <= 1e-8);
        }
    }
}

fn instance() -> impl Strategy<Value = (u64, usize, usize, Vec<usize>)> {
    (any::<u64>(), 2usize..=50, 1usize..=10).prop_flat_map(|(seed, n, r)| {
        let p_max = n.min(20);
        let ix = proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=p_max).prop_shuffle();
        (Just(seed), Just(n), Just(r), ix)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn incremental_equals_direct((seed, n, r, ix) in instance()) {
        let u = generate_candidates(n, r, StreamKey::new(seed)).unwrap();
        let (last, head) = ix.split_last().unwrap();
        let state = build_state(&u, &SensorSubset::new(head.to_vec(), n).unwrap()).unwrap();
        let full = SensorSubset::new(ix.clone(), n).unwrap();
        for kind in KINDS {
            let inc = eval_extended(&u, &state, *last, kind).unwrap();
            let naive = naive_eval(&u, &full, kind).unwrap();
            prop_assert!(rel_err(inc, naive) <= 1e-8, "{kind}: {inc} vs {naive}");
        }
    }

    #[test]
    fn permutation_invariant((seed, n, r, ix) in instance()) {
        let u = generate_candidates(n, r, StreamKey::new(seed)).unwrap();
        let mut rev = ix.clone();
        rev.reverse();
        for kind in KINDS {
            let a = eval_direct(&u, &SensorSubset::new(ix.clone(), n).unwrap(), kind).unwrap();
            let b = eval_direct(&u, &SensorSubset::new(rev.clone(), n).unwrap(), kind).unwrap();
            prop_assert!(rel_err(a, b) <= 1e-10);
        }
    }

    #[test]
    fn e_bounded_by_smallest_row_norm((seed, n, r, ix) in instance()) {
        prop_assume!(ix.len() <= r);
        let u = generate_candidates(n, r, StreamKey::new(seed)).unwrap();
        let e = eval_direct(&u, &SensorSubset::new(ix.clone(), n).unwrap(), ObjectiveKind::E).unwrap();
        let min_norm = ix.iter().map(|&i| u.row(i).iter().map(|v| v * v).sum::<f64>()).fold(f64::INFINITY, f64::min);
        prop_assert!(e <= min_norm * (1.0 + 1e-12));
    }

    #[test]
    fn d_never_decreases_when_oversampled((seed, n, r, ix) in instance()) {
        prop_assume!(ix.len() >= r && ix.len() < n);
        let u = generate_candidates(n, r, StreamKey::new(seed)).unwrap();
        let s = SensorSubset::new(ix.clone(), n).unwrap();
        let state = build_state(&u, &s).unwrap();
        let base = eval_direct(&u, &s, ObjectiveKind::D).unwrap();
        for i in (0..n).filter(|i| !s.contains(*i)) {
            prop_assert!(eval_extended(&u, &state, i, ObjectiveKind::D).unwrap() >= base);
        }
    }

    #[test]
    fn state_gram_matches_outer_products((seed, n, r, ix) in instance()) {
        let u = generate_candidates(n, r, StreamKey::new(seed)).unwrap();
        assert_gram_matches(&u, &ix, 1e-10);
        let state = build_state(&u, &SensorSubset::new(ix.clone(), n).unwrap()).unwrap();
        let g = state.gram();
        prop_assert!((g - g.transpose()).abs().max() == 0.0);
        prop_assert!(g.clone().symmetric_eigenvalues().iter().all(|&l| l >= -1e-10 * g.diagonal().max().max(1.0)));
    }
}
