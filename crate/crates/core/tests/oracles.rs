//! Independent oracles for the solver building blocks.

mod common;

use approx::assert_abs_diff_eq;
use lpm_core::linalg::{lstsq_qr, singular_values, Matrix};
use lpm_core::simulate::{augment, diff_matrix, pseudo_ranges, true_ranges};
use lpm_core::solver::{
    build_nonsym_system, build_sym_system, condition_number, nonsym_conditions, pair_sum_known_part,
    reconstruct_ranges_nonsym, select_best_reference, solve_nonsym, solve_sym,
};
use lpm_core::{DiffKind, DiffMatrix, Layout, LsMethod, NoiseSpec, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

/// Pair sum `(L_i + L_j)/2` recovered from the total and the difference-only
/// part, checked against the ranges themselves.
#[test]
fn pair_sum_identity_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let n = rng.random_range(4..=10);
        let l: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let s: f64 = l.iter().sum();
        let raw = DiffMatrix::from_ranges(&l);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = pair_sum_known_part(&raw, i, j).unwrap();
                worst = worst.max(((l[i] + l[j]) / 2.0 - s / n as f64 - k).abs());
            }
        }
    }
    assert!(worst <= 1e-12, "worst {worst:e}");
}

/// The 1/(2n) coefficient on the halved pair sum is the one that balances;
/// a 1/(4n) coefficient (halving the full-sum expression once more) does not.
#[test]
fn pair_sum_coefficient_discriminates() {
    let l = [1.0, 2.0, 3.0, 4.0, 5.0];
    let raw = DiffMatrix::from_ranges(&l);
    let k = pair_sum_known_part(&raw, 0, 1).unwrap();
    let wrong: f64 = k / 2.0;
    assert_abs_diff_eq!(15.0 / 5.0 + k, 1.5, epsilon = 1e-15);
    assert!((3.0f64 + wrong - 1.5).abs() > 0.5);
}

#[test]
fn singular_values_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let rows = rng.random_range(3..30);
        let cols = rng.random_range(1..=4.min(rows));
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-10.0..10.0)).collect();
        let ours = singular_values(&Matrix::from_row_major(rows, cols, data.clone()));
        let theirs = nalgebra::DMatrix::from_row_slice(rows, cols, &data).singular_values();
        let mut theirs: Vec<f64> = theirs.iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.iter().zip(&theirs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-11 * theirs[0]);
        }
    }
}

#[test]
fn qr_least_squares_matches_nalgebra_svd_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let rows = rng.random_range(4..30);
        let cols = rng.random_range(2..=4);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..rows).map(|_| rng.random_range(-50.0..50.0)).collect();
        let ours = lstsq_qr(&Matrix::from_row_major(rows, cols, data.clone()), &b);
        let a = nalgebra::DMatrix::from_row_slice(rows, cols, &data);
        let theirs = a.svd(true, true).solve(&nalgebra::DVector::from_vec(b), 1e-14).unwrap();
        for (x, y) in ours.iter().zip(theirs.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9 * (1.0 + y.abs()));
        }
    }
}

/// Condition number of the symmetric system at the hexagon against a
/// nalgebra evaluation of the same rows assembled by hand.
#[test]
fn sym_condition_matches_hand_assembled_rows() {
    let layout = Layout::<f64>::hexagon_rounded();
    let m = Point::xy(7.0, -12.0);
    let l = true_ranges(&layout, &m).unwrap();
    let sys = build_sym_system(&layout, &DiffMatrix::from_ranges(&l)).unwrap();
    let mut data = Vec::new();
    for i in 0..6 {
        for j in i + 1..6 {
            let (bi, bj) = (layout.station(i).coords(), layout.station(j).coords());
            data.extend_from_slice(&[bi[0] - bj[0], bi[1] - bj[1], -(l[i] - l[j])]);
        }
    }
    let sv = nalgebra::DMatrix::from_row_slice(15, 3, &data).singular_values();
    let expected = sv.max() / sv.min();
    assert_abs_diff_eq!(condition_number(&sys), expected, epsilon = 1e-9 * expected);
}

#[test]
fn exact_recovery_noise_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..300 {
        let d = if rng.random_bool(0.5) { 2 } else { 3 };
        let n = rng.random_range(d + 2..=8);
        let layout = random_layout(&mut rng, n, d);
        let m = point_in_hull(&mut rng, &layout);
        let o = rng.random_range(-1e5..1e5);
        let epoch = augment(&pseudo_ranges(&layout, &m, o, &NoiseSpec::none(), &mut rng).unwrap(), &layout).unwrap();
        let raw = diff_matrix(&epoch).unwrap();
        let l = epoch.augmented().unwrap();
        let r = rng.random_range(0..n);
        let ns = solve_nonsym(&layout, l[r], &raw, r, LsMethod::Qr).unwrap();
        let sy = solve_sym(&layout, &raw, LsMethod::Qr).unwrap();
        assert!(max_abs_diff(&ns.position, &m) <= 1e-9, "nonsym {ns:?} vs {m}");
        assert!(max_abs_diff(&sy.position, &m) <= 1e-9, "sym {sy:?} vs {m}");
        assert_abs_diff_eq!(ns.nuisance, o, epsilon = 1e-9);
        let w = o - l.iter().sum::<f64>() / n as f64;
        assert_abs_diff_eq!(sy.nuisance, w, epsilon = 1e-9);
    }
}

#[test]
fn normal_equations_reproduce_qr_on_noise_free_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let layout = random_layout(&mut rng, 6, 2);
        let m = point_in_hull(&mut rng, &layout);
        let l = true_ranges(&layout, &m).unwrap();
        let raw = DiffMatrix::from_ranges(&l);
        let q = solve_sym(&layout, &raw, LsMethod::Qr).unwrap();
        let ne = solve_sym(&layout, &raw, LsMethod::NormalEquations).unwrap();
        assert!(max_abs_diff(&q.position, &ne.position) < 1e-6);
    }
}

#[test]
fn symmetric_estimate_invariant_under_relabelling() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let n = rng.random_range(4..=8);
        let layout = random_layout(&mut rng, n, 2);
        let m = point_in_hull(&mut rng, &layout);
        let l: Vec<f64> = true_ranges(&layout, &m).unwrap();
        let noisy: Vec<f64> = l.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        for k in (1..n).rev() {
            order.swap(k, rng.random_range(0..=k));
        }
        let permuted = layout.permuted(&order).unwrap();
        let noisy_p: Vec<f64> = order.iter().map(|&i| noisy[i]).collect();
        let a = solve_sym(&layout, &DiffMatrix::from_ranges(&noisy), LsMethod::Qr).unwrap();
        let b = solve_sym(&permuted, &DiffMatrix::from_ranges(&noisy_p), LsMethod::Qr).unwrap();
        assert!(max_abs_diff(&a.position, &b.position) <= 1e-9, "{a:?} {b:?}");
    }
}

#[test]
fn best_reference_is_exhaustive_argmin() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..200 {
        let n = rng.random_range(4..=8);
        let layout = random_layout(&mut rng, n, 2);
        let m = point_in_hull(&mut rng, &layout);
        let l = true_ranges(&layout, &m).unwrap();
        let filtered =
            DiffMatrix::from_ranges(&l).map_upper(DiffKind::Filtered, |_, _, v| v + rng.random_range(-0.2..0.2));
        let best = select_best_reference(&layout, &filtered).unwrap();
        // brute force, building every system from scratch
        let conds: Vec<f64> = (0..n)
            .map(|r| {
                let l_hat = reconstruct_ranges_nonsym(0.0, &filtered, r).unwrap();
                condition_number(&build_nonsym_system(&layout, &l_hat, r).unwrap())
            })
            .collect();
        assert_eq!(conds, nonsym_conditions(&layout, &filtered).unwrap());
        for c in &conds {
            assert!(conds[best] <= c * (1.0 + 1e-9));
        }
        assert_eq!(best, select_best_reference(&layout, &filtered).unwrap());
    }
}

#[test]
fn noise_free_residuals_vanish_at_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for _ in 0..100 {
        let d = if rng.random_bool(0.5) { 2 } else { 3 };
        let layout = random_layout(&mut rng, 7, d);
        let m = point_in_hull(&mut rng, &layout);
        let o = rng.random_range(-1e3..1e3);
        let l: Vec<f64> = true_ranges(&layout, &m).unwrap().iter().map(|r| r + o).collect();
        let ns = build_nonsym_system(&layout, &l, 3).unwrap();
        for v in ns.residual_at(&m, o).unwrap() {
            assert!(v.abs() <= 1e-9);
        }
        let sy = build_sym_system(&layout, &DiffMatrix::from_ranges(&l)).unwrap();
        let w = o - l.iter().sum::<f64>() / 7.0;
        for v in sy.residual_at(&m, w).unwrap() {
            assert!(v.abs() <= 1e-9);
        }
    }
}
