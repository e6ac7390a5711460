//! The two linear direct solutions.
//!
//! Both start from the exact identity, for stations `i`, `j` and augmented
//! ranges `L = O + ||M - B||`,
//!
//! ```text
//! (B_i - B_j)·M - Δ_ij · (O - (L_i + L_j)/2) = ½ (|B_i|² - |B_j|²)
//! ```
//!
//! with `Δ_ij = L_i - L_j`. They differ in how the unknown pair sum
//! `L_i + L_j` is handled:
//!
//! * **non-symmetric**: every row pairs a station with one fixed reference
//!   station `r`; the ranges are rebuilt as `L̂_i = L_r + F(L_i - L_r)` so that
//!   every channel carries only the reference station's error, which the
//!   offset unknown absorbs;
//! * **symmetric**: every unordered pair contributes a row and
//!   `(L_i + L_j)/2 = S/n + K_ij`, where `S = ΣL` and `K_ij` is built from
//!   differences only, leaving the single nuisance `W = O - S/n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq_normal, lstsq_qr, norm, singular_values, Matrix};
use crate::model::{DiffMatrix, Layout, Point};
use crate::scalar::Scalar;

/// Which direct solution produced a system or result. Station indices are
/// zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    NonSymmetric { reference: usize },
    Symmetric,
}

/// Least-squares factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsMethod {
    /// Householder QR on `A` directly.
    #[default]
    Qr,
    /// `(AᵀA)⁻¹Aᵀb` through a Cholesky factorization.
    NormalEquations,
}

/// Overdetermined system `A x ≈ b` with unknowns `(M, nuisance - shift)`.
///
/// The last unknown is stored relative to `nuisance_shift`; solving adds it
/// back. The non-symmetric builder shifts by the reference channel's range so
/// that the large clock offset never enters `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem<T> {
    a: Matrix<T>,
    b: Vec<T>,
    labels: Vec<&'static str>,
    nuisance_shift: T,
    variant: Variant,
}

impl<T: Scalar> LinearSystem<T> {
    /// A system with position unknowns `labels[..cols-1]` and a trailing
    /// nuisance unknown.
    pub fn new(a: Matrix<T>, b: Vec<T>, nuisance_shift: T, variant: Variant) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::LengthMismatch { expected: a.rows(), found: b.len() });
        }
        let dim = a.cols().saturating_sub(1);
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut labels = vec!["x", "y", "z"][..dim].to_vec();
        labels.push(match variant {
            Variant::NonSymmetric { .. } => "offset",
            Variant::Symmetric => "w",
        });
        Ok(Self { a, b, labels, nuisance_shift, variant })
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    pub fn unknown_labels(&self) -> &[&'static str] {
        &self.labels
    }

    pub fn nuisance_shift(&self) -> T {
        self.nuisance_shift
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.cols() - 1
    }

    /// `A·(position, nuisance - shift) - b`.
    pub fn residual_at(&self, position: &Point<T>, nuisance: T) -> Result<Vec<T>> {
        if position.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: position.dim() });
        }
        let mut x = position.coords().to_vec();
        x.push(nuisance - self.nuisance_shift);
        Ok(self.a.mul_vec(&x).into_iter().zip(&self.b).map(|(ax, &b)| ax - b).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct SolveResult<T> {
    pub position: Point<T>,
    /// Non-symmetric: the offset seen through the reference channel.
    /// Symmetric: `W = O - S/n`.
    pub nuisance: T,
    pub condition: T,
    /// `||A x - b||` at the solution.
    pub residual: T,
    pub variant: Variant,
}

/// `σ_max / σ_min` of the coefficient matrix; `+∞` when `σ_min` is zero to
/// within the rank tolerance.
pub fn condition_number<T: Scalar>(sys: &LinearSystem<T>) -> T {
    condition_from_singular_values(&singular_values(&sys.a))
}

fn condition_from_singular_values<T: Scalar>(sv: &[T]) -> T {
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > T::zero() && lo / hi >= T::rank_tolerance() => (hi / lo).max(T::one()),
        _ => T::infinity(),
    }
}

pub fn solve_ls<T: Scalar>(sys: &LinearSystem<T>) -> Result<SolveResult<T>> {
    solve_ls_with(sys, LsMethod::Qr)
}

/// Least-squares minimizer of `||A x - b||`.
///
/// Fails with [`Error::RankDeficient`] when `σ_min / σ_max` falls below the
/// scalar type's rank tolerance.
pub fn solve_ls_with<T: Scalar>(sys: &LinearSystem<T>, method: LsMethod) -> Result<SolveResult<T>> {
    if sys.rows() < sys.cols() {
        return Err(Error::InvalidParameter(format!(
            "underdetermined system: {} rows for {} unknowns",
            sys.rows(),
            sys.cols()
        )));
    }
    if !sys.a.is_finite() || sys.b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let sv = singular_values(&sys.a);
    let condition = condition_from_singular_values(&sv);
    let rank_deficient = || Error::RankDeficient { condition: condition.to_f64().unwrap_or(f64::INFINITY) };
    if condition.is_infinite() {
        return Err(rank_deficient());
    }
    let x = match method {
        LsMethod::Qr => lstsq_qr(&sys.a, &sys.b),
        LsMethod::NormalEquations => lstsq_normal(&sys.a, &sys.b).ok_or_else(rank_deficient)?,
    };
    let ax = sys.a.mul_vec(&x);
    let r: Vec<T> = ax.iter().zip(&sys.b).map(|(&p, &q)| p - q).collect();
    let d = sys.dim();
    Ok(SolveResult {
        position: Point::new(x[..d].to_vec())?,
        nuisance: x[d] + sys.nuisance_shift,
        condition,
        residual: norm(&r),
        variant: sys.variant,
    })
}

fn check_index(index: usize, n: usize) -> Result<()> {
    if index < n {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index, n })
    }
}

/// Rebuilds ranges from the reference channel: `L̂_r = raw_l_ref` and
/// `L̂_i = raw_l_ref + F(L_i - L_r)`.
pub fn reconstruct_ranges_nonsym<T: Scalar>(
    raw_l_ref: T,
    filtered: &DiffMatrix<T>,
    reference: usize,
) -> Result<Vec<T>> {
    check_index(reference, filtered.n())?;
    Ok((0..filtered.n())
        .map(|i| if i == reference { raw_l_ref } else { raw_l_ref + filtered.get(i, reference) })
        .collect())
}

fn squared_norm_diff<T: Scalar>(layout: &Layout<T>, i: usize, j: usize) -> T {
    (layout.station(i).norm_squared() - layout.station(j).norm_squared()) / T::lit(2.0)
}

/// Rows `(B_i - B_r)·M - Δ_ir·O = ½((|B_i|² - |B_r|²) - (L̂_i² - L̂_r²))` for
/// every `i ≠ r`, ascending.
///
/// The offset column is solved relative to `L̂_r`: with `Δ = L̂_i - L̂_r`,
/// `L̂_i² - L̂_r² = Δ² + 2Δ·L̂_r` and the `2Δ·L̂_r` part moves to the left-hand
/// side.
pub fn build_nonsym_system<T: Scalar>(layout: &Layout<T>, l_hat: &[T], reference: usize) -> Result<LinearSystem<T>> {
    layout.check()?;
    let n = layout.len();
    if l_hat.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: l_hat.len() });
    }
    check_index(reference, n)?;
    let d = layout.dim();
    let half = T::lit(0.5);
    let base = layout.station(reference);
    let mut a = Matrix::zeros(n - 1, d + 1);
    let mut b = Vec::with_capacity(n - 1);
    for (row, i) in (0..n).filter(|&i| i != reference).enumerate() {
        let delta = l_hat[i] - l_hat[reference];
        for (c, (&bi, &br)) in layout.station(i).coords().iter().zip(base.coords()).enumerate() {
            a.set(row, c, bi - br);
        }
        a.set(row, d, -delta);
        b.push(squared_norm_diff(layout, i, reference) - half * delta * delta);
    }
    LinearSystem::new(a, b, l_hat[reference], Variant::NonSymmetric { reference })
}

/// Difference-only part of the half pair sum:
/// `(L_i + L_j)/2 = S/n + (Σ_{k≠i,j} Δ_ik + Σ_{k≠i,j} Δ_jk) / (2n)`.
pub fn pair_sum_known_part<T: Scalar>(filtered: &DiffMatrix<T>, i: usize, j: usize) -> Result<T> {
    let n = filtered.n();
    check_index(i, n)?;
    check_index(j, n)?;
    if i == j {
        return Err(Error::SameIndex(i));
    }
    let sum: T = (0..n).filter(|&k| k != i && k != j).map(|k| filtered.get(i, k) + filtered.get(j, k)).sum();
    Ok(sum / (T::lit(2.0) * T::from_count(n)))
}

/// Rows `(B_i - B_j)·M - Δ_ij·W = ½(|B_i|² - |B_j|²) - Δ_ij·K_ij` for every
/// `i < j` in lexicographic order, `W = O - S/n`.
pub fn build_sym_system<T: Scalar>(layout: &Layout<T>, filtered: &DiffMatrix<T>) -> Result<LinearSystem<T>> {
    layout.check()?;
    let n = layout.len();
    if filtered.n() != n {
        return Err(Error::LengthMismatch { expected: n, found: filtered.n() });
    }
    let d = layout.dim();
    let rows = n * (n - 1) / 2;
    let mut a = Matrix::zeros(rows, d + 1);
    let mut b = Vec::with_capacity(rows);
    let mut row = 0;
    for i in 0..n {
        for j in i + 1..n {
            let delta = filtered.get(i, j);
            for (c, (&bi, &bj)) in layout.station(i).coords().iter().zip(layout.station(j).coords()).enumerate() {
                a.set(row, c, bi - bj);
            }
            a.set(row, d, -delta);
            b.push(squared_norm_diff(layout, i, j) - delta * pair_sum_known_part(filtered, i, j)?);
            row += 1;
        }
    }
    LinearSystem::new(a, b, T::zero(), Variant::Symmetric)
}

/// Non-symmetric pipeline: reconstruct, build, solve.
pub fn solve_nonsym<T: Scalar>(
    layout: &Layout<T>,
    raw_l_ref: T,
    filtered: &DiffMatrix<T>,
    reference: usize,
    method: LsMethod,
) -> Result<SolveResult<T>> {
    let l_hat = reconstruct_ranges_nonsym(raw_l_ref, filtered, reference)?;
    solve_ls_with(&build_nonsym_system(layout, &l_hat, reference)?, method)
}

/// Symmetric pipeline: build, solve.
pub fn solve_sym<T: Scalar>(layout: &Layout<T>, filtered: &DiffMatrix<T>, method: LsMethod) -> Result<SolveResult<T>> {
    solve_ls_with(&build_sym_system(layout, filtered)?, method)
}

/// Condition number of the non-symmetric system for every choice of
/// reference station. The coefficient matrix does not depend on the raw
/// reference range.
pub fn nonsym_conditions<T: Scalar>(layout: &Layout<T>, filtered: &DiffMatrix<T>) -> Result<Vec<T>> {
    (0..layout.len())
        .map(|r| {
            let l_hat = reconstruct_ranges_nonsym(T::zero(), filtered, r)?;
            Ok(condition_number(&build_nonsym_system(layout, &l_hat, r)?))
        })
        .collect()
}

/// Reference station whose non-symmetric system has the smallest condition
/// number. Conditions within a relative 1e-9 of each other tie, and ties go
/// to the lowest index.
pub fn select_best_reference<T: Scalar>(layout: &Layout<T>, filtered: &DiffMatrix<T>) -> Result<usize> {
    let conds = nonsym_conditions(layout, filtered)?;
    let tie = T::one() - T::lit(1e-9);
    let mut best: Option<usize> = None;
    for (r, &c) in conds.iter().enumerate() {
        if c.is_infinite() {
            continue;
        }
        match best {
            Some(b) if c >= conds[b] * tie => {}
            _ => best = Some(r),
        }
    }
    best.ok_or(Error::NoSolvableReference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DiffKind;
    use crate::simulate::true_ranges;
    use approx::assert_abs_diff_eq;

    fn noise_free(layout: &Layout<f64>, m: &Point<f64>, offset: f64) -> Vec<f64> {
        true_ranges(layout, m).unwrap().into_iter().map(|r| r + offset).collect()
    }

    #[test]
    fn reconstruct_direct() {
        let raw = DiffMatrix::from_ranges(&[1.0, 2.0, 3.0]);
        assert_eq!(reconstruct_ranges_nonsym(1.0, &raw, 0).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(reconstruct_ranges_nonsym(1.0, &raw, 3), Err(Error::IndexOutOfRange { index: 3, n: 3 }));
    }

    #[test]
    fn nonsym_shape_and_exact_residual() {
        let layout = Layout::<f64>::hexagon_rounded();
        let m = Point::xy(3.0, 4.0);
        let l = noise_free(&layout, &m, 123.456);
        let sys = build_nonsym_system(&layout, &l, 0).unwrap();
        assert_eq!((sys.rows(), sys.cols()), (5, 3));
        assert_eq!(sys.unknown_labels(), ["x", "y", "offset"]);
        for r in sys.residual_at(&m, 123.456).unwrap() {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn nonsym_zero_offset_coefficient_for_equal_ranges() {
        let layout = Layout::<f64>::hexagon_rounded();
        // (0, y) is equidistant from stations 2 and 3 (indices 1, 2)
        let l = noise_free(&layout, &Point::xy(0.0, -4.0), 10.0);
        let sys = build_nonsym_system(&layout, &l, 1).unwrap();
        // row for i = 2 is the second row (i = 0 first)
        assert_eq!(sys.a().get(1, 2), 0.0);
    }

    #[test]
    fn reference_noise_is_absorbed_by_offset() {
        let layout = Layout::<f64>::hexagon_rounded();
        let m = Point::xy(-6.0, 2.0);
        let l = noise_free(&layout, &m, 50.0);
        let raw = DiffMatrix::from_ranges(&l);
        let clean = solve_nonsym(&layout, l[2], &raw, 2, LsMethod::Qr).unwrap();
        let shifted = solve_nonsym(&layout, l[2] + 0.37, &raw, 2, LsMethod::Qr).unwrap();
        for (a, b) in clean.position.coords().iter().zip(shifted.position.coords()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(shifted.nuisance - clean.nuisance, 0.37, epsilon = 1e-12);
        assert_abs_diff_eq!(clean.nuisance, 50.0, epsilon = 1e-9);
    }

    #[test]
    fn pair_sum_example() {
        let raw = DiffMatrix::from_ranges(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let k = pair_sum_known_part(&raw, 0, 1).unwrap();
        assert_abs_diff_eq!(k, -1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(3.0 + k, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn pair_sum_constant_ranges() {
        let raw = DiffMatrix::from_ranges(&[4.5; 6]);
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert_eq!(pair_sum_known_part(&raw, i, j).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn pair_sum_errors() {
        let raw = DiffMatrix::from_ranges(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(pair_sum_known_part(&raw, 2, 2), Err(Error::SameIndex(2)));
        assert!(pair_sum_known_part(&raw, 0, 4).is_err());
    }

    #[test]
    fn sym_shape_and_exact_residual() {
        let layout = Layout::<f64>::hexagon_rounded();
        let m = Point::xy(3.0, 4.0);
        let l = noise_free(&layout, &m, 123.456);
        let raw = DiffMatrix::from_ranges(&l);
        let sys = build_sym_system(&layout, &raw).unwrap();
        assert_eq!((sys.rows(), sys.cols()), (15, 3));
        let w = 123.456 - l.iter().sum::<f64>() / 6.0;
        for r in sys.residual_at(&m, w).unwrap() {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn sym_recovers_position_exactly() {
        let layout = Layout::<f64>::hexagon_rounded();
        let l = noise_free(&layout, &Point::xy(3.0, 4.0), 123.456);
        let s = solve_sym(&layout, &DiffMatrix::from_ranges(&l), LsMethod::Qr).unwrap();
        assert_abs_diff_eq!(s.position.coords()[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.position.coords()[1], 4.0, epsilon = 1e-9);
        assert!(s.residual < 1e-9);
        assert!(s.condition >= 1.0);
        assert_eq!(s.variant, Variant::Symmetric);
    }

    #[test]
    fn normal_equations_match_qr() {
        let layout = Layout::<f64>::hexagon_rounded();
        let l = noise_free(&layout, &Point::xy(-8.0, 13.0), 9.0);
        let raw = DiffMatrix::from_ranges(&l).map_upper(DiffKind::Filtered, |i, j, v| v + 0.01 * (i as f64 - j as f64));
        let q = solve_sym(&layout, &raw, LsMethod::Qr).unwrap();
        let n = solve_sym(&layout, &raw, LsMethod::NormalEquations).unwrap();
        for (a, b) in q.position.coords().iter().zip(n.position.coords()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    fn system(rows: &[Vec<f64>], b: Vec<f64>) -> LinearSystem<f64> {
        LinearSystem::new(Matrix::from_rows(rows), b, 0.0, Variant::Symmetric).unwrap()
    }

    #[test]
    fn square_system_direct_solve() {
        let sys = system(&[vec![2.0, 0.0, 1.0], vec![0.0, 3.0, 0.0], vec![1.0, 0.0, 4.0]], vec![5.0, 6.0, 9.0]);
        let s = solve_ls(&sys).unwrap();
        // solution (11/7, 2, 13/7)
        assert_abs_diff_eq!(s.position.coords()[0], 11.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.position.coords()[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.nuisance, 13.0 / 7.0, epsilon = 1e-12);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let sys = system(
            &[vec![1.0, 2.0, 1.0], vec![3.0, 1.0, 3.0], vec![0.0, 5.0, 0.0], vec![2.0, 2.0, 2.0]],
            vec![1.0, 2.0, 3.0, 4.0],
        );
        assert!(matches!(solve_ls(&sys), Err(Error::RankDeficient { .. })));
        assert!(matches!(solve_ls_with(&sys, LsMethod::NormalEquations), Err(Error::RankDeficient { .. })));
        assert_eq!(condition_number(&sys), f64::INFINITY);
    }

    #[test]
    fn condition_examples() {
        let id = system(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], vec![0.0; 3]);
        assert_abs_diff_eq!(condition_number(&id), 1.0, epsilon = 1e-15);
        let rows = vec![vec![1.0, 2.0, 0.5], vec![-1.0, 0.3, 2.0], vec![4.0, 1.0, 1.0], vec![0.0, 1.0, -3.0]];
        let sys = system(&rows, vec![0.0; 4]);
        let scaled = LinearSystem::new(sys.a().scaled(10.0), vec![0.0; 4], 0.0, Variant::Symmetric).unwrap();
        let (c1, c2) = (condition_number(&sys), condition_number(&scaled));
        assert!(c1 >= 1.0);
        assert_abs_diff_eq!(c1, c2, epsilon = 1e-12 * c1);
    }

    #[test]
    fn center_of_regular_layout_is_unsolvable() {
        // all ranges equal: the nuisance column vanishes for every reference
        let layout = Layout::<f64>::hexagon();
        let raw = DiffMatrix::from_ranges(&noise_free(&layout, &Point::xy(0.0, 0.0), 0.0));
        assert!(nonsym_conditions(&layout, &raw).unwrap().iter().all(|c| c.is_infinite()));
        assert_eq!(select_best_reference(&layout, &raw), Err(Error::NoSolvableReference));
        assert!(matches!(solve_sym(&layout, &raw, LsMethod::Qr), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn mirror_symmetric_tie_goes_to_lowest_index() {
        // on the x axis, stations k and 6-k of the exact hexagon are mirror
        // images, so their conditions agree up to rounding
        let layout = Layout::<f64>::hexagon();
        let raw = DiffMatrix::from_ranges(&noise_free(&layout, &Point::xy(4.0, 0.0), 0.0));
        let conds = nonsym_conditions(&layout, &raw).unwrap();
        assert_abs_diff_eq!(conds[1], conds[5], epsilon = 1e-9 * conds[1]);
        assert_abs_diff_eq!(conds[2], conds[4], epsilon = 1e-9 * conds[2]);
        let best = select_best_reference(&layout, &raw).unwrap();
        assert!(best <= 3, "mirror partner with higher index chosen: {best} ({conds:?})");
    }

    #[test]
    fn invalid_layout_rejected_by_builders() {
        let layout =
            Layout::new(vec![Point::xy(0.0, 0.0), Point::xy(1.0, 0.0), Point::xy(0.0, 1.0)], Point::xy(0.0, 0.0));
        let raw = DiffMatrix::from_ranges(&[1.0, 2.0, 3.0]);
        assert!(matches!(build_sym_system(&layout, &raw), Err(Error::InvalidLayout(_))));
        assert!(matches!(build_nonsym_system(&layout, &[1.0, 2.0, 3.0], 0), Err(Error::InvalidLayout(_))));
    }

    #[test]
    fn f32_solvers_work() {
        let layout = Layout::<f32>::hexagon();
        let m = Point::xy(2.0f32, -3.0);
        let l: Vec<f32> = true_ranges(&layout, &m).unwrap().into_iter().map(|r| r + 40.0).collect();
        let raw = DiffMatrix::from_ranges(&l);
        let s = solve_sym(&layout, &raw, LsMethod::Qr).unwrap();
        let n = solve_nonsym(&layout, l[0], &raw, 0, LsMethod::Qr).unwrap();
        for r in [s, n] {
            assert_abs_diff_eq!(r.position.coords()[0], 2.0, epsilon = 1e-3);
            assert_abs_diff_eq!(r.position.coords()[1], -3.0, epsilon = 1e-3);
        }
    }
}
