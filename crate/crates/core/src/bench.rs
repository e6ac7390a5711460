//! Grid Monte Carlo comparison of the two direct solutions, and condition
//! maps.
//!
//! Every cell gets its own random stream derived from the global seed and the
//! cell index, and results are assembled in cell order, so output does not
//! depend on how many worker threads evaluate the grid.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{filter_series, FilterKind};
use crate::model::{distance, DiffKind, DiffMatrix, Layout, Point};
use crate::simulate::{augment, diff_matrix, pseudo_ranges, true_ranges, NoiseSpec, NoiseTarget, OffsetProcess};
use crate::solver::{
    build_nonsym_system, build_sym_system, condition_number, reconstruct_ranges_nonsym, select_best_reference,
    solve_nonsym, solve_sym, LsMethod, SolveResult,
};

/// Error differences at or below this many metres count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Rectangular grid of tag positions, `min` to `max` inclusive on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
    /// Height of the evaluation plane for 3-D layouts.
    #[serde(default)]
    pub z: f64,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, step: f64) -> Result<Self> {
        let g = Self { x_min, x_max, y_min, y_max, step, z: 0.0 };
        g.validate()?;
        Ok(g)
    }

    /// 60 m × 60 m centred on the origin at 1 m spacing (61 × 61 cells).
    pub fn paper() -> Self {
        Self { x_min: -30.0, x_max: 30.0, y_min: -30.0, y_max: 30.0, step: 1.0, z: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max, self.step, self.z].iter().all(|v| v.is_finite());
        if !finite || self.x_min > self.x_max || self.y_min > self.y_max || self.step <= 0.0 {
            return Err(Error::InvalidParameter(format!("invalid grid {self:?}")));
        }
        Ok(())
    }

    fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
        let count = ((max - min) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| min + k as f64 * step).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis(self.x_min, self.x_max, self.step)
    }

    pub fn ys(&self) -> Vec<f64> {
        Self::axis(self.y_min, self.y_max, self.step)
    }

    /// Cell centres, rows of constant `y` from `y_min` upward, `x` ascending
    /// within a row.
    pub fn cells(&self, dim: usize) -> Result<Vec<Point<f64>>> {
        let xs = self.xs();
        self.ys()
            .into_iter()
            .flat_map(|y| xs.iter().map(move |&x| (x, y)))
            .map(|(x, y)| if dim == 3 { Point::new(vec![x, y, self.z]) } else { Point::new(vec![x, y]) })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.xs().len() * self.ys().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reference-station policy of the non-symmetric solver. Zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefMode {
    FixedRef(usize),
    /// The reference whose noise-free system at the true tag position is best
    /// conditioned, i.e. the minimum over the per-reference condition maps.
    BestRef,
    /// The reference whose system built from the draw's filtered differences
    /// is best conditioned.
    BestRefObserved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Standard deviation of the filtering error, metres.
    pub sigma: f64,
    pub realizations: usize,
    pub mode: RefMode,
    pub noise_target: NoiseTarget,
    pub offsets: OffsetProcess<f64>,
    pub method: LsMethod,
}

impl Default for GridConfig {
    /// Variance 0.064 m² on the station ranges, 25 draws per cell, station 1
    /// as the non-symmetric reference.
    fn default() -> Self {
        Self {
            sigma: 0.064f64.sqrt(),
            realizations: 25,
            mode: RefMode::FixedRef(0),
            noise_target: NoiseTarget::PerRange,
            offsets: OffsetProcess::default(),
            method: LsMethod::Qr,
        }
    }
}

impl GridConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        NoiseSpec::new(self.sigma, self.noise_target)?;
        self.offsets.validate()?;
        if self.realizations == 0 {
            return Err(Error::InvalidParameter("realizations must be ≥ 1".into()));
        }
        if let RefMode::FixedRef(r) = self.mode {
            if r >= n {
                return Err(Error::IndexOutOfRange { index: r, n });
            }
        }
        Ok(())
    }
}

/// One draw at one tag position: the shared filtered differences and what
/// each solver made of them.
#[derive(Debug, Clone)]
pub struct DrawOutcome {
    pub filtered: DiffMatrix<f64>,
    /// Unfiltered augmented range of the reference channel.
    pub raw_l_ref: f64,
    /// `None` when best-reference selection found no solvable reference.
    pub reference: Option<usize>,
    pub nonsym: Result<SolveResult<f64>>,
    pub sym: Result<SolveResult<f64>>,
}

/// Simulates one epoch at `m`, filters it and runs both solvers on the same
/// filtered matrix.
pub fn evaluate_draw<R: Rng + ?Sized>(
    layout: &Layout<f64>,
    m: &Point<f64>,
    config: &GridConfig,
    rng: &mut R,
) -> Result<DrawOutcome> {
    let offset = config.offsets.sample(1, rng)[0];
    let noise = NoiseSpec::new(config.sigma, config.noise_target)?;
    let epoch = augment(&pseudo_ranges(layout, m, offset, &noise, rng)?, layout)?;
    let raw = diff_matrix(&epoch)?;
    let filter = match config.noise_target {
        NoiseTarget::PerRange => FilterKind::Passthrough,
        NoiseTarget::PerFilteredDiff => FilterKind::Synthetic { sigma: config.sigma },
    };
    let filtered = filter_series(&[raw], &filter, rng)?.remove(0);
    let reference = match config.mode {
        RefMode::FixedRef(r) => Ok(r),
        RefMode::BestRef => select_best_reference(layout, &DiffMatrix::from_ranges(&true_ranges(layout, m)?)),
        RefMode::BestRefObserved => select_best_reference(layout, &filtered),
    };
    let l = epoch.augmented()?;
    let (reference, nonsym) = match reference {
        Ok(r) => (Some(r), solve_nonsym(layout, l[r], &filtered, r, config.method)),
        Err(e) => (None, Err(e)),
    };
    let sym = solve_sym(layout, &filtered, config.method);
    Ok(DrawOutcome { raw_l_ref: reference.map_or(f64::NAN, |r| l[r]), filtered, reference, nonsym, sym })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    SymBetter,
    NonsymBetter,
    Tie,
}

/// Failures count as losses; two failures tie.
fn compare(err_nonsym: Option<f64>, err_sym: Option<f64>) -> Outcome {
    match (err_nonsym, err_sym) {
        (None, None) => Outcome::Tie,
        (None, Some(_)) => Outcome::SymBetter,
        (Some(_), None) => Outcome::NonsymBetter,
        (Some(a), Some(b)) if (a - b).abs() <= TIE_TOLERANCE => Outcome::Tie,
        (Some(a), Some(b)) if a > b => Outcome::SymBetter,
        _ => Outcome::NonsymBetter,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub point: Point<f64>,
    /// Mean position error over successful draws; NaN if every draw failed.
    pub err_nonsym: f64,
    pub err_sym: f64,
    /// `err_nonsym - err_sym`; positive means the symmetric solution did
    /// better. `±inf` when only one side has successful draws.
    pub diff: f64,
    pub failed_nonsym: usize,
    pub failed_sym: usize,
    /// Draws won by the symmetric solution.
    pub wins_sym: usize,
    pub wins_nonsym: usize,
    pub ties: usize,
}

impl CellResult {
    fn from_draws(point: Point<f64>, errors: &[(Option<f64>, Option<f64>)]) -> Self {
        let mean = |it: Vec<f64>| if it.is_empty() { f64::NAN } else { it.iter().sum::<f64>() / it.len() as f64 };
        let err_nonsym = mean(errors.iter().filter_map(|e| e.0).collect());
        let err_sym = mean(errors.iter().filter_map(|e| e.1).collect());
        let mut cell = Self {
            point,
            err_nonsym,
            err_sym,
            diff: cell_diff(err_nonsym, err_sym),
            failed_nonsym: errors.iter().filter(|e| e.0.is_none()).count(),
            failed_sym: errors.iter().filter(|e| e.1.is_none()).count(),
            wins_sym: 0,
            wins_nonsym: 0,
            ties: 0,
        };
        for &(a, b) in errors {
            match compare(a, b) {
                Outcome::SymBetter => cell.wins_sym += 1,
                Outcome::NonsymBetter => cell.wins_nonsym += 1,
                Outcome::Tie => cell.ties += 1,
            }
        }
        cell
    }

    fn outcome(&self) -> Outcome {
        let finite = |v: f64| if v.is_nan() { None } else { Some(v) };
        compare(finite(self.err_nonsym), finite(self.err_sym))
    }

    /// The same cell with the roles of the two solvers exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            point: self.point.clone(),
            err_nonsym: self.err_sym,
            err_sym: self.err_nonsym,
            diff: cell_diff(self.err_sym, self.err_nonsym),
            failed_nonsym: self.failed_sym,
            failed_sym: self.failed_nonsym,
            wins_sym: self.wins_nonsym,
            wins_nonsym: self.wins_sym,
            ties: self.ties,
        }
    }
}

fn cell_diff(err_nonsym: f64, err_sym: f64) -> f64 {
    match (err_nonsym.is_nan(), err_sym.is_nan()) {
        (true, true) => 0.0,
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => err_nonsym - err_sym,
    }
}

/// Outcome of [`grid_eval`].
///
/// `pct_*` count every (cell, draw) comparison: a positive draw is one where
/// the symmetric solution's error is smaller. `cell_pct_*` classify cells by
/// the sign of their mean-error difference instead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub cells: Vec<CellResult>,
    pub draws: usize,
    pub pct_positive: f64,
    pub pct_negative: f64,
    pub pct_zero: f64,
    pub cell_pct_positive: f64,
    pub cell_pct_negative: f64,
    pub cell_pct_zero: f64,
    pub mean_err_nonsym: f64,
    pub mean_err_sym: f64,
    pub config: GridConfig,
    pub seed: u64,
}

impl GridReport {
    pub fn from_cells(cells: Vec<CellResult>, config: GridConfig, seed: u64) -> Self {
        let (mut pos, mut neg, mut zero) = (0usize, 0usize, 0usize);
        let (mut cpos, mut cneg, mut czero) = (0usize, 0usize, 0usize);
        for c in &cells {
            pos += c.wins_sym;
            neg += c.wins_nonsym;
            zero += c.ties;
            match c.outcome() {
                Outcome::SymBetter => cpos += 1,
                Outcome::NonsymBetter => cneg += 1,
                Outcome::Tie => czero += 1,
            }
        }
        let draws = pos + neg + zero;
        let pct = |k: usize, total: usize| if total == 0 { 0.0 } else { 100.0 * k as f64 / total as f64 };
        let finite_mean = |f: fn(&CellResult) -> f64| {
            let v: Vec<f64> = cells.iter().map(f).filter(|v| v.is_finite()).collect();
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        Self {
            draws,
            pct_positive: pct(pos, draws),
            pct_negative: pct(neg, draws),
            pct_zero: pct(zero, draws),
            cell_pct_positive: pct(cpos, cells.len()),
            cell_pct_negative: pct(cneg, cells.len()),
            cell_pct_zero: pct(czero, cells.len()),
            mean_err_nonsym: finite_mean(|c| c.err_nonsym),
            mean_err_sym: finite_mean(|c| c.err_sym),
            cells,
            config,
            seed,
        }
    }
}

/// Stream seed for one cell: a SplitMix64 mix of the global seed and the cell
/// index.
pub fn cell_seed(seed: u64, index: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(index as u64))
}

/// Runs `config.realizations` draws at every grid cell and compares the
/// position errors of the two solutions.
///
/// Parallel over cells on the current rayon pool.
pub fn grid_eval(layout: &Layout<f64>, grid: &GridSpec, config: &GridConfig, seed: u64) -> Result<GridReport> {
    layout.check()?;
    grid.validate()?;
    config.validate(layout.len())?;
    let cells = grid.cells(layout.dim())?;
    let results = cells
        .into_par_iter()
        .enumerate()
        .map(|(index, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, index));
            let errors = (0..config.realizations)
                .map(|_| {
                    let d = evaluate_draw(layout, &m, config, &mut rng)?;
                    Ok((position_error(&d.nonsym, &m)?, position_error(&d.sym, &m)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CellResult::from_draws(m, &errors))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridReport::from_cells(results, *config, seed))
}

/// `Ok(None)` for a rank-deficient solve, which the benchmark scores as a
/// failure; other errors propagate.
fn position_error(r: &Result<SolveResult<f64>>, m: &Point<f64>) -> Result<Option<f64>> {
    match r {
        Ok(s) => Ok(Some(distance(&s.position, m)?)),
        Err(Error::RankDeficient { .. } | Error::NoSolvableReference) => Ok(None),
        Err(e) => Err(e.clone()),
    }
}

/// Summary statistics of a [`GridReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub cells: usize,
    pub draws: usize,
    pub pct_positive: f64,
    pub pct_negative: f64,
    pub pct_zero: f64,
    /// `100 (pct_positive - pct_negative) / pct_negative`; `None` when
    /// undefined (no negative draws but some positive ones).
    pub relative_advantage_pct: Option<f64>,
    /// `pct_positive - pct_negative`, in percentage points.
    pub point_advantage: f64,
    pub cell_pct_positive: f64,
    pub cell_pct_negative: f64,
    pub cell_pct_zero: f64,
    pub mean_err_nonsym: f64,
    pub mean_err_sym: f64,
    pub median_err_nonsym: f64,
    pub median_err_sym: f64,
    pub failed_draws_nonsym: usize,
    pub failed_draws_sym: usize,
    /// Cells where both solutions failed on every draw.
    pub failed_cells: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}

pub fn summarize(report: &GridReport) -> Summary {
    let relative_advantage_pct = if report.pct_negative > 0.0 {
        Some(100.0 * (report.pct_positive - report.pct_negative) / report.pct_negative)
    } else if report.pct_positive == 0.0 {
        Some(0.0)
    } else {
        None
    };
    Summary {
        cells: report.cells.len(),
        draws: report.draws,
        pct_positive: report.pct_positive,
        pct_negative: report.pct_negative,
        pct_zero: report.pct_zero,
        relative_advantage_pct,
        point_advantage: report.pct_positive - report.pct_negative,
        cell_pct_positive: report.cell_pct_positive,
        cell_pct_negative: report.cell_pct_negative,
        cell_pct_zero: report.cell_pct_zero,
        mean_err_nonsym: report.mean_err_nonsym,
        mean_err_sym: report.mean_err_sym,
        median_err_nonsym: median(report.cells.iter().map(|c| c.err_nonsym).collect()),
        median_err_sym: median(report.cells.iter().map(|c| c.err_sym).collect()),
        failed_draws_nonsym: report.cells.iter().map(|c| c.failed_nonsym).sum(),
        failed_draws_sym: report.cells.iter().map(|c| c.failed_sym).sum(),
        failed_cells: report.cells.iter().filter(|c| c.err_nonsym.is_nan() && c.err_sym.is_nan()).count(),
    }
}

/// Which coefficient matrix a condition map describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapVariant {
    /// Zero-based reference station.
    Nonsym(usize),
    Sym,
}

/// Condition number of the noise-free system for a tag at `m`; `+inf` where
/// the system is rank deficient.
pub fn condition_at(layout: &Layout<f64>, m: &Point<f64>, variant: MapVariant) -> Result<f64> {
    if let MapVariant::Nonsym(r) = variant {
        if r >= layout.len() {
            return Err(Error::IndexOutOfRange { index: r, n: layout.len() });
        }
    }
    let l = true_ranges(layout, m)?;
    let raw = DiffMatrix::from_ranges(&l).map_upper(DiffKind::Filtered, |_, _, v| v);
    let sys = match variant {
        MapVariant::Nonsym(r) => build_nonsym_system(layout, &reconstruct_ranges_nonsym(l[r], &raw, r)?, r)?,
        MapVariant::Sym => build_sym_system(layout, &raw)?,
    };
    Ok(condition_number(&sys))
}

pub fn condition_map(layout: &Layout<f64>, grid: &GridSpec, variant: MapVariant) -> Result<Vec<(Point<f64>, f64)>> {
    layout.check()?;
    grid.validate()?;
    condition_at(layout, layout.reference(), variant)?;
    grid.cells(layout.dim())?
        .into_par_iter()
        .map(|m| {
            let c = condition_at(layout, &m, variant)?;
            Ok((m, c))
        })
        .collect()
}

/// Nine significant digits in plain decimal notation; `inf`, `-inf`, `nan`
/// for non-finite values.
pub fn format_sig9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).clamp(0, 40) as usize;
    let s = format!("{v:.decimals$}");
    // rounding can carry into a new leading digit, e.g. 9.99999999951 -> 10.00000000
    let s = if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 9 && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    };
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".into()
        } else {
            t.to_string()
        }
    } else {
        s
    }
}

pub const GRID_CSV_HEADER: &str = "x,y,err_nonsym,err_sym,diff,failed_nonsym,failed_sym";
pub const CONDITION_CSV_HEADER: &str = "x,y,cond";

pub fn write_grid_csv<W: Write>(mut w: W, report: &GridReport) -> io::Result<()> {
    writeln!(w, "{GRID_CSV_HEADER}")?;
    for c in &report.cells {
        let p = c.point.coords();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            format_sig9(p[0]),
            format_sig9(p[1]),
            format_sig9(c.err_nonsym),
            format_sig9(c.err_sym),
            format_sig9(c.diff),
            c.failed_nonsym,
            c.failed_sym
        )?;
    }
    Ok(())
}

pub fn write_condition_csv<W: Write>(mut w: W, map: &[(Point<f64>, f64)]) -> io::Result<()> {
    writeln!(w, "{CONDITION_CSV_HEADER}")?;
    for (p, c) in map {
        let xy = p.coords();
        writeln!(w, "{},{},{}", format_sig9(xy[0]), format_sig9(xy[1]), format_sig9(*c))?;
    }
    Ok(())
}
