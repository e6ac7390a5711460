//! Geometry primitives and measurement containers shared by every stage.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{singular_values, Matrix};
use crate::scalar::Scalar;

/// A position in metres, two- or three-dimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<T>",
    into = "Vec<T>",
    bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct Point<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if !(2..=3).contains(&coords.len()) {
            return Err(Error::UnsupportedDimension(coords.len()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { coords })
    }

    /// Panics on non-finite input.
    pub fn xy(x: T, y: T) -> Self {
        Self::new(vec![x, y]).expect("finite 2-D point")
    }

    /// Panics on non-finite input.
    pub fn xyz(x: T, y: T, z: T) -> Self {
        Self::new(vec![x, y, z]).expect("finite 3-D point")
    }

    pub fn origin(dim: usize) -> Result<Self> {
        Self::new(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn norm_squared(&self) -> T {
        self.coords.iter().map(|&c| c * c).sum()
    }

    pub fn distance(&self, other: &Self) -> Result<T> {
        distance(self, other)
    }

    /// Converts the coordinates to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Point<U> {
        Point { coords: self.coords.iter().map(|c| U::lit(c.to_f64().unwrap_or(f64::NAN))).collect() }
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for Point<T> {
    type Error = Error;

    fn try_from(coords: Vec<T>) -> Result<Self> {
        Self::new(coords)
    }
}

impl<T> From<Point<T>> for Vec<T> {
    fn from(p: Point<T>) -> Self {
        p.coords
    }
}

impl<T: Scalar> fmt::Display for Point<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.coords.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Euclidean distance between two points of the same dimension.
pub fn distance<T: Scalar>(p: &Point<T>, q: &Point<T>) -> Result<T> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: q.dim() });
    }
    let ss: T = p.coords.iter().zip(&q.coords).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(ss.sqrt())
}

/// Base-station positions `B_1..B_n` and the reference transponder `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Layout<T> {
    stations: Vec<Point<T>>,
    reference: Point<T>,
}

impl<T: Scalar> Layout<T> {
    /// Stores the points as given; see [`validate_layout`] for the checks the
    /// solvers apply.
    pub fn new(stations: Vec<Point<T>>, reference: Point<T>) -> Self {
        Self { stations, reference }
    }

    /// Radius-10 hexagon with coordinates rounded to `y = ±8.66`, reference at
    /// the origin.
    pub fn hexagon_rounded() -> Self {
        let p = |x: f64, y: f64| Point::xy(T::lit(x), T::lit(y));
        Self::new(
            vec![p(10.0, 0.0), p(5.0, 8.66), p(-5.0, 8.66), p(-10.0, 0.0), p(-5.0, -8.66), p(5.0, -8.66)],
            p(0.0, 0.0),
        )
    }

    /// `n` stations evenly spaced on a circle of `radius` metres, the first on
    /// the positive x axis, reference at the origin.
    pub fn regular_polygon(n: usize, radius: T) -> Self {
        let stations = (0..n)
            .map(|k| {
                let angle = T::lit(std::f64::consts::TAU) * T::from_count(k) / T::from_count(n);
                Point::xy(radius * angle.cos(), radius * angle.sin())
            })
            .collect();
        Self::new(stations, Point::xy(T::zero(), T::zero()))
    }

    /// Exact regular hexagon of radius 10 m.
    pub fn hexagon() -> Self {
        Self::regular_polygon(6, T::lit(10.0))
    }

    pub fn stations(&self) -> &[Point<T>] {
        &self.stations
    }

    pub fn station(&self, i: usize) -> &Point<T> {
        &self.stations[i]
    }

    pub fn reference(&self) -> &Point<T> {
        &self.reference
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    /// Same stations reordered so that new station `k` is old station
    /// `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: order.len() });
        }
        let stations = order
            .iter()
            .map(|&i| self.stations.get(i).cloned().ok_or(Error::IndexOutOfRange { index: i, n: self.len() }))
            .collect::<Result<_>>()?;
        Ok(Self::new(stations, self.reference.clone()))
    }

    /// `Ok(())` if [`validate_layout`] reports nothing.
    pub fn check(&self) -> Result<()> {
        let v = validate_layout(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidLayout(v))
        }
    }

    pub(crate) fn check_point(&self, p: &Point<T>) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: p.dim() });
        }
        Ok(())
    }
}

/// A violated layout invariant. Station indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayoutViolation {
    TooFewStations { n: usize, required: usize },
    DimensionMismatch { index: usize, expected: usize, found: usize },
    CoincidentStations { first: usize, second: usize },
    DegenerateGeometry { dim: usize, smallest_singular_value: f64 },
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::TooFewStations { n, required } => write!(f, "n ≥ {required} required, got {n} stations"),
            Self::DimensionMismatch { index, expected, found } => {
                write!(f, "station {index} has dimension {found}, layout is {expected}-D")
            }
            Self::CoincidentStations { first, second } => {
                write!(f, "stations {first} and {second} coincide")
            }
            Self::DegenerateGeometry { dim, smallest_singular_value } => {
                let shape = if dim == 2 { "collinear" } else { "coplanar" };
                write!(f, "degenerate geometry: stations are {shape} (σ_min = {smallest_singular_value:e})")
            }
        }
    }
}

/// Every violated layout invariant; empty means the layout is usable.
///
/// Checks: at least `d + 2` stations, one dimension throughout, no two
/// stations closer than the geometry tolerance, and stations spanning the
/// full space (smallest singular value of the centered station matrix above
/// the tolerance).
pub fn validate_layout<T: Scalar>(layout: &Layout<T>) -> Vec<LayoutViolation> {
    let d = layout.dim();
    let n = layout.len();
    let tol = T::geometry_tolerance();
    let mut out = Vec::new();

    if n < d + 2 {
        out.push(LayoutViolation::TooFewStations { n, required: d + 2 });
    }
    let mut dims_ok = true;
    for (index, s) in layout.stations.iter().enumerate() {
        if s.dim() != d {
            dims_ok = false;
            out.push(LayoutViolation::DimensionMismatch { index, expected: d, found: s.dim() });
        }
    }
    if !dims_ok {
        return out;
    }
    for i in 0..n {
        for j in i + 1..n {
            if distance(&layout.stations[i], &layout.stations[j]).is_ok_and(|r| r <= tol) {
                out.push(LayoutViolation::CoincidentStations { first: i, second: j });
            }
        }
    }
    if n > 0 {
        let mut centroid = vec![T::zero(); d];
        for s in &layout.stations {
            for (c, &x) in centroid.iter_mut().zip(s.coords()) {
                *c = *c + x;
            }
        }
        for c in &mut centroid {
            *c = *c / T::from_count(n);
        }
        let mut m = Matrix::zeros(n, d);
        for (r, s) in layout.stations.iter().enumerate() {
            for (c, &x) in s.coords().iter().enumerate() {
                m.set(r, c, x - centroid[c]);
            }
        }
        let sv = singular_values(&m);
        let smallest = if n < d { T::zero() } else { sv.last().copied().unwrap_or(T::zero()) };
        if smallest <= tol {
            out.push(LayoutViolation::DegenerateGeometry {
                dim: d,
                smallest_singular_value: smallest.to_f64().unwrap_or(0.0),
            });
        }
    }
    out
}

/// Ground truth attached to simulated epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Truth<T> {
    pub position: Point<T>,
    /// Clock offset in metres.
    pub offset: T,
}

/// One epoch of measurements: pseudo-ranges `R_i` and, once augmented, the
/// ranges `L_i = R_i + ||T - B_i||`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct EpochMeasurement<T> {
    pub pseudo: Vec<T>,
    pub augmented: Option<Vec<T>>,
    pub truth: Option<Truth<T>>,
}

impl<T: Scalar> EpochMeasurement<T> {
    pub fn from_pseudo(pseudo: Vec<T>) -> Self {
        Self { pseudo, augmented: None, truth: None }
    }

    pub fn len(&self) -> usize {
        self.pseudo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pseudo.is_empty()
    }

    pub fn augmented(&self) -> Result<&[T]> {
        self.augmented.as_deref().ok_or(Error::MissingAugmented)
    }
}

/// Whether a [`DiffMatrix`] holds raw single-epoch differences or filter
/// output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    Raw,
    Filtered,
}

/// Antisymmetric matrix of pairwise range differences `Δ_ij = L_i - L_j`.
///
/// Only the strict upper triangle is ever computed; the lower triangle is its
/// exact negation and the diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffMatrix<T> {
    n: usize,
    delta: Vec<T>,
    kind: DiffKind,
}

impl<T: Scalar> DiffMatrix<T> {
    /// Raw differences of one epoch's augmented ranges.
    pub fn from_ranges(l: &[T]) -> Self {
        Self::from_upper(l.len(), DiffKind::Raw, |i, j| l[i] - l[j])
    }

    /// Builds the matrix from its strict upper triangle, `f(i, j)` for `i < j`.
    pub fn from_upper(n: usize, kind: DiffKind, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut delta = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                delta[i * n + j] = v;
                delta[j * n + i] = -v;
            }
        }
        Self { n, delta, kind }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> DiffKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.delta[i * self.n + j]
    }

    /// Row-major `n × n` entries.
    pub fn as_slice(&self) -> &[T] {
        &self.delta
    }

    /// Applies `f(i, j, Δ_ij)` to the upper triangle and mirrors the result.
    pub fn map_upper(&self, kind: DiffKind, mut f: impl FnMut(usize, usize, T) -> T) -> Self {
        Self::from_upper(self.n, kind, |i, j| f(i, j, self.get(i, j)))
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i) == T::zero() && (0..self.n).all(|j| self.get(j, i) == -self.get(i, j)))
    }
}
