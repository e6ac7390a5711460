//! Temporal filtering of pairwise range differences.
//!
//! Each of the `n(n-1)/2` upper-triangle channels is filtered on its own and
//! the result is mirrored, so every output is exactly antisymmetric.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiffKind, DiffMatrix};
use crate::scalar::Scalar;
use crate::simulate::gaussian;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind<T> {
    Passthrough,
    /// Mean of the last `window` samples; shorter prefix means during warm-up.
    MovingAverage {
        window: usize,
    },
    /// `y_k = alpha x_k + (1 - alpha) y_{k-1}`, starting at the first sample.
    Exponential {
        alpha: T,
    },
    /// Treats the input as true differences and adds `N(0, sigma²)` per
    /// unordered pair, independently per epoch.
    Synthetic {
        sigma: T,
    },
}

impl<T: Scalar> FilterKind<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Passthrough => Ok(()),
            Self::MovingAverage { window } if window >= 1 => Ok(()),
            Self::Exponential { alpha } if alpha > T::zero() && alpha <= T::one() => Ok(()),
            Self::Synthetic { sigma } if sigma.is_finite() && sigma >= T::zero() => Ok(()),
            _ => Err(Error::InvalidParameter(format!("invalid filter {self:?}"))),
        }
    }
}

/// Filters a chronological series of difference matrices.
pub fn filter_series<T: Scalar, R: Rng + ?Sized>(
    series: &[DiffMatrix<T>],
    kind: &FilterKind<T>,
    rng: &mut R,
) -> Result<Vec<DiffMatrix<T>>> {
    kind.validate()?;
    let n = series.first().ok_or(Error::EmptySeries)?.n();
    if let Some(bad) = series.iter().find(|d| d.n() != n) {
        return Err(Error::LengthMismatch { expected: n, found: bad.n() });
    }
    let out = match *kind {
        FilterKind::Passthrough => series.iter().map(|d| d.map_upper(DiffKind::Filtered, |_, _, v| v)).collect(),
        FilterKind::MovingAverage { window } => series
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let start = (k + 1).saturating_sub(window);
                let span = &series[start..=k];
                let count = T::from_count(span.len());
                d.map_upper(DiffKind::Filtered, |i, j, _| span.iter().map(|s| s.get(i, j)).sum::<T>() / count)
            })
            .collect(),
        FilterKind::Exponential { alpha } => {
            let mut out: Vec<DiffMatrix<T>> = Vec::with_capacity(series.len());
            for d in series {
                let next = match out.last() {
                    None => d.map_upper(DiffKind::Filtered, |_, _, v| v),
                    Some(prev) => {
                        d.map_upper(DiffKind::Filtered, |i, j, v| alpha * v + (T::one() - alpha) * prev.get(i, j))
                    }
                };
                out.push(next);
            }
            out
        }
        FilterKind::Synthetic { sigma } => {
            series.iter().map(|d| d.map_upper(DiffKind::Filtered, |_, _, v| v + gaussian(rng, sigma))).collect()
        }
    };
    Ok(out)
}
