//! Synthetic measurements from the forward model
//! `R_i = O + ||M - B_i|| - ||T - B_i||`.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{distance, DiffMatrix, EpochMeasurement, Layout, Point, Truth};
use crate::scalar::Scalar;

/// Where additive Gaussian noise enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    /// One draw per station range; differences inherit correlated noise.
    #[default]
    PerRange,
    /// One independent draw per unordered station pair of the filtered
    /// differences. Pseudo-ranges stay clean; the synthetic filter adds it.
    PerFilteredDiff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec<T> {
    /// Standard deviation in metres.
    pub sigma: T,
    pub target: NoiseTarget,
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn new(sigma: T, target: NoiseTarget) -> Result<Self> {
        if !sigma.is_finite() || sigma < T::zero() {
            return Err(Error::InvalidParameter(format!("noise sigma must be finite and ≥ 0, got {sigma}")));
        }
        Ok(Self { sigma, target })
    }

    pub fn none() -> Self {
        Self { sigma: T::zero(), target: NoiseTarget::PerRange }
    }

    pub fn per_range(sigma: T) -> Result<Self> {
        Self::new(sigma, NoiseTarget::PerRange)
    }
}

/// Per-epoch clock offset, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetProcess<T> {
    Constant(T),
    IidUniform {
        lo: T,
        hi: T,
    },
    /// Starts at zero; Gaussian increments.
    RandomWalk {
        step_sigma: T,
    },
}

impl<T: Scalar> Default for OffsetProcess<T> {
    /// Uniform in ±1.5e5 m, roughly ±0.5 ms of clock error.
    fn default() -> Self {
        Self::IidUniform { lo: T::lit(-1.5e5), hi: T::lit(1.5e5) }
    }
}

impl<T: Scalar> OffsetProcess<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant(o) => o.is_finite(),
            Self::IidUniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Self::RandomWalk { step_sigma } => step_sigma.is_finite() && step_sigma >= T::zero(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid offset process {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<T> {
        match *self {
            Self::Constant(o) => vec![o; len],
            Self::IidUniform { lo, hi } => (0..len).map(|_| uniform(rng, lo, hi)).collect(),
            Self::RandomWalk { step_sigma } => {
                let mut o = T::zero();
                (0..len)
                    .map(|_| {
                        o = o + gaussian(rng, step_sigma);
                        o
                    })
                    .collect()
            }
        }
    }
}

pub(crate) fn gaussian<T: Scalar, R: Rng + ?Sized>(rng: &mut R, sigma: T) -> T {
    let z: f64 = StandardNormal.sample(rng);
    sigma * T::lit(z)
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, lo: T, hi: T) -> T {
    let u: f64 = rng.random();
    lo + (hi - lo) * T::lit(u)
}

/// `||m - B_i||` for every station.
pub fn true_ranges<T: Scalar>(layout: &Layout<T>, m: &Point<T>) -> Result<Vec<T>> {
    layout.check_point(m)?;
    layout.stations().iter().map(|b| distance(m, b)).collect()
}

/// One epoch of pseudo-ranges for a tag at `m` with clock offset `offset`.
///
/// Noise is only added here for [`NoiseTarget::PerRange`].
pub fn pseudo_ranges<T: Scalar, R: Rng + ?Sized>(
    layout: &Layout<T>,
    m: &Point<T>,
    offset: T,
    noise: &NoiseSpec<T>,
    rng: &mut R,
) -> Result<EpochMeasurement<T>> {
    layout.check()?;
    let ranges = true_ranges(layout, m)?;
    let t = layout.reference();
    let pseudo = ranges
        .iter()
        .zip(layout.stations())
        .map(|(&rho, b)| {
            let eps = match noise.target {
                NoiseTarget::PerRange => gaussian(rng, noise.sigma),
                NoiseTarget::PerFilteredDiff => T::zero(),
            };
            Ok(offset + rho - distance(t, b)? + eps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EpochMeasurement { pseudo, augmented: None, truth: Some(Truth { position: m.clone(), offset }) })
}

/// Adds the known reference-to-station distance: `L_i = R_i + ||T - B_i||`.
pub fn augment<T: Scalar>(e: &EpochMeasurement<T>, layout: &Layout<T>) -> Result<EpochMeasurement<T>> {
    if e.len() != layout.len() {
        return Err(Error::LengthMismatch { expected: layout.len(), found: e.len() });
    }
    let t = layout.reference();
    let augmented =
        e.pseudo.iter().zip(layout.stations()).map(|(&r, b)| Ok(r + distance(t, b)?)).collect::<Result<Vec<_>>>()?;
    Ok(EpochMeasurement { augmented: Some(augmented), ..e.clone() })
}

/// Raw pairwise differences of the augmented ranges.
pub fn diff_matrix<T: Scalar>(e: &EpochMeasurement<T>) -> Result<DiffMatrix<T>> {
    Ok(DiffMatrix::from_ranges(e.augmented()?))
}

/// Augmented epochs along `trajectory`, one per point.
///
/// Offsets and noise come from two independent streams forked off `rng`, so
/// changing the offset process never changes the noise draws.
pub fn gen_epoch_series<T: Scalar, R: Rng + ?Sized>(
    layout: &Layout<T>,
    trajectory: &[Point<T>],
    offsets: &OffsetProcess<T>,
    noise: &NoiseSpec<T>,
    rng: &mut R,
) -> Result<Vec<EpochMeasurement<T>>> {
    if trajectory.is_empty() {
        return Err(Error::EmptySeries);
    }
    layout.check()?;
    offsets.validate()?;
    let mut offset_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut noise_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let offset_values = offsets.sample(trajectory.len(), &mut offset_rng);
    trajectory
        .iter()
        .zip(offset_values)
        .map(|(m, o)| augment(&pseudo_ranges(layout, m, o, noise, &mut noise_rng)?, layout))
        .collect()
}

/// Writes epochs as long-format CSV, one row per (epoch, station).
///
/// Columns: `epoch_index,station_index,pseudo,augmented`, followed by
/// `true_x,true_y[,true_z],true_offset` when the first epoch carries truth.
/// Indices are zero-based.
pub fn write_epochs_csv<T: Scalar, W: Write>(mut w: W, epochs: &[EpochMeasurement<T>]) -> io::Result<()> {
    let truth_dim = epochs.first().and_then(|e| e.truth.as_ref()).map(|t| t.position.dim());
    write!(w, "epoch_index,station_index,pseudo,augmented")?;
    if let Some(d) = truth_dim {
        let axes = ["true_x", "true_y", "true_z"];
        write!(w, ",{},true_offset", axes[..d].join(","))?;
    }
    writeln!(w)?;
    for (k, e) in epochs.iter().enumerate() {
        for (i, r) in e.pseudo.iter().enumerate() {
            write!(w, "{k},{i},{r}")?;
            match e.augmented.as_ref() {
                Some(l) => write!(w, ",{}", l[i])?,
                None => write!(w, ",")?,
            }
            if let Some(d) = truth_dim {
                match e.truth.as_ref() {
                    Some(t) => {
                        for c in t.position.coords() {
                            write!(w, ",{c}")?;
                        }
                        write!(w, ",{}", t.offset)?;
                    }
                    None => write!(w, "{}", ",".repeat(d + 1))?,
                }
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
