use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use lpm_core::bench::{self, MapVariant};
use lpm_core::simulate::{augment, diff_matrix, gen_epoch_series, write_epochs_csv};
use lpm_core::solver::{select_best_reference, solve_nonsym, solve_sym};
use lpm_core::{filter_series, EpochMeasurement, LsMethod, NoiseSpec, Point, SolveResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{station_index, RefPolicy, ReferenceSetting, RunConfig};
use crate::error::CliError;
use crate::output::write_all;

pub const GRID_CSV: &str = "grid.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const EPOCHS_CSV: &str = "epochs.csv";

fn out_dir(config: &RunConfig) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveVariant {
    Sym,
    Nonsym,
}

pub struct SolveArgs {
    pub epochs: Option<PathBuf>,
    pub pseudo: Option<Vec<f64>>,
    pub variant: SolveVariant,
    /// Station number or `best`; defaults to the configured reference.
    pub reference: Option<ReferenceSetting>,
    pub method: Option<LsMethod>,
}

#[derive(Serialize)]
struct EpochSolution {
    epoch: usize,
    variant: &'static str,
    /// 1-based, non-symmetric only.
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<usize>,
    position: Vec<f64>,
    nuisance: f64,
    condition: f64,
    residual: f64,
}

/// Pseudo-ranges per epoch from a long-format CSV with at least the columns
/// `epoch_index,station_index,pseudo` (zero-based indices).
pub fn read_epochs_csv(path: &Path, n: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Validation(format!("{}: missing column `{name}`", path.display())))
    };
    let (ce, cs, cp) = (column("epoch_index")?, column("station_index")?, column("pseudo")?);
    let mut epochs: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let bad = |what: &str| CliError::Validation(format!("{}: row {}: {what}", path.display(), line + 1));
        let record = record.map_err(|e| bad(&e.to_string()))?;
        let field = |c: usize| record.get(c).map(str::trim).unwrap_or("");
        let epoch: usize = field(ce).parse().map_err(|_| bad("bad epoch_index"))?;
        let station: usize = field(cs).parse().map_err(|_| bad("bad station_index"))?;
        let pseudo: f64 = field(cp).parse().map_err(|_| bad("bad pseudo"))?;
        if station >= n {
            return Err(bad(&format!("station_index {station} out of range for {n} stations")));
        }
        let slot = &mut epochs.entry(epoch).or_insert_with(|| vec![None; n])[station];
        if slot.replace(pseudo).is_some() {
            return Err(bad("duplicate station in epoch"));
        }
    }
    if epochs.is_empty() {
        return Err(CliError::Validation(format!("{}: no epochs", path.display())));
    }
    epochs
        .into_iter()
        .map(|(k, v)| {
            v.into_iter()
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| CliError::Validation(format!("{}: epoch {k} is missing stations", path.display())))
        })
        .collect()
}

/// Solves every epoch and prints a JSON array of solutions.
pub fn solve(config: &RunConfig, args: &SolveArgs) -> Result<(), CliError> {
    let layout = config.layout()?;
    let n = layout.len();
    let pseudo = match (&args.epochs, &args.pseudo) {
        (Some(path), None) => read_epochs_csv(path, n)?,
        (None, Some(p)) => vec![p.clone()],
        _ => return Err(CliError::Validation("pass exactly one of --epochs or --pseudo".into())),
    };
    let method = args.method.unwrap_or(config.bench.method);
    let reference = args.reference.unwrap_or(config.bench.reference);
    let fixed_ref = match reference {
        ReferenceSetting::Station(s) => Some(station_index(s, n)?),
        ReferenceSetting::Policy(RefPolicy::Best) => None,
        ReferenceSetting::Policy(RefPolicy::BestObserved) => {
            return Err(CliError::Validation("solve takes a station number or `best`".into()))
        }
    };

    let epochs = pseudo
        .into_iter()
        .map(|p| augment(&EpochMeasurement::from_pseudo(p), &layout))
        .collect::<Result<Vec<_>, _>>()?;
    let raw = epochs.iter().map(diff_matrix).collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let filtered = filter_series(&raw, &config.filter.kind(), &mut rng)?;

    let mut out = Vec::with_capacity(epochs.len());
    for (k, (e, f)) in epochs.iter().zip(&filtered).enumerate() {
        let (reference, result): (Option<usize>, SolveResult<f64>) = match args.variant {
            SolveVariant::Sym => (None, solve_sym(&layout, f, method)?),
            SolveVariant::Nonsym => {
                let r = match fixed_ref {
                    Some(r) => r,
                    None => select_best_reference(&layout, f)?,
                };
                (Some(r + 1), solve_nonsym(&layout, e.augmented()?[r], f, r, method)?)
            }
        };
        out.push(EpochSolution {
            epoch: k,
            variant: match args.variant {
                SolveVariant::Sym => "symmetric",
                SolveVariant::Nonsym => "non_symmetric",
            },
            reference,
            position: result.position.coords().to_vec(),
            nuisance: result.nuisance,
            condition: result.condition,
            residual: result.residual,
        });
    }
    emit(&to_json(&out));
    Ok(())
}

#[derive(Serialize)]
struct GridSummaryFile<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    #[serde(flatten)]
    summary: &'a bench::Summary,
    config: RunConfig,
}

/// Runs the Monte-Carlo comparison and writes `grid.csv` and
/// `summary.json`; the summary is echoed to stdout.
pub fn grid(config: &RunConfig) -> Result<(), CliError> {
    let layout = config.layout()?;
    let grid_config = config.grid_config(layout.len())?;
    let report = bench::grid_eval(&layout, &config.grid, &grid_config, config.seed)?;
    let summary = bench::summarize(&report);
    let mut csv = Vec::new();
    bench::write_grid_csv(&mut csv, &report).expect("in-memory write");
    let json = to_json(&GridSummaryFile {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        summary: &summary,
        config: config.echo(),
    });
    write_all(&out_dir(config), &[(GRID_CSV, csv), (SUMMARY_JSON, format!("{json}\n").into_bytes())])?;
    emit(&json);
    Ok(())
}

/// Writes the noise-free condition number over the grid.
pub fn condmap(config: &RunConfig, variant: SolveVariant, station: Option<usize>) -> Result<(), CliError> {
    let layout = config.layout()?;
    let (map_variant, name) = match variant {
        SolveVariant::Sym => (MapVariant::Sym, "condmap_sym.csv".to_string()),
        SolveVariant::Nonsym => {
            let s = match (station, config.bench.reference) {
                (Some(s), _) | (None, ReferenceSetting::Station(s)) => s,
                (None, ReferenceSetting::Policy(_)) => {
                    return Err(CliError::Validation("condmap --variant nonsym needs --ref N".into()))
                }
            };
            (MapVariant::Nonsym(station_index(s, layout.len())?), format!("condmap_nonsym_ref{s}.csv"))
        }
    };
    let map = bench::condition_map(&layout, &config.grid, map_variant)?;
    let mut csv = Vec::new();
    bench::write_condition_csv(&mut csv, &map).expect("in-memory write");
    let paths = write_all(&out_dir(config), &[(&name, csv)])?;
    emit(&paths[0].display().to_string());
    Ok(())
}

/// Writes a synthetic epoch series along the configured trajectory.
pub fn simulate(config: &RunConfig) -> Result<(), CliError> {
    let layout = config.layout()?;
    let sim = &config.simulate;
    if sim.epochs_per_point == 0 {
        return Err(CliError::Validation("epochs_per_point must be ≥ 1".into()));
    }
    let points = sim.trajectory.iter().map(|c| Point::new(c.clone())).collect::<Result<Vec<_>, _>>()?;
    let trajectory: Vec<Point<f64>> =
        points.iter().flat_map(|p| std::iter::repeat_n(p.clone(), sim.epochs_per_point)).collect();
    let noise = NoiseSpec::new(config.sigma()?, config.noise.target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let epochs = gen_epoch_series(&layout, &trajectory, &sim.offset.process(), &noise, &mut rng)?;
    let mut csv = Vec::new();
    write_epochs_csv(&mut csv, &epochs).expect("in-memory write");
    let paths = write_all(&out_dir(config), &[(EPOCHS_CSV, csv)])?;
    emit(&paths[0].display().to_string());
    Ok(())
}
