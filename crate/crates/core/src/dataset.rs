//! Ground-truth datasets: station coordinates plus an `n x T` signal matrix.
//!
//! CSV layout is one row per station with header
//! `station_id,lat,lon,t0,t1,...,t{T-1}`; row order defines node indices.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, eigendecompose, laplacian, DistanceMetric};
use crate::sampling::{build_projector, greedy_select_frequencies, BandCriterion, FrequencySet, SamplingMask};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    /// (lat, lon) in degrees.
    pub coords: Vec<(f64, f64)>,
    /// Ground truth, one row per node and one column per time step.
    pub signal: DMatrix<f64>,
    pub labels: Option<Vec<String>>,
}

impl DatasetBundle {
    pub fn new(coords: Vec<(f64, f64)>, signal: DMatrix<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if signal.nrows() != coords.len() {
            return Err(Error::DimensionMismatch {
                expected: coords.len(),
                found: signal.nrows(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != coords.len() {
                return Err(Error::DimensionMismatch {
                    expected: coords.len(),
                    found: l.len(),
                });
            }
        }
        if signal.iter().any(|v| !v.is_finite()) || coords.iter().any(|c| !c.0.is_finite() || !c.1.is_finite()) {
            return Err(Error::InvalidParameter("dataset contains non-finite values".into()));
        }
        Ok(Self { coords, signal, labels })
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn steps(&self) -> usize {
        self.signal.ncols()
    }

    pub fn snapshot(&self, t: usize) -> DVector<f64> {
        self.signal.column(t).into_owned()
    }

    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => format!("s{i}"),
        }
    }
}

/// Reads a dataset CSV. Error locations are 1-based file line and column.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<DatasetBundle> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_dataset_csv(&text, path)
}

pub(crate) fn parse_dataset_csv(text: &str, path: &Path) -> Result<DatasetBundle> {
    let err = |row: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = records.next().ok_or_else(|| err(1, 1, "empty file".into()))??;
    let expected_prefix = ["station_id", "lat", "lon"];
    for (c, name) in expected_prefix.iter().enumerate() {
        if header.get(c) != Some(*name) {
            return Err(err(1, c + 1, format!("expected header field `{name}`")));
        }
    }
    let steps = header.len().saturating_sub(3);
    if steps == 0 {
        return Err(err(1, 4, "no time columns".into()));
    }
    for t in 0..steps {
        let want = format!("t{t}");
        if header.get(t + 3) != Some(want.as_str()) {
            return Err(err(1, t + 4, format!("expected header field `{want}`")));
        }
    }

    let mut labels = Vec::new();
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (r, record) in records.enumerate() {
        let line = r + 2;
        let record = record?;
        if record.len() != steps + 3 {
            return Err(err(
                line,
                record.len().min(steps + 3) + 1,
                format!("expected {} fields, found {}", steps + 3, record.len()),
            ));
        }
        let number = |c: usize| -> Result<f64> {
            let cell = &record[c];
            if cell.is_empty() {
                return Err(err(line, c + 1, "missing value".into()));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| err(line, c + 1, format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(line, c + 1, format!("`{cell}` is not finite")));
            }
            Ok(v)
        };
        labels.push(record[0].to_string());
        coords.push((number(1)?, number(2)?));
        for c in 3..steps + 3 {
            values.push(number(c)?);
        }
    }
    if coords.is_empty() {
        return Err(err(2, 1, "no station rows".into()));
    }
    let signal = DMatrix::from_row_slice(coords.len(), steps, &values);
    DatasetBundle::new(coords, signal, Some(labels))
}

pub fn write_dataset_csv(bundle: &DatasetBundle, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["station_id".to_string(), "lat".into(), "lon".into()];
    header.extend((0..bundle.steps()).map(|t| format!("t{t}")));
    w.write_record(&header)?;
    for i in 0..bundle.n_nodes() {
        let mut row = vec![bundle.label(i), bundle.coords[i].0.to_string(), bundle.coords[i].1.to_string()];
        row.extend(bundle.signal.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Band used to shape synthetic ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticBand {
    /// Same greedy band an experiment with the same mask would select.
    #[default]
    Greedy,
    /// The lowest `band_size` graph frequencies.
    Lowest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_nodes: usize,
    pub lat_range: (f64, f64),
    pub lon_range: (f64, f64),
    pub knn_k: usize,
    pub metric: DistanceMetric,
    pub observed: usize,
    pub mask_seed: u64,
    pub band_size: usize,
    pub band: SyntheticBand,
    pub criterion: BandCriterion,
    pub steps: usize,
    pub seed: u64,
    /// Root-mean-square node value of the first snapshot (in expectation).
    pub amplitude: f64,
    /// Per-step random-walk increment of each band coefficient, relative to
    /// its initial standard deviation.
    pub drift: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_nodes: 197,
            lat_range: (30.0, 45.0),
            lon_range: (-115.0, -80.0),
            knn_k: 8,
            metric: DistanceMetric::Haversine,
            observed: 130,
            mask_seed: 1,
            band_size: 120,
            band: SyntheticBand::Greedy,
            criterion: BandCriterion::MinSingularValue,
            steps: 95,
            seed: 1,
            amplitude: 3.0,
            drift: 0.1,
        }
    }
}

/// Random station coordinates and an exactly bandlimited ground truth
/// `x[t] = U_F c[t]`, with `c` a Gaussian random walk.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec) -> Result<DatasetBundle> {
    if spec.steps == 0 {
        return Err(Error::InvalidParameter("synthetic dataset needs at least one step".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_nodes;
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(spec.lat_range.0..=spec.lat_range.1),
                rng.random_range(spec.lon_range.0..=spec.lon_range.1),
            )
        })
        .collect();
    let topology = build_knn_graph(&coords, spec.knn_k, spec.metric)?;
    let spectrum = eigendecompose(&laplacian(&topology))?;
    let band = match spec.band {
        SyntheticBand::Lowest => FrequencySet::lowest(spec.band_size, n)?,
        SyntheticBand::Greedy => {
            let mask = SamplingMask::random(n, spec.observed, spec.mask_seed)?;
            greedy_select_frequencies(&spectrum, &mask, spec.band_size, spec.criterion)?
        }
    };
    let projector = build_projector(&spectrum, &band)?;

    let k = band.len();
    let coeff_std = spec.amplitude * (n as f64 / k as f64).sqrt();
    let mut c = DVector::from_fn(k, |_, _| coeff_std * rng.sample::<f64, _>(StandardNormal));
    let mut signal = DMatrix::zeros(n, spec.steps);
    for t in 0..spec.steps {
        if t > 0 {
            for ci in c.iter_mut() {
                *ci += spec.drift * coeff_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        signal.set_column(t, &(projector.u_f() * &c));
    }
    let labels = (0..n).map(|i| format!("s{i:03}")).collect();
    DatasetBundle::new(coords, signal, Some(labels))
}
