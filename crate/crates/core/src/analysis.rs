//! Model-level analyses: ITD curves and estimator error surfaces, plus CSV/JSON export
//! of the resulting grids and of time-frequency dumps.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::cdr::{db_to_linear, estimate_cdr, mix_coherence, EstimatorInputs};
use crate::config::{DiffuseModel, Estimator, FieldModel};
use crate::error::{Error, Result};
use crate::grid::TfGrid;
use crate::spatial::{
    desired_coherence, diffuse_coherence, itd_binaural, tdoa_free_field, Geometry,
};

/// Error values are clipped to `[-DELTA_CAP_DB, DELTA_CAP_DB]`.
pub const DELTA_CAP_DB: f64 = 40.0;
/// Estimator cap inside the analysis, well above anything that survives the delta clip.
const ANALYSIS_CDR_CAP_DB: f64 = 120.0;

/// `0, 5, ..., 90` degrees, in radians.
pub fn default_theta_grid() -> Vec<f64> {
    (0..=18).map(|i| (5.0 * i as f64).to_radians()).collect()
}

/// 25 log-spaced points from 125 Hz to 8 kHz (four per octave).
pub fn default_freq_grid() -> Vec<f64> {
    (0..25).map(|i| 125.0 * 2f64.powf(i as f64 / 4.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItdRow {
    pub theta: f64,
    pub freq: f64,
    /// Free-field TDOA (s).
    pub tau12: f64,
    /// Frequency-dependent binaural ITD (s).
    pub tau_lr: f64,
}

/// Both delay models on every `(theta, freq)` pair, theta-major.
pub fn itd_table(thetas: &[f64], freqs: &[f64], geo: &Geometry) -> Vec<ItdRow> {
    thetas
        .iter()
        .flat_map(|&theta| {
            freqs.iter().map(move |&freq| ItdRow {
                theta,
                freq,
                tau12: tdoa_free_field(theta, geo),
                tau_lr: itd_binaural(theta, freq, geo),
            })
        })
        .collect()
}

/// Estimation error `delta_db[i][j]` at `theta_grid[i]`, `freq_grid[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSurface {
    pub theta_grid: Vec<f64>,
    pub freq_grid: Vec<f64>,
    pub eta_in_db: f64,
    pub delta_db: Vec<Vec<f64>>,
}

impl ErrorSurface {
    pub fn mean(&self) -> f64 {
        let n = self.theta_grid.len() * self.freq_grid.len();
        self.delta_db.iter().flatten().sum::<f64>() / n.max(1) as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.delta_db
            .iter()
            .flatten()
            .fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Value at the grid point nearest to `(theta, freq)`.
    pub fn nearest(&self, theta: f64, freq: f64) -> Option<f64> {
        let nearest = |grid: &[f64], x: f64| {
            (0..grid.len()).min_by(|&a, &b| (grid[a] - x).abs().total_cmp(&(grid[b] - x).abs()))
        };
        let i = nearest(&self.theta_grid, theta)?;
        let j = nearest(&self.freq_grid, freq)?;
        Some(self.delta_db[i][j])
    }
}

/// Model coherences an estimator assumes under `field`: the free-field estimator pairs
/// the plain TDOA with the sinc diffuse model, the binaural one uses the head models.
fn assumed_models(
    theta: f64,
    freq: f64,
    geo: &Geometry,
    field: FieldModel,
) -> (num_complex::Complex64, f64) {
    let diffuse = match field {
        FieldModel::FreeField => DiffuseModel::Sinc,
        FieldModel::Binaural => DiffuseModel::Binaural,
    };
    (
        desired_coherence(theta, freq, geo, field),
        diffuse_coherence(freq, geo, diffuse),
    )
}

/// Error of one estimator on the binaural mixture coherence at a single point, in dB.
pub fn surface_delta(
    eta_in_db: f64,
    theta: f64,
    freq: f64,
    geo: &Geometry,
    estimator: Estimator,
    estimator_field: FieldModel,
) -> f64 {
    let gamma_x = mix_coherence(
        db_to_linear(eta_in_db),
        desired_coherence(theta, freq, geo, FieldModel::Binaural),
        diffuse_coherence(freq, geo, DiffuseModel::Binaural),
    );
    let (gamma_coh, gamma_diff) = assumed_models(theta, freq, geo, estimator_field);
    let estimate = estimate_cdr(
        estimator,
        &EstimatorInputs {
            gamma_x,
            gamma_coh,
            gamma_diff,
        },
        db_to_linear(ANALYSIS_CDR_CAP_DB),
    );
    (estimate.db() - eta_in_db).clamp(-DELTA_CAP_DB, DELTA_CAP_DB)
}

pub fn robustness_surface(
    eta_in_db: f64,
    thetas: &[f64],
    freqs: &[f64],
    geo: &Geometry,
    estimator: Estimator,
    estimator_field: FieldModel,
) -> Result<ErrorSurface> {
    if !eta_in_db.is_finite() {
        return Err(Error::InvalidConfig("input CDR must be finite".into()));
    }
    if let Some(t) = thetas
        .iter()
        .find(|t| !(0.0..=std::f64::consts::FRAC_PI_2).contains(*t))
    {
        return Err(Error::InvalidConfig(format!(
            "theta {:.3} deg outside [0, 90]",
            t.to_degrees()
        )));
    }
    if let Some(f) = freqs.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(Error::InvalidConfig(format!(
            "frequency {f} Hz must be positive"
        )));
    }
    let delta_db = thetas
        .iter()
        .map(|&theta| {
            freqs
                .iter()
                .map(|&f| surface_delta(eta_in_db, theta, f, geo, estimator, estimator_field))
                .collect()
        })
        .collect();
    Ok(ErrorSurface {
        theta_grid: thetas.to_vec(),
        freq_grid: freqs.to_vec(),
        eta_in_db,
        delta_db,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportFormat {
    #[default]
    Csv,
    Json,
}

impl ExportFormat {
    pub fn name(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        }
    }

    /// `.json` selects JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ExportFormat::Json,
            _ => ExportFormat::Csv,
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown format '{other}'"))),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One named quantity over a theta x frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    /// Column header in CSV output.
    pub csv_name: String,
    /// Key in JSON output.
    pub json_name: String,
    pub values: Vec<Vec<f64>>,
}

/// Exportable theta x frequency grid, angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2d {
    pub theta_deg: Vec<f64>,
    pub freq_hz: Vec<f64>,
    pub columns: Vec<Column>,
}

impl From<&ErrorSurface> for Grid2d {
    fn from(s: &ErrorSurface) -> Self {
        Self {
            theta_deg: s.theta_grid.iter().map(|t| t.to_degrees()).collect(),
            freq_hz: s.freq_grid.clone(),
            columns: vec![Column {
                csv_name: "value".into(),
                json_name: "values".into(),
                values: s.delta_db.clone(),
            }],
        }
    }
}

impl Grid2d {
    /// Builds a grid from theta-major rows as produced by [`itd_table`]. Delays in seconds.
    pub fn from_itd_rows(rows: &[ItdRow]) -> Result<Self> {
        let mut thetas: Vec<f64> = Vec::new();
        let mut freqs: Vec<f64> = Vec::new();
        for r in rows {
            if !thetas.contains(&r.theta) {
                thetas.push(r.theta);
            }
            if !freqs.contains(&r.freq) {
                freqs.push(r.freq);
            }
        }
        if rows.len() != thetas.len() * freqs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows do not form a {}x{} grid",
                rows.len(),
                thetas.len(),
                freqs.len()
            )));
        }
        let n_freqs = freqs.len().max(1);
        let column = |pick: fn(&ItdRow) -> f64| -> Vec<Vec<f64>> {
            rows.chunks(n_freqs)
                .map(|chunk| chunk.iter().map(pick).collect())
                .collect()
        };
        Ok(Self {
            theta_deg: thetas.iter().map(|t| t.to_degrees()).collect(),
            columns: vec![
                Column {
                    csv_name: "tau12_s".into(),
                    json_name: "tau12_s".into(),
                    values: column(|r| r.tau12),
                },
                Column {
                    csv_name: "tau_lr_s".into(),
                    json_name: "tau_lr_s".into(),
                    values: column(|r| r.tau_lr),
                },
            ],
            freq_hz: freqs,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.theta_deg.is_empty() || self.freq_hz.is_empty() || self.columns.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for c in &self.columns {
            if c.values.len() != self.theta_deg.len()
                || c.values.iter().any(|row| row.len() != self.freq_hz.len())
            {
                return Err(Error::ShapeMismatch(format!(
                    "column {} does not match the {}x{} grid",
                    c.csv_name,
                    self.theta_deg.len(),
                    self.freq_hz.len()
                )));
            }
        }
        Ok(())
    }
}

/// Writes `grid` as long-format CSV (`theta_deg,freq_hz,<columns>`) or as one JSON object
/// holding the axes and a 2-D array per column. Empty grids are rejected before the file
/// is created.
pub fn export_grid(grid: &Grid2d, path: impl AsRef<Path>, format: ExportFormat) -> Result<()> {
    grid.check()?;
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_grid(grid, &mut w, format)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// [`export_grid`] into any writer.
pub fn write_grid(grid: &Grid2d, out: impl Write, format: ExportFormat) -> Result<()> {
    grid.check()?;
    match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["theta_deg".to_string(), "freq_hz".to_string()];
            header.extend(grid.columns.iter().map(|c| c.csv_name.clone()));
            w.write_record(&header)?;
            for (i, t) in grid.theta_deg.iter().enumerate() {
                for (j, f) in grid.freq_hz.iter().enumerate() {
                    let mut rec = vec![t.to_string(), f.to_string()];
                    rec.extend(grid.columns.iter().map(|c| c.values[i][j].to_string()));
                    w.write_record(&rec)?;
                }
            }
            w.flush().map_err(csv::Error::from)?;
            Ok(())
        }
        ExportFormat::Json => {
            let mut obj = Map::new();
            obj.insert("theta_deg".into(), json!(grid.theta_deg));
            obj.insert("freq_hz".into(), json!(grid.freq_hz));
            for c in &grid.columns {
                obj.insert(c.json_name.clone(), json!(c.values));
            }
            serde_json::to_writer(out, &Value::Object(obj))?;
            Ok(())
        }
    }
}

/// Reads back a single-column grid written by [`export_grid`].
pub fn read_grid(path: impl AsRef<Path>, format: ExportFormat) -> Result<Grid2d> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        ExportFormat::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let header = r.headers()?.clone();
            if header.len() < 3 || &header[0] != "theta_deg" || &header[1] != "freq_hz" {
                return Err(Error::InvalidConfig(format!(
                    "unexpected CSV header {header:?}"
                )));
            }
            let mut theta_deg: Vec<f64> = Vec::new();
            let mut freq_hz: Vec<f64> = Vec::new();
            let mut cells = Vec::new();
            for rec in r.records() {
                let rec = rec?;
                let num = |k: usize| -> Result<f64> {
                    rec[k]
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad number '{}'", &rec[k])))
                };
                let (t, f) = (num(0)?, num(1)?);
                if !theta_deg.contains(&t) {
                    theta_deg.push(t);
                }
                if !freq_hz.contains(&f) {
                    freq_hz.push(f);
                }
                cells.push((2..header.len()).map(num).collect::<Result<Vec<f64>>>()?);
            }
            if cells.len() != theta_deg.len() * freq_hz.len() {
                return Err(Error::ShapeMismatch("CSV rows do not form a grid".into()));
            }
            let columns = (2..header.len())
                .map(|k| Column {
                    csv_name: header[k].to_string(),
                    json_name: header[k].to_string(),
                    values: cells
                        .chunks(freq_hz.len())
                        .map(|row| row.iter().map(|c| c[k - 2]).collect())
                        .collect(),
                })
                .collect();
            Ok(Grid2d {
                theta_deg,
                freq_hz,
                columns,
            })
        }
        ExportFormat::Json => {
            let v: Value = serde_json::from_str(&text)?;
            let obj = v
                .as_object()
                .ok_or_else(|| Error::InvalidConfig("JSON grid is not an object".into()))?;
            let axis = |key: &str| -> Result<Vec<f64>> {
                serde_json::from_value(obj.get(key).cloned().unwrap_or(Value::Null))
                    .map_err(Error::from)
            };
            let theta_deg = axis("theta_deg")?;
            let freq_hz = axis("freq_hz")?;
            let mut columns = Vec::new();
            for (k, val) in obj {
                if k == "theta_deg" || k == "freq_hz" {
                    continue;
                }
                columns.push(Column {
                    csv_name: k.clone(),
                    json_name: k.clone(),
                    values: serde_json::from_value(val.clone())?,
                });
            }
            let grid = Grid2d {
                theta_deg,
                freq_hz,
                columns,
            };
            grid.check()?;
            Ok(grid)
        }
    }
}

/// Writes a per-frame, per-bin grid (CDR in dB or gains). CSV is long format
/// `frame,time_s,freq_hz,value`; JSON is `{time_s, freq_hz, values}` with one row per frame.
pub fn export_tf_grid(
    grid: &TfGrid<f64>,
    bin_freqs: &[f64],
    frame_period_s: f64,
    path: impl AsRef<Path>,
    format: ExportFormat,
) -> Result<()> {
    check_tf(grid, bin_freqs)?;
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_tf_grid(grid, bin_freqs, frame_period_s, &mut w, format)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_tf_grid(
    grid: &TfGrid<f64>,
    bin_freqs: &[f64],
    frame_period_s: f64,
    out: impl Write,
    format: ExportFormat,
) -> Result<()> {
    check_tf(grid, bin_freqs)?;
    let times: Vec<f64> = (0..grid.n_frames())
        .map(|k| k as f64 * frame_period_s)
        .collect();
    match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["frame", "time_s", "freq_hz", "value"])?;
            for (k, frame) in grid.frames().enumerate() {
                for (f, v) in bin_freqs.iter().zip(frame) {
                    w.write_record([
                        k.to_string(),
                        times[k].to_string(),
                        f.to_string(),
                        v.to_string(),
                    ])?;
                }
            }
            w.flush().map_err(csv::Error::from)?;
        }
        ExportFormat::Json => {
            let rows: Vec<&[f64]> = grid.frames().collect();
            serde_json::to_writer(
                out,
                &json!({ "time_s": times, "freq_hz": bin_freqs, "values": rows }),
            )?;
        }
    }
    Ok(())
}

fn check_tf(grid: &TfGrid<f64>, bin_freqs: &[f64]) -> Result<()> {
    let (n_frames, n_bins) = grid.shape();
    if n_frames == 0 || n_bins == 0 {
        return Err(Error::EmptyGrid);
    }
    if bin_freqs.len() != n_bins {
        return Err(Error::ShapeMismatch(format!(
            "{} bin frequencies for {n_bins} bins",
            bin_freqs.len()
        )));
    }
    Ok(())
}
