//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use crate::analysis::{
    default_freq_grid, default_theta_grid, export_grid, export_tf_grid, itd_table,
    robustness_surface, write_grid, write_tf_grid, ExportFormat, Grid2d,
};
use crate::config::{DiffuseModel, Estimator, FieldModel, PipelineConfig};
use crate::dereverb::process_detailed;
use crate::error::{Error, Result};
use crate::grid::TfGrid;
use crate::signal_io::{read_wav, write_wav, StereoSignal, WavEncoding};
use crate::spatial::Geometry;
use crate::synth::{gen_field, FieldKind, FieldSpec};

#[derive(Debug, Parser)]
#[command(
    name = "bincdr",
    version,
    about = "Binaural coherent-to-diffuse ratio estimation and dereverberation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dereverberate a stereo (binaural) WAV file.
    Dereverb(DereverbArgs),
    /// Write the per-frame, per-bin CDR estimate (dB) of a stereo WAV file.
    Estimate(EstimateArgs),
    /// Generate a synthetic plane-wave, diffuse or mixed binaural field.
    Synth(SynthArgs),
    /// Tabulate free-field TDOA and binaural ITD (seconds) over angle and frequency.
    ItdTable(ItdArgs),
    /// Error surface (dB) of an estimator on binaural-model mixture coherence.
    Robustness(RobustnessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::Json => ExportFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Plane,
    Diffuse,
    Mixture,
}

/// Head/array geometry shared by all subcommands.
#[derive(Debug, Clone, Args)]
pub struct GeometryArgs {
    /// Microphone (ear) distance in meters [default: 0.17]
    #[arg(long, value_name = "METERS")]
    pub distance: Option<f64>,
    /// Speed of sound in m/s [default: 343]
    #[arg(long, value_name = "M_PER_S")]
    pub speed_of_sound: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Input stereo WAV file
    #[arg(long = "in", value_name = "WAV")]
    pub input: PathBuf,
    /// Direction of arrival in degrees, 0 = front, positive towards the right ear.
    /// Required by schwarz1/schwarz2
    #[arg(long, value_name = "DEGREES", allow_hyphen_values = true)]
    pub doa: Option<f64>,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// CDR estimator [default: schwarz3]
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<Estimator>,
    /// Coherence model of the direct sound [default: binaural]
    #[arg(long, value_parser = parse_field)]
    pub field: Option<FieldModel>,
    /// Coherence model of the diffuse sound [default: binaural]
    #[arg(long, value_parser = parse_diffuse)]
    pub diffuse: Option<DiffuseModel>,
    /// STFT frame length in samples [default: 512]
    #[arg(long, value_name = "SAMPLES")]
    pub frame: Option<usize>,
    /// STFT hop in samples [default: 128]
    #[arg(long, value_name = "SAMPLES")]
    pub hop: Option<usize>,
    /// Forgetting factor of the recursive coherence average, in (0, 1) [default: 0.68]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Oversubtraction factor of the gain rule (linear, >= 1) [default: 1.3]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Gain floor (linear amplitude, in (0, 1)) [default: 0.1]
    #[arg(long)]
    pub gmin: Option<f64>,
    /// Config file of `key = value` lines; flags override it
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DereverbArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Output WAV file (same length and encoding family as the input: 16-bit PCM)
    #[arg(long, value_name = "WAV")]
    pub out: PathBuf,
    /// Also write the CDR estimate in dB
    #[arg(long, value_name = "PATH")]
    pub dump_cdr: Option<PathBuf>,
    /// Also write the gain mask (linear)
    #[arg(long, value_name = "PATH")]
    pub dump_gain: Option<PathBuf>,
    /// Format of the dumps [default: from file extension, else csv]
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Output file for the CDR grid in dB [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format [default: from file extension, else csv]
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output stereo WAV file
    #[arg(long, value_name = "WAV")]
    pub out: PathBuf,
    /// Field type
    #[arg(long, value_enum, default_value = "mixture")]
    pub kind: KindArg,
    /// Source direction in degrees
    #[arg(
        long,
        value_name = "DEGREES",
        default_value_t = 0.0,
        allow_hyphen_values = true
    )]
    pub doa: f64,
    /// Broadband coherent-to-diffuse ratio of a mixture in dB
    #[arg(
        long,
        value_name = "DB",
        default_value_t = 0.0,
        allow_hyphen_values = true
    )]
    pub eta_in: f64,
    /// Duration in seconds
    #[arg(long, value_name = "SECONDS", default_value_t = 5.0)]
    pub duration: f64,
    /// Sample rate in Hz
    #[arg(long, value_name = "HZ", default_value_t = 16_000)]
    pub sample_rate: u32,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// RMS level of the generated noise (linear, full scale = 1)
    #[arg(long, default_value_t = 0.1)]
    pub level: f64,
    /// Delay model of the plane wave
    #[arg(long, value_parser = parse_field, default_value = "binaural")]
    pub field: FieldModel,
    /// Coherence model of the diffuse noise
    #[arg(long, value_parser = parse_diffuse, default_value = "binaural")]
    pub diffuse: DiffuseModel,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Put a sin^2 envelope of this rate (Hz) on the source
    #[arg(long, value_name = "HZ")]
    pub modulation: Option<f64>,
    /// Calibrate the CDR per frequency bin instead of broadband
    #[arg(long)]
    pub per_bin: bool,
    /// Write 32-bit float WAV instead of 16-bit PCM
    #[arg(long)]
    pub float: bool,
    /// Also write the coherent and diffuse parts next to --out (`*.coherent.wav`, `*.diffuse.wav`)
    #[arg(long)]
    pub write_components: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ItdArgs {
    /// Output file [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format [default: from file extension, else csv]
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Smallest angle in degrees
    #[arg(
        long,
        value_name = "DEGREES",
        default_value_t = 0.0,
        allow_hyphen_values = true
    )]
    pub theta_min: f64,
    /// Largest angle in degrees
    #[arg(
        long,
        value_name = "DEGREES",
        default_value_t = 90.0,
        allow_hyphen_values = true
    )]
    pub theta_max: f64,
    /// Angle step in degrees
    #[arg(long, value_name = "DEGREES", default_value_t = 5.0)]
    pub theta_step: f64,
    /// Frequencies in Hz, comma separated [default: 25 log-spaced points, 125 Hz to 8 kHz]
    #[arg(long, value_name = "HZ,...", value_delimiter = ',')]
    pub freqs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct RobustnessArgs {
    /// Input CDR of the scenario in dB
    #[arg(long, value_name = "DB", allow_hyphen_values = true)]
    pub eta_in: f64,
    /// Estimator under test
    #[arg(long, value_parser = parse_estimator, default_value = "schwarz2")]
    pub estimator: Estimator,
    /// Models the estimator assumes: free_field (TDOA + sinc) or binaural
    #[arg(long, value_parser = parse_field, default_value = "free_field")]
    pub estimator_field: FieldModel,
    /// Output file [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format [default: from file extension, else csv]
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[command(flatten)]
    pub geometry: GeometryArgs,
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_field(s: &str) -> std::result::Result<FieldModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_diffuse(s: &str) -> std::result::Result<DiffuseModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `argv` (including the program name), runs the command and returns the exit
/// code: 0 on success, 2 for usage or configuration errors, 1 for I/O failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::MissingDoa(_) => 2,
        _ => 1,
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Dereverb(a) => dereverb(a),
        Command::Estimate(a) => estimate(a),
        Command::Synth(a) => synth(a),
        Command::ItdTable(a) => itd(a),
        Command::Robustness(a) => robustness(a),
    }
}

fn geometry(args: &GeometryArgs) -> Result<Geometry> {
    let d = Geometry::default();
    Geometry::new(
        args.distance.unwrap_or(d.distance_m),
        args.speed_of_sound.unwrap_or(d.speed_of_sound),
    )
}

fn doa_radians(degrees: f64) -> Result<f64> {
    if !(-180.0..=180.0).contains(&degrees) {
        return Err(Error::InvalidConfig(format!(
            "--doa {degrees} outside [-180, 180] degrees"
        )));
    }
    Ok(degrees.to_radians())
}

/// Defaults, then the config file, then flags.
pub fn pipeline_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let mut c = match &args.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = args.geometry.distance {
        c.mic_distance_m = v;
    }
    if let Some(v) = args.geometry.speed_of_sound {
        c.speed_of_sound = v;
    }
    if let Some(v) = args.doa {
        c.doa_rad = Some(doa_radians(v)?);
    }
    if let Some(v) = args.estimator {
        c.estimator = v;
    }
    if let Some(v) = args.field {
        c.field_model = v;
    }
    if let Some(v) = args.diffuse {
        c.diffuse_model = v;
    }
    if let Some(v) = args.frame {
        c.frame_len = v;
    }
    if let Some(v) = args.hop {
        c.hop = v;
    }
    if let Some(v) = args.lambda {
        c.forgetting = v;
    }
    if let Some(v) = args.mu {
        c.mu = v;
    }
    if let Some(v) = args.gmin {
        c.gmin = v;
    }
    if !c.estimator.is_directional() && c.doa_rad.is_some() {
        warn!(
            "estimator {} does not use a DOA; ignoring --doa",
            c.estimator
        );
        c.doa_rad = None;
    }
    c.validate()?;
    Ok(c)
}

fn format_for(explicit: Option<FormatArg>, path: Option<&Path>) -> ExportFormat {
    match (explicit, path) {
        (Some(f), _) => f.into(),
        (None, Some(p)) => ExportFormat::from_path(p),
        (None, None) => ExportFormat::Csv,
    }
}

/// CDR in dB, with floored estimates written as `-cap` instead of `-inf`.
fn cdr_db_grid(cdr: &TfGrid<crate::cdr::CdrValue>, cap_db: f64) -> TfGrid<f64> {
    cdr.map(|c| c.db().max(-cap_db))
}

fn dereverb(a: &DereverbArgs) -> Result<()> {
    let config = pipeline_config(&a.pipeline)?;
    let input = read_wav(&a.pipeline.input)?;
    let p = process_detailed(&input, &config)?;
    let clipped = write_wav(&a.out, &p.output, WavEncoding::Pcm16)?;
    if clipped > 0 {
        warn!("{clipped} output samples clipped");
    }
    let period = config.hop as f64 / input.sample_rate as f64;
    if let Some(path) = &a.dump_cdr {
        let grid = cdr_db_grid(&p.cdr, config.cdr_cap_db);
        export_tf_grid(
            &grid,
            &p.bin_freqs,
            period,
            path,
            format_for(a.format, Some(path)),
        )?;
    }
    if let Some(path) = &a.dump_gain {
        export_tf_grid(
            &p.mask.gains,
            &p.bin_freqs,
            period,
            path,
            format_for(a.format, Some(path)),
        )?;
    }
    Ok(())
}

fn estimate(a: &EstimateArgs) -> Result<()> {
    let config = pipeline_config(&a.pipeline)?;
    let input = read_wav(&a.pipeline.input)?;
    let p = process_detailed(&input, &config)?;
    let grid = cdr_db_grid(&p.cdr, config.cdr_cap_db);
    let period = config.hop as f64 / input.sample_rate as f64;
    let format = format_for(a.format, a.out.as_deref());
    match &a.out {
        Some(path) => export_tf_grid(&grid, &p.bin_freqs, period, path, format),
        None => to_stdout(|w| write_tf_grid(&grid, &p.bin_freqs, period, w, format)),
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let geo = geometry(&a.geometry)?;
    let spec = FieldSpec {
        kind: match a.kind {
            KindArg::Plane => FieldKind::PlaneWave,
            KindArg::Diffuse => FieldKind::Diffuse,
            KindArg::Mixture => FieldKind::Mixture,
        },
        theta: doa_radians(a.doa)?,
        cdr_db: a.eta_in,
        field_model: a.field,
        diffuse_model: a.diffuse,
        duration_s: a.duration,
        sample_rate: a.sample_rate,
        seed: a.seed,
        level: a.level,
        per_bin_calibration: a.per_bin,
        source_modulation_hz: a.modulation,
    };
    let m = gen_field(&spec, &geo)?;
    let encoding = if a.float {
        WavEncoding::Float32
    } else {
        WavEncoding::Pcm16
    };
    let write = |path: &Path, s: &StereoSignal| -> Result<()> {
        let clipped = write_wav(path, s, encoding)?;
        if clipped > 0 {
            warn!("{clipped} samples clipped in {}", path.display());
        }
        Ok(())
    };
    write(&a.out, &m.mixture)?;
    if a.write_components {
        write(&a.out.with_extension("coherent.wav"), &m.coherent)?;
        write(&a.out.with_extension("diffuse.wav"), &m.diffuse)?;
    }
    Ok(())
}

fn itd(a: &ItdArgs) -> Result<()> {
    let geo = geometry(&a.geometry)?;
    if !(a.theta_step > 0.0) || a.theta_max < a.theta_min {
        return Err(Error::InvalidConfig(
            "need --theta-step > 0 and --theta-max >= --theta-min".into(),
        ));
    }
    let n = ((a.theta_max - a.theta_min) / a.theta_step + 1e-9).floor() as usize;
    let thetas: Vec<f64> = (0..=n)
        .map(|i| (a.theta_min + i as f64 * a.theta_step).to_radians())
        .collect();
    let freqs = a.freqs.clone().unwrap_or_else(default_freq_grid);
    if freqs.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
        return Err(Error::InvalidConfig("--freqs must be non-negative".into()));
    }
    let grid = Grid2d::from_itd_rows(&itd_table(&thetas, &freqs, &geo))?;
    emit_grid(
        &grid,
        a.out.as_deref(),
        format_for(a.format, a.out.as_deref()),
    )
}

fn robustness(a: &RobustnessArgs) -> Result<()> {
    let geo = geometry(&a.geometry)?;
    let surface = robustness_surface(
        a.eta_in,
        &default_theta_grid(),
        &default_freq_grid(),
        &geo,
        a.estimator,
        a.estimator_field,
    )?;
    let grid = Grid2d::from(&surface);
    emit_grid(
        &grid,
        a.out.as_deref(),
        format_for(a.format, a.out.as_deref()),
    )
}

fn emit_grid(grid: &Grid2d, out: Option<&Path>, format: ExportFormat) -> Result<()> {
    match out {
        Some(path) => export_grid(grid, path, format),
        None => to_stdout(|w| write_grid(grid, w, format)),
    }
}

fn to_stdout(f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    f(&mut lock)?;
    lock.flush().map_err(|e| Error::io("<stdout>", e))
}
