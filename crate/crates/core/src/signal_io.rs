//! Two-channel WAV input/output.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// A binaural (left/right) time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoSignal {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub sample_rate: u32,
}

impl StereoSignal {
    pub fn new(left: Vec<f64>, right: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let signal = Self {
            left,
            right,
            sample_rate,
        };
        signal.validate()?;
        Ok(signal)
    }

    pub fn silent(len: usize, sample_rate: u32) -> Self {
        Self {
            left: vec![0.0; len],
            right: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.left.len() != self.right.len() {
            return Err(Error::InvalidSignal(format!(
                "channel lengths differ ({} vs {})",
                self.left.len(),
                self.right.len()
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidSignal("sample rate must be positive".into()));
        }
        if self.left.iter().chain(&self.right).any(|x| !x.is_finite()) {
            return Err(Error::InvalidSignal("non-finite sample".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channels(&self) -> [&[f64]; 2] {
        [&self.left, &self.right]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Pcm16,
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<StereoSignal> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 2 {
        return Err(Error::ChannelCount {
            found: spec.channels,
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Int, bits) => {
            return Err(Error::UnsupportedEncoding {
                bits,
                format: "integer PCM",
            })
        }
        (SampleFormat::Float, bits) => {
            return Err(Error::UnsupportedEncoding {
                bits,
                format: "float",
            })
        }
    };
    let (left, right) = interleaved.chunks_exact(2).map(|f| (f[0], f[1])).unzip();
    StereoSignal::new(left, right, spec.sample_rate)
}

/// Writes `signal` and returns the number of samples clipped to [-1, 1].
pub fn write_wav(
    path: impl AsRef<Path>,
    signal: &StereoSignal,
    encoding: WavEncoding,
) -> Result<usize> {
    signal.validate()?;
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 2,
        sample_rate: signal.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => other.into(),
    })?;
    let mut clipped = 0;
    for (&l, &r) in signal.left.iter().zip(&signal.right) {
        for x in [l, r] {
            let y = if x.abs() > 1.0 {
                clipped += 1;
                x.signum()
            } else {
                x
            };
            match encoding {
                WavEncoding::Pcm16 => {
                    writer.write_sample((y * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?
                }
                WavEncoding::Float32 => writer.write_sample(y as f32)?,
            }
        }
    }
    writer.finalize()?;
    if clipped > 0 {
        log::warn!("{}: clipped {clipped} samples", path.display());
    }
    Ok(clipped)
}
