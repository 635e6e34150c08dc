//! Multichannel WAV input and output, and fixed-size block reading.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::spectral::FrameBlock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    #[default]
    Int16,
    Float32,
}

impl std::str::FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i16" | "pcm16" | "int16" => Ok(Self::Int16),
            "f32" | "float32" => Ok(Self::Float32),
            _ => Err(Error::InvalidConfig(format!(
                "unknown sample format `{s}` (use i16 or f32)"
            ))),
        }
    }
}

/// Decoded audio, one vector per channel, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate_hz: u32,
}

impl Audio {
    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

fn sample_scale(bits: u16) -> f64 {
    1.0 / (1u64 << (bits - 1)) as f64
}

pub fn read_wav(path: &Path) -> Result<Audio> {
    let reader = WavReader::open(path)?;
    read_from(reader)
}

pub fn read_from<R: Read>(reader: WavReader<R>) -> Result<Audio> {
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        HoundFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        HoundFormat::Int => {
            let k = sample_scale(spec.bits_per_sample);
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * k))
                .collect::<Result<_, _>>()?
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch.max(1)); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &v) in channels.iter_mut().zip(frame) {
            c.push(v);
        }
    }
    Ok(Audio {
        channels,
        sample_rate_hz: spec.sample_rate,
    })
}

fn check_channels(channels: &[Vec<f64>]) -> Result<usize> {
    let n = channels
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::MalformedBlock("no channels".into()))?;
    if let Some(bad) = channels.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch(n, bad.len()));
    }
    Ok(n)
}

pub fn write_to<W: Write + Seek>(
    w: W,
    channels: &[Vec<f64>],
    sample_rate_hz: u32,
    format: SampleFormat,
) -> Result<()> {
    let n = check_channels(channels)?;
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate: sample_rate_hz,
        bits_per_sample: match format {
            SampleFormat::Int16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Int16 => HoundFormat::Int,
            SampleFormat::Float32 => HoundFormat::Float,
        },
    };
    let mut writer = WavWriter::new(w, spec)?;
    for i in 0..n {
        for c in channels {
            let v = c[i].clamp(-1.0, 1.0);
            match format {
                SampleFormat::Int16 => writer.write_sample((v * 32767.0).round() as i16)?,
                SampleFormat::Float32 => writer.write_sample(v as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

pub fn write_wav(
    path: &Path,
    channels: &[Vec<f64>],
    sample_rate_hz: u32,
    format: SampleFormat,
) -> Result<()> {
    check_channels(channels)?;
    let file = BufWriter::new(File::create(path)?);
    write_to(file, channels, sample_rate_hz, format)
}

/// Splits in-memory channels into blocks of `frame_len`, zero-padding the
/// last one.
pub fn blocks(channels: &[Vec<f64>], frame_len: usize) -> impl Iterator<Item = FrameBlock> + '_ {
    let n = channels.first().map_or(0, Vec::len);
    (0..n.div_ceil(frame_len)).map(move |k| {
        let start = k * frame_len;
        let end = (start + frame_len).min(n);
        let chans = channels
            .iter()
            .map(|c| {
                let mut v = c[start..end.min(c.len())].to_vec();
                v.resize(frame_len, 0.0);
                v
            })
            .collect();
        FrameBlock::new(chans, start as u64).expect("equal-length channels")
    })
}

/// Streams blocks from a WAV file without loading it whole.
pub struct WavBlockReader<R: Read> {
    samples: WavSamples<R>,
    n_channels: usize,
    sample_rate_hz: u32,
    frame_len: usize,
    next_start: u64,
    done: bool,
}

enum WavSamples<R: Read> {
    Int(hound::WavIntoSamples<R, i32>, f64),
    Float(hound::WavIntoSamples<R, f32>),
}

impl<R: Read> WavSamples<R> {
    fn next(&mut self) -> Option<Result<f64>> {
        match self {
            WavSamples::Int(it, k) => it
                .next()
                .map(|s| s.map(|v| v as f64 * *k).map_err(Error::from)),
            WavSamples::Float(it) => it.next().map(|s| s.map(f64::from).map_err(Error::from)),
        }
    }
}

impl WavBlockReader<BufReader<File>> {
    pub fn open(path: &Path, frame_len: usize) -> Result<Self> {
        Self::new(WavReader::open(path)?, frame_len)
    }
}

impl<R: Read> WavBlockReader<R> {
    pub fn new(reader: WavReader<R>, frame_len: usize) -> Result<Self> {
        let spec = reader.spec();
        if spec.channels == 0 {
            return Err(Error::MalformedBlock("wav has no channels".into()));
        }
        let samples = match spec.sample_format {
            HoundFormat::Int => {
                WavSamples::Int(reader.into_samples(), sample_scale(spec.bits_per_sample))
            }
            HoundFormat::Float => WavSamples::Float(reader.into_samples()),
        };
        Ok(Self {
            samples,
            n_channels: spec.channels as usize,
            sample_rate_hz: spec.sample_rate,
            frame_len,
            next_start: 0,
            done: false,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }
}

impl<R: Read> Iterator for WavBlockReader<R> {
    type Item = Result<FrameBlock>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut chans = vec![Vec::with_capacity(self.frame_len); self.n_channels];
        let mut got = 0;
        'fill: while got < self.frame_len {
            for c in chans.iter_mut() {
                match self.samples.next() {
                    Some(Ok(v)) => c.push(v),
                    Some(Err(e)) => {
                        self.done = true;
                        return Some(Err(e));
                    }
                    None => {
                        self.done = true;
                        break 'fill;
                    }
                }
            }
            got += 1;
        }
        if got == 0 {
            return None;
        }
        for c in &mut chans {
            c.resize(self.frame_len, 0.0);
        }
        let start = self.next_start;
        self.next_start += self.frame_len as u64;
        Some(FrameBlock::new(chans, start))
    }
}
