//! RIFF/WAVE ingest and emit: PCM 16-bit little-endian, mono only.
//!
//! The reader walks the chunk list, so files with extra chunks (LIST, fact)
//! load fine; anything that is not 16-bit mono PCM at 8 or 16 kHz is
//! rejected with a typed error rather than resampled or converted.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// PCM audio exactly as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Waveform {
    pub samples: Vec<i16>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

#[derive(Debug)]
pub enum WavError {
    Io(io::Error),
    /// Not a RIFF/WAVE file, or chunk structure is broken.
    MalformedHeader(String),
    /// Valid WAV, but not 16-bit mono PCM at a supported rate.
    UnsupportedEncoding(String),
    /// Data chunk present but holds zero samples.
    EmptyData,
}

impl std::fmt::Display for WavError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WavError::Io(e) => write!(f, "wav i/o error: {e}"),
            WavError::MalformedHeader(m) => write!(f, "malformed wav header: {m}"),
            WavError::UnsupportedEncoding(m) => write!(f, "unsupported wav encoding: {m}"),
            WavError::EmptyData => write!(f, "wav data chunk is empty"),
        }
    }
}

impl std::error::Error for WavError {}

impl From<io::Error> for WavError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            WavError::MalformedHeader("unexpected end of file".into())
        } else {
            WavError::Io(e)
        }
    }
}

const SUPPORTED_RATES: [u32; 2] = [8000, 16000];

fn read_u16(r: &mut impl Read) -> Result<u16, WavError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32, WavError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Read a mono 16-bit PCM WAV file. No resampling, no conversion.
pub fn read_wav(path: &Path) -> Result<Waveform, WavError> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);

    let mut riff = [0u8; 4];
    r.read_exact(&mut riff)?;
    if &riff != b"RIFF" {
        return Err(WavError::MalformedHeader("missing RIFF tag".into()));
    }
    let _riff_size = read_u32(&mut r)?;
    let mut wave = [0u8; 4];
    r.read_exact(&mut wave)?;
    if &wave != b"WAVE" {
        return Err(WavError::MalformedHeader("missing WAVE tag".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    loop {
        let mut tag = [0u8; 4];
        match r.read_exact(&mut tag) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                return Err(WavError::MalformedHeader("no data chunk".into()))
            }
            Err(e) => return Err(e.into()),
        }
        let size = read_u32(&mut r)? as usize;
        match &tag {
            b"fmt " => {
                if size < 16 {
                    return Err(WavError::MalformedHeader("fmt chunk too small".into()));
                }
                let audio_format = read_u16(&mut r)?;
                let channels = read_u16(&mut r)?;
                let sample_rate = read_u32(&mut r)?;
                let _byte_rate = read_u32(&mut r)?;
                let _block_align = read_u16(&mut r)?;
                let bits = read_u16(&mut r)?;
                // Skip any fmt extension bytes.
                skip(&mut r, size - 16)?;
                fmt = Some((audio_format, channels, sample_rate, bits));
            }
            b"data" => {
                let (audio_format, channels, sample_rate, bits) = fmt.ok_or_else(|| {
                    WavError::MalformedHeader("data chunk before fmt chunk".into())
                })?;
                if audio_format != 1 {
                    return Err(WavError::UnsupportedEncoding(format!(
                        "audio format {audio_format}, only PCM (1) supported"
                    )));
                }
                if channels != 1 {
                    return Err(WavError::UnsupportedEncoding(format!(
                        "{channels} channels, only mono supported"
                    )));
                }
                if bits != 16 {
                    return Err(WavError::UnsupportedEncoding(format!(
                        "{bits} bits per sample, only 16 supported"
                    )));
                }
                if !SUPPORTED_RATES.contains(&sample_rate) {
                    return Err(WavError::UnsupportedEncoding(format!(
                        "sample rate {sample_rate}, supported: {SUPPORTED_RATES:?}"
                    )));
                }
                if size == 0 {
                    return Err(WavError::EmptyData);
                }
                if size % 2 != 0 {
                    return Err(WavError::MalformedHeader(
                        "odd data chunk size for 16-bit samples".into(),
                    ));
                }
                let mut bytes = vec![0u8; size];
                r.read_exact(&mut bytes)?;
                let samples = bytes
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]))
                    .collect();
                return Ok(Waveform {
                    samples,
                    sample_rate_hz: sample_rate,
                });
            }
            _ => {
                // Unknown chunk: skip (chunks are word-aligned).
                skip(&mut r, size + (size & 1))?;
            }
        }
    }
}

fn skip(r: &mut impl Read, n: usize) -> Result<(), WavError> {
    let mut remaining = n as u64;
    let mut buf = [0u8; 4096];
    while remaining > 0 {
        let take = remaining.min(buf.len() as u64) as usize;
        r.read_exact(&mut buf[..take])?;
        remaining -= take as u64;
    }
    Ok(())
}

/// Write a canonical 44-byte-header mono PCM WAV file.
pub fn write_wav(path: &Path, wav: &Waveform) -> Result<(), WavError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let data_len = (wav.samples.len() * 2) as u32;
    w.write_all(b"RIFF")?;
    w.write_all(&(36 + data_len).to_le_bytes())?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_all(&16u32.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?; // PCM
    w.write_all(&1u16.to_le_bytes())?; // mono
    w.write_all(&wav.sample_rate_hz.to_le_bytes())?;
    w.write_all(&(wav.sample_rate_hz * 2).to_le_bytes())?; // byte rate
    w.write_all(&2u16.to_le_bytes())?; // block align
    w.write_all(&16u16.to_le_bytes())?; // bits per sample
    w.write_all(b"data")?;
    w.write_all(&data_len.to_le_bytes())?;
    let mut buf = Vec::with_capacity(wav.samples.len().min(16384) * 2);
    for chunk in wav.samples.chunks(16384) {
        buf.clear();
        for s in chunk {
            buf.extend_from_slice(&s.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("voxvec-wav-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn silence_round_trip_identity() {
        let path = tmp("silence.wav");
        let wav = Waveform {
            samples: vec![0i16; 16000],
            sample_rate_hz: 16000,
        };
        write_wav(&path, &wav).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples.len(), 16000);
        assert!(back.samples.iter().all(|&s| s == 0));
        assert_eq!(back.sample_rate_hz, 16000);
    }

    #[test]
    fn random_pcm_round_trip_is_byte_identical() {
        let mut rng = Rng::new(2024);
        let path = tmp("random.wav");
        let samples: Vec<i16> = (0..12345).map(|_| rng.next_u64() as i16).collect();
        let wav = Waveform {
            samples: samples.clone(),
            sample_rate_hz: 8000,
        };
        write_wav(&path, &wav).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back, wav);
        // Write the re-read waveform again: files must match byte for byte.
        let path2 = tmp("random2.wav");
        write_wav(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn stereo_is_unsupported_encoding() {
        let path = tmp("stereo.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 4).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes()); // stereo
        bytes.extend_from_slice(&16000u32.to_le_bytes());
        bytes.extend_from_slice(&64000u32.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_wav(&path),
            Err(WavError::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn garbage_is_malformed_header() {
        let path = tmp("garbage.wav");
        std::fs::write(&path, b"not a wav file at all").unwrap();
        assert!(matches!(read_wav(&path), Err(WavError::MalformedHeader(_))));
    }

    #[test]
    fn empty_data_chunk_is_its_own_error() {
        let path = tmp("empty.wav");
        let wav = Waveform {
            samples: vec![],
            sample_rate_hz: 16000,
        };
        write_wav(&path, &wav).unwrap();
        assert!(matches!(read_wav(&path), Err(WavError::EmptyData)));
    }

    #[test]
    fn unsupported_rate_is_rejected() {
        let path = tmp("rate.wav");
        let wav = Waveform {
            samples: vec![1, 2, 3],
            sample_rate_hz: 44100,
        };
        write_wav(&path, &wav).unwrap();
        assert!(matches!(
            read_wav(&path),
            Err(WavError::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn extra_chunks_are_skipped() {
        let path = tmp("extra_chunk.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 12 + 4).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&16000u32.to_le_bytes());
        bytes.extend_from_slice(&32000u32.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(b"INFO");
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&7i16.to_le_bytes());
        bytes.extend_from_slice(&(-7i16).to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let wav = read_wav(&path).unwrap();
        assert_eq!(wav.samples, vec![7, -7]);
    }
}
