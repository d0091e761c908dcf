//! Corpus and feature manifests.
//!
//! Corpus manifest: one UTF-8 line per utterance,
//! `<utt-id> <speaker-id> <wav-path> <duration-s>`.
//! Feature manifest: `<utt-id> <feat-path> <speaker-id>`.
//! Paths are relative to the manifest's directory; ids and paths must not
//! contain whitespace.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub utt_id: String,
    pub speaker_id: String,
    /// Relative to the manifest directory.
    pub path: String,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<Utterance>,
    /// Directory the paths are relative to.
    pub base_dir: PathBuf,
}

#[derive(Debug)]
pub enum ManifestError {
    Io(io::Error),
    Parse { line: usize, message: String },
}

impl std::fmt::Display for ManifestError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ManifestError::Io(e) => write!(f, "manifest i/o error: {e}"),
            ManifestError::Parse { line, message } => {
                write!(f, "manifest parse error at line {line}: {message}")
            }
        }
    }
}

impl std::error::Error for ManifestError {}

impl From<io::Error> for ManifestError {
    fn from(e: io::Error) -> Self {
        ManifestError::Io(e)
    }
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest, ManifestError> {
        let text = std::fs::read_to_string(path)?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(ManifestError::Parse {
                    line: i + 1,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let duration_s = fields[3].parse::<f64>().map_err(|e| ManifestError::Parse {
                line: i + 1,
                message: format!("bad duration: {e}"),
            })?;
            entries.push(Utterance {
                utt_id: fields[0].to_string(),
                speaker_id: fields[1].to_string(),
                path: fields[2].to_string(),
                duration_s,
            });
        }
        Ok(Manifest { entries, base_dir })
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        let mut out = String::new();
        for u in &self.entries {
            out.push_str(&format!(
                "{} {} {} {}\n",
                u.utt_id, u.speaker_id, u.path, u.duration_s
            ));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Absolute path of one utterance's audio.
    pub fn resolve(&self, u: &Utterance) -> PathBuf {
        self.base_dir.join(&u.path)
    }

    /// Sorted unique speaker ids.
    pub fn speakers(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|u| u.speaker_id.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Utterances grouped by speaker, utterance order preserved.
    pub fn by_speaker(&self) -> BTreeMap<String, Vec<&Utterance>> {
        let mut map: BTreeMap<String, Vec<&Utterance>> = BTreeMap::new();
        for u in &self.entries {
            map.entry(u.speaker_id.clone()).or_default().push(u);
        }
        map
    }

    /// Keep only utterances of the given speakers.
    pub fn filter_speakers(&self, keep: &[String]) -> Manifest {
        let set: std::collections::BTreeSet<&String> = keep.iter().collect();
        Manifest {
            entries: self
                .entries
                .iter()
                .filter(|u| set.contains(&u.speaker_id))
                .cloned()
                .collect(),
            base_dir: self.base_dir.clone(),
        }
    }
}

/// Feature manifest entry: utterance-id -> feature path, speaker-id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEntry {
    pub utt_id: String,
    pub path: String,
    pub speaker_id: String,
}

#[derive(Debug, Clone, Default)]
pub struct FeatureManifest {
    pub entries: Vec<FeatureEntry>,
    pub base_dir: PathBuf,
}

impl FeatureManifest {
    pub fn read(path: &Path) -> Result<FeatureManifest, ManifestError> {
        let text = std::fs::read_to_string(path)?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(ManifestError::Parse {
                    line: i + 1,
                    message: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            entries.push(FeatureEntry {
                utt_id: fields[0].to_string(),
                path: fields[1].to_string(),
                speaker_id: fields[2].to_string(),
            });
        }
        Ok(FeatureManifest { entries, base_dir })
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{} {} {}\n", e.utt_id, e.path, e.speaker_id));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn resolve(&self, e: &FeatureEntry) -> PathBuf {
        self.base_dir.join(&e.path)
    }

    pub fn speakers(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|u| u.speaker_id.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("voxvec-manifest-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn corpus_manifest_round_trip() {
        let m = Manifest {
            entries: vec![
                Utterance {
                    utt_id: "spk0-utt0".into(),
                    speaker_id: "spk0".into(),
                    path: "wav/spk0-utt0.wav".into(),
                    duration_s: 1.5,
                },
                Utterance {
                    utt_id: "spk1-utt0".into(),
                    speaker_id: "spk1".into(),
                    path: "wav/spk1-utt0.wav".into(),
                    duration_s: 2.0,
                },
            ],
            base_dir: PathBuf::new(),
        };
        let p = tmp("corpus.txt");
        m.write(&p).unwrap();
        let back = Manifest::read(&p).unwrap();
        assert_eq!(back.entries, m.entries);
        assert_eq!(back.speakers(), vec!["spk0".to_string(), "spk1".to_string()]);
    }

    #[test]
    fn malformed_line_is_a_parse_error() {
        let p = tmp("bad.txt");
        std::fs::write(&p, "only two fields\n").unwrap();
        assert!(matches!(
            Manifest::read(&p),
            Err(ManifestError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn filter_speakers_keeps_only_requested() {
        let m = Manifest {
            entries: vec![
                Utterance {
                    utt_id: "a".into(),
                    speaker_id: "s1".into(),
                    path: "a.wav".into(),
                    duration_s: 1.0,
                },
                Utterance {
                    utt_id: "b".into(),
                    speaker_id: "s2".into(),
                    path: "b.wav".into(),
                    duration_s: 1.0,
                },
            ],
            base_dir: PathBuf::new(),
        };
        let f = m.filter_speakers(&["s2".to_string()]);
        assert_eq!(f.entries.len(), 1);
        assert_eq!(f.entries[0].utt_id, "b");
    }
}
