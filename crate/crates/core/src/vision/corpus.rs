use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{Frame, VisionError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("index line {line}: {message}")]
    Index { line: usize, message: String },
    #[error("decoding {path}: {source}")]
    Decode { path: PathBuf, source: image::ImageError },
    #[error(transparent)]
    Frame(#[from] VisionError),
}

/// A directory of PGM (P5) frames plus an index file mapping each file name
/// to its capture timestamp.
///
/// Index lines are `<file name> <t_ms>`; blank lines and lines starting with
/// `#` are ignored. Timestamps must strictly increase.
#[derive(Debug, Clone)]
pub struct FrameCorpus {
    dir: PathBuf,
    entries: Vec<(String, u64)>,
}

impl FrameCorpus {
    pub const INDEX_FILE: &'static str = "index.txt";

    pub fn open(dir: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let dir = dir.as_ref().to_path_buf();
        let index = dir.join(Self::INDEX_FILE);
        let text = std::fs::read_to_string(&index).map_err(|source| CorpusError::Io {
            path: index.clone(),
            source,
        })?;
        let mut entries: Vec<(String, u64)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(name), Some(t), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(CorpusError::Index {
                    line: i + 1,
                    message: format!("expected `<file> <t_ms>`, got {line:?}"),
                });
            };
            let t_ms: u64 = t.parse().map_err(|_| CorpusError::Index {
                line: i + 1,
                message: format!("bad timestamp {t:?}"),
            })?;
            if let Some(&(_, prev)) = entries.last() {
                if t_ms <= prev {
                    return Err(CorpusError::Index {
                        line: i + 1,
                        message: format!("timestamp {t_ms} does not increase (previous {prev})"),
                    });
                }
            }
            entries.push((name.to_string(), t_ms));
        }
        Ok(Self { dir, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(&self, i: usize) -> Result<Frame, CorpusError> {
        let (name, t_ms) = &self.entries[i];
        let path = self.dir.join(name);
        let img = image::open(&path)
            .map_err(|source| CorpusError::Decode {
                path: path.clone(),
                source,
            })?
            .into_luma8();
        Ok(Frame::from_image(img, *t_ms)?)
    }

    pub fn frames(&self) -> impl Iterator<Item = Result<Frame, CorpusError>> + '_ {
        (0..self.entries.len()).map(move |i| self.load(i))
    }

    /// Writes `frames` as `frame_NNNNNN.pgm` plus the index file.
    pub fn write(dir: impl AsRef<Path>, frames: &[Frame]) -> Result<Self, CorpusError> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CorpusError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut index = String::new();
        for (i, f) in frames.iter().enumerate() {
            let name = format!("frame_{i:06}.pgm");
            let path = dir.join(&name);
            super::write_pgm(f.image(), &path).map_err(|source| CorpusError::Decode {
                path: path.clone(),
                source,
            })?;
            index.push_str(&format!("{name} {}\n", f.t_ms()));
        }
        let index_path = dir.join(Self::INDEX_FILE);
        std::fs::write(&index_path, index).map_err(io(&index_path))?;
        Self::open(dir)
    }
}
