use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FRAME_HEIGHT: usize = 64;
pub const FRAME_WIDTH: usize = 44;

pub const SEQUENCE_MAGIC: &[u8; 4] = b"GSEQ";
pub const SEQUENCE_VERSION: u32 = 1;
pub const SEQUENCE_HEADER_LEN: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attire {
    Coat,
    NoCoat,
    Backpack,
}

impl Attire {
    pub const ALL: [Attire; 3] = [Attire::NoCoat, Attire::Coat, Attire::Backpack];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Toward,
    Away,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Toward, Direction::Away];
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub subject_id: String,
    pub view_id: u8,
    pub attire: Attire,
    pub direction: Direction,
}

impl SequenceMeta {
    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.view_id) {
            return Err(Error::Data(format!("view_id {} outside 1..=6", self.view_id)));
        }
        if self.subject_id.is_empty() {
            return Err(Error::Data("empty subject_id".into()));
        }
        Ok(())
    }
}

/// Binary silhouettes stored frame-major, then row-major, one byte per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SilhouetteSequence {
    frames: Vec<u8>,
    len: usize,
    height: usize,
    width: usize,
    pub meta: SequenceMeta,
}

impl SilhouetteSequence {
    pub fn new(frames: Vec<u8>, len: usize, height: usize, width: usize, meta: SequenceMeta) -> Result<Self> {
        if len == 0 || height == 0 || width == 0 {
            return Err(Error::Data(format!("empty sequence geometry {len}×{height}×{width}")));
        }
        if frames.len() != len * height * width {
            return Err(Error::Data(format!(
                "{} pixels for {len}×{height}×{width} frames",
                frames.len()
            )));
        }
        if let Some(v) = frames.iter().find(|&&v| v > 1) {
            return Err(Error::Data(format!("non-binary pixel value {v}")));
        }
        Ok(Self {
            frames,
            len,
            height,
            width,
            meta,
        })
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn frame_size(&self) -> usize {
        self.height * self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &[u8] {
        &self.frames[i * self.frame_size()..(i + 1) * self.frame_size()]
    }

    pub fn foreground_count(&self, i: usize) -> usize {
        self.frame(i).iter().map(|&v| v as usize).sum()
    }

    fn with_frames(&self, frames: Vec<u8>, len: usize) -> Self {
        Self {
            frames,
            len,
            height: self.height,
            width: self.width,
            meta: self.meta.clone(),
        }
    }

    /// Frames `[start, start + len)`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.len {
            return Err(Error::InvalidArgument(format!(
                "window {start}+{len} outside {} frames",
                self.len
            )));
        }
        let fs = self.frame_size();
        Ok(self.with_frames(self.frames[start * fs..(start + len) * fs].to_vec(), len))
    }

    /// Tiles the whole sequence until it is `target_len` frames long:
    /// output frame `i` is input frame `i mod T`.
    pub fn pad_by_repetition(&self, target_len: usize) -> Result<Self> {
        if target_len < self.len {
            return Err(Error::InvalidArgument(format!(
                "target length {target_len} shorter than sequence ({})",
                self.len
            )));
        }
        let fs = self.frame_size();
        let mut frames = Vec::with_capacity(target_len * fs);
        for i in 0..target_len {
            frames.extend_from_slice(self.frame(i % self.len));
        }
        debug_assert_eq!(frames.len(), target_len * fs);
        Ok(self.with_frames(frames, target_len))
    }

    /// Random run of `len` consecutive frames, or the repetition-padded
    /// sequence when it is shorter than `len`.
    pub fn sample_training_clip<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidArgument("clip length must be >= 1".into()));
        }
        if self.len < len {
            return self.pad_by_repetition(len);
        }
        let start = if self.len == len {
            0
        } else {
            rng.gen_range(0..=self.len - len)
        };
        self.window(start, len)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)?;
        let mut out = Vec::with_capacity(SEQUENCE_HEADER_LEN + meta.len() + self.frames.len());
        out.extend_from_slice(SEQUENCE_MAGIC);
        for v in [
            SEQUENCE_VERSION,
            self.len as u32,
            self.height as u32,
            self.width as u32,
            meta.len() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&meta);
        out.extend_from_slice(&self.frames);
        Ok(out)
    }

    pub fn decode(bytes: &[u8], origin: &Path) -> Result<Self> {
        let header = SequenceHeader::parse(bytes, origin)?;
        let body = &bytes[SEQUENCE_HEADER_LEN..];
        let meta_len = header.meta_len as usize;
        if body.len() < meta_len {
            return Err(Error::Truncated(format!("{origin:?}: metadata block")));
        }
        let meta: SequenceMeta = serde_json::from_slice(&body[..meta_len])?;
        let payload = &body[meta_len..];
        let expected = header.frames as usize * header.height as usize * header.width as usize;
        if payload.len() < expected {
            return Err(Error::Truncated(format!(
                "{origin:?}: payload has {} of {expected} bytes",
                payload.len()
            )));
        }
        if payload.len() > expected {
            return Err(Error::Format(format!("{origin:?}: trailing bytes after payload")));
        }
        Self::new(
            payload.to_vec(),
            header.frames as usize,
            header.height as usize,
            header.width as usize,
            meta,
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

/// Fixed 24-byte prefix of a sequence file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SequenceHeader {
    pub version: u32,
    pub frames: u32,
    pub height: u32,
    pub width: u32,
    pub meta_len: u32,
}

impl SequenceHeader {
    pub fn parse(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != SEQUENCE_MAGIC {
            return Err(Error::BadMagic {
                path: origin.to_path_buf(),
            });
        }
        if bytes.len() < SEQUENCE_HEADER_LEN {
            return Err(Error::Truncated(format!("{origin:?}: header")));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let version = word(0);
        if version != SEQUENCE_VERSION {
            return Err(Error::Version {
                found: version,
                expected: SEQUENCE_VERSION,
            });
        }
        Ok(Self {
            version,
            frames: word(1),
            height: word(2),
            width: word(3),
            meta_len: word(4),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn meta() -> SequenceMeta {
        SequenceMeta {
            subject_id: "s001".into(),
            view_id: 3,
            attire: Attire::Backpack,
            direction: Direction::Away,
        }
    }

    /// Frame `i` is filled with bit `i % 2` except pixel 0 which encodes `i % 2 == 0`.
    fn numbered(len: usize) -> SilhouetteSequence {
        let (h, w) = (4, 3);
        let mut frames = Vec::new();
        for i in 0..len {
            for p in 0..h * w {
                frames.push(((i >> (p % 7)) & 1) as u8);
            }
        }
        SilhouetteSequence::new(frames, len, h, w, meta()).unwrap()
    }

    #[test]
    fn pad_tiles_whole_sequence() {
        let s = numbered(25);
        let p = s.pad_by_repetition(60).unwrap();
        assert_eq!(p.len(), 60);
        for i in 0..60 {
            assert_eq!(p.frame(i), s.frame(i % 25));
        }
        assert_eq!(p.meta, s.meta);
        assert_eq!(numbered(60).pad_by_repetition(60).unwrap(), numbered(60));
        let one = numbered(1).pad_by_repetition(60).unwrap();
        assert!((0..60).all(|i| one.frame(i) == numbered(1).frame(0)));
    }

    #[test]
    fn pad_rejects_shrinking() {
        assert!(numbered(10).pad_by_repetition(5).is_err());
    }

    #[test]
    fn training_clips() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let long = numbered(120);
        for _ in 0..50 {
            let c = long.sample_training_clip(60, &mut rng).unwrap();
            assert_eq!(c.len(), 60);
            let start = (0..=60).find(|&s| long.window(s, 60).unwrap() == c);
            assert!(start.is_some());
        }
        let exact = numbered(60);
        assert_eq!(exact.sample_training_clip(60, &mut rng).unwrap(), exact);
        let short = numbered(45);
        assert_eq!(
            short.sample_training_clip(60, &mut rng).unwrap(),
            short.pad_by_repetition(60).unwrap()
        );
    }

    #[test]
    fn file_size_arithmetic() {
        let s = SilhouetteSequence::new(vec![0; 60 * 64 * 44], 60, 64, 44, meta()).unwrap();
        let bytes = s.encode().unwrap();
        let meta_len = serde_json::to_vec(&s.meta).unwrap().len();
        assert_eq!(bytes.len(), 24 + meta_len + 60 * 64 * 44);
    }

    #[test]
    fn decode_errors() {
        let s = numbered(3);
        let bytes = s.encode().unwrap();
        let p = Path::new("x.gseq");

        let mut bad = bytes.clone();
        bad[0] = b'X';
        let err = SilhouetteSequence::decode(&bad, p).unwrap_err();
        assert!(err.to_string().contains("bad magic"));

        let err = SilhouetteSequence::decode(&bytes[..bytes.len() - 1], p).unwrap_err();
        assert!(matches!(err, Error::Truncated(_)));

        let mut nonbinary = bytes.clone();
        *nonbinary.last_mut().unwrap() = 2;
        assert!(matches!(SilhouetteSequence::decode(&nonbinary, p), Err(Error::Data(_))));

        let mut version = bytes;
        version[4] = 9;
        assert!(matches!(
            SilhouetteSequence::decode(&version, p),
            Err(Error::Version { .. })
        ));
    }
}
