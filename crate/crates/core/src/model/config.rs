use serde::{Deserialize, Serialize};

use crate::data::{FRAME_HEIGHT, FRAME_WIDTH};
use crate::error::{Error, Result};

/// One backbone block: dual-branch 3D convolution, optional temporal
/// compression, optional 2×2 spatial max pooling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Horizontal bands of the local branch.
    pub parts: usize,
    pub spatial_kernel: usize,
    pub temporal_kernel: usize,
    /// Number of temporal groups; `None` leaves the time axis untouched.
    pub tcl_groups: Option<usize>,
    pub scl_enabled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub clip_len: usize,
    pub height: usize,
    pub width: usize,
    pub blocks: Vec<BlockConfig>,
    pub leaky_slope: f64,
    /// Separate local-branch kernels per band instead of one shared kernel.
    #[serde(default)]
    pub per_part_weights: bool,
    pub margin: f64,
}

/// `C×T×H×W` extents.
pub type Extents = [usize; 4];

/// Output extents of every block plus the embedding width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeTrace {
    pub input: Extents,
    pub blocks: Vec<Extents>,
    /// Frames consumed per TCL group in each block (`None` without TCL).
    pub tcl_group_sizes: Vec<Option<usize>>,
    pub embedding_dim: usize,
}

impl BlockConfig {
    fn with(in_channels: usize, out_channels: usize, tcl_groups: Option<usize>, scl_enabled: bool) -> Self {
        Self {
            in_channels,
            out_channels,
            parts: 16,
            spatial_kernel: 3,
            temporal_kernel: 5,
            tcl_groups,
            scl_enabled,
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::canonical()
    }
}

impl ModelConfig {
    /// Published geometry: 60-frame 64×44 clips, widths 32/64/128, 16 parts,
    /// 3×3×5 kernels, 20 temporal groups in block 1 and one in block 3.
    pub fn canonical() -> Self {
        Self::with_channels([32, 64, 128])
    }

    /// Canonical geometry with different block widths.
    pub fn with_channels(c: [usize; 3]) -> Self {
        Self {
            clip_len: 60,
            height: FRAME_HEIGHT,
            width: FRAME_WIDTH,
            blocks: vec![
                BlockConfig::with(1, c[0], Some(20), true),
                BlockConfig::with(c[0], c[1], None, true),
                BlockConfig::with(c[1], c[2], Some(1), false),
            ],
            leaky_slope: 0.1,
            per_part_weights: false,
            margin: 0.2,
        }
    }

    /// Widths 4/8/16 on 12×16×12 clips; small enough for exhaustive gradient checks.
    pub fn tiny() -> Self {
        let block = |i, o, tcl, scl| BlockConfig {
            in_channels: i,
            out_channels: o,
            parts: 4,
            spatial_kernel: 3,
            temporal_kernel: 5,
            tcl_groups: tcl,
            scl_enabled: scl,
        };
        Self {
            clip_len: 12,
            height: 16,
            width: 12,
            blocks: vec![
                block(1, 4, Some(4), true),
                block(4, 8, None, true),
                block(8, 16, Some(1), false),
            ],
            leaky_slope: 0.1,
            per_part_weights: false,
            margin: 0.2,
        }
    }

    pub fn set_temporal_kernel(&mut self, tau: usize) {
        for b in &mut self.blocks {
            b.temporal_kernel = tau;
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.trace().map(|t| t.embedding_dim).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.trace().map(|_| ())
    }

    /// Checks every block invariant and returns the resulting shape trace.
    pub fn trace(&self) -> Result<ShapeTrace> {
        if self.blocks.is_empty() {
            return Err(Error::config("model.blocks", "at least one block is required"));
        }
        if self.clip_len == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::config("model.clip_len", "clip extents must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::config("model.leaky_slope", "must lie in [0, 1)"));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::config("model.margin", "must be non-negative"));
        }
        let input = [1, self.clip_len, self.height, self.width];
        let [mut c, mut t, mut h, mut w] = input;
        let mut blocks = Vec::new();
        let mut groups = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let field = |name: &str| format!("model.blocks[{i}].{name}");
            if b.in_channels != c {
                return Err(Error::config(
                    field("in_channels"),
                    format!("expected {c} to match the previous block"),
                ));
            }
            if b.out_channels == 0 {
                return Err(Error::config(field("out_channels"), "must be >= 1"));
            }
            if b.parts == 0 || h % b.parts != 0 {
                return Err(Error::config(
                    field("parts"),
                    format!("{} parts do not divide block input height {h}", b.parts),
                ));
            }
            if b.spatial_kernel % 2 == 0 {
                return Err(Error::config(field("spatial_kernel"), "must be odd"));
            }
            if b.temporal_kernel % 2 == 0 {
                return Err(Error::config(field("temporal_kernel"), "must be odd"));
            }
            c = b.out_channels;
            match b.tcl_groups {
                Some(n) if n == 0 || t % n != 0 => {
                    return Err(Error::config(
                        field("tcl_groups"),
                        format!("{n} groups do not divide block input length {t}"),
                    ))
                }
                Some(n) => {
                    groups.push(Some(t / n));
                    t = n;
                }
                None => groups.push(None),
            }
            if b.scl_enabled {
                h = h.div_ceil(2);
                w = w.div_ceil(2);
            }
            blocks.push([c, t, h, w]);
        }
        Ok(ShapeTrace {
            input,
            blocks,
            tcl_group_sizes: groups,
            embedding_dim: c * t,
        })
    }
}
