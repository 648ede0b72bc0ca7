use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};

/// A stack of stride-2 3x3 convolution blocks (conv + bias + ReLU)
/// followed by adaptive average pooling to a square grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    /// Square input resolution the encoder expects.
    pub resolution: usize,
    /// Output channels of each block; the input has 3.
    pub channels: Vec<usize>,
    /// Side of the pooled output grid.
    pub grid: usize,
}

impl EncoderSpec {
    /// 4 blocks, 64x64 input, 32 channels on a 4x4 grid: 512 features.
    pub fn desk() -> Self {
        Self {
            resolution: 64,
            channels: vec![8, 16, 32, 32],
            grid: 4,
        }
    }

    /// 256x256 input pooled to 128 channels on an 8x8 grid: 8192 features
    /// per stream.
    pub fn full_scale() -> Self {
        Self {
            resolution: 256,
            channels: vec![16, 32, 64, 128],
            grid: 8,
        }
    }

    pub fn out_channels(&self) -> usize {
        *self.channels.last().expect("validated encoder has blocks")
    }

    /// Spatial side after the convolution blocks, before pooling.
    pub fn conv_side(&self) -> usize {
        self.channels.iter().fold(self.resolution, |s, _| s.div_ceil(2))
    }

    /// Flattened per-stream feature length.
    pub fn d_flat(&self) -> usize {
        self.out_channels() * self.grid * self.grid
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(ArtError::Config("encoder needs at least one block with >0 channels".into()));
        }
        if self.resolution == 0 || self.grid == 0 {
            return Err(ArtError::Config("encoder resolution and grid must be positive".into()));
        }
        if self.grid > self.conv_side() {
            return Err(ArtError::Config(format!(
                "pooled grid {} larger than the {} px conv output",
                self.grid,
                self.conv_side()
            )));
        }
        Ok(())
    }
}

/// Architecture of the verifier. Stored in checkpoints and compared on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    pub encoder: EncoderSpec,
    /// Width of the bi-attention projections.
    pub d_att: usize,
    pub use_attention: bool,
    /// Feed the content head `[h_F, h_B, ...]` and the spatial head
    /// `[h_F, h_S, ...]` instead of the crossed default.
    pub swap_fusion_streams: bool,
    /// Dropout rate on the fused vectors during training.
    pub dropout: f64,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderSpec::desk(),
            d_att: 30,
            use_attention: true,
            swap_fusion_streams: false,
            dropout: 0.3,
        }
    }
}

impl VerifierConfig {
    pub fn full_scale() -> Self {
        Self {
            encoder: EncoderSpec::full_scale(),
            ..Self::default()
        }
    }

    pub fn d_flat(&self) -> usize {
        self.encoder.d_flat()
    }

    /// Length of each fused vector `U_C` / `U_S`.
    pub fn fused_len(&self) -> usize {
        3 * self.d_flat() + if self.use_attention { self.d_att } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.use_attention && self.d_att == 0 {
            return Err(ArtError::Config("attention width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ArtError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}
