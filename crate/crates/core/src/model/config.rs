use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the fusion classifier. Defaults are the reference
/// configuration: 3 encoder layers, 4 heads, width 512, dropout 0.426 and a
/// 512-128-64-1 head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionModelConfig {
    /// Width of each backbone token.
    pub feature_dim_in: usize,
    pub embed_dim: usize,
    pub encoder_layers: usize,
    pub attention_heads: usize,
    pub dropout: f64,
    pub head_layer_sizes: Vec<usize>,
    pub tokens_per_view: usize,
    pub use_positional_embedding: bool,
    pub use_view_segment_embedding: bool,
}

impl Default for FusionModelConfig {
    fn default() -> Self {
        Self {
            feature_dim_in: 1024,
            embed_dim: 512,
            encoder_layers: 3,
            attention_heads: 4,
            dropout: 0.426,
            head_layer_sizes: vec![512, 128, 64, 1],
            tokens_per_view: 64,
            use_positional_embedding: true,
            use_view_segment_embedding: true,
        }
    }
}

fn check_dropout(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config("dropout", format!("{p} outside [0, 1)")))
    }
}

fn check_head(sizes: &[usize], first: usize, field: &str) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::config(field, "needs at least an input and an output size"));
    }
    if sizes[0] != first {
        return Err(Error::config(field, format!("must start at {first}, starts at {}", sizes[0])));
    }
    if *sizes.last().unwrap() != 1 {
        return Err(Error::config(field, "must end at 1"));
    }
    if sizes.contains(&0) {
        return Err(Error::config(field, "sizes must be positive"));
    }
    Ok(())
}

impl FusionModelConfig {
    /// The small configuration used for gradient checks and synthetic tasks.
    pub fn tiny() -> Self {
        Self {
            feature_dim_in: 8,
            embed_dim: 16,
            encoder_layers: 2,
            attention_heads: 2,
            dropout: 0.0,
            head_layer_sizes: vec![16, 8, 1],
            tokens_per_view: 4,
            use_positional_embedding: true,
            use_view_segment_embedding: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("feature_dim_in", self.feature_dim_in),
            ("embed_dim", self.embed_dim),
            ("encoder_layers", self.encoder_layers),
            ("attention_heads", self.attention_heads),
            ("tokens_per_view", self.tokens_per_view),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.embed_dim % self.attention_heads != 0 {
            return Err(Error::config(
                "attention_heads",
                format!("embed_dim {} is not divisible by {} heads", self.embed_dim, self.attention_heads),
            ));
        }
        check_head(&self.head_layer_sizes, self.embed_dim, "head_layer_sizes")?;
        check_dropout(self.dropout)
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.attention_heads
    }

    /// `[CLS]` plus both views.
    pub fn sequence_len(&self) -> usize {
        1 + 2 * self.tokens_per_view
    }
}

/// Two-stream CNN: three conv → ReLU → max-pool blocks per stream, global
/// average pooling, then fully connected layers on the concatenation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineCnnConfig {
    pub in_channels: usize,
    /// Output channels of each block; exactly three blocks.
    pub block_channels: Vec<usize>,
    /// Square kernel size of each block; convolutions use same-padding `k/2`.
    pub kernel_sizes: Vec<usize>,
    pub pool_size: usize,
    /// Fully connected sizes, from `2 × last block channels` down to 1.
    pub fc_sizes: Vec<usize>,
    pub dropout: f64,
}

impl Default for BaselineCnnConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            block_channels: vec![16, 32, 64],
            kernel_sizes: vec![3, 3, 3],
            pool_size: 2,
            fc_sizes: vec![128, 64, 1],
            dropout: 0.5,
        }
    }
}

impl BaselineCnnConfig {
    pub const BLOCKS: usize = 3;

    pub fn tiny() -> Self {
        Self {
            in_channels: 3,
            block_channels: vec![2, 3, 4],
            kernel_sizes: vec![3, 3, 3],
            pool_size: 2,
            fc_sizes: vec![8, 4, 1],
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_channels.len() != Self::BLOCKS {
            return Err(Error::config(
                "block_channels",
                format!("expected exactly {} blocks, got {}", Self::BLOCKS, self.block_channels.len()),
            ));
        }
        if self.kernel_sizes.len() != Self::BLOCKS {
            return Err(Error::config(
                "kernel_sizes",
                format!("expected exactly {} kernel sizes, got {}", Self::BLOCKS, self.kernel_sizes.len()),
            ));
        }
        if self.in_channels == 0 || self.block_channels.contains(&0) {
            return Err(Error::config("block_channels", "channel counts must be positive"));
        }
        if self.kernel_sizes.contains(&0) {
            return Err(Error::config("kernel_sizes", "kernel sizes must be positive"));
        }
        if self.pool_size == 0 {
            return Err(Error::config("pool_size", "must be positive"));
        }
        check_head(&self.fc_sizes, 2 * self.block_channels[2], "fc_sizes")?;
        check_dropout(self.dropout)
    }

    /// Spatial extent after the three blocks, or the block index at which a
    /// `size×size` input underflows.
    pub fn output_extent(&self, size: usize) -> std::result::Result<usize, usize> {
        let mut s = size;
        for (i, &k) in self.kernel_sizes.iter().enumerate() {
            let pad = k / 2;
            if k > s + 2 * pad {
                return Err(i);
            }
            s = s + 2 * pad - k + 1;
            if s < self.pool_size {
                return Err(i);
            }
            s = (s - self.pool_size) / self.pool_size + 1;
        }
        Ok(s)
    }
}

/// Architecture plus hyperparameters, enough to rebuild a model's shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Fusion(FusionModelConfig),
    Cnn(BaselineCnnConfig),
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Fusion(_) => "fusion",
            ModelSpec::Cnn(_) => "cnn",
        }
    }
}
