//! Deterministic stand-in for the frozen gaze backbone.
//!
//! The image is cut into a `g×g` grid. Each cell gives a 4-vector (mean R,
//! mean G, mean B, fraction of the cell covered by the head box), which a
//! fixed `4×D` matrix maps to one `D`-wide token.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{HeadBox, RgbImage, TokenSequence};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::Tensor;
use crate::View;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyBackboneConfig {
    pub grid: usize,
    pub out_dim: usize,
    pub projection_seed: u64,
}

impl Default for ToyBackboneConfig {
    fn default() -> Self {
        Self {
            grid: 8,
            out_dim: 64,
            projection_seed: 0,
        }
    }
}

impl ToyBackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid == 0 {
            return Err(Error::config("grid", "must be at least 1"));
        }
        if self.out_dim < 4 {
            return Err(Error::config("out_dim", "must be at least 4"));
        }
        Ok(())
    }

    pub fn tokens(&self) -> usize {
        self.grid * self.grid
    }
}

pub const CELL_FEATURES: usize = 4;

#[derive(Clone, Debug)]
pub struct ToyBackbone {
    config: ToyBackboneConfig,
    /// `4×D`, row-major.
    projection: Vec<f64>,
}

impl ToyBackbone {
    pub fn new(config: ToyBackboneConfig) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(config.projection_seed, Stream::Projection);
        let dist = Normal::new(0.0, 1.0 / (CELL_FEATURES as f64).sqrt()).expect("valid sigma");
        let projection = (0..CELL_FEATURES * config.out_dim).map(|_| dist.sample(&mut r)).collect();
        Ok(Self { config, projection })
    }

    pub fn config(&self) -> &ToyBackboneConfig {
        &self.config
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    /// Per-cell `(R, G, B, coverage)` in row-major cell order, before the
    /// projection. Colour means are in [0, 1].
    pub fn cell_features(&self, image: &RgbImage, head: &HeadBox) -> Result<Vec<[f64; CELL_FEATURES]>> {
        head.validate()?;
        let g = self.config.grid;
        let (w, h) = (image.width(), image.height());
        if w < g || h < g {
            return Err(Error::Input(format!("{w}×{h} image is smaller than the {g}×{g} grid")));
        }
        let mut out = Vec::with_capacity(g * g);
        for i in 0..g {
            let (y0, y1) = (i * h / g, (i + 1) * h / g);
            for j in 0..g {
                let (x0, x1) = (j * w / g, (j + 1) * w / g);
                let mut sum = [0u64; 3];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let p = image.pixel(x, y);
                        for c in 0..3 {
                            sum[c] += p[c] as u64;
                        }
                    }
                }
                let n = ((y1 - y0) * (x1 - x0)) as f64 * 255.0;
                let cell = HeadBox {
                    x0: j as f64 / g as f64,
                    y0: i as f64 / g as f64,
                    x1: (j + 1) as f64 / g as f64,
                    y1: (i + 1) as f64 / g as f64,
                };
                let coverage = head.overlap(&cell) / cell.area();
                out.push([sum[0] as f64 / n, sum[1] as f64 / n, sum[2] as f64 / n, coverage]);
            }
        }
        Ok(out)
    }

    /// `g²×D` token matrix for one frame.
    pub fn extract_tokens(&self, image: &RgbImage, head: &HeadBox) -> Result<Tensor> {
        let d = self.config.out_dim;
        let cells = self.cell_features(image, head)?;
        let mut data = Vec::with_capacity(cells.len() * d);
        for f in &cells {
            for k in 0..d {
                let v: f64 = (0..CELL_FEATURES).map(|c| f[c] * self.projection[c * d + k]).sum();
                data.push(v as f32);
            }
        }
        Tensor::new([cells.len(), d], data)
    }

    pub fn extract(&self, image: &RgbImage, head: &HeadBox, session: &str, view: View, timestamp_s: f64) -> Result<TokenSequence> {
        TokenSequence::new(session, view, timestamp_s, self.extract_tokens(image, head)?)
    }
}
