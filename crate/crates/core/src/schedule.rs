//! Per-level layer configuration shared by the graph parameter accounting and the
//! network compiler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer schedule of the four block levels.
///
/// `m[v-1]` is the module-repetition count of level `v`. A block alternates
/// 2D and (2+1)D residual modules starting with a 2D module, so `m = 1.5` is
/// "2D, (2+1)D, 2D" and the block has `2m` modules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSchedule {
    pub m: [f64; 4],
    /// Output width of every 3x3 2D conv at each level (`D_v`).
    pub d: [usize; 4],
    /// Width every incoming connection is adapted to before aggregation.
    pub input_width: [usize; 4],
    /// Bottleneck expansion: a block with parameter C outputs `expansion * C` channels.
    pub expansion: usize,
    /// Stem width of a two-stem architecture; `n` stems get `2 * stem_channels / n`.
    pub stem_channels: usize,
    pub appearance_channels: usize,
    pub motion_channels: usize,
}

impl Default for LayerSchedule {
    fn default() -> Self {
        Self::desk()
    }
}

impl LayerSchedule {
    pub fn desk() -> Self {
        LayerSchedule {
            m: [0.5, 1.0, 1.0, 0.5],
            d: [8, 16, 32, 64],
            input_width: [8, 16, 32, 64],
            expansion: 4,
            stem_channels: 8,
            appearance_channels: 3,
            motion_channels: 2,
        }
    }

    /// Widths of the 50-layer reference model.
    pub fn full_scale() -> Self {
        LayerSchedule {
            m: [1.5, 2.0, 3.0, 1.5],
            d: [64, 128, 256, 512],
            input_width: [64, 128, 256, 512],
            expansion: 4,
            stem_channels: 64,
            appearance_channels: 3,
            motion_channels: 2,
        }
    }

    /// The 101-layer variant (level 3 repeated 11.5 times).
    pub fn full_scale_101() -> Self {
        LayerSchedule { m: [1.5, 2.0, 11.5, 1.5], ..Self::full_scale() }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &m) in self.m.iter().enumerate() {
            let twice = m * 2.0;
            if !(m > 0.0) || twice.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "m for level {} must be a positive multiple of 0.5, got {m}",
                    i + 1
                )));
            }
        }
        if self.d.iter().chain(&self.input_width).any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.expansion == 0 || self.stem_channels == 0 {
            return Err(Error::Config("expansion and stem_channels must be positive".into()));
        }
        if self.appearance_channels == 0 || self.motion_channels == 0 {
            return Err(Error::Config("input modalities need at least one channel".into()));
        }
        Ok(())
    }

    fn index(level: u8) -> Result<usize> {
        match level {
            1..=4 => Ok(level as usize - 1),
            _ => Err(Error::MissingLevel(level)),
        }
    }

    /// Number of residual modules in a block of `level`.
    pub fn modules(&self, level: u8) -> Result<usize> {
        Ok((self.m[Self::index(level)?] * 2.0).round() as usize)
    }

    /// Main-path conv layers of one block (three per module, shortcuts excluded).
    pub fn conv_layers(&self, level: u8) -> Result<usize> {
        Ok(3 * self.modules(level)?)
    }

    pub fn d_for(&self, level: u8) -> Result<usize> {
        Ok(self.d[Self::index(level)?])
    }

    pub fn input_width_for(&self, level: u8) -> Result<usize> {
        Ok(self.input_width[Self::index(level)?])
    }

    /// Stem width for an architecture with `stems` stems.
    pub fn stem_width(&self, stems: usize) -> usize {
        (2 * self.stem_channels / stems.max(1)).max(1)
    }
}

/// How the sink merges several level-4 outputs after spatial pooling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkCombine {
    #[default]
    Concat,
    /// Element-wise mean; narrower outputs are zero-padded to the widest.
    Average,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalPool {
    #[default]
    Avg,
    Max,
}

/// Classification head configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadSpec {
    pub num_classes: usize,
    #[serde(default)]
    pub combine: SinkCombine,
    #[serde(default)]
    pub temporal_pool: TemporalPool,
}

impl HeadSpec {
    pub fn new(num_classes: usize) -> Self {
        HeadSpec { num_classes, combine: SinkCombine::Concat, temporal_pool: TemporalPool::Avg }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_and_layer_counts_follow_m() {
        let s = LayerSchedule::full_scale();
        let layers: Vec<usize> = (1..=4).map(|v| s.conv_layers(v).unwrap()).collect();
        assert_eq!(layers, vec![9, 12, 18, 9]);
        // four blocks plus the two stem convs give the 50-layer depth
        assert_eq!(layers.iter().sum::<usize>() + 2, 50);
        assert_eq!(LayerSchedule::full_scale_101().conv_layers(3).unwrap(), 69);
    }

    #[test]
    fn missing_level_is_an_error() {
        let s = LayerSchedule::desk();
        assert!(matches!(s.modules(0), Err(Error::MissingLevel(0))));
        assert!(matches!(s.d_for(5), Err(Error::MissingLevel(5))));
    }

    #[test]
    fn stem_width_halves_with_four_stems() {
        let s = LayerSchedule::full_scale();
        assert_eq!(s.stem_width(2), 64);
        assert_eq!(s.stem_width(4), 32);
    }

    #[test]
    fn rejects_non_half_integer_m() {
        let mut s = LayerSchedule::desk();
        s.m[1] = 1.25;
        assert!(s.validate().is_err());
    }
}
