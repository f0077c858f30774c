use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ops::conv_out;

/// One inverted-residual bottleneck: 1×1 expand, 3×3 depthwise, 1×1 linear
/// projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub expansion: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub residual: bool,
}

impl BlockSpec {
    pub const fn new(expansion: usize, out_channels: usize, stride: usize, residual: bool) -> Self {
        Self { expansion, out_channels, stride, residual }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    /// Output width of the 3×3 stride-2 stem.
    pub stem_channels: usize,
    pub blocks: Vec<BlockSpec>,
    pub classes: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::mini()
    }
}

impl NetworkConfig {
    /// The deployed network over 6×150×192 scalograms.
    pub fn mini() -> Self {
        Self {
            input_channels: 6,
            input_height: 150,
            input_width: 192,
            stem_channels: 16,
            blocks: vec![
                BlockSpec::new(6, 16, 1, false),
                BlockSpec::new(6, 24, 2, false),
                BlockSpec::new(6, 24, 1, true),
                BlockSpec::new(6, 32, 2, false),
            ],
            classes: 4,
        }
    }

    /// Same topology at toy scale (6×10×12 input, narrow layers) for gradient
    /// checks and fast tests.
    pub fn reduced() -> Self {
        Self {
            input_channels: 6,
            input_height: 10,
            input_width: 12,
            stem_channels: 4,
            blocks: vec![
                BlockSpec::new(2, 4, 1, false),
                BlockSpec::new(2, 6, 2, false),
                BlockSpec::new(2, 6, 1, true),
                BlockSpec::new(2, 8, 2, false),
            ],
            classes: 4,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_channels * self.input_height * self.input_width
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.input_channels == 0 || self.input_height == 0 || self.input_width == 0 || self.stem_channels == 0 {
            return Err("empty input or stem".into());
        }
        if self.classes == 0 {
            return Err("no classes".into());
        }
        let mut cin = self.stem_channels;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.expansion == 0 || b.out_channels == 0 || !(1..=2).contains(&b.stride) {
                return Err(format!("block {i}: bad spec {b:?}"));
            }
            if b.residual && (b.stride != 1 || cin != b.out_channels) {
                return Err(format!("block {i}: residual needs stride 1 and equal channels"));
            }
            cin = b.out_channels;
        }
        Ok(())
    }

    /// Channels entering each block, in order.
    pub fn block_inputs(&self) -> Vec<usize> {
        let mut cin = self.stem_channels;
        self.blocks
            .iter()
            .map(|b| {
                let c = cin;
                cin = b.out_channels;
                c
            })
            .collect()
    }

    pub fn head_channels(&self) -> usize {
        self.blocks.last().map_or(self.stem_channels, |b| b.out_channels)
    }

    /// Spatial size after the stem and each block.
    pub fn feature_sizes(&self) -> Vec<(usize, usize)> {
        let mut hw = (conv_out(self.input_height, 2), conv_out(self.input_width, 2));
        let mut out = vec![hw];
        for b in &self.blocks {
            hw = (conv_out(hw.0, b.stride), conv_out(hw.1, b.stride));
            out.push(hw);
        }
        out
    }

    /// Ordered `(name, shape)` for every parameter tensor.
    pub fn tensor_layout(&self) -> Vec<(String, Vec<usize>)> {
        let s = self.stem_channels;
        let mut out = vec![
            ("stem.conv.weight".to_string(), vec![3, 3, self.input_channels, s]),
            ("stem.bn.scale".to_string(), vec![s]),
            ("stem.bn.bias".to_string(), vec![s]),
        ];
        for (i, (b, cin)) in self.blocks.iter().zip(self.block_inputs()).enumerate() {
            let hidden = cin * b.expansion;
            let p = format!("blocks.{i}");
            out.push((format!("{p}.expand.weight"), vec![cin, hidden]));
            out.push((format!("{p}.expand.bn.scale"), vec![hidden]));
            out.push((format!("{p}.expand.bn.bias"), vec![hidden]));
            out.push((format!("{p}.depthwise.weight"), vec![3, 3, hidden]));
            out.push((format!("{p}.depthwise.bn.scale"), vec![hidden]));
            out.push((format!("{p}.depthwise.bn.bias"), vec![hidden]));
            out.push((format!("{p}.project.weight"), vec![hidden, b.out_channels]));
            out.push((format!("{p}.project.bn.scale"), vec![b.out_channels]));
            out.push((format!("{p}.project.bn.bias"), vec![b.out_channels]));
        }
        let c = self.head_channels();
        out.push(("head.fc.weight".to_string(), vec![c, self.classes]));
        out.push(("head.fc.bias".to_string(), vec![self.classes]));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensor_layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    /// Canonical text form; the weight-file hash is taken over this string.
    pub fn canonical(&self) -> String {
        let blocks: Vec<String> = self
            .blocks
            .iter()
            .map(|b| format!("{}:{}:{}:{}", b.expansion, b.out_channels, b.stride, u8::from(b.residual)))
            .collect();
        format!(
            "invres-v1;in={}x{}x{};stem={};blocks={};classes={}",
            self.input_channels,
            self.input_height,
            self.input_width,
            self.stem_channels,
            blocks.join(","),
            self.classes
        )
    }

    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().as_bytes()).into()
    }
}
