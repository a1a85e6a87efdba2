use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{KaneError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    /// `LeakyReLU(W_out · (head_1 ‖ … ‖ head_m))`
    Concat,
    /// `LeakyReLU(mean of heads)`; needs `head_dim == dim`.
    Average,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoder {
    Bow,
    Lstm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

/// How attention logits are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionForm {
    /// `LeakyReLU((W r)ᵀ W (r + n))`
    Bilinear,
    /// `-‖h + r - n‖`
    Translational,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = KaneError;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok($ty::$variant),)+
                    other => Err(KaneError::Config(format!(
                        "unknown {} {other:?} (expected one of: {})",
                        stringify!($ty),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text,)+ })
            }
        }
    };
}

keyword_enum!(Aggregator { Concat => "concat", Average => "average" });
keyword_enum!(Encoder { Bow => "bow", Lstm => "lstm" });
keyword_enum!(Norm { L1 => "l1", L2 => "l2" });
keyword_enum!(AttentionForm { Bilinear => "bilinear", Translational => "translational" });

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding dimension `k`.
    pub dim: usize,
    /// Per-head output dimension `k'`.
    pub head_dim: usize,
    /// Attention heads `m`.
    pub heads: usize,
    /// Propagation layers `L`.
    pub layers: usize,
    pub aggregator: Aggregator,
    pub encoder: Encoder,
    pub leaky_slope: f64,
    pub norm: Norm,
    pub use_attributes: bool,
    pub attention_form: AttentionForm,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            head_dim: 64,
            heads: 2,
            layers: 2,
            aggregator: Aggregator::Concat,
            encoder: Encoder::Lstm,
            leaky_slope: 0.2,
            norm: Norm::L1,
            use_attributes: true,
            attention_form: AttentionForm::Bilinear,
        }
    }
}

impl ModelConfig {
    /// Plain translational embedding: no propagation, no attributes.
    pub fn transe(dim: usize, norm: Norm) -> Self {
        ModelConfig {
            dim,
            head_dim: dim,
            layers: 0,
            use_attributes: false,
            norm,
            ..ModelConfig::default()
        }
    }

    pub fn is_transe_mode(&self) -> bool {
        self.layers == 0 && !self.use_attributes
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.head_dim == 0 || self.heads == 0 {
            return Err(KaneError::Config(
                "dim, head_dim and heads must all be at least 1".into(),
            ));
        }
        if self.aggregator == Aggregator::Average && self.head_dim != self.dim {
            return Err(KaneError::Config(format!(
                "average aggregator needs head_dim == dim, got {} vs {}",
                self.head_dim, self.dim
            )));
        }
        if !self.leaky_slope.is_finite() {
            return Err(KaneError::Config("leaky_slope must be finite".into()));
        }
        Ok(())
    }
}
