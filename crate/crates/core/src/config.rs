//! Method configuration and the named presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embeddings::OovPolicy;
use crate::error::Error;
use crate::graph::GraphMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowScheme {
    /// Normalized occurrence count.
    UniformCount,
    Idf,
    /// Inverse weighted PageRank over the dependency co-occurrence graph.
    Swf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    None,
    Subtree,
    /// Contiguous 2- and 3-grams instead of subtrees.
    Ngram,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Cosine,
    L2,
}

/// Member weights when averaging a subtree's word vectors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubtreeWeighting {
    #[default]
    Uniform,
    /// Proportional to the members' word flows.
    Flow,
}

/// How the context term combines the two sets of context embeddings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextAggregation {
    /// Mean cross-set distance minus the mean of the two within-set
    /// dispersions, clamped at zero. Vanishes for identical context sets.
    #[default]
    Centered,
    /// Plain mean of all cross-set distances.
    PairMean,
}

macro_rules! kebab_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} {other:?}; expected one of: {}",
                        stringify!($ty),
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

kebab_enum!(FlowScheme { FlowScheme::UniformCount => "uniform-count", FlowScheme::Idf => "idf", FlowScheme::Swf => "swf" });
kebab_enum!(ContextMode { ContextMode::None => "none", ContextMode::Subtree => "subtree", ContextMode::Ngram => "ngram" });
kebab_enum!(Metric { Metric::Cosine => "cosine", Metric::L2 => "l2" });
kebab_enum!(SubtreeWeighting { SubtreeWeighting::Uniform => "uniform", SubtreeWeighting::Flow => "flow" });
kebab_enum!(ContextAggregation { ContextAggregation::Centered => "centered", ContextAggregation::PairMean => "pair-mean" });
kebab_enum!(OovPolicy { OovPolicy::Skip => "skip", OovPolicy::Zero => "zero" });
kebab_enum!(GraphMode { GraphMode::Tree => "tree", GraphMode::Window => "window" });

/// Everything that determines a pair score, apart from the data and the
/// token filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub flow: FlowScheme,
    pub context: ContextMode,
    pub metric: Metric,
    /// Weight of the context term.
    pub a: f64,
    /// PageRank smoothing term.
    pub d: f64,
    /// Hop limit for co-occurrence counting.
    pub n: usize,
    /// Hop limit for subtree extraction.
    pub m: usize,
    pub graph_mode: GraphMode,
    pub whiten: bool,
    pub lowercase: bool,
    pub oov: OovPolicy,
    pub subtree_weighting: SubtreeWeighting,
    pub aggregation: ContextAggregation,
    pub pagerank_tol: f64,
    pub pagerank_max_iter: usize,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Preset::SynwmdFull.config()
    }
}

impl MethodConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.a.is_finite() && self.a >= 0.0) {
            return bad(format!("a must be finite and >= 0, got {}", self.a));
        }
        if self.flow == FlowScheme::Swf {
            if self.n < 1 {
                return bad("n must be >= 1 for swf flows".into());
            }
            if !(0.0..1.0).contains(&self.d) {
                return bad(format!("d must lie in [0, 1), got {}", self.d));
            }
            if !(self.pagerank_tol > 0.0) {
                return bad("pagerank tolerance must be positive".into());
            }
        }
        if self.context == ContextMode::Subtree && self.m < 1 {
            return bad("m must be >= 1 for subtree context".into());
        }
        Ok(())
    }

    /// Upper bound used when a pair cannot be scored under cosine distance.
    pub fn cosine_fallback(&self) -> f64 {
        2.0 * (1.0 + self.a)
    }
}

/// Named method rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    WmdL2,
    WmdCos,
    WmdL2Idf,
    WmdCosIdf,
    SynwmdSwf,
    SynwmdFull,
    /// SynWMD settings for kNN classification (d = 0.1, a = 0.1).
    SynwmdCls,
}

kebab_enum!(Preset {
    Preset::WmdL2 => "wmd-l2",
    Preset::WmdCos => "wmd-cos",
    Preset::WmdL2Idf => "wmd-l2-idf",
    Preset::WmdCosIdf => "wmd-cos-idf",
    Preset::SynwmdSwf => "synwmd-swf",
    Preset::SynwmdFull => "synwmd-full",
    Preset::SynwmdCls => "synwmd-cls",
});

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::WmdL2,
        Preset::WmdCos,
        Preset::WmdL2Idf,
        Preset::WmdCosIdf,
        Preset::SynwmdSwf,
        Preset::SynwmdFull,
        Preset::SynwmdCls,
    ];

    pub fn config(self) -> MethodConfig {
        let base = MethodConfig {
            flow: FlowScheme::UniformCount,
            context: ContextMode::None,
            metric: Metric::Cosine,
            a: 0.2,
            d: 0.2,
            n: 3,
            m: 3,
            graph_mode: GraphMode::Tree,
            whiten: false,
            lowercase: true,
            oov: OovPolicy::Skip,
            subtree_weighting: SubtreeWeighting::Uniform,
            aggregation: ContextAggregation::Centered,
            pagerank_tol: 1e-8,
            pagerank_max_iter: 200,
        };
        match self {
            Preset::WmdL2 => MethodConfig { metric: Metric::L2, ..base },
            Preset::WmdCos => base,
            Preset::WmdL2Idf => MethodConfig { flow: FlowScheme::Idf, metric: Metric::L2, ..base },
            Preset::WmdCosIdf => MethodConfig { flow: FlowScheme::Idf, ..base },
            Preset::SynwmdSwf => MethodConfig { flow: FlowScheme::Swf, ..base },
            Preset::SynwmdFull => MethodConfig {
                flow: FlowScheme::Swf,
                context: ContextMode::Subtree,
                ..base
            },
            Preset::SynwmdCls => MethodConfig {
                flow: FlowScheme::Swf,
                context: ContextMode::Subtree,
                a: 0.1,
                d: 0.1,
                ..base
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_rows() {
        let full = Preset::SynwmdFull.config();
        assert_eq!((full.flow, full.context, full.metric), (FlowScheme::Swf, ContextMode::Subtree, Metric::Cosine));
        assert_eq!((full.n, full.m, full.d, full.a), (3, 3, 0.2, 0.2));

        let idf = Preset::WmdCosIdf.config();
        assert_eq!((idf.flow, idf.context, idf.metric), (FlowScheme::Idf, ContextMode::None, Metric::Cosine));

        let cls = Preset::SynwmdCls.config();
        assert_eq!((cls.d, cls.a), (0.1, 0.1));

        for p in Preset::ALL {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
            p.config().validate().unwrap();
        }
    }

    #[test]
    fn validation() {
        let mut cfg = Preset::SynwmdFull.config();
        cfg.d = 1.0;
        assert!(cfg.validate().is_err());
        cfg.d = 0.2;
        cfg.m = 0;
        assert!(cfg.validate().is_err());
        cfg.m = 3;
        cfg.a = -0.5;
        assert!(cfg.validate().is_err());
        assert!("bogus".parse::<Metric>().is_err());
    }
}
