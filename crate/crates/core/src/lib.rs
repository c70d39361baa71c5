//! # synwmd
//!
//! Syntax-aware Word Mover's Distance for sentence similarity.
//!
//! Sentences arrive as dependency trees (CoNLL-U). Two syntax-aware pieces
//! modify classic WMD:
//!
//! - **word flows** come from a corpus-wide co-occurrence graph built over
//!   tree hops; each word's flow is the inverse of its weighted PageRank
//!   score ([`graph`]).
//! - **word costs** add a context term: the distance between the embeddings
//!   of the subtrees containing each word ([`context`]).
//!
//! The resulting balanced transportation problem is solved exactly with a
//! transportation simplex ([`transport`]). [`scorer`] composes everything into
//! the named methods (`wmd-l2`, `wmd-cos`, `wmd-cos-idf`, `synwmd-swf`,
//! `synwmd-full`), and [`eval`] provides STS Spearman and kNN classification
//! harnesses.
//!
//! ```
//! use synwmd::conllu::parse_conllu;
//!
//! let text = "1\tdogs\tdog\tNOUN\t_\t_\t2\tnsubj\t_\t_\n\
//!             2\tbark\tbark\tVERB\t_\t_\t0\troot\t_\t_\n";
//! let corpus = parse_conllu(text.as_bytes(), "inline").unwrap();
//! assert_eq!(corpus.sentences[0].root(), 2);
//! ```

pub mod config;
pub mod conllu;
pub mod context;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod filter;
pub mod graph;
pub mod linalg;
pub mod scorer;
pub mod transport;

pub use config::{ContextAggregation, ContextMode, FlowScheme, MethodConfig, Metric, Preset};
pub use conllu::{Corpus, DepSentence, Token};
pub use context::{CostMatrix, Subtree, SubtreeEmbedding};
pub use embeddings::{
    ContextualEmbeddings, Embeddings, IdfTable, OovPolicy, StaticEmbeddings, WhiteningTransform,
};
pub use error::{Error, Result};
pub use eval::{ClsDataset, EvalReport, StsDataset};
pub use filter::TokenFilter;
pub use graph::{CooccurrenceGraph, FlowAssignment, GraphMode, PageRankScores};
pub use scorer::{CorpusArtifacts, PairScore, Scorer};
pub use transport::{TransportPlan, TransportProblem};
