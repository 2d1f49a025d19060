//! Word and sentence embeddings: file loaders, per-frame word vectors and
//! cross-utterance context windows.

mod alignment;
mod context;
mod sentence_store;
mod word_table;

pub use alignment::{words_to_frames, WordAlignment};
pub use context::{assemble_context, ContextSpan, ContextWindow};
pub use sentence_store::{load_sentence_store, write_sentence_store, SentenceEmbeddingStore};
pub use word_table::{load_word_table, write_word_table, WordEmbeddingTable, GLOVE_DIM};

/// Width of the sentence vectors the TAB expects by default.
pub const SENTENCE_DIM: usize = 768;
