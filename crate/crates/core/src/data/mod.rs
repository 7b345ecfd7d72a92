//! Interaction-log ingestion, vocabularies, multi-hot encoding, student-level splits and padded batching.

mod batch;
mod encode;
mod records;
mod split;
mod vocab;

pub use batch::{batch_sequences, batch_windows, window_sequences, Batch, DEFAULT_MAX_LEN, MIN_WINDOW};
pub use encode::{
    attach_label, encode_log, encode_multihot, EncodeStats, EncodedKcs, EncodedSequence, EncodedStep, MultiHot,
};
pub use records::{
    log_from_rows, parse_interactions, read_rows, write_log, write_rows, CsvRow, InteractionLog,
    InteractionRecord, StudentHistory, CSV_HEADER,
};
pub use split::{split_sizes, split_students, Split, DEFAULT_RATIOS};
pub use vocab::{build_vocab, Vocab};
