//! Challenge generation, CRP datasets and their on-disk formats.

mod dataset;
mod format;
mod lcg;

use std::ops::Range;

use crate::delay::Challenge;

pub use dataset::{
    generate_dataset, generate_dataset_reported, generate_dataset_sharded, select_dataset, CrpDataset, CrpRecord, GenOptions,
};
pub use format::{
    read_dataset, read_model, write_dataset, write_dataset_csv, write_model, DATASET_MAGIC, MODEL_MAGIC,
};
pub use lcg::{
    challenge_from_word, lcg_next, ChallengeStream, LcgOverrides, LcgState, DEFAULT_INCREMENT,
    DEFAULT_MULTIPLIER,
};

/// Indexed, replayable sequence of challenges.
pub trait ChallengeSource: Sync {
    fn count(&self) -> u64;

    fn stages(&self) -> usize;

    /// Visit positions `range` in order.
    fn visit(&self, range: Range<u64>, f: &mut dyn FnMut(u64, &Challenge));
}

/// The first `count` challenges of a stream.
#[derive(Clone, Debug)]
pub struct StreamSource {
    pub stream: ChallengeStream,
    pub count: u64,
}

impl StreamSource {
    pub fn new(stream: ChallengeStream, count: u64) -> Self {
        Self { stream, count }
    }
}

impl ChallengeSource for StreamSource {
    fn count(&self) -> u64 {
        self.count
    }

    fn stages(&self) -> usize {
        self.stream.stages()
    }

    fn visit(&self, range: Range<u64>, f: &mut dyn FnMut(u64, &Challenge)) {
        self.stream.visit(range.start..range.end.min(self.count), f)
    }
}

impl ChallengeSource for [Challenge] {
    fn count(&self) -> u64 {
        self.len() as u64
    }

    fn stages(&self) -> usize {
        self.first().map_or(0, Challenge::len)
    }

    fn visit(&self, range: Range<u64>, f: &mut dyn FnMut(u64, &Challenge)) {
        for i in range {
            f(i, &self[i as usize]);
        }
    }
}

impl ChallengeSource for Vec<Challenge> {
    fn count(&self) -> u64 {
        self.as_slice().count()
    }

    fn stages(&self) -> usize {
        self.as_slice().stages()
    }

    fn visit(&self, range: Range<u64>, f: &mut dyn FnMut(u64, &Challenge)) {
        self.as_slice().visit(range, f)
    }
}
