use super::EnsembleError;
use crate::corpus::LabelVector;
use crate::postprocess::{ChannelOutput, Source};

/// Per-label majority of three channels: a flag is set when at least two set it.
///
/// A document unclassified in any channel stays unclassified. Rows follow
/// the order of `ch1`.
pub fn hard_vote(ch1: &ChannelOutput, ch2: &ChannelOutput, ch3: &ChannelOutput) -> Result<ChannelOutput, EnsembleError> {
    let ids = ch1.id_set();
    if ch2.id_set() != ids || ch3.id_set() != ids {
        return Err(EnsembleError::IdMismatch);
    }
    let (m2, m3) = (ch2.lookup(), ch3.lookup());
    let mut labels = Vec::new();
    let mut unclassified = Vec::new();
    for id in ch1.ids() {
        match (ch1.get(id), m2.get(id), m3.get(id)) {
            (Some(a), Some(b), Some(c)) => {
                if a.len() != b.len() || a.len() != c.len() {
                    return Err(EnsembleError::LabelWidth {
                        expected: a.len(),
                        got: if a.len() != b.len() { b.len() } else { c.len() },
                    });
                }
                let flags = (0..a.len())
                    .map(|j| u8::from(a.get(j)) + u8::from(b.get(j)) + u8::from(c.get(j)) >= 2)
                    .collect();
                labels.push((id.to_string(), LabelVector::from_bools(flags)));
            }
            _ => unclassified.push(id.to_string()),
        }
    }
    Ok(ChannelOutput::new(Source::HardVote, labels, unclassified))
}
