//! Sliding-window chunking of message text.
//!
//! Messages are split into overlapping windows of at most [`CHUNK_SIZE`]
//! characters (step [`CHUNK_STEP`], overlap [`CHUNK_OVERLAP`]), with interior
//! boundaries snapped to whitespace inside the overlap window so chunks do not
//! cut words in half. All offsets are Unicode scalar values, never bytes.

/// Maximum chunk length in characters.
pub const CHUNK_SIZE: usize = 1000;
/// Characters shared by two consecutive chunks.
pub const CHUNK_OVERLAP: usize = 200;
/// Distance between consecutive nominal chunk starts.
pub const CHUNK_STEP: usize = CHUNK_SIZE - CHUNK_OVERLAP;

/// One chunk of a source string: a half-open character range plus its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSpan {
    /// Start offset in characters, inclusive.
    pub start: usize,
    /// End offset in characters, exclusive.
    pub end: usize,
    /// The sliced substring.
    pub text: String,
}

impl ChunkSpan {
    /// Span length in characters.
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Splits `text` into overlapping chunk spans.
///
/// Short non-blank text (at most [`CHUNK_SIZE`] characters) is returned as a
/// single span. Blank or empty text yields no spans. Longer text is windowed
/// at nominal offsets `i * CHUNK_STEP`, then each interior boundary is snapped
/// to a whitespace character inside the overlap window it belongs to. A
/// snapped boundary sits just after its whitespace character, so the
/// whitespace stays with the preceding span and the next span starts cleanly.
///
/// The spans always cover every character of the source, consecutive spans
/// always overlap, and no span exceeds [`CHUNK_SIZE`] characters.
pub fn extract_chunks(text: &str) -> Vec<ChunkSpan> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let total = chars.len();
    if chars.iter().all(|&(_, c)| c.is_whitespace()) {
        return Vec::new();
    }

    let byte_at = |i: usize| {
        if i == total {
            text.len()
        } else {
            chars[i].0
        }
    };
    let slice = |s: usize, e: usize| text[byte_at(s)..byte_at(e)].to_string();

    if total <= CHUNK_SIZE {
        return vec![ChunkSpan {
            start: 0,
            end: total,
            text: slice(0, total),
        }];
    }

    let mut bounds: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + CHUNK_SIZE).min(total);
        bounds.push((start, end));
        if end == total {
            break;
        }
        start += CHUNK_STEP;
    }

    let is_ws = |i: usize| chars[i].1.is_whitespace();

    // Snap each interior boundary pair inside its shared overlap window
    // [s0, e0). A cut at position c means the span break falls between
    // chars c-1 and c; snapping to whitespace at w yields the cut w+1.
    //
    // The end cut takes the whitespace nearest its nominal position (the
    // last one in the window); the start cut then takes the whitespace
    // nearest its own nominal position among cuts strictly left of the end
    // cut. The strictness is what keeps consecutive spans overlapping even
    // when the window holds a single whitespace both boundaries would
    // otherwise claim.
    for i in 0..bounds.len() - 1 {
        let e0 = bounds[i].1;
        let s0 = bounds[i + 1].0;
        debug_assert_eq!(e0 - s0, CHUNK_OVERLAP);

        let end_cut = (s0..e0)
            .rev()
            .find(|&w| is_ws(w))
            .map(|w| w + 1)
            .unwrap_or(e0);
        let start_cut = (s0 - 1..end_cut - 1)
            .find(|&w| is_ws(w))
            .map(|w| w + 1)
            .unwrap_or(s0);

        bounds[i].1 = end_cut;
        bounds[i + 1].0 = start_cut;
    }

    bounds
        .into_iter()
        .map(|(start, end)| ChunkSpan {
            start,
            end,
            text: slice(start, end),
        })
        .collect()
}
