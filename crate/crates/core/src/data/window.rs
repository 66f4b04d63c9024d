use super::recording::Recording;
use crate::error::{Error, Result};

/// A contiguous span of one source recording.
///
/// `source` is the provenance tag (index of the recording in the set the
/// window was cut from).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub source: usize,
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    /// Splits this window into consecutive, non-overlapping pieces of
    /// `piece_len` samples; an incomplete tail is dropped.
    pub fn chunks(&self, piece_len: usize) -> Vec<Window> {
        if piece_len == 0 {
            return Vec::new();
        }
        (0..self.len / piece_len)
            .map(|i| Window {
                source: self.source,
                start: self.start + i * piece_len,
                len: piece_len,
            })
            .collect()
    }
}

/// Cuts windows of `window_len` samples every `stride` samples. Windows that
/// would run past the end are dropped.
pub fn extract_windows(
    rec: &Recording,
    source: usize,
    window_len: usize,
    stride: usize,
) -> Result<Vec<Window>> {
    let n = rec.len();
    if window_len == 0 || stride == 0 {
        return Err(Error::Config("window length and stride must be positive".into()));
    }
    if window_len > n {
        return Err(Error::Shape(format!(
            "window length {window_len} exceeds recording length {n}"
        )));
    }
    Ok((0..=n - window_len)
        .step_by(stride)
        .map(|start| Window {
            source,
            start,
            len: window_len,
        })
        .collect())
}
