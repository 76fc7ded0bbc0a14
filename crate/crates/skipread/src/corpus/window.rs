/// A fixed-length slice of a document, the unit the LM reader consumes.
/// Windows are cut without regard to sentence boundaries and are always
/// exactly `w` tokens; a document tail shorter than `w` is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenWindow {
    pub doc: usize,
    /// token offset of the window start within the document
    pub start: usize,
    pub ids: Vec<usize>,
}

impl TokenWindow {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn window_split(doc: usize, ids: &[usize], w: usize) -> Vec<TokenWindow> {
    assert!(w > 0, "window length must be positive");
    ids.chunks_exact(w)
        .enumerate()
        .map(|(k, chunk)| TokenWindow { doc, start: k * w, ids: chunk.to_vec() })
        .collect()
}
