//! Character grid and flash-group representation.
//!
//! A speller presents a matrix of characters and illuminates subsets of them
//! ("flash groups"). The default layout is the 8x9 grid of 72 characters; row
//! and column groups are the conventional search space.

use crate::error::{Error, Result};

/// Symbols for the default 72-character layout: letters, digits, punctuation.
const DEFAULT_SYMBOLS: &str =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789.,?!'-:;_<";

/// Rectangular character matrix. Characters are indexed row-major in
/// `0..rows*cols`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    rows: usize,
    cols: usize,
    labels: Vec<String>,
}

/// Classification of a flash group against a grid's row/column structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcClass {
    Row(usize),
    Col(usize),
    Other,
}

impl GridLayout {
    /// Grid with generated placeholder labels.
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        let labels = (0..rows * cols).map(|i| format!("c{i}")).collect();
        Self::with_labels(rows, cols, labels)
    }

    pub fn with_labels(rows: usize, cols: usize, labels: Vec<String>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols < 2 {
            return Err(Error::InvalidInput(format!(
                "grid must hold at least 2 characters, got {rows}x{cols}"
            )));
        }
        if labels.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} labels for a {rows}x{cols} grid, got {}",
                rows * cols,
                labels.len()
            )));
        }
        Ok(Self { rows, cols, labels })
    }

    /// The conventional 8x9 layout with 72 display symbols.
    pub fn default_speller() -> Self {
        let labels = DEFAULT_SYMBOLS.chars().map(|c| c.to_string()).collect();
        Self::with_labels(8, 9, labels).expect("default layout is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of characters, `rows * cols`.
    pub fn char_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    /// All characters in row `r` (one group of size `cols`).
    pub fn row_group(&self, r: usize) -> FlashGroup {
        let indices: Vec<usize> = (0..self.cols).map(|c| self.index_of(r, c)).collect();
        FlashGroup::from_indices(self.char_count(), &indices).expect("row group is valid")
    }

    /// All characters in column `c` (one group of size `rows`).
    pub fn col_group(&self, c: usize) -> FlashGroup {
        let indices: Vec<usize> = (0..self.rows).map(|r| self.index_of(r, c)).collect();
        FlashGroup::from_indices(self.char_count(), &indices).expect("column group is valid")
    }

    /// The full row-column search space: all row groups followed by all
    /// column groups (`rows + cols` entries).
    pub fn rc_groups(&self) -> Vec<FlashGroup> {
        let mut groups = Vec::with_capacity(self.rows + self.cols);
        groups.extend((0..self.rows).map(|r| self.row_group(r)));
        groups.extend((0..self.cols).map(|c| self.col_group(c)));
        groups
    }

    /// Whether `group` is exactly one of this grid's rows or columns.
    pub fn classify(&self, group: &FlashGroup) -> RcClass {
        for r in 0..self.rows {
            if *group == self.row_group(r) {
                return RcClass::Row(r);
            }
        }
        for c in 0..self.cols {
            if *group == self.col_group(c) {
                return RcClass::Col(c);
            }
        }
        RcClass::Other
    }
}

/// Subset of grid characters illuminated together, stored as a dense
/// membership vector over all characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlashGroup {
    bits: Vec<bool>,
    size: usize,
}

impl FlashGroup {
    /// Build a group over `char_count` characters from member indices.
    /// Indices must be in range, distinct, and nonempty.
    pub fn from_indices(char_count: usize, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("flash group must contain at least one character".into()));
        }
        let mut bits = vec![false; char_count];
        for &i in indices {
            if i >= char_count {
                return Err(Error::InvalidInput(format!(
                    "character index {i} out of range for {char_count} choices"
                )));
            }
            if bits[i] {
                return Err(Error::InvalidInput(format!("duplicate character index {i}")));
            }
            bits[i] = true;
        }
        Ok(Self { bits, size: indices.len() })
    }

    pub fn contains(&self, index: usize) -> bool {
        self.bits[index]
    }

    /// Number of characters in the group.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Length of the membership vector (the grid's character count).
    pub fn choice_count(&self) -> usize {
        self.bits.len()
    }

    /// Member indices in ascending order.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Sum of `probs` over the group's members (the flashed probability
    /// mass P1).
    pub fn prior_mass(&self, probs: &[f64]) -> f64 {
        debug_assert_eq!(probs.len(), self.bits.len());
        self.members().map(|i| probs[i]).sum()
    }
}
