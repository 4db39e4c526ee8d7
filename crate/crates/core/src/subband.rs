use std::fmt;

/// Which filter-bank branch a subband came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Approx,
    /// Low-pass along rows, high-pass along columns: responds to horizontal edges.
    Horizontal,
    /// High-pass along rows, low-pass along columns: responds to vertical edges.
    Vertical,
    Diagonal,
    /// Curvelet wedge index within its scale.
    Wedge(usize),
}

/// Position of a subband within its transform.
///
/// For the DWT `level` counts decompositions (1 is finest); for curvelets it
/// is the scale index (1 is coarsest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubbandLabel {
    pub level: usize,
    pub orientation: Orientation,
}

impl fmt::Display for SubbandLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.orientation {
            Orientation::Approx => write!(f, "LL{}", self.level),
            Orientation::Horizontal => write!(f, "LH{}", self.level),
            Orientation::Vertical => write!(f, "HL{}", self.level),
            Orientation::Diagonal => write!(f, "HH{}", self.level),
            Orientation::Wedge(w) => write!(f, "S{}W{}", self.level, w),
        }
    }
}

/// One real-valued coefficient grid `W_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subband {
    pub rows: usize,
    pub cols: usize,
    pub coeffs: Vec<f64>,
    pub label: SubbandLabel,
}

impl Subband {
    pub fn new(rows: usize, cols: usize, coeffs: Vec<f64>, label: SubbandLabel) -> Self {
        assert_eq!(
            coeffs.len(),
            rows * cols,
            "subband {label}: coefficient count mismatch"
        );
        Subband {
            rows,
            cols,
            coeffs,
            label,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}
