//! Canonical direction codes for the line subspaces composing `Q`.

/// A one-dimensional subspace of `Q`, represented by its nonzero direction
/// code with the first nonzero entry made positive. For binary and ternary
/// level sets this canonical form is unique per line: no two distinct sign
/// patterns over `{0, ±q}` are positive multiples of each other.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSubspace {
    code: Vec<f64>,
}

impl LineSubspace {
    /// Canonicalizes a code vector; `None` when every entry is zero.
    pub fn from_code(code: &[f64]) -> Option<Self> {
        let first = code.iter().find(|&&c| c != 0.0)?;
        let flip = *first < 0.0;
        let code = code.iter().map(|&c| if flip { -c } else { c }).collect();
        Some(Self { code })
    }

    pub fn code(&self) -> &[f64] {
        &self.code
    }

    pub fn dim(&self) -> usize {
        self.code.len()
    }

    pub fn norm(&self) -> f64 {
        self.code.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Acute angle between two lines: `arccos(|<L1,L2>| / (||L1|| ||L2||))`.
    pub fn angle_to(&self, other: &LineSubspace) -> f64 {
        let dot: f64 = self.code.iter().zip(&other.code).map(|(a, b)| a * b).sum();
        let cos = (dot.abs() / (self.norm() * other.norm())).min(1.0);
        cos.acos()
    }

    /// Orthogonal projection of `y` onto the (full, two-sided) line.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.code.len());
        let dot: f64 = self.code.iter().zip(y).map(|(c, v)| c * v).sum();
        let norm_sq: f64 = self.code.iter().map(|c| c * c).sum();
        let coeff = dot / norm_sq;
        self.code.iter().map(|&c| coeff * c).collect()
    }
}
