//! Projections onto the quantization set `Q = R+ x {±q_1,...,±q_m}^n`.
//!
//! A point of `Q` factors as a nonnegative scale times a discrete code
//! vector; geometrically `Q` is a finite union of lines through the origin.
//! Exact projection formulas exist for binarization and ternarization; wider
//! bit-widths fall back to a Lloyd-style alternating solver. A brute-force
//! enumerator doubles as the verification oracle for all of them.

mod brute;
mod kernels;
mod line;

pub use brute::brute_force_quantize;
pub use kernels::{binarize, lloyd_quantize, ternarize_exact, ternarize_threshold, LloydInit};
pub use line::LineSubspace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solver used to project a weight group onto its quantization levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Closed-form exact binarization, levels `{1}`.
    BinaryExact,
    /// Sort-and-scan exact ternarization, levels `{0,1}`.
    TernaryExact,
    /// O(n) thresholding heuristic for ternarization, levels `{0,1}`.
    TernaryThreshold,
    /// Alternating assignment/scale updates for wider level sets.
    Lloyd { max_iters: usize },
}

impl Solver {
    /// Whether the solver returns the exact projection (rather than an
    /// upper bound on the distance to `Q`).
    pub fn is_exact(self) -> bool {
        matches!(self, Solver::BinaryExact | Solver::TernaryExact)
    }
}

/// Partition of a weight index range into contiguous groups, each quantized
/// with its own scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLayout {
    lengths: Vec<usize>,
}

impl GroupLayout {
    /// Single group spanning `[0, n)`.
    pub fn single(n: usize) -> Result<Self> {
        Self::from_lengths(vec![n])
    }

    pub fn from_lengths(lengths: Vec<usize>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidScheme("group layout has no groups".into()));
        }
        if lengths.contains(&0) {
            return Err(Error::InvalidScheme("empty group in layout".into()));
        }
        Ok(Self { lengths })
    }

    pub fn num_groups(&self) -> usize {
        self.lengths.len()
    }

    pub fn total_len(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// Iterator over the contiguous index ranges of the groups, in order.
    pub fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.lengths.iter().scan(0usize, |start, &len| {
            let r = *start..*start + len;
            *start += len;
            Some(r)
        })
    }
}

/// Quantization levels, bit-width, solver choice and group layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantScheme {
    levels: Vec<f64>,
    bit_width: u32,
    solver: Solver,
    groups: GroupLayout,
}

impl QuantScheme {
    pub fn new(
        levels: Vec<f64>,
        bit_width: u32,
        solver: Solver,
        groups: GroupLayout,
    ) -> Result<Self> {
        let scheme = Self {
            levels,
            bit_width,
            solver,
            groups,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// 1-bit binarization with levels `{1}`.
    pub fn binary(groups: GroupLayout) -> Self {
        Self {
            levels: vec![1.0],
            bit_width: 1,
            solver: Solver::BinaryExact,
            groups,
        }
    }

    /// 2-bit ternarization with levels `{0,1}` and the exact solver.
    pub fn ternary(groups: GroupLayout) -> Self {
        Self {
            levels: vec![0.0, 1.0],
            bit_width: 2,
            solver: Solver::TernaryExact,
            groups,
        }
    }

    /// 2-bit ternarization via the thresholding heuristic.
    pub fn ternary_threshold(groups: GroupLayout) -> Self {
        Self {
            levels: vec![0.0, 1.0],
            bit_width: 2,
            solver: Solver::TernaryThreshold,
            groups,
        }
    }

    /// Wider-level scheme solved by Lloyd iterations.
    pub fn lloyd(
        levels: Vec<f64>,
        bit_width: u32,
        max_iters: usize,
        groups: GroupLayout,
    ) -> Result<Self> {
        Self::new(levels, bit_width, Solver::Lloyd { max_iters }, groups)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidScheme("no quantization levels".into()));
        }
        if self.levels[0] < 0.0 || self.levels.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidScheme(
                "levels must be finite and nonnegative".into(),
            ));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScheme(
                "levels must be strictly increasing".into(),
            ));
        }
        if self.bit_width < 1 {
            return Err(Error::InvalidScheme("bit width must be at least 1".into()));
        }
        match self.solver {
            Solver::BinaryExact => {
                if self.levels != [1.0] {
                    return Err(Error::InvalidScheme(
                        "binary solver requires levels {1}".into(),
                    ));
                }
            }
            Solver::TernaryExact | Solver::TernaryThreshold => {
                if self.levels != [0.0, 1.0] {
                    return Err(Error::InvalidScheme(
                        "ternary solvers require levels {0,1}".into(),
                    ));
                }
            }
            Solver::Lloyd { max_iters } => {
                if self.levels.len() < 2 {
                    return Err(Error::InvalidScheme(
                        "Lloyd solver requires at least 2 levels".into(),
                    ));
                }
                if max_iters < 1 {
                    return Err(Error::InvalidScheme(
                        "Lloyd solver requires max_iters >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn bit_width(&self) -> u32 {
        self.bit_width
    }

    pub fn solver(&self) -> Solver {
        self.solver
    }

    pub fn groups(&self) -> &GroupLayout {
        &self.groups
    }

    /// Same levels/solver over a different group layout.
    pub fn with_groups(&self, groups: GroupLayout) -> Self {
        Self {
            levels: self.levels.clone(),
            bit_width: self.bit_width,
            solver: self.solver,
            groups,
        }
    }
}

/// One quantized group: nonnegative scale times a code vector over `{±q_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupQuant {
    pub scale: f64,
    pub codes: Vec<f64>,
}

impl GroupQuant {
    /// Materializes `scale * codes`. Products of a scale with codes from a
    /// fixed level set are the definitional representation of the point, so
    /// this is the exact member of `Q` the group denotes.
    pub fn materialize_into(&self, out: &mut Vec<f64>) {
        out.extend(self.codes.iter().map(|&c| self.scale * c));
    }

    pub fn is_zero(&self) -> bool {
        self.codes.iter().all(|&c| c == 0.0) || self.scale == 0.0
    }
}

/// A point of `Q`, factored per group and materialized as a real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPoint {
    groups: Vec<GroupQuant>,
    materialized: Vec<f64>,
}

impl QuantizedPoint {
    pub fn from_groups(groups: Vec<GroupQuant>) -> Self {
        let mut materialized = Vec::with_capacity(groups.iter().map(|g| g.codes.len()).sum());
        for g in &groups {
            g.materialize_into(&mut materialized);
        }
        Self {
            groups,
            materialized,
        }
    }

    pub fn single(scale: f64, codes: Vec<f64>) -> Self {
        Self::from_groups(vec![GroupQuant { scale, codes }])
    }

    pub fn groups(&self) -> &[GroupQuant] {
        &self.groups
    }

    pub fn materialized(&self) -> &[f64] {
        &self.materialized
    }

    pub fn len(&self) -> usize {
        self.materialized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materialized.is_empty()
    }

    /// `||y - materialized||`.
    pub fn residual_norm(&self, y: &[f64]) -> f64 {
        self.objective(y).sqrt()
    }

    /// `||y - materialized||^2`, the quantization objective value.
    pub fn objective(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.materialized.len());
        y.iter()
            .zip(&self.materialized)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }

    /// Canonical line direction per group; `None` for an all-zero group.
    pub fn canonical_lines(&self) -> Vec<Option<LineSubspace>> {
        self.groups
            .iter()
            .map(|g| LineSubspace::from_code(&g.codes))
            .collect()
    }

    /// Whether two points of `Q` lie on the same union-of-lines component,
    /// group by group. `None` when either point has a zero group against a
    /// nonzero one (the origin belongs to every line).
    pub fn same_line(&self, other: &QuantizedPoint) -> Option<bool> {
        if self.groups.len() != other.groups.len() {
            return Some(false);
        }
        let mut all_equal = true;
        for (a, b) in self.canonical_lines().iter().zip(other.canonical_lines()) {
            match (a, b) {
                (None, None) => {}
                (Some(la), Some(lb)) => {
                    if la != &lb {
                        all_equal = false;
                    }
                }
                _ => return None,
            }
        }
        Some(all_equal)
    }
}

/// Projects `y` group-by-group onto `Q` per the scheme's solver.
pub fn project(y: &[f64], scheme: &QuantScheme) -> Result<QuantizedPoint> {
    scheme.validate()?;
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if scheme.groups().total_len() != y.len() {
        return Err(Error::DimMismatch {
            expected: scheme.groups().total_len(),
            got: y.len(),
            context: "scheme groups vs input vector",
        });
    }
    let mut groups = Vec::with_capacity(scheme.groups().num_groups());
    for range in scheme.groups().ranges() {
        let slice = &y[range];
        let point = match scheme.solver() {
            Solver::BinaryExact => binarize(slice)?,
            Solver::TernaryExact => ternarize_exact(slice)?,
            Solver::TernaryThreshold => ternarize_threshold(slice)?,
            Solver::Lloyd { max_iters } => {
                lloyd_quantize(slice, scheme.levels(), max_iters, LloydInit::MaxAbsOverTop)?
            }
        };
        groups.extend(point.groups);
    }
    Ok(QuantizedPoint::from_groups(groups))
}

/// Euclidean distance from `y` to `Q` under the scheme.
///
/// Exact for the binary/ternary exact solvers; an upper bound for the
/// threshold and Lloyd solvers (see [`Solver::is_exact`]).
pub fn dist_to_q(y: &[f64], scheme: &QuantScheme) -> Result<f64> {
    Ok(project(y, scheme)?.residual_norm(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn scheme_validation() {
        let g = GroupLayout::single(3).unwrap();
        assert!(QuantScheme::new(vec![1.0], 1, Solver::BinaryExact, g.clone()).is_ok());
        // Binary solver with ternary levels is a configuration error.
        assert!(QuantScheme::new(vec![0.0, 1.0], 1, Solver::BinaryExact, g.clone()).is_err());
        assert!(QuantScheme::new(vec![1.0], 2, Solver::TernaryExact, g.clone()).is_err());
        // Levels must be strictly increasing and nonnegative.
        assert!(
            QuantScheme::new(vec![1.0, 1.0], 2, Solver::Lloyd { max_iters: 1 }, g.clone()).is_err()
        );
        assert!(QuantScheme::new(
            vec![-1.0, 1.0],
            2,
            Solver::Lloyd { max_iters: 1 },
            g.clone()
        )
        .is_err());
        assert!(
            QuantScheme::new(vec![0.0, 1.0, 2.0], 3, Solver::Lloyd { max_iters: 0 }, g).is_err()
        );
        assert!(GroupLayout::from_lengths(vec![2, 0]).is_err());
        assert!(GroupLayout::from_lengths(vec![]).is_err());
    }

    #[test]
    fn project_dispatches_to_binarize() {
        let scheme = QuantScheme::binary(GroupLayout::single(3).unwrap());
        let p = project(&[2.0, -4.0, 6.0], &scheme).unwrap();
        assert_eq!(p.groups()[0].scale, 4.0);
        assert_eq!(p.groups()[0].codes, vec![1.0, -1.0, 1.0]);
        assert_eq!(p.materialized(), &[4.0, -4.0, 4.0]);
    }

    #[test]
    fn project_two_groups_ternary() {
        let layout = GroupLayout::from_lengths(vec![2, 2]).unwrap();
        let scheme = QuantScheme::ternary(layout);
        let p = project(&[2.0, -4.0, 3.0, 1.0], &scheme).unwrap();
        assert_eq!(p.groups()[0].scale, 3.0);
        assert_eq!(p.groups()[0].codes, vec![1.0, -1.0]);
        assert_eq!(p.groups()[1].scale, 3.0);
        assert_eq!(p.groups()[1].codes, vec![1.0, 0.0]);
    }

    #[test]
    fn project_idempotent_on_q_members() {
        let scheme = QuantScheme::ternary(GroupLayout::single(2).unwrap());
        let y = [2.0, 2.0];
        let p = project(&y, &scheme).unwrap();
        assert_eq!(p.materialized(), &y);
        assert_eq!(p.residual_norm(&y), 0.0);
    }

    #[test]
    fn dist_examples() {
        let scheme = QuantScheme::ternary(GroupLayout::single(2).unwrap());
        // ||y||^2 = 10, best score 9, residual^2 = 1.
        let d = dist_to_q(&[3.0, 1.0], &scheme).unwrap();
        assert!(close(d, 1.0, 1e-12));
        // Members of Q are at distance zero.
        assert_eq!(dist_to_q(&[2.0, 2.0], &scheme).unwrap(), 0.0);
        // Positive homogeneity: Q is a union of lines through the origin.
        let d2 = dist_to_q(&[6.0, 2.0], &scheme).unwrap();
        assert!(close(d2, 2.0, 1e-12));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let scheme = QuantScheme::binary(GroupLayout::single(3).unwrap());
        assert!(matches!(
            project(&[1.0, 2.0], &scheme),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn same_line_group_semantics() {
        let a = QuantizedPoint::single(1.0, vec![1.0, 0.0]);
        let b = QuantizedPoint::single(2.5, vec![-1.0, 0.0]);
        let c = QuantizedPoint::single(1.0, vec![0.0, 1.0]);
        let z = QuantizedPoint::single(0.0, vec![0.0, 0.0]);
        assert_eq!(a.same_line(&b), Some(true));
        assert_eq!(a.same_line(&c), Some(false));
        assert_eq!(a.same_line(&z), None);
        assert_eq!(z.same_line(&z), Some(true));
    }
}
