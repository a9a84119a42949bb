//! Uniform grid over the selected state dimensions.

use crate::error::{FacError, Result};
use crate::linalg::{DimensionSelection, Matrix};

/// Relative padding applied to each side of the observed rollout range.
const RANGE_PADDING: f64 = 0.01;
/// Absolute padding used when a selected dimension never varied.
const FLAT_PADDING: f64 = 1.0;

/// Grid over the selected dimensions `kappa`; dimension `i` spans
/// `[lower[i], upper[i]]` split into `mu[i]` equal cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    kappa: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    mu: Vec<u32>,
}

/// One cell of the grid, as per-dimension indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbstractStateId(pub Vec<u32>);

impl AbstractStateId {
    pub fn cell(&self) -> &[u32] {
        &self.0
    }
}

impl PartitionSpec {
    pub fn new(kappa: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>, mu: Vec<u32>) -> Result<Self> {
        let k = kappa.len();
        if k == 0 {
            return Err(FacError::InvalidConfig("partition needs at least one dimension".into()));
        }
        if lower.len() != k || upper.len() != k || mu.len() != k {
            return Err(FacError::InvalidConfig(format!(
                "partition arrays disagree in length: kappa {k}, lower {}, upper {}, mu {}",
                lower.len(),
                upper.len(),
                mu.len()
            )));
        }
        for i in 0..k {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(FacError::InvalidConfig(format!(
                    "bad bounds [{}, {}] on dimension {}",
                    lower[i], upper[i], kappa[i]
                )));
            }
            if mu[i] == 0 {
                return Err(FacError::InvalidConfig("mu entries must be at least 1".into()));
            }
        }
        Ok(Self {
            kappa,
            lower,
            upper,
            mu,
        })
    }

    pub fn kappa(&self) -> &[usize] {
        &self.kappa
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn mu(&self) -> &[u32] {
        &self.mu
    }

    pub fn width(&self, i: usize) -> f64 {
        (self.upper[i] - self.lower[i]) / self.mu[i] as f64
    }

    /// Total number of cells, saturating at `u128::MAX`.
    pub fn cell_count(&self) -> u128 {
        self.mu
            .iter()
            .fold(1u128, |acc, &m| acc.saturating_mul(m as u128))
    }

    /// Maps a full state vector to its cell. Half-open cells `[lo, hi)`, top
    /// cell closed; coordinates outside the grid clamp to the edge cells.
    pub fn map_state(&self, s: &[f64]) -> Result<AbstractStateId> {
        if let Some(i) = s.iter().position(|x| !x.is_finite()) {
            return Err(FacError::NonFiniteState(i));
        }
        let mut cell = Vec::with_capacity(self.kappa.len());
        for (i, &dim) in self.kappa.iter().enumerate() {
            let x = *s.get(dim).ok_or(FacError::ShapeMismatch {
                expected: dim + 1,
                got: s.len(),
            })?;
            let t = ((x - self.lower[i]) / self.width(i)).floor();
            let top = (self.mu[i] - 1) as f64;
            cell.push(t.clamp(0.0, top) as u32);
        }
        Ok(AbstractStateId(cell))
    }
}

/// Builds the grid from the rollout's range on each selected dimension.
///
/// `mu` holds one count per selected dimension, or a single count applied to
/// all of them.
pub fn build_partition(
    omega: &Matrix,
    sel: &DimensionSelection,
    mu: &[u32],
) -> Result<PartitionSpec> {
    if omega.rows() == 0 {
        return Err(FacError::DegenerateRollout("rollout has no states"));
    }
    let k = sel.kappa.len();
    let mu: Vec<u32> = match mu.len() {
        1 => vec![mu[0]; k],
        n if n == k => mu.to_vec(),
        n => {
            return Err(FacError::InvalidConfig(format!(
                "mu has {n} entries for {k} selected dimensions"
            )))
        }
    };
    let mut lower = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k);
    for &dim in &sel.kappa {
        if dim >= omega.cols() {
            return Err(FacError::ShapeMismatch {
                expected: omega.cols(),
                got: dim + 1,
            });
        }
        let (lo, hi) = (0..omega.rows())
            .map(|i| omega[(i, dim)])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(FacError::NonFiniteInput);
        }
        let range = hi - lo;
        let pad = if range > 0.0 {
            RANGE_PADDING * range
        } else {
            FLAT_PADDING
        };
        lower.push(lo - pad);
        upper.push(hi + pad);
    }
    PartitionSpec::new(sel.kappa.clone(), lower, upper, mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dim(values: &[f64], mu: u32) -> PartitionSpec {
        let rows: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
        let omega = Matrix::from_rows(&rows).unwrap();
        let sel = DimensionSelection {
            kappa: vec![0],
            pivots: vec![1.0],
        };
        build_partition(&omega, &sel, &[mu]).unwrap()
    }

    #[test]
    fn padding_rule() {
        let spec = one_dim(&[-1.0, 0.3, 1.0], 50);
        assert!((spec.lower()[0] + 1.02).abs() < 1e-12);
        assert!((spec.upper()[0] - 1.02).abs() < 1e-12);
        assert!((spec.width(0) - 2.04 / 50.0).abs() < 1e-12);
    }

    #[test]
    fn zero_range_fallback() {
        let spec = one_dim(&[3.0, 3.0], 10);
        assert_eq!(spec.lower()[0], 2.0);
        assert_eq!(spec.upper()[0], 4.0);
    }

    #[test]
    fn cell_center_maps_to_itself() {
        let spec = one_dim(&[-1.0, 1.0], 50);
        let center = spec.lower()[0] + 7.5 * spec.width(0);
        assert_eq!(spec.map_state(&[center]).unwrap().cell(), &[7]);
    }

    #[test]
    fn out_of_range_clamps() {
        let spec = PartitionSpec::new(vec![0], vec![0.0], vec![1.0], vec![4]).unwrap();
        assert_eq!(spec.map_state(&[-5.0]).unwrap().cell(), &[0]);
        assert_eq!(spec.map_state(&[5.0]).unwrap().cell(), &[3]);
        assert_eq!(spec.map_state(&[1.0]).unwrap().cell(), &[3]);
    }

    #[test]
    fn shared_boundary_belongs_to_upper_cell() {
        let spec = PartitionSpec::new(vec![0], vec![0.0], vec![1.0], vec![4]).unwrap();
        assert_eq!(spec.map_state(&[0.5]).unwrap().cell(), &[2]);
        assert_eq!(fac_oracles::nearest_center_index(0.5, 0.0, 1.0, 4), 2);
    }

    #[test]
    fn uses_only_selected_dimensions() {
        let spec = PartitionSpec::new(vec![2], vec![0.0], vec![10.0], vec![10]).unwrap();
        assert_eq!(spec.map_state(&[99.0, -99.0, 4.5]).unwrap().cell(), &[4]);
    }

    #[test]
    fn rejects_non_finite_state() {
        let spec = PartitionSpec::new(vec![0], vec![0.0], vec![1.0], vec![4]).unwrap();
        assert!(matches!(
            spec.map_state(&[0.1, f64::NAN]),
            Err(FacError::NonFiniteState(1))
        ));
    }

    #[test]
    fn empty_rollout_is_degenerate() {
        let omega = Matrix::zeros(0, 2);
        let sel = DimensionSelection::all(2);
        assert!(matches!(
            build_partition(&omega, &sel, &[5]),
            Err(FacError::DegenerateRollout(_))
        ));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(PartitionSpec::new(vec![0], vec![1.0], vec![1.0], vec![4]).is_err());
        assert!(PartitionSpec::new(vec![0], vec![0.0], vec![1.0], vec![0]).is_err());
        assert!(PartitionSpec::new(vec![0, 1], vec![0.0], vec![1.0], vec![4]).is_err());
    }

    #[test]
    fn huge_grids_count_without_overflow() {
        let spec = PartitionSpec::new(
            vec![0, 1, 2, 3, 4],
            vec![0.0; 5],
            vec![1.0; 5],
            vec![50; 5],
        )
        .unwrap();
        assert_eq!(spec.cell_count(), 50u128.pow(5));
    }
}
