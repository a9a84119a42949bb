use std::collections::HashMap;

use crate::error::Result;
use crate::partition::{AbstractStateId, PartitionSpec};
use crate::replay::Transition;

/// Number of unordered stored pairs that share an abstract cell and whose
/// rewards differ by at most `beta`.
pub fn duplicate_census<'a, I>(transitions: I, spec: &PartitionSpec, beta: f64) -> Result<u64>
where
    I: IntoIterator<Item = &'a Transition>,
{
    let mut by_cell: HashMap<AbstractStateId, Vec<f64>> = HashMap::new();
    for t in transitions {
        by_cell.entry(spec.map_state(&t.s)?).or_default().push(t.r);
    }
    let mut pairs = 0u64;
    for rewards in by_cell.values_mut() {
        rewards.sort_by(f64::total_cmp);
        let mut lo = 0;
        for hi in 0..rewards.len() {
            while rewards[hi] - rewards[lo] > beta {
                lo += 1;
            }
            pairs += (hi - lo) as u64;
        }
    }
    Ok(pairs)
}
