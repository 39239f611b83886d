//! Behavior synthesis by superposition.
//!
//! Elements of interest mark cells as rewarded with their signed priority
//! weight; the agent's Q-field is the weight-scaled sum of the corresponding
//! learners' values at the agent's current cell, with each layer scaled
//! inversely to its receptive-field area. Action selection is epsilon-greedy
//! over the composed field.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::ActionId;
use crate::bank::OvfBank;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::nres::{CellId, NresStack};

/// An environment object carrying a position and a signed priority weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementOfInterest {
    pub position: Vec2,
    pub weight: f64,
}

/// Per layer, the cells currently occupied by at least one element of
/// interest, with co-located weights summed. Cells whose weights cancel to
/// zero are dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardedCellSet {
    layers: Vec<BTreeMap<CellId, f64>>,
}

impl RewardedCellSet {
    pub fn layer(&self, k: usize) -> &BTreeMap<CellId, f64> {
        &self.layers[k]
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.iter().all(|m| m.is_empty())
    }
}

/// How layers are scaled when their contributions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingMode {
    /// Weight proportional to cell density `N^2` (inverse receptive-field
    /// area), normalized over layers.
    InverseArea,
    /// Every layer weighted `1 / layer_count`, for ablation.
    Uniform,
}

impl Default for WeightingMode {
    fn default() -> Self {
        WeightingMode::InverseArea
    }
}

/// The composed action-value vector at the agent's current state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QField([f64; 4]);

impl QField {
    pub const ZERO: QField = QField([0.0; 4]);

    pub fn values(&self) -> [f64; 4] {
        self.0
    }

    pub fn value(&self, a: ActionId) -> f64 {
        self.0[a.index()]
    }

    /// All actions attaining the exact maximum.
    pub fn argmax_set(&self) -> Vec<ActionId> {
        let max = self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ActionId::ALL
            .into_iter()
            .filter(|a| self.0[a.index()] == max)
            .collect()
    }
}

/// Maps elements of interest to the rewarded cells of every layer, summing
/// the weights of co-located elements.
pub fn rewarded_cells(eois: &[ElementOfInterest], stack: &NresStack) -> Result<RewardedCellSet> {
    let mut layers = vec![BTreeMap::new(); stack.len()];
    for eoi in eois {
        for cell in stack.activation_vector(eoi.position)? {
            *layers[cell.layer_index].entry(cell).or_insert(0.0) += eoi.weight;
        }
    }
    for map in &mut layers {
        map.retain(|_, w| *w != 0.0);
    }
    Ok(RewardedCellSet { layers })
}

/// Composes the Q-field at the agent's current activation vector:
/// `Q_tot(a) = sum_k c_k * sum_{(g, w) in rewarded[k]} w * Q_g(agent[k], a)`
/// with `c_k` given by the weighting mode. The sum is linear in the weights;
/// for a single layer and a single unit-weight cell the greedy action reduces
/// to that learner's own greedy action.
pub fn q_field(
    bank: &OvfBank,
    agent_cells: &[CellId],
    rewarded: &RewardedCellSet,
    mode: WeightingMode,
) -> Result<QField> {
    let stack = bank.stack();
    if agent_cells.len() != stack.len() || rewarded.layer_count() != stack.len() {
        return Err(Error::StackMismatch(format!(
            "expected {} layers, got agent {} / rewarded {}",
            stack.len(),
            agent_cells.len(),
            rewarded.layer_count()
        )));
    }
    let coefficients: Vec<f64> = match mode {
        WeightingMode::InverseArea => {
            let total = stack.cell_count() as f64;
            stack
                .layers()
                .iter()
                .map(|l| l.cell_count() as f64 / total)
                .collect()
        }
        WeightingMode::Uniform => vec![1.0 / stack.len() as f64; stack.len()],
    };
    let mut field = [0.0f64; 4];
    for (k, coefficient) in coefficients.into_iter().enumerate() {
        let mut layer_sum = [0.0f64; 4];
        for (&learner, &weight) in rewarded.layer(k) {
            let values = bank.action_values(learner, agent_cells[k])?;
            for (acc, v) in layer_sum.iter_mut().zip(values) {
                *acc += weight * v;
            }
        }
        for (acc, v) in field.iter_mut().zip(layer_sum) {
            *acc += coefficient * v;
        }
    }
    Ok(QField(field))
}

/// Epsilon-greedy selection: with probability `epsilon` a uniformly random
/// action, otherwise the argmax with uniform tie-breaking among exact ties.
pub fn select_action<R: Rng>(field: &QField, epsilon: f64, rng: &mut R) -> ActionId {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return ActionId::from_index(rng.random_range(0..ActionId::COUNT)).unwrap();
    }
    let ties = field.argmax_set();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::LearnerParams;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn stack(res: &[u32]) -> NresStack {
        NresStack::new(res).unwrap()
    }

    fn cell(layer: usize, ix: u32, iy: u32) -> CellId {
        CellId {
            layer_index: layer,
            ix,
            iy,
        }
    }

    fn eoi(x: f64, y: f64, w: f64) -> ElementOfInterest {
        ElementOfInterest {
            position: Vec2::new(x, y),
            weight: w,
        }
    }

    #[test]
    fn single_eoi_marks_its_cell() {
        let s = stack(&[5]);
        let set = rewarded_cells(&[eoi(0.9, 0.9, 1.0)], &s).unwrap();
        assert_eq!(set.layer(0).len(), 1);
        assert_eq!(set.layer(0)[&cell(0, 4, 4)], 1.0);
    }

    #[test]
    fn colocated_weights_sum_and_cancel() {
        let s = stack(&[5]);
        let set = rewarded_cells(&[eoi(0.9, 0.9, 1.0), eoi(0.85, 0.95, 0.5)], &s).unwrap();
        assert_eq!(set.layer(0)[&cell(0, 4, 4)], 1.5);

        let set = rewarded_cells(&[eoi(0.9, 0.9, 1.0), eoi(0.85, 0.95, -1.0)], &s).unwrap();
        assert!(set.layer(0).is_empty());
    }

    #[test]
    fn no_elements_no_rewarded_cells() {
        let s = stack(&[3, 7]);
        let set = rewarded_cells(&[], &s).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.layer_count(), 2);
    }

    #[test]
    fn empty_rewarded_set_gives_zero_field() {
        let s = stack(&[3, 7]);
        let bank = OvfBank::new(s.clone(), LearnerParams::default()).unwrap();
        let agent = s.activation_vector(Vec2::new(0.2, 0.2)).unwrap();
        let set = rewarded_cells(&[], &s).unwrap();
        let field = q_field(&bank, &agent, &set, WeightingMode::InverseArea).unwrap();
        assert_eq!(field.values(), [0.0; 4]);
    }

    /// Dyadic lattice values keep every product and partial sum exactly
    /// representable, so the linearity checks below can demand bit equality.
    fn lattice_q(rng: &mut impl Rng) -> f64 {
        rng.random_range(0..=1024) as f64 / 1024.0
    }

    fn lattice_w(rng: &mut impl Rng) -> f64 {
        let w = rng.random_range(-128..=128i32) as f64 / 64.0;
        if w == 0.0 {
            1.0
        } else {
            w
        }
    }

    fn populate(bank: &mut OvfBank, cells: &[CellId], agent: &[CellId], rng: &mut impl Rng) {
        for &g in cells {
            for a in ActionId::ALL {
                bank.set_q(g, agent[g.layer_index], a, lattice_q(rng)).unwrap();
            }
        }
    }

    #[test]
    fn field_is_additive_over_disjoint_rewarded_sets() {
        let mut rng = stream_rng(21, 0);
        for trial in 0..200 {
            let (s, mode) = if trial % 2 == 0 {
                (stack(&[7]), WeightingMode::InverseArea)
            } else {
                (stack(&[2, 3, 5, 8]), WeightingMode::Uniform)
            };
            let mut bank = OvfBank::new(s.clone(), LearnerParams::default()).unwrap();
            let agent = s.activation_vector(Vec2::new(0.51, 0.49)).unwrap();

            let mut eois_a = Vec::new();
            let mut eois_b = Vec::new();
            let mut used = std::collections::BTreeSet::new();
            for layer in s.layers() {
                let n = layer.resolution();
                for _ in 0..4 {
                    let (ix, iy) = (rng.random_range(0..n), rng.random_range(0..n));
                    if !used.insert((layer.layer_index(), ix, iy)) {
                        continue;
                    }
                    let p = Vec2::new(
                        (ix as f64 + 0.5) / n as f64,
                        (iy as f64 + 0.5) / n as f64,
                    );
                    let e = ElementOfInterest {
                        position: p,
                        weight: lattice_w(&mut rng),
                    };
                    if rng.random::<bool>() {
                        eois_a.push(e);
                    } else {
                        eois_b.push(e);
                    }
                }
            }
            let set_a = rewarded_cells(&eois_a, &s).unwrap();
            let set_b = rewarded_cells(&eois_b, &s).unwrap();
            let union: Vec<_> = eois_a.iter().chain(&eois_b).copied().collect();
            let set_u = rewarded_cells(&union, &s).unwrap();

            let all_cells: Vec<CellId> = (0..s.len())
                .flat_map(|k| set_u.layer(k).keys().copied().collect::<Vec<_>>())
                .collect();
            populate(&mut bank, &all_cells, &agent, &mut rng);

            let fa = q_field(&bank, &agent, &set_a, mode).unwrap().values();
            let fb = q_field(&bank, &agent, &set_b, mode).unwrap().values();
            let fu = q_field(&bank, &agent, &set_u, mode).unwrap().values();
            for a in 0..4 {
                assert_eq!(fu[a], fa[a] + fb[a], "component {a} not exactly additive");
            }
        }
    }

    #[test]
    fn weight_negation_negates_the_field() {
        let mut rng = stream_rng(5, 0);
        let s = stack(&[5]);
        let mut bank = OvfBank::new(s.clone(), LearnerParams::default()).unwrap();
        let agent = s.activation_vector(Vec2::new(0.1, 0.1)).unwrap();
        let e = eoi(0.7, 0.7, 1.25);
        let set = rewarded_cells(&[e], &s).unwrap();
        let cells: Vec<CellId> = set.layer(0).keys().copied().collect();
        populate(&mut bank, &cells, &agent, &mut rng);

        let mut neg = e;
        neg.weight = -e.weight;
        let set_neg = rewarded_cells(&[neg], &s).unwrap();
        let f = q_field(&bank, &agent, &set, WeightingMode::InverseArea)
            .unwrap()
            .values();
        let g = q_field(&bank, &agent, &set_neg, WeightingMode::InverseArea)
            .unwrap()
            .values();
        for a in 0..4 {
            assert_eq!(g[a], -f[a]);
        }
    }

    #[test]
    fn single_learner_reduction() {
        let mut rng = stream_rng(8, 0);
        for _ in 0..50 {
            let s = stack(&[6]);
            let mut bank = OvfBank::new(s.clone(), LearnerParams::default()).unwrap();
            let agent = s.activation_vector(Vec2::new(0.15, 0.85)).unwrap();
            let e = eoi(0.6, 0.3, 1.0);
            let set = rewarded_cells(&[e], &s).unwrap();
            let g = *set.layer(0).keys().next().unwrap();
            populate(&mut bank, &[g], &agent, &mut rng);

            let field = q_field(&bank, &agent, &set, WeightingMode::InverseArea).unwrap();
            let own = bank.action_values(g, agent[0]).unwrap();
            let own_max = own.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let own_set: Vec<ActionId> = ActionId::ALL
                .into_iter()
                .filter(|a| own[a.index()] == own_max)
                .collect();
            assert_eq!(field.argmax_set(), own_set);
        }
    }

    #[test]
    fn greedy_choice_invariant_under_positive_scaling() {
        let mut rng = stream_rng(13, 0);
        let s = stack(&[4]);
        let mut bank = OvfBank::new(s.clone(), LearnerParams::default()).unwrap();
        let agent = s.activation_vector(Vec2::new(0.9, 0.1)).unwrap();
        let base: Vec<ElementOfInterest> = (0..4)
            .map(|i| eoi(0.1 + 0.2 * i as f64, 0.6, lattice_w(&mut rng)))
            .collect();
        let set = rewarded_cells(&base, &s).unwrap();
        let cells: Vec<CellId> = set.layer(0).keys().copied().collect();
        populate(&mut bank, &cells, &agent, &mut rng);
        let reference = q_field(&bank, &agent, &set, WeightingMode::InverseArea)
            .unwrap()
            .argmax_set();
        for lambda in [0.25, 0.5, 2.0, 4.0, 3.0] {
            let scaled: Vec<ElementOfInterest> = base
                .iter()
                .map(|e| ElementOfInterest {
                    position: e.position,
                    weight: e.weight * lambda,
                })
                .collect();
            let set = rewarded_cells(&scaled, &s).unwrap();
            let argmax = q_field(&bank, &agent, &set, WeightingMode::InverseArea)
                .unwrap()
                .argmax_set();
            assert_eq!(argmax, reference, "lambda = {lambda}");
        }
    }

    #[test]
    fn select_action_greedy_and_exploring() {
        let mut rng = stream_rng(2, 1);
        let field = QField([1.0, 0.0, 0.0, 0.0]);
        for _ in 0..100 {
            assert_eq!(select_action(&field, 0.0, &mut rng), ActionId::North);
        }

        // epsilon 1.0 is uniform regardless of the field
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[select_action(&field, 1.0, &mut rng).index()] += 1;
        }
        for c in counts {
            assert!((c as i64 - 10_000).abs() < 600, "counts {counts:?}");
        }

        // an all-zero field ties everywhere and breaks uniformly
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[select_action(&QField::ZERO, 0.0, &mut rng).index()] += 1;
        }
        for c in counts {
            assert!((c as i64 - 10_000).abs() < 600, "counts {counts:?}");
        }
    }

    #[test]
    fn q_field_rejects_mismatched_inputs() {
        let s = stack(&[3, 7]);
        let bank = OvfBank::new(s.clone(), LearnerParams::default()).unwrap();
        let agent = s.activation_vector(Vec2::new(0.5, 0.5)).unwrap();
        let set = rewarded_cells(&[], &stack(&[3])).unwrap();
        assert!(q_field(&bank, &agent, &set, WeightingMode::Uniform).is_err());
        let set = rewarded_cells(&[], &s).unwrap();
        assert!(q_field(&bank, &agent[..1], &set, WeightingMode::Uniform).is_err());
    }
}
