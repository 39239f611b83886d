//! A bank of per-receptive-field Q-learners.
//!
//! Every cell of every layer owns one tabular Q-function over the cells of
//! its own layer. A learner's reward is `1` when the behavior stream enters
//! its cell and `0` otherwise, with the goal cell absorbing (no bootstrap
//! past it), so each table converges to a discounted-proximity field in
//! `[0,1]` toward its cell. All learners are updated from the same
//! transition each timestep, off-policy and independently of one another.
//!
//! Storage is paged per source state and materialized lazily: a stack like
//! `{N90}` implies on the order of 2.6e8 table entries, and states the
//! stream never leaves from must not allocate anything. Values are kept in
//! single precision; reads widen to `f64`.

use serde::{Deserialize, Serialize};

use crate::action::ActionId;
use crate::error::{Error, Result};
use crate::nres::{CellId, NresStack};

/// Step size, discount and initial value shared by every learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub alpha: f64,
    pub gamma: f64,
    pub q_init: f64,
}

impl LearnerParams {
    pub fn new(alpha: f64, gamma: f64, q_init: f64) -> Result<LearnerParams> {
        let p = LearnerParams {
            alpha,
            gamma,
            q_init,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.q_init >= 0.0 && self.q_init <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "q_init must be in [0, 1], got {}",
                self.q_init
            )));
        }
        Ok(())
    }
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            alpha: 0.1,
            gamma: 0.9,
            q_init: 0.0,
        }
    }
}

/// All tables of one layer. `pages[s]` holds `Q_g(s, a)` for every learner
/// `g` and action `a` of the layer, laid out action-major so that the
/// per-transition update touches contiguous slices.
#[derive(Debug, Clone)]
struct LayerTable {
    resolution: u32,
    /// Learner count == state count == resolution^2.
    size: usize,
    pages: Vec<Option<Box<[f32]>>>,
}

impl LayerTable {
    fn new(resolution: u32) -> LayerTable {
        let size = (resolution as usize).pow(2);
        LayerTable {
            resolution,
            size,
            pages: vec![None; size],
        }
    }

    fn row(&self, state: usize, action: usize) -> Option<&[f32]> {
        self.pages[state]
            .as_deref()
            .map(|p| &p[action * self.size..(action + 1) * self.size])
    }
}

/// One Q-table per receptive field of a stack, plus the shared parameters.
#[derive(Debug, Clone)]
pub struct OvfBank {
    stack: NresStack,
    params: LearnerParams,
    alpha: f32,
    gamma: f32,
    q_init: f32,
    layers: Vec<LayerTable>,
    scratch: Vec<f32>,
}

impl OvfBank {
    /// A fresh bank: every value reads as `q_init`, nothing is allocated yet.
    pub fn new(stack: NresStack, params: LearnerParams) -> Result<OvfBank> {
        params.validate()?;
        let layers = stack
            .layers()
            .iter()
            .map(|l| LayerTable::new(l.resolution()))
            .collect();
        Ok(OvfBank {
            stack,
            params,
            alpha: params.alpha as f32,
            gamma: params.gamma as f32,
            q_init: params.q_init as f32,
            layers,
            scratch: Vec::new(),
        })
    }

    pub fn stack(&self) -> &NresStack {
        &self.stack
    }

    pub fn params(&self) -> LearnerParams {
        self.params
    }

    /// Number of learners, one per receptive field of the stack.
    pub fn learner_count(&self) -> usize {
        self.stack.cell_count()
    }

    /// Applies the shared transition `(prev, action, next)` to every learner.
    ///
    /// For learner `g` of layer `k` with `s = prev[k]`, `s' = next[k]`:
    /// the target is `1` when `s' == g` (own-cell reward, absorbing) and
    /// `gamma * max_a' Q_g(s', a')` otherwise, and
    /// `Q_g(s, a) += alpha * (target - Q_g(s, a))`.
    ///
    /// Learners only ever read and write their own table, so the result does
    /// not depend on the order they are visited in.
    pub fn step_update(&mut self, prev: &[CellId], action: ActionId, next: &[CellId]) -> Result<()> {
        self.check_activation(prev)?;
        self.check_activation(next)?;
        let OvfBank {
            layers,
            scratch,
            alpha,
            gamma,
            q_init,
            ..
        } = self;
        for (k, table) in layers.iter_mut().enumerate() {
            update_layer(
                table,
                scratch,
                prev[k].flat(table.resolution),
                action.index(),
                next[k].flat(table.resolution),
                *alpha,
                *gamma,
                *q_init,
            );
        }
        Ok(())
    }

    /// `Q_learner(state, a)` for all four actions, in `ActionId` index order.
    pub fn action_values(&self, learner: CellId, state: CellId) -> Result<[f64; 4]> {
        let table = self.table_of(learner, state)?;
        let s = state.flat(table.resolution);
        let g = learner.flat(table.resolution);
        let mut out = [self.params.q_init; 4];
        if let Some(page) = table.pages[s].as_deref() {
            for (a, v) in out.iter_mut().enumerate() {
                *v = page[a * table.size + g] as f64;
            }
        }
        Ok(out)
    }

    /// Greedy value of a learner at a state.
    pub fn max_q(&self, learner: CellId, state: CellId) -> Result<f64> {
        let vs = self.action_values(learner, state)?;
        Ok(vs.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Writes one table entry directly. Intended for seeding banks from
    /// external data (priors, tooling, oracle tests); values must respect the
    /// `[0,1]` range every update preserves. Stored in single precision.
    pub fn set_q(&mut self, learner: CellId, state: CellId, action: ActionId, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidConfig(format!(
                "q value must be in [0, 1], got {value}"
            )));
        }
        let q_init = self.q_init;
        let table = self.table_of_mut(learner, state)?;
        let (size, s, g) = (
            table.size,
            state.flat(table.resolution),
            learner.flat(table.resolution),
        );
        let page = table.pages[s]
            .get_or_insert_with(|| vec![q_init; 4 * size].into_boxed_slice());
        page[action.index() * size + g] = value as f32;
        Ok(())
    }

    fn check_activation(&self, cells: &[CellId]) -> Result<()> {
        if cells.len() != self.layers.len() {
            return Err(Error::StackMismatch(format!(
                "expected {} cells, got {}",
                self.layers.len(),
                cells.len()
            )));
        }
        for (k, (cell, table)) in cells.iter().zip(&self.layers).enumerate() {
            if cell.layer_index != k || cell.ix >= table.resolution || cell.iy >= table.resolution {
                return Err(Error::StackMismatch(format!(
                    "cell {cell:?} is not a layer-{k} cell of resolution {}",
                    table.resolution
                )));
            }
        }
        Ok(())
    }

    fn table_of(&self, learner: CellId, state: CellId) -> Result<&LayerTable> {
        if learner.layer_index != state.layer_index {
            return Err(Error::LayerMismatch(learner.layer_index, state.layer_index));
        }
        let table = self
            .layers
            .get(learner.layer_index)
            .ok_or(Error::LayerMismatch(learner.layer_index, self.layers.len()))?;
        for cell in [learner, state] {
            if cell.ix >= table.resolution || cell.iy >= table.resolution {
                return Err(Error::StackMismatch(format!(
                    "cell {cell:?} exceeds resolution {}",
                    table.resolution
                )));
            }
        }
        Ok(table)
    }

    fn table_of_mut(&mut self, learner: CellId, state: CellId) -> Result<&mut LayerTable> {
        self.table_of(learner, state)?;
        Ok(&mut self.layers[learner.layer_index])
    }
}

#[allow(clippy::too_many_arguments)]
fn update_layer(
    table: &mut LayerTable,
    scratch: &mut Vec<f32>,
    s_prev: usize,
    action: usize,
    s_next: usize,
    alpha: f32,
    gamma: f32,
    q_init: f32,
) {
    let size = table.size;
    scratch.resize(size, 0.0);
    let targets = &mut scratch[..size];

    // Per-learner bootstrap targets, read before any write so the s == s'
    // case stays order independent.
    match table.pages[s_next].as_deref() {
        Some(page) => {
            let q0 = &page[..size];
            let q1 = &page[size..2 * size];
            let q2 = &page[2 * size..3 * size];
            let q3 = &page[3 * size..4 * size];
            for i in 0..size {
                targets[i] = gamma * q0[i].max(q1[i]).max(q2[i]).max(q3[i]);
            }
        }
        None => targets.fill(gamma * q_init),
    }
    // The learner whose cell was just entered sees reward 1 and no bootstrap.
    targets[s_next] = 1.0;

    let page = table.pages[s_prev]
        .get_or_insert_with(|| vec![q_init; 4 * size].into_boxed_slice());
    let row = &mut page[action * size..(action + 1) * size];
    for (q, &t) in row.iter_mut().zip(targets.iter()) {
        *q += alpha * (t - *q);
    }
}

impl PartialEq for OvfBank {
    /// Value-level equality: an absent page compares equal to a materialized
    /// page still holding `q_init` everywhere.
    fn eq(&self, other: &Self) -> bool {
        if self.stack != other.stack || self.params != other.params {
            return false;
        }
        self.layers.iter().zip(&other.layers).all(|(a, b)| {
            (0..a.size).all(|s| {
                (0..4).all(|act| match (a.row(s, act), b.row(s, act)) {
                    (None, None) => true,
                    (Some(ra), Some(rb)) => ra == rb,
                    (Some(r), None) | (None, Some(r)) => {
                        r.iter().all(|&v| v == self.q_init)
                    }
                })
            })
        })
    }
}

// --- snapshot format -------------------------------------------------------
//
// Little-endian throughout:
//   magic "OVFB", u16 version,
//   u16 layer count, u32 resolution per layer,
//   f64 alpha, f64 gamma, f64 q_init,
//   per layer, per learner (row-major cell order):
//     u32 entry count, entries (u32 state, u8 action, f32 value)
// storing only entries that differ from q_init.

const SNAPSHOT_MAGIC: [u8; 4] = *b"OVFB";
const SNAPSHOT_VERSION: u16 = 1;

impl OvfBank {
    /// Serializes every stored value; `restore` reproduces them bit-exactly.
    pub fn snapshot(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u16).to_le_bytes());
        for table in &self.layers {
            out.extend_from_slice(&table.resolution.to_le_bytes());
        }
        out.extend_from_slice(&self.params.alpha.to_le_bytes());
        out.extend_from_slice(&self.params.gamma.to_le_bytes());
        out.extend_from_slice(&self.params.q_init.to_le_bytes());

        let mut entries: Vec<(u32, u8, f32)> = Vec::new();
        for table in &self.layers {
            for g in 0..table.size {
                entries.clear();
                for (s, page) in table.pages.iter().enumerate() {
                    if let Some(page) = page.as_deref() {
                        for a in 0..4 {
                            let v = page[a * table.size + g];
                            if v != self.q_init {
                                entries.push((s as u32, a as u8, v));
                            }
                        }
                    }
                }
                out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
                for &(s, a, v) in &entries {
                    out.extend_from_slice(&s.to_le_bytes());
                    out.push(a);
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn restore(bytes: &[u8]) -> Result<OvfBank> {
        let mut r = Reader { buf: bytes, at: 0 };
        if r.bytes(4)? != SNAPSHOT_MAGIC {
            return Err(Error::SnapshotFormat("bad magic".into()));
        }
        let version = r.u16()?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::SnapshotFormat(format!(
                "unsupported version {version}"
            )));
        }
        let layer_count = r.u16()? as usize;
        let mut resolutions = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            resolutions.push(r.u32()?);
        }
        let alpha = r.f64()?;
        let gamma = r.f64()?;
        let q_init = r.f64()?;
        let stack = NresStack::new(&resolutions)
            .map_err(|e| Error::SnapshotFormat(e.to_string()))?;
        let params = LearnerParams::new(alpha, gamma, q_init)
            .map_err(|e| Error::SnapshotFormat(e.to_string()))?;
        let mut bank = OvfBank::new(stack, params)?;

        for table in &mut bank.layers {
            let size = table.size;
            for g in 0..size {
                let count = r.u32()? as usize;
                for _ in 0..count {
                    let s = r.u32()? as usize;
                    let a = r.u8()? as usize;
                    let v = r.f32()?;
                    if s >= size || a >= 4 {
                        return Err(Error::SnapshotFormat(format!(
                            "entry ({s}, {a}) out of range for layer size {size}"
                        )));
                    }
                    let page = table.pages[s]
                        .get_or_insert_with(|| vec![bank.q_init; 4 * size].into_boxed_slice());
                    page[a * size + g] = v;
                }
            }
        }
        if r.at != bytes.len() {
            return Err(Error::SnapshotFormat(format!(
                "{} trailing bytes",
                bytes.len() - r.at
            )));
        }
        Ok(bank)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.buf.len() {
            return Err(Error::SnapshotFormat("truncated input".into()));
        }
        let out = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}
