//! Place-cell tilings of the unit square.
//!
//! A layer partitions `[0,1) x [0,1)` into `N x N` axis-aligned square
//! receptive fields of side `1/N`. A stack holds several layers of pairwise
//! distinct resolution; a position activates exactly one cell per layer, so
//! the activation vector is a lossless multi-resolution discretization of the
//! agent's coordinate.

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Largest accepted cells-per-axis count. Keeps the per-layer state index
/// (`N^2` entries, allocated eagerly as empty pages) within sane bounds.
pub const MAX_RESOLUTION: u32 = 4096;

/// One tiling layer: `resolution` cells per axis at a fixed position in the
/// stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    resolution: u32,
    layer_index: usize,
}

impl LayerSpec {
    pub fn new(resolution: u32, layer_index: usize) -> Result<LayerSpec> {
        if resolution < 1 || resolution > MAX_RESOLUTION {
            return Err(Error::InvalidConfig(format!(
                "layer resolution must be in 1..={MAX_RESOLUTION}, got {resolution}"
            )));
        }
        Ok(LayerSpec {
            resolution,
            layer_index,
        })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    /// Number of receptive fields in this layer (`N^2`).
    pub fn cell_count(&self) -> usize {
        (self.resolution as usize).pow(2)
    }

    /// Maps a position to the cell containing it. Total over `[0,1]^2`: the
    /// closed upper boundary is clamped into the last cell, since the arena
    /// is closed and the agent can touch a wall.
    pub fn locate(&self, p: Vec2) -> Result<CellId> {
        if !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y) {
            return Err(Error::OutOfArena { x: p.x, y: p.y });
        }
        let n = self.resolution;
        let ix = ((p.x * n as f64) as u32).min(n - 1);
        let iy = ((p.y * n as f64) as u32).min(n - 1);
        Ok(CellId {
            layer_index: self.layer_index,
            ix,
            iy,
        })
    }
}

/// A receptive field: layer plus column/row indices, origin at the lower-left
/// cell `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub layer_index: usize,
    pub ix: u32,
    pub iy: u32,
}

impl CellId {
    /// Row-major flat index within a layer of the given resolution.
    pub(crate) fn flat(&self, resolution: u32) -> usize {
        (self.iy * resolution + self.ix) as usize
    }
}

/// Ordered set of tiling layers with pairwise distinct resolutions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NresStack {
    layers: Vec<LayerSpec>,
}

impl NresStack {
    pub fn new(resolutions: &[u32]) -> Result<NresStack> {
        if resolutions.is_empty() {
            return Err(Error::InvalidConfig(
                "a stack needs at least one layer".into(),
            ));
        }
        let mut seen = resolutions.to_vec();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!(
                "layer resolutions must be pairwise distinct, got {resolutions:?}"
            )));
        }
        let layers = resolutions
            .iter()
            .enumerate()
            .map(|(i, &n)| LayerSpec::new(n, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(NresStack { layers })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn resolutions(&self) -> Vec<u32> {
        self.layers.iter().map(|l| l.resolution).collect()
    }

    /// Total receptive-field count over all layers, i.e. the number of
    /// learners a bank over this stack maintains.
    pub fn cell_count(&self) -> usize {
        self.layers.iter().map(|l| l.cell_count()).sum()
    }

    /// The active cell of every layer, in layer order. Within a layer the
    /// receptive fields are mutually exclusive, so exactly one cell fires.
    pub fn activation_vector(&self, p: Vec2) -> Result<Vec<CellId>> {
        self.layers.iter().map(|l| l.locate(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn stack(res: &[u32]) -> NresStack {
        NresStack::new(res).unwrap()
    }

    #[test]
    fn locate_basic_cells() {
        let layer = LayerSpec::new(5, 0).unwrap();
        let c = layer.locate(Vec2::new(0.9, 0.9)).unwrap();
        assert_eq!((c.ix, c.iy), (4, 4));
        let c = layer.locate(Vec2::new(0.0, 0.0)).unwrap();
        assert_eq!((c.ix, c.iy), (0, 0));
    }

    #[test]
    fn locate_clamps_closed_boundary() {
        let layer = LayerSpec::new(5, 0).unwrap();
        let c = layer.locate(Vec2::new(1.0, 1.0)).unwrap();
        assert_eq!((c.ix, c.iy), (4, 4));
    }

    #[test]
    fn locate_rejects_out_of_arena() {
        let layer = LayerSpec::new(5, 0).unwrap();
        assert!(layer.locate(Vec2::new(-0.01, 0.5)).is_err());
        assert!(layer.locate(Vec2::new(0.5, 1.01)).is_err());
        assert!(layer.locate(Vec2::new(f64::NAN, 0.5)).is_err());
    }

    #[test]
    fn activation_vector_center_of_odd_resolutions() {
        let s = stack(&[3, 7, 23]);
        let av = s.activation_vector(Vec2::new(0.5, 0.5)).unwrap();
        let got: Vec<(u32, u32)> = av.iter().map(|c| (c.ix, c.iy)).collect();
        assert_eq!(got, vec![(1, 1), (3, 3), (11, 11)]);
        assert_eq!(av[0].layer_index, 0);
        assert_eq!(av[2].layer_index, 2);
    }

    #[test]
    fn activation_vector_single_layer() {
        let s = stack(&[5]);
        let av = s.activation_vector(Vec2::new(0.9, 0.9)).unwrap();
        assert_eq!(av.len(), 1);
        assert_eq!((av[0].ix, av[0].iy), (4, 4));
    }

    #[test]
    fn cell_counts() {
        assert_eq!(stack(&[3, 7, 23]).cell_count(), 587);
        assert_eq!(stack(&[10]).cell_count(), 100);
        assert_eq!(stack(&[70]).cell_count(), 4900);
        // the coarse/fine dimensionality gap quoted for N10 vs N70
        assert_eq!(stack(&[70]).cell_count() / stack(&[10]).cell_count(), 49);
    }

    #[test]
    fn rejects_bad_stacks() {
        assert!(NresStack::new(&[]).is_err());
        assert!(NresStack::new(&[3, 3]).is_err());
        assert!(NresStack::new(&[0]).is_err());
        assert!(NresStack::new(&[MAX_RESOLUTION + 1]).is_err());
        // prime resolutions are a heuristic, not a constraint
        assert!(NresStack::new(&[4, 6, 9]).is_ok());
    }

    #[test]
    fn partition_over_a_million_random_positions() {
        let s = stack(&[3, 7, 23]);
        let mut rng = crate::rng::stream_rng(11, 0);
        for _ in 0..1_000_000 {
            let p = Vec2::new(rng.random::<f64>(), rng.random::<f64>());
            let av = s.activation_vector(p).unwrap();
            assert_eq!(av.len(), s.len());
            for (k, (cell, layer)) in av.iter().zip(s.layers()).enumerate() {
                assert_eq!(cell.layer_index, k);
                assert!(cell.ix < layer.resolution() && cell.iy < layer.resolution());
            }
        }
    }

    proptest! {
        #[test]
        fn locate_agrees_with_activation_vector(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            let s = stack(&[2, 5, 9]);
            let p = Vec2::new(x, y);
            let av = s.activation_vector(p).unwrap();
            for layer in s.layers() {
                prop_assert_eq!(layer.locate(p).unwrap(), av[layer.layer_index()]);
            }
        }

        #[test]
        fn located_cell_contains_the_position(x in 0.0f64..1.0, y in 0.0f64..1.0, n in 1u32..64) {
            let layer = LayerSpec::new(n, 0).unwrap();
            let c = layer.locate(Vec2::new(x, y)).unwrap();
            let side = 1.0 / n as f64;
            prop_assert!(x >= c.ix as f64 * side && x < (c.ix + 1) as f64 * side + 1e-12);
            prop_assert!(y >= c.iy as f64 * side && y < (c.iy + 1) as f64 * side + 1e-12);
        }
    }
}
