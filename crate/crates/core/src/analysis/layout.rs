use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{HoleBox, PlantedSpec};
use crate::numerics::SeededRng;
use crate::tdc::{prepare, Fence, RunConfig};

/// `(axis, (lo, hi))` intervals of one box in reduced coordinates.
pub type ReducedBounds = Vec<(usize, (f64, f64))>;

/// Placement of planted holes relative to the fence a run will draw.
///
/// The encoder and training set of a planted model do not depend on its boxes, so the
/// fence of a run with a given configuration can be computed before the boxes exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HoleLayout {
    /// One box per listed cell of the grid that halves every fence side. A cell is given
    /// by one flag per reduced axis (`true` for the upper half). Each box is its cell
    /// shrunk by `margin` times the half side on every face.
    Cells { cells: Vec<Vec<bool>>, margin: f64 },
    /// `count` slabs bounded only on reduced `axis`, centred in equal strips across the
    /// fence; each is `width` times its strip wide.
    Slabs { axis: usize, count: usize, width: f64 },
}

impl HoleLayout {
    /// The first `count` cells of the binary grid over the first `log2(count)` axes;
    /// all remaining axes sit in the lower half.
    pub fn lattice(count: usize, d_r: usize, margin: f64) -> Result<HoleLayout> {
        if !count.is_power_of_two() || count.trailing_zeros() as usize > d_r {
            return Err(Error::InvalidConfig(format!("{count} cells need a power of two up to 2^{d_r}")));
        }
        let cells =
            (0..count).map(|i| (0..d_r).map(|a| i.checked_shr(a as u32).unwrap_or(0) & 1 == 1).collect()).collect();
        Ok(HoleLayout::Cells { cells, margin })
    }

    pub fn boxes(&self, fence: &Fence) -> Result<Vec<ReducedBounds>> {
        match self {
            HoleLayout::Cells { cells, margin } => {
                if !(0.0..0.5).contains(margin) {
                    return Err(Error::InvalidConfig("cell margin must lie in [0, 0.5)".into()));
                }
                cells
                    .iter()
                    .map(|cell| {
                        if cell.len() != fence.dim() {
                            return Err(Error::DimensionMismatch { expected: fence.dim(), got: cell.len() });
                        }
                        Ok(cell
                            .iter()
                            .enumerate()
                            .map(|(a, &upper)| {
                                let half = 0.5 * fence.side(a);
                                let lo = fence.lo[a] + if upper { half } else { 0.0 };
                                (a, (lo + margin * half, lo + half - margin * half))
                            })
                            .collect())
                    })
                    .collect()
            }
            HoleLayout::Slabs { axis, count, width } => {
                if *axis >= fence.dim() || *count == 0 || !(*width > 0.0 && *width < 1.0) {
                    return Err(Error::InvalidConfig(
                        "slab layout needs a valid axis, count ≥ 1, width in (0, 1)".into(),
                    ));
                }
                let strip = fence.side(*axis) / *count as f64;
                Ok((0..*count)
                    .map(|i| {
                        let c = fence.lo[*axis] + (i as f64 + 0.5) * strip;
                        vec![(*axis, (c - 0.5 * width * strip, c + 0.5 * width * strip))]
                    })
                    .collect())
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            HoleLayout::Cells { cells, .. } => cells.len(),
            HoleLayout::Slabs { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `base` with its boxes replaced by `layout`, placed inside the fence that a run with
/// `config` will draw on the model.
pub fn fenced_spec(base: &PlantedSpec, config: &RunConfig, layout: &HoleLayout) -> Result<PlantedSpec> {
    let bare = PlantedSpec { boxes: Vec::new(), ..base.clone() }.build()?;
    let prep = prepare(&config.resolved(), &bare, &mut SeededRng::new(config.seed))?;
    let boxes =
        layout.boxes(&prep.fence)?.iter().map(|b| HoleBox::from_reduced(&prep.pca, b)).collect::<Result<Vec<_>>>()?;
    let spec = PlantedSpec { boxes, ..base.clone() };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelOracle;

    #[test]
    fn lattice_cells() {
        let HoleLayout::Cells { cells, .. } = HoleLayout::lattice(4, 3, 0.1).unwrap() else { panic!() };
        assert_eq!(
            cells,
            vec![
                vec![false, false, false],
                vec![true, false, false],
                vec![false, true, false],
                vec![true, true, false]
            ]
        );
        assert!(HoleLayout::lattice(3, 3, 0.1).is_err());
        assert!(HoleLayout::lattice(16, 3, 0.1).is_err());
    }

    #[test]
    fn boxes_sit_inside_the_run_fence() {
        let config = RunConfig { seed: 5, ..RunConfig::new(6, 3, 10) };
        let base = PlantedSpec { latent_dim: 6, training_size: 64, ..Default::default() };
        let spec = fenced_spec(&base, &config, &HoleLayout::lattice(2, 3, 0.1).unwrap()).unwrap();
        let model = spec.build().unwrap();
        let prep = prepare(&config, &model, &mut SeededRng::new(5)).unwrap();
        let mut inside = 0;
        for i in 0..2000 {
            let mut rng = SeededRng::new(i);
            let p = prep.fence.sample(&mut rng);
            let z = prep.pca.inverse_transform(&p).unwrap();
            let lower_rest = (1..3).all(|a| p[a] < prep.fence.lo[a] + 0.5 * prep.fence.side(a));
            if model.in_hole(&z) {
                inside += 1;
                assert!(lower_rest);
            }
            if !lower_rest {
                assert!(!model.in_hole(&z));
            }
        }
        // two of eight cells, each 0.8³ of its volume
        let expected = 2000.0 * 2.0 / 8.0 * 0.512;
        assert!((inside as f64 - expected).abs() < 0.2 * expected, "{inside}");
        assert_eq!(model.latent_dim(), 6);
    }

    #[test]
    fn slabs_are_disjoint_and_thin() {
        let fence = Fence { lo: vec![0.0, 0.0], hi: vec![4.0, 1.0], anchor_indices: vec![0, 1] };
        let boxes = HoleLayout::Slabs { axis: 0, count: 4, width: 0.5 }.boxes(&fence).unwrap();
        assert_eq!(boxes.len(), 4);
        assert_eq!(boxes[0], vec![(0, (0.25, 0.75))]);
        assert_eq!(boxes[3], vec![(0, (3.25, 3.75))]);
    }
}
