//! Layered architecture of the locally connected multinomial DBM.
//!
//! Layers are same-sized periodic grids. Between adjacent layers, every
//! patch of `pw x ph` units in the lower layer (anchored at each unit, with
//! wrap-around) connects to the single upper unit sharing the anchor, so
//! each unit carries `q = pw * ph` edges in either direction. Biases and
//! weights are shared across all units of a layer; weights are additionally
//! restricted to an explicit list of enabled species pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{SpeciesId, SpeciesTable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub height: usize,
    /// Species admissible in this layer, as ids into the shared table.
    pub species: Vec<SpeciesId>,
}

impl LayerSpec {
    pub fn n_units(&self) -> usize {
        self.width * self.height
    }
}

/// An enabled shared weight between species `a` in layer `lower` and
/// species `b` in layer `lower + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub lower: usize,
    pub a: SpeciesId,
    pub b: SpeciesId,
}

/// Identifies one shared interaction parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InteractionId {
    Bias { layer: usize, species: SpeciesId },
    Weight { lower: usize, a: SpeciesId, b: SpeciesId },
}

impl std::fmt::Display for InteractionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InteractionId::Bias { layer, species } => write!(f, "a:{layer}:{species}"),
            InteractionId::Weight { lower, a, b } => write!(f, "w:{lower}:{a}:{b}"),
        }
    }
}

impl InteractionId {
    /// Human-readable form using species names, e.g. `a:0:H` or `w:0:H:H`.
    pub fn display_named(&self, table: &SpeciesTable) -> String {
        match self {
            InteractionId::Bias { layer, species } => {
                format!("a:{layer}:{}", table.name(*species))
            }
            InteractionId::Weight { lower, a, b } => {
                format!("w:{lower}:{}:{}", table.name(*a), table.name(*b))
            }
        }
    }

    /// Parse the `display_named` form.
    pub fn parse_named(text: &str, table: &SpeciesTable) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let species = |name: &str| -> Result<SpeciesId> {
            table
                .id(name)
                .ok_or_else(|| Error::UnknownSpecies(name.to_string()))
        };
        let layer = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::InvalidConfig {
                key: "domain".into(),
                reason: format!("bad layer index in `{text}`"),
            })
        };
        match parts.as_slice() {
            ["a", l, sp] => Ok(InteractionId::Bias {
                layer: layer(l)?,
                species: species(sp)?,
            }),
            ["w", l, a, b] => Ok(InteractionId::Weight {
                lower: layer(l)?,
                a: species(a)?,
                b: species(b)?,
            }),
            _ => Err(Error::InvalidConfig {
                key: "domain".into(),
                reason: format!("cannot parse interaction `{text}` (want a:<layer>:<sp> or w:<lower>:<sp>:<sp>)"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbmArchitecture {
    layers: Vec<LayerSpec>,
    /// Patch shape per adjacent layer pair (lower index).
    patches: Vec<(usize, usize)>,
    weights: Vec<WeightSpec>,
    bias_slots: Vec<(usize, SpeciesId)>,
}

impl DbmArchitecture {
    pub fn new(
        layers: Vec<LayerSpec>,
        patches: Vec<(usize, usize)>,
        weights: Vec<WeightSpec>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArchitecture("at least one layer required".into()));
        }
        if patches.len() + 1 != layers.len() {
            return Err(Error::InvalidArchitecture(format!(
                "{} layers need {} patch shapes, got {}",
                layers.len(),
                layers.len() - 1,
                patches.len()
            )));
        }
        for w in layers.windows(2) {
            if w[0].width != w[1].width || w[0].height != w[1].height {
                return Err(Error::InvalidArchitecture(
                    "adjacent layers must have equal grid dimensions".into(),
                ));
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.width == 0 || layer.height == 0 {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {l} has zero-sized grid"
                )));
            }
            let mut seen = layer.species.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != layer.species.len() {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {l} lists a species twice"
                )));
            }
        }
        for &(pw, ph) in &patches {
            if pw == 0 || ph == 0 {
                return Err(Error::InvalidArchitecture("zero-sized patch".into()));
            }
        }
        for w in &weights {
            if w.lower + 1 >= layers.len() {
                return Err(Error::InvalidArchitecture(format!(
                    "weight references layer pair ({}, {}) outside the stack",
                    w.lower,
                    w.lower + 1
                )));
            }
            if !layers[w.lower].species.contains(&w.a) {
                return Err(Error::InvalidArchitecture(format!(
                    "weight species {} not present in layer {}",
                    w.a, w.lower
                )));
            }
            if !layers[w.lower + 1].species.contains(&w.b) {
                return Err(Error::InvalidArchitecture(format!(
                    "weight species {} not present in layer {}",
                    w.b,
                    w.lower + 1
                )));
            }
        }
        let bias_slots = layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| layer.species.iter().map(move |&sp| (l, sp)))
            .collect();
        Ok(DbmArchitecture {
            layers,
            patches,
            weights,
            bias_slots,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, l: usize) -> &LayerSpec {
        &self.layers[l]
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Connections per unit between layers `pair` and `pair + 1`.
    pub fn q(&self, pair: usize) -> f64 {
        let (pw, ph) = self.patches[pair];
        (pw * ph) as f64
    }

    pub fn patch(&self, pair: usize) -> (usize, usize) {
        self.patches[pair]
    }

    /// Ordered (layer, species) bias slots.
    pub fn bias_slots(&self) -> &[(usize, SpeciesId)] {
        &self.bias_slots
    }

    /// Ordered enabled weight slots.
    pub fn weight_slots(&self) -> &[WeightSpec] {
        &self.weights
    }

    pub fn bias_slot(&self, layer: usize, species: SpeciesId) -> Option<usize> {
        self.bias_slots
            .iter()
            .position(|&(l, sp)| l == layer && sp == species)
    }

    pub fn weight_slot(&self, lower: usize, a: SpeciesId, b: SpeciesId) -> Option<usize> {
        self.weights
            .iter()
            .position(|w| w.lower == lower && w.a == a && w.b == b)
    }

    pub fn interaction_slot(&self, id: InteractionId) -> Option<(bool, usize)> {
        match id {
            InteractionId::Bias { layer, species } => {
                self.bias_slot(layer, species).map(|s| (true, s))
            }
            InteractionId::Weight { lower, a, b } => {
                self.weight_slot(lower, a, b).map(|s| (false, s))
            }
        }
    }

    /// Units in layer `l + 1` connected to unit `(x, y)` of layer `l`:
    /// the anchors of every patch covering the unit (with multiplicity
    /// when the patch wraps onto itself on small grids).
    pub fn up_neighbors(&self, l: usize, x: usize, y: usize) -> Vec<(usize, usize)> {
        let (pw, ph) = self.patches[l];
        let layer = &self.layers[l + 1];
        let (w, h) = (layer.width as i64, layer.height as i64);
        let mut out = Vec::with_capacity(pw * ph);
        for dy in 0..ph as i64 {
            for dx in 0..pw as i64 {
                let ax = (x as i64 - dx).rem_euclid(w) as usize;
                let ay = (y as i64 - dy).rem_euclid(h) as usize;
                out.push((ax, ay));
            }
        }
        out
    }

    /// Units in layer `l - 1` covered by the patch anchored at unit
    /// `(x, y)` of layer `l`.
    pub fn down_neighbors(&self, l: usize, x: usize, y: usize) -> Vec<(usize, usize)> {
        let (pw, ph) = self.patches[l - 1];
        let layer = &self.layers[l - 1];
        let (w, h) = (layer.width as i64, layer.height as i64);
        let mut out = Vec::with_capacity(pw * ph);
        for dy in 0..ph as i64 {
            for dx in 0..pw as i64 {
                let ax = (x as i64 + dx).rem_euclid(w) as usize;
                let ay = (y as i64 + dy).rem_euclid(h) as usize;
                out.push((ax, ay));
            }
        }
        out
    }

    /// Flat indices of the units in layer `l + direction` connected to the
    /// unit with flat index `unit` in layer `l`.
    pub fn neighbors(&self, l: usize, unit: usize, direction: i32) -> Result<Vec<usize>> {
        let target = l as i64 + direction as i64;
        if target < 0 || target >= self.layers.len() as i64 {
            return Err(Error::LayerOutOfRange {
                layer: target.max(0) as usize,
                layers: self.layers.len(),
            });
        }
        let layer = &self.layers[l];
        let (x, y) = (unit % layer.width, unit / layer.width);
        let coords = if direction > 0 {
            self.up_neighbors(l, x, y)
        } else {
            self.down_neighbors(l, x, y)
        };
        let target_layer = &self.layers[target as usize];
        Ok(coords
            .into_iter()
            .map(|(cx, cy)| cy * target_layer.width + cx)
            .collect())
    }

    /// Total edge count between layers `pair` and `pair + 1`.
    pub fn n_edges(&self, pair: usize) -> usize {
        self.layers[pair].n_units() * self.q(pair) as usize
    }

    /// The standard stack: `n_layers` equal grids sharing the species list,
    /// 2x2 patches, and same-species weights on every adjacent pair.
    pub fn uniform_stack(
        width: usize,
        height: usize,
        n_layers: usize,
        species: &[SpeciesId],
    ) -> Result<Self> {
        let layers = (0..n_layers)
            .map(|_| LayerSpec {
                width,
                height,
                species: species.to_vec(),
            })
            .collect();
        let patches = vec![(2, 2); n_layers.saturating_sub(1)];
        let weights = (0..n_layers.saturating_sub(1))
            .flat_map(|l| {
                species.iter().map(move |&sp| WeightSpec {
                    lower: l,
                    a: sp,
                    b: sp,
                })
            })
            .collect();
        DbmArchitecture::new(layers, patches, weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack_40() -> DbmArchitecture {
        DbmArchitecture::uniform_stack(40, 40, 2, &[0, 1]).unwrap()
    }

    #[test]
    fn down_neighbors_form_anchored_patch() {
        let arch = stack_40();
        let down = arch.down_neighbors(1, 0, 0);
        assert_eq!(down, vec![(0, 0), (1, 0), (0, 1), (1, 1)]);
    }

    #[test]
    fn boundary_patch_wraps_periodically() {
        let arch = stack_40();
        let down = arch.down_neighbors(1, 39, 39);
        assert_eq!(down, vec![(39, 39), (0, 39), (39, 0), (0, 0)]);
    }

    #[test]
    fn up_down_adjacency_is_symmetric() {
        let arch = stack_40();
        // (3,5) in layer 0 is covered by patches anchored at the four units
        // returned by up_neighbors; each of those patches must contain (3,5).
        for (ax, ay) in arch.up_neighbors(0, 3, 5) {
            let patch = arch.down_neighbors(1, ax, ay);
            assert!(patch.contains(&(3, 5)));
        }
        assert_eq!(arch.up_neighbors(0, 3, 5).len(), 4);
    }

    #[test]
    fn edge_count_matches_units_times_q() {
        let arch = stack_40();
        assert_eq!(arch.n_edges(0), 1600 * 4);
        assert_eq!(arch.q(0), 4.0);
    }

    #[test]
    fn downward_from_visible_layer_is_error() {
        let arch = stack_40();
        assert!(matches!(
            arch.neighbors(0, 0, -1),
            Err(Error::LayerOutOfRange { .. })
        ));
    }

    #[test]
    fn single_site_layers_wrap_with_multiplicity() {
        let layers = vec![
            LayerSpec { width: 1, height: 1, species: vec![0] },
            LayerSpec { width: 1, height: 1, species: vec![0] },
        ];
        let arch = DbmArchitecture::new(
            layers,
            vec![(2, 2)],
            vec![WeightSpec { lower: 0, a: 0, b: 0 }],
        )
        .unwrap();
        assert_eq!(arch.up_neighbors(0, 0, 0), vec![(0, 0); 4]);
        assert_eq!(arch.q(0), 4.0);
    }

    #[test]
    fn rejects_unequal_layer_sizes() {
        let layers = vec![
            LayerSpec { width: 4, height: 4, species: vec![0] },
            LayerSpec { width: 2, height: 2, species: vec![0] },
        ];
        assert!(DbmArchitecture::new(layers, vec![(2, 2)], vec![]).is_err());
    }

    #[test]
    fn rejects_weight_with_missing_species() {
        let layers = vec![
            LayerSpec { width: 2, height: 2, species: vec![0] },
            LayerSpec { width: 2, height: 2, species: vec![0] },
        ];
        let weights = vec![WeightSpec { lower: 0, a: 1, b: 0 }];
        assert!(DbmArchitecture::new(layers, vec![(2, 2)], weights).is_err());
    }

    #[test]
    fn interaction_ids_parse_and_display() {
        let table = SpeciesTable::new(["H", "P"]);
        let id = InteractionId::parse_named("w:0:H:P", &table).unwrap();
        assert_eq!(
            id,
            InteractionId::Weight { lower: 0, a: 0, b: 1 }
        );
        assert_eq!(id.display_named(&table), "w:0:H:P");
        assert!(InteractionId::parse_named("z:0:H", &table).is_err());
    }
}
