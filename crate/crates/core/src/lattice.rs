//! Periodic 2D lattices in the single-occupancy limit and their low-order
//! spatial moments.

use serde::{Deserialize, Serialize};

/// Index into the species table shared by the simulator and the model layers.
pub type SpeciesId = u8;

/// Named species registry. Ids are positions in the registration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeciesTable {
    names: Vec<String>,
}

impl SpeciesTable {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        SpeciesTable {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: SpeciesId) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<SpeciesId> {
        self.names.iter().position(|n| n == name).map(|i| i as SpeciesId)
    }
}

/// Von Neumann offsets (right, left, down, up).
pub const VON_NEUMANN: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Manhattan-distance-2 offsets, one representative per unordered bond
/// (the other half of the shell is reached from the partner site).
const DIST2_HALF: [(i64, i64); 4] = [(2, 0), (0, 2), (1, 1), (1, -1)];

/// A periodic width x height grid where each site is empty or holds one
/// particle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    width: usize,
    height: usize,
    sites: Vec<Option<SpeciesId>>,
}

impl Lattice {
    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "lattice dimensions must be positive");
        Lattice {
            width,
            height,
            sites: vec![None; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Flat index of (x, y) after periodic wrapping.
    #[inline]
    pub fn index(&self, x: i64, y: i64) -> usize {
        let xw = x.rem_euclid(self.width as i64) as usize;
        let yw = y.rem_euclid(self.height as i64) as usize;
        yw * self.width + xw
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    #[inline]
    pub fn get(&self, index: usize) -> Option<SpeciesId> {
        self.sites[index]
    }

    #[inline]
    pub fn get_xy(&self, x: i64, y: i64) -> Option<SpeciesId> {
        self.sites[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: Option<SpeciesId>) {
        self.sites[index] = value;
    }

    pub fn sites(&self) -> &[Option<SpeciesId>] {
        &self.sites
    }

    /// Flat indices of the four von Neumann neighbors of `index`.
    pub fn neighbors(&self, index: usize) -> [usize; 4] {
        let (x, y) = self.coords(index);
        let (x, y) = (x as i64, y as i64);
        [
            self.index(x + 1, y),
            self.index(x - 1, y),
            self.index(x, y + 1),
            self.index(x, y - 1),
        ]
    }

    /// All occupied sites as (flat index, species).
    pub fn occupied(&self) -> impl Iterator<Item = (usize, SpeciesId)> + '_ {
        self.sites
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|sp| (i, sp)))
    }

    pub fn count(&self, species: SpeciesId) -> usize {
        self.sites.iter().filter(|s| **s == Some(species)).count()
    }

    pub fn total_occupied(&self) -> usize {
        self.sites.iter().filter(|s| s.is_some()).count()
    }
}

/// Species counts and short-range pair counts of one lattice.
///
/// `nn` and `nn2` are symmetric matrices indexed by species id; entry (a, b)
/// counts bonds whose endpoints hold species a and b. Bonds are enumerated
/// once per distinct lattice edge, so wrap-around edges on small lattices
/// contribute per bond, not per site pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRecord {
    pub counts: Vec<f64>,
    pub nn: Vec<Vec<f64>>,
    pub nn2: Vec<Vec<f64>>,
}

impl MomentRecord {
    pub fn zeros(n_species: usize) -> Self {
        MomentRecord {
            counts: vec![0.0; n_species],
            nn: vec![vec![0.0; n_species]; n_species],
            nn2: vec![vec![0.0; n_species]; n_species],
        }
    }
}

/// Species counts plus nearest- and second-neighbor pair counts.
///
/// Nearest-neighbor bonds are the +x and +y edges of every site; the
/// distance-2 shell uses one representative offset per unordered bond.
pub fn count_moments(lattice: &Lattice, n_species: usize) -> MomentRecord {
    let mut rec = MomentRecord::zeros(n_species);
    for (i, sp) in lattice.occupied() {
        rec.counts[sp as usize] += 1.0;
        let (x, y) = lattice.coords(i);
        let (x, y) = (x as i64, y as i64);
        for (dx, dy) in [(1i64, 0i64), (0, 1)] {
            if let Some(other) = lattice.get_xy(x + dx, y + dy) {
                tally_pair(&mut rec.nn, sp, other);
            }
        }
        for (dx, dy) in DIST2_HALF {
            if let Some(other) = lattice.get_xy(x + dx, y + dy) {
                tally_pair(&mut rec.nn2, sp, other);
            }
        }
    }
    rec
}

fn tally_pair(matrix: &mut [Vec<f64>], a: SpeciesId, b: SpeciesId) {
    matrix[a as usize][b as usize] += 1.0;
    if a != b {
        matrix[b as usize][a as usize] += 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping_is_periodic_in_both_axes() {
        let l = Lattice::empty(4, 3);
        assert_eq!(l.index(-1, 0), l.index(3, 0));
        assert_eq!(l.index(0, -1), l.index(0, 2));
        assert_eq!(l.index(4, 3), l.index(0, 0));
    }

    #[test]
    fn empty_lattice_has_zero_moments() {
        let rec = count_moments(&Lattice::empty(3, 3), 2);
        assert!(rec.counts.iter().all(|&c| c == 0.0));
        assert!(rec.nn.iter().flatten().all(|&c| c == 0.0));
        assert!(rec.nn2.iter().flatten().all(|&c| c == 0.0));
    }

    #[test]
    fn adjacent_pair_counted_once() {
        // H at (0,0) and P at (0,1) are +y neighbors.
        let mut l = Lattice::empty(3, 3);
        l.set(l.index(0, 0), Some(0));
        l.set(l.index(0, 1), Some(1));
        let rec = count_moments(&l, 2);
        assert_eq!(rec.counts, vec![1.0, 1.0]);
        assert_eq!(rec.nn[0][1], 1.0);
        assert_eq!(rec.nn[1][0], 1.0);
        assert_eq!(rec.nn[0][0], 0.0);
    }

    #[test]
    fn packed_2x2_has_eight_nn_bonds() {
        // Brute-force oracle: enumerate the +x/+y bonds of the periodic 2x2
        // graph. Each of the 4 sites contributes 2 bonds, and wrap-around
        // makes every pair doubly bonded: 8 distinct bonds in total.
        let mut l = Lattice::empty(2, 2);
        for i in 0..4 {
            l.set(i, Some(0));
        }
        let mut expected = 0;
        for x in 0..2i64 {
            for y in 0..2i64 {
                for _ in [(1i64, 0i64), (0, 1)] {
                    expected += 1; // every +x/+y bond exists and joins two H
                }
                let _ = (x, y);
            }
        }
        assert_eq!(expected, 8);
        let rec = count_moments(&l, 1);
        assert_eq!(rec.nn[0][0], 8.0);
    }

    #[test]
    fn species_table_round_trips_names() {
        let t = SpeciesTable::new(["H", "P"]);
        assert_eq!(t.id("P"), Some(1));
        assert_eq!(t.name(0), "H");
        assert_eq!(t.id("X"), None);
    }
}
