//! Multinomial deep Boltzmann machine: energy, block Gibbs sampling with an
//! even/odd layer schedule, wake/sleep moment estimation, and exact
//! enumeration for desk-scale models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{DbmArchitecture, InteractionId};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, SpeciesId};

/// A value per shared interaction slot, ordered like the architecture's
/// bias and weight slot lists. Used for the parameters themselves and for
/// any interaction-shaped vector (sufficient statistics, moment mismatches,
/// gradients, adjoint states).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVec {
    pub biases: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Shared biases and weights of the model.
pub type InteractionParams = ParamVec;

impl ParamVec {
    pub fn zeros(arch: &DbmArchitecture) -> Self {
        ParamVec {
            biases: vec![0.0; arch.bias_slots().len()],
            weights: vec![0.0; arch.weight_slots().len()],
        }
    }

    pub fn get(&self, arch: &DbmArchitecture, id: InteractionId) -> Option<f64> {
        let (is_bias, slot) = arch.interaction_slot(id)?;
        Some(if is_bias {
            self.biases[slot]
        } else {
            self.weights[slot]
        })
    }

    pub fn set(&mut self, arch: &DbmArchitecture, id: InteractionId, value: f64) -> Result<()> {
        let (is_bias, slot) = arch
            .interaction_slot(id)
            .ok_or_else(|| Error::InvalidArchitecture(format!("no slot for interaction {id}")))?;
        if is_bias {
            self.biases[slot] = value;
        } else {
            self.weights[slot] = value;
        }
        Ok(())
    }

    /// self += scale * other
    pub fn axpy(&mut self, scale: f64, other: &ParamVec) {
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += scale * b;
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += scale * b;
        }
    }

    pub fn sub(&self, other: &ParamVec) -> ParamVec {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn dot(&self, other: &ParamVec) -> f64 {
        self.biases
            .iter()
            .zip(&other.biases)
            .chain(self.weights.iter().zip(&other.weights))
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.biases.iter().chain(self.weights.iter()).all(|v| v.is_finite())
    }
}

/// One occupancy grid per layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbmState {
    pub layers: Vec<Lattice>,
}

impl DbmState {
    pub fn empty(arch: &DbmArchitecture) -> Self {
        DbmState {
            layers: arch
                .layers()
                .iter()
                .map(|l| Lattice::empty(l.width, l.height))
                .collect(),
        }
    }

    /// Visible layer clamped to `visible`, hidden layers empty.
    pub fn from_visible(arch: &DbmArchitecture, visible: Lattice) -> Self {
        let mut state = DbmState::empty(arch);
        state.layers[0] = visible;
        state
    }

    pub fn conforms(&self, arch: &DbmArchitecture) -> bool {
        self.layers.len() == arch.n_layers()
            && self.layers.iter().zip(arch.layers()).all(|(grid, spec)| {
                grid.width() == spec.width && grid.height() == spec.height
            })
    }
}

/// Wake- and sleep-phase expectations of every sufficient statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub wake: ParamVec,
    pub sleep: ParamVec,
    pub batch_size: usize,
    pub n_chains: usize,
}

impl MomentEstimate {
    /// Sleep-minus-wake moment difference (the KL gradient orientation).
    pub fn mismatch(&self) -> ParamVec {
        self.sleep.sub(&self.wake)
    }
}

/// Bias giving per-species unit density `density` when all of `n_species`
/// share the same bias and weights vanish.
pub fn max_entropy_bias(density: f64, n_species: usize) -> f64 {
    let m = n_species as f64;
    assert!(
        density > 0.0 && m * density < 1.0,
        "density must satisfy 0 < M*density < 1"
    );
    (density / (1.0 - m * density)).ln()
}

/// Precomputed connectivity and species lookup tables for one architecture.
struct Connectivity {
    /// up[l][unit * q .. (unit+1) * q]: flat indices into layer l+1.
    up: Vec<Vec<u32>>,
    /// down[l][unit * q .. (unit+1) * q]: flat indices into layer l-1
    /// (down[0] is empty).
    down: Vec<Vec<u32>>,
    q_up: Vec<usize>,
    q_down: Vec<usize>,
    /// species id -> position in layer species list.
    sp_pos: Vec<Vec<Option<u8>>>,
    /// up_weight[l][a_pos][b_pos] -> weight slot between layers (l, l+1).
    up_weight: Vec<Vec<Vec<Option<usize>>>>,
}

impl Connectivity {
    fn new(arch: &DbmArchitecture) -> Self {
        let n_layers = arch.n_layers();
        let mut up = vec![Vec::new(); n_layers];
        let mut down = vec![Vec::new(); n_layers];
        let mut q_up = vec![0usize; n_layers];
        let mut q_down = vec![0usize; n_layers];
        for l in 0..n_layers {
            let layer = arch.layer(l);
            if l + 1 < n_layers {
                let q = arch.q(l) as usize;
                q_up[l] = q;
                let upper = arch.layer(l + 1);
                let mut table = Vec::with_capacity(layer.n_units() * q);
                for unit in 0..layer.n_units() {
                    let (x, y) = (unit % layer.width, unit / layer.width);
                    for (cx, cy) in arch.up_neighbors(l, x, y) {
                        table.push((cy * upper.width + cx) as u32);
                    }
                }
                up[l] = table;
            }
            if l > 0 {
                let q = arch.q(l - 1) as usize;
                q_down[l] = q;
                let lower = arch.layer(l - 1);
                let mut table = Vec::with_capacity(layer.n_units() * q);
                for unit in 0..layer.n_units() {
                    let (x, y) = (unit % layer.width, unit / layer.width);
                    for (cx, cy) in arch.down_neighbors(l, x, y) {
                        table.push((cy * lower.width + cx) as u32);
                    }
                }
                down[l] = table;
            }
        }
        let max_id = arch
            .layers()
            .iter()
            .flat_map(|l| l.species.iter().copied())
            .max()
            .map_or(0, |m| m as usize + 1);
        let sp_pos = arch
            .layers()
            .iter()
            .map(|layer| {
                let mut row = vec![None; max_id];
                for (pos, &sp) in layer.species.iter().enumerate() {
                    row[sp as usize] = Some(pos as u8);
                }
                row
            })
            .collect();
        let up_weight = (0..n_layers)
            .map(|l| {
                if l + 1 >= n_layers {
                    return Vec::new();
                }
                let lower = arch.layer(l);
                let upper = arch.layer(l + 1);
                lower
                    .species
                    .iter()
                    .map(|&a| {
                        upper
                            .species
                            .iter()
                            .map(|&b| arch.weight_slot(l, a, b))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Connectivity {
            up,
            down,
            q_up,
            q_down,
            sp_pos,
            up_weight,
        }
    }
}

/// Sampling and evaluation engine bound to one architecture.
pub struct Dbm<'a> {
    arch: &'a DbmArchitecture,
    conn: Connectivity,
}

impl<'a> Dbm<'a> {
    pub fn new(arch: &'a DbmArchitecture) -> Self {
        Dbm {
            arch,
            conn: Connectivity::new(arch),
        }
    }

    pub fn arch(&self) -> &DbmArchitecture {
        self.arch
    }

    /// Sufficient statistics of a state: per-slot species counts and
    /// inter-layer pair counts over the local connectivity.
    pub fn sufficient_statistics(&self, state: &DbmState) -> ParamVec {
        let mut stats = ParamVec::zeros(self.arch);
        for (slot, &(l, sp)) in self.arch.bias_slots().iter().enumerate() {
            stats.biases[slot] = state.layers[l].count(sp) as f64;
        }
        for l in 0..self.arch.n_layers().saturating_sub(1) {
            let q = self.conn.q_up[l];
            if q == 0 {
                continue;
            }
            let lower = &state.layers[l];
            let upper = &state.layers[l + 1];
            for unit in 0..lower.n_sites() {
                let Some(a) = lower.get(unit) else { continue };
                let Some(a_pos) = self.conn.sp_pos[l][a as usize] else { continue };
                let row = &self.conn.up_weight[l][a_pos as usize];
                for k in 0..q {
                    let j = self.conn.up[l][unit * q + k] as usize;
                    let Some(b) = upper.get(j) else { continue };
                    let Some(b_pos) = self.conn.sp_pos[l + 1][b as usize] else { continue };
                    if let Some(slot) = row[b_pos as usize] {
                        stats.weights[slot] += 1.0;
                    }
                }
            }
        }
        stats
    }

    /// Energy of a state: minus the parameter / statistic inner product.
    pub fn energy(&self, state: &DbmState, params: &InteractionParams) -> f64 {
        -params.dot(&self.sufficient_statistics(state))
    }

    /// Activations of each admissible species at one unit given the
    /// neighboring layers.
    fn activations(
        &self,
        params: &InteractionParams,
        state: &DbmState,
        l: usize,
        unit: usize,
        out: &mut Vec<f64>,
    ) {
        let layer = self.arch.layer(l);
        out.clear();
        for (pos, &sp) in layer.species.iter().enumerate() {
            let slot = self
                .arch
                .bias_slot(l, sp)
                .expect("bias slot exists for layer species");
            let mut phi = params.biases[slot];
            if l + 1 < self.arch.n_layers() {
                let q = self.conn.q_up[l];
                let row = &self.conn.up_weight[l][pos];
                let upper = &state.layers[l + 1];
                for k in 0..q {
                    let j = self.conn.up[l][unit * q + k] as usize;
                    if let Some(b) = upper.get(j) {
                        if let Some(b_pos) = self.conn.sp_pos[l + 1][b as usize] {
                            if let Some(ws) = row[b_pos as usize] {
                                phi += params.weights[ws];
                            }
                        }
                    }
                }
            }
            if l > 0 {
                let q = self.conn.q_down[l];
                let lower = &state.layers[l - 1];
                for k in 0..q {
                    let j = self.conn.down[l][unit * q + k] as usize;
                    if let Some(b) = lower.get(j) {
                        if let Some(b_pos) = self.conn.sp_pos[l - 1][b as usize] {
                            if let Some(ws) =
                                self.conn.up_weight[l - 1][b_pos as usize][pos]
                            {
                                phi += params.weights[ws];
                            }
                        }
                    }
                }
            }
            out.push(phi);
        }
    }

    /// Conditional distribution of one unit given the rest of the state:
    /// probabilities for `[empty, species...]` in layer species order.
    pub fn conditional(
        &self,
        params: &InteractionParams,
        state: &DbmState,
        l: usize,
        unit: usize,
    ) -> Vec<f64> {
        let mut phis = Vec::new();
        self.activations(params, state, l, unit, &mut phis);
        let shift = phis.iter().fold(0.0f64, |m, &p| m.max(p));
        let mut probs = Vec::with_capacity(phis.len() + 1);
        let empty = (-shift).exp();
        let mut denom = empty;
        probs.push(empty);
        for &phi in &phis {
            let w = (phi - shift).exp();
            denom += w;
            probs.push(w);
        }
        for p in &mut probs {
            *p /= denom;
        }
        probs
    }

    fn resample_unit(
        &self,
        params: &InteractionParams,
        state: &mut DbmState,
        l: usize,
        unit: usize,
        phis: &mut Vec<f64>,
        rng: &mut impl Rng,
    ) {
        self.activations(params, state, l, unit, phis);
        let shift = phis.iter().fold(0.0f64, |m, &p| m.max(p));
        let mut denom = (-shift).exp();
        for &phi in phis.iter() {
            denom += (phi - shift).exp();
        }
        let mut pick = rng.gen::<f64>() * denom;
        pick -= (-shift).exp();
        let mut chosen = None;
        if pick >= 0.0 {
            for (pos, &phi) in phis.iter().enumerate() {
                pick -= (phi - shift).exp();
                if pick < 0.0 {
                    chosen = Some(self.arch.layer(l).species[pos]);
                    break;
                }
            }
            // Floating-point underrun at the tail assigns the last species.
            if chosen.is_none() {
                chosen = self.arch.layer(l).species.last().copied();
            }
        }
        state.layers[l].set(unit, chosen);
    }

    fn resample_layer(
        &self,
        params: &InteractionParams,
        state: &mut DbmState,
        l: usize,
        phis: &mut Vec<f64>,
        rng: &mut impl Rng,
    ) {
        for unit in 0..self.arch.layer(l).n_units() {
            self.resample_unit(params, state, l, unit, phis, rng);
        }
    }

    /// One Gibbs sweep: resample even-indexed layers, then odd-indexed
    /// layers. With `clamp_visible` the visible layer is left untouched.
    pub fn sweep(
        &self,
        params: &InteractionParams,
        state: &mut DbmState,
        clamp_visible: bool,
        rng: &mut impl Rng,
    ) {
        let mut phis = Vec::new();
        for parity in [0usize, 1] {
            for l in (parity..self.arch.n_layers()).step_by(2) {
                if l == 0 && clamp_visible {
                    continue;
                }
                self.resample_layer(params, state, l, &mut phis, rng);
            }
        }
    }

    /// Sample each unit independently from its bias-only distribution (the
    /// maximum-entropy state consistent with the biases).
    pub fn sample_from_biases(&self, params: &InteractionParams, rng: &mut impl Rng) -> DbmState {
        let mut state = DbmState::empty(self.arch);
        let empty_weights = InteractionParams {
            biases: params.biases.clone(),
            weights: vec![0.0; params.weights.len()],
        };
        let mut phis = Vec::new();
        for l in 0..self.arch.n_layers() {
            self.resample_layer(&empty_weights, &mut state, l, &mut phis, rng);
        }
        state
    }

    /// Uniform state: every unit empty or any species with equal probability.
    pub fn sample_uniform(&self, rng: &mut impl Rng) -> DbmState {
        let mut state = DbmState::empty(self.arch);
        for (l, layer) in self.arch.layers().iter().enumerate() {
            let m = layer.species.len();
            for unit in 0..layer.n_units() {
                let pick = rng.gen_range(0..=m);
                let value = if pick == 0 {
                    None
                } else {
                    Some(layer.species[pick - 1])
                };
                state.layers[l].set(unit, value);
            }
        }
        state
    }

    /// Clamped chain seeded from a data vector: hidden layers are filled by
    /// one bottom-up pass of conditional sampling.
    pub fn wake_chain(
        &self,
        params: &InteractionParams,
        visible: &Lattice,
        rng: &mut impl Rng,
    ) -> DbmState {
        let mut state = DbmState::from_visible(self.arch, visible.clone());
        let mut phis = Vec::new();
        for l in 1..self.arch.n_layers() {
            self.resample_layer(params, &mut state, l, &mut phis, rng);
        }
        state
    }

    /// Wake/sleep moment estimation.
    ///
    /// Wake: for each batch member, a clamped chain runs `n_steps` sweeps and
    /// the final-state statistics are averaged over the batch. Sleep: each
    /// persistent chain advances `n_steps` unclamped sweeps in place and the
    /// final-state statistics are averaged over chains.
    pub fn estimate_moments(
        &self,
        params: &InteractionParams,
        data_batch: &[Lattice],
        chains: &mut [DbmState],
        n_steps: usize,
        rng: &mut impl Rng,
    ) -> Result<MomentEstimate> {
        if data_batch.is_empty() || chains.is_empty() {
            return Err(Error::EmptyBatch);
        }
        assert!(n_steps >= 1, "at least one Gibbs step required");

        let wake_seeds: Vec<u64> = (0..data_batch.len()).map(|_| rng.gen()).collect();
        let wake_stats: Vec<ParamVec> = data_batch
            .par_iter()
            .zip(wake_seeds)
            .map(|(visible, seed)| {
                let mut chain_rng = ChaCha12Rng::seed_from_u64(seed);
                let mut state = self.wake_chain(params, visible, &mut chain_rng);
                for _ in 0..n_steps {
                    self.sweep(params, &mut state, true, &mut chain_rng);
                }
                self.sufficient_statistics(&state)
            })
            .collect();

        let sleep_seeds: Vec<u64> = (0..chains.len()).map(|_| rng.gen()).collect();
        let sleep_stats: Vec<ParamVec> = chains
            .par_iter_mut()
            .zip(sleep_seeds)
            .map(|(state, seed)| {
                let mut chain_rng = ChaCha12Rng::seed_from_u64(seed);
                for _ in 0..n_steps {
                    self.sweep(params, state, false, &mut chain_rng);
                }
                self.sufficient_statistics(state)
            })
            .collect();

        Ok(MomentEstimate {
            wake: mean_stats(self.arch, &wake_stats),
            sleep: mean_stats(self.arch, &sleep_stats),
            batch_size: data_batch.len(),
            n_chains: chains.len(),
        })
    }

    /// All states of the model, in mixed-radix order (unit-major, layer by
    /// layer). Errors when the state space exceeds 2^22 configurations.
    pub fn enumerate_states(&self) -> Result<Vec<DbmState>> {
        let radices: Vec<(usize, usize, usize)> = self
            .arch
            .layers()
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| (0..layer.n_units()).map(move |u| (l, u, layer.species.len() + 1)))
            .collect();
        let mut total: usize = 1;
        for &(_, _, r) in &radices {
            total = total.checked_mul(r).unwrap_or(usize::MAX);
            if total > (1 << 22) {
                return Err(Error::EnumerationTooLarge {
                    units: radices.len(),
                    options: r,
                });
            }
        }
        let mut states = Vec::with_capacity(total);
        let mut digits = vec![0usize; radices.len()];
        loop {
            let mut state = DbmState::empty(self.arch);
            for (&(l, u, _), &d) in radices.iter().zip(&digits) {
                let value = if d == 0 {
                    None
                } else {
                    Some(self.arch.layer(l).species[d - 1])
                };
                state.layers[l].set(u, value);
            }
            states.push(state);
            // increment mixed-radix counter
            let mut k = 0;
            loop {
                if k == digits.len() {
                    return Ok(states);
                }
                digits[k] += 1;
                if digits[k] < radices[k].2 {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
        }
    }

    /// Exact Boltzmann probabilities aligned with `enumerate_states`.
    pub fn exact_distribution(&self, params: &InteractionParams) -> Result<Vec<f64>> {
        let states = self.enumerate_states()?;
        let neg_energy: Vec<f64> = states.iter().map(|s| -self.energy(s, params)).collect();
        let shift = neg_energy.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = neg_energy.iter().map(|e| (e - shift).exp()).collect();
        let z: f64 = weights.iter().sum();
        Ok(weights.into_iter().map(|w| w / z).collect())
    }

    /// Exact expectations of all sufficient statistics by enumeration.
    pub fn exact_moments(&self, params: &InteractionParams) -> Result<ParamVec> {
        let states = self.enumerate_states()?;
        let probs = self.exact_distribution(params)?;
        let mut out = ParamVec::zeros(self.arch);
        for (state, p) in states.iter().zip(probs) {
            out.axpy(p, &self.sufficient_statistics(state));
        }
        Ok(out)
    }
}

fn mean_stats(arch: &DbmArchitecture, stats: &[ParamVec]) -> ParamVec {
    let mut mean = ParamVec::zeros(arch);
    for s in stats {
        mean.axpy(1.0, s);
    }
    let n = stats.len() as f64;
    for v in mean.biases.iter_mut().chain(mean.weights.iter_mut()) {
        *v /= n;
    }
    mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{LayerSpec, WeightSpec};
    use approx::assert_abs_diff_eq;

    fn two_unit_arch(patch: (usize, usize)) -> DbmArchitecture {
        DbmArchitecture::new(
            vec![
                LayerSpec { width: 1, height: 1, species: vec![0] },
                LayerSpec { width: 1, height: 1, species: vec![0] },
            ],
            vec![patch],
            vec![WeightSpec { lower: 0, a: 0, b: 0 }],
        )
        .unwrap()
    }

    fn visible_arch(width: usize, height: usize, species: &[SpeciesId]) -> DbmArchitecture {
        DbmArchitecture::new(
            vec![LayerSpec {
                width,
                height,
                species: species.to_vec(),
            }],
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn empty_state_has_zero_energy() {
        let arch = DbmArchitecture::uniform_stack(4, 4, 2, &[0, 1]).unwrap();
        let dbm = Dbm::new(&arch);
        let mut params = InteractionParams::zeros(&arch);
        params.biases.iter_mut().for_each(|b| *b = 1.3);
        params.weights.iter_mut().for_each(|w| *w = -0.7);
        assert_eq!(dbm.energy(&DbmState::empty(&arch), &params), 0.0);
    }

    #[test]
    fn single_particle_energy_is_minus_bias() {
        let arch = visible_arch(4, 4, &[0, 1]);
        let dbm = Dbm::new(&arch);
        let mut params = InteractionParams::zeros(&arch);
        params.biases[0] = -2.63;
        let mut state = DbmState::empty(&arch);
        state.layers[0].set(5, Some(0));
        assert_abs_diff_eq!(dbm.energy(&state, &params), 2.63, epsilon = 1e-12);
    }

    #[test]
    fn single_bond_energy_is_minus_weight() {
        let arch = two_unit_arch((1, 1));
        let dbm = Dbm::new(&arch);
        let mut params = InteractionParams::zeros(&arch);
        params.weights[0] = 1.7;
        let mut state = DbmState::empty(&arch);
        state.layers[0].set(0, Some(0));
        state.layers[1].set(0, Some(0));
        assert_abs_diff_eq!(dbm.energy(&state, &params), -1.7, epsilon = 1e-12);
    }

    #[test]
    fn conditional_is_uniform_at_zero_params() {
        let arch = visible_arch(3, 3, &[0, 1]);
        let dbm = Dbm::new(&arch);
        let params = InteractionParams::zeros(&arch);
        let state = DbmState::empty(&arch);
        let probs = dbm.conditional(&params, &state, 0, 4);
        for p in probs {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_matches_max_entropy_density() {
        // Biases solving for density 100/1600 with two species.
        let a = max_entropy_bias(100.0 / 1600.0, 2);
        assert_abs_diff_eq!(a, -2.63, epsilon = 0.01);
        let arch = visible_arch(40, 40, &[0, 1]);
        let dbm = Dbm::new(&arch);
        let mut params = InteractionParams::zeros(&arch);
        params.biases[0] = -2.63;
        params.biases[1] = -2.63;
        let probs = dbm.conditional(&params, &DbmState::empty(&arch), 0, 0);
        assert_abs_diff_eq!(probs[1], 0.0625, epsilon = 1e-3);
        assert_abs_diff_eq!(probs[2], 0.0625, epsilon = 1e-3);
    }

    #[test]
    fn conditional_with_one_occupied_neighbor() {
        let arch = two_unit_arch((1, 1));
        let dbm = Dbm::new(&arch);
        let mut params = InteractionParams::zeros(&arch);
        params.weights[0] = 2.0;
        let mut state = DbmState::empty(&arch);
        state.layers[1].set(0, Some(0));
        let probs = dbm.conditional(&params, &state, 0, 0);
        let expect = 2.0f64.exp() / (1.0 + 2.0f64.exp());
        assert_abs_diff_eq!(probs[1], expect, epsilon = 1e-12);
    }

    #[test]
    fn conditional_sums_to_one() {
        let arch = DbmArchitecture::uniform_stack(3, 3, 3, &[0, 1]).unwrap();
        let dbm = Dbm::new(&arch);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut params = InteractionParams::zeros(&arch);
        for b in &mut params.biases {
            *b = rng.gen_range(-2.0..2.0);
        }
        for w in &mut params.weights {
            *w = rng.gen_range(-1.0..1.0);
        }
        let state = dbm.sample_uniform(&mut rng);
        for l in 0..3 {
            for unit in 0..9 {
                let probs = dbm.conditional(&params, &state, l, unit);
                let total: f64 = probs.iter().sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
                assert!(probs.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn log_odds_equal_energy_difference() {
        // log p(species) / p(empty) must equal -dE of inserting the particle.
        let arch = DbmArchitecture::uniform_stack(3, 3, 2, &[0, 1]).unwrap();
        let dbm = Dbm::new(&arch);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let mut params = InteractionParams::zeros(&arch);
        for b in &mut params.biases {
            *b = rng.gen_range(-1.0..1.0);
        }
        for w in &mut params.weights {
            *w = rng.gen_range(-1.0..1.0);
        }
        for _ in 0..20 {
            let mut state = dbm.sample_uniform(&mut rng);
            let l = rng.gen_range(0..2);
            let unit = rng.gen_range(0..9);
            let probs = dbm.conditional(&params, &state, l, unit);
            for (pos, &sp) in arch.layer(l).species.iter().enumerate() {
                state.layers[l].set(unit, Some(sp));
                let e_occupied = dbm.energy(&state, &params);
                state.layers[l].set(unit, None);
                let e_empty = dbm.energy(&state, &params);
                let log_odds = (probs[pos + 1] / probs[0]).ln();
                assert_abs_diff_eq!(log_odds, -(e_occupied - e_empty), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn clamped_sweep_preserves_visible_layer() {
        let arch = DbmArchitecture::uniform_stack(4, 4, 3, &[0, 1]).unwrap();
        let dbm = Dbm::new(&arch);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let params = InteractionParams::zeros(&arch);
        let mut state = dbm.sample_uniform(&mut rng);
        let visible_before = state.layers[0].clone();
        for _ in 0..5 {
            dbm.sweep(&params, &mut state, true, &mut rng);
        }
        assert_eq!(state.layers[0], visible_before);
    }

    #[test]
    fn unclamped_chain_is_uniform_at_zero_params() {
        let arch = DbmArchitecture::uniform_stack(2, 2, 2, &[0, 1]).unwrap();
        let dbm = Dbm::new(&arch);
        let params = InteractionParams::zeros(&arch);
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let mut state = dbm.sample_uniform(&mut rng);
        let sweeps = 30_000;
        let mut occupied = vec![0f64; 2];
        for _ in 0..sweeps {
            dbm.sweep(&params, &mut state, false, &mut rng);
            for sp in 0..2u8 {
                occupied[sp as usize] += state.layers[0].count(sp) as f64;
            }
        }
        // Each of 4 visible units is H/P/empty with probability 1/3.
        let mean_h = occupied[0] / sweeps as f64;
        let expected = 4.0 / 3.0;
        let sigma = (4.0 * (1.0 / 3.0) * (2.0 / 3.0) / sweeps as f64).sqrt();
        assert!((mean_h - expected).abs() < 4.0 * sigma, "mean {mean_h}");
    }

    #[test]
    fn long_chain_matches_exact_boltzmann_distribution() {
        // 1 visible + 1 hidden unit, single species: 4 joint states.
        let arch = two_unit_arch((1, 1));
        let dbm = Dbm::new(&arch);
        let mut params = InteractionParams::zeros(&arch);
        params.biases[0] = 0.4;
        params.biases[1] = -0.3;
        params.weights[0] = 0.8;
        let states = dbm.enumerate_states().unwrap();
        let exact = dbm.exact_distribution(&params).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let mut state = dbm.sample_uniform(&mut rng);
        let sweeps = 100_000;
        let mut counts = vec![0f64; states.len()];
        for _ in 0..sweeps {
            dbm.sweep(&params, &mut state, false, &mut rng);
            let idx = states.iter().position(|s| *s == state).unwrap();
            counts[idx] += 1.0;
        }
        let tv: f64 = counts
            .iter()
            .zip(&exact)
            .map(|(c, e)| (c / sweeps as f64 - e).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn wake_moments_reproduce_clamped_visible_statistics() {
        let arch = visible_arch(4, 4, &[0, 1]);
        let dbm = Dbm::new(&arch);
        let params = InteractionParams::zeros(&arch);
        let mut visible = Lattice::empty(4, 4);
        visible.set(0, Some(0));
        visible.set(1, Some(0));
        visible.set(2, Some(1));
        let mut chains = vec![DbmState::empty(&arch)];
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let est = dbm
            .estimate_moments(&params, &[visible], &mut chains, 3, &mut rng)
            .unwrap();
        assert_eq!(est.wake.biases, vec![2.0, 1.0]);
    }

    #[test]
    fn sleep_moments_match_uniform_at_zero_params() {
        let arch = DbmArchitecture::uniform_stack(3, 3, 2, &[0, 1]).unwrap();
        let dbm = Dbm::new(&arch);
        let params = InteractionParams::zeros(&arch);
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let mut chains: Vec<DbmState> =
            (0..2000).map(|_| dbm.sample_uniform(&mut rng)).collect();
        let batch = vec![Lattice::empty(3, 3)];
        let est = dbm
            .estimate_moments(&params, &batch, &mut chains, 4, &mut rng)
            .unwrap();
        // Expected count per layer: 9 / 3 = 3 per species.
        let sigma = (9.0 * (1.0 / 3.0) * (2.0 / 3.0) / 2000.0).sqrt();
        for slot in 0..est.sleep.biases.len() {
            assert!(
                (est.sleep.biases[slot] - 3.0).abs() < 4.0 * sigma,
                "slot {slot}: {}",
                est.sleep.biases[slot]
            );
        }
    }

    #[test]
    fn sleep_pair_moment_matches_enumeration() {
        let arch = two_unit_arch((1, 1));
        let dbm = Dbm::new(&arch);
        let mut params = InteractionParams::zeros(&arch);
        params.biases[0] = 0.5;
        params.biases[1] = -0.2;
        params.weights[0] = 0.6;
        let exact = dbm.exact_moments(&params).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let mut chains: Vec<DbmState> = (0..20_000)
            .map(|_| dbm.sample_from_biases(&params, &mut rng))
            .collect();
        let batch = vec![Lattice::empty(1, 1)];
        let est = dbm
            .estimate_moments(&params, &batch, &mut chains, 8, &mut rng)
            .unwrap();
        assert!(
            (est.sleep.weights[0] - exact.weights[0]).abs() < 0.01,
            "estimated {} vs exact {}",
            est.sleep.weights[0],
            exact.weights[0]
        );
    }

    #[test]
    fn empty_batch_is_an_error() {
        let arch = two_unit_arch((1, 1));
        let dbm = Dbm::new(&arch);
        let params = InteractionParams::zeros(&arch);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut chains = vec![DbmState::empty(&arch)];
        assert!(matches!(
            dbm.estimate_moments(&params, &[], &mut chains, 1, &mut rng),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let arch = DbmArchitecture::uniform_stack(8, 8, 2, &[0, 1]).unwrap();
        let dbm = Dbm::new(&arch);
        assert!(matches!(
            dbm.enumerate_states(),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn max_entropy_bias_inverts_unit_density() {
        let a = max_entropy_bias(0.25, 2);
        // density = e^a / (1 + 2 e^a)
        let d = a.exp() / (1.0 + 2.0 * a.exp());
        assert_abs_diff_eq!(d, 0.25, epsilon = 1e-12);
    }
}
