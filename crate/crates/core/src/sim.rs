//! Stochastic lattice reaction-diffusion simulator.
//!
//! Each timestep runs two phases. Single-particle reactions fire first,
//! following the Gillespie algorithm restricted to the step window: draw
//! exponential waiting times against the total propensity and execute events
//! until the accumulated time exceeds `dt`. Every particle then attempts one
//! hop, in random order, to a uniformly chosen von Neumann neighbor; landing
//! on an occupied site triggers the matching pair reaction with its
//! encounter probability, otherwise the move is rejected.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, SpeciesId, SpeciesTable};
use crate::reactions::ReactionSet;

/// Full description of one ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub width: usize,
    pub height: usize,
    pub species: SpeciesTable,
    /// Initial particle count per species id.
    pub init_counts: Vec<usize>,
    pub reactions: ReactionSet,
    pub steps: usize,
    pub n_sims: usize,
    pub dt: f64,
    pub seed: u64,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig {
                key: "simulation.width/height".into(),
                reason: "lattice dimensions must be positive".into(),
            });
        }
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(Error::InvalidConfig {
                key: "simulation.dt".into(),
                reason: format!("timestep {} must be positive", self.dt),
            });
        }
        if self.init_counts.len() != self.species.len() {
            return Err(Error::InvalidConfig {
                key: "simulation.counts".into(),
                reason: "one initial count required per species".into(),
            });
        }
        self.reactions.validate(&self.species)?;
        let requested: usize = self.init_counts.iter().sum();
        let sites = self.width * self.height;
        if requested > sites {
            return Err(Error::Capacity { requested, sites });
        }
        Ok(())
    }
}

/// One realization: lattice states at timesteps `0..=steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Lattice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDataset {
    pub params: SimParams,
    pub trajectories: Vec<Trajectory>,
}

impl SimulationDataset {
    pub fn n_timepoints(&self) -> usize {
        self.trajectories.first().map_or(0, |t| t.states.len())
    }

    /// Ensemble mean of each species count at every timepoint.
    pub fn mean_counts(&self) -> Vec<Vec<f64>> {
        let n_species = self.params.species.len();
        let n_t = self.n_timepoints();
        let mut means = vec![vec![0.0; n_species]; n_t];
        for traj in &self.trajectories {
            for (t, state) in traj.states.iter().enumerate() {
                for (_, sp) in state.occupied() {
                    means[t][sp as usize] += 1.0;
                }
            }
        }
        let n = self.trajectories.len().max(1) as f64;
        for row in &mut means {
            for v in row {
                *v /= n;
            }
        }
        means
    }
}

/// Place the requested particle counts uniformly at random on distinct sites.
pub fn init_lattice(
    width: usize,
    height: usize,
    counts: &[(SpeciesId, usize)],
    rng: &mut impl Rng,
) -> Result<Lattice> {
    let sites = width * height;
    let requested: usize = counts.iter().map(|(_, c)| c).sum();
    if requested > sites {
        return Err(Error::Capacity { requested, sites });
    }
    let mut lattice = Lattice::empty(width, height);
    let chosen = rand::seq::index::sample(rng, sites, requested);
    let mut it = chosen.iter();
    for &(species, count) in counts {
        for _ in 0..count {
            let site = it.next().expect("sampled enough sites");
            lattice.set(site, Some(species));
        }
    }
    Ok(lattice)
}

/// Advance the lattice by one timestep in place.
pub fn step(lattice: &mut Lattice, reactions: &ReactionSet, dt: f64, rng: &mut impl Rng) {
    unimolecular_phase(lattice, reactions, dt, rng);
    diffusion_phase(lattice, reactions, rng);
}

fn unimolecular_phase(
    lattice: &mut Lattice,
    reactions: &ReactionSet,
    dt: f64,
    rng: &mut impl Rng,
) {
    if reactions.unimolecular.is_empty() {
        return;
    }
    let n_species = reactions
        .unimolecular
        .iter()
        .map(|r| ReactionSet::catalyst(r) as usize + 1)
        .max()
        .unwrap_or(0);
    // Per-species site lists for O(1) uniform particle selection.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_species];
    for (site, sp) in lattice.occupied() {
        if (sp as usize) < n_species {
            members[sp as usize].push(site);
        }
    }

    let mut elapsed = 0.0;
    loop {
        let propensities: Vec<f64> = reactions
            .unimolecular
            .iter()
            .map(|r| r.rate * members[ReactionSet::catalyst(r) as usize].len() as f64)
            .collect();
        let total: f64 = propensities.iter().sum();
        if total <= 0.0 {
            return;
        }
        elapsed += exponential(rng, total);
        if elapsed > dt {
            return;
        }
        // Pick a channel proportionally to its propensity, then a uniform
        // particle of the driving species.
        let mut pick = rng.gen::<f64>() * total;
        let mut channel = 0;
        for (i, p) in propensities.iter().enumerate() {
            if pick < *p {
                channel = i;
                break;
            }
            pick -= p;
            channel = i;
        }
        let reaction = reactions.unimolecular[channel];
        let list = &mut members[ReactionSet::catalyst(&reaction) as usize];
        if list.is_empty() {
            continue;
        }
        let pos = rng.gen_range(0..list.len());
        let site = list[pos];
        match (reaction.reactant, reaction.product) {
            (Some(_), None) => {
                list.swap_remove(pos);
                lattice.set(site, None);
            }
            (Some(_), Some(to)) => {
                list.swap_remove(pos);
                lattice.set(site, Some(to));
                if (to as usize) < n_species {
                    members[to as usize].push(site);
                }
            }
            (None, Some(child)) => {
                // Reproduction: place the child on a uniformly chosen empty
                // neighbor of the parent; reject if fully crowded.
                let empty: Vec<usize> = lattice
                    .neighbors(site)
                    .into_iter()
                    .filter(|&n| lattice.get(n).is_none())
                    .collect();
                if let Some(&target) = empty.as_slice().choose(rng) {
                    lattice.set(target, Some(child));
                    members[child as usize].push(target);
                }
            }
            (None, None) => unreachable!("rejected by validation"),
        }
    }
}

fn diffusion_phase(lattice: &mut Lattice, reactions: &ReactionSet, rng: &mut impl Rng) {
    let mut snapshot: Vec<(usize, SpeciesId)> = lattice.occupied().collect();
    snapshot.shuffle(rng);
    for (site, species) in snapshot {
        // Skip particles consumed or converted since the snapshot.
        if lattice.get(site) != Some(species) {
            continue;
        }
        let target = lattice.neighbors(site)[rng.gen_range(0..4)];
        match lattice.get(target) {
            None => {
                lattice.set(site, None);
                lattice.set(target, Some(species));
            }
            Some(occupant) => {
                if let Some((prob, mover_product, target_product)) =
                    reactions.encounter(species, occupant)
                {
                    if rng.gen::<f64>() < prob {
                        lattice.set(site, mover_product);
                        lattice.set(target, target_product);
                    }
                }
                // Otherwise the move is rejected.
            }
        }
    }
}

fn exponential(rng: &mut impl Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    -u.ln() / rate
}

/// Deterministic per-trajectory RNG stream derived from the master seed.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn run_trajectory(params: &SimParams, index: u64) -> Result<Trajectory> {
    let mut rng = trajectory_rng(params.seed, index);
    let counts: Vec<(SpeciesId, usize)> = params
        .init_counts
        .iter()
        .enumerate()
        .map(|(id, &c)| (id as SpeciesId, c))
        .collect();
    let mut lattice = init_lattice(params.width, params.height, &counts, &mut rng)?;
    let mut states = Vec::with_capacity(params.steps + 1);
    states.push(lattice.clone());
    for _ in 0..params.steps {
        step(&mut lattice, &params.reactions, params.dt, &mut rng);
        states.push(lattice.clone());
    }
    Ok(Trajectory { states })
}

/// Run `n_sims` independent trajectories. Each draws from its own RNG
/// stream, so the result is deterministic regardless of thread scheduling.
pub fn run_ensemble(params: &SimParams) -> Result<SimulationDataset> {
    params.validate()?;
    let trajectories: Result<Vec<Trajectory>> = (0..params.n_sims as u64)
        .into_par_iter()
        .map(|i| run_trajectory(params, i))
        .collect();
    Ok(SimulationDataset {
        params: params.clone(),
        trajectories: trajectories?,
    })
}
