//! Reaction channels for the lattice simulator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{SpeciesId, SpeciesTable};

/// A single-particle reaction channel.
///
/// The (reactant, product) combinations mean:
/// - `(Some(a), None)` — decay `a -> 0`, propensity `rate * count(a)`.
/// - `(Some(a), Some(b))` — in-place transformation `a -> b`.
/// - `(None, Some(b))` — reproduction: an existing `b` spawns a new `b`
///   on a uniformly chosen empty von Neumann neighbor, propensity
///   `rate * count(b)`. The event is rejected when the parent has no
///   empty neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnimolecularReaction {
    pub reactant: Option<SpeciesId>,
    pub product: Option<SpeciesId>,
    pub rate: f64,
}

/// A pair reaction fired when a hopping particle lands on an occupied site.
///
/// If (mover, target) matches `reactants` in either order, the reaction
/// fires with `probability`; the mover takes the product aligned with its
/// reactant slot and stays on its origin site, while the target site is
/// rewritten with the other product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimolecularReaction {
    pub reactants: (SpeciesId, SpeciesId),
    pub products: (Option<SpeciesId>, Option<SpeciesId>),
    pub probability: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReactionSet {
    pub unimolecular: Vec<UnimolecularReaction>,
    pub bimolecular: Vec<BimolecularReaction>,
}

impl ReactionSet {
    pub fn validate(&self, species: &SpeciesTable) -> Result<()> {
        let check = |id: SpeciesId| -> Result<()> {
            if (id as usize) < species.len() {
                Ok(())
            } else {
                Err(Error::UnknownSpecies(format!("id {id}")))
            }
        };
        for r in &self.unimolecular {
            if r.reactant.is_none() && r.product.is_none() {
                return Err(Error::InvalidReactions(
                    "unimolecular reaction with neither reactant nor product".into(),
                ));
            }
            if !(r.rate.is_finite() && r.rate >= 0.0) {
                return Err(Error::InvalidReactions(format!(
                    "rate {} must be finite and non-negative",
                    r.rate
                )));
            }
            if let Some(s) = r.reactant {
                check(s)?;
            }
            if let Some(s) = r.product {
                check(s)?;
            }
        }
        for r in &self.bimolecular {
            if !(r.probability.is_finite() && (0.0..=1.0).contains(&r.probability)) {
                return Err(Error::InvalidReactions(format!(
                    "encounter probability {} must lie in [0, 1]",
                    r.probability
                )));
            }
            check(r.reactants.0)?;
            check(r.reactants.1)?;
            if let Some(s) = r.products.0 {
                check(s)?;
            }
            if let Some(s) = r.products.1 {
                check(s)?;
            }
        }
        Ok(())
    }

    /// The species whose population drives a unimolecular channel's
    /// propensity: the reactant, or the product for reproduction channels.
    pub fn catalyst(r: &UnimolecularReaction) -> SpeciesId {
        r.reactant.or(r.product).expect("validated reaction")
    }

    /// Match an encounter (mover, target) against the bimolecular channels.
    /// Returns (probability, mover product, target product) of the first
    /// matching channel.
    pub fn encounter(
        &self,
        mover: SpeciesId,
        target: SpeciesId,
    ) -> Option<(f64, Option<SpeciesId>, Option<SpeciesId>)> {
        for r in &self.bimolecular {
            if r.reactants == (mover, target) {
                return Some((r.probability, r.products.0, r.products.1));
            }
            if r.reactants == (target, mover) {
                return Some((r.probability, r.products.1, r.products.0));
            }
        }
        None
    }

    /// The standard predator-prey set: prey reproduction, predator death,
    /// and predation converting prey into predator on encounter.
    pub fn lotka_volterra(
        hunter: SpeciesId,
        prey: SpeciesId,
        birth_rate: f64,
        death_rate: f64,
        predation_probability: f64,
    ) -> Self {
        ReactionSet {
            unimolecular: vec![
                UnimolecularReaction {
                    reactant: None,
                    product: Some(prey),
                    rate: birth_rate,
                },
                UnimolecularReaction {
                    reactant: Some(hunter),
                    product: None,
                    rate: death_rate,
                },
            ],
            bimolecular: vec![BimolecularReaction {
                reactants: (hunter, prey),
                products: (Some(hunter), Some(hunter)),
                probability: predation_probability,
            }],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_rate() {
        let set = ReactionSet {
            unimolecular: vec![UnimolecularReaction {
                reactant: Some(0),
                product: None,
                rate: -1.0,
            }],
            bimolecular: vec![],
        };
        assert!(set.validate(&SpeciesTable::new(["H"])).is_err());
    }

    #[test]
    fn rejects_probability_above_one() {
        let set = ReactionSet {
            unimolecular: vec![],
            bimolecular: vec![BimolecularReaction {
                reactants: (0, 0),
                products: (Some(0), Some(0)),
                probability: 1.5,
            }],
        };
        assert!(set.validate(&SpeciesTable::new(["H"])).is_err());
    }

    #[test]
    fn encounter_matches_either_order() {
        let set = ReactionSet::lotka_volterra(0, 1, 0.025, 0.06, 0.4);
        // hunter moving onto prey
        let (p, mover, target) = set.encounter(0, 1).unwrap();
        assert_eq!((p, mover, target), (0.4, Some(0), Some(0)));
        // prey moving onto hunter: products follow the reversed slots
        let (p, mover, target) = set.encounter(1, 0).unwrap();
        assert_eq!((p, mover, target), (0.4, Some(0), Some(0)));
        assert!(set.encounter(0, 0).is_none());
    }
}
