use serde::{Deserialize, Serialize};

use super::{check_groups, floor_log, group_of, ConditionalDensity, FeatureMap};
use crate::mdp::ActionId;
use crate::{Error, Result, RngStream, Scalar};

/// Degenerate return law at a fixed value for every `(x, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMass<S> {
    value: Vec<S>,
}

impl<S: Scalar> PointMass<S> {
    pub fn new(value: Vec<S>) -> Self {
        Self { value }
    }

    pub fn zero(dim: usize) -> Self {
        Self { value: vec![S::zero(); dim] }
    }

    pub fn value(&self) -> &[S] {
        &self.value
    }
}

impl<S: Scalar> ConditionalDensity<S> for PointMass<S> {
    fn reward_dim(&self) -> usize {
        self.value.len()
    }

    fn sample_into(&self, _: &[S], _: ActionId, _: &mut RngStream, out: &mut [S]) {
        out.copy_from_slice(&self.value);
    }

    fn log_density(&self, _: &[S], _: ActionId, z: &[S]) -> S {
        // a density does not exist; report 0 on the atom and the floor elsewhere
        if z == self.value.as_slice() {
            S::zero()
        } else {
            floor_log(S::neg_infinity())
        }
    }
}

/// Equally weighted scalar atoms ("quantile locations") per `(cell, action)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileModel<S> {
    feature: FeatureMap,
    num_actions: usize,
    locations: Vec<Vec<S>>,
}

impl<S: Scalar> QuantileModel<S> {
    pub fn new(feature: FeatureMap, num_actions: usize, locations: Vec<Vec<S>>) -> Result<Self> {
        check_groups(&feature, num_actions, &locations)?;
        let n = locations.first().map_or(0, Vec::len);
        if n == 0 || locations.iter().any(|l| l.len() != n) {
            return Err(Error::Validation("quantile groups need the same positive number of atoms".into()));
        }
        Ok(Self { feature, num_actions, locations })
    }

    pub fn locations(&self, x: &[S], a: ActionId) -> &[S] {
        &self.locations[group_of(&self.feature, self.num_actions, x, a)]
    }

    pub fn group_locations(&self) -> &[Vec<S>] {
        &self.locations
    }
}

impl<S: Scalar> ConditionalDensity<S> for QuantileModel<S> {
    fn reward_dim(&self) -> usize {
        1
    }

    fn sample_into(&self, x: &[S], a: ActionId, rng: &mut RngStream, out: &mut [S]) {
        let l = self.locations(x, a);
        out[0] = l[rng.index(l.len())];
    }

    fn log_density(&self, x: &[S], a: ActionId, z: &[S]) -> S {
        let l = self.locations(x, a);
        let hits = l.iter().filter(|&&v| v == z[0]).count();
        floor_log((S::from_usize_lossy(hits) / S::from_usize_lossy(l.len())).ln())
    }
}
