//! Named activation pools and random per-slot substitution.

use std::fmt;
use std::str::FromStr;

use crate::activations::{ActivationId, ActivationKind};
use crate::error::{Error, Result};
use crate::model::{LayerSpec, ModelSpec};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetName {
    OldAs,
    FullAs,
    BaseAs,
}

impl SetName {
    pub const ALL: [SetName; 3] = [SetName::OldAs, SetName::FullAs, SetName::BaseAs];

    pub fn as_str(self) -> &'static str {
        match self {
            SetName::OldAs => "OldAS",
            SetName::FullAs => "FullAS",
            SetName::BaseAs => "BaseAS",
        }
    }

    /// Member kinds in canonical order.
    pub fn kinds(self) -> &'static [ActivationKind] {
        use ActivationKind as K;
        const OLD: [K; 9] = [
            K::MeluK8,
            K::LeakyRelu,
            K::Elu,
            K::MeluK4,
            K::Prelu,
            K::Srelu,
            K::Aplu,
            K::GaluK4,
            K::GaluK2,
        ];
        const FULL: [K; 16] = [
            K::MeluK8,
            K::LeakyRelu,
            K::Elu,
            K::MeluK4,
            K::Prelu,
            K::Srelu,
            K::Aplu,
            K::GaluK4,
            K::GaluK2,
            K::Relu,
            K::SoftLearnable,
            K::Pdelu,
            K::MishLearnable,
            K::Srs,
            K::SwishLearnable,
            K::SwishFixed,
        ];
        const BASE: [K; 11] = [
            K::LeakyRelu,
            K::Elu,
            K::Prelu,
            K::Srelu,
            K::Aplu,
            K::Relu,
            K::Pdelu,
            K::MishLearnable,
            K::Srs,
            K::SwishLearnable,
            K::SwishFixed,
        ];
        match self {
            SetName::OldAs => &OLD,
            SetName::FullAs => &FULL,
            SetName::BaseAs => &BASE,
        }
    }
}

impl fmt::Display for SetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SetName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown activation set '{s}' (expected OldAS, FullAS or BaseAS)")))
    }
}

/// A pool of activations to draw from.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSet {
    pub name: String,
    pub members: Vec<ActivationId>,
}

impl ActivationSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// One of the named pools, every member tagged with `max_input`.
pub fn activation_set(name: &str, max_input: f64) -> Result<ActivationSet> {
    crate::activations::check_max_input(max_input)?;
    let set: SetName = name.parse()?;
    Ok(ActivationSet {
        name: set.as_str().to_string(),
        members: set
            .kinds()
            .iter()
            .map(|&k| ActivationId::new(k, max_input))
            .collect(),
    })
}

/// Copy of `base` with every activation slot replaced by an independent
/// uniform draw from `set`, slots visited in layer order.
pub fn gen_stochastic_model(base: &ModelSpec, set: &ActivationSet, rng: &mut Rng) -> Result<ModelSpec> {
    if set.is_empty() {
        return Err(Error::config(format!("activation set '{}' is empty", set.name)));
    }
    let mut spec = base.clone();
    let mut any = false;
    for layer in &mut spec.layers {
        if let LayerSpec::Activation { act, .. } = layer {
            *act = set.members[rng.below(set.len())];
            any = true;
        }
    }
    if !any {
        return Err(Error::config("model has no activation slots to substitute"));
    }
    Ok(spec)
}
