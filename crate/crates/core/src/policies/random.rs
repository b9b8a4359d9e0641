use rand::{Rng, RngCore};

use super::{JointAction, Policy, PolicyError};
use crate::grid::{Action, GridConfig, WorldState};

/// Independent uniform action per agent.
pub fn random_walk<R: Rng + ?Sized>(world: &WorldState, rng: &mut R) -> JointAction {
    world
        .agents
        .iter()
        .map(|_| Action::ALL[rng.gen_range(0..Action::ALL.len())])
        .collect::<Vec<_>>()
        .into()
}

#[derive(Debug, Clone, Default)]
pub struct RandomWalk;

impl Policy for RandomWalk {
    fn name(&self) -> &str {
        "random"
    }

    fn act(
        &self,
        world: &WorldState,
        _config: &GridConfig,
        rng: &mut dyn RngCore,
    ) -> Result<JointAction, PolicyError> {
        Ok(random_walk(world, rng))
    }
}
