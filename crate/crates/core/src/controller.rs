//! Binds a policy tag and its parameters to per-agent controller state.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::policies::{
    cv_action, orca_action, reactive_action, sfm_action, static_action, AgentState, OrcaParams,
    PolicyTag, SfmParams, WorldSnapshot,
};
use crate::predictive::{
    mpc_cv_action, mppi_cv_action, straight_to_goal, ControlSequence, CostParams, MotionPredictor,
    PredictorRegistry,
};

/// Parameter blocks for every policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    pub sfm: SfmParams,
    pub orca: OrcaParams,
    pub mpc: CostParams,
    pub mppi: CostParams,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            sfm: SfmParams::default(),
            orca: OrcaParams::default(),
            mpc: CostParams::mpc_default(),
            mppi: CostParams::mppi_default(),
        }
    }
}

enum Kind {
    Static,
    Cv,
    Sfm(SfmParams),
    Orca(OrcaParams),
    Rp,
    Mpc(CostParams, Arc<dyn MotionPredictor>),
    Mppi(CostParams, Arc<dyn MotionPredictor>, Option<ControlSequence>),
}

/// A live policy instance for one agent. Only MPPI carries state between
/// calls (its warm-start nominal).
pub struct Controller {
    tag: PolicyTag,
    kind: Kind,
}

impl Controller {
    pub fn new(tag: PolicyTag, params: &PolicyParams, registry: &PredictorRegistry) -> Result<Self> {
        let lookup = |name: &str| {
            registry.get(name).ok_or_else(|| Error::Config(format!("unknown predictor `{name}`")))
        };
        let kind = match tag {
            PolicyTag::Static => Kind::Static,
            PolicyTag::Cv => Kind::Cv,
            PolicyTag::Sfm => Kind::Sfm(params.sfm),
            PolicyTag::Orca => Kind::Orca(params.orca),
            PolicyTag::Rp => Kind::Rp,
            PolicyTag::MpcCv => Kind::Mpc(params.mpc.clone(), lookup(&params.mpc.predictor)?),
            PolicyTag::MppiCv => Kind::Mppi(params.mppi.clone(), lookup(&params.mppi.predictor)?, None),
        };
        Ok(Controller { tag, kind })
    }

    pub fn tag(&self) -> PolicyTag {
        self.tag
    }

    /// Commanded velocity before wall clamping.
    pub fn act<R: Rng + ?Sized>(&mut self, me: &AgentState, snapshot: &WorldSnapshot, rng: &mut R) -> Vec2 {
        match &mut self.kind {
            Kind::Static => static_action(me),
            Kind::Cv => cv_action(me, snapshot.dt),
            Kind::Sfm(p) => sfm_action(me, snapshot, p),
            Kind::Orca(p) => orca_action(me, snapshot, p),
            Kind::Rp => reactive_action(me, snapshot),
            Kind::Mpc(cp, pred) => mpc_cv_action(me, snapshot, cp, pred.as_ref(), rng),
            Kind::Mppi(cp, pred, nominal) => {
                let current = nominal
                    .take()
                    .unwrap_or_else(|| straight_to_goal(me, snapshot.dt, cp.horizon));
                let (v, next) = mppi_cv_action(me, snapshot, cp, &current, pred.as_ref(), rng);
                *nominal = Some(next);
                v
            }
        }
    }
}

impl std::fmt::Debug for Controller {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Controller").field("tag", &self.tag).finish()
    }
}
