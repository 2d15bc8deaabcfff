//! The eight discrete actions relative to the dynamic window and goal line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{
    goal_line_window_intersection, project_admissible, DynamicWindow, GoalArc, KinodynamicLimits, Velocity,
};
use crate::scalar::Scalar;

pub const NUM_ACTIONS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("action {0} is not selectable in this state")]
    InvalidAction(usize),
    #[error("action index {0} out of range")]
    OutOfRange(usize),
}

/// Fixed slot semantics, shared with the network output layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(usize)]
pub enum ActionSlot {
    IncreaseV = 0,
    DecreaseV = 1,
    IncreaseW = 2,
    DecreaseW = 3,
    Keep = 4,
    GoalLineFast = 5,
    GoalLineSlow = 6,
    HeadGoal = 7,
}

impl ActionSlot {
    pub const ALL: [ActionSlot; NUM_ACTIONS] = [
        ActionSlot::IncreaseV,
        ActionSlot::DecreaseV,
        ActionSlot::IncreaseW,
        ActionSlot::DecreaseW,
        ActionSlot::Keep,
        ActionSlot::GoalLineFast,
        ActionSlot::GoalLineSlow,
        ActionSlot::HeadGoal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self, ActionError> {
        Self::ALL.get(i).copied().ok_or(ActionError::OutOfRange(i))
    }

    pub fn is_goal_line(self) -> bool {
        matches!(self, ActionSlot::GoalLineFast | ActionSlot::GoalLineSlow | ActionSlot::HeadGoal)
    }
}

/// Selectable actions; the first five are always set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionMask(pub [bool; NUM_ACTIONS]);

impl ActionMask {
    pub fn all() -> Self {
        Self([true; NUM_ACTIONS])
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.0.get(i).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn valid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_ACTIONS).filter(|&i| self.0[i])
    }
}

/// Velocity commands for each slot plus which slots may be chosen.
/// Masked slots hold the current velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionTable<T> {
    pub commands: [Velocity<T>; NUM_ACTIONS],
    pub mask: ActionMask,
}

impl<T: Scalar> ActionTable<T> {
    pub fn command(&self, slot: ActionSlot) -> Result<Velocity<T>, ActionError> {
        action_to_command(slot, self)
    }
}

pub fn enumerate_actions<T: Scalar>(
    dw: &DynamicWindow<T>,
    arc: &GoalArc<T>,
    lim: &KinodynamicLimits<T>,
) -> ActionTable<T> {
    let cur = dw.center;
    let mut commands = [cur; NUM_ACTIONS];
    let mut mask = [true, true, true, true, true, false, false, false];
    commands[..4].copy_from_slice(&dw.vertices);

    if let Some((lo, hi)) = goal_line_window_intersection(dw, arc) {
        commands[ActionSlot::GoalLineFast.index()] = project_admissible(cur, hi, lim);
        commands[ActionSlot::GoalLineSlow.index()] = project_admissible(cur, lo, lim);
        mask[5] = true;
        mask[6] = true;
        if lo.v <= cur.v && cur.v <= hi.v {
            commands[ActionSlot::HeadGoal.index()] = project_admissible(cur, arc.at_linear(cur.v), lim);
            mask[7] = true;
        }
    }
    ActionTable {
        commands,
        mask: ActionMask(mask),
    }
}

pub fn action_to_command<T: Scalar>(slot: ActionSlot, table: &ActionTable<T>) -> Result<Velocity<T>, ActionError> {
    let i = slot.index();
    if !table.mask.is_valid(i) {
        return Err(ActionError::InvalidAction(i));
    }
    Ok(table.commands[i])
}
