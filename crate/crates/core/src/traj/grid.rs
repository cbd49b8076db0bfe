//! Placemat grid and the manipulation action catalogue.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spacing between neighbouring grid points in meters.
pub const GRID_SPACING: f64 = 0.10;

/// Integer `(column, row)` coordinate on the placemat grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct GridPos {
    pub col: i32,
    pub row: i32,
}

impl GridPos {
    pub const fn new(col: i32, row: i32) -> Self {
        Self { col, row }
    }

    /// The shared start/end position `S`.
    pub const START: GridPos = GridPos::new(4, 0);

    /// Metric table-plane position, with `S` at the origin.
    pub fn to_metric(self) -> Vector3<f64> {
        Vector3::new(
            (self.col - Self::START.col) as f64 * GRID_SPACING,
            (self.row - Self::START.row) as f64 * GRID_SPACING,
            0.0,
        )
    }

    pub fn is_start(self) -> bool {
        self == Self::START
    }

    pub fn is_target(self) -> bool {
        GRID_TARGETS.contains(&self)
    }
}

impl From<[i32; 2]> for GridPos {
    fn from([col, row]: [i32; 2]) -> Self {
        Self { col, row }
    }
}

impl From<GridPos> for [i32; 2] {
    fn from(p: GridPos) -> Self {
        [p.col, p.row]
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.col, self.row)
    }
}

/// The 13 target positions around `S`.
///
/// Three orthogonally connected columns give the triplets used by the
/// few-demonstration experiments; `(2,2)` and `(6,2)` lie at equal distance
/// from `S` on either side.
pub const GRID_TARGETS: [GridPos; 13] = [
    GridPos::new(1, 0),
    GridPos::new(1, 1),
    GridPos::new(1, 2),
    GridPos::new(2, 2),
    GridPos::new(3, 0),
    GridPos::new(4, 1),
    GridPos::new(4, 2),
    GridPos::new(4, 3),
    GridPos::new(5, 0),
    GridPos::new(6, 2),
    GridPos::new(7, 0),
    GridPos::new(7, 1),
    GridPos::new(7, 2),
];

/// Targets that cannot host the bowl-like target objects.
pub const BOWL_EXCLUDED: [GridPos; 2] = [GridPos::new(3, 0), GridPos::new(4, 1)];

/// The nine single-object manipulation actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    PickAndPlace,
    PutOnTop,
    TakeDown,
    PutInside,
    TakeOut,
    Hide,
    Uncover,
    Push,
    Pull,
}

impl Action {
    pub const ALL: [Action; 9] = [
        Action::PickAndPlace,
        Action::PutOnTop,
        Action::TakeDown,
        Action::PutInside,
        Action::TakeOut,
        Action::Hide,
        Action::Uncover,
        Action::Push,
        Action::Pull,
    ];

    /// Reverse actions start at a grid target and return to `S`.
    pub fn is_reverse(self) -> bool {
        matches!(
            self,
            Action::TakeDown | Action::TakeOut | Action::Uncover | Action::Pull
        )
    }

    /// Push and pull slide the object along the table.
    pub fn is_flat(self) -> bool {
        matches!(self, Action::Push | Action::Pull)
    }

    pub fn uses_bowl(self) -> bool {
        matches!(
            self,
            Action::PutOnTop | Action::TakeDown | Action::PutInside | Action::TakeOut
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::PickAndPlace => "pick_and_place",
            Action::PutOnTop => "put_on_top",
            Action::TakeDown => "take_down",
            Action::PutInside => "put_inside",
            Action::TakeOut => "take_out",
            Action::Hide => "hide",
            Action::Uncover => "uncover",
            Action::Push => "push",
            Action::Pull => "pull",
        }
    }

    /// Movement endpoints on the grid for a given target position.
    pub fn endpoints(self, target: GridPos) -> (GridPos, GridPos) {
        if self.is_reverse() {
            (target, GridPos::START)
        } else {
            (GridPos::START, target)
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown action '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_maps_to_origin() {
        assert_eq!(GridPos::START.to_metric(), Vector3::zeros());
        let p = GridPos::new(1, 2).to_metric();
        assert!((p - Vector3::new(-0.3, 0.2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn targets_are_distinct_and_exclude_start() {
        let mut v = GRID_TARGETS.to_vec();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), 13);
        assert!(!GridPos::START.is_target());
    }

    #[test]
    fn action_names_round_trip() {
        for a in Action::ALL {
            assert_eq!(a.name().parse::<Action>().unwrap(), a);
        }
        assert!("dance".parse::<Action>().is_err());
    }
}
