use serde::{Deserialize, Serialize};

use crate::eval::Scenario;
use crate::traj::GridPos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Interpolation,
    Extrapolation,
}

/// Two demonstrated placements and the placement to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripletTask {
    pub demos: [GridPos; 2],
    pub target: GridPos,
    pub direction: Direction,
}

impl TripletTask {
    pub fn scenario(&self) -> Scenario {
        match self.direction {
            Direction::Interpolation => Scenario::FewdemoInterp,
            Direction::Extrapolation => Scenario::FewdemoExtrap,
        }
    }

    pub fn key(&self) -> String {
        format!("{}+{}->{}", self.demos[0], self.demos[1], self.target)
    }
}

/// Tasks from every run of three adjacent positions along a grid row or
/// column: the middle from the outer two, and each end from the other two.
pub fn enumerate_triplets(positions: &[GridPos]) -> Vec<TripletTask> {
    let has = |p: GridPos| positions.contains(&p);
    let mut starts: Vec<GridPos> = positions.to_vec();
    starts.sort();
    starts.dedup();
    let mut out = Vec::new();
    for p in starts {
        for (dc, dr) in [(1, 0), (0, 1)] {
            let q = GridPos::new(p.col + dc, p.row + dr);
            let r = GridPos::new(p.col + 2 * dc, p.row + 2 * dr);
            if !(has(q) && has(r)) {
                continue;
            }
            out.push(TripletTask {
                demos: [p, r],
                target: q,
                direction: Direction::Interpolation,
            });
            out.push(TripletTask {
                demos: [q, r],
                target: p,
                direction: Direction::Extrapolation,
            });
            out.push(TripletTask {
                demos: [p, q],
                target: r,
                direction: Direction::Extrapolation,
            });
        }
    }
    out.sort();
    out
}
