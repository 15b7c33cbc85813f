//! Footstep planning: A* body path on an occupancy grid, then footprints
//! along the path from a fixed-length step model.

mod astar;
mod grid;
mod steps;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

pub use astar::{move_allowed, path_cost, plan_path, GridCost};
pub use grid::{inflate, Cell, GridMap, MapFile};
pub use steps::{
    footsteps_from_path, initial_stance, transition, FeetState, FootstepPlan, StepAction,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Distance a foot travels in one step (m).
    pub step_length: f64,
    /// Lateral distance between the feet (m).
    pub step_width: f64,
    /// Largest heading change of one step (rad).
    pub max_turn: f64,
    /// Distance ahead along the path used to measure its direction (cells).
    pub lookahead_cells: usize,
    /// Extra dilation of the inflated map for the body path search (cells).
    /// `None` picks enough to keep both foot lanes off obstacles.
    pub clearance_cells: Option<usize>,
    pub first_swing: crate::geometry::Side,
    /// Heading used when the path gives no direction (single cell).
    pub initial_heading: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            step_length: 0.1,
            step_width: 0.2,
            max_turn: 20f64.to_radians(),
            lookahead_cells: 3,
            clearance_cells: None,
            first_swing: crate::geometry::Side::Left,
            initial_heading: 0.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_length > 0.0 && self.step_length.is_finite()) {
            return param(format!(
                "step length must be positive, got {}",
                self.step_length
            ));
        }
        if !(self.step_width > 0.0 && self.step_width.is_finite()) {
            return param(format!(
                "step width must be positive, got {}",
                self.step_width
            ));
        }
        if !(self.max_turn > 0.0 && self.max_turn < std::f64::consts::PI) {
            return param(format!(
                "turn limit must be in (0, pi), got {}",
                self.max_turn
            ));
        }
        if self.lookahead_cells == 0 {
            return param("lookahead must be at least one cell");
        }
        Ok(())
    }

    pub fn clearance(&self, cell_size: f64) -> usize {
        self.clearance_cells
            .unwrap_or_else(|| (0.5 * self.step_width / cell_size - 1e-9).ceil() as usize + 1)
    }
}

/// Everything produced by planning on one map.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRoute {
    pub map: GridMap,
    pub inflated: GridMap,
    /// Inflated map with the path clearance added; the body path is searched here.
    pub search: GridMap,
    pub path: Vec<Cell>,
    pub plan: FootstepPlan,
}

/// Inflates the map, searches a body path with clearance, and places
/// footsteps along it. Footprints are checked against the inflated map.
pub fn plan_route(file: &MapFile, config: &PlannerConfig) -> Result<PlannedRoute> {
    config.validate()?;
    let map = file.grid()?;
    let inflated = inflate(&map);
    let search = inflated.dilate(config.clearance(map.cell_size));
    let path = plan_path(&search, file.start, file.goal)?;
    let initial = initial_stance(&map, &path, config)?;
    let plan = footsteps_from_path(&inflated, &path, &initial, config)?;
    Ok(PlannedRoute {
        map,
        inflated,
        search,
        path,
        plan,
    })
}

/// Obstacle course used by the examples and tests: a 4 m x 3 m room with
/// blocks between the start on the left and the goal on the right.
pub fn obstacle_course() -> MapFile {
    let mut map = GridMap::empty(40, 30, 0.1).expect("static map");
    map.fill_block(0..9, 15..19);
    map.fill_block(18..30, 15..19);
    map.fill_block(10..17, 26..29);
    map.fill_block(21..25, 8..11);
    let occupied = (0..map.occupied.len())
        .filter(|&i| map.occupied[i])
        .map(|i| map.cell_of_index(i))
        .collect();
    MapFile {
        width: 40,
        height: 30,
        cell_size: 0.1,
        occupied,
        start: (13, 3),
        goal: (20, 36),
        inflation_scale: 1.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Side;

    #[test]
    fn straight_metre_gives_twenty_steps_and_a_closing_step() {
        let map = GridMap::empty(20, 5, 0.1).unwrap();
        let path: Vec<Cell> = (0..=10).map(|c| (2, c)).collect();
        let cfg = PlannerConfig::default();
        let init = initial_stance(&map, &path, &cfg).unwrap();
        let plan = footsteps_from_path(&map, &path, &init, &cfg).unwrap();
        assert_eq!(plan.steps.len(), 21);
        let d = plan.step_distances();
        assert!((d[0] - 0.05).abs() < 1e-12);
        for v in &d[1..20] {
            assert!((v - 0.1).abs() < 1e-12);
        }
        assert!(plan.steps.iter().all(|f| f.theta.abs() < 1e-12));
        let last = plan.final_feet();
        assert!((last.left.x - 1.05).abs() < 1e-9 && (last.right.x - 1.05).abs() < 1e-9);
    }

    #[test]
    fn single_cell_path_has_no_forward_steps() {
        let map = GridMap::empty(5, 5, 0.1).unwrap();
        let path = vec![(2, 2)];
        let cfg = PlannerConfig::default();
        let init = initial_stance(&map, &path, &cfg).unwrap();
        let plan = footsteps_from_path(&map, &path, &init, &cfg).unwrap();
        assert!(plan.steps.is_empty());
    }

    #[test]
    fn collision_at_start_is_reported() {
        let mut map = GridMap::empty(5, 5, 0.1).unwrap();
        map.set_occupied((3, 2), true);
        let init = FeetState::side_by_side(map.cell_center((2, 2)), 0.0, 0.2, Side::Left);
        let r = footsteps_from_path(&map, &[(2, 2)], &init, &PlannerConfig::default());
        assert!(matches!(r, Err(crate::Error::Planning(_))));
    }

    #[test]
    fn obstacle_course_is_plannable() {
        let route = plan_route(&obstacle_course(), &PlannerConfig::default()).unwrap();
        assert!(route.plan.steps.len() > 40);
        for f in &route.plan.steps {
            assert!(route.inflated.point_is_free(f.position()));
        }
    }
}
