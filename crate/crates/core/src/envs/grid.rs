//! Grid-based crowd modeling.
//!
//! Cells are addressed as `(x, y)` with `x` the column and `y` the row,
//! origin at the top-left corner. States are the traversable cells in
//! row-major order.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mdp::{MeanFieldModel, MfMdp};
use crate::types::Dist;

pub const STAY_BONUS: f64 = 0.2;
pub const MOVE_PENALTY: f64 = -0.2;
pub const TARGET_BONUS: f64 = 0.3;
pub const TARGET_DECAY: f64 = 0.1;
pub const DEFAULT_MU_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAction {
    Left = 0,
    Right = 1,
    Up = 2,
    Down = 3,
    Stay = 4,
}

impl GridAction {
    pub const ALL: [GridAction; 5] = [
        GridAction::Left,
        GridAction::Right,
        GridAction::Up,
        GridAction::Down,
        GridAction::Stay,
    ];

    fn delta(self) -> (isize, isize) {
        match self {
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
            GridAction::Up => (0, -1),
            GridAction::Down => (0, 1),
            GridAction::Stay => (0, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridAction::Left => "left",
            GridAction::Right => "right",
            GridAction::Up => "up",
            GridAction::Down => "down",
            GridAction::Stay => "stay",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<(usize, usize)>,
    /// Crowd aversion `kappa`.
    pub kappa: f64,
    /// Total probability of slipping into one of the other four moves.
    pub slipperiness: f64,
    pub target: Option<(usize, usize)>,
    /// Floor applied to `mu(s)` inside the logarithm.
    pub mu_floor: f64,
    pub initial_cell: (usize, usize),
}

impl GridSpec {
    pub fn open(width: usize, height: usize) -> Self {
        GridSpec {
            width,
            height,
            walls: Vec::new(),
            kappa: 0.2,
            slipperiness: 0.1,
            target: None,
            mu_floor: DEFAULT_MU_FLOOR,
            initial_cell: (0, 0),
        }
    }

    /// 5x5 grid with a wall segment at (1,2), (2,2), (3,2); players start at
    /// the top-left corner and, with `target`, are drawn to the bottom-right.
    pub fn five_by_five(target: bool) -> Self {
        GridSpec {
            walls: vec![(1, 2), (2, 2), (3, 2)],
            target: target.then_some((4, 4)),
            ..GridSpec::open(5, 5)
        }
    }

    /// 11x11 grid split into four rooms by a vertical wall at `x = 5` and a
    /// horizontal wall at `y = 5`. Each wall has two one-cell doors: at
    /// `y = 2` and `y = 8` in the vertical wall, at `x = 2` and `x = 8` in the
    /// horizontal one.
    pub fn four_rooms(target: bool) -> Self {
        let mut walls = Vec::new();
        for i in 0..11 {
            if i != 2 && i != 8 {
                walls.push((5, i));
                if i != 5 {
                    walls.push((i, 5));
                }
            }
        }
        walls.sort_by_key(|&(x, y)| (y, x));
        GridSpec {
            walls,
            target: target.then_some((10, 10)),
            ..GridSpec::open(11, 11)
        }
    }
}

/// The crowd-modeling game on a grid.
#[derive(Clone, Debug)]
pub struct GridCrowd {
    spec: GridSpec,
    /// State -> cell.
    cells: Vec<(usize, usize)>,
    /// Cell (row-major) -> state.
    index: Vec<Option<usize>>,
    /// `dest[s * 5 + a]`: cell reached by the intended move of `a`.
    dest: Vec<usize>,
    bonus: Vec<f64>,
}

impl GridCrowd {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let (w, h) = (spec.width, spec.height);
        if w == 0 || h == 0 {
            return Err(Error::Construction("grid must have positive width and height".into()));
        }
        if !(0.0..1.0).contains(&spec.slipperiness) {
            return Err(Error::Construction(format!(
                "slipperiness must lie in [0, 1), got {}",
                spec.slipperiness
            )));
        }
        if !(spec.mu_floor > 0.0 && spec.mu_floor < 1.0) {
            return Err(Error::Construction(format!("mu floor must lie in (0, 1), got {}", spec.mu_floor)));
        }
        if !(spec.kappa >= 0.0 && spec.kappa.is_finite()) {
            return Err(Error::Construction(format!("kappa must be >= 0, got {}", spec.kappa)));
        }
        let mut blocked = vec![false; w * h];
        for &(x, y) in &spec.walls {
            if x >= w || y >= h {
                return Err(Error::Construction(format!("wall ({x},{y}) is outside the {w}x{h} grid")));
            }
            blocked[y * w + x] = true;
        }
        let mut index = vec![None; w * h];
        let mut cells = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if !blocked[y * w + x] {
                    index[y * w + x] = Some(cells.len());
                    cells.push((x, y));
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Construction("grid has no traversable cell".into()));
        }
        let lookup = |(x, y): (usize, usize), what: &str| -> Result<usize> {
            if x >= w || y >= h {
                return Err(Error::Construction(format!("{what} ({x},{y}) is outside the grid")));
            }
            index[y * w + x].ok_or_else(|| Error::Construction(format!("{what} ({x},{y}) is a wall")))
        };
        lookup(spec.initial_cell, "initial cell")?;
        if let Some(t) = spec.target {
            lookup(t, "target")?;
        }
        let mut dest = Vec::with_capacity(cells.len() * 5);
        for &(x, y) in &cells {
            for act in GridAction::ALL {
                let (dx, dy) = act.delta();
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                let inside = nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h;
                let to = if inside { index[ny as usize * w + nx as usize] } else { None };
                dest.push(to.unwrap_or(index[y * w + x].unwrap()));
            }
        }
        let bonus = cells
            .iter()
            .map(|&(x, y)| match spec.target {
                Some((tx, ty)) => {
                    let d = x.abs_diff(tx) + y.abs_diff(ty);
                    (TARGET_BONUS - TARGET_DECAY * d as f64).max(0.0)
                }
                None => 0.0,
            })
            .collect();
        let grid = GridCrowd {
            spec,
            cells,
            index,
            dest,
            bonus,
        };
        grid.check_connected()?;
        Ok(grid)
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.cells.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(s) = queue.pop_front() {
            for a in 0..5 {
                let t = self.dest[s * 5 + a];
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        match seen.iter().position(|&v| !v) {
            None => Ok(()),
            Some(s) => {
                let (x, y) = self.cells[s];
                Err(Error::Construction(format!(
                    "traversable cells are disconnected: ({x},{y}) cannot be reached from {:?}",
                    self.cells[0]
                )))
            }
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn cell_of(&self, s: usize) -> (usize, usize) {
        self.cells[s]
    }

    pub fn state_of(&self, x: usize, y: usize) -> Option<usize> {
        if x < self.spec.width && y < self.spec.height {
            self.index[y * self.spec.width + x]
        } else {
            None
        }
    }

    pub fn initial_state(&self) -> usize {
        let (x, y) = self.spec.initial_cell;
        self.state_of(x, y).unwrap()
    }

    /// Point mass at the initial cell.
    pub fn nu(&self) -> Dist {
        Dist::point_mass(self.cells.len(), self.initial_state())
    }

    /// Target-proximity bonus of state `s`.
    pub fn bonus(&self, s: usize) -> f64 {
        self.bonus[s]
    }

    /// States within `radius` (l1 coordinate distance) of the target.
    pub fn target_neighborhood(&self, radius: usize) -> Vec<usize> {
        let Some((tx, ty)) = self.spec.target else {
            return Vec::new();
        };
        (0..self.cells.len())
            .filter(|&s| {
                let (x, y) = self.cells[s];
                x.abs_diff(tx) + y.abs_diff(ty) <= radius
            })
            .collect()
    }

    /// `sup |r|` given the density floor.
    pub fn reward_bound(&self) -> f64 {
        let crowd = -self.spec.kappa * self.spec.mu_floor.ln();
        let target = if self.spec.target.is_some() { TARGET_BONUS } else { 0.0 };
        crowd + STAY_BONUS + target
    }

    pub fn into_mdp(self, gamma: f64) -> Result<MfMdp> {
        let bound = self.reward_bound();
        MfMdp::new(self, gamma, bound)
    }
}

impl MeanFieldModel for GridCrowd {
    fn n_states(&self) -> usize {
        self.cells.len()
    }

    fn n_actions(&self) -> usize {
        5
    }

    fn transition(&self, s: usize, a: usize, _mu: &Dist, out: &mut [f64]) {
        out.fill(0.0);
        let slip = self.spec.slipperiness / 4.0;
        for b in 0..5 {
            let p = if b == a { 1.0 - self.spec.slipperiness } else { slip };
            out[self.dest[s * 5 + b]] += p;
        }
    }

    fn reward(&self, s: usize, a: usize, mu: &Dist) -> f64 {
        let crowd = -self.spec.kappa * mu[s].max(self.spec.mu_floor).ln();
        let shaping = if a == GridAction::Stay as usize { STAY_BONUS } else { MOVE_PENALTY };
        crowd + shaping + self.bonus[s]
    }

    fn sample_transition(&self, s: usize, a: usize, _mu: &Dist, u: f64) -> usize {
        let keep = 1.0 - self.spec.slipperiness;
        if u < keep {
            return self.dest[s * 5 + a];
        }
        let slip = self.spec.slipperiness / 4.0;
        let j = (((u - keep) / slip) as usize).min(3);
        // j-th action other than a
        let b = if j < a { j } else { j + 1 };
        self.dest[s * 5 + b]
    }
}

pub fn build_grid_crowd(spec: GridSpec, gamma: f64) -> Result<MfMdp> {
    GridCrowd::new(spec)?.into_mdp(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_by_five_layout() {
        let g = GridCrowd::new(GridSpec::five_by_five(true)).unwrap();
        assert_eq!(g.n_states(), 22);
        assert_eq!(g.state_of(1, 2), None);
        assert_eq!(g.initial_state(), 0);
        assert_eq!(g.cell_of(21), (4, 4));
        assert_eq!(g.bonus(21), 0.3);
        assert!((g.bonus(g.state_of(3, 4).unwrap()) - 0.2).abs() < 1e-15);
        assert_eq!(g.bonus(g.state_of(1, 4).unwrap()), 0.0);
    }

    #[test]
    fn walls_and_edges_resolve_to_stay() {
        let g = GridCrowd::new(GridSpec::five_by_five(false)).unwrap();
        let mu = Dist::uniform(22);
        let mut row = vec![0.0; 22];
        // top-left corner: left and up bounce back
        g.transition(0, GridAction::Left as usize, &mu, &mut row);
        assert!((row[0] - (0.9 + 0.025 * 2.0)).abs() < 1e-15);
        // (1,1) moving down hits the wall at (1,2)
        let s = g.state_of(1, 1).unwrap();
        g.transition(s, GridAction::Down as usize, &mu, &mut row);
        assert!((row[s] - (0.9 + 0.025)).abs() < 1e-15);
    }

    #[test]
    fn sampling_matches_rows() {
        let g = GridCrowd::new(GridSpec::five_by_five(true)).unwrap();
        let mu = Dist::uniform(22);
        let mut row = vec![0.0; 22];
        for s in 0..22 {
            for a in 0..5 {
                g.transition(s, a, &mu, &mut row);
                let mut freq = vec![0.0; 22];
                let n = 4000;
                for i in 0..n {
                    let u = (i as f64 + 0.5) / n as f64;
                    freq[g.sample_transition(s, a, &mu, u)] += 1.0 / n as f64;
                }
                let err: f64 = row.iter().zip(&freq).map(|(p, f)| (p - f).abs()).sum();
                assert!(err < 1e-9, "state {s} action {a}: {err}");
            }
        }
    }

    #[test]
    fn four_rooms_is_connected() {
        let g = GridCrowd::new(GridSpec::four_rooms(false)).unwrap();
        assert_eq!(g.n_states(), 121 - 17);
        assert!(g.state_of(5, 2).is_some());
        assert!(g.state_of(5, 5).is_none());
    }

    #[test]
    fn disconnected_grid_is_rejected() {
        let spec = GridSpec {
            walls: (0..3).map(|y| (1, y)).collect(),
            ..GridSpec::open(3, 3)
        };
        assert!(matches!(GridCrowd::new(spec), Err(Error::Construction(_))));
    }

    #[test]
    fn bad_cells_are_rejected() {
        let mut spec = GridSpec::five_by_five(true);
        spec.initial_cell = (1, 2);
        assert!(GridCrowd::new(spec).is_err());
        let mut spec = GridSpec::five_by_five(true);
        spec.target = Some((9, 9));
        assert!(GridCrowd::new(spec).is_err());
    }
}
