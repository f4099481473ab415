use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Green,
    Blue,
    Purple,
    Yellow,
    Grey,
}

impl Color {
    pub const ALL: [Color; 6] = [
        Color::Red,
        Color::Green,
        Color::Blue,
        Color::Purple,
        Color::Yellow,
        Color::Grey,
    ];

    pub fn rgb(self) -> [u8; 3] {
        match self {
            Color::Red => [255, 0, 0],
            Color::Green => [0, 255, 0],
            Color::Blue => [0, 0, 255],
            Color::Purple => [112, 39, 195],
            Color::Yellow => [255, 255, 0],
            Color::Grey => [100, 100, 100],
        }
    }
}

/// Contents of one grid cell. The agent is not a cell kind; it sits on top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellKind {
    Empty,
    Wall,
    Door {
        color: Color,
        open: bool,
        locked: bool,
    },
    Key {
        color: Color,
    },
    Goal,
    Lava,
    /// Collectible ball used by the fetch task.
    Ball {
        color: Color,
    },
}

impl CellKind {
    /// Whether the agent may stand on this cell.
    pub fn can_overlap(self) -> bool {
        matches!(
            self,
            CellKind::Empty | CellKind::Goal | CellKind::Lava | CellKind::Door { open: true, .. }
        )
    }

    pub fn as_item(self) -> Option<Item> {
        match self {
            CellKind::Key { color } => Some(Item::Key(color)),
            CellKind::Ball { color } => Some(Item::Ball(color)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Key(Color),
    Ball(Color),
}

impl Item {
    pub fn to_cell(self) -> CellKind {
        match self {
            Item::Key(color) => CellKind::Key { color },
            Item::Ball(color) => CellKind::Ball { color },
        }
    }
}

/// Cardinal facing, encoded clockwise from east (the usual minigrid order).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    East = 0,
    South = 1,
    West = 2,
    North = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::East,
        Direction::South,
        Direction::West,
        Direction::North,
    ];

    pub fn from_index(i: usize) -> Direction {
        Direction::ALL[i % 4]
    }

    pub fn left(self) -> Direction {
        Direction::from_index(self as usize + 3)
    }

    pub fn right(self) -> Direction {
        Direction::from_index(self as usize + 1)
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
            Direction::North => (0, -1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    TurnLeft = 0,
    TurnRight = 1,
    Forward = 2,
    Pickup = 3,
    Drop = 4,
    Toggle = 5,
    Done = 6,
}

impl Action {
    pub const COUNT: usize = 7;
    pub const ALL: [Action; 7] = [
        Action::TurnLeft,
        Action::TurnRight,
        Action::Forward,
        Action::Pickup,
        Action::Drop,
        Action::Toggle,
        Action::Done,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn is_turn(self) -> bool {
        matches!(self, Action::TurnLeft | Action::TurnRight)
    }
}

/// Full ground-truth simulator state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub width: usize,
    pub height: usize,
    /// Row-major, `cells[row * width + col]`.
    pub cells: Vec<CellKind>,
    pub agent_pos: (usize, usize),
    pub agent_dir: Direction,
    pub carrying: Option<Item>,
    pub step_count: u32,
    /// Ball color the fetch task asks for; `None` outside the fetch layout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetch_target: Option<Color>,
}

impl GridState {
    /// Walled rectangle with an empty interior.
    pub fn walled(width: usize, height: usize) -> GridState {
        let mut cells = vec![CellKind::Empty; width * height];
        for row in 0..height {
            for col in 0..width {
                if row == 0 || col == 0 || row == height - 1 || col == width - 1 {
                    cells[row * width + col] = CellKind::Wall;
                }
            }
        }
        GridState {
            width,
            height,
            cells,
            agent_pos: (1, 1),
            agent_dir: Direction::East,
            carrying: None,
            step_count: 0,
            fetch_target: None,
        }
    }

    pub fn get(&self, col: usize, row: usize) -> CellKind {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, cell: CellKind) {
        self.cells[row * self.width + col] = cell;
    }

    pub fn in_bounds(&self, col: isize, row: isize) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    /// Cell the agent is facing, if in bounds.
    pub fn front_pos(&self) -> Option<(usize, usize)> {
        let (dx, dy) = self.agent_dir.delta();
        let col = self.agent_pos.0 as isize + dx;
        let row = self.agent_pos.1 as isize + dy;
        self.in_bounds(col, row)
            .then_some((col as usize, row as usize))
    }

    pub fn front_cell(&self) -> Option<CellKind> {
        self.front_pos().map(|(c, r)| self.get(c, r))
    }

    /// Empty cells in row-major order. The agent's own cell counts as empty.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(col, row) == CellKind::Empty {
                    out.push((col, row));
                }
            }
        }
        out
    }

    /// Copy with the step counter cleared, used as a planning key.
    pub fn without_clock(&self) -> GridState {
        GridState {
            step_count: 0,
            ..self.clone()
        }
    }

    /// True when the grid still has the nominal door-key structure: one
    /// yellow door in an interior wall column, exactly one yellow key (on the
    /// floor or carried), the goal in the far corner and nothing foreign.
    pub fn is_nominal_layout(&self) -> bool {
        if self.fetch_target.is_some() {
            return false;
        }
        let mut doors = 0;
        let mut keys = 0;
        for cell in &self.cells {
            match *cell {
                CellKind::Lava | CellKind::Ball { .. } => return false,
                CellKind::Door { color, .. } => {
                    if color != Color::Yellow {
                        return false;
                    }
                    doors += 1;
                }
                CellKind::Key { color } => {
                    if color != Color::Yellow {
                        return false;
                    }
                    keys += 1;
                }
                _ => {}
            }
        }
        match self.carrying {
            Some(Item::Key(Color::Yellow)) => keys += 1,
            Some(_) => return false,
            None => {}
        }
        if doors != 1 || keys != 1 {
            return false;
        }
        let goal_ok = self.get(self.width - 2, self.height - 2) == CellKind::Goal
            || self.agent_pos == (self.width - 2, self.height - 2);
        let split_ok = (1..self.width - 1).any(|col| {
            (1..self.height - 1)
                .all(|row| matches!(self.get(col, row), CellKind::Wall | CellKind::Door { .. }))
        });
        goal_ok && split_ok
    }
}

/// Reward, termination and discount emitted by one transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardSignal {
    pub reward: f64,
    pub done: bool,
    pub discount: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_encoding_is_stable() {
        for (i, a) in Action::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(Action::from_index(i), Some(*a));
        }
        assert_eq!(Action::from_index(7), None);
    }

    #[test]
    fn turning_cycles() {
        let d = Direction::East;
        assert_eq!(d.left(), Direction::North);
        assert_eq!(d.right(), Direction::South);
        assert_eq!(d.left().left().left().left(), d);
    }

    #[test]
    fn walled_grid_has_border() {
        let g = GridState::walled(6, 6);
        assert_eq!(g.get(0, 3), CellKind::Wall);
        assert_eq!(g.get(3, 3), CellKind::Empty);
        assert_eq!(g.free_cells().len(), 16);
    }
}
