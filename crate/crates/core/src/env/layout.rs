//! Static kitchen terrain and the text format it is stored in.
//!
//! One character per cell:
//!
//! ```text
//! X counter   ' ' floor   P pot   O onion dispenser
//! D dish dispenser   S serving counter   1 / 2 player starts (on floor)
//! ```
//!
//! Lines must be of equal length, UTF-8, LF terminated.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pot cook duration used when a layout does not override it.
pub const DEFAULT_COOK_TIME: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Floor,
    Counter,
    Pot,
    OnionDispenser,
    DishDispenser,
    ServingCounter,
}

impl Cell {
    pub fn symbol(self) -> char {
        match self {
            Cell::Floor => ' ',
            Cell::Counter => 'X',
            Cell::Pot => 'P',
            Cell::OnionDispenser => 'O',
            Cell::DishDispenser => 'D',
            Cell::ServingCounter => 'S',
        }
    }

    fn name(self) -> &'static str {
        match self {
            Cell::Floor => "floor",
            Cell::Counter => "counter",
            Cell::Pot => "pot",
            Cell::OnionDispenser => "onion dispenser",
            Cell::DishDispenser => "dish dispenser",
            Cell::ServingCounter => "serving counter",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::East, Direction::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn offset(self) -> (i32, i32) {
        match self {
            Direction::North => (0, -1),
            Direction::South => (0, 1),
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
        }
    }
}

/// Grid coordinate, `x` to the east and `y` to the south.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub x: usize,
    pub y: usize,
}

impl Position {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Neighbouring cell in `dir`, or `None` when it would leave the grid.
    pub fn step(self, dir: Direction, width: usize, height: usize) -> Option<Position> {
        let (dx, dy) = dir.offset();
        let x = self.x as i32 + dx;
        let y = self.y as i32 + dy;
        if x < 0 || y < 0 || x as usize >= width || y as usize >= height {
            None
        } else {
            Some(Position::new(x as usize, y as usize))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartPosition {
    pub position: Position,
    pub orientation: Direction,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("layout is empty")]
    Empty,
    #[error("line {line}, column {column}: unknown cell character {found:?}")]
    MalformedCharacter { line: usize, column: usize, found: char },
    #[error("line {line}, column {column}: line has {column} cells but the first line has {expected}")]
    RaggedLine { line: usize, column: usize, expected: usize },
    #[error("line {line}, column {column}: expected exactly 2 start markers, found {found}")]
    StartCountMismatch { line: usize, column: usize, found: usize },
    #[error("line {line}, column {column}: start marker {marker:?} appears more than once")]
    DuplicateStart { line: usize, column: usize, marker: char },
    #[error("line {line}, column {column}: no {kind} in layout")]
    MissingCellKind { line: usize, column: usize, kind: &'static str },
    #[error("line {line}, column {column}: boundary cell must not be floor")]
    OpenBoundary { line: usize, column: usize },
}

/// Static kitchen description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub name: String,
    pub width: usize,
    pub height: usize,
    terrain: Vec<Cell>,
    /// Index 0 is the blue chef, index 1 the green chef.
    pub start_positions: [StartPosition; 2],
    pub cook_time: u32,
    /// Whether shaped training rewards apply on this layout.
    pub shaping_enabled: bool,
    pots: Vec<Position>,
    counters: Vec<Position>,
}

impl Layout {
    pub fn cell(&self, pos: Position) -> Cell {
        self.terrain[pos.y * self.width + pos.x]
    }

    pub fn cells(&self) -> impl Iterator<Item = (Position, Cell)> + '_ {
        self.terrain.iter().enumerate().map(move |(i, &c)| (Position::new(i % self.width, i / self.width), c))
    }

    pub fn num_cells(&self) -> usize {
        self.terrain.len()
    }

    pub fn cell_index(&self, pos: Position) -> usize {
        pos.y * self.width + pos.x
    }

    /// Pot cells in row-major order; pot state is indexed the same way.
    pub fn pots(&self) -> &[Position] {
        &self.pots
    }

    /// Counter cells in row-major order; counter contents are indexed the same way.
    pub fn counters(&self) -> &[Position] {
        &self.counters
    }

    pub fn pot_index(&self, pos: Position) -> Option<usize> {
        self.pots.iter().position(|&p| p == pos)
    }

    pub fn counter_index(&self, pos: Position) -> Option<usize> {
        self.counters.iter().position(|&p| p == pos)
    }

    pub fn is_walkable(&self, pos: Position) -> bool {
        self.cell(pos) == Cell::Floor
    }

    pub fn with_cook_time(mut self, ticks: u32) -> Self {
        self.cook_time = ticks;
        self
    }

    /// Canonical text form, the inverse of [`parse_layout`].
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let pos = Position::new(x, y);
                let ch = match self.start_positions.iter().position(|s| s.position == pos) {
                    Some(0) => '1',
                    Some(_) => '2',
                    None => self.cell(pos).symbol(),
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Canonical form of layout text: LF endings, exactly one trailing newline.
pub fn canonical_text(text: &str) -> String {
    let mut out = String::new();
    for line in text.trim_end_matches('\n').split('\n') {
        out.push_str(line.trim_end_matches('\r'));
        out.push('\n');
    }
    out
}

pub fn parse_layout(name: &str, text: &str) -> Result<Layout, LayoutError> {
    let lines: Vec<&str> = text.trim_end_matches('\n').split('\n').map(|l| l.trim_end_matches('\r')).collect();
    if lines.is_empty() || lines[0].is_empty() {
        return Err(LayoutError::Empty);
    }
    let width = lines[0].chars().count();
    let height = lines.len();
    let mut terrain = Vec::with_capacity(width * height);
    let mut starts: [Option<Position>; 2] = [None, None];
    let mut start_count = 0;
    let mut last_start = (1, 1);

    for (y, line) in lines.iter().enumerate() {
        let mut count = 0;
        for (x, ch) in line.chars().enumerate() {
            count += 1;
            if x >= width {
                return Err(LayoutError::RaggedLine { line: y + 1, column: x + 1, expected: width });
            }
            let cell = match ch {
                'X' => Cell::Counter,
                ' ' => Cell::Floor,
                'P' => Cell::Pot,
                'O' => Cell::OnionDispenser,
                'D' => Cell::DishDispenser,
                'S' => Cell::ServingCounter,
                '1' | '2' => {
                    let slot = if ch == '1' { 0 } else { 1 };
                    if starts[slot].is_some() {
                        return Err(LayoutError::DuplicateStart { line: y + 1, column: x + 1, marker: ch });
                    }
                    starts[slot] = Some(Position::new(x, y));
                    start_count += 1;
                    last_start = (y + 1, x + 1);
                    Cell::Floor
                }
                other => return Err(LayoutError::MalformedCharacter { line: y + 1, column: x + 1, found: other }),
            };
            let on_boundary = x == 0 || y == 0 || x + 1 == width || y + 1 == height;
            if on_boundary && cell == Cell::Floor {
                return Err(LayoutError::OpenBoundary { line: y + 1, column: x + 1 });
            }
            terrain.push(cell);
        }
        if count != width {
            return Err(LayoutError::RaggedLine { line: y + 1, column: count, expected: width });
        }
    }

    let (Some(blue), Some(green)) = (starts[0], starts[1]) else {
        return Err(LayoutError::StartCountMismatch { line: last_start.0, column: last_start.1, found: start_count });
    };

    for kind in [Cell::Pot, Cell::OnionDispenser, Cell::DishDispenser, Cell::ServingCounter] {
        if !terrain.contains(&kind) {
            return Err(LayoutError::MissingCellKind { line: height, column: width, kind: kind.name() });
        }
    }

    let positions = |kind: Cell| {
        terrain
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == kind)
            .map(|(i, _)| Position::new(i % width, i / width))
            .collect::<Vec<_>>()
    };
    let pots = positions(Cell::Pot);
    let counters = positions(Cell::Counter);

    Ok(Layout {
        name: name.to_string(),
        width,
        height,
        start_positions: [
            StartPosition { position: blue, orientation: Direction::North },
            StartPosition { position: green, orientation: Direction::North },
        ],
        cook_time: DEFAULT_COOK_TIME,
        shaping_enabled: name != "forced_coordination",
        terrain,
        pots,
        counters,
    })
}

const BUNDLED: [(&str, &str); 5] = [
    ("cramped_room", include_str!("../../layouts/cramped_room.layout")),
    ("asymmetric_advantages", include_str!("../../layouts/asymmetric_advantages.layout")),
    ("coordination_ring", include_str!("../../layouts/coordination_ring.layout")),
    ("forced_coordination", include_str!("../../layouts/forced_coordination.layout")),
    ("counter_circuit", include_str!("../../layouts/counter_circuit.layout")),
];

/// Names of the five bundled kitchens.
pub fn bundled_layout_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled_layout_text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parse one of the bundled kitchens by name.
pub fn bundled_layout(name: &str) -> Option<Layout> {
    bundled_layout_text(name).map(|t| parse_layout(name, t).expect("bundled layouts are valid"))
}

pub fn bundled_layouts() -> Vec<Layout> {
    bundled_layout_names().filter_map(bundled_layout).collect()
}
