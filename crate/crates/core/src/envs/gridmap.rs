//! ASCII grid maps with wind zones.
//!
//! Map text uses `#` for walls, `.` for free cells, `S` for the start and `G`
//! for the goal. Wind zones are kept apart from the text as
//! `(row, col, exponent)` triples.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Wall,
    Start,
    Goal,
}

impl Cell {
    fn from_char(c: char) -> Option<Cell> {
        match c {
            '.' => Some(Cell::Free),
            '#' => Some(Cell::Wall),
            'S' => Some(Cell::Start),
            'G' => Some(Cell::Goal),
            _ => None,
        }
    }

    fn to_char(self) -> char {
        match self {
            Cell::Free => '.',
            Cell::Wall => '#',
            Cell::Start => 'S',
            Cell::Goal => 'G',
        }
    }
}

/// A free cell where the wind pushes west with probability `alpha^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize, u32)", into = "(usize, usize, u32)")]
pub struct WindZone {
    pub row: usize,
    pub col: usize,
    pub exponent: u32,
}

impl From<(usize, usize, u32)> for WindZone {
    fn from((row, col, exponent): (usize, usize, u32)) -> Self {
        WindZone { row, col, exponent }
    }
}

impl From<WindZone> for (usize, usize, u32) {
    fn from(z: WindZone) -> Self {
        (z.row, z.col, z.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    wind_zones: Vec<WindZone>,
}

impl GridMap {
    /// Parses map text and attaches wind zones.
    pub fn parse(text: &str, wind_zones: Vec<WindZone>) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let Some(&(_, first)) = lines.first() else {
            return Err(Error::MapParse {
                line: 1,
                message: "map is empty".into(),
            });
        };
        let width = first.chars().count();
        let mut cells = Vec::with_capacity(width * lines.len());
        for &(line, row) in &lines {
            if row.chars().count() != width {
                return Err(Error::MapParse {
                    line,
                    message: format!("expected {width} columns, found {}", row.chars().count()),
                });
            }
            for c in row.chars() {
                cells.push(Cell::from_char(c).ok_or_else(|| Error::MapParse {
                    line,
                    message: format!("unknown cell character {c:?}"),
                })?);
            }
        }
        let map = GridMap {
            width,
            height: lines.len(),
            cells,
            wind_zones,
        };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        let count = |kind| self.cells.iter().filter(|&&c| c == kind).count();
        let invalid = |message: String| Error::MapParse { line: 0, message };
        if count(Cell::Start) != 1 {
            return Err(invalid(format!(
                "expected exactly one start, found {}",
                count(Cell::Start)
            )));
        }
        if count(Cell::Goal) != 1 {
            return Err(invalid(format!(
                "expected exactly one goal, found {}",
                count(Cell::Goal)
            )));
        }
        for (k, z) in self.wind_zones.iter().enumerate() {
            if z.row >= self.height || z.col >= self.width {
                return Err(invalid(format!(
                    "wind zone ({}, {}) is off the map",
                    z.row, z.col
                )));
            }
            if self.cell(z.row, z.col) != Cell::Free {
                return Err(invalid(format!(
                    "wind zone ({}, {}) is not a free cell",
                    z.row, z.col
                )));
            }
            if z.exponent == 0 {
                return Err(invalid(format!(
                    "wind zone ({}, {}) has exponent 0",
                    z.row, z.col
                )));
            }
            if self.wind_zones[..k]
                .iter()
                .any(|o| (o.row, o.col) == (z.row, z.col))
            {
                return Err(invalid(format!(
                    "duplicate wind zone at ({}, {})",
                    z.row, z.col
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    pub fn wind_zones(&self) -> &[WindZone] {
        &self.wind_zones
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    fn find(&self, kind: Cell) -> usize {
        self.cells
            .iter()
            .position(|&c| c == kind)
            .expect("validated map has one start and one goal")
    }

    pub fn start(&self) -> usize {
        self.find(Cell::Start)
    }

    pub fn goal(&self) -> usize {
        self.find(Cell::Goal)
    }

    /// Wind exponent at a cell, if it lies in a zone.
    pub fn wind_exponent(&self, index: usize) -> Option<u32> {
        let (row, col) = self.position(index);
        self.wind_zones
            .iter()
            .find(|z| z.row == row && z.col == col)
            .map(|z| z.exponent)
    }

    /// Cell reached by moving one step, or `index` itself when the move hits
    /// a wall or the border.
    pub fn step(&self, index: usize, dir: Direction) -> usize {
        let (row, col) = self.position(index);
        let (dr, dc) = dir.offset();
        let r = row as isize + dr;
        let c = col as isize + dc;
        if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
            return index;
        }
        let next = self.index(r as usize, c as usize);
        if self.cells[next] == Cell::Wall {
            index
        } else {
            next
        }
    }

    /// Fewest deterministic moves from start to goal, if reachable.
    pub fn shortest_path_len(&self) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.n_cells()];
        let mut queue = VecDeque::from([self.start()]);
        dist[self.start()] = 0;
        while let Some(i) = queue.pop_front() {
            if i == self.goal() {
                return Some(dist[i]);
            }
            for dir in Direction::ALL {
                let j = self.step(i, dir);
                if dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        None
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|c| c.to_char()));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii())
    }
}

/// Cardinal moves in action-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::South,
        Direction::East,
        Direction::West,
    ];

    fn offset(self) -> (isize, isize) {
        match self {
            Direction::North => (-1, 0),
            Direction::South => (1, 0),
            Direction::East => (0, 1),
            Direction::West => (0, -1),
        }
    }

    pub fn action(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> char {
        match self {
            Direction::North => 'N',
            Direction::South => 'S',
            Direction::East => 'E',
            Direction::West => 'W',
        }
    }
}
