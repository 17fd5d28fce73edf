use super::{Cell, GridWorld};
use crate::error::{Error, Result};

/// The shipped 30-state maze.
pub const CANONICAL_LAYOUT: &str = include_str!("../../layouts/canonical.grid");

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Layout { line, message: message.into() }
}

fn parse_cell(line: usize, text: &str) -> Result<Cell> {
    let (r, c) = text
        .split_once(',')
        .ok_or_else(|| err(line, format!("expected `row,col`, got `{text}`")))?;
    let row = r.trim().parse().map_err(|_| err(line, format!("bad row `{r}`")))?;
    let col = c.trim().parse().map_err(|_| err(line, format!("bad column `{c}`")))?;
    Ok(Cell::new(row, col))
}

/// Parses the plain-text layout format:
///
/// ```text
/// W H
/// <H rows of W characters from . # S G>
/// wall r1,c1 r2,c2
/// ```
///
/// Wall coordinates are 0-based `row,col`. Errors carry 1-based line numbers.
pub fn parse_layout(text: &str) -> Result<GridWorld> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty layout"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(err(hline, "header must be `W H`"));
    }
    let width: usize = dims[0].parse().map_err(|_| err(hline, "bad width"))?;
    let height: usize = dims[1].parse().map_err(|_| err(hline, "bad height"))?;
    if width == 0 || height == 0 {
        return Err(err(hline, "width and height must be positive"));
    }

    let mut blocked = Vec::with_capacity(width * height);
    let mut start = None;
    let mut goal = None;
    for row in 0..height {
        let (n, line) = lines
            .next()
            .ok_or_else(|| err(hline + row + 1, format!("missing grid row {row}")))?;
        let chars: Vec<char> = line.chars().collect();
        if chars.len() != width {
            return Err(err(n, format!("expected {width} characters, got {}", chars.len())));
        }
        for (col, ch) in chars.into_iter().enumerate() {
            let here = Cell::new(row, col);
            match ch {
                '.' => blocked.push(false),
                '#' => blocked.push(true),
                'S' | 'G' => {
                    let slot = if ch == 'S' { &mut start } else { &mut goal };
                    if slot.is_some() {
                        return Err(err(n, format!("duplicate `{ch}`")));
                    }
                    *slot = Some(here);
                    blocked.push(false);
                }
                other => return Err(err(n, format!("unexpected character `{other}`"))),
            }
        }
    }
    let start = start.ok_or_else(|| err(hline, "layout has no start `S`"))?;
    let goal = goal.ok_or_else(|| err(hline, "layout has no goal `G`"))?;

    let mut walls = Vec::new();
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "wall" {
            return Err(err(n, format!("expected `wall r1,c1 r2,c2`, got `{line}`")));
        }
        let a = parse_cell(n, parts[1])?;
        let b = parse_cell(n, parts[2])?;
        if a.row >= height || a.col >= width || b.row >= height || b.col >= width {
            return Err(err(n, "wall endpoint outside the grid"));
        }
        if !a.is_adjacent(b) {
            return Err(err(n, "wall endpoints are not orthogonally adjacent"));
        }
        walls.push((a, b));
    }

    GridWorld::new(width, height, blocked, walls, start, goal)
}
