//! State-value grids with cells labelled by row and column:
//! `X` counts rows from the top, `Y` counts columns from the left, both from 1.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Cell, GridWorld, StateId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub tag: String,
    /// Total agent steps taken when the snapshot was made.
    pub step: usize,
    pub episode: usize,
    /// `X1`, `X2`, ... one per grid row.
    pub rows: Vec<String>,
    /// `Y1`, `Y2`, ... one per grid column.
    pub columns: Vec<String>,
    /// `V(s)` per cell, row-major; `None` for blocked cells.
    pub values: Vec<Vec<Option<f64>>>,
}

impl HeatMap {
    pub fn from_values(grid: &GridWorld, values: &[f64], tag: &str, step: usize, episode: usize) -> Result<Self> {
        if values.len() != grid.num_states() {
            return Err(Error::LengthMismatch { expected: grid.num_states(), actual: values.len() });
        }
        let grid_values = (0..grid.height())
            .map(|row| {
                (0..grid.width())
                    .map(|col| grid.state_of(Cell::new(row, col)).map(|s| values[s.index()]))
                    .collect()
            })
            .collect();
        Ok(HeatMap {
            tag: tag.to_string(),
            step,
            episode,
            rows: (1..=grid.height()).map(|r| format!("X{r}")).collect(),
            columns: (1..=grid.width()).map(|c| format!("Y{c}")).collect(),
            values: grid_values,
        })
    }

    pub fn get(&self, cell: Cell) -> Option<f64> {
        self.values.get(cell.row)?.get(cell.col).copied().flatten()
    }

    /// Values in state order, for comparing against a value table.
    pub fn state_values(&self, grid: &GridWorld) -> Vec<f64> {
        grid.states().map(|s| self.get(grid.cell_of(s)).unwrap_or(f64::NAN)).collect()
    }

    pub fn value_of(&self, grid: &GridWorld, s: StateId) -> Option<f64> {
        self.get(grid.cell_of(s))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Fixed-width table, blocked cells shown as `#`.
    pub fn render(&self) -> String {
        let mut out = format!("{} (step {}, episode {})\n", self.tag, self.step, self.episode);
        out.push_str("    ");
        for c in &self.columns {
            out.push_str(&format!("{c:>9}"));
        }
        out.push('\n');
        for (label, row) in self.rows.iter().zip(&self.values) {
            out.push_str(&format!("{label:<4}"));
            for v in row {
                match v {
                    Some(v) => out.push_str(&format!("{v:>9.4}")),
                    None => out.push_str(&format!("{:>9}", "#")),
                }
            }
            out.push('\n');
        }
        out
    }
}
