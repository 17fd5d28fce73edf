//! JSON messages exchanged over the session WebSocket, one per frame.

use serde::{Deserialize, Serialize};

use tamer_core::heatmap::HeatMap;
use tamer_core::mdp::{Action, Cell, GridWorld};
use tamer_core::session::{Session, SessionConfig};

/// Static geometry a client needs to draw the board.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridView {
    pub width: usize,
    pub height: usize,
    pub start: [usize; 2],
    pub goal: [usize; 2],
    pub blocked: Vec<[usize; 2]>,
    /// Pairs of adjacent cells with a wall between them.
    pub walls: Vec<[[usize; 2]; 2]>,
}

fn rc(c: Cell) -> [usize; 2] {
    [c.row, c.col]
}

impl GridView {
    pub fn of(grid: &GridWorld) -> Self {
        let blocked = (0..grid.height())
            .flat_map(|r| (0..grid.width()).map(move |c| Cell::new(r, c)))
            .filter(|c| grid.is_blocked(*c))
            .map(rc)
            .collect();
        GridView {
            width: grid.width(),
            height: grid.height(),
            start: rc(grid.start()),
            goal: rc(grid.goal()),
            blocked,
            walls: grid.walls().map(|(a, b)| [rc(a), rc(b)]).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub steps: usize,
    pub episodes: usize,
    pub positive: usize,
    pub negative: usize,
}

// serialized as soon as it is built, so the size spread does not matter
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State {
        /// Increases with every message a session emits.
        seq: u64,
        grid: GridView,
        agent_cell: [usize; 2],
        phase: String,
        episode: usize,
        /// Steps taken in the current episode.
        step: usize,
        total_steps: usize,
        running: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value_heatmap: Option<HeatMap>,
    },
    EpisodeEnd {
        seq: u64,
        episode: usize,
        steps: usize,
    },
    Metrics {
        seq: u64,
        totals: Totals,
    },
    Error {
        code: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn state(seq: u64, session: &Session, running: bool) -> Self {
        let value_heatmap = match session.phase() {
            tamer_core::session::Phase::Demonstrating => None,
            _ => session.heatmap("live").ok(),
        };
        ServerMessage::State {
            seq,
            grid: GridView::of(session.grid()),
            agent_cell: rc(session.grid().cell_of(session.current())),
            phase: session.phase().name().to_string(),
            episode: session.episode(),
            step: session.episode_step(),
            total_steps: session.total_steps(),
            running,
            value_heatmap,
        }
    }

    pub fn metrics(seq: u64, session: &Session) -> Self {
        let t = session.feedback_totals();
        ServerMessage::Metrics {
            seq,
            totals: Totals { steps: t.steps, episodes: session.episode(), positive: t.positive, negative: t.negative },
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error { code: code.to_string(), message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlCommand {
    /// Let the agent start acting.
    Start,
    SkipDemo,
    /// Throw the session away and begin again with the same configuration.
    Reset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    DemoKey { action: Action },
    Feedback { value: f64 },
    Control { cmd: ControlCommand },
}

/// Body of `POST /api/session`. Everything is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    /// Defaults to a live session with default parameters.
    pub config: Option<SessionConfig>,
    /// Layout text; the canonical layout when absent.
    pub layout: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: u64,
    pub phase: String,
}
