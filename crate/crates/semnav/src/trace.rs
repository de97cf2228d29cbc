//! JSONL episode traces: one header record, one record per step, and a
//! final record naming the map artifacts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::explorer::Phase;
use crate::history::AgentAction;
use crate::occupancy::CellIndex;
use crate::value_map::ActionScores;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Header {
        episode: usize,
        seed: u64,
        target_category: String,
        world_width: usize,
        world_height: usize,
        start: (f64, f64, f64),
        scorer: String,
    },
    Step {
        step: usize,
        pose: (f64, f64, f64),
        action: AgentAction,
        phase: Phase,
        frontier_count: usize,
        waypoint: Option<CellIndex>,
        scores: ActionScores,
        stagnation: bool,
        scorer_fallback: bool,
        moved: bool,
    },
    FinalMaps {
        occupancy_pgm: String,
        values_pgm: String,
        confidences_pgm: String,
        trajectory_ppm: String,
    },
}

/// Serializes records as JSON lines into any writer; drop flushes.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, record: &TraceRecord) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
