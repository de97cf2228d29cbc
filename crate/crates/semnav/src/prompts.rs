//! Prompt generation for the four chain-of-thought levels and parsing of
//! structured scorer replies.
//!
//! Templates live as external text fixtures (one file per level) with a
//! `[TARGET_OBJECT]` placeholder; the full level also carries a `[HISTORY]`
//! token that receives the rendered action history.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::AgentAction;
use crate::value_map::ActionScores;

pub const NO_COT_TEMPLATE: &str = include_str!("../templates/no_cot.txt");
pub const BASIC_COT_TEMPLATE: &str = include_str!("../templates/basic_cot.txt");
pub const INTERMEDIATE_COT_TEMPLATE: &str = include_str!("../templates/intermediate_cot.txt");
pub const FULL_COT_TEMPLATE: &str = include_str!("../templates/full_cot.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CoTLevel {
    #[value(name = "none")]
    #[serde(rename = "none")]
    NoCoT,
    Basic,
    Intermediate,
    Full,
}

impl CoTLevel {
    pub const ALL: [CoTLevel; 4] = [
        CoTLevel::NoCoT,
        CoTLevel::Basic,
        CoTLevel::Intermediate,
        CoTLevel::Full,
    ];

    pub fn template(&self) -> &'static str {
        match self {
            CoTLevel::NoCoT => NO_COT_TEMPLATE,
            CoTLevel::Basic => BASIC_COT_TEMPLATE,
            CoTLevel::Intermediate => INTERMEDIATE_COT_TEMPLATE,
            CoTLevel::Full => FULL_COT_TEMPLATE,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CoTLevel::NoCoT => "none",
            CoTLevel::Basic => "basic",
            CoTLevel::Intermediate => "intermediate",
            CoTLevel::Full => "full",
        }
    }
}

/// Response fields a prompt level requires; used to check that each level is
/// a strict superset of the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ResponseField {
    Scores,
    RecommendedAction,
    RoomLabel,
    TargetLikelihood,
    TargetFound,
}

pub fn required_fields(level: CoTLevel) -> &'static [ResponseField] {
    use ResponseField::*;
    match level {
        CoTLevel::NoCoT => &[Scores],
        CoTLevel::Basic => &[Scores, RecommendedAction],
        CoTLevel::Intermediate => &[Scores, RecommendedAction, RoomLabel, TargetLikelihood],
        CoTLevel::Full => &[Scores, RecommendedAction, RoomLabel, TargetLikelihood, TargetFound],
    }
}

#[derive(Debug, Clone)]
pub struct PromptRequest {
    pub level: CoTLevel,
    pub target_category: String,
    pub history_rendering: String,
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("target category must be non-empty")]
    EmptyTarget,
    #[error("fewer than 4 action scores recoverable from response: {raw:?}")]
    Parse { raw: String },
}

/// Render the template for the requested level with every `[TARGET_OBJECT]`
/// replaced; the full level additionally receives the history rendering (the
/// `[HISTORY]` line is dropped when the rendering is empty).
pub fn generate_prompt(req: &PromptRequest) -> Result<String, PromptError> {
    if req.target_category.is_empty() {
        return Err(PromptError::EmptyTarget);
    }
    let mut text = req
        .level
        .template()
        .replace("[TARGET_OBJECT]", &req.target_category);
    if req.level == CoTLevel::Full {
        if req.history_rendering.is_empty() {
            text = text.replace("[HISTORY]\n", "");
        } else {
            text = text.replace("[HISTORY]", &req.history_rendering);
        }
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub scores: ActionScores,
    pub target_found: bool,
    pub room_label: Option<String>,
    pub recommended_action: Option<AgentAction>,
    pub reasoning: String,
}

fn long_form_regex(action: &str) -> Regex {
    // Tolerates "- Go forward: 0.8", "**Go forward**: [0.8]", "go forward - 0.8".
    Regex::new(&format!(
        r"(?i){}\s*\**\s*[:\-]\s*\**\s*\[?\s*([0-9]*\.?[0-9]+)",
        action
    ))
    .unwrap()
}

struct ScoreRegexes {
    long: [Regex; 4],
    compact: [Regex; 4],
    target_found: Regex,
    room: [Regex; 2],
    recommended: Regex,
}

fn regexes() -> &'static ScoreRegexes {
    static CELL: OnceLock<ScoreRegexes> = OnceLock::new();
    CELL.get_or_init(|| ScoreRegexes {
        long: [
            long_form_regex(r"go\s+forward"),
            long_form_regex(r"go\s+backward"),
            long_form_regex(r"turn\s+left"),
            long_form_regex(r"turn\s+right"),
        ],
        compact: [
            Regex::new(r"(?i)(?:^|[\s,;(\[])F\s*:\s*([0-9]*\.?[0-9]+)").unwrap(),
            Regex::new(r"(?i)(?:^|[\s,;(\[])B\s*:\s*([0-9]*\.?[0-9]+)").unwrap(),
            Regex::new(r"(?i)(?:^|[\s,;(\[])L\s*:\s*([0-9]*\.?[0-9]+)").unwrap(),
            Regex::new(r"(?i)(?:^|[\s,;(\[])R\s*:\s*([0-9]*\.?[0-9]+)").unwrap(),
        ],
        target_found: Regex::new(r"(?i)have\s+you\s+found\s+the[^?:\n]*\??\**\s*:?\s*\**\s*\[?\s*(yes|no)")
            .unwrap(),
        room: [
            Regex::new(r"(?i)part\s+of\s+the\s+house\**\s*:\s*\**\s*\[?\s*([^\n\]*]+)").unwrap(),
            Regex::new(r"(?i)area\s+type\s*\**\s*:\s*\**\s*\[?\s*([^\n\]*]+)").unwrap(),
        ],
        recommended: Regex::new(r"(?i)(?:recommended|best)\s+action\**\s*:\s*\**\s*\[?\s*([^\n\]*]+)")
            .unwrap(),
    })
}

fn extract_score(text: &str, long: &Regex, compact: &Regex) -> Option<f64> {
    let m = long
        .captures(text)
        .or_else(|| compact.captures(text))?
        .get(1)?
        .as_str()
        .parse::<f64>()
        .ok()?;
    if !(0.0..=1.0).contains(&m) {
        log::warn!("out-of-range action score {m} clamped to [0, 1]");
    }
    Some(m.clamp(0.0, 1.0))
}

/// Parse a scorer reply: the four action scores (long or compact form),
/// the target-found flag, and the room label / recommended action when
/// present. Never panics on arbitrary input.
pub fn parse_response(text: &str) -> Result<ParsedResponse, PromptError> {
    let rx = regexes();
    let mut vals = [0.0_f64; 4];
    for i in 0..4 {
        match extract_score(text, &rx.long[i], &rx.compact[i]) {
            Some(v) => vals[i] = v,
            None => {
                return Err(PromptError::Parse {
                    raw: text.chars().take(2000).collect(),
                })
            }
        }
    }
    let target_found = rx
        .target_found
        .captures(text)
        .map(|c| c[1].eq_ignore_ascii_case("yes"))
        .unwrap_or(false);
    let room_label = rx
        .room
        .iter()
        .find_map(|r| r.captures(text))
        .map(|c| c[1].trim().to_string())
        .filter(|s| !s.is_empty() && !s.to_lowercase().starts_with("your "));
    let recommended_action = rx.recommended.captures(text).and_then(|c| {
        let s = c[1].to_lowercase();
        if s.contains("forward") {
            Some(AgentAction::Forward)
        } else if s.contains("backward") {
            Some(AgentAction::Backward)
        } else if s.contains("left") {
            Some(AgentAction::TurnLeft)
        } else if s.contains("right") {
            Some(AgentAction::TurnRight)
        } else if s.contains("stop") {
            Some(AgentAction::Stop)
        } else {
            None
        }
    });
    Ok(ParsedResponse {
        scores: ActionScores::new(vals[0], vals[1], vals[2], vals[3]),
        target_found,
        room_label,
        recommended_action,
        reasoning: text.to_string(),
    })
}

/// Render a reply in the full-CoT answer structure. Used by the stub server
/// and the round-trip tests.
pub fn render_response(
    scores: &ActionScores,
    target: &str,
    target_found: bool,
    room: &str,
    recommended: AgentAction,
    reasoning: &str,
) -> String {
    let action_name = match recommended {
        AgentAction::Forward => "Go forward",
        AgentAction::Backward => "Go backward",
        AgentAction::TurnLeft => "Turn left",
        AgentAction::TurnRight => "Turn right",
        AgentAction::Stop => "Stop",
    };
    format!(
        "1. **Part of the House**: {room}\n\
         - Reasoning: {reasoning}\n\
         2. **Can a {target} Be Found Here?**: {found}\n\
         - Reasoning: {reasoning}\n\
         3. **Have You Found the {target}?**: {found}\n\
         4. **Recommended Action**: {action_name}\n\
         - Reasoning: {reasoning}\n\
         5. **Probability Scores for Each Action**:\n\
         - Go forward: {f}\n\
         - Go backward: {b}\n\
         - Turn right: {r}\n\
         - Turn left: {l}\n",
        found = if target_found { "Yes" } else { "No" },
        f = scores.forward,
        b = scores.backward,
        r = scores.right,
        l = scores.left,
    )
}
