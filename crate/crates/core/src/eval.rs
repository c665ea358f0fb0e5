//! Evaluation of frozen agents and export of the result tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::automaton::{MoveTrace, Way};
use crate::env::{EnvState, EpisodeConfig};
use crate::error::{Error, Result};
use crate::policy::{play_episode, Policy};
use crate::seed::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean undiscounted episode reward.
    pub avg_reward: f64,
    pub prediction_rate: f64,
    pub avg_episode_length: f64,
    pub episodes: u64,
}

/// Share of head moves per head and per direction. Only move actions count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadStats {
    pub heads: Vec<f64>,
    /// Fractions for left, stay, right.
    pub directions: [f64; 3],
    pub way: Way,
    pub moves: u64,
}

impl HeadStats {
    pub fn from_trace(trace: &MoveTrace, way: Way) -> Self {
        let total = trace.total();
        let share = |count: u64| if total == 0 { 0.0 } else { count as f64 / total as f64 };
        Self {
            heads: trace.head_moves.iter().map(|&c| share(c)).collect(),
            directions: trace.direction_moves.map(share),
            way,
            moves: total,
        }
    }
}

/// Runs `episodes` fresh episodes and aggregates rewards, verdicts, lengths,
/// and head moves.
pub fn evaluate<P: Policy + ?Sized>(
    policy: &mut P,
    config: &EpisodeConfig,
    episodes: usize,
    rng: &mut Rng,
) -> (EvalReport, HeadStats) {
    assert!(episodes > 0, "evaluation needs at least one episode");
    let mut reward = 0.0;
    let mut correct = 0usize;
    let mut length = 0usize;
    let mut moves = MoveTrace::new(config.profile.heads);
    for _ in 0..episodes {
        let (mut state, obs) = EnvState::reset(config, rng);
        let summary = play_episode(policy, &mut state, obs, rng);
        reward += summary.reward;
        correct += summary.correct as usize;
        length += summary.length;
        for (total, c) in moves.head_moves.iter_mut().zip(&summary.moves.head_moves) {
            *total += c;
        }
        for (total, c) in moves.direction_moves.iter_mut().zip(&summary.moves.direction_moves) {
            *total += c;
        }
    }
    let n = episodes as f64;
    let report = EvalReport {
        avg_reward: reward / n,
        prediction_rate: correct as f64 / n,
        avg_episode_length: length as f64 / n,
        episodes: episodes as u64,
    };
    (report, HeadStats::from_trace(&moves, config.profile.way))
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: String,
    pub report: EvalReport,
    pub stats: HeadStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

pub const CSV_HEADER: [&str; 10] = [
    "model",
    "avg_reward",
    "prediction_rate",
    "avg_episode_length",
    "h1",
    "h2",
    "h3",
    "left",
    "stay",
    "right",
];

fn csv_record(row: &ModelResult) -> Vec<String> {
    let mut record = vec![
        row.model.clone(),
        row.report.avg_reward.to_string(),
        row.report.prediction_rate.to_string(),
        row.report.avg_episode_length.to_string(),
    ];
    // heads beyond the profile and the left column of one-way agents stay blank
    for h in 0..3 {
        record.push(row.stats.heads.get(h).map(f64::to_string).unwrap_or_default());
    }
    for (i, share) in row.stats.directions.iter().enumerate() {
        if i == 0 && row.stats.way == Way::OneWay {
            record.push(String::new());
        } else {
            record.push(share.to_string());
        }
    }
    record
}

pub fn render_csv(rows: &[ModelResult]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER)?;
    for row in rows {
        writer.write_record(csv_record(row))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_json(rows: &[ModelResult]) -> String {
    serde_json::to_string_pretty(rows).expect("results serialize")
}

/// Writes result rows; output depends only on the rows.
pub fn export_report(rows: &[ModelResult], path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => render_csv(rows)?,
        ReportFormat::Json => render_json(rows),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Two-column `x y` text, one point per line.
pub fn write_curve(points: impl IntoIterator<Item = (f64, f64)>, path: &Path) -> Result<()> {
    let mut text = String::new();
    for (x, y) in points {
        writeln!(text, "{x} {y}").expect("writing to a string");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
