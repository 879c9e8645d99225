//! Tabular result files.
//!
//! Results are comma-separated with one header line and the columns
//! `policy,sources,tau,replication,episode,long_term_avg_aosi,mean_reward,config_fingerprint`.
//! `episode` is empty for rows that summarize a whole evaluation.

use std::fmt::Write as _;

pub const RESULTS_HEADER: &str =
    "policy,sources,tau,replication,episode,long_term_avg_aosi,mean_reward,config_fingerprint";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub policy: String,
    pub sources: usize,
    pub tau: f64,
    pub replication: usize,
    pub episode: Option<usize>,
    pub long_term_avg_aosi: f64,
    pub mean_reward: f64,
    pub config_fingerprint: String,
}

impl ResultRow {
    fn key(&self) -> (&str, usize, u64, usize, Option<usize>) {
        (
            &self.policy,
            self.sources,
            self.tau.to_bits(),
            self.replication,
            self.episode,
        )
    }

    pub fn to_csv_line(&self) -> String {
        let episode = self.episode.map(|e| e.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.policy,
            self.sources,
            self.tau,
            self.replication,
            episode,
            self.long_term_avg_aosi,
            self.mean_reward,
            self.config_fingerprint
        )
    }

    pub fn parse_csv_line(line: &str) -> Option<Self> {
        let c: Vec<&str> = line.trim().split(',').collect();
        if c.len() != 8 {
            return None;
        }
        Some(Self {
            policy: c[0].to_string(),
            sources: c[1].parse().ok()?,
            tau: c[2].parse().ok()?,
            replication: c[3].parse().ok()?,
            episode: if c[4].is_empty() {
                None
            } else {
                Some(c[4].parse().ok()?)
            },
            long_term_avg_aosi: c[5].parse().ok()?,
            mean_reward: c[6].parse().ok()?,
            config_fingerprint: c[7].to_string(),
        })
    }
}

/// Sorts by key columns so output order never depends on execution order.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
}

pub fn render_results(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{}", r.to_csv_line()).unwrap();
    }
    out
}

pub fn parse_results(text: &str) -> Option<Vec<ResultRow>> {
    let mut lines = text.lines();
    if lines.next()? != RESULTS_HEADER {
        return None;
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(ResultRow::parse_csv_line)
        .collect()
}
