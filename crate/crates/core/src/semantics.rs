//! Semantic similarity surrogate, importance, rate and latency.
//!
//! The similarity of a reconstruction is estimated from the number of
//! semantic symbols per word `k` and the received SNR. Two surrogates are
//! available:
//!
//! * parametric: `xi = (1 - exp(-r k)) / (1 + exp(-(snr_db - mid_db) / slope_db))`
//! * table: bilinear interpolation over a `(k, snr_db)` grid, clamped at the
//!   grid edges.
//!
//! Table files are plain comma-separated text. The first row holds the SNR
//! breakpoints in dB (its first cell is a free-form label), every following
//! row starts with a `k` value and continues with one similarity per SNR
//! breakpoint. Lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::channel::to_db;
use crate::config::SimilaritySpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SemanticsError {
    #[error("symbols per word {k} outside [1, {max}]")]
    SymbolsOutOfRange { k: u32, max: u32 },
    #[error("similarity {0} outside [0, 1]")]
    SimilarityOutOfRange(f64),
    #[error("negative SNR {0}")]
    NegativeSnr(f64),
    #[error("similarity table line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error("similarity table is not monotone: {0}")]
    NotMonotone(String),
    #[error("cannot read similarity table {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricSimilarity {
    pub ceil_rate: f64,
    pub mid_db: f64,
    pub slope_db: f64,
}

impl Default for ParametricSimilarity {
    fn default() -> Self {
        Self {
            ceil_rate: 0.6,
            mid_db: 2.0,
            slope_db: 2.0,
        }
    }
}

impl ParametricSimilarity {
    fn eval(&self, k: f64, snr_db: f64) -> f64 {
        let ceiling = 1.0 - (-self.ceil_rate * k).exp();
        let logistic = 1.0 / (1.0 + (-(snr_db - self.mid_db) / self.slope_db).exp());
        (ceiling * logistic).clamp(0.0, 1.0)
    }
}

/// Similarity samples on a rectangular `(k, snr_db)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    ks: Vec<f64>,
    snr_db: Vec<f64>,
    /// Row-major, one row per `k`.
    values: Vec<f64>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl SimilarityTable {
    pub fn ks(&self) -> &[f64] {
        &self.ks
    }

    pub fn snr_db(&self) -> &[f64] {
        &self.snr_db
    }

    pub fn new(ks: Vec<f64>, snr_db: Vec<f64>, values: Vec<f64>) -> Result<Self, SemanticsError> {
        let bad = |msg: &str| SemanticsError::Table {
            line: 0,
            msg: msg.to_string(),
        };
        if ks.is_empty() || snr_db.is_empty() {
            return Err(bad("empty grid"));
        }
        if values.len() != ks.len() * snr_db.len() {
            return Err(bad("body size does not match grid"));
        }
        if !strictly_increasing(&ks) || !strictly_increasing(&snr_db) {
            return Err(bad("breakpoints must be strictly increasing"));
        }
        if ks.iter().chain(&snr_db).any(|v| !v.is_finite()) {
            return Err(bad("breakpoints must be finite"));
        }
        if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(SemanticsError::SimilarityOutOfRange(v));
        }
        let table = Self { ks, snr_db, values };
        table.check_monotone()?;
        Ok(table)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.snr_db.len() + j]
    }

    fn check_monotone(&self) -> Result<(), SemanticsError> {
        let (nk, ns) = (self.ks.len(), self.snr_db.len());
        for i in 0..nk {
            for j in 0..ns {
                if i + 1 < nk && self.at(i + 1, j) < self.at(i, j) {
                    return Err(SemanticsError::NotMonotone(format!(
                        "decreases in k between k={} and k={} at {} dB",
                        self.ks[i],
                        self.ks[i + 1],
                        self.snr_db[j]
                    )));
                }
                if j + 1 < ns && self.at(i, j + 1) < self.at(i, j) {
                    return Err(SemanticsError::NotMonotone(format!(
                        "decreases in SNR between {} dB and {} dB at k={}",
                        self.snr_db[j],
                        self.snr_db[j + 1],
                        self.ks[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, SemanticsError> {
        let mut header: Option<Vec<f64>> = None;
        let mut ks = Vec::new();
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cells: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| SemanticsError::Table {
                    line,
                    msg: format!("not a number: {s:?}"),
                })
            };
            match &header {
                None => {
                    let snr = cells[1..]
                        .iter()
                        .map(|c| parse(c))
                        .collect::<Result<Vec<_>, _>>()?;
                    header = Some(snr);
                }
                Some(snr) => {
                    if cells.len() != snr.len() + 1 {
                        return Err(SemanticsError::Table {
                            line,
                            msg: format!("expected {} cells, found {}", snr.len() + 1, cells.len()),
                        });
                    }
                    ks.push(parse(cells[0])?);
                    for c in &cells[1..] {
                        values.push(parse(c)?);
                    }
                }
            }
        }
        let snr_db = header.ok_or(SemanticsError::Table {
            line: 0,
            msg: "missing header row".into(),
        })?;
        Self::new(ks, snr_db, values)
    }

    pub fn load(path: &Path) -> Result<Self, SemanticsError> {
        let text = std::fs::read_to_string(path).map_err(|e| SemanticsError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k");
        for s in &self.snr_db {
            write!(out, ",{s}").unwrap();
        }
        out.push('\n');
        for (i, k) in self.ks.iter().enumerate() {
            write!(out, "{k}").unwrap();
            for j in 0..self.snr_db.len() {
                write!(out, ",{}", self.at(i, j)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    fn bracket(grid: &[f64], x: f64) -> (usize, usize, f64) {
        let n = grid.len();
        if n == 1 || x <= grid[0] {
            return (0, 0, 0.0);
        }
        if x >= grid[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let hi = grid.partition_point(|&g| g <= x);
        let lo = hi - 1;
        (lo, hi, (x - grid[lo]) / (grid[hi] - grid[lo]))
    }

    fn eval(&self, k: f64, snr_db: f64) -> f64 {
        let (i0, i1, a) = Self::bracket(&self.ks, k);
        let (j0, j1, b) = Self::bracket(&self.snr_db, snr_db);
        let v00 = self.at(i0, j0);
        let v01 = self.at(i0, j1);
        let v10 = self.at(i1, j0);
        let v11 = self.at(i1, j1);
        let lo = v00 + b * (v01 - v00);
        let hi = v10 + b * (v11 - v10);
        (lo + a * (hi - lo)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityModel {
    Parametric(ParametricSimilarity),
    Table(SimilarityTable),
}

impl SimilarityModel {
    pub fn from_spec(spec: &SimilaritySpec) -> Result<Self, SemanticsError> {
        Ok(match spec {
            SimilaritySpec::Parametric {
                ceil_rate,
                mid_db,
                slope_db,
            } => SimilarityModel::Parametric(ParametricSimilarity {
                ceil_rate: *ceil_rate,
                mid_db: *mid_db,
                slope_db: *slope_db,
            }),
            SimilaritySpec::Table { path } => SimilarityModel::Table(SimilarityTable::load(path)?),
        })
    }

    /// Estimated similarity for `k >= 1` symbols per word at linear SNR.
    /// A zero SNR always yields zero similarity.
    pub fn similarity(&self, k: u32, snr_linear: f64) -> Result<f64, SemanticsError> {
        if k == 0 {
            return Err(SemanticsError::SymbolsOutOfRange { k, max: u32::MAX });
        }
        if snr_linear.is_nan() || snr_linear < 0.0 {
            return Err(SemanticsError::NegativeSnr(snr_linear));
        }
        if snr_linear == 0.0 {
            return Ok(0.0);
        }
        let db = to_db(snr_linear);
        Ok(match self {
            SimilarityModel::Parametric(p) => p.eval(k as f64, db),
            SimilarityModel::Table(t) => t.eval(k as f64, db),
        })
    }

    /// Samples the model on `ks x snr_db` as a table.
    pub fn tabulate(&self, ks: &[u32], snr_db: &[f64]) -> Result<SimilarityTable, SemanticsError> {
        let mut values = Vec::with_capacity(ks.len() * snr_db.len());
        for &k in ks {
            for &db in snr_db {
                values.push(self.similarity(k, crate::channel::from_db(db))?);
            }
        }
        SimilarityTable::new(
            ks.iter().map(|&k| k as f64).collect(),
            snr_db.to_vec(),
            values,
        )
    }
}

/// Semantic importance of a reconstruction with similarity `xi`.
pub fn importance(xi: f64) -> Result<f64, SemanticsError> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(SemanticsError::SimilarityOutOfRange(xi));
    }
    Ok(1.0 - xi)
}

/// Semantic rate `W I xi / (k L)` in semantic units per second.
pub fn semantic_rate(
    bandwidth_hz: f64,
    info_per_sentence: f64,
    k: u32,
    words: u32,
    xi: f64,
) -> f64 {
    bandwidth_hz * info_per_sentence * xi / (k as f64 * words as f64)
}

/// Time to deliver `sentences` sentences: `c k L / (W xi)`. The semantic
/// information per sentence cancels out. Infinite when `xi == 0`.
pub fn latency(sentences: u32, k: u32, words: u32, bandwidth_hz: f64, xi: f64) -> f64 {
    if xi <= 0.0 {
        return f64::INFINITY;
    }
    sentences as f64 * k as f64 * words as f64 / (bandwidth_hz * xi)
}

/// Everything known about one scheduled transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticLink {
    pub rate: f64,
    pub latency_s: f64,
    pub similarity: f64,
    pub importance: f64,
    pub symbols_per_word: u32,
}

/// Similarity model bound to the link-budget parameters of one run.
#[derive(Debug, Clone)]
pub struct Semantics {
    pub model: SimilarityModel,
    pub max_symbols_per_word: u32,
    pub bandwidth_hz: f64,
    pub words_per_sentence: u32,
    pub info_per_sentence: f64,
}

impl Semantics {
    pub fn from_config(cfg: &crate::config::SimConfig) -> Result<Self, SemanticsError> {
        Ok(Self {
            model: SimilarityModel::from_spec(&cfg.similarity_model)?,
            max_symbols_per_word: cfg.max_symbols_per_word,
            bandwidth_hz: cfg.bandwidth_hz,
            words_per_sentence: cfg.words_per_sentence,
            info_per_sentence: cfg.semantic_info_per_sentence,
        })
    }

    pub fn similarity(&self, k: u32, snr_linear: f64) -> Result<f64, SemanticsError> {
        if k == 0 || k > self.max_symbols_per_word {
            return Err(SemanticsError::SymbolsOutOfRange {
                k,
                max: self.max_symbols_per_word,
            });
        }
        self.model.similarity(k, snr_linear)
    }

    /// Link for a packet of `sentences` sentences with a given realized
    /// similarity.
    pub fn link_with_similarity(&self, sentences: u32, k: u32, xi: f64) -> SemanticLink {
        SemanticLink {
            rate: semantic_rate(
                self.bandwidth_hz,
                self.info_per_sentence,
                k,
                self.words_per_sentence,
                xi,
            ),
            latency_s: latency(sentences, k, self.words_per_sentence, self.bandwidth_hz, xi),
            similarity: xi,
            importance: 1.0 - xi,
            symbols_per_word: k,
        }
    }

    pub fn link(
        &self,
        sentences: u32,
        k: u32,
        snr_linear: f64,
    ) -> Result<SemanticLink, SemanticsError> {
        let xi = self.similarity(k, snr_linear)?;
        Ok(self.link_with_similarity(sentences, k, xi))
    }
}
