//! Seeded identity and inequality checks on random fields.

use pksns_core::lemmas::{format_report, lemma_suite, LemmaReport};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::io_err;
use crate::error::Result;
use crate::fft;

use super::write_json;

#[derive(Clone, Debug, Serialize)]
pub struct IdentityRow {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantRow {
    pub name: String,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub bound: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaSummary {
    pub seed: u64,
    pub trials: usize,
    pub passed: bool,
    pub identities: Vec<IdentityRow>,
    pub constants: Vec<ConstantRow>,
}

impl LemmaSummary {
    pub fn from_report(seed: u64, r: &LemmaReport) -> Self {
        Self {
            seed,
            trials: r.trials,
            passed: r.passed(),
            identities: r.identities.iter().map(|c| IdentityRow { name: c.name.clone(), max_error: c.max_error, tolerance: c.tolerance, passed: c.passed() }).collect(),
            constants: r
                .constants
                .iter()
                .map(|c| ConstantRow { name: c.name.clone(), min_ratio: c.min_ratio, max_ratio: c.max_ratio, bound: c.bound, passed: c.passed() })
                .collect(),
        }
    }
}

/// Writes `lemmas.txt` and `lemmas.json`.
pub fn check_lemmas(cfg: &RunConfig) -> Result<LemmaSummary> {
    let grid = fft::grid(cfg.grid_spec())?;
    let report = lemma_suite(cfg.lemmas.seed, &grid, cfg.lemmas.trials)?;
    let out = &cfg.output_dir;
    let path = out.join("lemmas.txt");
    std::fs::write(&path, format_report(&report)).map_err(io_err(&path))?;
    let summary = LemmaSummary::from_report(cfg.lemmas.seed, &report);
    write_json(&out.join("lemmas.json"), &summary)?;
    Ok(summary)
}
