//! Evaluation metrics for sampled grasp wrench boundaries: relative length
//! error against the LP oracle, sparsity, ε and ε_t.

use std::io::Write;

use rstar::{PointDistance, RTree};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::oracle::{boundary_ray_gens, force_closure_simplex_check, generators};
use crate::task::TaskWrenchSpace;
use crate::wrench::{sample_unit_directions, BoundarySampleSet, WrenchSample};
use crate::{GwsError, Result, Vec6};

/// Samples shorter than this are treated as the origin.
pub const ZERO_NORM: f64 = 1e-9;

/// Default number of random 6-subset starts per target in the
/// force-closure filter.
pub const FC_TRIALS: usize = 1000;

/// Relative length error of a set of boundary points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RleReport {
    /// Mean of `(q − 1)/q` over evaluated, covered points.
    pub rle: f64,
    pub evaluated: usize,
    /// Points whose ray is not covered by the oracle (`q = 0`).
    pub uncovered: usize,
}

/// Relative length error of `points` against precomputed oracle
/// generators, evaluated on at most `max_points` non-zero points taken at
/// an even stride.
pub fn rle_points(points: &[Vec6], gens: &[Vec<Vec6>], max_points: usize) -> Result<RleReport> {
    let nonzero: Vec<&Vec6> = points.iter().filter(|w| w.norm() >= ZERO_NORM).collect();
    if nonzero.is_empty() {
        return Err(GwsError::numerical(
            "relative length error is undefined: all samples are zero",
        ));
    }
    if max_points == 0 {
        return Err(GwsError::invalid(
            "relative length error needs at least one evaluated point",
        ));
    }
    let stride = nonzero.len().div_ceil(max_points);
    let picked: Vec<&Vec6> = nonzero.into_iter().step_by(stride).collect();
    let qs: Vec<f64> = picked
        .par_iter()
        .map(|w| boundary_ray_gens(w, gens).map(|r| r.q))
        .collect::<Result<_>>()?;
    let covered: Vec<f64> = qs.iter().copied().filter(|&q| q > 0.0).collect();
    if covered.is_empty() {
        return Err(GwsError::numerical(
            "relative length error is undefined: no sample ray is covered",
        ));
    }
    let rle = covered.iter().map(|q| (q - 1.0) / q).sum::<f64>() / covered.len() as f64;
    Ok(RleReport {
        rle,
        evaluated: qs.len(),
        uncovered: qs.len() - covered.len(),
    })
}

/// Relative length error of an estimator output against the `d_oracle`
/// discretized ground truth built from the same (normalized) contacts.
pub fn rle(samples: &BoundarySampleSet, d_oracle: usize, max_points: usize) -> Result<RleReport> {
    let gens = generators(&samples.contacts, d_oracle)?;
    rle_points(&samples.wrenches(), &gens, max_points)
}

/// Unit directions of the non-zero samples, with exact duplicates removed.
fn unique_directions(points: &[Vec6]) -> Vec<[f64; 6]> {
    let mut dirs: Vec<[f64; 6]> = points
        .iter()
        .filter(|w| w.norm() >= ZERO_NORM)
        .map(|w| {
            let u = w.normalize();
            [u[0], u[1], u[2], u[3], u[4], u[5]]
        })
        .collect();
    dirs.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    dirs.dedup();
    dirs
}

/// Mean angle from `probes` uniform directions to the nearest sample
/// direction, without the force-closure filter.
pub fn sparsity_unfiltered(points: &[Vec6], probes: usize, seed: u64) -> Result<f64> {
    if probes == 0 {
        return Err(GwsError::invalid("sparsity needs at least one probe"));
    }
    let dirs = unique_directions(points);
    if dirs.is_empty() {
        return Err(GwsError::numerical(
            "sparsity is undefined: all samples are zero",
        ));
    }
    let tree = RTree::bulk_load(dirs);
    let probe_dirs = sample_unit_directions(probes, seed);
    let total: f64 = probe_dirs
        .par_iter()
        .map(|p| {
            let q = [p[0], p[1], p[2], p[3], p[4], p[5]];
            let nn = tree.nearest_neighbor(q).expect("tree is not empty");
            let chord = nn.distance_2(&q).max(0.0).sqrt();
            2.0 * (0.5 * chord).min(1.0).asin()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total / probes as f64)
}

/// Sparsity of a boundary sample set; `None` when the samples do not pass
/// the force-closure filter.
pub fn sparsity(points: &[Vec6], probes: usize, seed: u64) -> Result<Option<f64>> {
    if !force_closure_simplex_check(points, FC_TRIALS, seed)? {
        return Ok(None);
    }
    sparsity_unfiltered(points, probes, seed).map(Some)
}

/// Smallest sample magnitude given the outcome of the force-closure
/// filter; 0 when the grasp is not force closure.
pub fn epsilon_given_closure(points: &[Vec6], force_closure: bool) -> f64 {
    if !force_closure {
        return 0.0;
    }
    points
        .iter()
        .map(|w| w.norm())
        .fold(f64::INFINITY, f64::min)
}

/// Sample-based ε: the smallest boundary sample magnitude, or 0 when the
/// force-closure filter fails.
pub fn epsilon_from_samples(points: &[Vec6], seed: u64) -> Result<f64> {
    if points.is_empty() {
        return Err(GwsError::invalid("epsilon needs at least one sample"));
    }
    if points.len() < 6 {
        return Ok(0.0);
    }
    let fc = force_closure_simplex_check(points, FC_TRIALS, seed)?;
    Ok(epsilon_given_closure(points, fc))
}

/// Sample-based ε_t: the smallest magnitude among samples whose direction
/// `u_k` lies in the task sector. Returns 0 when any such sample has
/// non-positive support, and an error when no direction falls in the
/// sector (more samples are needed).
pub fn epsilon_t_from_samples(samples: &[WrenchSample], tws: &TaskWrenchSpace) -> Result<f64> {
    if samples.is_empty() {
        return Err(GwsError::invalid("epsilon_t needs at least one sample"));
    }
    let mut eps = f64::INFINITY;
    let mut any = false;
    for s in samples.iter().filter(|s| tws.contains_direction(&s.u)) {
        any = true;
        if s.u.dot(&s.w) <= ZERO_NORM {
            return Ok(0.0);
        }
        eps = eps.min(s.w.norm());
    }
    if !any {
        return Err(GwsError::numerical(
            "no sampled direction lies in the task sector; increase K",
        ));
    }
    Ok(eps)
}

/// One row of a benchmark report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub case_id: String,
    pub mesh: String,
    pub m: usize,
    pub mu: String,
    pub model: String,
    pub delta_deg: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub d_oracle: usize,
    /// Relative length error in units of 10⁻².
    pub rle_e2: f64,
    /// Sparsity in radians; empty when filtered out.
    pub sp_rad: Option<f64>,
    pub eps: f64,
    pub eps_t: Option<f64>,
    /// Median wall time in milliseconds; empty unless timing was requested.
    pub time_ms: Option<f64>,
    pub fc: bool,
}

/// Writes `rows` as CSV after a `#` comment line carrying provenance.
pub fn write_csv<W: Write>(out: W, comment: &str, rows: &[MetricReport]) -> Result<()> {
    let mut out = out;
    writeln!(out, "# {comment}").map_err(|e| GwsError::io("<csv>", e))?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| GwsError::invalid(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| GwsError::io("<csv>", e))?;
    Ok(())
}
