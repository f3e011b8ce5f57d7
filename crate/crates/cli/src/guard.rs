//! Memory guard for full-quantum runs.
//!
//! The solvers assemble one coherence sector of the Liouvillian as a dense
//! complex matrix. The estimate counts the sector matrix, its factorization
//! and the propagator workspace per concurrently solved cell, plus one
//! shifted-system copy per worker thread. Runs over budget are refused
//! before anything is allocated.

use saser_core::lindblad::superop::MAX_DENSE_SECTOR;
use saser_core::HilbertSpace;

use crate::config::RunSpec;

const BYTES_PER_ENTRY: f64 = 16.0;
/// Dense sector-sized matrices alive at once in one cell solve.
const MATRICES_PER_CELL: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub cutoff: usize,
    /// Largest sector (k = −1, 0, +1) in matrix elements.
    pub sector_len: usize,
    pub bytes: f64,
}

impl Footprint {
    pub fn megabytes(&self) -> f64 {
        self.bytes / (1024.0 * 1024.0)
    }
}

/// Number of elements `|a⟩⟨b|` with charge difference `k`, counted without
/// building the sector.
pub fn sector_len(cutoff: usize, k: i64) -> usize {
    let space = HilbertSpace::new(cutoff.max(1)).expect("cutoff >= 1");
    let charges: Vec<i64> = (0..space.dim()).map(|i| space.charge(i)).collect();
    let max_q = charges.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0usize; max_q + 1];
    for q in charges {
        hist[q as usize] += 1;
    }
    (0..=max_q as i64)
        .filter_map(|q| {
            let q2 = q - k;
            (q2 >= 0 && (q2 as usize) <= max_q).then(|| hist[q as usize] * hist[q2 as usize])
        })
        .sum()
}

pub fn estimate(cutoff: usize, concurrent_cells: usize, threads: usize) -> Footprint {
    let n = (-1..=1).map(|k| sector_len(cutoff, k)).max().unwrap_or(0);
    let per_matrix = BYTES_PER_ENTRY * (n as f64).powi(2);
    let bytes = per_matrix * (MATRICES_PER_CELL * concurrent_cells.max(1) as f64 + threads.max(1) as f64);
    Footprint { cutoff, sector_len: n, bytes }
}

/// Refuses a specification whose full-quantum cells would not fit. The
/// message names the remedies.
/// The cutoff-convergence check solves again at a 25% larger cutoff.
pub fn checked_cutoff(cutoff: usize) -> usize {
    cutoff + (cutoff as f64 * 0.25).ceil().max(1.0) as usize
}

pub fn check_spec(spec: &RunSpec, threads: usize) -> std::result::Result<Footprint, String> {
    let nominal = spec.max_cutoff();
    let cutoff = if spec.options.cutoff_check { checked_cutoff(nominal) } else { nominal };
    let checked = if cutoff != nominal { " (including the cutoff-convergence solve)" } else { "" };
    let cells = spec
        .axes
        .iter()
        .filter(|a| saser_core::params::PARAM_NAMES.contains(&a.name.as_str()))
        .map(|a| a.points)
        .product::<usize>()
        .max(1);
    let fp = estimate(cutoff, cells.min(threads.max(1)), threads);
    let budget = spec.options.memory_budget_mb;
    let remedy = "use solver = semiclassical, a scaled-kappa desk preset (larger kappa, fewer phonons), or a lower fock_cutoff";
    if fp.sector_len > MAX_DENSE_SECTOR {
        return Err(format!(
            "full-quantum run refused: fock_cutoff = {cutoff}{checked} gives a Liouvillian sector of {} elements, above the dense limit of {MAX_DENSE_SECTOR}; {remedy}",
            fp.sector_len
        ));
    }
    if fp.megabytes() > budget {
        return Err(format!(
            "full-quantum run refused: estimated {:.0} MiB at fock_cutoff = {cutoff}{checked} exceeds options.memory_budget_mb = {budget}; {remedy}, or fewer --threads",
            fp.megabytes()
        ));
    }
    Ok(fp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use saser_core::lindblad::Sector;

    #[test]
    fn counted_sector_sizes_match_the_built_sectors() {
        for cutoff in [1, 4, 13] {
            let space = HilbertSpace::new(cutoff).unwrap();
            for k in -2..=2 {
                assert_eq!(sector_len(cutoff, k), Sector::coherence(space, k).len(), "cutoff {cutoff}, k {k}");
            }
        }
    }

    #[test]
    fn estimate_grows_quadratically_in_the_sector() {
        let a = estimate(20, 1, 1);
        let b = estimate(41, 1, 1);
        let ratio = b.bytes / a.bytes;
        let expect = (b.sector_len as f64 / a.sector_len as f64).powi(2);
        assert!((ratio - expect).abs() < 1e-12);
    }
}
