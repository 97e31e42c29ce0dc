//! Ornstein–Weiss quasitiling of a Z² window and its exact adjustment.

use groupshift::group::FiniteSubset;
use groupshift::tiling::{adjust_to_exact, ow_quasitiling, quality, verify_covering, verify_disjointness};
use num_rational::Ratio;

fn main() -> groupshift::Result<()> {
    let delta = Ratio::new(1, 4);
    let window = FiniteSubset::cube(2, 60);
    let q = ow_quasitiling(delta, 6, &window)?;
    println!(
        "{} shapes, {} tiles, δ-disjoint {}, covering {}",
        q.shapes.len(),
        q.tiles.len(),
        verify_disjointness(&q, delta),
        verify_covering(&q, &window)?
    );
    let k = FiniteSubset::cube(2, 2);
    let (exact, report) = adjust_to_exact(&q, &k, delta, &window, 64)?;
    let qual = quality(&exact, &window, &k, delta)?;
    println!(
        "exact: {} tiles ({} invariant), covering {}, same centers {}",
        report.tiles,
        report.invariant_tiles,
        qual.covering_density,
        exact.centers() == q.centers()
    );
    Ok(())
}
