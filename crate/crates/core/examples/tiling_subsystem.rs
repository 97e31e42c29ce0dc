//! A periodic-tiling subsystem of the full 2-shift with entropy in (0.4, 0.6).

use groupshift::group::FiniteSubset;
use groupshift::group::Group;
use groupshift::shift::{default_budget, SubshiftSpec};
use groupshift::subsystem::{build_subsystem, sandwich, select_block_families, verify_entropy_bounds};
use groupshift::tiling::periodic_tiling;

fn main() -> groupshift::Result<()> {
    let x = SubshiftSpec::full(Group::Z, 2);
    let d = FiniteSubset::singleton(Group::Z.identity());
    let sel = select_block_families(&x, periodic_tiling(1, 2)?, 0.4, 0.6, 0.02, &d)?;
    println!("N_j = {} blocks per tile", sel.families[0].count);
    let y = build_subsystem(&x, sel);
    for n in [20, 30] {
        let s = sandwich(&y, n, default_budget())?;
        let e = verify_entropy_bounds(&y, 0.4, 0.6, n, default_budget())?;
        println!(
            "n={n}: {} ≤ {} ≤ {}  h ≈ {:.4}",
            s.lower,
            s.count,
            s.upper_translates,
            e.estimate.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
