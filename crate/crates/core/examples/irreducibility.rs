//! Strong irreducibility and aperiodic blocks.

use groupshift::group::{FiniteSubset, Group};
use groupshift::shift::{check_strong_irreducibility, find_aperiodic_block, SubshiftSpec};

fn main() -> groupshift::Result<()> {
    let x = SubshiftSpec::no33();
    println!("no 33: {:?}", check_strong_irreducibility(&x, 3, 1_000_000)?);
    // D = {0} is too small: 1 followed by 1 cannot sit at distance 1.
    let tight = SubshiftSpec::golden_mean(FiniteSubset::singleton(Group::Z.identity()))?;
    println!("golden mean, D={{0}}: holds = {}", check_strong_irreducibility(&tight, 2, 1_000_000)?.holds());
    let p = FiniteSubset::interval(-2, 3).difference(&FiniteSubset::interval(0, 1));
    let b = find_aperiodic_block(&x, &p, 8)?;
    println!("first {{±1,±2}}-aperiodic block: {:?}", b.values());
    Ok(())
}
