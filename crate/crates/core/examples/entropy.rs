//! Block counts and entropy estimates for the bundled one-dimensional shifts.

use groupshift::group::FiniteSubset;
use groupshift::shift::{count_blocks, entropy_estimate, SubshiftSpec};

fn main() -> groupshift::Result<()> {
    let golden = SubshiftSpec::golden_mean(FiniteSubset::interval(-1, 2))?;
    for (name, x, exact) in [
        ("golden mean", golden, (1.0 + 5f64.sqrt()) / 2.0),
        ("no 33", SubshiftSpec::no33(), (3.0 + 21f64.sqrt()) / 2.0),
    ] {
        let counts: Vec<String> = (1..=6)
            .map(|n| count_blocks(&x, &FiniteSubset::interval(0, n)).map(|c| c.to_string()))
            .collect::<groupshift::Result<_>>()?;
        println!(
            "{name:<12} counts {}  h(16) = {:.5}  log2 λ = {:.5}",
            counts.join(","),
            entropy_estimate(&x, 16)?,
            exact.log2()
        );
    }
    Ok(())
}
