//! Interiors and invariance of Følner boxes on Z².

use groupshift::group::{folner, FiniteSubset, Group};
use num_rational::Ratio;

fn main() -> groupshift::Result<()> {
    let d = Group::Z2.unit_star();
    let k = FiniteSubset::cube(2, 2);
    for n in [4, 8, 16, 32] {
        let f = folner(Group::Z2, n)?;
        let two_step = f.d_interior(&d).d_interior(&k);
        let one_step = f.d_interior(&d.product(&k));
        assert_eq!(two_step, one_step);
        println!(
            "n={n:>2}  |F|={:>4}  |F_D|={:>4}  (D,1/4)-invariant: {}",
            f.len(),
            f.d_interior(&d).len(),
            f.is_invariant(&d, Ratio::new(1, 4))?
        );
    }
    Ok(())
}
