//! Factor map from the full 3-shift on Z² onto the full 2-shift: encode a
//! target on a 12×12 window and decode it back.

use groupshift::factor::{build_factor_system, verify_surjectivity, FactorConfig};
use groupshift::group::Group;
use groupshift::shift::{Configuration, SubshiftSpec};

fn main() -> groupshift::Result<()> {
    let x = SubshiftSpec::full(Group::Z2, 3);
    let fs = build_factor_system(&x, 2, &FactorConfig::for_group(Group::Z2))?;
    let p = &fs.params;
    println!("side {}, code window radius {}, {} tiles on the canvas", p.base, p.rho, fs.tiles.len());

    let w = p.window.clone();
    let checker: Vec<u8> = w.iter().map(|g| ((g.coord(0) / 3 + g.coord(1) / 3) % 2) as u8).collect();
    let z = Configuration::new(w.clone(), checker)?;
    let pre = fs.build_preimage(&z)?;
    let back = fs.apply_code_window(&pre, &w)?;
    for row in (0..12).rev() {
        let line: String = (0..12)
            .map(|col| if back.get(&groupshift::group::Elem::z2(col, row)) == Some(1) { '#' } else { '.' })
            .collect();
        println!("{line}");
    }
    assert_eq!(back, z);

    let r = verify_surjectivity(&fs, 20, 7)?;
    println!("20 random targets: {:.1}% symbols, markers unique {}", 100.0 * r.match_rate(), r.marker_unique_all);
    Ok(())
}
