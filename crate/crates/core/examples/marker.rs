//! Marker block for the no-33 shift against its gap subsystem for N = 2.

use groupshift::factor::{gap_subsystem, FactorConfig};
use groupshift::marker::{build_marker, nominal_window, verify_certificate, verify_marker_window, MarkerOptions};
use groupshift::group::Group;
use groupshift::shift::SubshiftSpec;

fn main() -> groupshift::Result<()> {
    let (x, gap) = gap_subsystem(&SubshiftSpec::no33(), 2, &FactorConfig::for_group(Group::Z))?;
    println!("Y forbids {:?} additionally; h(Y) ≈ {:.4}", gap.extra.values(), gap.entropy_y);
    let cert = build_marker(&x, &gap.y, MarkerOptions::default())?;
    verify_certificate(&cert, &x)?;
    println!("B = {:?}, |K| = {}, c2 = {:?}, c3 = {:?}", cert.b.values(), cert.k().len(), cert.c2, cert.c3);
    for c in &cert.conditions.conditions {
        print!("({}) {}  ", c.name, if c.holds { "ok" } else { "FAILS" });
    }
    println!();
    let report = verify_marker_window(&cert, &x, &gap.y, &nominal_window(&cert))?;
    println!("window check: {} offsets, passed {}", report.offsets_tested, report.passed());
    Ok(())
}
