//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero on any
//! failure.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use groupshift::factor::{build_factor_system, build_pi, verify_surjectivity, FactorConfig, FactorSystem};
use groupshift::group::{Elem, FiniteSubset, Group};
use groupshift::marker::{build_marker, nominal_window, verify_certificate, verify_marker_window};
use groupshift::pipeline::{run_pipeline, PipelineConfig};
use groupshift::shift::{count_blocks, default_budget, entropy_estimate, SubshiftSpec};
use groupshift::subsystem::{build_subsystem, sandwich, select_block_families, verify_entropy_bounds};
use groupshift::tiling::{adjust_to_exact, ow_quasitiling, verify_covering, verify_disjointness};
use groupshift::Error;

const GOLDEN_ENTROPY: f64 = 0.69424;
const GOLDEN_TOL: f64 = 0.05;
const NO33_ENTROPY: f64 = 1.9227;
const NO33_TOL: f64 = 0.06;
const ORACLE_TOL: f64 = 1e-4;
const ENTROPY_LIMIT: Duration = Duration::from_secs(10);
const INTERIOR_TRIPLES: usize = 1000;
const INTERIOR_LIMIT: Duration = Duration::from_secs(5);
const TILING_LIMIT: Duration = Duration::from_secs(30);
const SANDWICH_RANGE: (f64, f64) = (0.35, 0.65);
const SANDWICH_LIMIT: Duration = Duration::from_secs(60);
const MARKER_LIMIT: Duration = Duration::from_secs(120);
const FACTOR_LIMIT: Duration = Duration::from_secs(600);
const ROUND_TRIP_RATE: f64 = 1.0;

fn specs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs")
}

fn bundled(name: &str) -> SubshiftSpec {
    SubshiftSpec::from_json(&std::fs::read_to_string(specs_dir().join(name)).unwrap()).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Dominant eigenvalue of the 0/1 transfer matrix of a one-step SFT, by power
/// iteration.
fn transfer_entropy(alphabet: usize, forbidden_pairs: &[(usize, usize)]) -> f64 {
    let allowed = |a: usize, b: usize| !forbidden_pairs.contains(&(a, b));
    let mut v = vec![1.0f64; alphabet];
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let mut w = vec![0.0; alphabet];
        for (a, wa) in w.iter_mut().enumerate() {
            for (b, vb) in v.iter().enumerate() {
                if allowed(a, b) {
                    *wa += vb;
                }
            }
        }
        let norm = w.iter().cloned().fold(0.0, f64::max);
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda.log2()
}

/// Words of length `n` avoiding the forbidden pairs, by exhaustive listing.
fn brute_count(alphabet: usize, forbidden_pairs: &[(usize, usize)], n: usize) -> u64 {
    let mut total = 0u64;
    let mut word = vec![0usize; n];
    loop {
        if word.windows(2).all(|p| !forbidden_pairs.contains(&(p[0], p[1]))) {
            total += 1;
        }
        let mut i = 0;
        loop {
            if i == n {
                return total;
            }
            word[i] += 1;
            if word[i] < alphabet {
                break;
            }
            word[i] = 0;
            i += 1;
        }
    }
}

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (file, alphabet, pairs, reference, tol) in [
        ("golden_mean_Z.json", 2, vec![(1, 1)], GOLDEN_ENTROPY, GOLDEN_TOL),
        ("no33_Z.json", 4, vec![(3, 3)], NO33_ENTROPY, NO33_TOL),
    ] {
        let x = bundled(file);
        let start = Instant::now();
        let h = entropy_estimate(&x, 16).unwrap();
        let took = start.elapsed();
        let oracle = transfer_entropy(alphabet, &pairs);
        let counts_agree = (1..=12).all(|n| {
            count_blocks(&x, &FiniteSubset::interval(0, n as i64)).unwrap() == brute_count(alphabet, &pairs, n).into()
        });
        let ok = (h - oracle).abs() <= tol
            && (oracle - reference).abs() <= ORACLE_TOL
            && counts_agree
            && took < ENTROPY_LIMIT;
        pass &= ok;
        notes.push(format!(
            "{file}: h16={h:.5} oracle={oracle:.5} |Δ|={:.4} counts n≤12 {} ({took:.2?})",
            (h - oracle).abs(),
            if counts_agree { "exact" } else { "DIFFER" }
        ));
    }
    check(pass, notes.join("; "))
}

fn random_set(rng: &mut ChaCha8Rng, dim: usize, span: i64, max: usize) -> FiniteSubset {
    let n = rng.gen_range(0..=max);
    (0..n)
        .map(|_| Elem::new(&(0..dim).map(|_| rng.gen_range(-span..=span)).collect::<Vec<_>>()))
        .collect::<FiniteSubset>()
        .union(&FiniteSubset::singleton(Elem::zero(dim)))
}

/// `{g ∈ F : t + g ∈ F for all t ∈ D}` from the definition.
fn interior_oracle(f: &HashSet<Elem>, d: &[Elem]) -> HashSet<Elem> {
    f.iter().filter(|g| d.iter().all(|t| f.contains(&(*t + **g)))).copied().collect()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let (mut identity_ok, mut premise, mut bound_ok) = (0usize, 0usize, 0usize);
    for i in 0..INTERIOR_TRIPLES {
        let dim = 1 + i % 2;
        let side: Vec<i64> = (0..dim).map(|_| rng.gen_range(3..=if dim == 1 { 200 } else { 24 })).collect();
        let mut f = FiniteSubset::box_range(&vec![0; dim], &side);
        let holes = random_set(&mut rng, dim, side[0] / 2, 3);
        if rng.gen_bool(0.3) {
            f = f.difference(&holes.translate(Elem::new(&vec![side[0] / 2; dim])));
        }
        let d = random_set(&mut rng, dim, 2, 3);
        let k = random_set(&mut rng, dim, 2, 3);
        let fs: HashSet<Elem> = f.iter().copied().collect();
        let dk: Vec<Elem> = d.product(&k).iter().copied().collect();
        let lhs = interior_oracle(&fs, &dk);
        let fd = interior_oracle(&fs, d.as_slice());
        let rhs = interior_oracle(&fd, k.as_slice());
        let lib = f.d_interior(&d.product(&k));
        if lhs == rhs && lib.iter().copied().collect::<HashSet<_>>() == lhs && f.d_interior(&d).d_interior(&k) == lib {
            identity_ok += 1;
        }
        let eps = Ratio::new(rng.gen_range(1u64..20), 20);
        if !f.is_empty() && f.is_invariant(&d, eps / Ratio::from_integer(d.len() as u64)).unwrap() {
            premise += 1;
            if Ratio::from_integer(fd.len() as u64) >= (Ratio::from_integer(1) - eps) * Ratio::from_integer(f.len() as u64) {
                bound_ok += 1;
            }
        }
    }
    let took = start.elapsed();
    check(
        identity_ok == INTERIOR_TRIPLES && bound_ok == premise && premise > 0 && took < INTERIOR_LIMIT,
        format!("identity {identity_ok}/{INTERIOR_TRIPLES}, bound {bound_ok}/{premise} premises ({took:.2?})"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    for (dim, window, n) in [(1, FiniteSubset::interval(0, 400), 4usize), (2, FiniteSubset::cube(2, 100), 3)] {
        for delta in [Ratio::new(1u64, 10), Ratio::new(1, 5), Ratio::new(1, 4)] {
            let q = ow_quasitiling(delta, n, &window).unwrap();
            let largest = q.shapes.iter().max_by_key(|s| s.len()).unwrap();
            let interior = window.d_interior(&largest.union(&largest.inverse()));
            let covering = verify_covering(&q, &interior).unwrap();
            let disjoint = verify_disjointness(&q, delta);
            let k = FiniteSubset::cube(dim, 2);
            let (exact, _) = adjust_to_exact(&q, &k, delta, &window, 4 * (n + q.shapes.len()) as i64).unwrap();
            let mut hits: HashMap<Elem, usize> = HashMap::new();
            for t in &exact.tiles {
                for c in exact.tile_set(t).iter() {
                    *hits.entry(*c).or_default() += 1;
                }
            }
            let partition = hits.len() == window.len() && hits.values().all(|&h| h == 1);
            let same_centers = exact.centers() == q.centers();
            let ok = disjoint && covering >= Ratio::from_integer(1) - delta && partition && same_centers;
            pass &= ok;
            notes.push(format!(
                "Z{} δ={delta}: cover {:.3}{}",
                if dim == 1 { "" } else { "²" },
                *covering.numer() as f64 / *covering.denom() as f64,
                if ok { "" } else { " FAIL" }
            ));
        }
    }
    let took = start.elapsed();
    check(pass && took < TILING_LIMIT, format!("{} ({took:.2?})", notes.join(", ")))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let x = bundled("full2_Z.json");
    let tiling = groupshift::tiling::periodic_tiling(1, 2).unwrap();
    let sel = select_block_families(&x, tiling, 0.4, 0.6, 0.02, &x.d).unwrap();
    let y = build_subsystem(&x, sel);
    let mut pass = true;
    let mut notes = Vec::new();
    for n in [20, 30] {
        let s = sandwich(&y, n, default_budget()).unwrap();
        pass &= s.lower_holds && s.upper_holds;
        notes.push(format!("n={n}: {} ≤ {} ≤ {}", s.lower, s.count, s.upper_translates));
    }
    let e = verify_entropy_bounds(&y, 0.4, 0.6, 30, default_budget()).unwrap();
    let h = e.estimate.unwrap_or(f64::NAN);
    pass &= (SANDWICH_RANGE.0..=SANDWICH_RANGE.1).contains(&h);
    let took = start.elapsed();
    check(pass && took < SANDWICH_LIMIT, format!("{}; h(Y,30)={h:.4} ({took:.2?})", notes.join("; ")))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let x = bundled("no33_Z.json");
    let cfg = FactorConfig::for_group(Group::Z);
    let (xw, gap) = groupshift::factor::gap_subsystem(&x, 2, &cfg).unwrap();
    let cert = build_marker(&xw, &gap.y, cfg.marker).unwrap();
    let verified = verify_certificate(&cert, &xw).is_ok();
    let names: String = cert.conditions.conditions.iter().map(|c| c.name).collect();
    let first_thirteen = ('a'..='m').all(|n| cert.conditions.conditions.iter().any(|c| c.name == n && c.holds));
    let window = nominal_window(&cert);
    let extent_ok = window.bbox().map(|(lo, hi)| hi.coord(0) - lo.coord(0) + 1) == Some(4 * cert.k().extent());
    let w = verify_marker_window(&cert, &xw, &gap.y, &window).unwrap();
    let took = start.elapsed();
    check(
        verified && first_thirteen && cert.conditions.all_hold() && extent_ok && w.passed() && took < MARKER_LIMIT,
        format!(
            "conditions ({names}) all hold: {}; window {} cells, {} offsets, {} violations ({took:.2?})",
            cert.conditions.all_hold(),
            window.len(),
            w.offsets_tested,
            w.violations.len() + w.tile_violations.len() + w.self_overlap_violations.len()
        ),
    )
}

fn criterion_6(one: &FactorSystem, two: &FactorSystem, build_time: Duration) -> Outcome {
    let start = Instant::now();
    let r1 = verify_surjectivity(one, 100, 7).unwrap();
    let r2 = verify_surjectivity(two, 20, 7).unwrap();
    let took = start.elapsed() + build_time;
    let pass = r1.match_rate() >= ROUND_TRIP_RATE
        && r2.match_rate() >= ROUND_TRIP_RATE
        && r1.passed()
        && r2.passed()
        && one.params.window.len() == 40
        && two.params.window.len() == 144
        && took < FACTOR_LIMIT;
    check(
        pass,
        format!(
            "Z: {}/{} symbols over 100 trials, markers unique {}; Z²: {}/{} over 20 trials, markers unique {} ({took:.2?})",
            r1.symbols_matched,
            r1.symbols_checked,
            r1.marker_unique_all,
            r2.symbols_matched,
            r2.symbols_checked,
            r2.marker_unique_all
        ),
    )
}

fn criterion_7(systems: &[(&str, &FactorSystem)]) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, fs) in systems {
        let p = &fs.params;
        let h = p.gap.entropy_y;
        // smallest N with log₂N ≥ h(Y)
        let n = (h.exp2() - 1e-9).ceil() as u32;
        let tile = fs.tiles.iter().find(|t| t.pi.is_some()).unwrap();
        let k = p.marker.k().translate(tile.marker_at);
        let ks = p.kstar.translate(tile.marker_at);
        let ok_n = build_pi(&p.gap.y, &tile.cells, &p.marker.d, &k, &ks, p.n_symbols).is_ok();
        let shortfall = matches!(
            build_pi(&p.gap.y, &tile.cells, &p.marker.d, &k, &ks, n),
            Err(Error::Shortfall(_))
        );
        pass &= ok_n && shortfall && (n as f64).log2() >= h;
        notes.push(format!("{name}: h(Y)={h:.4}, N={} builds, N={n} shortfall {shortfall}", p.n_symbols));
    }
    check(pass, notes.join("; "))
}

fn criterion_8() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path| {
        let mut cfg = PipelineConfig::from_spec_file(&specs_dir().join("no33_Z.json"), 2, dir).unwrap();
        cfg.trials = 20;
        run_pipeline(&cfg).unwrap()
    };
    let (ra, rb) = (run(a.path()), run(b.path()));
    let mut identical = ra.artifacts.len() == rb.artifacts.len();
    for (pa, pb) in ra.artifacts.iter().zip(&rb.artifacts) {
        identical &= pa.file_name() == pb.file_name() && std::fs::read(pa).unwrap() == std::fs::read(pb).unwrap();
    }
    check(
        identical && ra.passed,
        format!("{} artifacts byte-identical: {identical}", ra.artifacts.len()),
    )
}

fn main() {
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    let mut record = |id: u8, name: &'static str, o: Outcome| {
        println!("{} [{id}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    record(1, "entropy oracle agreement", criterion_1());
    record(2, "interior identities", criterion_2());
    record(3, "quasitiling quality", criterion_3());
    record(4, "subsystem entropy sandwich", criterion_4());
    record(5, "marker certificate", criterion_5());

    let start = Instant::now();
    let one = build_factor_system(&bundled("no33_Z.json"), 2, &FactorConfig::for_group(Group::Z)).unwrap();
    let two = build_factor_system(&bundled("full3_Z2.json"), 2, &FactorConfig::for_group(Group::Z2)).unwrap();
    let built = start.elapsed();
    record(6, "factor round-trip", criterion_6(&one, &two, built));
    record(7, "strict-gap necessity", criterion_7(&[("no33 Z", &one), ("full3 Z²", &two)]));
    record(8, "determinism", criterion_8());

    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
