use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use groupshift::factor::{build_factor_system, gap_subsystem, verify_surjectivity, FactorConfig, FactorSystem};
use groupshift::group::{FiniteSubset, Group};
use groupshift::marker::{build_marker, nominal_window, verify_certificate, verify_marker_window, MarkerCertificate, MarkerOptions};
use groupshift::pipeline::{describe_failure, run_pipeline, PipelineConfig};
use groupshift::shift::{
    check_strong_irreducibility, count_blocks, default_budget, enumerate_blocks, entropy_estimate, fill_random,
    find_aperiodic_block, Configuration, EnumOptions, SubshiftSpec,
};
use groupshift::subsystem::{build_subsystem, sandwich, select_block_families, verify_entropy_bounds, BlockFamilySelection};
use groupshift::tiling::{adjust_to_exact, ow_quasitiling, periodic_tiling, quality, verify_disjointness, Quasitiling};
use groupshift::{Error, Result};

#[derive(Parser)]
#[command(name = "groupshift", version, about = "Subshifts on Z and Z^2, marker blocks and factor maps onto full shifts")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Node cap for enumeration and gluing (also read from GROUPSHIFT_BUDGET).
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Working window: `lo:hi` on Z, `lo:hi,lo:hi` on Z^2 (half-open).
    #[arg(long, global = true, allow_hyphen_values = true)]
    window: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Block-count entropy estimate on the n-th Følner set.
    Entropy {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 16)]
        n: usize,
    },
    /// Count or list admissible blocks on the window.
    Blocks {
        #[arg(long)]
        spec: PathBuf,
        /// Print at most this many blocks as JSON; 0 prints the count only.
        #[arg(long, default_value_t = 0)]
        limit: usize,
    },
    /// Bounded strong-irreducibility test.
    IrreducibilityCheck {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 3)]
        radius: usize,
    },
    /// First P-aperiodic block; P is --window without the identity.
    AperiodicFind {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 6)]
        radius: usize,
    },
    /// Ornstein–Weiss quasitiling of the window.
    Quasitile {
        #[arg(long, default_value = "1/4")]
        delta: String,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact tiling with the same centers.
    TileAdjust {
        #[arg(long)]
        tiling: PathBuf,
        /// Side of the cube K used for the invariance count.
        #[arg(long, default_value_t = 3)]
        k: i64,
        #[arg(long, default_value = "1/4")]
        eps: String,
        #[arg(long, default_value_t = 64)]
        horizon: i64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Disjointness and covering of a stored tiling.
    TileVerify {
        #[arg(long)]
        tiling: PathBuf,
        #[arg(long, default_value = "1/4")]
        delta: String,
        #[arg(long, default_value_t = 3)]
        k: i64,
    },
    #[command(subcommand)]
    Subsystem(SubsystemCmd),
    #[command(subcommand)]
    Marker(MarkerCmd),
    #[command(subcommand)]
    Factor(FactorCmd),
    /// Full pipeline with artifacts and report; exit 0 iff all checks pass.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "N", default_value_t = 2)]
        n: u32,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
        /// Skip the brute-force marker window check.
        #[arg(long)]
        skip_marker_window: bool,
    },
}

#[derive(Subcommand)]
enum SubsystemCmd {
    /// Periodic-tiling subsystem with entropy in (a, b).
    Build {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 0.02)]
        eta: f64,
        #[arg(long, default_value_t = 2)]
        side: i64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Counting sandwich and entropy bounds on F_n.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum MarkerCmd {
    /// Marker for X against the gap subsystem for N symbols.
    Build {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "N", default_value_t = 2)]
        n: u32,
        #[arg(long, default_value_t = 6)]
        radius: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-derive a certificate; optionally brute-force its window.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        #[arg(long = "N", default_value_t = 2)]
        n: u32,
        #[arg(long)]
        window_check: bool,
    },
}

#[derive(Subcommand)]
enum FactorCmd {
    /// Build and store a factor system.
    Build {
        #[arg(long)]
        subshift: PathBuf,
        #[arg(long = "N", default_value_t = 2)]
        n: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Preimage of a target (JSON array over the window, or random).
    Encode {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the code to a stored configuration; prints a JSON array.
    Decode {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Seeded round trips on the stored window.
    Verify {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

fn parse_window(s: &str) -> Result<FiniteSubset> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in s.split(',') {
        let (a, b) = part
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("window axis `{part}` is not lo:hi")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| Error::InvalidArgument(format!("bad window bound `{t}`")))
        };
        lo.push(parse(a)?);
        hi.push(parse(b)?);
    }
    if lo.len() > 2 || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
        return Err(Error::InvalidArgument(format!("window `{s}` is empty or not 1D/2D")));
    }
    Ok(FiniteSubset::box_range(&lo, &hi))
}

fn parse_ratio(s: &str) -> Result<Ratio<u64>> {
    let bad = || Error::InvalidArgument(format!("`{s}` is not a ratio like 1/4"));
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: u64 = n.trim().parse().map_err(|_| bad())?;
    let d: u64 = d.trim().parse().map_err(|_| bad())?;
    if d == 0 {
        return Err(bad());
    }
    Ok(Ratio::new(n, d))
}

fn read_spec(path: &Path) -> Result<SubshiftSpec> {
    SubshiftSpec::from_json(&fs::read_to_string(path)?)
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn window_or(common: &Common, default: impl FnOnce() -> FiniteSubset) -> Result<FiniteSubset> {
    common.window.as_deref().map(parse_window).unwrap_or_else(|| Ok(default()))
}

fn factor_config(common: &Common, group: Group) -> Result<FactorConfig> {
    let mut cfg = FactorConfig::for_group(group);
    if let Some(w) = &common.window {
        cfg.window = parse_window(w)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let c = &cli.common;
    match cli.cmd {
        Cmd::Entropy { spec, n } => {
            let x = read_spec(&spec)?;
            let h = entropy_estimate(&x, n)?;
            println!("{}", serde_json::json!({ "n": n, "entropy": h }));
        }
        Cmd::Blocks { spec, limit } => {
            let x = read_spec(&spec)?;
            let w = window_or(c, || x.group.cube(2))?;
            if limit == 0 {
                println!("{}", count_blocks(&x, &w)?);
            } else {
                let mut bs = enumerate_blocks(&x, &w, EnumOptions::default())?;
                bs.truncate(limit);
                println!("{}", serde_json::to_string(&bs)?);
            }
        }
        Cmd::IrreducibilityCheck { spec, radius } => {
            let x = read_spec(&spec)?;
            let r = check_strong_irreducibility(&x, radius, default_budget())?;
            println!("{r:?}");
            return Ok(r.holds());
        }
        Cmd::AperiodicFind { spec, radius } => {
            let x = read_spec(&spec)?;
            let p = window_or(c, || x.group.unit_star())?
                .difference(&FiniteSubset::singleton(x.group.identity()));
            let b = find_aperiodic_block(&x, &p, radius)?;
            println!("{}", serde_json::to_string(&b)?);
        }
        Cmd::Quasitile { delta, n, out } => {
            let w = window_or(c, || FiniteSubset::interval(0, 400))?;
            let q = ow_quasitiling(parse_ratio(&delta)?, n, &w)?;
            write(&out, &q.to_json()?)?;
        }
        Cmd::TileAdjust { tiling, k, eps, horizon, out } => {
            let q = Quasitiling::from_json(&fs::read_to_string(tiling)?)?;
            let kset = FiniteSubset::cube(q.dim(), k);
            let (t, report) = adjust_to_exact(&q, &kset, parse_ratio(&eps)?, &q.window, horizon)?;
            println!("{}", serde_json::to_string(&report)?);
            write(&out, &t.to_json()?)?;
        }
        Cmd::TileVerify { tiling, delta, k } => {
            let q = Quasitiling::from_json(&fs::read_to_string(tiling)?)?;
            let delta = parse_ratio(&delta)?;
            let kset = FiniteSubset::cube(q.dim(), k);
            let w = window_or(c, || q.window.clone())?;
            let report = quality(&q, &w, &kset, delta)?;
            let disjoint = verify_disjointness(&q, delta);
            println!("{}", serde_json::to_string(&report)?);
            println!("delta-disjoint: {disjoint}");
            return Ok(disjoint);
        }
        Cmd::Subsystem(SubsystemCmd::Build { spec, a, b, eta, side, out }) => {
            let x = read_spec(&spec)?;
            let tiling = periodic_tiling(x.dim(), side)?;
            let sel = select_block_families(&x, tiling, a, b, eta, &x.d)?;
            write(&out, &sel.to_json()?)?;
        }
        Cmd::Subsystem(SubsystemCmd::Verify { spec, selection, n }) => {
            let x = read_spec(&spec)?;
            let sel = BlockFamilySelection::from_json(&fs::read_to_string(selection)?)?;
            let (a, b) = (sel.a, sel.b);
            let y = build_subsystem(&x, sel);
            let s = sandwich(&y, n, default_budget())?;
            let e = verify_entropy_bounds(&y, a, b, n, default_budget())?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            println!("{}", serde_json::to_string_pretty(&e)?);
            return Ok(s.lower_holds && s.upper_holds && (e.within || e.inconclusive));
        }
        Cmd::Marker(MarkerCmd::Build { spec, n, radius, out }) => {
            let x = read_spec(&spec)?;
            let (xw, gap) = gap_subsystem(&x, n, &factor_config(c, x.group)?)?;
            let opts = MarkerOptions { radius, ..MarkerOptions::default() };
            let cert = build_marker(&xw, &gap.y, opts)?;
            println!("conditions hold: {}", cert.conditions.all_hold());
            write(&out, &cert.to_json()?)?;
        }
        Cmd::Marker(MarkerCmd::Verify { spec, cert, n, window_check }) => {
            let x = read_spec(&spec)?;
            let cert = MarkerCertificate::from_json(&fs::read_to_string(cert)?)?;
            let (mut xw, gap) = gap_subsystem(&x, n, &factor_config(c, x.group)?)?;
            if !x.d.is_subset(&cert.d) {
                return Err(Error::Precondition("certificate D does not contain the spec's D".into()));
            }
            xw.d = cert.d.clone();
            verify_certificate(&cert, &xw)?;
            println!("certificate verified: {} conditions hold", cert.conditions.conditions.len());
            if window_check {
                let w = window_or(c, || nominal_window(&cert))?;
                let r = verify_marker_window(&cert, &xw, &gap.y, &w)?;
                println!("{}", serde_json::to_string(&r)?);
                return Ok(r.passed());
            }
        }
        Cmd::Factor(FactorCmd::Build { subshift, n, out }) => {
            let x = read_spec(&subshift)?;
            let fs_ = build_factor_system(&x, n, &factor_config(c, x.group)?)?;
            write(&out, &fs_.to_json()?)?;
        }
        Cmd::Factor(FactorCmd::Encode { system, target, out }) => {
            let fs_ = FactorSystem::from_json(&fs::read_to_string(system)?)?;
            let w = window_or(c, || fs_.params.window.clone())?;
            let values: Vec<u8> = match target {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
                    let full = SubshiftSpec::full(fs_.params.x.group, fs_.params.n_symbols as u8);
                    fill_random(&full, &w, [], &mut rng, default_budget())?.values().to_vec()
                }
            };
            let z = Configuration::new(w, values)?;
            let x = fs_.build_preimage(&z)?;
            write(&out, &serde_json::to_string(&x)?)?;
        }
        Cmd::Factor(FactorCmd::Decode { system, config }) => {
            let fs_ = FactorSystem::from_json(&fs::read_to_string(system)?)?;
            let x: Configuration = serde_json::from_str(&fs::read_to_string(config)?)?;
            let w = window_or(c, || fs_.params.window.clone())?;
            let z = fs_.apply_code_window(&x, &w)?;
            println!("{}", serde_json::to_string(z.values())?);
        }
        Cmd::Factor(FactorCmd::Verify { system, trials }) => {
            let fs_ = FactorSystem::from_json(&fs::read_to_string(system)?)?;
            let r = verify_surjectivity(&fs_, trials, c.seed)?;
            println!(
                "round-trip {:.2}% ({}/{}), marker uniqueness {}",
                100.0 * r.match_rate(),
                r.symbols_matched,
                r.symbols_checked,
                r.marker_unique_all
            );
            return Ok(r.passed());
        }
        Cmd::Run { spec, n, trials, out, skip_marker_window } => {
            let mut cfg = PipelineConfig::from_spec_file(&spec, n, out)?;
            cfg.trials = trials;
            cfg.seed = c.seed;
            cfg.marker_window = !skip_marker_window;
            if let Some(w) = &c.window {
                cfg.factor.window = parse_window(w)?;
            }
            let outcome = run_pipeline(&cfg)?;
            print!("{}", fs::read_to_string(&outcome.report)?);
            return Ok(outcome.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(b) = cli.common.budget {
        std::env::set_var("GROUPSHIFT_BUDGET", b.to_string());
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", describe_failure(&e));
            ExitCode::from(2)
        }
    }
}
