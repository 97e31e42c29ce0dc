//! End-to-end run: entropy, gap subsystem, marker, factor, verification.
//!
//! Every stage writes a JSON artifact to the output directory; a markdown
//! report summarizes the metrics. Artifacts carry no timings, so identical
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{assemble_factor_system, gap_subsystem, verify_surjectivity, FactorConfig, SurjectivityReport};
use crate::group::FiniteSubset;
use crate::marker::{build_marker, nominal_window, verify_certificate, verify_marker_window, WindowReport};
use crate::shift::{count_blocks, entropy_estimate, SubshiftSpec};

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub spec: SubshiftSpec,
    pub n_symbols: u32,
    pub factor: FactorConfig,
    pub trials: usize,
    pub seed: u64,
    /// Block-count size for the entropy stage; `0` picks 16 on `Z`, 4 on `Z²`.
    pub entropy_n: usize,
    /// Run the brute-force marker window check.
    pub marker_window: bool,
    pub out_dir: PathBuf,
}

impl PipelineConfig {
    pub fn new(spec: SubshiftSpec, n_symbols: u32, out_dir: impl Into<PathBuf>) -> PipelineConfig {
        let factor = FactorConfig::for_group(spec.group);
        PipelineConfig {
            spec,
            n_symbols,
            factor,
            trials: 100,
            seed: 7,
            entropy_n: 0,
            marker_window: true,
            out_dir: out_dir.into(),
        }
    }

    pub fn from_spec_file(path: &Path, n_symbols: u32, out_dir: impl Into<PathBuf>) -> Result<PipelineConfig> {
        let spec = SubshiftSpec::from_json(&fs::read_to_string(path)?)?;
        Ok(PipelineConfig::new(spec, n_symbols, out_dir))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyArtifact {
    pub n: usize,
    pub block_count: String,
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyArtifact {
    pub surjectivity: SurjectivityReport,
    pub marker_window: Option<WindowReport>,
    pub determinability_failures: usize,
    pub passed: bool,
}

/// What [`run_pipeline`] produced; `passed` decides the exit status.
#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
    pub report: PathBuf,
}

fn advice(stage: &str) -> &'static str {
    match stage {
        "entropy" => "check the spec: the entropy estimate needs a nonempty shift",
        "subsystem" => "log2 N must stay below h(X) by the gap margin; lower N",
        "marker" => "raise the marker radius or the periodic tile bound",
        "factor" => "raise max_base or shrink the target window",
        _ => "see the error above",
    }
}

/// Formats a stage failure with a remedy hint.
pub fn describe_failure(e: &Error) -> String {
    match e {
        Error::Stage { stage, source } => format!("stage `{stage}` failed: {source}\nhint: {}", advice(stage)),
        other => other.to_string(),
    }
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn put(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.written.push(path);
        Ok(())
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => e.in_stage(name),
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    fs::create_dir_all(&cfg.out_dir)?;
    let mut out = Writer {
        dir: cfg.out_dir.clone(),
        written: Vec::new(),
    };
    let x = &cfg.spec;
    out.put("spec.json", &serde_json::to_string_pretty(x)?)?;

    let n = match cfg.entropy_n {
        0 if x.dim() == 1 => 16,
        0 => 4,
        n => n,
    };
    let entropy = stage("entropy", entropy_estimate(x, n))?;
    let count = stage("entropy", count_blocks(x, &crate::group::folner(x.group, n)?))?;
    let ent = EntropyArtifact {
        n,
        block_count: count.to_string(),
        entropy,
    };
    out.put("entropy.json", &serde_json::to_string_pretty(&ent)?)?;

    let (xw, gap) = stage("subsystem", gap_subsystem(x, cfg.n_symbols, &cfg.factor))?;
    out.put("subsystem.json", &serde_json::to_string_pretty(&gap)?)?;

    let marker = stage("marker", build_marker(&xw, &gap.y, cfg.factor.marker))?;
    stage("marker", verify_certificate(&marker, &xw))?;
    out.put("marker.json", &marker.to_json()?)?;
    let window_report = if cfg.marker_window {
        let w = nominal_window(&marker);
        Some(stage("marker", verify_marker_window(&marker, &xw, &gap.y, &w))?)
    } else {
        None
    };

    let fs_ = stage(
        "factor",
        assemble_factor_system(&xw, gap.clone(), marker.clone(), cfg.n_symbols, &cfg.factor),
    )?;
    out.put("factor.json", &fs_.to_json()?)?;

    let surj = stage("verify", verify_surjectivity(&fs_, cfg.trials, cfg.seed))?;
    let det = fs_.determinability_failures().len();
    let passed = surj.passed()
        && det == 0
        && marker.conditions.all_hold()
        && window_report.as_ref().is_none_or(WindowReport::passed);
    let verify = VerifyArtifact {
        surjectivity: surj,
        marker_window: window_report,
        determinability_failures: det,
        passed,
    };
    out.put("verify.json", &serde_json::to_string_pretty(&verify)?)?;

    let report = render_report(cfg, &ent, &gap, &marker, &fs_, &verify);
    out.put("report.md", &report)?;
    let report = out.written.last().cloned().expect("report written");
    Ok(PipelineOutcome {
        passed,
        artifacts: out.written,
        report,
    })
}

fn set_summary(s: &FiniteSubset) -> String {
    match s.bbox() {
        Some((lo, hi)) => format!("{} cells in {:?}..{:?}", s.len(), lo.coords(), hi.coords()),
        None => "empty".into(),
    }
}

fn render_report(
    cfg: &PipelineConfig,
    ent: &EntropyArtifact,
    gap: &crate::subsystem::GapSubsystem,
    marker: &crate::marker::MarkerCertificate,
    fs_: &crate::factor::FactorSystem,
    v: &VerifyArtifact,
) -> String {
    let p = &fs_.params;
    let mut r = String::new();
    let _ = writeln!(r, "# groupshift pipeline report\n");
    let _ = writeln!(
        r,
        "Group {}, alphabet {}, target N = {}, seed {}.\n",
        cfg.spec.group.name(),
        cfg.spec.alphabet_size,
        cfg.n_symbols,
        cfg.seed
    );
    let _ = writeln!(r, "## Entropy\n\n| n | blocks | estimate (bits) |\n|---|---|---|");
    let _ = writeln!(r, "| {} | {} | {:.5} |\n", ent.n, ent.block_count, ent.entropy);
    let _ = writeln!(r, "## Subsystem\n\n| metric | value |\n|---|---|");
    let _ = writeln!(r, "| extra forbidden pattern | {:?} |", gap.extra.values());
    let _ = writeln!(r, "| h(Y) | {:.5} |", gap.entropy_y);
    let _ = writeln!(r, "| h(X) | {:.5} |", gap.entropy_x);
    let _ = writeln!(r, "| log2 N | {:.5} |\n", (cfg.n_symbols as f64).log2());
    let _ = writeln!(r, "## Marker\n\n| metric | value |\n|---|---|");
    let _ = writeln!(r, "| distinguishing block B | {} |", set_summary(marker.b.domain()));
    let _ = writeln!(r, "| K | {} |", set_summary(marker.k()));
    let _ = writeln!(r, "| c2, c3 | {:?}, {:?} |", marker.c2.coords(), marker.c3.coords());
    let held = marker.conditions.conditions.iter().filter(|c| c.holds).count();
    let _ = writeln!(r, "| conditions holding | {held}/{} |", marker.conditions.conditions.len());
    if let Some(w) = &v.marker_window {
        let _ = writeln!(r, "| window offsets tested | {} |", w.offsets_tested);
        let _ = writeln!(
            r,
            "| window violations | {} |",
            w.violations.len() + w.tile_violations.len() + w.self_overlap_violations.len()
        );
    }
    let _ = writeln!(r, "\n## Factor\n\n| metric | value |\n|---|---|");
    let _ = writeln!(r, "| K* | {} |", set_summary(&p.kstar));
    let _ = writeln!(r, "| shapes r | {} |", p.r);
    let _ = writeln!(r, "| smallest side | {} |", p.base);
    let _ = writeln!(r, "| code window radius | {} |", p.rho);
    let _ = writeln!(r, "| canvas | {:?}..{:?} |", p.canvas_lo.coords(), p.canvas_hi.coords());
    let _ = writeln!(r, "| target window | {} |", set_summary(&p.window));
    let _ = writeln!(r, "| tiles | {} |\n", fs_.tiles.len());
    let s = &v.surjectivity;
    let _ = writeln!(r, "## Verification\n\n| metric | value |\n|---|---|");
    let _ = writeln!(r, "| trials | {} |", s.trials);
    let _ = writeln!(r, "| symbols matched | {}/{} |", s.symbols_matched, s.symbols_checked);
    let _ = writeln!(r, "| round-trip | {:.2}% |", 100.0 * s.match_rate());
    let _ = writeln!(r, "| marker uniqueness | {} |", s.marker_unique_all);
    let _ = writeln!(r, "| determinability failures | {} |", v.determinability_failures);
    let _ = writeln!(r, "\n**{}**", if v.passed { "PASSED" } else { "FAILED" });
    r
}
