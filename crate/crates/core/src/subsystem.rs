//! Subsystems of prescribed entropy.
//!
//! [`TilingSubsystem`] restricts the D-interiors of the tiles of a periodic
//! tiling to chosen block families, which pins the entropy between two
//! bounds. [`find_gap_subsystem`] instead adds one forbidden pattern and is
//! what the factor construction uses, since it keeps the subsystem a shift of
//! finite type with cheap ranking.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{folner, FiniteSubset};
use crate::shift::automaton::placements;
use crate::shift::{
    domain_schedule, entropy_estimate, log2_big, Block, Language, SubshiftSpec,
};
use crate::tiling::PeriodicTiling;

/// Blocks allowed on the D-interior of one tile shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockFamily {
    pub shape: FiniteSubset,
    pub interior: FiniteSubset,
    /// `N_j`; the family is the first `N_j` blocks in canonical order.
    pub count: u64,
    pub words: Vec<Vec<u8>>,
}

/// A periodic tiling together with one block family per shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFamilySelection {
    pub tiling: PeriodicTiling,
    #[serde(rename = "D")]
    pub d: FiniteSubset,
    pub a: f64,
    pub b: f64,
    pub eta: f64,
    pub families: Vec<BlockFamily>,
}

/// Entropy estimate used for the `b < h(X)` precondition.
fn reference_entropy(x: &SubshiftSpec) -> Result<f64> {
    entropy_estimate(x, if x.dim() == 1 { 16 } else { 4 })
}

/// Chooses `N_j = 2^e` with `e = ⌊|S|(a+b)/2⌋`, moved by one when needed to
/// land strictly inside `(a+η, b−η)`, and takes the first `N_j` blocks.
pub fn select_block_families(
    x: &SubshiftSpec,
    tiling: PeriodicTiling,
    a: f64,
    b: f64,
    eta: f64,
    d: &FiniteSubset,
) -> Result<BlockFamilySelection> {
    if !(0.0 < a && a < b) {
        return Err(Error::Precondition(format!("need 0 < a < b, got a={a}, b={b}")));
    }
    if !(0.0 < eta && eta < (b - a) / 2.0) {
        return Err(Error::Precondition(format!("need 0 < η < (b−a)/2, got η={eta}")));
    }
    let h = reference_entropy(x)?;
    if b >= h {
        return Err(Error::Precondition(format!("b={b} is not below h(X)≈{h:.4}")));
    }
    if tiling.dim != x.dim() {
        return Err(Error::InvalidArgument("tiling and subshift dimensions differ".into()));
    }
    let shape = tiling.shape();
    let size = shape.len() as f64;
    let mid = (size * (a + b) / 2.0).floor() as i64;
    let e = [mid, mid + 1, mid - 1]
        .into_iter()
        .filter(|&e| (0..63).contains(&e))
        .find(|&e| {
            let rate = e as f64 / size;
            a + eta < rate && rate < b - eta
        })
        .ok_or_else(|| {
            Error::Precondition(format!(
                "no power of two has rate in ({:.3}, {:.3}) for tiles of {} cells; use larger tiles",
                a + eta,
                b - eta,
                shape.len()
            ))
        })?;
    let count = 1u64 << e;
    let interior = shape.d_interior(d);
    let auto = x.automaton(&interior, crate::shift::default_budget())?;
    if auto.count() < BigUint::from(count) {
        return Err(Error::Shortfall(format!(
            "only {} blocks on the tile interior, {count} needed",
            auto.count()
        )));
    }
    let words = auto.list(count as usize);
    Ok(BlockFamilySelection {
        tiling,
        d: d.clone(),
        a,
        b,
        eta,
        families: vec![BlockFamily {
            shape,
            interior,
            count,
            words,
        }],
    })
}

/// The degenerate selection allowing every block on the tile interior.
pub fn unrestricted_selection(
    x: &SubshiftSpec,
    tiling: PeriodicTiling,
    d: &FiniteSubset,
) -> Result<BlockFamilySelection> {
    let shape = tiling.shape();
    let interior = shape.d_interior(d);
    let auto = x.automaton(&interior, crate::shift::default_budget())?;
    let words = auto.list(usize::MAX);
    Ok(BlockFamilySelection {
        tiling,
        d: d.clone(),
        a: 0.0,
        b: 0.0,
        eta: 0.0,
        families: vec![BlockFamily {
            shape,
            interior,
            count: words.len() as u64,
            words,
        }],
    })
}

impl BlockFamilySelection {
    /// `|S_D| / |S|`, the fraction of each tile carrying a chosen block.
    pub fn interior_density(&self) -> f64 {
        let f = &self.families[0];
        f.interior.len() as f64 / f.shape.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The subshift of `X` whose tile interiors, for some phase of the periodic
/// tiling, all carry blocks from the selected families.
#[derive(Clone, Debug)]
pub struct TilingSubsystem {
    pub x: SubshiftSpec,
    pub selection: BlockFamilySelection,
    allowed: Vec<HashSet<Vec<u8>>>,
}

pub fn build_subsystem(x: &SubshiftSpec, selection: BlockFamilySelection) -> TilingSubsystem {
    let allowed = selection
        .families
        .iter()
        .map(|f| f.words.iter().cloned().collect())
        .collect();
    TilingSubsystem {
        x: x.clone(),
        selection,
        allowed,
    }
}

/// Tile interiors of one phase that lie inside `domain`, as index lists.
fn interiors_inside(
    sel: &BlockFamilySelection,
    domain: &FiniteSubset,
    phase: crate::group::Elem,
) -> Vec<Vec<usize>> {
    let tiling = sel.tiling;
    let interior = &sel.families[0].interior;
    let mut centers: Vec<_> = domain
        .iter()
        .map(|u| tiling.center_of_phased(*u, phase))
        .collect();
    centers.sort();
    centers.dedup();
    centers
        .into_iter()
        .filter_map(|c| {
            interior
                .iter()
                .map(|s| domain.index_of(&(*s + c)))
                .collect::<Option<Vec<usize>>>()
        })
        .filter(|ix| !ix.is_empty())
        .collect()
}

impl TilingSubsystem {
    /// Whether some phase accepts every tile interior inside the block.
    fn phase_exists(&self, b: &Block) -> bool {
        let sel = &self.selection;
        sel.tiling.phases().iter().any(|&p| {
            interiors_inside(sel, b.domain(), p).iter().all(|ix| {
                let w: Vec<u8> = ix.iter().map(|&i| b.values()[i]).collect();
                self.allowed[0].contains(&w)
            })
        })
    }
}

impl Language for TilingSubsystem {
    fn admits(&self, b: &Block) -> bool {
        self.x.admits(b) && self.phase_exists(b)
    }
}

/// Exact number of blocks on `t` admitted by `y`.
///
/// Depth-first over the cells of `t` in canonical order, tracking the set of
/// phases still consistent with the prefix as a bitmask.
pub fn count_y_blocks(y: &TilingSubsystem, t: &FiniteSubset, budget: u64) -> Result<BigUint> {
    let sel = &y.selection;
    let phases = sel.tiling.phases();
    if phases.len() > 64 {
        return Err(Error::InvalidArgument("at most 64 tiling phases are supported".into()));
    }
    let m = t.len();
    let mut x_at: Vec<Vec<(Vec<usize>, Vec<u8>)>> = vec![Vec::new(); m];
    for c in placements(t, &y.x.forbidden) {
        let hi = *c.cells.iter().max().unwrap();
        x_at[hi].push((c.cells, c.values));
    }
    let mut tiles_at: Vec<Vec<(u32, Vec<usize>)>> = vec![Vec::new(); m];
    for (pi, p) in phases.iter().enumerate() {
        for ix in interiors_inside(sel, t, *p) {
            let hi = *ix.iter().max().unwrap();
            tiles_at[hi].push((pi as u32, ix));
        }
    }
    let full: u64 = if phases.len() == 64 { u64::MAX } else { (1u64 << phases.len()) - 1 };
    let mut counter = Dfs {
        alphabet: y.x.alphabet_size,
        x_at,
        tiles_at,
        allowed: &y.allowed[0],
        vals: vec![0; m],
        nodes: 0,
        budget,
        leaves: BigUint::zero(),
    };
    counter.go(0, full)?;
    Ok(counter.leaves)
}

struct Dfs<'a> {
    alphabet: u8,
    x_at: Vec<Vec<(Vec<usize>, Vec<u8>)>>,
    tiles_at: Vec<Vec<(u32, Vec<usize>)>>,
    allowed: &'a HashSet<Vec<u8>>,
    vals: Vec<u8>,
    nodes: u64,
    budget: u64,
    leaves: BigUint,
}

impl Dfs<'_> {
    fn go(&mut self, i: usize, alive: u64) -> Result<()> {
        if i == self.vals.len() {
            self.leaves += 1u32;
            return Ok(());
        }
        let mut word = Vec::new();
        for s in 0..self.alphabet {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExceeded {
                    budget: self.budget,
                    partial: self.nodes,
                });
            }
            self.vals[i] = s;
            let forbidden = self.x_at[i]
                .iter()
                .any(|(cells, values)| cells.iter().zip(values).all(|(&j, &v)| self.vals[j] == v));
            if forbidden {
                continue;
            }
            let mut next = alive;
            for (p, ix) in &self.tiles_at[i] {
                if next & (1 << p) == 0 {
                    continue;
                }
                word.clear();
                word.extend(ix.iter().map(|&j| self.vals[j]));
                if !self.allowed.contains(&word) {
                    next &= !(1 << p);
                }
            }
            if next != 0 {
                self.go(i + 1, next)?;
            }
        }
        Ok(())
    }
}

/// The counting sandwich on `F_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub n: usize,
    #[serde(with = "crate::shift::bigdec")]
    pub count: BigUint,
    /// `∏ N_j^{l_j}` for the unshifted tiling.
    #[serde(with = "crate::shift::bigdec")]
    pub lower: BigUint,
    /// Sum over phases of `∏ N_j^{l_j} |Λ|^{free cells}`.
    #[serde(with = "crate::shift::bigdec")]
    pub upper_sum: BigUint,
    /// `H_n · max_phase ∏ N_j^{l_j} |Λ|^{free cells}`.
    #[serde(with = "crate::shift::bigdec")]
    pub upper_translates: BigUint,
    pub translates: usize,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

pub fn sandwich(y: &TilingSubsystem, n: usize, budget: u64) -> Result<SandwichReport> {
    let f = folner(y.x.group, n)?;
    let count = count_y_blocks(y, &f, budget)?;
    let sel = &y.selection;
    let fam = &sel.families[0];
    let nj = BigUint::from(fam.count);
    let lambda = BigUint::from(y.x.alphabet_size);
    let phases = sel.tiling.phases();
    let mut bounds = Vec::with_capacity(phases.len());
    let mut lower = BigUint::one();
    for (pi, p) in phases.iter().enumerate() {
        let tiles = interiors_inside(sel, &f, *p);
        let free = f.len() - tiles.iter().map(|ix| ix.len()).sum::<usize>();
        let prod = nj.pow(tiles.len() as u32);
        if pi == 0 {
            lower = prod.clone();
        }
        bounds.push(prod * lambda.pow(free as u32));
    }
    let upper_sum: BigUint = bounds.iter().sum();
    let upper_translates = bounds.iter().max().unwrap() * BigUint::from(phases.len());
    Ok(SandwichReport {
        n,
        lower_holds: lower <= count,
        upper_holds: count <= upper_sum && count <= upper_translates,
        count,
        lower,
        upper_sum,
        upper_translates,
        translates: phases.len(),
    })
}

/// Numeric entropy check on `F_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyBoundsReport {
    pub n: usize,
    pub estimate: Option<f64>,
    pub slack: f64,
    pub a: f64,
    pub b: f64,
    pub within: bool,
    pub inconclusive: bool,
}

/// `(1/|F_n|) log₂ N_{F_n}(Y)` compared with `[a − slack, b + slack]`, where
/// `slack = 2|F_n ∖ (F_n)_D| / |F_n|`.
pub fn verify_entropy_bounds(
    y: &TilingSubsystem,
    a: f64,
    b: f64,
    n: usize,
    budget: u64,
) -> Result<EntropyBoundsReport> {
    let f = folner(y.x.group, n)?;
    let boundary = f.len() - f.d_interior(&y.selection.d).len();
    let slack = 2.0 * boundary as f64 / f.len() as f64;
    if (n as i64) < y.selection.tiling.side {
        return Ok(EntropyBoundsReport {
            n,
            estimate: None,
            slack,
            a,
            b,
            within: false,
            inconclusive: true,
        });
    }
    let count = count_y_blocks(y, &f, budget)?;
    let h = log2_big(&count) / f.len() as f64;
    Ok(EntropyBoundsReport {
        n,
        estimate: Some(h),
        slack,
        a,
        b,
        within: a - slack <= h && h <= b + slack,
        inconclusive: false,
    })
}

/// A subshift of finite type `Y ⊆ X` with `log₂ N < h(Y) < h(X)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSubsystem {
    pub y: SubshiftSpec,
    /// The added forbidden pattern; it occurs in `X` but not in `Y`.
    pub extra: Block,
    pub entropy_y: f64,
    pub entropy_x: f64,
}

/// Scans single extra forbidden patterns in domain-schedule order and takes
/// the first whose entropy estimate clears `log₂ N` by `margin` and stays
/// below `h(X)` by `margin`.
pub fn find_gap_subsystem(
    x: &SubshiftSpec,
    n_symbols: u32,
    radius: usize,
    margin: f64,
) -> Result<GapSubsystem> {
    let hx = reference_entropy(x)?;
    let target = (n_symbols as f64).log2();
    if target >= hx {
        return Err(Error::Precondition(format!(
            "log₂ N = {target:.4} is not below h(X) ≈ {hx:.4}"
        )));
    }
    for t in domain_schedule(x.group, radius) {
        let auto = x.automaton(&t, crate::shift::default_budget())?;
        for values in auto.list(1 << 12) {
            let extra = Block::new(t.clone(), values)?;
            let y = x.with_forbidden(std::slice::from_ref(&extra));
            let hy = reference_entropy(&y)?;
            if hy > target + margin && hy < hx - margin {
                return Ok(GapSubsystem {
                    y,
                    extra,
                    entropy_y: hy,
                    entropy_x: hx,
                });
            }
        }
    }
    Err(Error::NotFound {
        what: format!("subsystem with entropy in ({target:.3}, {hx:.3})"),
        radius,
    })
}
