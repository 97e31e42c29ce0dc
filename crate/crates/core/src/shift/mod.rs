//! Subshifts given by forbidden patterns: blocks, configurations, block
//! enumeration and counting, entropy, gluing, strong irreducibility and
//! aperiodicity.

pub(crate) mod automaton;

use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Elem, FiniteSubset, Group};
use automaton::{fixed_cells, for_domain, placements, Builder, Constraint};

/// Default node cap for enumeration and gluing.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Node cap, overridable through `GROUPSHIFT_BUDGET`.
pub fn default_budget() -> u64 {
    std::env::var("GROUPSHIFT_BUDGET")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_BUDGET)
}

/// Serde adapter writing big integers as decimal strings.
pub mod bigdec {
    use num_bigint::BigUint;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| D::Error::custom("not a decimal integer"))
    }
}

/// A pattern on a finite domain. `values[i]` is the symbol at the `i`-th
/// domain element in canonical order.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawBlock")]
pub struct Block {
    domain: FiniteSubset,
    values: Vec<u8>,
}

#[derive(Deserialize)]
struct RawBlock {
    domain: Vec<Elem>,
    values: Vec<u8>,
}

impl TryFrom<RawBlock> for Block {
    type Error = Error;
    fn try_from(raw: RawBlock) -> Result<Block> {
        if raw.domain.len() != raw.values.len() {
            return Err(Error::InvalidArgument(
                "block domain and values differ in length".into(),
            ));
        }
        Block::from_pairs(raw.domain.into_iter().zip(raw.values))
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block{{")?;
        for (i, (g, v)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{g:?}↦{v}")?;
        }
        write!(f, "}}")
    }
}

impl Block {
    pub fn new(domain: FiniteSubset, values: Vec<u8>) -> Result<Block> {
        if domain.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a domain of {} cells",
                values.len(),
                domain.len()
            )));
        }
        Ok(Block { domain, values })
    }

    /// Builds a block from (cell, symbol) pairs; duplicates must agree.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Elem, u8)>) -> Result<Block> {
        let mut v: Vec<(Elem, u8)> = pairs.into_iter().collect();
        v.sort_by_key(|p| p.0);
        v.dedup();
        if v.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(
                "conflicting values for one cell".into(),
            ));
        }
        Ok(Block {
            domain: FiniteSubset::new(v.iter().map(|p| p.0).collect()),
            values: v.iter().map(|p| p.1).collect(),
        })
    }

    /// A one-dimensional word placed on `{0, .., len-1}`.
    pub fn word(values: &[u8]) -> Block {
        Block {
            domain: FiniteSubset::interval(0, values.len() as i64),
            values: values.to_vec(),
        }
    }

    pub fn empty() -> Block {
        Block {
            domain: FiniteSubset::empty(),
            values: Vec::new(),
        }
    }

    pub fn domain(&self) -> &FiniteSubset {
        &self.domain
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, g: &Elem) -> Option<u8> {
        self.domain.index_of(g).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Elem, u8)> + '_ {
        self.domain.iter().copied().zip(self.values.iter().copied())
    }

    pub fn translate(&self, g: Elem) -> Block {
        Block {
            domain: self.domain.translate(g),
            values: self.values.clone(),
        }
    }

    /// Restriction to `sub`, which must lie inside the domain.
    pub fn restrict(&self, sub: &FiniteSubset) -> Result<Block> {
        let values = sub
            .iter()
            .map(|g| {
                self.get(g).ok_or_else(|| {
                    Error::InsufficientData(format!("cell {g:?} not in block domain"))
                })
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Block {
            domain: sub.clone(),
            values,
        })
    }

    /// Whether `sub` occurs in this block at `g`.
    pub fn contains_at(&self, sub: &Block, g: Elem) -> bool {
        sub.iter().all(|(t, v)| self.get(&(t + g)) == Some(v))
    }
}

/// A finite window of a configuration. Values are stored densely over the
/// window's bounding box for constant-time lookup.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "RawConfiguration", into = "RawConfiguration")]
pub struct Configuration {
    window: FiniteSubset,
    values: Vec<u8>,
    grid: Grid,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawConfiguration {
    window: FiniteSubset,
    values: Vec<u8>,
}

impl TryFrom<RawConfiguration> for Configuration {
    type Error = Error;

    fn try_from(raw: RawConfiguration) -> Result<Self> {
        Configuration::new(raw.window, raw.values)
    }
}

impl From<Configuration> for RawConfiguration {
    fn from(c: Configuration) -> Self {
        RawConfiguration {
            window: c.window,
            values: c.values,
        }
    }
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window && self.values == other.values
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({} cells)", self.values.len())
    }
}

#[derive(Clone, Default)]
struct Grid {
    lo: [i64; 2],
    size: [i64; 2],
    data: Vec<u8>,
}

const ABSENT: u8 = u8::MAX;

impl Grid {
    fn build(window: &FiniteSubset, values: &[u8]) -> Grid {
        let Some((lo, hi)) = window.bbox() else {
            return Grid::default();
        };
        let d = lo.dim();
        let mut l = [0i64; 2];
        let mut size = [1i64; 2];
        for i in 0..d {
            l[i] = lo.coord(i);
            size[i] = hi.coord(i) - lo.coord(i) + 1;
        }
        let mut data = vec![ABSENT; (size[0] * size[1]) as usize];
        let mut g = Grid { lo: l, size, data: Vec::new() };
        for (e, &v) in window.iter().zip(values) {
            data[g.offset(e).unwrap()] = v;
        }
        g.data = data;
        g
    }

    fn offset(&self, e: &Elem) -> Option<usize> {
        let x = e.coord(0) - self.lo[0];
        let y = e.coord(1) - self.lo[1];
        if x < 0 || y < 0 || x >= self.size[0] || y >= self.size[1] {
            return None;
        }
        Some((x * self.size[1] + y) as usize)
    }

    fn get(&self, e: &Elem) -> Option<u8> {
        let v = *self.data.get(self.offset(e)?)?;
        (v != ABSENT).then_some(v)
    }
}

impl Configuration {
    pub fn new(window: FiniteSubset, values: Vec<u8>) -> Result<Configuration> {
        if window.len() != values.len() {
            return Err(Error::InvalidArgument(
                "configuration window and values differ in length".into(),
            ));
        }
        let grid = Grid::build(&window, &values);
        Ok(Configuration {
            window,
            values,
            grid,
        })
    }

    pub fn from_block(b: &Block) -> Configuration {
        Configuration::new(b.domain.clone(), b.values.clone()).unwrap()
    }

    pub fn window(&self) -> &FiniteSubset {
        &self.window
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, g: &Elem) -> Option<u8> {
        self.grid.get(g)
    }

    pub fn as_block(&self) -> Block {
        Block {
            domain: self.window.clone(),
            values: self.values.clone(),
        }
    }

    /// The block `c(T)`, or `None` when `T` leaves the window.
    pub fn read(&self, t: &FiniteSubset) -> Option<Block> {
        let values = t.iter().map(|g| self.get(g)).collect::<Option<Vec<u8>>>()?;
        Some(Block {
            domain: t.clone(),
            values,
        })
    }

    /// Whether `b` occurs at `g`, i.e. `c(t·g) = b(t)` for all `t`.
    pub fn occurs_at(&self, b: &Block, g: Elem) -> Result<bool> {
        let mut all = true;
        for (t, v) in b.iter() {
            match self.get(&(t + g)) {
                None => {
                    return Err(Error::InsufficientData(format!(
                        "cell {:?} outside the configuration window",
                        t + g
                    )))
                }
                Some(w) => all &= w == v,
            }
        }
        Ok(all)
    }

    /// Whether `b` occurs at `g`, treating cells outside the window as a
    /// mismatch.
    pub fn matches_at(&self, b: &Block, g: Elem) -> bool {
        b.iter().all(|(t, v)| self.get(&(t + g)) == Some(v))
    }

    /// The configuration shifted so that cell `g` moves to `g + h`.
    pub fn translate(&self, h: Elem) -> Configuration {
        Configuration::new(self.window.translate(h), self.values.clone()).unwrap()
    }
}

/// Anything that can decide whether a block belongs to its language.
pub trait Language {
    fn admits(&self, b: &Block) -> bool;
}

/// A subshift of `alphabet_size^G` cut out by forbidden patterns, together
/// with its declared irreducibility distance `D`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct SubshiftSpec {
    pub group: Group,
    pub alphabet_size: u8,
    pub forbidden: Vec<Block>,
    #[serde(rename = "D")]
    pub d: FiniteSubset,
}

#[derive(Deserialize)]
struct RawSpec {
    group: Group,
    alphabet_size: u8,
    forbidden: Vec<Block>,
    #[serde(rename = "D")]
    d: FiniteSubset,
}

impl TryFrom<RawSpec> for SubshiftSpec {
    type Error = Error;
    fn try_from(r: RawSpec) -> Result<Self> {
        SubshiftSpec::new(r.group, r.alphabet_size, r.forbidden, r.d)
    }
}

impl SubshiftSpec {
    pub fn new(
        group: Group,
        alphabet_size: u8,
        forbidden: Vec<Block>,
        d: FiniteSubset,
    ) -> Result<SubshiftSpec> {
        if alphabet_size == 0 || alphabet_size == u8::MAX {
            return Err(Error::InvalidArgument("alphabet size out of range".into()));
        }
        if !d.contains(&group.identity()) {
            return Err(Error::InvalidArgument(
                "irreducibility distance must contain the identity".into(),
            ));
        }
        for p in &forbidden {
            if p.is_empty() {
                return Err(Error::InvalidArgument(
                    "forbidden pattern with empty domain".into(),
                ));
            }
            if p.domain().dim() != Some(group.dim()) {
                return Err(Error::InvalidArgument(
                    "forbidden pattern of the wrong dimension".into(),
                ));
            }
            if p.values().iter().any(|&v| v >= alphabet_size) {
                return Err(Error::InvalidArgument(
                    "forbidden pattern uses a symbol outside the alphabet".into(),
                ));
            }
        }
        Ok(SubshiftSpec {
            group,
            alphabet_size,
            forbidden,
            d,
        })
    }

    pub fn full(group: Group, alphabet_size: u8) -> SubshiftSpec {
        SubshiftSpec::new(
            group,
            alphabet_size,
            Vec::new(),
            FiniteSubset::singleton(group.identity()),
        )
        .unwrap()
    }

    /// Binary shift on Z with `11` forbidden.
    pub fn golden_mean(d: FiniteSubset) -> Result<SubshiftSpec> {
        SubshiftSpec::new(Group::Z, 2, vec![Block::word(&[1, 1])], d)
    }

    /// Four-symbol shift on Z with `33` forbidden, `D = {-1, 0, 1}`.
    pub fn no33() -> SubshiftSpec {
        SubshiftSpec::new(
            Group::Z,
            4,
            vec![Block::word(&[3, 3])],
            FiniteSubset::interval(-1, 2),
        )
        .unwrap()
    }

    pub fn from_json(s: &str) -> Result<SubshiftSpec> {
        Ok(serde_json::from_str(s)?)
    }

    /// A copy with additional forbidden patterns.
    pub fn with_forbidden(&self, extra: &[Block]) -> SubshiftSpec {
        let mut s = self.clone();
        s.forbidden.extend_from_slice(extra);
        s
    }

    pub fn dim(&self) -> usize {
        self.group.dim()
    }

    /// True iff no forbidden pattern occurs entirely inside the block.
    pub fn is_locally_admissible(&self, b: &Block) -> bool {
        placements(b.domain(), &self.forbidden)
            .iter()
            .all(|c| !c.cells.iter().zip(&c.values).all(|(&j, &v)| b.values[j] == v))
    }

    pub(crate) fn automaton(
        &self,
        domain: &FiniteSubset,
        budget: u64,
    ) -> Result<automaton::Automaton> {
        for_domain(domain, &self.forbidden, self.alphabet_size, None, budget)
    }
}

impl Language for SubshiftSpec {
    fn admits(&self, b: &Block) -> bool {
        b.values.iter().all(|&v| v < self.alphabet_size) && self.is_locally_admissible(b)
    }
}

/// Options for block enumeration.
#[derive(Clone, Copy, Debug)]
pub struct EnumOptions {
    pub budget: u64,
    /// 1D only: keep blocks extendable to this many extra cells on each side.
    pub extension_margin: Option<usize>,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions {
            budget: default_budget(),
            extension_margin: None,
        }
    }
}

/// All locally admissible blocks on `t`, in canonical order.
pub fn enumerate_blocks(x: &SubshiftSpec, t: &FiniteSubset, opts: EnumOptions) -> Result<Vec<Block>> {
    let auto = x.automaton(t, opts.budget)?;
    let total = auto.count();
    let cap = opts.budget.min(usize::MAX as u64) as usize;
    if total > BigUint::from(cap) {
        return Err(Error::BudgetExceeded {
            budget: opts.budget,
            partial: cap as u64,
        });
    }
    let words = auto.list(cap);
    let mut blocks: Vec<Block> = words
        .into_iter()
        .map(|values| Block {
            domain: t.clone(),
            values,
        })
        .collect();
    if let Some(margin) = opts.extension_margin {
        if x.dim() != 1 {
            return Err(Error::InvalidArgument(
                "extension check is only available on Z".into(),
            ));
        }
        blocks.retain(|b| extends_to_margin(x, b, margin, opts.budget).unwrap_or(false));
    }
    Ok(blocks)
}

fn extends_to_margin(x: &SubshiftSpec, b: &Block, margin: usize, budget: u64) -> Result<bool> {
    let Some((lo, hi)) = b.domain().bbox() else {
        return Ok(true);
    };
    let m = margin as i64;
    let window = FiniteSubset::interval(lo.coord(0) - m, hi.coord(0) + m + 1);
    match fill(x, &window, b.iter(), budget) {
        Ok(_) => Ok(true),
        Err(Error::GlueFailed(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Number of locally admissible blocks on `t`.
pub fn count_blocks(x: &SubshiftSpec, t: &FiniteSubset) -> Result<BigUint> {
    count_blocks_with(x, t, EnumOptions::default())
}

pub fn count_blocks_with(x: &SubshiftSpec, t: &FiniteSubset, opts: EnumOptions) -> Result<BigUint> {
    match opts.extension_margin {
        None => Ok(x.automaton(t, opts.budget)?.count()),
        Some(_) => Ok(BigUint::from(enumerate_blocks(x, t, opts)?.len())),
    }
}

/// `log2` of a big integer (`-inf` for zero).
pub fn log2_big(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap();
    top.log2() + shift as f64
}

/// `(1/|F_n|) log2 N_{F_n}(X)` in bits per site.
pub fn entropy_estimate(x: &SubshiftSpec, n: usize) -> Result<f64> {
    let f = crate::group::folner(x.group, n)?;
    let c = count_blocks(x, &f)?;
    Ok(log2_big(&c) / f.len() as f64)
}

/// `N_T(X) > 2^((h_est - eps)|T|)`.
pub fn block_count_lower_check(x: &SubshiftSpec, h_est: f64, eps: f64, t: &FiniteSubset) -> Result<bool> {
    let c = count_blocks(x, t)?;
    Ok(log2_big(&c) > (h_est - eps) * t.len() as f64)
}

/// Fills `window` with a locally admissible configuration that agrees with
/// `fixed`, choosing the smallest symbol first at each free cell.
pub fn fill(
    x: &SubshiftSpec,
    window: &FiniteSubset,
    fixed: impl IntoIterator<Item = (Elem, u8)>,
    budget: u64,
) -> Result<Configuration> {
    let order: Vec<u8> = (0..x.alphabet_size).collect();
    fill_with(x, window, fixed, &[], &order, budget)
}

/// General fill: hard constraints from `x`, plus `soft` placements that are
/// enforced when they can be; `order` is the symbol preference.
pub fn fill_with(
    x: &SubshiftSpec,
    window: &FiniteSubset,
    fixed: impl IntoIterator<Item = (Elem, u8)>,
    soft: &[SoftConstraint],
    order: &[u8],
    budget: u64,
) -> Result<Configuration> {
    let fixed = fixed_cells(window, fixed)?;
    let hard = placements(window, &x.forbidden);
    let mut attempts: Vec<Vec<Constraint>> = Vec::new();
    if !soft.is_empty() {
        let mut all = hard.clone();
        for s in soft {
            all.extend(
                placements(window, std::slice::from_ref(&s.pattern))
                    .into_iter()
                    .filter(|c| !c.cells.iter().any(|&j| s.exempt.contains(&window.as_slice()[j]))),
            );
        }
        attempts.push(all);
    }
    attempts.push(hard);
    for constraints in attempts {
        let auto = Builder {
            len: window.len(),
            alphabet: x.alphabet_size,
            constraints: &constraints,
            fixed: Some(&fixed),
            budget,
        }
        .build_feasible()?;
        if let Some(values) = auto.first_in_order(order) {
            return Configuration::new(window.clone(), values);
        }
    }
    Err(Error::GlueFailed(
        "no admissible completion inside the window".into(),
    ))
}

/// Random admissible fill, reproducible from `rng`.
pub fn fill_random<R: rand::Rng>(
    x: &SubshiftSpec,
    window: &FiniteSubset,
    fixed: impl IntoIterator<Item = (Elem, u8)>,
    rng: &mut R,
    budget: u64,
) -> Result<Configuration> {
    let fixed = fixed_cells(window, fixed)?;
    let constraints = placements(window, &x.forbidden);
    let auto = Builder {
        len: window.len(),
        alphabet: x.alphabet_size,
        constraints: &constraints,
        fixed: Some(&fixed),
        budget,
    }
    .build_feasible()?;
    let values = auto
        .walk(|_, choices| Some(choices[rng.gen_range(0..choices.len())]))
        .ok_or_else(|| Error::GlueFailed("no admissible completion".into()))?;
    Configuration::new(window.clone(), values)
}

/// A pattern whose placements should be avoided unless they touch `exempt`.
#[derive(Clone, Debug)]
pub struct SoftConstraint {
    pub pattern: Block,
    pub exempt: std::collections::HashSet<Elem>,
}

/// Joins `b1` at `g1` and `b2` at `g2` inside `window`.
pub fn glue(
    b1: &Block,
    g1: Elem,
    b2: &Block,
    g2: Elem,
    x: &SubshiftSpec,
    window: &FiniteSubset,
) -> Result<Configuration> {
    let t1 = b1.domain().translate(g1);
    let t2 = b2.domain().translate(g2);
    if !x.d.product(&t1).is_disjoint(&t2) {
        return Err(Error::Precondition(
            "D·T1·g1 meets T2·g2; blocks are not D-separated".into(),
        ));
    }
    if !t1.is_subset(window) || !t2.is_subset(window) {
        return Err(Error::Precondition("placements leave the window".into()));
    }
    let fixed = b1
        .translate(g1)
        .iter()
        .chain(b2.translate(g2).iter())
        .collect::<Vec<_>>();
    fill(x, window, fixed, default_budget())
}

/// Result of a bounded strong-irreducibility test.
#[derive(Clone, Debug, PartialEq)]
pub enum IrreducibilityReport {
    Irreducible { pairs_tested: u64 },
    Counterexample {
        b1: Block,
        g1: Elem,
        b2: Block,
        g2: Elem,
    },
    Inconclusive { pairs_tested: u64 },
}

impl IrreducibilityReport {
    pub fn holds(&self) -> bool {
        matches!(self, IrreducibilityReport::Irreducible { .. })
    }
}

/// Box domains `[0,a) × [0,b)` (or intervals) with sides up to `radius`,
/// ordered by size, then by sides.
pub fn domain_schedule(group: Group, radius: usize) -> Vec<FiniteSubset> {
    let r = radius as i64;
    match group.dim() {
        1 => (1..=r).map(|l| FiniteSubset::interval(0, l)).collect(),
        _ => {
            let mut sides = Vec::new();
            for a in 1..=r {
                for b in 1..=r {
                    sides.push((a * b, a, b));
                }
            }
            sides.sort();
            sides
                .into_iter()
                .map(|(_, a, b)| FiniteSubset::box_range(&[0, 0], &[a, b]))
                .collect()
        }
    }
}

/// Tests strong irreducibility on every pair of admissible blocks with
/// domains from [`domain_schedule`] and offsets within `2·radius`.
pub fn check_strong_irreducibility(x: &SubshiftSpec, radius: usize, budget: u64) -> Result<IrreducibilityReport> {
    let domains = domain_schedule(x.group, radius);
    let mut family: Vec<Block> = Vec::new();
    for t in &domains {
        match enumerate_blocks(x, t, EnumOptions { budget, extension_margin: None }) {
            Ok(bs) => family.extend(bs),
            Err(Error::BudgetExceeded { .. }) => {
                return Ok(IrreducibilityReport::Inconclusive { pairs_tested: 0 })
            }
            Err(e) => return Err(e),
        }
    }
    let reach = 2 * radius as i64;
    let offsets = x.group.cube(reach);
    let margin = x.group.cube(radius as i64 + x.d.extent());
    let origin = x.group.identity();
    let mut tested: u64 = 0;
    for b1 in &family {
        let dt1 = x.d.product(b1.domain());
        for b2 in &family {
            for &g2 in offsets.iter() {
                let t2 = b2.domain().translate(g2);
                if !dt1.is_disjoint(&t2) {
                    continue;
                }
                tested += 1;
                if tested > budget {
                    return Ok(IrreducibilityReport::Inconclusive { pairs_tested: tested });
                }
                let window = b1.domain().union(&t2).product(&margin);
                match glue(b1, origin, b2, g2, x, &window) {
                    Ok(_) => {}
                    Err(Error::GlueFailed(_)) => {
                        return Ok(IrreducibilityReport::Counterexample {
                            b1: b1.clone(),
                            g1: origin,
                            b2: b2.clone(),
                            g2,
                        })
                    }
                    Err(Error::BudgetExceeded { .. }) => {
                        return Ok(IrreducibilityReport::Inconclusive { pairs_tested: tested })
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(IrreducibilityReport::Irreducible { pairs_tested: tested })
}

/// For every `p ∈ P` some `t` has `t, tp ∈ dom(B)` and `B(tp) ≠ B(t)`.
pub fn is_p_aperiodic(b: &Block, p: &FiniteSubset) -> bool {
    p.iter().all(|&q| {
        b.iter()
            .any(|(t, v)| matches!(b.get(&(t + q)), Some(w) if w != v))
    })
}

/// First admissible `P`-aperiodic block over the domain schedule.
pub fn find_aperiodic_block(x: &SubshiftSpec, p: &FiniteSubset, radius: usize) -> Result<Block> {
    for t in domain_schedule(x.group, radius) {
        let auto = x.automaton(&t, default_budget())?;
        let total = auto.count();
        let limit = total.to_usize().unwrap_or(usize::MAX).min(1 << 22);
        for values in auto.list(limit) {
            let b = Block {
                domain: t.clone(),
                values,
            };
            if is_p_aperiodic(&b, p) {
                return Ok(b);
            }
        }
    }
    Err(Error::NotFound {
        what: format!("{p:?}-aperiodic block"),
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zs(v: &[i64]) -> FiniteSubset {
        v.iter().map(|&x| Elem::z(x)).collect()
    }

    fn golden() -> SubshiftSpec {
        SubshiftSpec::golden_mean(zs(&[-1, 0, 1])).unwrap()
    }

    #[test]
    fn occurrence() {
        let c = Configuration::from_block(&Block::word(&[0, 1, 0, 1]));
        let b = Block::word(&[1, 0]);
        assert!(c.occurs_at(&b, Elem::z(1)).unwrap());
        assert!(!c.occurs_at(&b, Elem::z(0)).unwrap());
        assert!(c.occurs_at(&Block::empty(), Elem::z(17)).unwrap());
        assert!(matches!(
            c.occurs_at(&b, Elem::z(3)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn enumeration_examples() {
        let g = golden();
        let blocks = enumerate_blocks(&g, &FiniteSubset::interval(0, 4), EnumOptions::default()).unwrap();
        assert_eq!(blocks.len(), 8);
        assert_eq!(blocks[0].values(), &[0, 0, 0, 0]);
        assert_eq!(blocks[7].values(), &[1, 0, 1, 0]);
        assert!(blocks.windows(2).all(|w| w[0].values() < w[1].values()));
        let full2 = SubshiftSpec::full(Group::Z, 2);
        assert_eq!(
            enumerate_blocks(&full2, &FiniteSubset::interval(0, 2), EnumOptions::default()).unwrap().len(),
            4
        );
        let full3 = SubshiftSpec::full(Group::Z2, 3);
        assert_eq!(
            enumerate_blocks(&full3, &FiniteSubset::cube(2, 2), EnumOptions::default()).unwrap().len(),
            81
        );
    }

    #[test]
    fn counting_examples() {
        assert_eq!(count_blocks(&golden(), &FiniteSubset::interval(0, 10)).unwrap(), BigUint::from(144u32));
        assert_eq!(
            count_blocks(&SubshiftSpec::no33(), &FiniteSubset::interval(0, 3)).unwrap(),
            BigUint::from(57u32)
        );
        let full5 = SubshiftSpec::full(Group::Z, 5);
        assert_eq!(count_blocks(&full5, &FiniteSubset::interval(0, 7)).unwrap(), BigUint::from(5u32.pow(7)));
    }

    #[test]
    fn budget_is_explicit() {
        let full = SubshiftSpec::full(Group::Z, 4);
        let err = enumerate_blocks(
            &full,
            &FiniteSubset::interval(0, 12),
            EnumOptions { budget: 1000, extension_margin: None },
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn extension_check_removes_dead_ends() {
        // 1 must be followed by 2, and 2 cannot be followed by anything but 0
        let x = SubshiftSpec::new(
            Group::Z,
            3,
            vec![Block::word(&[1, 0]), Block::word(&[1, 1]), Block::word(&[2, 1]), Block::word(&[2, 2])],
            zs(&[-1, 0, 1]),
        )
        .unwrap();
        let t = FiniteSubset::interval(0, 2);
        let local = enumerate_blocks(&x, &t, EnumOptions::default()).unwrap();
        let global = enumerate_blocks(&x, &t, EnumOptions { extension_margin: Some(2), ..Default::default() }).unwrap();
        assert!(global.len() <= local.len());
        assert!(global.iter().all(|b| local.contains(b)));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_estimate(&SubshiftSpec::full(Group::Z, 2), 9).unwrap(), 1.0);
        let h = entropy_estimate(&golden(), 16).unwrap();
        assert!((h - 0.69424).abs() < 0.05);
    }

    #[test]
    fn irreducibility_examples() {
        let sym = golden();
        assert!(check_strong_irreducibility(&sym, 4, DEFAULT_BUDGET).unwrap().holds());
        let tight = SubshiftSpec::golden_mean(zs(&[0])).unwrap();
        let r = check_strong_irreducibility(&tight, 2, DEFAULT_BUDGET).unwrap();
        assert!(matches!(r, IrreducibilityReport::Counterexample { .. }));
        // D = {0, 1} still lets a second block sit immediately to the left
        let one_sided = SubshiftSpec::golden_mean(zs(&[0, 1])).unwrap();
        match check_strong_irreducibility(&one_sided, 4, DEFAULT_BUDGET).unwrap() {
            IrreducibilityReport::Counterexample { b1, b2, g2, .. } => {
                assert_eq!(g2, Elem::z(-1));
                assert_eq!(b1.values(), &[1]);
                assert_eq!(b2.values(), &[1]);
            }
            other => panic!("expected a counterexample, got {other:?}"),
        }
        let full = SubshiftSpec::full(Group::Z2, 2);
        assert!(check_strong_irreducibility(&full, 2, DEFAULT_BUDGET).unwrap().holds());
    }

    #[test]
    fn aperiodicity() {
        let b = Block::word(&[0, 1, 0, 1]);
        assert!(is_p_aperiodic(&b, &zs(&[1])));
        assert!(!is_p_aperiodic(&b, &zs(&[2])));
        assert!(is_p_aperiodic(&b, &zs(&[])));
        let g = golden();
        assert_eq!(find_aperiodic_block(&g, &zs(&[1]), 3).unwrap(), Block::word(&[0, 1]));
        let full2 = SubshiftSpec::full(Group::Z, 2);
        assert_eq!(find_aperiodic_block(&full2, &zs(&[1, 2]), 4).unwrap(), Block::word(&[0, 0, 1]));
        assert_eq!(find_aperiodic_block(&g, &zs(&[]), 3).unwrap().len(), 1);
        assert!(matches!(
            find_aperiodic_block(&g, &zs(&[0]), 3),
            Err(Error::NotFound { radius: 3, .. })
        ));
    }

    #[test]
    fn glue_examples() {
        let g = SubshiftSpec::golden_mean(zs(&[0, 1])).unwrap();
        let one = Block::word(&[1]);
        let c = glue(&one, Elem::z(0), &one, Elem::z(2), &g, &FiniteSubset::interval(0, 3)).unwrap();
        assert_eq!(c.values(), &[1, 0, 1]);
        assert!(matches!(
            glue(&one, Elem::z(0), &one, Elem::z(1), &g, &FiniteSubset::interval(0, 3)),
            Err(Error::Precondition(_))
        ));
        let full2 = SubshiftSpec::full(Group::Z, 2);
        let c = glue(&one, Elem::z(1), &one, Elem::z(4), &full2, &FiniteSubset::interval(0, 6)).unwrap();
        assert_eq!(c.values(), &[0, 1, 0, 0, 1, 0]);
    }

    #[test]
    fn lower_check_examples() {
        let t = FiniteSubset::interval(0, 10);
        assert!(block_count_lower_check(&golden(), 0.694, 0.1, &t).unwrap());
        let full2 = SubshiftSpec::full(Group::Z, 2);
        assert!(!block_count_lower_check(&full2, 1.0, 0.0, &t).unwrap());
        assert!(block_count_lower_check(&golden(), 0.694, 1.0, &t).unwrap());
    }

    #[test]
    fn spec_json_roundtrip_and_validation() {
        let s = SubshiftSpec::no33();
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.contains("\"D\""));
        assert_eq!(SubshiftSpec::from_json(&js).unwrap(), s);
        let bad = r#"{"group":"Z","alphabet_size":2,"forbidden":[],"D":[[1]]}"#;
        assert!(SubshiftSpec::from_json(bad).is_err());
        let bad = r#"{"group":"Z","alphabet_size":2,"forbidden":[{"domain":[],"values":[]}],"D":[[0]]}"#;
        assert!(SubshiftSpec::from_json(bad).is_err());
    }

    #[test]
    fn rank_unrank_agree_with_listing() {
        let x = SubshiftSpec::no33();
        let t = FiniteSubset::interval(0, 5);
        let auto = x.automaton(&t, DEFAULT_BUDGET).unwrap();
        let all = auto.list(usize::MAX);
        assert_eq!(BigUint::from(all.len()), auto.count());
        for (i, w) in all.iter().enumerate() {
            assert_eq!(auto.rank(w).unwrap(), BigUint::from(i));
            assert_eq!(&auto.unrank(&BigUint::from(i)).unwrap(), w);
        }
        assert!(auto.rank(&[3, 3, 0, 0, 0]).is_none());
    }
}
