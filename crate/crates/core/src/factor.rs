//! Sliding block codes from a subshift onto a full shift.
//!
//! The code looks for marker occurrences in a window around each cell. Each
//! marker carries, on a neighbouring domain `K*`, the shape and offset of an
//! Ornstein–Weiss tile; when the decoded tiles agree with a translate of the
//! fixed quasitiling, the cell's tile of the adjusted exact tiling is known,
//! and the `Y`-block written in that tile is read back as a word over the
//! tile. Everything else maps to `0`.
//!
//! The quasitiling is built on a finite canvas, so the code is defined
//! relative to that canvas; preimages are configurations on it.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{ball, ball_order, Elem, FiniteSubset, Group};
use crate::marker::{build_marker, verify_certificate, MarkerCertificate, MarkerOptions};
use crate::shift::automaton::Automaton;
use crate::shift::{default_budget, domain_schedule, fill_with, log2_big, Block, Configuration, SoftConstraint, SubshiftSpec};
use crate::subsystem::{find_gap_subsystem, GapSubsystem};
use crate::tiling::{adjust_to_exact, ow_quasitiling, ow_shape_count, ratio_f64, Quasitiling, Tile};

/// Surjection from `Y`-blocks on `K*` onto `{0..r-1} × E`: the block's rank
/// modulo `r·|E|`, read row-major.
#[derive(Clone, Debug)]
pub struct PsiTable {
    pub kstar: FiniteSubset,
    pub e: FiniteSubset,
    pub r: usize,
    auto: Arc<Automaton>,
}

/// Builds `ψ`, failing unless `Y` has at least `r·|E|` blocks on `K*`.
pub fn build_psi(y: &SubshiftSpec, kstar: &FiniteSubset, r: usize, e: &FiniteSubset) -> Result<PsiTable> {
    if r == 0 || e.is_empty() {
        return Err(Error::InvalidArgument("ψ needs r ≥ 1 and a nonempty E".into()));
    }
    let auto = y.automaton(kstar, default_budget())?;
    let need = BigUint::from(r * e.len());
    if auto.count() < need {
        return Err(Error::Shortfall(format!(
            "{} Y-blocks on K* but r·|E| = {need}; enlarge K*",
            auto.count()
        )));
    }
    Ok(PsiTable {
        kstar: kstar.clone(),
        e: e.clone(),
        r,
        auto: Arc::new(auto),
    })
}

impl PsiTable {
    pub fn modulus(&self) -> usize {
        self.r * self.e.len()
    }

    pub fn block_count(&self) -> BigUint {
        self.auto.count()
    }

    /// `ψ` of the word read on `K*` in canonical order; `None` off `Y`.
    pub fn value(&self, word: &[u8]) -> Option<(usize, Elem)> {
        let rank = self.auto.rank(word)?;
        let ix = (rank % BigUint::from(self.modulus())).to_usize()?;
        Some((ix / self.e.len(), self.e.as_slice()[ix % self.e.len()]))
    }

    /// The lowest-ranked `Y`-block with `ψ = (j, g)`.
    pub fn witness(&self, j: usize, g: Elem) -> Result<Block> {
        let pos = self
            .e
            .index_of(&g)
            .filter(|_| j < self.r)
            .ok_or_else(|| Error::InvalidArgument(format!("({j}, {g:?}) is outside ψ's range")))?;
        let word = self
            .auto
            .unrank(&BigUint::from(j * self.e.len() + pos))
            .ok_or_else(|| Error::InsufficientData("ψ witness missing".into()))?;
        Block::new(self.kstar.clone(), word)
    }

    /// Whether every value is attained; follows from the count.
    pub fn is_surjective(&self) -> bool {
        self.auto.count() >= BigUint::from(self.modulus())
    }
}

/// Surjection from `Y`-blocks on `P = S_D ∖ D(K ∪ K*)` onto `{0..N-1}^S`: the
/// rank modulo `N^|S|` as little-endian base-`N` digits over `S`.
#[derive(Clone, Debug)]
pub struct PiTable {
    pub cells: FiniteSubset,
    pub domain: FiniteSubset,
    pub n: u32,
    auto: Arc<Automaton>,
}

/// `Π` for shape `s` with `K`, `K*` placed inside it.
pub fn build_pi(
    y: &SubshiftSpec,
    s: &FiniteSubset,
    d: &FiniteSubset,
    k: &FiniteSubset,
    kstar: &FiniteSubset,
    n: u32,
) -> Result<PiTable> {
    let p = s.d_interior(d).difference(&d.product(&k.union(kstar)));
    let auto = y.automaton(&p, default_budget())?;
    pi_from(s, p, n, Arc::new(auto))
}

fn pi_from(s: &FiniteSubset, p: FiniteSubset, n: u32, auto: Arc<Automaton>) -> Result<PiTable> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be ≥ 1".into()));
    }
    let count = auto.count();
    let need = BigUint::from(n).pow(s.len() as u32);
    if count < need {
        let ratio = if n > 1 {
            log2_big(&count) / (s.len() as f64 * (n as f64).log2())
        } else {
            0.0
        };
        return Err(Error::Shortfall(format!(
            "{} Y-blocks on {} cells reach only 2^{:.1} of the N^|S| = {n}^{} targets (log ratio {ratio:.3})",
            count,
            p.len(),
            log2_big(&count),
            s.len()
        )));
    }
    Ok(PiTable {
        cells: s.clone(),
        domain: p,
        n,
        auto,
    })
}

impl PiTable {
    pub fn block_count(&self) -> BigUint {
        self.auto.count()
    }

    fn modulus(&self) -> BigUint {
        BigUint::from(self.n).pow(self.cells.len() as u32)
    }

    /// `Π` of a word on the domain, plus `bump` (mod `N^|S|`); `None` off `Y`.
    pub fn digits(&self, word: &[u8], bump: u32) -> Option<Vec<u8>> {
        let rank = self.auto.rank(word)?;
        let value = (rank + BigUint::from(bump)) % self.modulus();
        let mut out = vec![0u8; self.cells.len()];
        if self.n > 1 && !value.is_zero() {
            for (o, d) in out.iter_mut().zip(value.to_radix_le(self.n)) {
                *o = d;
            }
        }
        Some(out)
    }

    /// The lowest-ranked `Y`-block whose `Π` is `digits`.
    pub fn witness(&self, digits: &[u8]) -> Result<Block> {
        if digits.len() != self.cells.len() || digits.iter().any(|&d| u32::from(d) >= self.n) {
            return Err(Error::InvalidArgument("target word does not fit the tile".into()));
        }
        let value = if self.n > 1 {
            BigUint::from_radix_le(digits, self.n).unwrap_or_default()
        } else {
            BigUint::zero()
        };
        let word = self
            .auto
            .unrank(&value)
            .ok_or_else(|| Error::InsufficientData("Π witness missing".into()))?;
        Block::new(self.domain.clone(), word)
    }
}

/// Stage parameters for [`build_factor_system`].
#[derive(Clone, Debug)]
pub struct FactorConfig {
    /// The target window `W` on which round trips are guaranteed.
    pub window: FiniteSubset,
    /// Quasitiling parameter; fixes the number of shapes `r`.
    pub delta: Ratio<u64>,
    pub marker: MarkerOptions,
    pub gap_radius: usize,
    pub gap_margin: f64,
    /// Upper bound for the smallest quasitiling side.
    pub max_base: usize,
}

impl FactorConfig {
    /// `[0,40)` on `Z`, `[0,12)²` on `Z²`.
    pub fn for_group(group: Group) -> FactorConfig {
        let window = match group {
            Group::Z => FiniteSubset::interval(0, 40),
            Group::Z2 => FiniteSubset::cube(2, 12),
        };
        FactorConfig {
            window,
            delta: Ratio::new(1, 4),
            marker: MarkerOptions::default(),
            gap_radius: 4,
            gap_margin: 0.1,
            max_base: 400,
        }
    }
}

/// The serializable description of a factor system. Tilings, tables and
/// automata are rebuilt from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    #[serde(rename = "X")]
    pub x: SubshiftSpec,
    pub gap: GapSubsystem,
    #[serde(rename = "N")]
    pub n_symbols: u32,
    pub marker: MarkerCertificate,
    /// `K*`, relative to the marker origin; disjoint from `DK` both ways.
    pub kstar: FiniteSubset,
    /// Marker origin relative to its anchor in the `T` lattice.
    pub marker_shift: Elem,
    pub r: usize,
    pub delta: Ratio<u64>,
    /// Smallest quasitiling side.
    pub base: usize,
    pub horizon: i64,
    /// The code window is `[-rho, rho]^d`.
    pub rho: i64,
    pub canvas_lo: Elem,
    pub canvas_hi: Elem,
    pub window: FiniteSubset,
    /// Fault injection: every symbol decoded in the tile with this center is
    /// shifted by 1 mod N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupt_tile: Option<Elem>,
}

/// One tile of the quasitiling with its adjusted cells.
#[derive(Clone, Debug)]
pub struct TileInfo {
    pub tile: Tile,
    /// The tile of the exact tiling with this center.
    pub cells: FiniteSubset,
    pub marker_at: Elem,
    /// `D(K ∪ K*)` at the marker lies inside `cells`.
    pub markable: bool,
    mr_lo: Elem,
    mr_hi: Elem,
    pub pi: Option<PiTable>,
}

#[derive(Clone, Debug)]
pub struct FactorSystem {
    pub params: FactorParams,
    pub quasitiling: Quasitiling,
    pub exact: Quasitiling,
    pub tiles: Vec<TileInfo>,
    pub psi: PsiTable,
    canvas: FiniteSubset,
    owner: HashMap<Elem, usize>,
    /// `K ∪ K*` relative to the marker origin, with its bounding box.
    region: FiniteSubset,
    region_lo: Elem,
    region_hi: Elem,
}

fn box_of(lo: Elem, hi: Elem) -> FiniteSubset {
    let hi: Vec<i64> = hi.coords().iter().map(|c| c + 1).collect();
    FiniteSubset::box_range(lo.coords(), &hi)
}

fn splat(dim: usize, v: i64) -> Elem {
    Elem::new(&vec![v; dim])
}

fn box_inside(lo: Elem, hi: Elem, outer_lo: Elem, outer_hi: Elem) -> bool {
    (0..lo.dim()).all(|i| lo.coord(i) >= outer_lo.coord(i) && hi.coord(i) <= outer_hi.coord(i))
}

fn anchor_of(center: Elem, side: i64) -> Elem {
    let v: Vec<i64> = center.coords().iter().map(|c| c.div_euclid(side) * side).collect();
    Elem::new(&v)
}

/// `K*`: the first schedule box with more than `need` `Y`-blocks, at the
/// first ball offset separated from `K` both ways.
fn place_kstar(y: &SubshiftSpec, k: &FiniteSubset, d: &FiniteSubset, need: usize) -> Result<FiniteSubset> {
    let radius = 12;
    let shape = domain_schedule(y.group, radius)
        .into_iter()
        .find(|t| {
            y.automaton(t, default_budget())
                .map(|a| a.count() > BigUint::from(need))
                .unwrap_or(false)
        })
        .ok_or_else(|| Error::NotFound {
            what: format!("K* with more than {need} Y-blocks"),
            radius,
        })?;
    let dk = d.product(k);
    let reach = (k.extent() + shape.extent() + d.extent() + 2) * y.dim() as i64;
    ball(y.dim(), reach)
        .into_iter()
        .map(|o| shape.translate(o))
        .find(|s| s.is_disjoint(&dk) && d.product(s).is_disjoint(k))
        .ok_or_else(|| Error::NotFound {
            what: "offset for K* clear of DK".into(),
            radius,
        })
}

impl FactorSystem {
    /// Rebuilds tilings and tables from `params`.
    pub fn from_params(params: FactorParams) -> Result<FactorSystem> {
        let canvas = box_of(params.canvas_lo, params.canvas_hi);
        let q = ow_quasitiling(params.delta, params.base, &canvas)?;
        let e = params.marker.companions.t_shape();
        let (exact, _) = adjust_to_exact(&q, &e, params.delta, &canvas, params.horizon)?;
        let y = &params.gap.y;
        let d = &params.marker.d;
        let psi = build_psi(y, &params.kstar, params.r, &e)?;
        let region = params.marker.k().union(&params.kstar);
        let (region_lo, region_hi) = region.bbox().expect("nonempty marker region");
        let d_region = d.product(&region);
        let side = params.marker.companions.t_side;

        let mut owner = HashMap::new();
        let mut tiles = Vec::with_capacity(exact.tiles.len());
        let mut by_center: HashMap<Elem, Tile> = HashMap::new();
        for t in &q.tiles {
            if by_center.insert(t.center, *t).is_some() {
                return Err(Error::Tiling(format!("two quasitiles share center {:?}", t.center)));
            }
        }
        let mut cache: HashMap<(FiniteSubset, usize), Arc<Automaton>> = HashMap::new();
        for t2 in &exact.tiles {
            let tile = by_center[&t2.center];
            let cells = exact.tile_set(t2);
            let marker_at = anchor_of(tile.center, side) + params.marker_shift;
            let markable = d_region.translate(marker_at).is_subset(&cells);
            let ix = tiles.len();
            for c in cells.iter() {
                owner.insert(*c, ix);
            }
            let pi = if markable && !cells.is_disjoint(&params.window) {
                let p = cells
                    .d_interior(d)
                    .difference(&d_region.translate(marker_at));
                let key = (p.translate(marker_at.inv()), cells.len());
                let auto = match cache.get(&key) {
                    Some(a) => a.clone(),
                    None => {
                        let a = Arc::new(y.automaton(&p, default_budget())?);
                        cache.insert(key, a.clone());
                        a
                    }
                };
                Some(pi_from(&cells, p, params.n_symbols, auto)?)
            } else {
                None
            };
            tiles.push(TileInfo {
                tile,
                cells,
                marker_at,
                markable,
                mr_lo: region_lo + marker_at,
                mr_hi: region_hi + marker_at,
                pi,
            });
        }
        for t in &tiles {
            if !t.cells.is_disjoint(&params.window) && t.pi.is_none() {
                return Err(Error::Precondition(format!(
                    "tile at {:?} meets the target window but cannot hold the marker region",
                    t.tile.center
                )));
            }
        }
        Ok(FactorSystem {
            params,
            quasitiling: q,
            exact,
            tiles,
            psi,
            canvas,
            owner,
            region,
            region_lo,
            region_hi,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.params)?)
    }

    pub fn from_json(s: &str) -> Result<FactorSystem> {
        FactorSystem::from_params(serde_json::from_str(s)?)
    }

    pub fn dim(&self) -> usize {
        self.params.x.dim()
    }

    pub fn canvas(&self) -> &FiniteSubset {
        &self.canvas
    }

    /// `H′ = [-ρ, ρ]^d`.
    pub fn code_window(&self) -> FiniteSubset {
        let r = self.params.rho;
        box_of(splat(self.dim(), -r), splat(self.dim(), r))
    }

    /// Planted marker positions: the marker origin of every markable tile.
    pub fn marker_positions(&self) -> Vec<Elem> {
        self.tiles.iter().filter(|t| t.markable).map(|t| t.marker_at).collect()
    }

    /// Markable tiles whose marker region lies in the box `[lo, hi]`, as
    /// sorted (shape, center + v) pairs.
    fn expected(&self, lo: Elem, hi: Elem, v: Elem) -> Vec<(usize, Elem)> {
        let mut out: Vec<(usize, Elem)> = self
            .tiles
            .iter()
            .filter(|t| t.markable && box_inside(t.mr_lo, t.mr_hi, lo, hi))
            .map(|t| (t.tile.shape, t.tile.center + v))
            .collect();
        out.sort();
        out
    }

    /// Candidate translates, in ball order, under which `decoded` equals the
    /// expected tiles of the window `g + H′`; each yields the index of the
    /// tile owning `g - v`.
    fn matches(&self, decoded: &[(usize, Elem)], g: Elem) -> Vec<(usize, Elem)> {
        let Some(&(j, c)) = decoded.first() else {
            return Vec::new();
        };
        let rho = splat(self.dim(), self.params.rho);
        let (clo, chi) = (self.params.canvas_lo, self.params.canvas_hi);
        let mut cands: Vec<Elem> = self
            .tiles
            .iter()
            .filter(|t| t.markable && t.tile.shape == j)
            .map(|t| c - t.tile.center)
            .collect();
        cands.sort_by(ball_order);
        cands.dedup();
        let mut out = Vec::new();
        for v in cands {
            let (lo, hi) = (g - v - rho, g - v + rho);
            if !box_inside(lo, hi, clo, chi) {
                continue;
            }
            if self.expected(lo, hi, v) == decoded {
                if let Some(&ix) = self.owner.get(&(g - v)) {
                    out.push((ix, v));
                }
            }
        }
        out
    }

    /// Decoded tiles from marker occurrences at `positions` inside `g + H′`;
    /// `None` when some witness is not a `Y`-block.
    fn decode_markers(&self, c: &Configuration, positions: &[Elem], g: Elem) -> Option<Vec<(usize, Elem)>> {
        let rho = splat(self.dim(), self.params.rho);
        let (lo, hi) = (g - rho, g + rho);
        let mut decoded = Vec::new();
        for &p in positions {
            if !box_inside(self.region_lo + p, self.region_hi + p, lo, hi) {
                continue;
            }
            let word: Vec<u8> = self
                .psi
                .kstar
                .iter()
                .map(|t| c.get(&(*t + p)))
                .collect::<Option<Vec<u8>>>()?;
            let (j, off) = self.psi.value(&word)?;
            decoded.push((j, p - self.params.marker_shift + off));
        }
        decoded.sort();
        Some(decoded)
    }

    /// Marker occurrences with the whole region `K ∪ K*` inside `[lo, hi]`.
    fn scan_markers(&self, c: &Configuration, lo: Elem, hi: Elem) -> Vec<Elem> {
        let (plo, phi) = (lo - self.region_lo, hi - self.region_hi);
        if (0..lo.dim()).any(|i| plo.coord(i) > phi.coord(i)) {
            return Vec::new();
        }
        box_of(plo, phi)
            .iter()
            .copied()
            .filter(|&p| c.matches_at(&self.params.marker.m, p))
            .collect()
    }

    fn symbol_at(&self, c: &Configuration, markers: &[Elem], g: Elem) -> u8 {
        let Some(decoded) = self.decode_markers(c, markers, g) else {
            return 0;
        };
        let Some(&(ix, v)) = self.matches(&decoded, g).first() else {
            return 0;
        };
        let tile = &self.tiles[ix];
        let Some(pi) = &tile.pi else {
            return 0;
        };
        let Some(word) = pi.domain.iter().map(|t| c.get(&(*t + v))).collect::<Option<Vec<u8>>>() else {
            return 0;
        };
        let Some(digits) = pi.digits(&word, 0) else {
            return 0;
        };
        let pos = tile.cells.index_of(&(g - v)).expect("owner tile contains the cell");
        let bump = u8::from(self.params.corrupt_tile == Some(tile.tile.center));
        ((u32::from(digits[pos]) + u32::from(bump)) % pi.n) as u8
    }

    fn check_window(&self, c: &Configuration, lo: Elem, hi: Elem) -> Result<()> {
        let inside = match c.window().bbox() {
            Some((wlo, whi)) => box_inside(lo, hi, wlo, whi) && c.window().len() == c.window().hull().len(),
            None => false,
        };
        if inside || box_of(lo, hi).is_subset(c.window()) {
            Ok(())
        } else {
            Err(Error::InsufficientData(format!(
                "code window around [{lo:?}, {hi:?}] is not inside the configuration"
            )))
        }
    }

    /// The code's symbol at `g`; reads only `c(g + H′)`.
    pub fn apply_code(&self, c: &Configuration, g: Elem) -> Result<u8> {
        let rho = splat(self.dim(), self.params.rho);
        self.check_window(c, g - rho, g + rho)?;
        let markers = self.scan_markers(c, g - rho, g + rho);
        Ok(self.symbol_at(c, &markers, g))
    }

    /// [`FactorSystem::apply_code`] at every cell of `w`, sharing one marker
    /// scan.
    pub fn apply_code_window(&self, c: &Configuration, w: &FiniteSubset) -> Result<Configuration> {
        let (wlo, whi) = w.bbox().ok_or(Error::EmptySet("decode window"))?;
        let rho = splat(self.dim(), self.params.rho);
        self.check_window(c, wlo - rho, whi + rho)?;
        let markers = self.scan_markers(c, wlo - rho, whi + rho);
        let values = w.iter().map(|&g| self.symbol_at(c, &markers, g)).collect();
        Configuration::new(w.clone(), values)
    }

    /// A canvas configuration whose code equals `z` on `z`'s window.
    pub fn build_preimage(&self, z: &Configuration) -> Result<Configuration> {
        if !z.window().is_subset(&self.params.window) {
            return Err(Error::Precondition(
                "target window lies outside the prepared window".into(),
            ));
        }
        let m = &self.params.marker.m;
        let d = &self.params.marker.d;
        let side = self.params.marker.companions.t_side;
        let mut fixed: Vec<(Elem, u8)> = Vec::new();
        let mut exempt: HashSet<Elem> = HashSet::new();
        for t in self.tiles.iter().filter(|t| t.markable) {
            fixed.extend(m.translate(t.marker_at).iter());
            let g = t.tile.center - anchor_of(t.tile.center, side);
            fixed.extend(self.psi.witness(t.tile.shape, g)?.translate(t.marker_at).iter());
            exempt.extend(d.product(m.domain()).translate(t.marker_at).iter().copied());
            if let Some(pi) = &t.pi {
                let digits: Vec<u8> = t.cells.iter().map(|u| z.get(u).unwrap_or(0)).collect();
                fixed.extend(pi.witness(&digits)?.iter());
            }
        }
        let soft: Vec<SoftConstraint> = self
            .params
            .gap
            .y
            .forbidden
            .iter()
            .map(|p| SoftConstraint {
                pattern: p.clone(),
                exempt: exempt.clone(),
            })
            .collect();
        let order: Vec<u8> = (0..self.params.x.alphabet_size).collect();
        fill_with(&self.params.x, &self.canvas, fixed, &soft, &order, default_budget())
    }

    /// Positions `p` with `K + p` inside the canvas and `x(K + p) = M`.
    pub fn marker_occurrences(&self, c: &Configuration) -> Vec<Elem> {
        let (klo, khi) = self.params.marker.k().bbox().expect("nonempty K");
        let (plo, phi) = (self.params.canvas_lo - klo, self.params.canvas_hi - khi);
        box_of(plo, phi)
            .iter()
            .copied()
            .filter(|&p| c.matches_at(&self.params.marker.m, p))
            .collect()
    }

    /// For every `g ∈ W`, every translate accepted by the decoder on the
    /// planted tiles must give the true tile. Returns the failing cells.
    pub fn determinability_failures(&self) -> Vec<Elem> {
        let rho = splat(self.dim(), self.params.rho);
        let mut bad = Vec::new();
        for &g in self.params.window.iter() {
            let truth = self.owner.get(&g).copied();
            let decoded = self.expected(g - rho, g + rho, splat(self.dim(), 0));
            let found = self.matches(&decoded, g);
            let ok = !found.is_empty()
                && found.iter().all(|&(ix, v)| {
                    Some(ix) == truth.and_then(|t| {
                        let (a, b) = (&self.tiles[t], &self.tiles[ix]);
                        (a.cells == b.cells.translate(v) && a.marker_at == b.marker_at + v).then_some(ix)
                    })
                });
            if !ok {
                bad.push(g);
            }
        }
        bad
    }
}

/// `D_X` together with every difference of two cells of a forbidden pattern
/// of `Y`: `Y`-blocks on sets that are `D`-apart then glue, which fixed
/// pieces of a preimage rely on.
fn gluing_window(x: &SubshiftSpec, y: &SubshiftSpec) -> FiniteSubset {
    let mut d = x.d.clone();
    for p in &y.forbidden {
        d = d.union(&p.domain().product(&p.domain().inverse()));
    }
    d
}

/// Builds the whole system: gap subsystem, marker, `K*`, then grows the
/// quasitiling side until every tile meeting `W` holds the marker region and
/// enough `Y`-blocks, and the code window until decoding is unambiguous.
pub fn build_factor_system(x: &SubshiftSpec, n_symbols: u32, cfg: &FactorConfig) -> Result<FactorSystem> {
    let (x, gap) = gap_subsystem(x, n_symbols, cfg).map_err(|e| e.in_stage("subsystem"))?;
    let marker = build_marker(&x, &gap.y, cfg.marker).map_err(|e| e.in_stage("marker"))?;
    verify_certificate(&marker, &x).map_err(|e| e.in_stage("marker"))?;
    assemble_factor_system(&x, gap, marker, n_symbols, cfg)
}

/// The gap subsystem `Y` for `N` symbols, with `D` widened on both `X` and
/// `Y` to the gluing window. Returns the widened `X` alongside.
pub fn gap_subsystem(x: &SubshiftSpec, n_symbols: u32, cfg: &FactorConfig) -> Result<(SubshiftSpec, GapSubsystem)> {
    if cfg.window.dim() != Some(x.dim()) {
        return Err(Error::InvalidArgument("target window has the wrong dimension".into()));
    }
    let mut gap = find_gap_subsystem(x, n_symbols, cfg.gap_radius, cfg.gap_margin)?;
    let d = gluing_window(x, &gap.y);
    let mut x = x.clone();
    x.d = d.clone();
    gap.y.d = d;
    Ok((x, gap))
}

/// The factor stage proper, from a verified marker for `(X, Y)`.
pub fn assemble_factor_system(
    x: &SubshiftSpec,
    gap: GapSubsystem,
    marker: MarkerCertificate,
    n_symbols: u32,
    cfg: &FactorConfig,
) -> Result<FactorSystem> {
    let r = ow_shape_count(ratio_f64(cfg.delta));
    let e = marker.companions.t_shape();
    let kstar = place_kstar(&gap.y, marker.k(), &marker.d, r * e.len()).map_err(|e| e.in_stage("factor"))?;
    let region = marker.k().union(&kstar);
    let (lo, hi) = region.bbox().expect("nonempty");
    let mid: Vec<i64> = (0..lo.dim()).map(|i| -(lo.coord(i) + hi.coord(i)).div_euclid(2)).collect();
    let dim = x.dim();
    let (wlo, whi) = cfg.window.bbox().expect("nonempty window");
    let first_base = (marker.d.product(&region).extent() + 2 * marker.d.extent()) as usize;

    let mut params = FactorParams {
        x: x.clone(),
        gap,
        n_symbols,
        marker,
        kstar,
        marker_shift: Elem::new(&mid),
        r,
        delta: cfg.delta,
        base: first_base,
        horizon: 0,
        rho: 0,
        canvas_lo: wlo,
        canvas_hi: whi,
        window: cfg.window.clone(),
        corrupt_tile: None,
    };
    let mut last_err = None;
    for base in first_base..=cfg.max_base {
        params.base = base;
        params.horizon = ((base + r) * dim) as i64;
        match size_canvas(&mut params, wlo, whi) {
            Ok(fs) => return Ok(fs),
            Err(e @ (Error::Shortfall(_) | Error::Precondition(_))) => last_err = Some(e),
            Err(e) => return Err(e.in_stage("factor")),
        }
    }
    Err(last_err
        .unwrap_or_else(|| Error::Precondition("no quasitiling side tried".into()))
        .in_stage("factor"))
}

/// For a fixed quasitiling side: grows the canvas margin and `ρ` until the
/// code window fits and decoding on `W` is unambiguous.
fn size_canvas(params: &mut FactorParams, wlo: Elem, whi: Elem) -> Result<FactorSystem> {
    let dim = wlo.dim();
    let mut margin = 2 * (params.base + params.r) as i64;
    for _ in 0..64 {
        params.canvas_lo = wlo - splat(dim, margin);
        params.canvas_hi = whi + splat(dim, margin);
        params.rho = 0;
        let mut fs = loop {
            match FactorSystem::from_params(params.clone()) {
                Err(Error::Tiling(msg)) if msg.contains("no center within horizon") => {
                    params.horizon *= 2;
                }
                other => break other?,
            }
        };
        let mut rho = 0;
        for t in fs.tiles.iter().filter(|t| !t.cells.is_disjoint(&params.window)) {
            let span = t.cells.union(&fs.region.translate(t.marker_at));
            rho = rho.max(span.extent());
        }
        loop {
            fs.params.rho = rho;
            let fits = box_inside(wlo - splat(dim, rho), whi + splat(dim, rho), params.canvas_lo, params.canvas_hi);
            if !fits {
                break;
            }
            if fs.determinability_failures().is_empty() {
                *params = fs.params.clone();
                return Ok(fs);
            }
            rho += 1;
        }
        margin = margin.max(rho + (params.base + params.r) as i64) + 1;
    }
    Err(Error::Precondition("canvas sizing did not settle".into()))
}

/// Per-trial outcome of a failed round trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub mismatches: Vec<Elem>,
    /// Centers of the tiles containing mismatched cells.
    pub tiles: Vec<Elem>,
    pub marker_unique: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurjectivityReport {
    pub trials: usize,
    pub seed: u64,
    pub symbols_checked: u64,
    pub symbols_matched: u64,
    pub marker_unique_all: bool,
    pub failures: Vec<TrialFailure>,
}

impl SurjectivityReport {
    pub fn match_rate(&self) -> f64 {
        if self.symbols_checked == 0 {
            1.0
        } else {
            self.symbols_matched as f64 / self.symbols_checked as f64
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.marker_unique_all
    }
}

/// Random targets on `W` (seeded), preimage, decode, compare; also checks
/// that markers occur exactly at the planted positions.
pub fn verify_surjectivity(fs: &FactorSystem, trials: usize, seed: u64) -> Result<SurjectivityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = &fs.params.window;
    let planted: HashSet<Elem> = fs.marker_positions().into_iter().collect();
    let mut report = SurjectivityReport {
        trials,
        seed,
        symbols_checked: 0,
        symbols_matched: 0,
        marker_unique_all: true,
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let values: Vec<u8> = (0..w.len()).map(|_| rng.gen_range(0..fs.params.n_symbols) as u8).collect();
        let z = Configuration::new(w.clone(), values)?;
        let x = fs.build_preimage(&z)?;
        let out = fs.apply_code_window(&x, w)?;
        let mut mismatches = Vec::new();
        for (g, (a, b)) in w.iter().zip(z.values().iter().zip(out.values())) {
            report.symbols_checked += 1;
            if a == b {
                report.symbols_matched += 1;
            } else {
                mismatches.push(*g);
            }
        }
        let found: HashSet<Elem> = fs.marker_occurrences(&x).into_iter().collect();
        let unique = found == planted;
        report.marker_unique_all &= unique;
        if !mismatches.is_empty() || !unique {
            let mut tiles: Vec<Elem> = mismatches
                .iter()
                .filter_map(|g| fs.owner.get(g).map(|&ix| fs.tiles[ix].tile.center))
                .collect();
            tiles.sort();
            tiles.dedup();
            report.failures.push(TrialFailure {
                trial,
                mismatches,
                tiles,
                marker_unique: unique,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn golden() -> SubshiftSpec {
        SubshiftSpec::golden_mean(FiniteSubset::interval(-1, 2)).unwrap()
    }

    fn no33_system() -> &'static FactorSystem {
        static FS: OnceLock<FactorSystem> = OnceLock::new();
        FS.get_or_init(|| {
            build_factor_system(&SubshiftSpec::no33(), 2, &FactorConfig::for_group(Group::Z)).unwrap()
        })
    }

    #[test]
    fn psi_examples() {
        let y = golden();
        let kstar = FiniteSubset::interval(0, 4);
        let e = FiniteSubset::interval(0, 3);
        let psi = build_psi(&y, &kstar, 2, &e).unwrap();
        assert_eq!(psi.block_count(), BigUint::from(8u32));
        assert!(psi.is_surjective());
        // ranks 0..7 mod 6 reach every (j, g)
        let mut seen = HashSet::new();
        for (rank, word) in y.automaton(&kstar, 1000).unwrap().list(100).into_iter().enumerate() {
            let v = psi.value(&word).unwrap();
            assert_eq!(v, (rank % 6 / 3, Elem::z((rank % 6 % 3) as i64)));
            seen.insert(v);
        }
        assert_eq!(seen.len(), 6);
        let one = build_psi(&y, &kstar, 1, &FiniteSubset::singleton(Elem::z(0))).unwrap();
        assert_eq!(one.value(&[1, 0, 1, 0]), Some((0, Elem::z(0))));
        assert!(matches!(build_psi(&y, &kstar, 3, &e), Err(Error::Shortfall(_))));
        let w = psi.witness(1, Elem::z(2)).unwrap();
        assert_eq!(psi.value(w.values()), Some((1, Elem::z(2))));
    }

    #[test]
    fn pi_examples() {
        let y = golden();
        let d = FiniteSubset::interval(-1, 2);
        let s = FiniteSubset::interval(0, 12);
        let k = FiniteSubset::singleton(Elem::z(3));
        let ks = FiniteSubset::singleton(Elem::z(8));
        let one = build_pi(&y, &s, &d, &k, &ks, 1).unwrap();
        assert_eq!(one.digits(&vec![0; one.domain.len()], 0).unwrap(), vec![0; 12]);
        // P = [1,11) ∖ ({2,3,4} ∪ {7,8,9}) has 4 cells: far fewer than 2^12 words
        assert!(matches!(build_pi(&y, &s, &d, &k, &ks, 2), Err(Error::Shortfall(_))));
        let no33 = SubshiftSpec::no33().with_forbidden(&[Block::word(&[0])]);
        let s = FiniteSubset::interval(0, 20);
        let pi = build_pi(&no33, &s, &d, &FiniteSubset::empty(), &FiniteSubset::empty(), 2).unwrap();
        let target: Vec<u8> = (0..20).map(|i| (i % 3 == 0) as u8).collect();
        let a = pi.witness(&target).unwrap();
        assert_eq!(pi.digits(a.values(), 0).unwrap(), target);
        // 3^20 targets exceed the Y-blocks on 18 cells
        assert!(build_pi(&no33, &s, &d, &FiniteSubset::empty(), &FiniteSubset::empty(), 3).is_err());
    }

    #[test]
    fn no33_round_trip() {
        let fs = no33_system();
        assert!(fs.determinability_failures().is_empty());
        let report = verify_surjectivity(fs, 8, 11).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.match_rate(), 1.0);

        let w = &fs.params.window;
        let zeros = Configuration::new(w.clone(), vec![0; w.len()]).unwrap();
        let x = fs.build_preimage(&zeros).unwrap();
        assert_eq!(fs.apply_code_window(&x, w).unwrap(), zeros);
        let alt = Configuration::new(w.clone(), (0..w.len()).map(|i| (i % 2) as u8).collect()).unwrap();
        let x = fs.build_preimage(&alt).unwrap();
        assert_eq!(fs.apply_code_window(&x, w).unwrap(), alt);
        for &g in w.iter().step_by(7) {
            assert_eq!(fs.apply_code(&x, g).unwrap(), alt.get(&g).unwrap());
        }
    }

    #[test]
    fn fallbacks_and_errors() {
        let fs = no33_system();
        let canvas = fs.canvas().clone();
        // only 1s: no marker anywhere
        let blank = Configuration::new(canvas.clone(), vec![1; canvas.len()]).unwrap();
        let g = *fs.params.window.first().unwrap();
        assert_eq!(fs.apply_code(&blank, g).unwrap(), 0);
        // a lone marker that matches no translate of the quasitiling
        let mut x = blank.as_block();
        let lone = fs.params.marker.m.translate(fs.tiles[0].marker_at + Elem::z(1));
        x = Block::from_pairs(x.iter().filter(|(c, _)| lone.get(c).is_none()).chain(lone.iter())).unwrap();
        let x = Configuration::from_block(&x);
        for &g in fs.params.window.iter() {
            assert_eq!(fs.apply_code(&x, g).unwrap(), 0);
        }
        let small = Configuration::new(fs.params.window.clone(), vec![1; 40]).unwrap();
        assert!(fs.apply_code(&small, g).is_err());
        let outside = Configuration::new(FiniteSubset::interval(-500, -490), vec![0; 10]).unwrap();
        assert!(fs.build_preimage(&outside).is_err());
        assert!(verify_surjectivity(fs, 0, 1).unwrap().passed());
    }

    #[test]
    fn corrupted_tile_is_localized() {
        let mut fs = no33_system().clone();
        let target = fs.tiles.iter().find(|t| t.pi.is_some()).unwrap().tile.center;
        fs.params.corrupt_tile = Some(target);
        let report = verify_surjectivity(&fs, 3, 5).unwrap();
        assert_eq!(report.failures.len(), 3);
        for f in &report.failures {
            assert_eq!(f.tiles, vec![target]);
            assert!(f.marker_unique);
        }
    }

    #[test]
    fn params_round_trip() {
        let fs = no33_system();
        let json = fs.to_json().unwrap();
        let back = FactorSystem::from_json(&json).unwrap();
        assert_eq!(back.params, fs.params);
        assert_eq!(back.to_json().unwrap(), json);
        assert_eq!(back.exact.tiles, fs.exact.tiles);
    }

    #[test]
    fn too_many_symbols() {
        let err = build_factor_system(&SubshiftSpec::no33(), 4, &FactorConfig::for_group(Group::Z)).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "subsystem", .. }), "{err}");
    }

    #[test]
    fn full3_z2_round_trip() {
        let x = SubshiftSpec::full(Group::Z2, 3);
        let fs = build_factor_system(&x, 2, &FactorConfig::for_group(Group::Z2)).unwrap();
        // the vertical pattern of Y widens D beyond {e}
        assert!(fs.params.marker.d.contains(&Elem::z2(0, 1)));
        assert!(fs.params.marker.d.contains(&Elem::z2(0, -1)));
        let report = verify_surjectivity(&fs, 3, 2).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn code_is_shift_equivariant(seed in 0u64..1000, shift in -30i64..30) {
            let fs = no33_system();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = &fs.params.window;
            let z = Configuration::new(w.clone(), (0..w.len()).map(|_| rng.gen_range(0..2)).collect()).unwrap();
            let x = fs.build_preimage(&z).unwrap();
            let moved = x.translate(Elem::z(shift));
            for &g in w.iter().step_by(5) {
                let a = fs.apply_code(&x, g).unwrap();
                let b = fs.apply_code(&moved, g + Elem::z(shift)).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
