//! Quasitilings and exact tilings of Z and Z².
//!
//! A tile is a translate `S·c` of a shape `S` by its center `c`. Tiles are
//! ordered canonically by `(pass, larger shape first, center)`, where `pass`
//! is the construction round that placed the tile. Cores, coverage owners and
//! the exact adjustment all follow this order.

use std::collections::HashMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Elem, FiniteSubset};

/// One tile: `shapes[shape] + center`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tile {
    #[serde(rename = "c")]
    pub center: Elem,
    pub shape: usize,
    #[serde(default)]
    pub pass: u8,
}

/// Tiles on a finite working window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quasitiling {
    pub shapes: Vec<FiniteSubset>,
    #[serde(rename = "centers")]
    pub tiles: Vec<Tile>,
    pub exact: bool,
    pub window: FiniteSubset,
}

/// Dense storage over the bounding box of a window.
#[derive(Clone, Debug)]
pub(crate) struct Lattice<T> {
    lo: [i64; 2],
    size: [i64; 2],
    dim: usize,
    data: Vec<T>,
}

impl<T: Clone> Lattice<T> {
    pub fn over(window: &FiniteSubset, fill: T) -> Lattice<T> {
        let (lo, hi) = window.bbox().unwrap_or((Elem::z(0), Elem::z(-1)));
        let dim = lo.dim();
        let mut l = [0; 2];
        let mut size = [1; 2];
        for i in 0..dim {
            l[i] = lo.coord(i);
            size[i] = (hi.coord(i) - lo.coord(i) + 1).max(0);
        }
        Lattice {
            lo: l,
            size,
            dim,
            data: vec![fill; (size[0] * size[1]) as usize],
        }
    }

    fn offset(&self, e: &Elem) -> Option<usize> {
        let x = e.coord(0) - self.lo[0];
        let y = if self.dim == 2 { e.coord(1) - self.lo[1] } else { 0 };
        (x >= 0 && y >= 0 && x < self.size[0] && y < self.size[1])
            .then(|| (x * self.size[1] + y) as usize)
    }

    pub fn get(&self, e: &Elem) -> Option<&T> {
        self.offset(e).map(|o| &self.data[o])
    }

    pub fn set(&mut self, e: &Elem, v: T) -> bool {
        match self.offset(e) {
            Some(o) => {
                self.data[o] = v;
                true
            }
            None => false,
        }
    }
}

impl Lattice<bool> {
    /// Prefix sums for counting set cells in axis-parallel boxes.
    pub fn box_sums(&self) -> BoxSums {
        let (w, h) = (self.size[0] as usize, self.size[1] as usize);
        let mut sums = vec![0u32; (w + 1) * (h + 1)];
        for x in 0..w {
            for y in 0..h {
                let v = self.data[x * h + y] as u32;
                sums[(x + 1) * (h + 1) + y + 1] =
                    v + sums[x * (h + 1) + y + 1] + sums[(x + 1) * (h + 1) + y] - sums[x * (h + 1) + y];
            }
        }
        BoxSums {
            lo: self.lo,
            size: self.size,
            dim: self.dim,
            sums,
        }
    }
}

/// Summed-area table over a lattice's bounding box.
pub(crate) struct BoxSums {
    lo: [i64; 2],
    size: [i64; 2],
    dim: usize,
    sums: Vec<u32>,
}

impl BoxSums {
    /// Number of set cells in the inclusive box `[lo, hi]`.
    pub fn count(&self, lo: Elem, hi: Elem) -> usize {
        let clamp = |v: i64, i: usize| (v - self.lo[i]).clamp(0, self.size[i]) as usize;
        let x0 = clamp(lo.coord(0), 0);
        let x1 = clamp(hi.coord(0) + 1, 0);
        let (y0, y1) = if self.dim == 2 {
            (clamp(lo.coord(1), 1), clamp(hi.coord(1) + 1, 1))
        } else {
            (0, 1)
        };
        if x0 >= x1 || y0 >= y1 {
            return 0;
        }
        let h = self.size[1] as usize + 1;
        let at = |x: usize, y: usize| self.sums[x * h + y] as i64;
        (at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0)) as usize
    }
}

impl Quasitiling {
    pub fn dim(&self) -> usize {
        self.window.dim().unwrap_or(1)
    }

    pub fn tile_set(&self, t: &Tile) -> FiniteSubset {
        self.shapes[t.shape].translate(t.center)
    }

    /// Sort key of the canonical tile order.
    pub fn order_key(&self, t: &Tile) -> (u8, std::cmp::Reverse<usize>, Elem) {
        (t.pass, std::cmp::Reverse(self.shapes[t.shape].len()), t.center)
    }

    /// Tiles sorted canonically.
    pub fn canonical_tiles(&self) -> Vec<Tile> {
        let mut v = self.tiles.clone();
        v.sort_by_key(|t| self.order_key(t));
        v
    }

    /// Disjoint cores: each tile minus all canonically earlier tiles.
    pub fn cores(&self) -> Vec<(Tile, FiniteSubset)> {
        let mut taken: std::collections::HashSet<Elem> = Default::default();
        let mut out = Vec::with_capacity(self.tiles.len());
        for t in self.canonical_tiles() {
            let set = self.tile_set(&t);
            let core: FiniteSubset = set.iter().filter(|g| !taken.contains(g)).copied().collect();
            taken.extend(set.iter().copied());
            out.push((t, core));
        }
        out
    }

    pub fn centers(&self) -> FiniteSubset {
        self.tiles.iter().map(|t| t.center).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Quasitiling> {
        let t: Quasitiling = serde_json::from_str(s)?;
        if t.tiles.iter().any(|x| x.shape >= t.shapes.len()) {
            return Err(Error::InvalidArgument("tile refers to a missing shape".into()));
        }
        Ok(t)
    }
}

/// The exact tiling of Z^d by boxes `[0, side)^d` centered on `(side·Z)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicTiling {
    pub dim: usize,
    pub side: i64,
}

pub fn periodic_tiling(dim: usize, side: i64) -> Result<PeriodicTiling> {
    if side < 1 || !(1..=2).contains(&dim) {
        return Err(Error::InvalidArgument(format!(
            "periodic tiling needs side ≥ 1 and dimension 1 or 2, got side {side}, dim {dim}"
        )));
    }
    Ok(PeriodicTiling { dim, side })
}

impl PeriodicTiling {
    pub fn shape(&self) -> FiniteSubset {
        FiniteSubset::cube(self.dim, self.side)
    }

    /// Center of the tile containing `g`.
    pub fn center_of(&self, g: Elem) -> Elem {
        let c: Vec<i64> = g.coords().iter().map(|x| x.div_euclid(self.side) * self.side).collect();
        Elem::new(&c)
    }

    /// The tiling shifted by `phase`: tiles `[0,side)^d + side·k + phase`.
    pub fn center_of_phased(&self, g: Elem, phase: Elem) -> Elem {
        self.center_of(g - phase) + phase
    }

    /// All `side^d` phases.
    pub fn phases(&self) -> FiniteSubset {
        FiniteSubset::cube(self.dim, self.side)
    }

    /// Tiles meeting `window`.
    pub fn restrict(&self, window: &FiniteSubset) -> Quasitiling {
        let mut centers: Vec<Elem> = window.iter().map(|g| self.center_of(*g)).collect();
        centers.sort();
        centers.dedup();
        Quasitiling {
            shapes: vec![self.shape()],
            tiles: centers
                .into_iter()
                .map(|c| Tile { center: c, shape: 0, pass: 0 })
                .collect(),
            exact: true,
            window: window.clone(),
        }
    }
}

/// `⌈log δ / log(1 − δ/2)⌉`.
pub fn ow_shape_count(delta: f64) -> usize {
    ((delta.ln() / (1.0 - delta / 2.0).ln()) - 1e-12).ceil().max(1.0) as usize
}

/// Box of side `n` centered at the identity: `[-⌊n/2⌋, n - ⌊n/2⌋)^d`.
pub fn centered_box(dim: usize, n: i64) -> FiniteSubset {
    let lo = vec![-(n / 2); dim];
    let hi = vec![n - n / 2; dim];
    FiniteSubset::box_range(&lo, &hi)
}

/// Greedy Ornstein–Weiss quasitiling of `window` by centered boxes of sides
/// `N, N+1, .., N+r-1`.
///
/// Pass 0 places pairwise disjoint tiles, largest shape first, centers in
/// lexicographic order. Pass 1 then places tiles whose overlap with what is
/// already covered stays below `δ|T|`. Tiles never leave the window.
pub fn ow_quasitiling(delta: Ratio<u64>, n: usize, window: &FiniteSubset) -> Result<Quasitiling> {
    let df = *delta.numer() as f64 / *delta.denom() as f64;
    if !(df > 0.0 && df < 1.0) {
        return Err(Error::InvalidArgument("δ must lie in (0, 1)".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("N must be ≥ 1".into()));
    }
    let dim = window
        .dim()
        .ok_or(Error::EmptySet("quasitiling window is empty"))?;
    let r = ow_shape_count(df);
    let shapes: Vec<FiniteSubset> = (0..r).map(|i| centered_box(dim, (n + i) as i64)).collect();
    if window.len() < shapes[0].len() {
        return Err(Error::Tiling(format!(
            "window of {} cells is smaller than F_N ({} cells)",
            window.len(),
            shapes[0].len()
        )));
    }
    let mut inside = Lattice::over(window, false);
    for g in window.iter() {
        inside.set(g, true);
    }
    let inside_sums = inside.box_sums();
    let mut covered = Lattice::over(window, false);
    let mut covered_sums = covered.box_sums();
    let mut tiles = Vec::new();
    for pass in 0..2u8 {
        for j in (0..r).rev() {
            let shape = &shapes[j];
            let (lo, hi) = shape.bbox().expect("nonempty shape");
            // overlap allowed in this pass: 0, then < δ|T|
            let allowed = if pass == 0 {
                0
            } else {
                let num = *delta.numer() as usize * shape.len();
                (num - 1) / *delta.denom() as usize
            };
            for &c in window.iter() {
                if inside_sums.count(lo + c, hi + c) < shape.len() {
                    continue;
                }
                let overlap = covered_sums.count(lo + c, hi + c);
                if overlap <= allowed && overlap < shape.len() {
                    for t in shape.iter() {
                        covered.set(&(*t + c), true);
                    }
                    covered_sums = covered.box_sums();
                    tiles.push(Tile { center: c, shape: j, pass });
                }
            }
        }
    }
    let q = Quasitiling {
        shapes,
        tiles,
        exact: false,
        window: window.clone(),
    };
    let interior = window.d_interior(&q.shapes[0]);
    if interior.is_empty() {
        return Err(Error::Tiling("window has an empty F_N-interior".into()));
    }
    let density = verify_covering(&q, &interior)?;
    if density < Ratio::new(*delta.denom() - *delta.numer(), *delta.denom()) {
        return Err(Error::Tiling(format!(
            "covering density {:.4} below 1 - δ on the window interior",
            ratio_f64(density)
        )));
    }
    Ok(q)
}

pub(crate) fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// True iff the canonical cores satisfy `|T°| > (1 − δ)|T|` for every tile.
pub fn verify_disjointness(t: &Quasitiling, delta: Ratio<u64>) -> bool {
    t.cores().iter().all(|(tile, core)| {
        let full = t.shapes[tile.shape].len() as u128;
        // |core| > (1 - n/d)|T|  <=>  |core|·d > (d - n)|T|
        core.len() as u128 * *delta.denom() as u128 > (*delta.denom() - *delta.numer()) as u128 * full
    })
}

/// Fraction of `window` covered by the union of tiles.
pub fn verify_covering(t: &Quasitiling, window: &FiniteSubset) -> Result<Ratio<u64>> {
    if window.is_empty() {
        return Err(Error::EmptySet("covering is measured on a nonempty window"));
    }
    let mut covered = Lattice::over(window, false);
    for tile in &t.tiles {
        for s in t.shapes[tile.shape].iter() {
            covered.set(&(*s + tile.center), true);
        }
    }
    let hit = window.iter().filter(|g| covered.get(g) == Some(&true)).count();
    Ok(Ratio::new(hit as u64, window.len() as u64))
}

/// The tile containing `g`, if any. Fails when several tiles contain `g`.
pub fn tile_of(t: &Quasitiling, g: Elem) -> Result<Option<Tile>> {
    if !t.window.contains(&g) {
        return Ok(None);
    }
    let hits: Vec<Tile> = t
        .tiles
        .iter()
        .filter(|x| t.shapes[x.shape].contains(&(g - x.center)))
        .copied()
        .collect();
    match hits.len() {
        0 => Ok(None),
        1 => Ok(Some(hits[0])),
        _ => Err(Error::Tiling(format!(
            "cell {g:?} lies in {} tiles: {:?}",
            hits.len(),
            hits.iter().map(|x| x.center).collect::<Vec<_>>()
        ))),
    }
}

/// The local rule turning a quasitiling into an exact tiling.
///
/// A covered cell belongs to the canonically first tile covering it. An
/// uncovered cell belongs to the nearest center (ℓ¹, then lexicographic),
/// searched up to `horizon`.
pub struct AdjustRule<'a> {
    shapes: &'a [FiniteSubset],
    tiles: Vec<Tile>,
    first_cover: HashMap<Elem, usize>,
    by_center: HashMap<Elem, usize>,
    horizon: i64,
    offsets: Vec<Elem>,
}

impl<'a> AdjustRule<'a> {
    pub fn new(shapes: &'a [FiniteSubset], tiles: &[Tile], horizon: i64) -> AdjustRule<'a> {
        let mut sorted = tiles.to_vec();
        sorted.sort_by_key(|t| (t.pass, std::cmp::Reverse(shapes[t.shape].len()), t.center));
        let mut first_cover = HashMap::new();
        let mut by_center = HashMap::new();
        for (i, t) in sorted.iter().enumerate() {
            for s in shapes[t.shape].iter() {
                first_cover.entry(*s + t.center).or_insert(i);
            }
            by_center.entry(t.center).or_insert(i);
        }
        let dim = shapes.first().and_then(|s| s.dim()).unwrap_or(1);
        let offsets = crate::group::ball(dim, horizon);
        AdjustRule {
            shapes,
            tiles: sorted,
            first_cover,
            by_center,
            horizon,
            offsets,
        }
    }

    /// Owner of cell `u`.
    pub fn owner(&self, u: Elem) -> Result<Tile> {
        if let Some(&i) = self.first_cover.get(&u) {
            return Ok(self.tiles[i]);
        }
        for off in &self.offsets {
            if let Some(&i) = self.by_center.get(&(u + *off)) {
                return Ok(self.tiles[i]);
            }
        }
        Err(Error::Tiling(format!(
            "no center within horizon {} of cell {u:?}",
            self.horizon
        )))
    }

    /// Cells that may be assigned to the tile centered at `c` with `shape`.
    pub fn candidates(&self, t: &Tile) -> FiniteSubset {
        let mut v: Vec<Elem> = self.shapes[t.shape].iter().map(|s| *s + t.center).collect();
        v.extend(self.offsets.iter().map(|o| *o + t.center));
        FiniteSubset::new(v)
    }

    /// The adjusted tile of `t`: candidate cells whose owner is `t`.
    pub fn adjusted(&self, t: &Tile) -> Result<FiniteSubset> {
        let mut out = Vec::new();
        for u in self.candidates(t).iter() {
            if self.owner(*u)? == *t {
                out.push(*u);
            }
        }
        Ok(FiniteSubset::new(out))
    }
}

/// Invariance status of the adjusted tiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustReport {
    pub horizon: i64,
    pub tiles: usize,
    pub invariant_tiles: usize,
}

/// Exact tiling of `window` with the same centers as `t`.
pub fn adjust_to_exact(
    t: &Quasitiling,
    k: &FiniteSubset,
    eps: Ratio<u64>,
    window: &FiniteSubset,
    horizon: i64,
) -> Result<(Quasitiling, AdjustReport)> {
    let rule = AdjustRule::new(&t.shapes, &t.tiles, horizon);
    let mut cells: HashMap<Tile, Vec<Elem>> = HashMap::new();
    for u in window.iter() {
        let owner = rule.owner(*u)?;
        cells.entry(owner).or_default().push(*u - owner.center);
    }
    let mut shapes: Vec<FiniteSubset> = Vec::new();
    let mut shape_ix: HashMap<FiniteSubset, usize> = HashMap::new();
    let mut tiles = Vec::new();
    let mut invariant = 0;
    for tile in t.canonical_tiles() {
        let Some(c) = cells.remove(&tile) else {
            continue;
        };
        let s = FiniteSubset::new(c);
        if s.is_invariant(k, eps)? {
            invariant += 1;
        }
        let j = *shape_ix.entry(s.clone()).or_insert_with(|| {
            shapes.push(s);
            shapes.len() - 1
        });
        tiles.push(Tile { center: tile.center, shape: j, pass: tile.pass });
    }
    let report = AdjustReport {
        horizon,
        tiles: tiles.len(),
        invariant_tiles: invariant,
    };
    Ok((
        Quasitiling {
            shapes,
            tiles,
            exact: true,
            window: window.clone(),
        },
        report,
    ))
}

/// Summary metrics of a quasitiling on a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilingQuality {
    /// Smallest δ̂ with every core above `(1 − δ̂)|T|`.
    pub disjointness_deficit: Ratio<u64>,
    pub covering_density: Ratio<u64>,
    /// Per shape: whether it is `(K, ε)`-invariant.
    pub invariant_shapes: Vec<bool>,
}

pub fn quality(
    t: &Quasitiling,
    window: &FiniteSubset,
    k: &FiniteSubset,
    eps: Ratio<u64>,
) -> Result<TilingQuality> {
    let mut deficit = Ratio::new(0u64, 1);
    for (tile, core) in t.cores() {
        let full = t.shapes[tile.shape].len() as u64;
        let lost = Ratio::new(full - core.len() as u64, full);
        if lost > deficit {
            deficit = lost;
        }
    }
    Ok(TilingQuality {
        disjointness_deficit: deficit,
        covering_density: verify_covering(t, window)?,
        invariant_shapes: t
            .shapes
            .iter()
            .map(|s| s.is_invariant(k, eps))
            .collect::<Result<Vec<bool>>>()?,
    })
}
