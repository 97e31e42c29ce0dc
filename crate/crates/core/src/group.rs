//! Group elements of Z and Z² and exact finite-set arithmetic over them.
//!
//! Everything is written additively: the product `KF` of two sets is the
//! Minkowski sum, the inverse of a set is its negation, and a right
//! translate `Fg` is `F + g`. Sets are kept sorted in lexicographic order of
//! coordinates so that every downstream ranking is deterministic.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_rational::Ratio;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The concrete groups supported by the library.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Z,
    Z2,
}

impl Group {
    pub fn dim(self) -> usize {
        match self {
            Group::Z => 1,
            Group::Z2 => 2,
        }
    }

    pub fn identity(self) -> Elem {
        Elem::zero(self.dim())
    }

    /// `Z` for the group, exposed as a name for reports.
    pub fn name(self) -> &'static str {
        match self {
            Group::Z => "Z",
            Group::Z2 => "Z2",
        }
    }

    pub fn is_abelian(self) -> bool {
        true
    }

    /// Unit vectors together with the identity: `{0, e1, ..}`.
    pub fn unit_star(self) -> FiniteSubset {
        let d = self.dim();
        let mut v = vec![Elem::zero(d)];
        for i in 0..d {
            let mut c = [0i64; 2];
            c[i] = 1;
            v.push(Elem::new(&c[..d]));
        }
        FiniteSubset::new(v)
    }

    /// Symmetric ℓ∞ ball `[-r, r]^d`.
    pub fn cube(self, r: i64) -> FiniteSubset {
        let lo = vec![-r; self.dim()];
        let hi = vec![r + 1; self.dim()];
        FiniteSubset::box_range(&lo, &hi)
    }
}

/// An element of Z or Z². Unused coordinates stay zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Elem {
    coords: [i64; 2],
    dim: u8,
}

impl Elem {
    pub fn new(coords: &[i64]) -> Elem {
        assert!(
            (1..=2).contains(&coords.len()),
            "only Z and Z² are supported"
        );
        let mut c = [0i64; 2];
        c[..coords.len()].copy_from_slice(coords);
        Elem {
            coords: c,
            dim: coords.len() as u8,
        }
    }

    pub fn zero(dim: usize) -> Elem {
        Elem::new(&[0, 0][..dim])
    }

    pub fn z(x: i64) -> Elem {
        Elem::new(&[x])
    }

    pub fn z2(x: i64, y: i64) -> Elem {
        Elem::new(&[x, y])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn coord(&self, i: usize) -> i64 {
        self.coords[i]
    }

    pub fn is_identity(&self) -> bool {
        self.coords == [0, 0]
    }

    /// Group composition.
    pub fn op(self, other: Elem) -> Elem {
        debug_assert_eq!(self.dim, other.dim);
        Elem {
            coords: [
                self.coords[0] + other.coords[0],
                self.coords[1] + other.coords[1],
            ],
            dim: self.dim,
        }
    }

    pub fn inv(self) -> Elem {
        Elem {
            coords: [-self.coords[0], -self.coords[1]],
            dim: self.dim,
        }
    }

    pub fn l1(&self) -> i64 {
        self.coords[0].abs() + self.coords[1].abs()
    }

    pub fn linf(&self) -> i64 {
        self.coords[0].abs().max(self.coords[1].abs())
    }
}

impl Add for Elem {
    type Output = Elem;
    fn add(self, rhs: Elem) -> Elem {
        self.op(rhs)
    }
}

impl Sub for Elem {
    type Output = Elem;
    fn sub(self, rhs: Elem) -> Elem {
        self.op(rhs.inv())
    }
}

impl Neg for Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        self.inv()
    }
}

impl fmt::Debug for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            1 => write!(f, "{}", self.coords[0]),
            _ => write!(f, "({},{})", self.coords[0], self.coords[1]),
        }
    }
}

impl Serialize for Elem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Elem {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Elem, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        if !(1..=2).contains(&v.len()) {
            return Err(D::Error::custom("group element must have 1 or 2 coordinates"));
        }
        Ok(Elem::new(&v))
    }
}

/// Ordering used for candidate searches: ℓ¹ norm, then lexicographic.
pub fn ball_order(a: &Elem, b: &Elem) -> std::cmp::Ordering {
    a.l1().cmp(&b.l1()).then(a.cmp(b))
}

/// All elements with ℓ¹ norm at most `r`, in ball order.
pub fn ball(dim: usize, r: i64) -> Vec<Elem> {
    let mut v = Vec::new();
    if dim == 1 {
        for x in -r..=r {
            v.push(Elem::z(x));
        }
    } else {
        for x in -r..=r {
            let rest = r - x.abs();
            for y in -rest..=rest {
                v.push(Elem::z2(x, y));
            }
        }
    }
    v.sort_by(ball_order);
    v
}

/// Elements with ℓ¹ norm exactly `r`, in lexicographic order.
pub fn shell(dim: usize, r: i64) -> Vec<Elem> {
    let mut v = Vec::new();
    if dim == 1 {
        if r == 0 {
            v.push(Elem::z(0));
        } else {
            v.push(Elem::z(-r));
            v.push(Elem::z(r));
        }
    } else {
        for x in -r..=r {
            let rest = r - x.abs();
            if rest == 0 {
                v.push(Elem::z2(x, 0));
            } else {
                v.push(Elem::z2(x, -rest));
                v.push(Elem::z2(x, rest));
            }
        }
    }
    v
}

/// A finite subset of the group: deduplicated and sorted.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct FiniteSubset {
    elems: Vec<Elem>,
}

impl fmt::Debug for FiniteSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.elems.iter()).finish()
    }
}

impl Serialize for FiniteSubset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.elems.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteSubset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<Elem>::deserialize(d)?;
        if let Some(first) = v.first() {
            if v.iter().any(|e| e.dim() != first.dim()) {
                return Err(D::Error::custom("mixed dimensions in a finite subset"));
            }
        }
        Ok(FiniteSubset::new(v))
    }
}

impl FromIterator<Elem> for FiniteSubset {
    fn from_iter<I: IntoIterator<Item = Elem>>(iter: I) -> Self {
        FiniteSubset::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a FiniteSubset {
    type Item = &'a Elem;
    type IntoIter = std::slice::Iter<'a, Elem>;
    fn into_iter(self) -> Self::IntoIter {
        self.elems.iter()
    }
}

impl FiniteSubset {
    pub fn new(mut elems: Vec<Elem>) -> FiniteSubset {
        elems.sort_unstable();
        elems.dedup();
        FiniteSubset { elems }
    }

    pub fn empty() -> FiniteSubset {
        FiniteSubset { elems: Vec::new() }
    }

    pub fn singleton(g: Elem) -> FiniteSubset {
        FiniteSubset { elems: vec![g] }
    }

    /// Integers `lo..hi` in Z.
    pub fn interval(lo: i64, hi: i64) -> FiniteSubset {
        FiniteSubset {
            elems: (lo..hi).map(Elem::z).collect(),
        }
    }

    /// The half-open box `[lo, hi)` in Z or Z².
    pub fn box_range(lo: &[i64], hi: &[i64]) -> FiniteSubset {
        assert_eq!(lo.len(), hi.len());
        match lo.len() {
            1 => FiniteSubset::interval(lo[0], hi[0]),
            _ => {
                let mut v = Vec::new();
                for x in lo[0]..hi[0] {
                    for y in lo[1]..hi[1] {
                        v.push(Elem::z2(x, y));
                    }
                }
                FiniteSubset { elems: v }
            }
        }
    }

    /// The cube `[0, side)^dim`.
    pub fn cube(dim: usize, side: i64) -> FiniteSubset {
        FiniteSubset::box_range(&vec![0; dim], &vec![side; dim])
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Elem> {
        self.elems.iter()
    }

    pub fn as_slice(&self) -> &[Elem] {
        &self.elems
    }

    pub fn first(&self) -> Option<&Elem> {
        self.elems.first()
    }

    pub fn contains(&self, g: &Elem) -> bool {
        self.elems.binary_search(g).is_ok()
    }

    /// Position of `g` in canonical order.
    pub fn index_of(&self, g: &Elem) -> Option<usize> {
        self.elems.binary_search(g).ok()
    }

    pub fn dim(&self) -> Option<usize> {
        self.elems.first().map(|e| e.dim())
    }

    /// `{a·b : a ∈ self, b ∈ other}`.
    pub fn product(&self, other: &FiniteSubset) -> FiniteSubset {
        let mut v = Vec::with_capacity(self.len() * other.len());
        for a in &self.elems {
            for b in &other.elems {
                v.push(*a + *b);
            }
        }
        FiniteSubset::new(v)
    }

    pub fn inverse(&self) -> FiniteSubset {
        FiniteSubset::new(self.elems.iter().map(|a| a.inv()).collect())
    }

    /// Right translate `F·g`.
    pub fn translate(&self, g: Elem) -> FiniteSubset {
        // translation preserves lexicographic order
        FiniteSubset {
            elems: self.elems.iter().map(|a| *a + g).collect(),
        }
    }

    pub fn union(&self, other: &FiniteSubset) -> FiniteSubset {
        let mut v = self.elems.clone();
        v.extend_from_slice(&other.elems);
        FiniteSubset::new(v)
    }

    pub fn intersection(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset {
            elems: self
                .elems
                .iter()
                .filter(|g| other.contains(g))
                .copied()
                .collect(),
        }
    }

    pub fn difference(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset {
            elems: self
                .elems
                .iter()
                .filter(|g| !other.contains(g))
                .copied()
                .collect(),
        }
    }

    pub fn symmetric_difference(&self, other: &FiniteSubset) -> FiniteSubset {
        self.difference(other).union(&other.difference(self))
    }

    pub fn is_subset(&self, other: &FiniteSubset) -> bool {
        self.elems.iter().all(|g| other.contains(g))
    }

    pub fn is_disjoint(&self, other: &FiniteSubset) -> bool {
        let (small, big) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.elems.iter().all(|g| !big.contains(g))
    }

    /// `true` iff `|KF △ F| < ε|F|`, decided in exact rational arithmetic.
    pub fn is_invariant(&self, k: &FiniteSubset, eps: Ratio<u64>) -> Result<bool> {
        if self.is_empty() {
            return Err(Error::EmptySet("invariance ratio needs a nonempty set"));
        }
        let sd = k.product(self).symmetric_difference(self).len() as u128;
        // sd < num/den * |F|  <=>  sd * den < num * |F|
        Ok(sd * (*eps.denom() as u128) < (*eps.numer() as u128) * self.len() as u128)
    }

    /// The D-interior `{g ∈ F : Dg ⊆ F}`.
    pub fn d_interior(&self, d: &FiniteSubset) -> FiniteSubset {
        FiniteSubset {
            elems: self
                .elems
                .iter()
                .filter(|g| d.iter().all(|t| self.contains(&(*t + **g))))
                .copied()
                .collect(),
        }
    }

    /// Inclusive per-coordinate bounds, or `None` for the empty set.
    pub fn bbox(&self) -> Option<(Elem, Elem)> {
        let first = self.elems.first()?;
        let d = first.dim();
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        for e in &self.elems {
            for i in 0..d {
                lo[i] = lo[i].min(e.coord(i));
                hi[i] = hi[i].max(e.coord(i));
            }
        }
        Some((Elem::new(&lo[..d]), Elem::new(&hi[..d])))
    }

    /// The smallest box containing the set.
    pub fn hull(&self) -> FiniteSubset {
        match self.bbox() {
            None => FiniteSubset::empty(),
            Some((lo, hi)) => {
                let hi: Vec<i64> = hi.coords().iter().map(|c| c + 1).collect();
                FiniteSubset::box_range(lo.coords(), &hi)
            }
        }
    }

    /// Largest coordinate extent (`max - min + 1`), 0 when empty.
    pub fn extent(&self) -> i64 {
        match self.bbox() {
            None => 0,
            Some((lo, hi)) => (0..lo.dim())
                .map(|i| hi.coord(i) - lo.coord(i) + 1)
                .max()
                .unwrap_or(0),
        }
    }
}

/// Product of a chain of sets, evaluated left to right.
pub fn product_chain(sets: &[&FiniteSubset]) -> FiniteSubset {
    let mut acc = sets[0].clone();
    for s in &sets[1..] {
        acc = acc.product(s);
    }
    acc
}

/// The Følner sequence of cubes `F_n = [0, n)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FolnerSequence {
    pub group: Group,
}

impl FolnerSequence {
    pub fn cubes(group: Group) -> Self {
        FolnerSequence { group }
    }

    pub fn set(&self, n: usize) -> Result<FiniteSubset> {
        if n == 0 {
            return Err(Error::InvalidArgument("Følner index must be ≥ 1".into()));
        }
        Ok(FiniteSubset::cube(self.group.dim(), n as i64))
    }
}

/// `F_n` of the cube Følner sequence of `group`.
pub fn folner(group: Group, n: usize) -> Result<FiniteSubset> {
    FolnerSequence::cubes(group).set(n)
}
