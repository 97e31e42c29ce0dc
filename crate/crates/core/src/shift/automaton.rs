//! Layered automaton over a finite domain.
//!
//! Cells of a domain are visited in canonical order. After cell `i` only the
//! values of cells that still take part in an unfinished forbidden-pattern
//! placement matter, so the partial assignment collapses to a small "live"
//! key. The reachable keys per level form a layered automaton on which
//! counting, ranking, unranking and gluing are all linear in the number of
//! states.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::group::{Elem, FiniteSubset};
use crate::shift::Block;

/// One placement of a forbidden pattern, as indices into the domain order.
#[derive(Clone, Debug)]
pub(crate) struct Constraint {
    pub cells: Vec<usize>,
    pub values: Vec<u8>,
}

/// All placements of `patterns` lying entirely inside `domain`.
pub(crate) fn placements(domain: &FiniteSubset, patterns: &[Block]) -> Vec<Constraint> {
    let mut out = Vec::new();
    for p in patterns {
        let Some(&anchor) = p.domain().first() else {
            continue;
        };
        for u in domain.iter() {
            let offset = *u - anchor;
            let mut cells = Vec::with_capacity(p.len());
            let mut inside = true;
            for t in p.domain().iter() {
                match domain.index_of(&(*t + offset)) {
                    Some(ix) => cells.push(ix),
                    None => {
                        inside = false;
                        break;
                    }
                }
            }
            if inside {
                out.push(Constraint {
                    cells,
                    values: p.values().to_vec(),
                });
            }
        }
    }
    out
}

const NONE: u32 = u32::MAX;

/// Reachable-state automaton for a domain, a constraint set and optional
/// fixed cells.
#[derive(Debug)]
pub(crate) struct Automaton {
    alphabet: u8,
    /// `next[i][state * alphabet + s]` is the state at level `i + 1`.
    next: Vec<Vec<u32>>,
    table: Table,
}

/// Backward information per state: exact completion counts, or only
/// whether a completion exists (enough for filling, far less memory).
#[derive(Debug)]
enum Table {
    Counts(Vec<Vec<BigUint>>),
    Alive(Vec<Vec<bool>>),
}

pub(crate) struct Builder<'a> {
    pub len: usize,
    pub alphabet: u8,
    pub constraints: &'a [Constraint],
    pub fixed: Option<&'a [Option<u8>]>,
    pub budget: u64,
}

impl Builder<'_> {
    pub fn build(&self) -> Result<Automaton> {
        self.build_with(true)
    }

    /// Like [`Builder::build`] but without counts; supports filling only.
    pub fn build_feasible(&self) -> Result<Automaton> {
        self.build_with(false)
    }
}

impl Builder<'_> {
    fn build_with(&self, counting: bool) -> Result<Automaton> {
        let m = self.len;
        let a = self.alphabet as usize;
        let mut by_completion: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut last_use: Vec<usize> = (0..m).collect();
        for (ci, c) in self.constraints.iter().enumerate() {
            let hi = *c.cells.iter().max().expect("nonempty placement");
            by_completion[hi].push(ci);
            for &j in &c.cells {
                last_use[j] = last_use[j].max(hi);
            }
        }
        // live[i]: cells j < i whose values are still needed at level i
        let mut live: Vec<Vec<usize>> = Vec::with_capacity(m + 1);
        let mut current: Vec<usize> = Vec::new();
        for i in 0..=m {
            current.retain(|&j| last_use[j] >= i);
            live.push(current.clone());
            if i < m && last_use[i] > i {
                current.push(i);
            }
        }

        let mut next: Vec<Vec<u32>> = Vec::with_capacity(m);
        let mut level_keys: Vec<Vec<u8>> = vec![Vec::new()];
        let mut visited: u64 = 0;
        let mut vals = vec![0u8; m];
        for i in 0..m {
            let mut index: HashMap<Vec<u8>, u32> = HashMap::new();
            let mut keys_next: Vec<Vec<u8>> = Vec::new();
            let mut table = vec![NONE; level_keys.len() * a];
            for (si, key) in level_keys.iter().enumerate() {
                for (pos, &j) in live[i].iter().enumerate() {
                    vals[j] = key[pos];
                }
                for s in 0..self.alphabet {
                    if let Some(fixed) = self.fixed {
                        if let Some(f) = fixed[i] {
                            if f != s {
                                continue;
                            }
                        }
                    }
                    visited += 1;
                    if visited > self.budget {
                        return Err(Error::BudgetExceeded {
                            budget: self.budget,
                            partial: visited,
                        });
                    }
                    vals[i] = s;
                    let violated = by_completion[i].iter().any(|&ci| {
                        let c = &self.constraints[ci];
                        c.cells.iter().zip(&c.values).all(|(&j, &v)| vals[j] == v)
                    });
                    if violated {
                        continue;
                    }
                    let nkey: Vec<u8> = live[i + 1].iter().map(|&j| vals[j]).collect();
                    let id = match index.get(&nkey) {
                        Some(&id) => id,
                        None => {
                            let id = keys_next.len() as u32;
                            index.insert(nkey.clone(), id);
                            keys_next.push(nkey);
                            id
                        }
                    };
                    table[si * a + s as usize] = id;
                }
            }
            next.push(table);
            level_keys = keys_next;
        }

        let table = if counting {
            let mut counts: Vec<Vec<BigUint>> = vec![Vec::new(); m + 1];
            counts[m] = vec![BigUint::one(); level_keys.len()];
            for i in (0..m).rev() {
                let states = next[i].len() / a.max(1);
                let mut level = Vec::with_capacity(states);
                for si in 0..states {
                    let mut total = BigUint::zero();
                    for s in 0..a {
                        let t = next[i][si * a + s];
                        if t != NONE {
                            total += &counts[i + 1][t as usize];
                        }
                    }
                    level.push(total);
                }
                counts[i] = level;
            }
            Table::Counts(counts)
        } else {
            let mut alive: Vec<Vec<bool>> = vec![Vec::new(); m + 1];
            alive[m] = vec![true; level_keys.len()];
            for i in (0..m).rev() {
                let states = next[i].len() / a.max(1);
                alive[i] = (0..states)
                    .map(|si| {
                        (0..a).any(|s| {
                            let t = next[i][si * a + s];
                            t != NONE && alive[i + 1][t as usize]
                        })
                    })
                    .collect();
            }
            Table::Alive(alive)
        };
        Ok(Automaton {
            alphabet: self.alphabet,
            next,
            table,
        })
    }
}

impl Automaton {
    pub fn len(&self) -> usize {
        self.next.len()
    }

    fn step(&self, i: usize, state: usize, s: u8) -> Option<usize> {
        if s >= self.alphabet {
            return None;
        }
        let t = self.next[i][state * self.alphabet as usize + s as usize];
        (t != NONE).then_some(t as usize)
    }

    fn counts(&self) -> &[Vec<BigUint>] {
        match &self.table {
            Table::Counts(c) => c,
            Table::Alive(_) => panic!("automaton was built without counts"),
        }
    }

    /// Whether state `t` at level `i` has an accepted completion.
    fn alive(&self, i: usize, t: usize) -> bool {
        match &self.table {
            Table::Counts(c) => !c[i][t].is_zero(),
            Table::Alive(a) => a[i][t],
        }
    }

    /// Whether no word is accepted.
    pub fn is_empty(&self) -> bool {
        match &self.table {
            Table::Counts(c) => c[0].first().is_some_and(|c| c.is_zero()),
            Table::Alive(a) => a[0].first().is_some_and(|a| !a),
        }
    }

    /// Number of accepted words.
    pub fn count(&self) -> BigUint {
        self.counts()[0].first().cloned().unwrap_or_else(BigUint::one)
    }

    /// Position of `word` among accepted words in lexicographic order.
    pub fn rank(&self, word: &[u8]) -> Option<BigUint> {
        let mut state = 0;
        let mut r = BigUint::zero();
        for (i, &w) in word.iter().enumerate() {
            for s in 0..w {
                if let Some(t) = self.step(i, state, s) {
                    r += &self.counts()[i + 1][t];
                }
            }
            state = self.step(i, state, w)?;
        }
        Some(r)
    }

    pub fn unrank(&self, rank: &BigUint) -> Option<Vec<u8>> {
        if rank >= &self.count() {
            return None;
        }
        let mut r = rank.clone();
        let mut state = 0;
        let mut word = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let mut chosen = None;
            for s in 0..self.alphabet {
                if let Some(t) = self.step(i, state, s) {
                    let c = &self.counts()[i + 1][t];
                    if &r < c {
                        chosen = Some((s, t));
                        break;
                    }
                    r -= c;
                }
            }
            let (s, t) = chosen?;
            word.push(s);
            state = t;
        }
        Some(word)
    }

    /// First accepted word when symbols are tried in `order` at every cell.
    pub fn first_in_order(&self, order: &[u8]) -> Option<Vec<u8>> {
        self.walk(|_, choices| order.iter().copied().find(|s| choices.contains(s)))
    }

    /// Walks from the root, letting `pick` choose among symbols that still
    /// lead to an accepted word.
    pub fn walk<F>(&self, mut pick: F) -> Option<Vec<u8>>
    where
        F: FnMut(usize, &[u8]) -> Option<u8>,
    {
        if self.is_empty() {
            return None;
        }
        let mut state = 0;
        let mut word = Vec::with_capacity(self.len());
        let mut choices = Vec::with_capacity(self.alphabet as usize);
        for i in 0..self.len() {
            choices.clear();
            for s in 0..self.alphabet {
                if let Some(t) = self.step(i, state, s) {
                    if self.alive(i + 1, t) {
                        choices.push(s);
                    }
                }
            }
            let s = pick(i, &choices)?;
            state = self.step(i, state, s)?;
            word.push(s);
        }
        Some(word)
    }

    /// Depth-first listing of accepted words in lexicographic order, at most
    /// `limit` of them.
    pub fn list(&self, limit: usize) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        if self.is_empty() || limit == 0 {
            return out;
        }
        let m = self.len();
        let mut word = Vec::with_capacity(m);
        let mut stack: Vec<(usize, u8)> = vec![(0, 0)];
        // iterative DFS: stack holds (state, next symbol to try) per level
        while let Some(&mut (state, ref mut s)) = stack.last_mut() {
            let i = word.len();
            if i == m {
                out.push(word.clone());
                if out.len() >= limit {
                    break;
                }
                stack.pop();
                word.pop();
                continue;
            }
            if *s >= self.alphabet {
                stack.pop();
                word.pop();
                continue;
            }
            let sym = *s;
            *s += 1;
            if let Some(t) = self.step(i, state, sym) {
                if self.alive(i + 1, t) {
                    word.push(sym);
                    stack.push((t, 0));
                }
            }
        }
        out
    }
}

/// Convenience: automaton for locally admissible words on `domain`.
pub(crate) fn for_domain(
    domain: &FiniteSubset,
    patterns: &[Block],
    alphabet: u8,
    fixed: Option<&[Option<u8>]>,
    budget: u64,
) -> Result<Automaton> {
    let constraints = placements(domain, patterns);
    Builder {
        len: domain.len(),
        alphabet,
        constraints: &constraints,
        fixed,
        budget,
    }
    .build()
}

/// Fixed-cell vector for `window` from a list of cell assignments, failing on
/// conflicting or out-of-window assignments.
pub(crate) fn fixed_cells(
    window: &FiniteSubset,
    assignments: impl IntoIterator<Item = (Elem, u8)>,
) -> Result<Vec<Option<u8>>> {
    let mut fixed = vec![None; window.len()];
    for (g, v) in assignments {
        let ix = window
            .index_of(&g)
            .ok_or_else(|| Error::InsufficientData(format!("cell {g:?} outside window")))?;
        match fixed[ix] {
            Some(old) if old != v => {
                return Err(Error::GlueFailed(format!(
                    "conflicting values {old} and {v} at {g:?}"
                )))
            }
            _ => fixed[ix] = Some(v),
        }
    }
    Ok(fixed)
}
