//! Marker blocks.
//!
//! A marker is a block `M` on a domain `K` with two properties relative to a
//! proper subshift `Y ⊂ X`: inside every tile of a companion tiling `T` an
//! occurrence of `M` exposes a block outside `Y`, and any two distinct
//! occurrences `K + g₁`, `K + g₂` leave a block outside `Y` on
//! `(K + g₂) ∖ (D + K + g₁)`. The construction is entirely finite: the
//! "all but finitely many" choices become ball scans past explicitly computed
//! excluded sets, and every condition is re-evaluated by set arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{ball, ball_order, product_chain, Elem, FiniteSubset, Group};
use crate::shift::{
    default_budget, domain_schedule, fill, find_aperiodic_block, is_p_aperiodic, Block, Language,
    SubshiftSpec,
};

/// First block, over the domain schedule and then lexicographically, that is
/// admissible in `x` and rejected by `y`.
pub fn find_distinguishing_block(x: &SubshiftSpec, y: &dyn Language, radius: usize) -> Result<Block> {
    for t in domain_schedule(x.group, radius) {
        let auto = x.automaton(&t, default_budget())?;
        for values in auto.list(1 << 16) {
            let b = Block::new(t.clone(), values)?;
            if !y.admits(&b) {
                return Ok(b);
            }
        }
    }
    Err(Error::NotFound {
        what: "block admissible in X but not in Y".into(),
        radius,
    })
}

/// `P_g = g⁻¹ Z⁻¹ D Z g`.
pub fn compute_period_set(z: &FiniteSubset, d: &FiniteSubset, g: Elem) -> FiniteSubset {
    product_chain(&[
        &FiniteSubset::singleton(g.inv()),
        &z.inverse(),
        d,
        z,
        &FiniteSubset::singleton(g),
    ])
}

/// The set `G_P` of group elements `g` with `P ⊆ P_g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stabilizer {
    WholeGroup,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodData {
    pub p: FiniteSubset,
    pub g_p: Stabilizer,
}

/// `P` and `G_P`. In an abelian group every `P_g` equals `P_e`, so `P = P_e`
/// and `G_P = G`.
pub fn compute_p_gp(group: Group, z: &FiniteSubset, d: &FiniteSubset) -> Result<PeriodData> {
    if !group.is_abelian() {
        return Err(Error::InvalidArgument(
            "non-abelian groups need a bounded maximality search, which is not configured".into(),
        ));
    }
    Ok(PeriodData {
        p: compute_period_set(z, d, group.identity()),
        g_p: Stabilizer::WholeGroup,
    })
}

/// The two periodic box tilings used by the construction. `T′` has tiles
/// `shape + period ⊙ k`; `T` has tiles `[0, t_side)^d + t_side · k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Companions {
    pub tprime_shape: FiniteSubset,
    pub tprime_period: Elem,
    pub t_side: i64,
}

impl Companions {
    fn for_block(z: &FiniteSubset, d: &FiniteSubset, t_side: i64) -> Companions {
        let shape = d.product(z).hull();
        let (lo, hi) = shape.bbox().expect("nonempty shape");
        let period: Vec<i64> = (0..lo.dim()).map(|i| hi.coord(i) - lo.coord(i) + 1).collect();
        Companions {
            tprime_shape: shape,
            tprime_period: Elem::new(&period),
            t_side,
        }
    }

    /// The shape of every tile of `T`.
    pub fn t_shape(&self) -> FiniteSubset {
        FiniteSubset::cube(self.tprime_period.dim(), self.t_side)
    }

    /// Centers of `T′` tiles lying inside `region`, in ball order.
    pub fn tprime_centers_within(&self, region: &FiniteSubset) -> Vec<Elem> {
        let (Some((rlo, rhi)), Some((slo, shi))) = (region.bbox(), self.tprime_shape.bbox()) else {
            return Vec::new();
        };
        let dim = rlo.dim();
        let mut ranges = Vec::with_capacity(dim);
        for i in 0..dim {
            let p = self.tprime_period.coord(i);
            // p·k + slo ≥ rlo and p·k + shi ≤ rhi
            let kmin = (rlo.coord(i) - slo.coord(i)).div_euclid(p)
                + i64::from((rlo.coord(i) - slo.coord(i)).rem_euclid(p) != 0);
            let kmax = (rhi.coord(i) - shi.coord(i)).div_euclid(p);
            ranges.push((kmin, kmax));
        }
        let mut out = Vec::new();
        let mut push = |coords: &[i64]| {
            let c = Elem::new(coords);
            if self.tprime_shape.translate(c).is_subset(region) {
                out.push(c);
            }
        };
        let p = &self.tprime_period;
        if dim == 1 {
            for k in ranges[0].0..=ranges[0].1 {
                push(&[p.coord(0) * k]);
            }
        } else {
            for k0 in ranges[0].0..=ranges[0].1 {
                for k1 in ranges[1].0..=ranges[1].1 {
                    push(&[p.coord(0) * k0, p.coord(1) * k1]);
                }
            }
        }
        out.sort_by(ball_order);
        out
    }
}

/// Output of the first half of the construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct M1Parts {
    /// `P`-aperiodic, contains `B`.
    pub m0: Block,
    pub c_prime: FiniteSubset,
    /// Domain `K₁ = K₀ ∪ ⋃ D Z c′`.
    pub m1: Block,
    pub companions: Companions,
    /// Every cell `s` of a `T` shape has `K₀ + s ⊆ S_D` or `Z + c′ + s ⊆ S_D`.
    pub placement_verified: bool,
}

fn disjoint_both_ways(d: &FiniteSubset, a: &FiniteSubset, b: &FiniteSubset) -> bool {
    d.product(a).is_disjoint(b) && d.product(b).is_disjoint(a)
}

/// `M₀`: an aperiodic block with `B` glued at the first separated offset,
/// unless `B` already occurs in it.
fn build_m0(x: &SubshiftSpec, b: &Block, p: &FiniteSubset, radius: usize) -> Result<Block> {
    let p_star = p.difference(&FiniteSubset::singleton(x.group.identity()));
    let a = find_aperiodic_block(x, &p_star, radius)?;
    let anchor = *b.domain().first().ok_or(Error::EmptySet("distinguishing block"))?;
    let mut inside: Vec<Elem> = a.domain().iter().map(|&t| t - anchor).collect();
    inside.sort_by(ball_order);
    if inside.iter().any(|&g| a.contains_at(b, g)) {
        return Ok(a);
    }
    let reach = a.domain().extent() + b.domain().extent() + x.d.extent() + 2;
    let offset = ball(x.dim(), reach * x.dim() as i64)
        .into_iter()
        .find(|&o| disjoint_both_ways(&x.d, a.domain(), &b.domain().translate(o)))
        .ok_or_else(|| Error::NotFound {
            what: "offset separating B from the aperiodic block".into(),
            radius,
        })?;
    let k0 = a.domain().union(&b.domain().translate(offset)).hull();
    let c = fill(x, &k0, a.iter().chain(b.translate(offset).iter()), default_budget())?;
    Ok(c.as_block())
}

/// Chooses `C′` for a `T` side, or `None` when some cell of `S ∖ S_{DK₀}`
/// has no usable `T′` tile inside `S_D − s`.
fn choose_c_prime(d: &FiniteSubset, z: &FiniteSubset, k0: &FiniteSubset, comp: &Companions) -> Option<Vec<Elem>> {
    let s = comp.t_shape();
    let s_d = s.d_interior(d);
    let s_dk0 = s.d_interior(&d.product(k0));
    let mut chosen: Vec<Elem> = Vec::new();
    for &cell in s.difference(&s_dk0).iter() {
        let region = s_d.translate(cell.inv());
        if chosen.iter().any(|&c| z.translate(c).is_subset(&region)) {
            continue;
        }
        let c = comp
            .tprime_centers_within(&region)
            .into_iter()
            .find(|&c| disjoint_both_ways(d, &d.product(z).translate(c), k0))?;
        chosen.push(c);
    }
    Some(chosen)
}

/// For every `s ∈ S`: `K₀ + s ⊆ S_D` or some `Z + c′ + s ⊆ S_D`.
pub fn placement_property(
    d: &FiniteSubset,
    z: &FiniteSubset,
    k0: &FiniteSubset,
    c_prime: &FiniteSubset,
    t_shape: &FiniteSubset,
) -> bool {
    let s_d = t_shape.d_interior(d);
    t_shape.iter().all(|&s| {
        k0.translate(s).is_subset(&s_d)
            || c_prime.iter().any(|&c| z.translate(c + s).is_subset(&s_d))
    })
}

/// Builds `K₁`, `M₁` and `C′`, growing the `T` side until the covering
/// premise holds, up to `max_t_side`.
pub fn build_m1(x: &SubshiftSpec, b: &Block, p: &FiniteSubset, radius: usize, max_t_side: i64) -> Result<M1Parts> {
    let z = b.domain();
    let m0 = build_m0(x, b, p, radius)?;
    let k0 = m0.domain();
    let start = Companions::for_block(z, &x.d, 1);
    let first_side = k0.extent().max(start.tprime_shape.extent()) + 1;
    for side in first_side..=max_t_side {
        let comp = Companions {
            t_side: side,
            ..start.clone()
        };
        let Some(c_prime) = choose_c_prime(&x.d, z, k0, &comp) else {
            continue;
        };
        let c_prime = FiniteSubset::new(c_prime);
        let dz = x.d.product(z);
        let mut k1 = k0.clone();
        for &c in c_prime.iter() {
            k1 = k1.union(&dz.translate(c));
        }
        let fixed = m0
            .iter()
            .chain(c_prime.iter().flat_map(|&c| b.translate(c).iter().collect::<Vec<_>>()));
        let m1 = fill(x, &k1.hull(), fixed, default_budget())?
            .read(&k1)
            .expect("K₁ lies in its hull");
        let placement_verified = placement_property(&x.d, z, k0, &c_prime, &comp.t_shape());
        if !placement_verified {
            return Err(Error::Precondition(format!(
                "placement property fails for T side {side}"
            )));
        }
        return Ok(M1Parts {
            m0,
            c_prime,
            m1,
            companions: comp,
            placement_verified,
        });
    }
    Err(Error::Precondition(format!(
        "no T side up to {max_t_side} has every S_D − s containing a T′ tile; use larger T shapes"
    )))
}

/// One evaluated condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub name: char,
    pub holds: bool,
}

/// Outcome of conditions (a)–(n) on `c₂`, `c₃`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub conditions: Vec<Condition>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn first_failure(&self) -> Option<char> {
        self.conditions.iter().find(|c| !c.holds).map(|c| c.name)
    }
}

/// Sets shared by the condition checks. Products are written in the
/// group's multiplication order even though the supported groups commute.
struct Excluded<'a> {
    k1: &'a FiniteSubset,
    z: &'a FiniteSubset,
    d: &'a FiniteSubset,
    p: &'a FiniteSubset,
    zi: FiniteSubset,
    di: FiniteSubset,
    k1i: FiniteSubset,
}

fn one(g: Elem) -> FiniteSubset {
    FiniteSubset::singleton(g)
}

impl<'a> Excluded<'a> {
    fn new(k1: &'a FiniteSubset, z: &'a FiniteSubset, d: &'a FiniteSubset, p: &'a FiniteSubset) -> Self {
        Excluded {
            k1,
            z,
            d,
            p,
            zi: z.inverse(),
            di: d.inverse(),
            k1i: k1.inverse(),
        }
    }

    /// `(a)`: `c₂ ∉ Z⁻¹D⁻¹K₁`.
    fn a(&self) -> FiniteSubset {
        product_chain(&[&self.zi, &self.di, self.k1])
    }

    /// `(b)` and `(j)`: `c⁻¹ ∉ K₁⁻¹DK₁K₁⁻¹D⁻¹Z`.
    fn b(&self) -> FiniteSubset {
        product_chain(&[&self.k1i, self.d, self.k1, &self.k1i, &self.di, self.z])
    }

    /// `(c)` and `(n)`: `c⁻¹ ∉ K₁⁻¹DZZ⁻¹D⁻¹Z`.
    fn c(&self) -> FiniteSubset {
        product_chain(&[&self.k1i, self.d, self.z, &self.zi, &self.di, self.z])
    }

    fn c3_sets(&self, c2: Elem) -> Vec<(char, bool, FiniteSubset)> {
        let (c2s, c2i) = (one(c2), one(c2.inv()));
        let zc2 = self.z.translate(c2);
        let (zi, di, k1i, d, z, k1) = (&self.zi, &self.di, &self.k1i, self.d, self.z, self.k1);
        // (name, tested on c₃⁻¹, excluded set)
        vec![
            ('d', false, product_chain(&[zi, di, &k1.union(&zc2)])),
            ('e', false, product_chain(&[zi, di, k1, &c2i, zi, d, k1])),
            ('f', false, product_chain(&[zi, di, k1, &c2i, zi, d, z, &c2s])),
            ('g', false, product_chain(&[zi, di, z, &c2s, k1i, d, k1])),
            ('h', false, product_chain(&[zi, di, z, &c2s, k1i, d, z, &c2s])),
            ('j', true, self.b()),
            ('k', true, product_chain(&[&c2i, zi, d, z, zi, di, z])),
            ('m', true, product_chain(&[k1i, d, z, &c2s, k1i, di, z])),
            ('n', true, self.c()),
        ]
    }

    fn report(&self, c2: Elem, c3: Elem) -> ConditionReport {
        let mut conditions = vec![
            Condition { name: 'a', holds: !self.a().contains(&c2) },
            Condition { name: 'b', holds: !self.b().contains(&c2.inv()) },
            Condition { name: 'c', holds: !self.c().contains(&c2.inv()) },
        ];
        let p_c2 = compute_period_set(self.z, self.d, c2);
        let p_c3 = compute_period_set(self.z, self.d, c3);
        let l_set = product_chain(&[&self.k1i, self.d, self.z, &one(c2)]);
        for (name, inverted, set) in self.c3_sets(c2) {
            let probe = if inverted { c3.inv() } else { c3 };
            conditions.push(Condition { name, holds: !set.contains(&probe) });
        }
        conditions.push(Condition {
            name: 'i',
            holds: p_c3.intersection(&p_c2).is_subset(self.p),
        });
        conditions.push(Condition {
            name: 'l',
            holds: p_c3.intersection(&l_set).is_subset(self.p),
        });
        conditions.sort_by_key(|c| c.name);
        let mut notes = Vec::new();
        if p_c2 == *self.p && p_c3 == *self.p {
            notes.push("(i), (l): P_g = P for all g (abelian), so both reduce to inclusions in P".into());
        }
        ConditionReport { conditions, notes }
    }
}

/// Evaluates (a)–(n) for given `c₂`, `c₃`.
pub fn evaluate_conditions(
    k1: &FiniteSubset,
    z: &FiniteSubset,
    d: &FiniteSubset,
    p: &FiniteSubset,
    c2: Elem,
    c3: Elem,
) -> ConditionReport {
    Excluded::new(k1, z, d, p).report(c2, c3)
}

fn norm_bound(sets: &[&FiniteSubset]) -> i64 {
    sets.iter()
        .flat_map(|s| s.iter())
        .map(|g| g.l1())
        .max()
        .unwrap_or(0)
        + 1
}

/// First `c₂` in ball order satisfying (a)–(c), then the first `c₃`
/// satisfying (d)–(n).
pub fn select_c2_c3(
    k1: &FiniteSubset,
    z: &FiniteSubset,
    d: &FiniteSubset,
    p: &FiniteSubset,
) -> Result<(Elem, Elem, ConditionReport)> {
    let dim = k1.dim().ok_or(Error::EmptySet("K₁"))?;
    let ex = Excluded::new(k1, z, d, p);
    let (xa, xb, xc) = (ex.a(), ex.b(), ex.c());
    let r2 = norm_bound(&[&xa, &xb, &xc]);
    let mut failures = [0u64; 3];
    let mut c2 = None;
    for g in ball(dim, r2) {
        let ok = [!xa.contains(&g), !xb.contains(&g.inv()), !xc.contains(&g.inv())];
        for (f, &o) in failures.iter_mut().zip(&ok) {
            *f += u64::from(!o);
        }
        if ok.iter().all(|&o| o) {
            c2 = Some(g);
            break;
        }
    }
    let c2 = c2.ok_or_else(|| Error::NotFound {
        what: format!("c₂; failures per condition (a,b,c) = {failures:?}"),
        radius: r2 as usize,
    })?;

    let sets = ex.c3_sets(c2);
    let r3 = norm_bound(&sets.iter().map(|s| &s.2).collect::<Vec<_>>());
    let mut failures = vec![0u64; sets.len() + 2];
    for g in ball(dim, r3) {
        let mut ok = true;
        for (i, (_, inverted, set)) in sets.iter().enumerate() {
            let probe = if *inverted { g.inv() } else { g };
            if set.contains(&probe) {
                failures[i] += 1;
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        let report = ex.report(c2, g);
        if report.all_hold() {
            return Ok((c2, g, report));
        }
        for (i, name) in ['i', 'l'].iter().enumerate() {
            if report.conditions.iter().any(|c| c.name == *name && !c.holds) {
                failures[sets.len() + i] += 1;
            }
        }
    }
    Err(Error::NotFound {
        what: format!("c₃ for c₂ = {c2:?}; failures per condition (d,e,f,g,h,j,k,m,n,i,l) = {failures:?}"),
        radius: r3 as usize,
    })
}

/// Everything needed to re-check a marker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerCertificate {
    #[serde(rename = "D")]
    pub d: FiniteSubset,
    /// Occurs in `X`, not in `Y`; its domain is `Z`.
    pub b: Block,
    pub p: FiniteSubset,
    pub g_p: Stabilizer,
    pub m0: Block,
    pub c_prime: FiniteSubset,
    pub m1: Block,
    pub c2: Elem,
    pub c3: Elem,
    /// The marker itself, on `K = K₁ ∪ Zc₂ ∪ Zc₃`.
    pub m: Block,
    pub companions: Companions,
    pub conditions: ConditionReport,
    pub placement_verified: bool,
}

impl MarkerCertificate {
    pub fn z(&self) -> &FiniteSubset {
        self.b.domain()
    }

    pub fn k0(&self) -> &FiniteSubset {
        self.m0.domain()
    }

    pub fn k1(&self) -> &FiniteSubset {
        self.m1.domain()
    }

    pub fn k(&self) -> &FiniteSubset {
        self.m.domain()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<MarkerCertificate> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Joins `M₁`, `B` at `c₂` and `B` at `c₃` into the marker. The three parts
/// are pairwise `D`-separated, so strong irreducibility of `X` provides an
/// admissible block; it is checked to be locally admissible.
pub fn assemble_marker(
    x: &SubshiftSpec,
    b: Block,
    period: PeriodData,
    parts: M1Parts,
    c2: Elem,
    c3: Elem,
    conditions: ConditionReport,
) -> Result<MarkerCertificate> {
    if let Some(name) = conditions.first_failure() {
        return Err(Error::MarkerCondition(name, "reported false".into()));
    }
    let k1 = parts.m1.domain();
    let zc2 = b.domain().translate(c2);
    let zc3 = b.domain().translate(c3);
    if !x.d.product(&zc2).is_disjoint(k1) {
        return Err(Error::MarkerCondition('a', "D Z c₂ meets K₁".into()));
    }
    if !x.d.product(&zc3).is_disjoint(&k1.union(&zc2)) {
        return Err(Error::MarkerCondition('d', "D Z c₃ meets K₁ ∪ Z c₂".into()));
    }
    let m = Block::from_pairs(
        parts
            .m1
            .iter()
            .chain(b.translate(c2).iter())
            .chain(b.translate(c3).iter()),
    )?;
    if !x.is_locally_admissible(&m) {
        return Err(Error::GlueFailed(
            "marker parts are not jointly admissible; irreducibility distance misdeclared?".into(),
        ));
    }
    Ok(MarkerCertificate {
        d: x.d.clone(),
        b,
        p: period.p,
        g_p: period.g_p,
        m0: parts.m0,
        c_prime: parts.c_prime,
        m1: parts.m1,
        c2,
        c3,
        m,
        companions: parts.companions,
        conditions,
        placement_verified: parts.placement_verified,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct MarkerOptions {
    /// Domain-schedule radius for the distinguishing and aperiodic blocks.
    pub radius: usize,
    pub max_t_side: i64,
}

impl Default for MarkerOptions {
    fn default() -> Self {
        MarkerOptions {
            radius: 6,
            max_t_side: 64,
        }
    }
}

/// Runs the whole construction for `Y ⊂ X`.
pub fn build_marker(x: &SubshiftSpec, y: &dyn Language, opts: MarkerOptions) -> Result<MarkerCertificate> {
    let b = find_distinguishing_block(x, y, opts.radius)?;
    build_marker_for_block(x, b, opts)
}

/// The construction from a given distinguishing block.
pub fn build_marker_for_block(x: &SubshiftSpec, b: Block, opts: MarkerOptions) -> Result<MarkerCertificate> {
    let period = compute_p_gp(x.group, b.domain(), &x.d)?;
    let parts = build_m1(x, &b, &period.p, opts.radius, opts.max_t_side)?;
    let (c2, c3, report) = select_c2_c3(parts.m1.domain(), b.domain(), &x.d, &period.p)?;
    assemble_marker(x, b, period, parts, c2, c3, report)
}

/// Re-derives every stored component and condition; refuses on the first
/// discrepancy.
pub fn verify_certificate(cert: &MarkerCertificate, x: &SubshiftSpec) -> Result<()> {
    let structural = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("certificate: {what}")))
        }
    };
    let z = cert.z();
    let d = &cert.d;
    structural(*d == x.d, "D differs from the subshift's")?;
    let period = compute_p_gp(x.group, z, d)?;
    structural(period.p == cert.p, "P is not Z⁻¹DZ")?;
    let p_star = cert.p.difference(&FiniteSubset::singleton(x.group.identity()));
    structural(is_p_aperiodic(&cert.m0, &p_star), "M₀ is not P-aperiodic")?;
    structural(
        cert.m0.domain().iter().any(|&g| cert.m0.contains_at(&cert.b, g - *z.first().unwrap())),
        "M₀ does not contain B",
    )?;
    let dz = d.product(z);
    let mut k1 = cert.k0().clone();
    for &c in cert.c_prime.iter() {
        k1 = k1.union(&dz.translate(c));
    }
    structural(k1 == *cert.k1(), "K₁ ≠ K₀ ∪ ⋃ DZc′")?;
    structural(cert.m1.restrict(cert.k0()).ok().as_ref() == Some(&cert.m0), "M₁(K₀) ≠ M₀")?;
    for &c in cert.c_prime.iter() {
        structural(cert.m1.contains_at(&cert.b, c), "M₁(Zc′) ≠ B")?;
    }
    let report = evaluate_conditions(&k1, z, d, &cert.p, cert.c2, cert.c3);
    if let Some(name) = report.first_failure() {
        return Err(Error::MarkerCondition(name, format!("c₂ = {:?}, c₃ = {:?}", cert.c2, cert.c3)));
    }
    structural(report == cert.conditions, "stored condition report differs")?;
    let k = k1.union(&z.translate(cert.c2)).union(&z.translate(cert.c3));
    structural(k == *cert.k(), "K ≠ K₁ ∪ Zc₂ ∪ Zc₃")?;
    structural(cert.m.restrict(&k1).ok().as_ref() == Some(&cert.m1), "M(K₁) ≠ M₁")?;
    structural(
        cert.m.contains_at(&cert.b, cert.c2) && cert.m.contains_at(&cert.b, cert.c3),
        "M(Zc₂) or M(Zc₃) ≠ B",
    )?;
    structural(x.is_locally_admissible(&cert.m), "M is not admissible in X")?;
    let placed = placement_property(d, z, cert.k0(), &cert.c_prime, &cert.companions.t_shape());
    structural(placed && cert.placement_verified, "placement property fails")?;
    Ok(())
}

/// Result of the brute-force check of both marker conclusions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub offsets_tested: u64,
    /// Offsets where `M` at `0` and at `v` agree on the overlap.
    pub consistent_overlaps: u64,
    pub glue_attempts: u64,
    /// Realizable double occurrences without an exposed non-`Y` block.
    pub violations: Vec<Elem>,
    pub tile_cells_tested: u64,
    pub tile_violations: Vec<Elem>,
    pub self_overlap_violations: Vec<Elem>,
    pub inconclusive: bool,
}

impl WindowReport {
    pub fn passed(&self) -> bool {
        !self.inconclusive
            && self.violations.is_empty()
            && self.tile_violations.is_empty()
            && self.self_overlap_violations.is_empty()
    }
}

/// Box window whose side along each axis is four times the extent of `K`,
/// placed so that `K` sits in the middle.
pub fn nominal_window(cert: &MarkerCertificate) -> FiniteSubset {
    let (lo, hi) = cert.k().bbox().expect("nonempty marker");
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..lo.dim() {
        let ext = hi.coord(i) - lo.coord(i) + 1;
        a.push(lo.coord(i) - 3 * ext / 2);
        b.push(lo.coord(i) - 3 * ext / 2 + 4 * ext);
    }
    FiniteSubset::box_range(&a, &b)
}

fn consistent(m: &Block, v: Elem) -> bool {
    m.iter().all(|(k, s)| m.get(&(k - v)).is_none_or(|t| t == s))
}

/// Whether `M` at `0` and at `v` extend to one admissible pattern.
fn realizable(x: &SubshiftSpec, m: &Block, v: Elem, report: &mut WindowReport) -> bool {
    report.glue_attempts += 1;
    let shifted = m.translate(v);
    let hull = m.domain().union(shifted.domain()).hull();
    match fill(x, &hull, m.iter().chain(shifted.iter()), default_budget()) {
        Ok(_) => true,
        Err(Error::GlueFailed(_)) => false,
        Err(_) => {
            report.inconclusive = true;
            false
        }
    }
}

/// Brute-force check of both conclusions on `window`, which must be a box:
/// every pair of distinct positions with both `K`-translates inside, every
/// cell of a `T` tile, and every `p ∈ P ∖ {e}`.
pub fn verify_marker_window(
    cert: &MarkerCertificate,
    x: &SubshiftSpec,
    y: &dyn Language,
    window: &FiniteSubset,
) -> Result<WindowReport> {
    if window.is_empty() || window.len() != window.hull().len() {
        return Err(Error::InvalidArgument("marker window must be a nonempty box".into()));
    }
    let m = &cert.m;
    let k = cert.k();
    let (wlo, whi) = window.bbox().unwrap();
    let (klo, khi) = k.bbox().unwrap();
    let dim = wlo.dim();
    // positions g with K + g inside the window form a box; so do differences
    let mut span_lo = Vec::new();
    let mut span_hi = Vec::new();
    for i in 0..dim {
        let room = (whi.coord(i) - wlo.coord(i)) - (khi.coord(i) - klo.coord(i));
        if room < 0 {
            return Err(Error::InvalidArgument("window smaller than K".into()));
        }
        span_lo.push(-room);
        span_hi.push(room + 1);
    }
    let dk = cert.d.product(k);
    let mut report = WindowReport::default();
    for &v in FiniteSubset::box_range(&span_lo, &span_hi).iter() {
        if v.is_identity() {
            continue;
        }
        report.offsets_tested += 1;
        if !consistent(m, v) {
            continue;
        }
        report.consistent_overlaps += 1;
        let exposed = k.translate(v).difference(&dk);
        let exposes = !exposed.is_empty()
            && !y.admits(&m.translate(v).restrict(&exposed).expect("exposed ⊆ K + v"));
        if !exposes && realizable(x, m, v, &mut report) {
            report.violations.push(v);
        }
    }

    let s = cert.companions.t_shape();
    let s_d = s.d_interior(&cert.d);
    for &t in s.iter() {
        report.tile_cells_tested += 1;
        let cells = s_d.intersection(&k.translate(t));
        let exposes =
            !cells.is_empty() && !y.admits(&m.translate(t).restrict(&cells).expect("cells ⊆ K + t"));
        if !exposes {
            report.tile_violations.push(t);
        }
    }

    for &p in cert.p.iter() {
        if p.is_identity() {
            continue;
        }
        if consistent(m, p) && realizable(x, m, p, &mut report) {
            report.self_overlap_violations.push(p);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zs(v: &[i64]) -> FiniteSubset {
        v.iter().map(|&x| Elem::z(x)).collect()
    }

    fn gap_no33() -> SubshiftSpec {
        SubshiftSpec::no33().with_forbidden(&[Block::word(&[0])])
    }

    #[test]
    fn distinguishing_block_examples() {
        let full = SubshiftSpec::full(Group::Z, 2);
        let golden = SubshiftSpec::golden_mean(zs(&[-1, 0, 1])).unwrap();
        assert_eq!(find_distinguishing_block(&full, &golden, 4).unwrap(), Block::word(&[1, 1]));
        assert!(find_distinguishing_block(&full, &full, 4).is_err());
        let x = SubshiftSpec::no33();
        assert_eq!(find_distinguishing_block(&x, &gap_no33(), 4).unwrap(), Block::word(&[0]));
    }

    #[test]
    fn period_sets() {
        assert_eq!(compute_period_set(&zs(&[0, 1]), &zs(&[-1, 0, 1]), Elem::z(17)), zs(&[-2, -1, 0, 1, 2]));
        assert_eq!(compute_period_set(&zs(&[0]), &zs(&[0]), Elem::z(3)), zs(&[0]));
        let z2: FiniteSubset = [Elem::z2(0, 0), Elem::z2(1, 0)].into_iter().collect();
        let want: FiniteSubset = [Elem::z2(-1, 0), Elem::z2(0, 0), Elem::z2(1, 0)].into_iter().collect();
        assert_eq!(compute_period_set(&z2, &FiniteSubset::singleton(Elem::z2(0, 0)), Elem::z2(5, 7)), want);
        let pd = compute_p_gp(Group::Z, &zs(&[0, 1]), &zs(&[-1, 0, 1])).unwrap();
        assert_eq!(pd.p, zs(&[-2, -1, 0, 1, 2]));
        assert_eq!(pd.g_p, Stabilizer::WholeGroup);
    }

    #[test]
    fn c2_c3_on_singletons() {
        let s = zs(&[0]);
        let (c2, c3, report) = select_c2_c3(&s, &s, &s, &s).unwrap();
        // every excluded set for c₂ is {0}; ball order visits −1 before 1
        assert_eq!(c2, Elem::z(-1));
        assert!(report.all_hold());
        assert_eq!(report.conditions.len(), 14);
        assert!(!c3.is_identity() && c3 != c2);
    }

    /// Sum of integer intervals.
    fn isum(parts: &[(i64, i64)]) -> (i64, i64) {
        parts.iter().fold((0, 0), |a, p| (a.0 + p.0, a.1 + p.1))
    }

    fn neg((a, b): (i64, i64)) -> (i64, i64) {
        (-b, -a)
    }

    fn outside(v: i64, ivs: &[(i64, i64)]) -> bool {
        ivs.iter().all(|&(a, b)| v < a || v > b)
    }

    #[test]
    fn conditions_by_interval_oracle() {
        // all sets are intervals on Z, so every excluded set is an interval sum
        let (k1, z, d) = ((-3, 2), (0, 0), (-1, 1));
        let (c2, c3, report) = select_c2_c3(
            &FiniteSubset::interval(-3, 3),
            &zs(&[0]),
            &zs(&[-1, 0, 1]),
            &zs(&[-1, 0, 1]),
        )
        .unwrap();
        assert!(report.all_hold());
        let c2_excl = [
            isum(&[neg(z), neg(d), k1]),
            neg(isum(&[neg(k1), d, k1, neg(k1), neg(d), z])),
            neg(isum(&[neg(k1), d, z, neg(z), neg(d), z])),
        ];
        let first = |excl: &[(i64, i64)]| {
            (0i64..)
                .flat_map(|r| [-r, r])
                .find(|&v| outside(v, excl))
                .unwrap()
        };
        let want2 = first(&c2_excl);
        assert_eq!(c2, Elem::z(want2));
        let g = (want2, want2);
        let c3_excl = [
            isum(&[neg(z), neg(d), k1]),
            isum(&[neg(z), neg(d), z, g]),
            isum(&[neg(z), neg(d), k1, neg(g), neg(z), d, k1]),
            isum(&[neg(z), neg(d), k1, neg(g), neg(z), d, z, g]),
            isum(&[neg(z), neg(d), z, g, neg(k1), d, k1]),
            isum(&[neg(z), neg(d), z, g, neg(k1), d, z, g]),
            neg(isum(&[neg(k1), d, k1, neg(k1), neg(d), z])),
            neg(isum(&[neg(g), neg(z), d, z, neg(z), neg(d), z])),
            neg(isum(&[neg(k1), d, z, g, neg(k1), neg(d), z])),
            neg(isum(&[neg(k1), d, z, neg(z), neg(d), z])),
        ];
        assert_eq!(c3, Elem::z(first(&c3_excl)));
        assert_eq!((c2, c3), (Elem::z(10), Elem::z(-19)));
        let bad = evaluate_conditions(&FiniteSubset::interval(-3, 3), &zs(&[0]), &zs(&[-1, 0, 1]), &zs(&[-1, 0, 1]), Elem::z(0), c3);
        assert_eq!(bad.first_failure(), Some('a'));
    }

    #[test]
    fn no33_marker_certificate() {
        let x = SubshiftSpec::no33();
        let y = gap_no33();
        let cert = build_marker(&x, &y, MarkerOptions::default()).unwrap();
        assert_eq!(cert.b, Block::word(&[0]));
        assert!(cert.conditions.all_hold());
        assert!(cert.placement_verified);
        verify_certificate(&cert, &x).unwrap();
        assert!(!y.admits(&cert.m));
        let report = verify_marker_window(&cert, &x, &y, &nominal_window(&cert)).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.consistent_overlaps > 0);

        let back = MarkerCertificate::from_json(&cert.to_json().unwrap()).unwrap();
        assert_eq!(back, cert);

        let mut tampered = cert.clone();
        tampered.c2 = *cert.k1().first().unwrap();
        match verify_certificate(&tampered, &x) {
            Err(Error::MarkerCondition(name, _)) => assert_eq!(name, 'a'),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn golden_in_full_shift() {
        let x = SubshiftSpec::new(Group::Z, 2, Vec::new(), zs(&[-1, 0, 1])).unwrap();
        let y = SubshiftSpec::golden_mean(zs(&[-1, 0, 1])).unwrap();
        let cert = build_marker(&x, &y, MarkerOptions::default()).unwrap();
        verify_certificate(&cert, &x).unwrap();
        let report = verify_marker_window(&cert, &x, &y, &nominal_window(&cert)).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn full3_z2_marker() {
        let x = SubshiftSpec::full(Group::Z2, 3);
        let b = Block::from_pairs([(Elem::z2(0, 0), 0), (Elem::z2(0, 1), 0)]).unwrap();
        let y = x.with_forbidden(std::slice::from_ref(&b));
        let cert = build_marker(&x, &y, MarkerOptions::default()).unwrap();
        assert_eq!(cert.b, b);
        verify_certificate(&cert, &x).unwrap();
    }

    #[test]
    fn tprime_centers_inside_region() {
        let comp = Companions::for_block(&zs(&[0]), &zs(&[-1, 0, 1]), 10);
        assert_eq!(comp.tprime_shape, zs(&[-1, 0, 1]));
        assert_eq!(comp.tprime_period, Elem::z(3));
        assert_eq!(comp.tprime_centers_within(&FiniteSubset::interval(1, 9)), vec![Elem::z(3), Elem::z(6)]);
    }
}
