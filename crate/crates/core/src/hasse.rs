//! The Hasse property for subgroups of PGL_d(F_l), structural classification
//! of subgroups of PGL_2(F_l), the block-diagonal sufficiency check and
//! subgroup enumeration up to conjugacy.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ffield::FieldElement;
use crate::matgrp::{block_diagonal, projectivize, Matrix, MatrixGroup, ProjGroup, ProjPoint, DEFAULT_CAP};

/// Default bound on the ambient order for [`enumerate_subgroups`] (|PGL_2(F_11)|).
pub const DEFAULT_ENUM_BOUND: usize = 1320;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HasseResult {
    pub is_hasse: bool,
    /// Least element without a fixed point.
    pub violating_element: Option<Matrix>,
    /// Least point fixed by the whole group.
    pub global_fixed_point: Option<ProjPoint>,
}

impl HasseResult {
    fn from_witnesses(violating_element: Option<Matrix>, global_fixed_point: Option<ProjPoint>) -> Self {
        Self {
            is_hasse: violating_element.is_none() && global_fixed_point.is_none(),
            violating_element,
            global_fixed_point,
        }
    }
}

/// Every element fixes a point, and no point is fixed by all of H.
pub fn is_hasse(h: &ProjGroup) -> HasseResult {
    let violating = h.elements().iter().find(|m| !m.has_fixed_point()).copied();
    HasseResult::from_witnesses(violating, h.global_fixed_point())
}

/// Reference implementation of [`is_hasse`] that scans every projective point.
pub fn is_hasse_scan(h: &ProjGroup) -> HasseResult {
    let points = ProjPoint::all(h.dim(), h.modulus());
    let violating = h
        .elements()
        .iter()
        .find(|m| !points.iter().any(|x| m.act(x) == *x))
        .copied();
    let global = points.into_iter().find(|x| h.elements().iter().all(|m| m.act(x) == *x));
    HasseResult::from_witnesses(violating, global)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DicksonLabel {
    Cyclic(usize),
    /// Dihedral group of the given order 2n (order 4 is the Klein group).
    Dihedral(usize),
    BorelContained,
    A4,
    S4,
    A5,
    Psl2,
    Pgl2,
}

impl DicksonLabel {
    /// The n of a dihedral group of order 2n.
    pub fn dihedral_n(self) -> Option<usize> {
        match self {
            Self::Dihedral(o) => Some(o / 2),
            _ => None,
        }
    }
}

impl fmt::Display for DicksonLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cyclic(n) => write!(f, "cyclic({n})"),
            Self::Dihedral(o) => write!(f, "dihedral({o})"),
            Self::BorelContained => write!(f, "borel_contained"),
            Self::A4 => write!(f, "A4"),
            Self::S4 => write!(f, "S4"),
            Self::A5 => write!(f, "A5"),
            Self::Psl2 => write!(f, "psl2"),
            Self::Pgl2 => write!(f, "pgl2"),
        }
    }
}

impl Serialize for DicksonLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A pair of points of P^1 over F_l (split) or a conjugate pair over F_{l^2}
/// (nonsplit), the latter given by the binary quadratic form a X^2 + b XY + c Y^2
/// vanishing on it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StabilizedPair {
    Split { points: [ProjPoint; 2] },
    Nonsplit { form: [u32; 3] },
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Sutherland {
    pub cond1_dihedral_odd_n: bool,
    pub cond2_ell_3mod4: bool,
    pub cond3_split_cartan_normalizer: bool,
    /// The kernel of the projective determinant fixes a point of P^1.
    pub cond4_index2_fixes: bool,
    pub predicted_hasse: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Pgl2Classification {
    pub order: usize,
    pub dickson_label: DicksonLabel,
    pub stabilized_pair: StabilizedPair,
    pub rotation_subgroup_fixed_point: bool,
    pub projective_det_surjective: bool,
    pub sutherland: Sutherland,
}

/// Projective determinant of a 2x2 class: det modulo squares, as +1 / -1.
pub fn projective_det(m: &Matrix) -> i8 {
    let p = m.modulus();
    if p == 2 {
        return 1;
    }
    FieldElement::from_u64(m.det(), p).legendre().expect("odd modulus")
}

fn form_value(form: [u64; 3], x: u64, y: u64, p: u64) -> u64 {
    (form[0] * x % p * x + form[1] * x % p * y + form[2] * y % p * y) % p
}

/// The form Q(m (X, Y)).
fn form_pullback(form: [u64; 3], m: &Matrix) -> [u64; 3] {
    let p = m.modulus();
    let (a, b, c) = (form[0], form[1], form[2]);
    let (w, x, y, z) = (m.get(0, 0) as u64, m.get(0, 1) as u64, m.get(1, 0) as u64, m.get(1, 1) as u64);
    [
        (a * w % p * w + b * w % p * y + c * y % p * y) % p,
        (2 * a * w % p * x + b * ((w * z + x * y) % p) + 2 * c * y % p * z) % p,
        (a * x % p * x + b * x % p * z + c * z % p * z) % p,
    ]
}

fn proportional(u: [u64; 3], v: [u64; 3], p: u64) -> bool {
    // u ~ v iff all 2x2 minors vanish
    (0..3).all(|i| (0..3).all(|j| (u[i] * v[j] + p * p - u[j] * v[i]) % p == 0))
}

/// Least stabilized split pair, else least stabilized nonsplit pair.
pub fn stabilized_pair(h: &ProjGroup) -> StabilizedPair {
    let p = h.modulus();
    let points = ProjPoint::all(2, p);
    let mut nonsplit = None;
    for a in 0..p {
        for b in 0..p {
            for c in 0..p {
                let form = [a, b, c];
                let lead = form.iter().position(|&x| x != 0);
                if lead.map_or(true, |i| form[i] != 1) {
                    continue;
                }
                let roots: Vec<ProjPoint> = points
                    .iter()
                    .filter(|pt| {
                        let c = pt.coords();
                        form_value(form, c[0] as u64, c[1] as u64, p) == 0
                    })
                    .copied()
                    .collect();
                if roots.len() == 1 || (roots.is_empty() && nonsplit.is_some()) {
                    continue;
                }
                if !h.generators().iter().all(|g| proportional(form_pullback(form, g), form, p)) {
                    continue;
                }
                if roots.len() == 2 {
                    return StabilizedPair::Split { points: [roots[0], roots[1]] };
                }
                nonsplit = Some([a as u32, b as u32, c as u32]);
            }
        }
    }
    nonsplit.map_or(StabilizedPair::None, |form| StabilizedPair::Nonsplit { form })
}

fn common_fixed(elements: &[Matrix], dim: usize, p: u64) -> bool {
    ProjPoint::all(dim, p).iter().any(|x| elements.iter().all(|m| m.act(x) == *x))
}

/// Structural classification of a subgroup of PGL_2(F_l).
pub fn classify_pgl2(h: &ProjGroup) -> Result<Pgl2Classification> {
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch(2, h.dim()));
    }
    let ell = h.modulus();
    let order = h.order();
    let orders: Vec<u64> = h.elements().iter().map(Matrix::proj_order).collect();
    let max_order = orders.iter().copied().max().unwrap_or(1) as usize;
    let pgl_order = (ell * (ell * ell - 1)) as usize;
    let global = h.global_fixed_point();

    // cyclic subgroup of index 2 with every other element an involution
    let mut rotation: Option<Vec<Matrix>> = None;
    if order >= 4 && order % 2 == 0 && max_order != order {
        let n = order / 2;
        for (i, r) in h.elements().iter().enumerate() {
            if orders[i] as usize != n {
                continue;
            }
            let mut c = Vec::with_capacity(n);
            let mut x = Matrix::identity(2, ell);
            for _ in 0..n {
                c.push(x.proj_canonical());
                x = x.mul(r);
            }
            c.sort_unstable();
            let outside_involutions = h
                .elements()
                .iter()
                .zip(&orders)
                .all(|(m, &o)| c.binary_search(m).is_ok() || o == 2);
            if outside_involutions {
                rotation = Some(c);
                break;
            }
        }
    }

    let dickson_label = if order == pgl_order {
        DicksonLabel::Pgl2
    } else if ell > 2 && order == pgl_order / 2 {
        DicksonLabel::Psl2
    } else if max_order == order {
        DicksonLabel::Cyclic(order)
    } else if rotation.is_some() {
        DicksonLabel::Dihedral(order)
    } else if global.is_some() {
        DicksonLabel::BorelContained
    } else {
        match order {
            12 => DicksonLabel::A4,
            24 => DicksonLabel::S4,
            60 => DicksonLabel::A5,
            _ => return Err(Error::Invalid(format!("unrecognized subgroup of PGL_2 of order {order}"))),
        }
    };

    let pair = stabilized_pair(h);
    let rotation_subgroup_fixed_point = rotation.as_ref().map_or(false, |c| common_fixed(c, 2, ell));
    let kernel: Vec<Matrix> = h.elements().iter().filter(|m| projective_det(m) == 1).copied().collect();
    let projective_det_surjective = ell == 2 || kernel.len() < order;
    let cond1 = ell % 2 == 1
        && dickson_label.dihedral_n().map_or(false, |n| {
            n > 1 && n % 2 == 1 && ((ell - 1) / 2) % n as u64 == 0
        });
    let cond2 = ell % 4 == 3;
    let sutherland = Sutherland {
        cond1_dihedral_odd_n: cond1,
        cond2_ell_3mod4: cond2,
        cond3_split_cartan_normalizer: matches!(pair, StabilizedPair::Split { .. }),
        cond4_index2_fixes: common_fixed(&kernel, 2, ell),
        predicted_hasse: cond1 && cond2,
    };
    Ok(Pgl2Classification {
        order,
        dickson_label,
        stabilized_pair: pair,
        rotation_subgroup_fixed_point,
        projective_det_surjective,
        sutherland,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma31Outcome {
    pub predicted: bool,
    pub brute_force: HasseResult,
}

/// Predicted Hasse property of the block-diagonal group from its two factors,
/// together with the brute-force answer on P^3.
pub fn lemma31_check(g: &MatrixGroup, g2: &MatrixGroup, cap: usize) -> Result<Lemma31Outcome> {
    let hasse1 = is_hasse(&projectivize(g)).is_hasse;
    let hasse2 = is_hasse(&projectivize(g2)).is_hasse;
    let borel1 = g.global_fixed_point().is_some();
    let borel2 = g2.global_fixed_point().is_some();
    let predicted = (hasse1 && !borel2) || (hasse2 && !borel1);
    let block = block_diagonal(g, g2, cap)?;
    Ok(Lemma31Outcome { predicted, brute_force: is_hasse(&projectivize(&block)) })
}

type Bits = Vec<u64>;

fn bit(b: &Bits, i: usize) -> bool {
    b[i / 64] >> (i % 64) & 1 == 1
}

fn set_bit(b: &mut Bits, i: usize) {
    b[i / 64] |= 1 << (i % 64);
}

struct Cayley {
    elements: Vec<Matrix>,
    table: Vec<u32>,
    inv: Vec<u32>,
    identity: usize,
}

impl Cayley {
    fn new(ambient: &ProjGroup) -> Self {
        let elements = ambient.elements().to_vec();
        let n = elements.len();
        let index: HashMap<Matrix, u32> = elements.iter().enumerate().map(|(i, m)| (*m, i as u32)).collect();
        let mut table = vec![0u32; n * n];
        for i in 0..n {
            for j in 0..n {
                table[i * n + j] = index[&elements[i].mul(&elements[j]).proj_canonical()];
            }
        }
        let identity = index[&Matrix::identity(ambient.dim(), ambient.modulus())] as usize;
        let inv = (0..n)
            .map(|i| (0..n).find(|&j| table[i * n + j] as usize == identity).unwrap() as u32)
            .collect();
        Self { elements, table, inv, identity }
    }

    fn n(&self) -> usize {
        self.elements.len()
    }

    #[inline]
    fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.n() + b] as usize
    }

    fn closure(&self, gens: &[usize]) -> (Bits, Vec<usize>) {
        let n = self.n();
        let mut bits = vec![0u64; n.div_ceil(64)];
        let mut members = vec![self.identity];
        set_bit(&mut bits, self.identity);
        let mut k = 0;
        while k < members.len() {
            let x = members[k];
            for &g in gens {
                let y = self.mul(x, g);
                if !bit(&bits, y) {
                    set_bit(&mut bits, y);
                    members.push(y);
                }
            }
            k += 1;
        }
        (bits, members)
    }

    fn conjugate(&self, members: &[usize], x: usize) -> Bits {
        let mut bits = vec![0u64; self.n().div_ceil(64)];
        let xi = self.inv[x] as usize;
        for &k in members {
            set_bit(&mut bits, self.mul(self.mul(x, k), xi));
        }
        bits
    }
}

/// All subgroups of `ambient` up to conjugacy in `ambient`, sorted by order
/// and then by element list.
pub fn enumerate_subgroups(ambient: &ProjGroup, bound: usize) -> Result<Vec<ProjGroup>> {
    if ambient.order() > bound {
        return Err(Error::BoundExceeded { size: ambient.order(), bound });
    }
    let cay = Cayley::new(ambient);
    let n = cay.n();
    let mut seen: HashSet<Bits> = HashSet::new();
    // class representatives: (generator indices, member indices)
    let mut reps: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();

    let mut register = |gens: Vec<usize>, bits: Bits, members: Vec<usize>, reps: &mut Vec<(Vec<usize>, Vec<usize>)>| {
        if seen.contains(&bits) {
            return;
        }
        for x in 0..n {
            seen.insert(cay.conjugate(&members, x));
        }
        reps.push((gens, members));
    };

    let (bits, members) = cay.closure(&[]);
    register(Vec::new(), bits, members, &mut reps);
    let mut next = 0;
    while next < reps.len() {
        let (gens, members) = reps[next].clone();
        next += 1;
        let mut sub = vec![0u64; n.div_ceil(64)];
        for &m in &members {
            set_bit(&mut sub, m);
        }
        let mut done = sub.clone();
        for g in 0..n {
            if bit(&done, g) {
                continue;
            }
            // g and g*s (s in the subgroup) extend to the same group
            for &s in &members {
                set_bit(&mut done, cay.mul(g, s));
            }
            let mut new_gens = gens.clone();
            new_gens.push(g);
            let (bits, new_members) = cay.closure(&new_gens);
            register(new_gens, bits, new_members, &mut reps);
        }
    }

    let mut out: Vec<ProjGroup> = reps
        .into_iter()
        .map(|(gens, members)| {
            ProjGroup::from_parts(
                ambient.dim(),
                ambient.modulus(),
                gens.iter().map(|&i| cay.elements[i]).collect(),
                members.iter().map(|&i| cay.elements[i]).collect(),
            )
        })
        .collect();
    out.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.elements().cmp(b.elements())));
    Ok(out)
}

/// The full group PGL_2(F_l).
pub fn pgl2(ell: u64) -> Result<ProjGroup> {
    let gens = crate::matgrp::standard_generators(crate::matgrp::GroupKind::Gl2, ell)?;
    ProjGroup::generate(2, ell, gens, DEFAULT_CAP)
}

/// Whether n is odd, greater than 1 and divides (l - 1) / 2.
pub fn odd_dihedral_n_ok(n: u64, ell: u64) -> bool {
    n > 1 && n % 2 == 1 && ell % 2 == 1 && ((ell - 1) / 2) % n == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgrp::{closure, standard_group, GroupKind};
    use proptest::prelude::*;

    fn m2(p: u64, a: i64, b: i64, c: i64, d: i64) -> Matrix {
        Matrix::new(2, p, &[a, b, c, d]).unwrap()
    }

    fn d6() -> ProjGroup {
        ProjGroup::generate(2, 7, vec![m2(7, 2, 0, 0, 1), m2(7, 0, 1, 1, 0)], DEFAULT_CAP).unwrap()
    }

    #[test]
    fn trivial_group_is_not_hasse() {
        let t = ProjGroup::generate(2, 7, vec![], 1).unwrap();
        let r = is_hasse(&t);
        assert!(!r.is_hasse);
        assert!(r.violating_element.is_none());
        assert_eq!(r.global_fixed_point, Some(ProjPoint::new(7, &[0, 1]).unwrap()));
    }

    #[test]
    fn d6_is_hasse() {
        let r = is_hasse(&d6());
        assert!(r.is_hasse);
        assert_eq!(r, is_hasse_scan(&d6()));
    }

    #[test]
    fn pgl2_f7_is_not_hasse() {
        let g = pgl2(7).unwrap();
        assert_eq!(g.order(), 336);
        let r = is_hasse(&g);
        assert!(!r.is_hasse);
        let v = r.violating_element.unwrap();
        assert!(v.fixed_points_scan().is_empty());
        // the least such class is a companion matrix of an irreducible quadratic
        assert_eq!(v.get(0, 0), 0);
        assert_eq!(v.get(0, 1), 1);
        assert_eq!(r, is_hasse_scan(&g));
    }

    #[test]
    fn classify_d6() {
        let c = classify_pgl2(&d6()).unwrap();
        assert_eq!(c.order, 6);
        assert_eq!(c.dickson_label, DicksonLabel::Dihedral(6));
        assert_eq!(
            c.stabilized_pair,
            StabilizedPair::Split { points: [ProjPoint::new(7, &[0, 1]).unwrap(), ProjPoint::new(7, &[1, 0]).unwrap()] }
        );
        let s = &c.sutherland;
        assert!(s.cond1_dihedral_odd_n && s.cond2_ell_3mod4 && s.cond3_split_cartan_normalizer && s.cond4_index2_fixes);
        assert!(s.predicted_hasse);
        assert!(c.rotation_subgroup_fixed_point);
        assert!(c.projective_det_surjective);
    }

    #[test]
    fn classify_split_normalizer_and_trivial() {
        let g = projectivize(&standard_group(GroupKind::SplitCartanNormalizer, 7, DEFAULT_CAP).unwrap());
        let c = classify_pgl2(&g).unwrap();
        assert_eq!(c.dickson_label, DicksonLabel::Dihedral(12));
        assert!(!c.sutherland.cond1_dihedral_odd_n);
        let t = classify_pgl2(&ProjGroup::generate(2, 7, vec![], 1).unwrap()).unwrap();
        assert_eq!(t.dickson_label, DicksonLabel::Cyclic(1));
        assert!(!t.sutherland.cond1_dihedral_odd_n);
        let nons = projectivize(&standard_group(GroupKind::NonsplitCartanNormalizer, 7, DEFAULT_CAP).unwrap());
        let c = classify_pgl2(&nons).unwrap();
        assert_eq!(c.dickson_label, DicksonLabel::Dihedral(16));
        assert!(matches!(c.stabilized_pair, StabilizedPair::Nonsplit { .. }));
        assert_eq!(classify_pgl2(&pgl2(7).unwrap()).unwrap().dickson_label, DicksonLabel::Pgl2);
    }

    #[test]
    fn lemma31_examples() {
        let g = closure(&[m2(7, 2, 0, 0, 1), m2(7, 0, 1, 1, 0)], DEFAULT_CAP).unwrap();
        let c = closure(&[m2(7, 0, -3, 1, 1)], DEFAULT_CAP).unwrap();
        let out = lemma31_check(&g, &c, DEFAULT_CAP).unwrap();
        assert!(out.predicted);
        assert!(out.brute_force.is_hasse);
        let t = MatrixGroup::trivial(2, 7).unwrap();
        let out = lemma31_check(&t, &t, DEFAULT_CAP).unwrap();
        assert!(!out.predicted && !out.brute_force.is_hasse);
        let b = standard_group(GroupKind::Borel, 7, DEFAULT_CAP).unwrap();
        let out = lemma31_check(&b, &b, DEFAULT_CAP).unwrap();
        assert!(!out.predicted && !out.brute_force.is_hasse);
    }

    #[test]
    fn pgl2_f2_subgroups() {
        let subs = enumerate_subgroups(&pgl2(2).unwrap(), DEFAULT_ENUM_BOUND).unwrap();
        let orders: Vec<usize> = subs.iter().map(ProjGroup::order).collect();
        assert_eq!(orders, vec![1, 2, 3, 6]);
        assert!(subs.iter().all(|h| !is_hasse(h).is_hasse));
        let trivial = ProjGroup::generate(2, 7, vec![], 1).unwrap();
        assert_eq!(enumerate_subgroups(&trivial, 10).unwrap().len(), 1);
        assert!(matches!(enumerate_subgroups(&pgl2(7).unwrap(), 100), Err(Error::BoundExceeded { .. })));
    }

    /// Conjugacy classes of subgroups by brute force: close every pair of elements.
    fn subgroup_classes_by_pairs(g: &ProjGroup) -> usize {
        let els = g.elements();
        let mut all: HashSet<Vec<Matrix>> = HashSet::new();
        for a in els {
            for b in els {
                if b < a {
                    continue;
                }
                let h = ProjGroup::generate(2, g.modulus(), vec![*a, *b], DEFAULT_CAP).unwrap();
                all.insert(h.elements().to_vec());
            }
        }
        let mut classes = 0;
        let mut seen: HashSet<Vec<Matrix>> = HashSet::new();
        let mut sorted: Vec<_> = all.into_iter().collect();
        sorted.sort();
        for h in sorted {
            if seen.contains(&h) {
                continue;
            }
            classes += 1;
            for x in els {
                let xi = x.inverse().unwrap();
                let mut c: Vec<Matrix> = h.iter().map(|m| x.mul(m).mul(&xi).proj_canonical()).collect();
                c.sort();
                seen.insert(c);
            }
        }
        classes
    }

    #[test]
    fn enumeration_matches_pair_oracle() {
        for ell in [2u64, 3, 5] {
            let g = pgl2(ell).unwrap();
            let subs = enumerate_subgroups(&g, DEFAULT_ENUM_BOUND).unwrap();
            assert_eq!(subs.len(), subgroup_classes_by_pairs(&g), "ell = {ell}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn hasse_is_conjugation_invariant(a in 0i64..7, b in 0i64..7, c in 0i64..7, d in 0i64..7) {
            let x = m2(7, a, b, c, d);
            prop_assume!(x.is_invertible());
            for h in [d6(), pgl2(7).unwrap(), projectivize(&standard_group(GroupKind::Borel, 7, DEFAULT_CAP).unwrap())] {
                let hx = h.conjugate(&x).unwrap();
                prop_assert_eq!(is_hasse(&h).is_hasse, is_hasse(&hx).is_hasse);
            }
        }
    }
}
