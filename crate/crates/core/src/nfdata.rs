//! Newform records with quadratic coefficient rings, reduction modulo a prime
//! above l, Frobenius characteristic polynomials and the Sturm bound.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::dchar::{CharacterSpec, DirichletCharacter, Embedding};
use crate::error::{Error, Result};
use crate::ffield::{factorize, ExtElement, FieldElement};

/// The ring Z[g] with g^2 + b g + c = 0, or Z itself (`degree == 1`, g = 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuadField {
    pub c: i64,
    pub b: i64,
    pub degree: u8,
}

impl QuadField {
    pub fn quadratic(c: i64, b: i64) -> Self {
        Self { c, b, degree: 2 }
    }

    pub fn rational() -> Self {
        Self { c: 0, b: 0, degree: 1 }
    }

    /// From `field_poly` coefficients, constant term first.
    pub fn from_poly(poly: &[i64]) -> Result<Self> {
        match poly {
            [0, 1] => Ok(Self::rational()),
            [c, b, 1] => Ok(Self::quadratic(*c, *b)),
            _ => Err(Error::Invalid(format!("unsupported field polynomial {poly:?}"))),
        }
    }

    pub fn poly(&self) -> Vec<i64> {
        if self.degree == 1 {
            vec![0, 1]
        } else {
            vec![self.c, self.b, 1]
        }
    }

    pub fn discriminant(&self) -> i64 {
        self.b * self.b - 4 * self.c
    }

    pub fn is_rational(&self) -> bool {
        self.degree == 1
    }

    pub fn is_real(&self) -> bool {
        self.degree == 2 && self.discriminant() > 0
    }

    pub fn elem(&self, c0: i64, c1: i64) -> QuadElement {
        QuadElement { c0, c1, den: 1, field: *self }
    }

    pub fn one(&self) -> QuadElement {
        self.elem(1, 0)
    }

    pub fn zero(&self) -> QuadElement {
        self.elem(0, 0)
    }
}

/// (c0 + c1 g) / den in a [`QuadField`].
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuadElement {
    pub c0: i64,
    pub c1: i64,
    pub den: i64,
    pub field: QuadField,
}

fn gcd_i(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl QuadElement {
    pub fn new(field: QuadField, c0: i64, c1: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Invalid("zero denominator".into()));
        }
        if field.is_rational() && c1 != 0 {
            return Err(Error::Invalid("rational ring element with a g-coefficient".into()));
        }
        Ok(Self { c0, c1, den, field }.normalized())
    }

    fn normalized(mut self) -> Self {
        if self.den < 0 {
            self.c0 = -self.c0;
            self.c1 = -self.c1;
            self.den = -self.den;
        }
        let g = gcd_i(gcd_i(self.c0, self.c1), self.den);
        if g > 1 {
            self.c0 /= g;
            self.c1 /= g;
            self.den /= g;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0 && self.c1 == 0
    }

    /// Image under the nontrivial automorphism g -> -b - g.
    pub fn conj(&self) -> Self {
        if self.field.is_rational() {
            return *self;
        }
        Self { c0: self.c0 - self.field.b * self.c1, c1: -self.c1, ..*self }
    }

    pub fn pow(&self, k: u64) -> Self {
        let mut acc = self.field.one();
        for _ in 0..k {
            acc = acc * *self;
        }
        acc
    }

    /// Numerator norm (c0 + c1 g)(c0 + c1 g') as an integer; ignores the denominator.
    pub fn numerator_norm(&self) -> i64 {
        let f = self.field;
        if f.is_rational() {
            return self.c0;
        }
        self.c0 * self.c0 - f.b * self.c0 * self.c1 + f.c * self.c1 * self.c1
    }
}

impl fmt::Debug for QuadElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for QuadElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = match (self.c0, self.c1) {
            (a, 0) => format!("{a}"),
            (0, b) => format!("{b}*g"),
            (a, b) if b < 0 => format!("{a} - {}*g", -b),
            (a, b) => format!("{a} + {b}*g"),
        };
        if self.den == 1 {
            write!(f, "{body}")
        } else {
            write!(f, "({body})/{}", self.den)
        }
    }
}

impl Add for QuadElement {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            c0: self.c0 * o.den + o.c0 * self.den,
            c1: self.c1 * o.den + o.c1 * self.den,
            den: self.den * o.den,
            field: self.field,
        }
        .normalized()
    }
}

impl Neg for QuadElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self { c0: -self.c0, c1: -self.c1, ..self }
    }
}

impl Sub for QuadElement {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Mul for QuadElement {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let f = self.field;
        // g^2 = -b g - c
        let cc = self.c1 * o.c1;
        Self {
            c0: self.c0 * o.c0 - f.c * cc,
            c1: self.c0 * o.c1 + self.c1 * o.c0 - f.b * cc,
            den: self.den * o.den,
            field: f,
        }
        .normalized()
    }
}

/// A prime above l, given by a root of the field polynomial mod l.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ReductionMap {
    pub ell: u64,
    pub root: FieldElement,
    pub companion_root: FieldElement,
}

impl ReductionMap {
    /// The reduction Z -> F_l, for rational coefficient rings.
    pub fn rational(ell: u64) -> Result<Self> {
        let z = FieldElement::new(0, ell)?;
        Ok(Self { ell, root: z, companion_root: z })
    }

    pub fn swapped(&self) -> Self {
        Self { ell: self.ell, root: self.companion_root, companion_root: self.root }
    }
}

/// Both primes above l when the field polynomial splits mod l (smaller root
/// first); `None` when it is irreducible; an error when l ramifies.
pub fn split_primes(field: &QuadField, ell: u64) -> Result<Option<(ReductionMap, ReductionMap)>> {
    if field.is_rational() {
        return Err(Error::Invalid("the coefficient ring is Z; there is a single prime above l".into()));
    }
    let b = FieldElement::new(field.b, ell)?;
    let c = FieldElement::reduce(field.c, ell);
    let disc = b * b - FieldElement::reduce(4, ell) * c;
    if disc.is_zero() {
        return Err(Error::Ramified { ell });
    }
    let roots = disc.sqrt_mod()?;
    if roots.is_empty() {
        return Ok(None);
    }
    let half = FieldElement::reduce(2, ell).inv().expect("odd l");
    let mut xs: Vec<FieldElement> = roots.iter().map(|&s| (-b + s) * half).collect();
    xs.sort();
    let m = ReductionMap { ell, root: xs[0], companion_root: xs[1] };
    Ok(Some((m, m.swapped())))
}

/// Image of x under the map g -> root.
pub fn reduce(x: &QuadElement, map: &ReductionMap) -> Result<FieldElement> {
    let ell = map.ell;
    if x.den.rem_euclid(ell as i64) == 0 {
        return Err(Error::DenominatorDivisible { den: x.den, ell });
    }
    let num = FieldElement::reduce(x.c0, ell) + FieldElement::reduce(x.c1, ell) * map.root;
    Ok(num / FieldElement::reduce(x.den, ell))
}

/// Character values in O_f: the abstract zeta_m goes to `zeta`.
#[derive(Clone, Copy, Debug)]
pub struct QuadEmbedding {
    pub zeta: QuadElement,
}

impl Embedding for QuadEmbedding {
    type Value = QuadElement;
    fn zero(&self) -> QuadElement {
        self.zeta.field.zero()
    }
    fn root_power(&self, k: u64, m: u64) -> Result<QuadElement> {
        Ok(self.zeta.pow(k % m))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApEntry {
    pub p: u64,
    pub coeffs: Vec<i64>,
}

/// On-disk newform record (fixtures and cache).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewformJson {
    pub label: String,
    pub level: u64,
    pub weight: u32,
    #[serde(rename = "char")]
    pub character: CharacterSpec,
    /// Image of the abstract root of unity in the coefficient ring, as [c0, c1].
    #[serde(default)]
    pub zeta_image: Option<Vec<i64>>,
    pub field_poly: Vec<i64>,
    pub ap: Vec<ApEntry>,
    pub cm: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cm_disc: Option<i64>,
    pub inner_twist_count: u32,
    pub ap_max_prime: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap_den: Option<i64>,
}

#[derive(Clone, Debug)]
pub struct NewformRecord {
    pub label: String,
    pub level: u64,
    pub weight: u32,
    pub nebentypus: DirichletCharacter,
    pub field: QuadField,
    pub zeta_image: QuadElement,
    pub ap: BTreeMap<u64, QuadElement>,
    pub cm: bool,
    pub cm_disc: Option<i64>,
    pub inner_twist_count: u32,
    pub ap_max_prime: u64,
}

impl NewformRecord {
    pub fn from_json(j: &NewformJson) -> Result<Self> {
        validate_label(&j.label)?;
        if j.weight != 2 {
            return Err(Error::Invalid(format!("{}: weight {} is not supported", j.label, j.weight)));
        }
        let field = QuadField::from_poly(&j.field_poly)?;
        let nebentypus = DirichletCharacter::from_spec(&j.character)?;
        if nebentypus.modulus() != j.level {
            return Err(Error::Invalid(format!("{}: character modulus differs from the level", j.label)));
        }
        let m = nebentypus.zeta_order();
        let zeta_image = match &j.zeta_image {
            Some(z) if z.len() == 2 => QuadElement::new(field, z[0], z[1], 1)?,
            Some(z) => return Err(Error::Invalid(format!("{}: zeta_image {z:?} malformed", j.label))),
            None if m <= 2 => field.elem(if m == 2 { -1 } else { 1 }, 0),
            None => {
                return Err(Error::Embedding(format!(
                    "{}: character values of order {m} need an explicit zeta_image",
                    j.label
                )))
            }
        };
        if zeta_image.pow(m) != field.one() {
            return Err(Error::Embedding(format!("{}: zeta_image^{m} != 1", j.label)));
        }
        let den = j.ap_den.unwrap_or(1);
        let mut ap = BTreeMap::new();
        for e in &j.ap {
            let (c0, c1) = match e.coeffs.as_slice() {
                [c0] => (*c0, 0),
                [c0, c1] => (*c0, *c1),
                other => return Err(Error::Invalid(format!("{}: a_{} has coefficients {other:?}", j.label, e.p))),
            };
            ap.insert(e.p, QuadElement::new(field, c0, c1, den)?);
        }
        Ok(Self {
            label: j.label.clone(),
            level: j.level,
            weight: j.weight,
            nebentypus,
            field,
            zeta_image,
            ap,
            cm: j.cm,
            cm_disc: j.cm_disc,
            inner_twist_count: j.inner_twist_count,
            ap_max_prime: j.ap_max_prime,
        })
    }

    pub fn to_json(&self) -> NewformJson {
        let den = self.ap.values().map(|x| x.den).fold(1, |a, d| a / gcd_i(a, d) * d);
        NewformJson {
            label: self.label.clone(),
            level: self.level,
            weight: self.weight,
            character: self.nebentypus.to_spec(),
            zeta_image: Some(vec![self.zeta_image.c0, self.zeta_image.c1]),
            field_poly: self.field.poly(),
            ap: self
                .ap
                .iter()
                .map(|(&p, x)| {
                    let s = den / x.den;
                    let coeffs = if self.field.is_rational() { vec![x.c0 * s, 0] } else { vec![x.c0 * s, x.c1 * s] };
                    ApEntry { p, coeffs }
                })
                .collect(),
            cm: self.cm,
            cm_disc: self.cm_disc,
            inner_twist_count: self.inner_twist_count,
            ap_max_prime: self.ap_max_prime,
            ap_den: (den != 1).then_some(den),
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        let j: NewformJson = serde_json::from_str(s).map_err(|e| Error::Parse {
            msg: e.to_string(),
            excerpt: s.chars().take(120).collect(),
        })?;
        Self::from_json(&j)
    }

    /// Nebentypus value at n inside the coefficient ring.
    pub fn nebentypus_at(&self, n: u64) -> Result<QuadElement> {
        self.nebentypus.evaluate(n as i64, &QuadEmbedding { zeta: self.zeta_image })
    }

    pub fn ap(&self, p: u64) -> Result<&QuadElement> {
        if p > self.ap_max_prime {
            return Err(Error::DataCoverage { label: self.label.clone(), needed: p, have: self.ap_max_prime });
        }
        self.ap.get(&p).ok_or_else(|| Error::MissingCoefficient { label: self.label.clone(), p })
    }

    /// Requires coverage of all primes up to `bound`.
    pub fn require_coverage(&self, bound: u64) -> Result<()> {
        if self.ap_max_prime < largest_prime_at_most(bound) {
            return Err(Error::DataCoverage { label: self.label.clone(), needed: bound, have: self.ap_max_prime });
        }
        Ok(())
    }
}

fn largest_prime_at_most(n: u64) -> u64 {
    (2..=n).rev().find(|&k| crate::ffield::is_prime(k)).unwrap_or(0)
}

/// Checks the `N.k.c.x` newform label shape.
pub fn validate_label(label: &str) -> Result<()> {
    let parts: Vec<&str> = label.split('.').collect();
    let ok = parts.len() == 4
        && parts[0].parse::<u64>().map_or(false, |n| n > 0)
        && parts[1].parse::<u32>().map_or(false, |k| k > 0)
        && !parts[2].is_empty()
        && parts[2].chars().all(|c| c.is_ascii_lowercase())
        && !parts[3].is_empty()
        && parts[3].chars().all(|c| c.is_ascii_lowercase());
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidLabel(label.to_string()))
    }
}

/// Trace and determinant of Frobenius at p reduced through a prime above l.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FrobData {
    pub p: u64,
    pub t: FieldElement,
    pub d: FieldElement,
}

impl FrobData {
    /// Coefficients of x^2 - t x + d, constant term first.
    pub fn charpoly(&self) -> [FieldElement; 3] {
        [self.d, -self.t, FieldElement::one(self.t.modulus())]
    }

    pub fn discriminant(&self) -> FieldElement {
        self.t * self.t - FieldElement::reduce(4, self.t.modulus()) * self.d
    }

    pub fn is_irreducible(&self) -> bool {
        self.discriminant().legendre().map_or(false, |s| s == -1)
    }

    /// t^2 = 4d: a repeated eigenvalue, semisimple or not.
    pub fn is_repeated(&self) -> bool {
        self.discriminant().is_zero()
    }
}

/// Frobenius data at p for the prime `map`; p must not divide lN.
pub fn frob_charpoly(f: &NewformRecord, p: u64, map: &ReductionMap) -> Result<FrobData> {
    let bad = map.ell * f.level;
    if bad % p == 0 {
        return Err(Error::BadPrime { p, what: bad });
    }
    let t = reduce(f.ap(p)?, map)?;
    let pe = f.nebentypus_at(p)? * f.field.elem(p as i64, 0);
    let d = reduce(&pe, map)?;
    if d.is_zero() {
        return Err(Error::Embedding(format!("{}: p * eps(p) reduces to 0 at p = {p}", f.label)));
    }
    Ok(FrobData { p, t, d })
}

/// floor(k * mu / 12) with mu = N * prod_{p | N} (1 + 1/p).
pub fn sturm_bound(n: u64, k: u64) -> u64 {
    let mu: u64 = factorize(n).iter().map(|&(p, e)| p.pow(e - 1) * (p + 1)).product();
    k * mu / 12
}

/// Multiplicative order of the eigenvalue ratio; 1 for repeated eigenvalues.
pub fn projective_frob_order(fd: &FrobData) -> u64 {
    let ell = fd.t.modulus();
    if fd.is_repeated() {
        return 1;
    }
    // rho + 1/rho = u = t^2/d - 2, rho a root of x^2 - u x + 1
    let two = FieldElement::reduce(2, ell);
    let u = fd.t * fd.t / fd.d - two;
    let disc = u * u - FieldElement::reduce(4, ell);
    let half = two.inv().expect("odd l");
    if disc.is_zero() {
        return (u * half).mul_order().expect("nonzero");
    }
    let roots = disc.sqrt_mod().expect("odd l");
    if let Some(r) = roots.first() {
        return ((u + *r) * half).mul_order().expect("nonzero");
    }
    // disc = s w^2 with s the canonical non-residue of the extension
    let w_gen = ExtElement::generator(ell).expect("odd l");
    let s = FieldElement::reduce(w_gen.non_residue() as i64, ell);
    let w = (disc / s).sqrt_mod().expect("odd l")[0];
    let rho = ExtElement::new(u * half, w * half).expect("same modulus");
    rho.mul_order().expect("nonzero")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f7(x: i64) -> FieldElement {
        FieldElement::new(x, 7).unwrap()
    }

    #[test]
    fn split_examples() {
        let (a, b) = split_primes(&QuadField::quadratic(-2, 0), 7).unwrap().unwrap();
        assert_eq!((a.root.value(), b.root.value()), (3, 4));
        assert_eq!(a.companion_root.value(), 4);
        let (a, b) = split_primes(&QuadField::quadratic(1, -1), 7).unwrap().unwrap();
        assert_eq!((a.root.value(), b.root.value()), (3, 5));
        assert!(split_primes(&QuadField::quadratic(-2, 0), 5).unwrap().is_none());
        assert!(matches!(split_primes(&QuadField::quadratic(-7, 0), 7), Err(Error::Ramified { ell: 7 })));
    }

    #[test]
    fn reduce_examples() {
        let q2 = QuadField::quadratic(-2, 0);
        let (r3, _) = split_primes(&q2, 7).unwrap().unwrap();
        assert_eq!(reduce(&q2.elem(0, 3), &r3).unwrap().value(), 2);
        assert_eq!(reduce(&q2.elem(1, 2), &r3).unwrap().value(), 0);
        let z6 = QuadField::quadratic(1, -1);
        let (_, r5) = split_primes(&z6, 7).unwrap().unwrap();
        assert_eq!(reduce(&z6.elem(-1, 3), &r5).unwrap().value(), 0);
        assert_eq!(reduce(&z6.zero(), &r5).unwrap().value(), 0);
        let half = QuadElement::new(q2, 1, 1, 7).unwrap();
        assert!(matches!(reduce(&half, &r3), Err(Error::DenominatorDivisible { .. })));
    }

    #[test]
    fn sturm_examples() {
        assert_eq!(sturm_bound(189, 2), 48);
        assert_eq!(sturm_bound(1, 2), 0);
        assert_eq!(sturm_bound(49, 2), 9);
        assert_eq!(sturm_bound(7938, 2), 3024);
    }

    #[test]
    fn projective_order_examples() {
        let fd = |t, d| FrobData { p: 11, t: f7(t), d: f7(d) };
        assert_eq!(projective_frob_order(&fd(2, 4)), 3);
        for d in 1..7 {
            assert_eq!(projective_frob_order(&fd(0, d)), 2);
        }
        let rep = fd(4, 4);
        assert!(rep.is_repeated());
        assert_eq!(projective_frob_order(&rep), 1);
        assert!(fd(6, 4).is_irreducible());
    }

    #[test]
    fn labels() {
        assert!(validate_label("189.2.p.a").is_ok());
        assert!(validate_label("7938.2.a.bj").is_ok());
        assert!(matches!(validate_label("foo"), Err(Error::InvalidLabel(_))));
        assert!(validate_label("189.2.P.a").is_err());
    }

    /// Order of rho by enumerating the group F_{49}^x / F_7^x through all (t, d).
    #[test]
    fn projective_order_matches_matrix_oracle() {
        use crate::matgrp::Matrix;
        for t in 0..7 {
            for d in 1..7 {
                let m = Matrix::new(2, 7, &[0, -d, 1, t]).unwrap();
                let fd = FrobData { p: 3, t: f7(t), d: f7(d) };
                if fd.is_repeated() {
                    continue;
                }
                assert_eq!(projective_frob_order(&fd), m.proj_order(), "t={t} d={d}");
            }
        }
    }

    fn elem(f: QuadField) -> impl Strategy<Value = QuadElement> {
        (-1000i64..1000, -1000i64..1000).prop_map(move |(a, b)| f.elem(a, b))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn reduce_is_ring_hom(x in elem(QuadField::quadratic(-2, 0)), y in elem(QuadField::quadratic(-2, 0))) {
            let f = QuadField::quadratic(-2, 0);
            let (m, m2) = split_primes(&f, 7).unwrap().unwrap();
            for map in [m, m2] {
                prop_assert_eq!(reduce(&(x + y), &map).unwrap(), reduce(&x, &map).unwrap() + reduce(&y, &map).unwrap());
                prop_assert_eq!(reduce(&(x * y), &map).unwrap(), reduce(&x, &map).unwrap() * reduce(&y, &map).unwrap());
            }
            prop_assert_eq!(reduce(&x.conj(), &m).unwrap(), reduce(&x, &m2).unwrap());
        }

        #[test]
        fn reduce_is_ring_hom_zeta6(x in elem(QuadField::quadratic(1, -1)), y in elem(QuadField::quadratic(1, -1))) {
            let f = QuadField::quadratic(1, -1);
            let (m, m2) = split_primes(&f, 7).unwrap().unwrap();
            prop_assert_eq!(reduce(&(x * y), &m).unwrap(), reduce(&x, &m).unwrap() * reduce(&y, &m).unwrap());
            prop_assert_eq!(reduce(&(x - y), &m2).unwrap(), reduce(&x, &m2).unwrap() - reduce(&y, &m2).unwrap());
            prop_assert_eq!(reduce(&x.conj(), &m).unwrap(), reduce(&x, &m2).unwrap());
        }

        #[test]
        fn projective_order_scale_invariant(t in 0i64..7, d in 1i64..7, lambda in 1i64..7) {
            let a = FrobData { p: 3, t: f7(t), d: f7(d) };
            let b = FrobData { p: 3, t: f7(t * lambda), d: f7(d * lambda * lambda) };
            prop_assert_eq!(projective_frob_order(&a), projective_frob_order(&b));
        }
    }
}
