//! Exact arithmetic in the prime field F_l and its quadratic extension F_{l^2}.
//!
//! Moduli are small primes (word sized); every constructor checks primality by
//! trial division. The quadratic extension is presented as F_l[w]/(w^2 - s)
//! where `s` is the least positive quadratic non-residue, so representations
//! are reproducible across runs.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic trial-division primality test.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Distinct prime factors of `n`, ascending.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Prime factorization as (prime, exponent) pairs, ascending.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

pub fn pow_mod(mut base: u64, mut exp: u64, modulus: u64) -> u64 {
    let m = modulus as u128;
    let mut acc: u128 = 1 % m;
    let mut b = base as u128 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    base = acc as u64;
    base
}

/// Least k >= 1 with `pow(k) == one`, given that the order divides `group_order`.
fn order_dividing<T: Copy + PartialEq>(
    x: T,
    one: T,
    group_order: u64,
    pow: impl Fn(T, u64) -> T,
) -> u64 {
    let mut order = group_order;
    for p in prime_factors(group_order) {
        while order % p == 0 && pow(x, order / p) == one {
            order /= p;
        }
    }
    order
}

/// Residue modulo a prime.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

impl FieldElement {
    /// Reduces `value` modulo the prime `modulus`.
    pub fn new(value: i64, modulus: u64) -> Result<Self> {
        if !is_prime(modulus) {
            return Err(Error::NotPrime(modulus));
        }
        Ok(Self::reduce(value, modulus))
    }

    /// Unchecked constructor for callers that already validated the modulus.
    pub(crate) fn reduce(value: i64, modulus: u64) -> Self {
        let m = modulus as i64;
        Self { value: value.rem_euclid(m) as u64, modulus }
    }

    pub(crate) fn from_u64(value: u64, modulus: u64) -> Self {
        Self { value: value % modulus, modulus }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> u64 {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn zero(modulus: u64) -> Self {
        Self { value: 0, modulus }
    }

    pub fn one(modulus: u64) -> Self {
        Self { value: 1 % modulus, modulus }
    }

    /// Symmetric representative in (-l/2, l/2].
    pub fn signed(self) -> i64 {
        if self.value > self.modulus / 2 {
            self.value as i64 - self.modulus as i64
        } else {
            self.value as i64
        }
    }

    pub fn pow(self, exp: u64) -> Self {
        Self { value: pow_mod(self.value, exp, self.modulus), modulus: self.modulus }
    }

    pub fn inv(self) -> Option<Self> {
        if self.value == 0 {
            None
        } else {
            Some(self.pow(self.modulus - 2))
        }
    }

    /// Multiplicative order; divides l - 1.
    pub fn mul_order(self) -> Result<u64> {
        if self.is_zero() {
            return Err(Error::ZeroElement);
        }
        Ok(order_dividing(self, Self::one(self.modulus), self.modulus - 1, |x, k| x.pow(k)))
    }

    /// Euler's criterion normalised to -1, 0, +1.
    pub fn legendre(self) -> Result<i8> {
        if self.modulus == 2 {
            return Err(Error::UnsupportedModulus(2));
        }
        if self.is_zero() {
            return Ok(0);
        }
        let e = self.pow((self.modulus - 1) / 2);
        Ok(if e.value == 1 { 1 } else { -1 })
    }

    pub fn is_square(self) -> Result<bool> {
        Ok(self.legendre()? >= 0)
    }

    /// All square roots, ascending: two for a non-zero square, `[0]` for zero,
    /// none for a non-residue. Tonelli-Shanks.
    pub fn sqrt_mod(self) -> Result<Vec<FieldElement>> {
        let p = self.modulus;
        match self.legendre()? {
            0 => return Ok(vec![self]),
            -1 => return Ok(Vec::new()),
            _ => {}
        }
        let mut q = p - 1;
        let mut s = 0u32;
        while q % 2 == 0 {
            q /= 2;
            s += 1;
        }
        let z = Self::from_u64(least_non_residue(p), p);
        let mut m = s;
        let mut c = z.pow(q);
        let mut t = self.pow(q);
        let mut r = self.pow((q + 1) / 2);
        while t.value != 1 {
            let mut i = 0;
            let mut t2 = t;
            while t2.value != 1 {
                t2 = t2 * t2;
                i += 1;
            }
            let b = c.pow(1 << (m - i - 1));
            m = i;
            c = b * b;
            t = t * c;
            r = r * b;
        }
        let other = -r;
        let mut roots = vec![r, other];
        roots.sort();
        Ok(roots)
    }
}

/// Least positive quadratic non-residue modulo an odd prime.
pub fn least_non_residue(p: u64) -> u64 {
    (2..p).find(|&a| pow_mod(a, (p - 1) / 2, p) == p - 1).expect("odd prime has a non-residue")
}

/// Least primitive root modulo an odd prime (or 1 for p = 2).
pub fn least_primitive_root(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    let factors = prime_factors(p - 1);
    (2..p)
        .find(|&g| factors.iter().all(|&q| pow_mod(g, (p - 1) / q, p) != 1))
        .expect("prime has a primitive root")
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.value, self.modulus)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Add for FieldElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        debug_assert_eq!(self.modulus, rhs.modulus);
        Self { value: (self.value + rhs.value) % self.modulus, modulus: self.modulus }
    }
}

impl Sub for FieldElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        debug_assert_eq!(self.modulus, rhs.modulus);
        Self { value: (self.value + self.modulus - rhs.value) % self.modulus, modulus: self.modulus }
    }
}

impl Mul for FieldElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        debug_assert_eq!(self.modulus, rhs.modulus);
        let v = (self.value as u128 * rhs.value as u128 % self.modulus as u128) as u64;
        Self { value: v, modulus: self.modulus }
    }
}

impl Neg for FieldElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self { value: (self.modulus - self.value) % self.modulus, modulus: self.modulus }
    }
}

impl Div for FieldElement {
    type Output = Self;
    /// Panics on division by zero.
    fn div(self, rhs: Self) -> Self {
        self * rhs.inv().expect("division by zero in F_l")
    }
}

/// Element a + b w of F_{l^2} = F_l[w]/(w^2 - s), s the least non-residue.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExtElement {
    pub a: FieldElement,
    pub b: FieldElement,
    s: u64,
}

impl ExtElement {
    pub fn new(a: FieldElement, b: FieldElement) -> Result<Self> {
        if a.modulus != b.modulus {
            return Err(Error::ModulusMismatch(a.modulus, b.modulus));
        }
        if a.modulus == 2 {
            return Err(Error::UnsupportedModulus(2));
        }
        Ok(Self { a, b, s: least_non_residue(a.modulus) })
    }

    pub fn from_base(a: FieldElement) -> Result<Self> {
        Self::new(a, FieldElement::zero(a.modulus))
    }

    /// The adjoined square root w of the canonical non-residue.
    pub fn generator(modulus: u64) -> Result<Self> {
        Self::new(FieldElement::zero(modulus), FieldElement::one(modulus))
    }

    pub fn non_residue(self) -> u64 {
        self.s
    }

    pub fn modulus(self) -> u64 {
        self.a.modulus
    }

    pub fn is_zero(self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    fn one(modulus: u64, s: u64) -> Self {
        Self { a: FieldElement::one(modulus), b: FieldElement::zero(modulus), s }
    }

    pub fn conj(self) -> Self {
        Self { a: self.a, b: -self.b, s: self.s }
    }

    pub fn norm(self) -> FieldElement {
        let s = FieldElement::from_u64(self.s, self.a.modulus);
        self.a * self.a - s * self.b * self.b
    }

    pub fn trace(self) -> FieldElement {
        self.a + self.a
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let mut acc = Self::one(self.a.modulus, self.s);
        let mut base = self;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    pub fn inv(self) -> Option<Self> {
        let n = self.norm().inv()?;
        let c = self.conj();
        Some(Self { a: c.a * n, b: c.b * n, s: self.s })
    }

    /// Multiplicative order; divides l^2 - 1.
    pub fn mul_order(self) -> Result<u64> {
        if self.is_zero() {
            return Err(Error::ZeroElement);
        }
        let l = self.a.modulus;
        Ok(order_dividing(self, Self::one(l, self.s), l * l - 1, |x, k| x.pow(k)))
    }
}

impl fmt::Debug for ExtElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}w (mod {}, w^2 = {})", self.a.value, self.b.value, self.a.modulus, self.s)
    }
}

impl Add for ExtElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { a: self.a + rhs.a, b: self.b + rhs.b, s: self.s }
    }
}

impl Sub for ExtElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { a: self.a - rhs.a, b: self.b - rhs.b, s: self.s }
    }
}

impl Mul for ExtElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let s = FieldElement::from_u64(self.s, self.a.modulus);
        Self {
            a: self.a * rhs.a + s * self.b * rhs.b,
            b: self.a * rhs.b + self.b * rhs.a,
            s: self.s,
        }
    }
}

impl Neg for ExtElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self { a: -self.a, b: -self.b, s: self.s }
    }
}

impl Div for ExtElement {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.inv().expect("division by zero in F_{l^2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f7(v: i64) -> FieldElement {
        FieldElement::new(v, 7).unwrap()
    }

    /// Order by enumerating successive powers.
    fn naive_order(x: FieldElement) -> u64 {
        let mut y = x;
        let mut k = 1;
        while y.value() != 1 {
            y = y * x;
            k += 1;
        }
        k
    }

    #[test]
    fn orders_mod_7() {
        assert_eq!(f7(3).mul_order().unwrap(), 6);
        assert_eq!(f7(1).mul_order().unwrap(), 1);
        assert_eq!(f7(4).mul_order().unwrap(), 3);
        assert!(matches!(f7(0).mul_order(), Err(Error::ZeroElement)));
    }

    #[test]
    fn square_roots_mod_7() {
        assert_eq!(f7(2).sqrt_mod().unwrap(), vec![f7(3), f7(4)]);
        assert_eq!(f7(0).sqrt_mod().unwrap(), vec![f7(0)]);
        assert!(f7(3).sqrt_mod().unwrap().is_empty());
    }

    #[test]
    fn legendre_mod_7() {
        assert_eq!(f7(3).legendre().unwrap(), -1);
        assert_eq!(f7(4).legendre().unwrap(), 1);
        assert_eq!(f7(0).legendre().unwrap(), 0);
    }

    #[test]
    fn characteristic_two_is_rejected_for_roots() {
        let x = FieldElement::new(1, 2).unwrap();
        assert!(matches!(x.sqrt_mod(), Err(Error::UnsupportedModulus(2))));
        assert!(matches!(x.legendre(), Err(Error::UnsupportedModulus(2))));
        assert_eq!(x.mul_order().unwrap(), 1);
    }

    #[test]
    fn non_prime_modulus_is_rejected() {
        assert!(matches!(FieldElement::new(1, 9), Err(Error::NotPrime(9))));
        assert!(!is_prime(1));
        assert!(is_prime(7938 * 0 + 9973));
    }

    #[test]
    fn canonical_non_residue() {
        assert_eq!(least_non_residue(7), 3);
        assert_eq!(least_non_residue(11), 2);
        assert_eq!(least_non_residue(17), 3);
        assert_eq!(ExtElement::generator(7).unwrap().non_residue(), 3);
    }

    #[test]
    fn extension_orders() {
        // w^2 = 3 in F_49; w has order dividing 48 and w^2 = 3 has order 6, so w has order 12
        let w = ExtElement::generator(7).unwrap();
        assert_eq!(w.mul_order().unwrap(), 12);
        // a generator of F_49^* has order 48
        let max = (0..7)
            .flat_map(|a| (0..7).map(move |b| (a, b)))
            .filter(|&(a, b)| (a, b) != (0, 0))
            .map(|(a, b)| ExtElement::new(f7(a), f7(b)).unwrap().mul_order().unwrap())
            .max()
            .unwrap();
        assert_eq!(max, 48);
    }

    fn primes() -> impl Strategy<Value = u64> {
        prop::sample::select(vec![3u64, 5, 7, 11, 13, 17, 19, 23, 29, 31, 97, 101, 65537])
    }

    proptest! {
        #[test]
        fn order_is_minimal_and_divides(p in primes(), v in 1u64..100_000) {
            let x = FieldElement::from_u64(v, p);
            prop_assume!(!x.is_zero());
            let k = x.mul_order().unwrap();
            prop_assert_eq!((p - 1) % k, 0);
            prop_assert_eq!(x.pow(k).value(), 1);
            if p < 200 {
                prop_assert_eq!(k, naive_order(x));
            }
        }

        #[test]
        fn roots_square_back(p in primes(), v in 0u64..100_000) {
            let x = FieldElement::from_u64(v, p);
            let roots = x.sqrt_mod().unwrap();
            for r in &roots {
                prop_assert_eq!(*r * *r, x);
            }
            prop_assert_eq!(x.legendre().unwrap() == 1, roots.len() == 2);
        }

        #[test]
        fn ext_mul_matches_polynomial_product(p in primes(), a in 0u64..1000, b in 0u64..1000, c in 0u64..1000, d in 0u64..1000) {
            let s = least_non_residue(p);
            let x = ExtElement::new(FieldElement::from_u64(a, p), FieldElement::from_u64(b, p)).unwrap();
            let y = ExtElement::new(FieldElement::from_u64(c, p), FieldElement::from_u64(d, p)).unwrap();
            // (a + b w)(c + d w) = ac + (ad + bc) w + bd w^2, then w^2 -> s
            let (a, b, c, d) = (a as u128, b as u128, c as u128, d as u128);
            let m = p as u128;
            let coeff0 = (a * c + b * d % m * s as u128) % m;
            let coeff1 = (a * d + b * c) % m;
            let z = x * y;
            prop_assert_eq!(z.a.value() as u128, coeff0);
            prop_assert_eq!(z.b.value() as u128, coeff1);
            prop_assert_eq!((x * y).norm(), x.norm() * y.norm());
            prop_assert_eq!((x + y).trace(), x.trace() + y.trace());
        }

        #[test]
        fn ext_order_divides_group_order(p in primes(), a in 0u64..1000, b in 1u64..1000) {
            prop_assume!(p < 1000);
            let x = ExtElement::new(FieldElement::from_u64(a, p), FieldElement::from_u64(b, p)).unwrap();
            prop_assume!(!x.is_zero());
            let k = x.mul_order().unwrap();
            prop_assert_eq!((p * p - 1) % k, 0);
            prop_assert_eq!(x.pow(k), ExtElement::from_base(FieldElement::one(p)).unwrap());
        }
    }
}
