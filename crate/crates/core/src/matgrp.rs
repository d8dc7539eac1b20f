//! Small dense matrices over F_l, generated subgroups, projectivization and
//! the action on projective space.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ffield::{is_prime, least_primitive_root, ExtElement, FieldElement};

/// Default closure cap (2^20 elements).
pub const DEFAULT_CAP: usize = 1 << 20;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 4 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

fn check_modulus(modulus: u64) -> Result<()> {
    if !is_prime(modulus) || modulus >= 1 << 31 {
        return Err(Error::NotPrime(modulus));
    }
    Ok(())
}

fn inv_mod(x: u64, p: u64) -> u64 {
    FieldElement::from_u64(x, p).inv().map(|e| e.value()).unwrap_or(0)
}

/// Square matrix of dimension 2 or 4 over F_l, row-major.
///
/// The derived ordering compares entries row-major first, which is the
/// lexicographic order used for witnesses.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matrix {
    e: [u32; 16],
    dim: u8,
    modulus: u32,
}

impl Matrix {
    /// Builds a matrix from row-major integer entries, reduced mod `modulus`.
    pub fn new(dim: usize, modulus: u64, entries: &[i64]) -> Result<Self> {
        check_dim(dim)?;
        check_modulus(modulus)?;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(dim * dim, entries.len()));
        }
        let mut e = [0u32; 16];
        for (i, &x) in entries.iter().enumerate() {
            e[i] = x.rem_euclid(modulus as i64) as u32;
        }
        Ok(Self { e, dim: dim as u8, modulus: modulus as u32 })
    }

    pub fn from_rows(modulus: u64, rows: &[Vec<i64>]) -> Result<Self> {
        let dim = rows.len();
        let mut flat = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch(dim, r.len()));
            }
            flat.extend_from_slice(r);
        }
        Self::new(dim, modulus, &flat)
    }

    fn raw(dim: usize, modulus: u64) -> Self {
        Self { e: [0; 16], dim: dim as u8, modulus: modulus as u32 }
    }

    pub fn identity(dim: usize, modulus: u64) -> Self {
        Self::scalar(dim, modulus, 1)
    }

    pub fn scalar(dim: usize, modulus: u64, lambda: u64) -> Self {
        let mut m = Self::raw(dim, modulus);
        for i in 0..dim {
            m.e[i * dim + i] = (lambda % modulus) as u32;
        }
        m
    }

    pub fn diag(modulus: u64, entries: &[i64]) -> Result<Self> {
        let dim = entries.len();
        let mut flat = vec![0; dim * dim];
        for (i, &x) in entries.iter().enumerate() {
            flat[i * dim + i] = x;
        }
        Self::new(dim, modulus, &flat)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn modulus(&self) -> u64 {
        self.modulus as u64
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.e[i * self.dim as usize + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: u64) {
        let d = self.dim as usize;
        self.e[i * d + j] = v as u32;
    }

    pub fn entry(&self, i: usize, j: usize) -> FieldElement {
        FieldElement::from_u64(self.get(i, j) as u64, self.modulus())
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.get(i, j) as i64).collect()).collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.dim, other.dim);
        debug_assert_eq!(self.modulus, other.modulus);
        let d = self.dim();
        let p = self.modulus();
        let mut out = Self::raw(d, p);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0u64;
                for k in 0..d {
                    acc += self.get(i, k) as u64 * other.get(k, j) as u64;
                }
                out.set(i, j, acc % p);
            }
        }
        out
    }

    pub fn scale(&self, lambda: u64) -> Matrix {
        let p = self.modulus();
        let mut out = *self;
        let d = self.dim();
        for k in 0..d * d {
            out.e[k] = ((self.e[k] as u64 * (lambda % p)) % p) as u32;
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let d = self.dim();
        let mut out = Self::raw(d, self.modulus());
        for i in 0..d {
            for j in 0..d {
                out.set(i, j, self.get(j, i) as u64);
            }
        }
        out
    }

    pub fn sub_scalar(&self, lambda: u64) -> Matrix {
        let d = self.dim();
        let p = self.modulus();
        let mut out = *self;
        for i in 0..d {
            out.set(i, i, (self.get(i, i) as u64 + p - lambda % p) % p);
        }
        out
    }

    pub fn trace(&self) -> u64 {
        (0..self.dim()).map(|i| self.get(i, i) as u64).sum::<u64>() % self.modulus()
    }

    /// Row echelon form by exact elimination; returns (echelon rows, pivot columns, det).
    fn eliminate(&self) -> (Vec<[u64; 4]>, Vec<usize>, u64) {
        let d = self.dim();
        let p = self.modulus();
        let mut rows: Vec<[u64; 4]> = (0..d)
            .map(|i| {
                let mut r = [0u64; 4];
                for (j, x) in r.iter_mut().enumerate().take(d) {
                    *x = self.get(i, j) as u64;
                }
                r
            })
            .collect();
        let mut pivots = Vec::new();
        let mut det = 1u64;
        let mut r = 0;
        for c in 0..d {
            let Some(piv) = (r..d).find(|&i| rows[i][c] != 0) else {
                det = 0;
                continue;
            };
            if piv != r {
                rows.swap(piv, r);
                det = (p - det) % p;
            }
            let pv = rows[r][c];
            det = det * pv % p;
            let inv = inv_mod(pv, p);
            for x in rows[r].iter_mut().take(d) {
                *x = *x * inv % p;
            }
            for i in 0..d {
                if i != r && rows[i][c] != 0 {
                    let f = rows[i][c];
                    for j in 0..d {
                        rows[i][j] = (rows[i][j] + p * p - f * rows[r][j]) % p;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (rows, pivots, det)
    }

    pub fn det(&self) -> u64 {
        let p = self.modulus();
        if self.dim() == 2 {
            let a = self.get(0, 0) as u64 * self.get(1, 1) as u64 % p;
            let b = self.get(0, 1) as u64 * self.get(1, 0) as u64 % p;
            return (a + p - b) % p;
        }
        self.eliminate().2
    }

    pub fn is_invertible(&self) -> bool {
        self.det() != 0
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let d = self.dim();
        let p = self.modulus();
        if d == 2 {
            let det = self.det();
            if det == 0 {
                return Err(Error::Singular);
            }
            let i = inv_mod(det, p);
            let mut out = Self::raw(2, p);
            out.set(0, 0, self.get(1, 1) as u64 * i % p);
            out.set(1, 1, self.get(0, 0) as u64 * i % p);
            out.set(0, 1, (p - self.get(0, 1) as u64) * i % p);
            out.set(1, 0, (p - self.get(1, 0) as u64) * i % p);
            return Ok(out);
        }
        // Gauss-Jordan on [M | I]
        let mut a = [[0u64; 8]; 4];
        for i in 0..d {
            for j in 0..d {
                a[i][j] = self.get(i, j) as u64;
            }
            a[i][d + i] = 1;
        }
        for c in 0..d {
            let piv = (c..d).find(|&i| a[i][c] != 0).ok_or(Error::Singular)?;
            a.swap(piv, c);
            let inv = inv_mod(a[c][c], p);
            for x in a[c].iter_mut() {
                *x = *x * inv % p;
            }
            for i in 0..d {
                if i != c && a[i][c] != 0 {
                    let f = a[i][c];
                    for j in 0..2 * d {
                        a[i][j] = (a[i][j] + p * p - f * a[c][j]) % p;
                    }
                }
            }
        }
        let mut out = Self::raw(d, p);
        for i in 0..d {
            for j in 0..d {
                out.set(i, j, a[i][d + j]);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, mut k: u64) -> Matrix {
        let mut acc = Self::identity(self.dim(), self.modulus());
        let mut b = *self;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&b);
            }
            b = b.mul(&b);
            k >>= 1;
        }
        acc
    }

    pub fn is_scalar(&self) -> bool {
        let d = self.dim();
        let a = self.get(0, 0);
        (0..d).all(|i| (0..d).all(|j| self.get(i, j) == if i == j { a } else { 0 }))
    }

    /// Scalar-class representative: scaled so the first nonzero entry is 1.
    pub fn proj_canonical(&self) -> Matrix {
        let d = self.dim();
        match self.e[..d * d].iter().find(|&&x| x != 0) {
            Some(&x) if x != 1 => self.scale(inv_mod(x as u64, self.modulus())),
            _ => *self,
        }
    }

    /// Block-diagonal matrix diag(a, b) of two 2x2 matrices.
    pub fn block_diag(a: &Matrix, b: &Matrix) -> Result<Matrix> {
        if a.dim() != 2 || b.dim() != 2 {
            return Err(Error::DimensionMismatch(2, if a.dim() != 2 { a.dim() } else { b.dim() }));
        }
        if a.modulus != b.modulus {
            return Err(Error::ModulusMismatch(a.modulus(), b.modulus()));
        }
        let mut out = Self::raw(4, a.modulus());
        for i in 0..2 {
            for j in 0..2 {
                out.set(i, j, a.get(i, j) as u64);
                out.set(i + 2, j + 2, b.get(i, j) as u64);
            }
        }
        Ok(out)
    }

    /// Characteristic polynomial det(xI - M), coefficients from constant term up.
    pub fn charpoly(&self) -> Vec<u64> {
        let p = self.modulus();
        let d = self.dim();
        if d == 2 {
            return vec![self.det(), (p - self.trace()) % p, 1];
        }
        // Leibniz expansion over permutations with linear polynomial entries
        let mut out = vec![0u64; d + 1];
        let mut perm: Vec<usize> = (0..d).collect();
        permutations(&mut perm, 0, &mut |perm, sign| {
            let mut poly = vec![1u64];
            for (i, &j) in perm.iter().enumerate() {
                let c = (p - self.get(i, j) as u64) % p;
                let lin = if i == j { vec![c, 1] } else { vec![c, 0] };
                poly = poly_mul(&poly, &lin, p);
            }
            for (k, c) in poly.iter().enumerate() {
                out[k] = if sign { (out[k] + c) % p } else { (out[k] + p - c) % p };
            }
        });
        out
    }

    /// Eigenvalues in F_l (roots of the characteristic polynomial), ascending, distinct.
    pub fn eigenvalues(&self) -> Vec<u64> {
        let p = self.modulus();
        let cp = self.charpoly();
        if self.dim() == 2 && p > 2 {
            let t = self.trace();
            let det = cp[0];
            // roots of x^2 - t x + det: (t +- sqrt(t^2 - 4 det)) / 2
            let disc = FieldElement::from_u64((t * t + 4 * (p - det)) % p, p);
            let inv2 = inv_mod(2, p);
            let mut out: Vec<u64> = disc
                .sqrt_mod()
                .expect("odd modulus")
                .into_iter()
                .map(|r| (t + r.value()) % p * inv2 % p)
                .collect();
            out.sort_unstable();
            out.dedup();
            return out;
        }
        (0..p).filter(|&x| poly_eval(&cp, x, p) == 0).collect()
    }

    /// Basis of the right kernel {v : M v = 0}.
    pub fn kernel(&self) -> Vec<[u32; 4]> {
        let d = self.dim();
        let p = self.modulus();
        let (rows, pivots, _) = self.eliminate();
        let mut basis = Vec::new();
        for free in (0..d).filter(|c| !pivots.contains(c)) {
            let mut v = [0u32; 4];
            v[free] = 1;
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = ((p - rows[r][free]) % p) as u32;
            }
            basis.push(v);
        }
        basis
    }

    pub fn apply(&self, v: &[u32; 4]) -> [u32; 4] {
        let d = self.dim();
        let p = self.modulus();
        let mut out = [0u32; 4];
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = 0u64;
            for (j, &x) in v.iter().enumerate().take(d) {
                acc += self.get(i, j) as u64 * x as u64;
            }
            *o = (acc % p) as u32;
        }
        out
    }

    /// Projective fixed points, computed from eigenvalues and eigenspace kernels.
    pub fn fixed_points(&self) -> Vec<ProjPoint> {
        let d = self.dim();
        let p = self.modulus();
        let mut out = Vec::new();
        for lambda in self.eigenvalues() {
            let basis = self.sub_scalar(lambda).kernel();
            for coeffs in raw_points(basis.len(), p) {
                let mut v = [0u64; 4];
                for (c, b) in coeffs.iter().zip(&basis) {
                    for i in 0..d {
                        v[i] = (v[i] + *c as u64 * b[i] as u64) % p;
                    }
                }
                let w = [v[0] as u32, v[1] as u32, v[2] as u32, v[3] as u32];
                out.push(ProjPoint::canonical(d, p, w));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Reference implementation of [`Matrix::fixed_points`] scanning all of P^{d-1}.
    pub fn fixed_points_scan(&self) -> Vec<ProjPoint> {
        ProjPoint::all(self.dim(), self.modulus())
            .into_iter()
            .filter(|x| self.act(x) == *x)
            .collect()
    }

    pub fn has_fixed_point(&self) -> bool {
        !self.eigenvalues().is_empty()
    }

    /// Image of a projective point.
    pub fn act(&self, x: &ProjPoint) -> ProjPoint {
        ProjPoint::canonical(self.dim(), self.modulus(), self.apply(&x.coords))
    }

    pub fn order(&self) -> u64 {
        let id = Self::identity(self.dim(), self.modulus());
        let mut x = *self;
        let mut k = 1;
        while x != id {
            x = x.mul(self);
            k += 1;
        }
        k
    }

    /// Order of the scalar class.
    pub fn proj_order(&self) -> u64 {
        let mut x = *self;
        let mut k = 1;
        while !x.is_scalar() {
            x = x.mul(self);
            k += 1;
        }
        k
    }
}

fn permutations(perm: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize], bool)) {
    fn go(perm: &mut Vec<usize>, k: usize, even: bool, f: &mut impl FnMut(&[usize], bool)) {
        if k == perm.len() {
            f(perm, even);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            go(perm, k + 1, if i == k { even } else { !even }, f);
            perm.swap(k, i);
        }
    }
    go(perm, k, true, f)
}

fn poly_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    out
}

fn poly_eval(c: &[u64], x: u64, p: u64) -> u64 {
    c.iter().rev().fold(0u64, |acc, &a| (acc * x + a) % p)
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} mod {}", self.rows(), self.modulus)
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.rows())
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

/// Canonical coefficient vectors (first nonzero = 1) of P^{k-1}(F_p), lexicographic.
fn raw_points(k: usize, p: u64) -> Vec<[u32; 4]> {
    let mut out = Vec::new();
    for lead in 0..k {
        let tail = k - lead - 1;
        let count = (p as usize).pow(tail as u32);
        for mut idx in 0..count {
            let mut v = [0u32; 4];
            v[lead] = 1;
            for pos in (lead + 1..k).rev() {
                v[pos] = (idx % p as usize) as u32;
                idx /= p as usize;
            }
            out.push(v);
        }
    }
    out.sort();
    out
}

/// Point of P^{dim-1}(F_l) with first nonzero coordinate 1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjPoint {
    coords: [u32; 4],
    dim: u8,
    modulus: u32,
}

impl ProjPoint {
    /// Normalizes a nonzero vector. Panics on the zero vector.
    pub fn canonical(dim: usize, modulus: u64, mut v: [u32; 4]) -> Self {
        let lead = v[..dim].iter().position(|&x| x != 0).expect("zero vector has no projective point");
        let inv = inv_mod(v[lead] as u64, modulus);
        for x in v[..dim].iter_mut() {
            *x = (*x as u64 * inv % modulus) as u32;
        }
        Self { coords: v, dim: dim as u8, modulus: modulus as u32 }
    }

    pub fn new(modulus: u64, coords: &[i64]) -> Result<Self> {
        let dim = coords.len();
        check_dim(dim)?;
        check_modulus(modulus)?;
        let mut v = [0u32; 4];
        for (i, &c) in coords.iter().enumerate() {
            v[i] = c.rem_euclid(modulus as i64) as u32;
        }
        if v.iter().all(|&x| x == 0) {
            return Err(Error::Invalid("zero vector is not a projective point".into()));
        }
        Ok(Self::canonical(dim, modulus, v))
    }

    /// All points of P^{dim-1}(F_l) in ascending order.
    pub fn all(dim: usize, modulus: u64) -> Vec<ProjPoint> {
        raw_points(dim, modulus)
            .into_iter()
            .map(|coords| Self { coords, dim: dim as u8, modulus: modulus as u32 })
            .collect()
    }

    pub fn coords(&self) -> &[u32] {
        &self.coords[..self.dim as usize]
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }
}

impl fmt::Debug for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(":"))
    }
}

impl Serialize for ProjPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

fn bfs<F>(start: Matrix, gens: &[Matrix], cap: usize, normalize: F) -> Result<Vec<Matrix>>
where
    F: Fn(Matrix) -> Matrix,
{
    let mut seen: HashSet<Matrix> = HashSet::new();
    let start = normalize(start);
    seen.insert(start);
    let mut queue = VecDeque::from([start]);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            let y = normalize(x.mul(g));
            if seen.insert(y) {
                if seen.len() > cap {
                    return Err(Error::ClosureOverflow { cap });
                }
                queue.push_back(y);
            }
        }
    }
    let mut out: Vec<Matrix> = seen.into_iter().collect();
    out.sort_unstable();
    Ok(out)
}

fn check_generators(dim: usize, modulus: u64, gens: &[Matrix]) -> Result<()> {
    check_dim(dim)?;
    check_modulus(modulus)?;
    for g in gens {
        if g.dim() != dim {
            return Err(Error::DimensionMismatch(dim, g.dim()));
        }
        if g.modulus() != modulus {
            return Err(Error::ModulusMismatch(modulus, g.modulus()));
        }
        if !g.is_invertible() {
            return Err(Error::Singular);
        }
    }
    Ok(())
}

/// Finite subgroup of GL_d(F_l) with its materialized, sorted element list.
#[derive(Clone, Debug)]
pub struct MatrixGroup {
    dim: usize,
    modulus: u64,
    generators: Vec<Matrix>,
    elements: Vec<Matrix>,
}

impl MatrixGroup {
    /// Breadth-first closure of the generators.
    pub fn generate(dim: usize, modulus: u64, generators: Vec<Matrix>, cap: usize) -> Result<Self> {
        check_generators(dim, modulus, &generators)?;
        let elements = bfs(Matrix::identity(dim, modulus), &generators, cap, |m| m)?;
        Ok(Self { dim, modulus, generators, elements })
    }

    pub fn trivial(dim: usize, modulus: u64) -> Result<Self> {
        Self::generate(dim, modulus, Vec::new(), 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generators(&self) -> &[Matrix] {
        &self.generators
    }

    pub fn elements(&self) -> &[Matrix] {
        &self.elements
    }

    pub fn contains(&self, m: &Matrix) -> bool {
        self.elements.binary_search(m).is_ok()
    }

    /// Whether the group fixes a point of projective space (for dim 2: lies in a Borel).
    pub fn global_fixed_point(&self) -> Option<ProjPoint> {
        common_fixed_point(self.dim, self.modulus, &self.generators)
    }

    pub fn spec(&self) -> GroupSpec {
        GroupSpec {
            modulus: self.modulus,
            dim: self.dim,
            generators: self.generators.iter().map(|g| g.rows()).collect(),
        }
    }
}

/// Generated subgroup of GL_d(F_l). The generator list must be non-empty so
/// that dimension and modulus are determined.
pub fn closure(generators: &[Matrix], cap: usize) -> Result<MatrixGroup> {
    let first = generators
        .first()
        .ok_or_else(|| Error::Invalid("closure needs at least one generator".into()))?;
    MatrixGroup::generate(first.dim(), first.modulus(), generators.to_vec(), cap)
}

/// Least point fixed by every matrix in `gens` (every point if `gens` is empty).
pub fn common_fixed_point(dim: usize, modulus: u64, gens: &[Matrix]) -> Option<ProjPoint> {
    let Some(first) = gens.first() else {
        return ProjPoint::all(dim, modulus).into_iter().next();
    };
    first
        .fixed_points()
        .into_iter()
        .find(|x| gens[1..].iter().all(|g| g.act(x) == *x))
}

/// Subgroup of PGL_d(F_l), elements stored as scalar-class representatives.
#[derive(Clone, Debug)]
pub struct ProjGroup {
    dim: usize,
    modulus: u64,
    generators: Vec<Matrix>,
    elements: Vec<Matrix>,
}

impl ProjGroup {
    /// Closure in PGL_d of the classes of `generators`.
    pub fn generate(dim: usize, modulus: u64, generators: Vec<Matrix>, cap: usize) -> Result<Self> {
        check_generators(dim, modulus, &generators)?;
        let generators: Vec<Matrix> = generators.iter().map(Matrix::proj_canonical).collect();
        let elements = bfs(Matrix::identity(dim, modulus), &generators, cap, |m| m.proj_canonical())?;
        Ok(Self { dim, modulus, generators, elements })
    }

    pub(crate) fn from_parts(dim: usize, modulus: u64, generators: Vec<Matrix>, mut elements: Vec<Matrix>) -> Self {
        elements.sort_unstable();
        Self { dim, modulus, generators, elements }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generators(&self) -> &[Matrix] {
        &self.generators
    }

    pub fn elements(&self) -> &[Matrix] {
        &self.elements
    }

    pub fn contains(&self, m: &Matrix) -> bool {
        self.elements.binary_search(&m.proj_canonical()).is_ok()
    }

    pub fn is_abelian(&self) -> bool {
        let g = &self.generators;
        g.iter().all(|a| g.iter().all(|b| a.mul(b).proj_canonical() == b.mul(a).proj_canonical()))
    }

    /// The conjugate group x H x^{-1}.
    pub fn conjugate(&self, x: &Matrix) -> Result<ProjGroup> {
        let xi = x.inverse()?;
        let conj = |m: &Matrix| x.mul(m).mul(&xi).proj_canonical();
        Ok(Self::from_parts(
            self.dim,
            self.modulus,
            self.generators.iter().map(conj).collect(),
            self.elements.iter().map(conj).collect(),
        ))
    }

    pub fn global_fixed_point(&self) -> Option<ProjPoint> {
        common_fixed_point(self.dim, self.modulus, &self.generators)
    }
}

/// Image of a matrix group in PGL_d.
pub fn projectivize(g: &MatrixGroup) -> ProjGroup {
    let mut elements: Vec<Matrix> = g.elements.iter().map(Matrix::proj_canonical).collect();
    elements.sort_unstable();
    elements.dedup();
    ProjGroup {
        dim: g.dim,
        modulus: g.modulus,
        generators: g.generators.iter().map(Matrix::proj_canonical).collect(),
        elements,
    }
}

/// Standard alternating form J_2 (+) ... of the given dimension.
pub fn standard_form(dim: usize, modulus: u64) -> Result<Matrix> {
    check_dim(dim)?;
    let mut flat = vec![0i64; dim * dim];
    for b in (0..dim).step_by(2) {
        flat[b * dim + b + 1] = 1;
        flat[(b + 1) * dim + b] = -1;
    }
    Matrix::new(dim, modulus, &flat)
}

/// The scalar mu with m^T J m = mu J, if any.
pub fn symplectic_multiplier(m: &Matrix, j: &Matrix) -> Option<FieldElement> {
    if m.dim() != j.dim() || m.modulus() != j.modulus() {
        return None;
    }
    let lhs = m.transpose().mul(j).mul(m);
    let d = j.dim();
    let k = (0..d * d).find(|&k| j.e[k] != 0)?;
    let p = m.modulus();
    let mu = lhs.e[k] as u64 * inv_mod(j.e[k] as u64, p) % p;
    (j.scale(mu) == lhs).then(|| FieldElement::from_u64(mu, p))
}

/// Group generated by diag(g, I) and diag(I, g') for generators g of `a`, g' of `b`.
pub fn block_diagonal(a: &MatrixGroup, b: &MatrixGroup, cap: usize) -> Result<MatrixGroup> {
    let (gens, p) = block_generators(a, b)?;
    MatrixGroup::generate(4, p, gens, cap)
}

pub(crate) fn block_generators(a: &MatrixGroup, b: &MatrixGroup) -> Result<(Vec<Matrix>, u64)> {
    if a.dim != 2 || b.dim != 2 {
        return Err(Error::DimensionMismatch(2, if a.dim != 2 { a.dim } else { b.dim }));
    }
    if a.modulus != b.modulus {
        return Err(Error::ModulusMismatch(a.modulus, b.modulus));
    }
    let p = a.modulus;
    let id = Matrix::identity(2, p);
    let mut gens = Vec::new();
    for g in &a.generators {
        gens.push(Matrix::block_diag(g, &id)?);
    }
    for g in &b.generators {
        gens.push(Matrix::block_diag(&id, g)?);
    }
    Ok((gens, p))
}

/// Wreath product G wr S_2: block_diagonal(G, G) together with the block swap.
pub fn wreath_s2(g: &MatrixGroup, cap: usize) -> Result<MatrixGroup> {
    let (mut gens, p) = block_generators(g, g)?;
    let swap = Matrix::new(4, p, &[0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0])?;
    gens.push(swap);
    MatrixGroup::generate(4, p, gens, cap)
}

/// Named subgroups of GL_2(F_l).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    SplitCartan,
    NonsplitCartan,
    SplitCartanNormalizer,
    NonsplitCartanNormalizer,
    Borel,
    Sl2,
    Gl2,
}

impl FromStr for GroupKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "split_cartan" => Self::SplitCartan,
            "nonsplit_cartan" => Self::NonsplitCartan,
            "split_cartan_normalizer" => Self::SplitCartanNormalizer,
            "nonsplit_cartan_normalizer" => Self::NonsplitCartanNormalizer,
            "borel" => Self::Borel,
            "sl2" => Self::Sl2,
            "gl2" => Self::Gl2,
            other => return Err(Error::UnknownKind(other.to_string())),
        })
    }
}

fn m2(p: u64, a: i64, b: i64, c: i64, d: i64) -> Matrix {
    Matrix::new(2, p, &[a, b, c, d]).expect("valid 2x2 matrix")
}

/// Matrix of multiplication by x in F_{l^2} on the basis {1, w}.
fn ext_mul_matrix(x: ExtElement) -> Matrix {
    let p = x.modulus();
    let s = x.non_residue();
    let (a, b) = (x.a.value() as i64, x.b.value() as i64);
    m2(p, a, b * s as i64, b, a)
}

/// A generator of F_{l^2}^x as a 2x2 matrix; for l = 2 the companion of x^2 + x + 1.
fn nonsplit_generator(p: u64) -> Matrix {
    if p == 2 {
        return m2(2, 0, 1, 1, 1);
    }
    let gen = (0..p)
        .flat_map(|a| (1..p).map(move |b| (a, b)))
        .map(|(a, b)| {
            ExtElement::new(FieldElement::from_u64(a, p), FieldElement::from_u64(b, p)).unwrap()
        })
        .find(|x| x.mul_order().unwrap() == p * p - 1)
        .expect("F_{l^2}^x is cyclic");
    ext_mul_matrix(gen)
}

/// Matrix of the Frobenius automorphism of F_{l^2} on the basis used by [`nonsplit_generator`].
fn nonsplit_conjugation(p: u64) -> Matrix {
    if p == 2 {
        m2(2, 1, 1, 0, 1)
    } else {
        m2(p, 1, 0, 0, -1)
    }
}

/// Generators of a named subgroup of GL_2(F_l).
pub fn standard_generators(kind: GroupKind, ell: u64) -> Result<Vec<Matrix>> {
    check_modulus(ell)?;
    let g = least_primitive_root(ell) as i64;
    let swap = m2(ell, 0, 1, 1, 0);
    let upper = m2(ell, 1, 1, 0, 1);
    let lower = m2(ell, 1, 0, 1, 1);
    let mut gens = match kind {
        GroupKind::SplitCartan => vec![m2(ell, g, 0, 0, 1), m2(ell, 1, 0, 0, g)],
        GroupKind::SplitCartanNormalizer => vec![m2(ell, g, 0, 0, 1), m2(ell, 1, 0, 0, g), swap],
        GroupKind::NonsplitCartan => vec![nonsplit_generator(ell)],
        GroupKind::NonsplitCartanNormalizer => vec![nonsplit_generator(ell), nonsplit_conjugation(ell)],
        GroupKind::Borel => vec![m2(ell, g, 0, 0, 1), m2(ell, 1, 0, 0, g), upper],
        GroupKind::Sl2 => vec![upper, lower],
        GroupKind::Gl2 => vec![upper, lower, m2(ell, g, 0, 0, 1)],
    };
    gens.retain(|m| *m != Matrix::identity(2, ell));
    Ok(gens)
}

pub fn standard_group(kind: GroupKind, ell: u64, cap: usize) -> Result<MatrixGroup> {
    MatrixGroup::generate(2, ell, standard_generators(kind, ell)?, cap)
}

fn element_of_order(ell: u64, n: u64) -> Result<FieldElement> {
    if n == 0 || (ell - 1) % n != 0 {
        return Err(Error::Invalid(format!("{n} does not divide {} ", ell - 1)));
    }
    let g = FieldElement::from_u64(least_primitive_root(ell), ell);
    Ok(g.pow((ell - 1) / n))
}

/// Cyclic subgroup of the split Cartan whose image in PGL_2 has order n (n | l - 1).
pub fn split_cyclic(ell: u64, n: u64) -> Result<Vec<Matrix>> {
    check_modulus(ell)?;
    let z = element_of_order(ell, n)?;
    Ok(vec![m2(ell, z.value() as i64, 0, 0, 1)])
}

/// Split-type dihedral group whose image in PGL_2 has order 2n (n | l - 1).
pub fn split_dihedral(ell: u64, n: u64) -> Result<Vec<Matrix>> {
    let mut gens = split_cyclic(ell, n)?;
    gens.push(m2(ell, 0, 1, 1, 0));
    Ok(gens)
}

/// Cyclic subgroup of the nonsplit Cartan whose image in PGL_2 has order n (n | l + 1).
pub fn nonsplit_cyclic(ell: u64, n: u64) -> Result<Vec<Matrix>> {
    check_modulus(ell)?;
    if n == 0 || (ell + 1) % n != 0 {
        return Err(Error::Invalid(format!("{n} does not divide {}", ell + 1)));
    }
    let g = nonsplit_generator(ell);
    Ok(vec![g.pow((ell + 1) / n)])
}

/// Nonsplit-type dihedral group whose image in PGL_2 has order 2n (n | l + 1).
pub fn nonsplit_dihedral(ell: u64, n: u64) -> Result<Vec<Matrix>> {
    let mut gens = nonsplit_cyclic(ell, n)?;
    gens.push(nonsplit_conjugation(ell));
    Ok(gens)
}

/// |GL_d(F_l)|.
pub fn gl_order(dim: usize, ell: u64) -> u128 {
    let q = ell as u128;
    let qd = q.pow(dim as u32);
    (0..dim as u32).map(|i| qd - q.pow(i)).product()
}

/// JSON generator format `{modulus, dim, generators}` with row-major nested matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub modulus: u64,
    pub dim: usize,
    pub generators: Vec<Vec<Vec<i64>>>,
}

impl GroupSpec {
    pub fn matrices(&self) -> Result<Vec<Matrix>> {
        check_dim(self.dim)?;
        self.generators
            .iter()
            .map(|rows| {
                let m = Matrix::from_rows(self.modulus, rows)?;
                if m.dim() != self.dim {
                    return Err(Error::DimensionMismatch(self.dim, m.dim()));
                }
                Ok(m)
            })
            .collect()
    }

    pub fn group(&self, cap: usize) -> Result<MatrixGroup> {
        MatrixGroup::generate(self.dim, self.modulus, self.matrices()?, cap)
    }

    pub fn proj_group(&self, cap: usize) -> Result<ProjGroup> {
        ProjGroup::generate(self.dim, self.modulus, self.matrices()?, cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d6_gens() -> Vec<Matrix> {
        vec![m2(7, 2, 0, 0, 1), m2(7, 0, 1, 1, 0)]
    }

    #[test]
    fn closure_examples() {
        let rot = closure(&[m2(7, 0, -1, 1, 0)], DEFAULT_CAP).unwrap();
        assert_eq!(rot.order(), 4);
        assert_eq!(closure(&[Matrix::identity(2, 7)], DEFAULT_CAP).unwrap().order(), 1);
        assert_eq!(closure(&d6_gens(), DEFAULT_CAP).unwrap().order(), 18);
    }

    #[test]
    fn closure_overflow_and_singular() {
        let gl = standard_generators(GroupKind::Gl2, 7).unwrap();
        assert!(matches!(closure(&gl, 100), Err(Error::ClosureOverflow { cap: 100 })));
        assert!(matches!(closure(&[m2(7, 1, 1, 1, 1)], 10), Err(Error::Singular)));
    }

    #[test]
    fn projectivize_examples() {
        let scalars = closure(&[Matrix::scalar(2, 7, 3)], DEFAULT_CAP).unwrap();
        assert_eq!(scalars.order(), 6);
        assert_eq!(projectivize(&scalars).order(), 1);
        assert_eq!(projectivize(&closure(&d6_gens(), DEFAULT_CAP).unwrap()).order(), 6);
        let gl = standard_group(GroupKind::Gl2, 7, DEFAULT_CAP).unwrap();
        assert_eq!(gl.order(), 2016);
        assert_eq!(projectivize(&gl).order(), 336);
        let direct = ProjGroup::generate(2, 7, gl.generators().to_vec(), DEFAULT_CAP).unwrap();
        assert_eq!(direct.elements(), projectivize(&gl).elements());
    }

    #[test]
    fn fixed_point_examples() {
        assert_eq!(Matrix::identity(2, 7).fixed_points().len(), 8);
        // companion matrix of x^2 - x + 3
        let c = m2(7, 0, -3, 1, 1);
        assert_eq!(c.charpoly(), vec![3, 6, 1]);
        assert!(c.fixed_points().is_empty());
        let d = m2(7, 2, 0, 0, 1).fixed_points();
        assert_eq!(d, vec![ProjPoint::new(7, &[0, 1]).unwrap(), ProjPoint::new(7, &[1, 0]).unwrap()]);
        assert_eq!(Matrix::identity(4, 7).fixed_points().len(), 400);
        assert_eq!(Matrix::identity(4, 11).fixed_points().len(), 1464);
    }

    #[test]
    fn symplectic_examples() {
        let j = standard_form(4, 7).unwrap();
        let one = symplectic_multiplier(&Matrix::identity(4, 7), &j).unwrap();
        assert_eq!(one.value(), 1);
        let g = m2(7, 2, 3, 1, 5);
        let b = Matrix::block_diag(&g, &g).unwrap();
        assert_eq!(symplectic_multiplier(&b, &j).unwrap().value(), g.det());
        let bad = Matrix::diag(7, &[2, 1, 1, 1]).unwrap();
        assert!(symplectic_multiplier(&bad, &j).is_none());
    }

    #[test]
    fn block_diagonal_examples() {
        let t = MatrixGroup::trivial(2, 7).unwrap();
        assert_eq!(block_diagonal(&t, &t, DEFAULT_CAP).unwrap().order(), 1);
        let g = closure(&d6_gens(), DEFAULT_CAP).unwrap();
        let c = closure(&[m2(7, 0, -3, 1, 1)], DEFAULT_CAP).unwrap();
        assert_eq!(block_diagonal(&g, &c, DEFAULT_CAP).unwrap().order(), g.order() * c.order());
        let r = closure(&[m2(7, 0, -1, 1, 0)], DEFAULT_CAP).unwrap();
        assert_eq!(block_diagonal(&r, &r, DEFAULT_CAP).unwrap().order(), 16);
    }

    #[test]
    fn standard_constructor_orders() {
        let o = |k| standard_group(k, 7, DEFAULT_CAP).unwrap().order();
        assert_eq!(o(GroupKind::SplitCartanNormalizer), 72);
        assert_eq!(o(GroupKind::SplitCartan), 36);
        assert_eq!(o(GroupKind::Borel), 252);
        assert_eq!(o(GroupKind::NonsplitCartan), 48);
        assert_eq!(o(GroupKind::NonsplitCartanNormalizer), 96);
        assert_eq!(o(GroupKind::Sl2), 336);
        let r = closure(&[m2(7, 0, -1, 1, 0)], DEFAULT_CAP).unwrap();
        assert_eq!(wreath_s2(&r, DEFAULT_CAP).unwrap().order(), 32);
        assert!(matches!("cartan".parse::<GroupKind>(), Err(Error::UnknownKind(_))));
        assert_eq!(standard_group(GroupKind::Gl2, 2, DEFAULT_CAP).unwrap().order(), 6);
        assert_eq!(standard_group(GroupKind::NonsplitCartanNormalizer, 2, DEFAULT_CAP).unwrap().order(), 6);
    }

    #[test]
    fn explicit_order_constructors() {
        let ord = |g: Vec<Matrix>| ProjGroup::generate(2, 11, g, DEFAULT_CAP).unwrap().order();
        assert_eq!(ord(split_cyclic(11, 5).unwrap()), 5);
        assert_eq!(ord(split_dihedral(11, 5).unwrap()), 10);
        assert_eq!(ord(nonsplit_cyclic(11, 6).unwrap()), 6);
        assert_eq!(ord(nonsplit_dihedral(11, 3).unwrap()), 6);
        assert!(split_cyclic(11, 3).is_err());
    }

    #[test]
    fn closure_sizes_divide_gl_order() {
        for kind in [GroupKind::Borel, GroupKind::NonsplitCartanNormalizer, GroupKind::Sl2] {
            for ell in [2u64, 3, 5, 7] {
                let g = standard_group(kind, ell, DEFAULT_CAP).unwrap();
                assert_eq!(gl_order(2, ell) % g.order() as u128, 0);
            }
        }
    }

    #[test]
    fn scan_and_eigen_agree_on_gl2_f7() {
        let gl = standard_group(GroupKind::Gl2, 7, DEFAULT_CAP).unwrap();
        for m in gl.elements() {
            let fp = m.fixed_points();
            assert_eq!(fp, m.fixed_points_scan());
            assert_eq!(!fp.is_empty(), !m.eigenvalues().is_empty());
        }
    }

    #[test]
    fn group_spec_round_trip() {
        let g = closure(&d6_gens(), DEFAULT_CAP).unwrap();
        let json = serde_json::to_string(&g.spec()).unwrap();
        let back: GroupSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.group(DEFAULT_CAP).unwrap().elements(), g.elements());
    }

    fn mat(p: u64, dim: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(0i64..p as i64, dim * dim)
            .prop_map(move |v| Matrix::new(dim, p, &v).unwrap())
            .prop_filter("invertible", |m| m.is_invertible())
    }

    proptest! {
        #[test]
        fn closure_is_generator_order_independent(a in mat(5, 2), b in mat(5, 2)) {
            let x = closure(&[a, b], DEFAULT_CAP).unwrap();
            let y = closure(&[b, a], DEFAULT_CAP).unwrap();
            prop_assert_eq!(x.elements(), y.elements());
        }

        #[test]
        fn fixed_points_scalar_invariant(m in mat(7, 4), lambda in 1u64..7) {
            prop_assert_eq!(m.fixed_points(), m.scale(lambda).fixed_points());
            prop_assert_eq!(m.fixed_points(), m.fixed_points_scan());
        }

        #[test]
        fn inverse_and_det(m in mat(11, 4), n in mat(11, 4)) {
            prop_assert_eq!(m.mul(&m.inverse().unwrap()), Matrix::identity(4, 11));
            prop_assert_eq!(m.mul(&n).det(), m.det() * n.det() % 11);
            prop_assert_eq!(m.charpoly()[0], m.det());
        }

        #[test]
        fn multiplier_is_multiplicative(a in mat(7, 2), b in mat(7, 2), c in mat(7, 2), d in mat(7, 2)) {
            let j = standard_form(4, 7).unwrap();
            let x = Matrix::block_diag(&a, &b).unwrap();
            let y = Matrix::block_diag(&c, &d).unwrap();
            if let (Some(mx), Some(my)) = (symplectic_multiplier(&x, &j), symplectic_multiplier(&y, &j)) {
                prop_assert_eq!(symplectic_multiplier(&x.mul(&y), &j), Some(mx * my));
            }
        }
    }
}
