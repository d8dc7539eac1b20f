//! Dihedral-image detection for mod-lambda representations of newforms,
//! the two-ideal Hasse verdict, congruence checks and the batch scan.

use rayon::prelude::*;
use serde::Serialize;

use crate::dchar::{fl_valued_characters, quadratic_characters, twist_modulus, CharacterSpec, DirichletCharacter, QuadraticCharacter};
use crate::error::{Error, Result};
use crate::ffield::{gcd, is_prime, lcm, FieldElement};
use crate::lmfdb::{default_bound, label_key, DataSource, Filters};
use crate::nfdata::{frob_charpoly, projective_frob_order, reduce, split_primes, NewformRecord, QuadElement, ReductionMap};

/// Primes at which the running lcm may still change without the report
/// degrading to insufficient data.
pub const STABILIZATION_MARGIN: u64 = 50;

fn primes_up_to(bound: u64) -> impl Iterator<Item = u64> {
    (2..=bound).filter(|&p| is_prime(p))
}

fn coverage(f: &NewformRecord, bound: u64) -> Result<()> {
    f.require_coverage(bound)
}

/// alpha(p) for a character of order dividing 2; 0 when p divides the modulus.
fn quad_value(alpha: &DirichletCharacter, p: u64) -> i8 {
    match alpha.exponent_at(p as i64) {
        None => 0,
        Some(0) => 1,
        Some(_) => -1,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TwistInfo {
    pub conductor: u64,
    /// Discriminant of the quadratic field cut out by the kernel.
    pub discriminant: i64,
    pub character: CharacterSpec,
}

impl From<&QuadraticCharacter> for TwistInfo {
    fn from(q: &QuadraticCharacter) -> Self {
        Self { conductor: q.conductor, discriminant: q.discriminant, character: q.character.to_spec() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TwistOutcome {
    pub alpha: Option<TwistInfo>,
    /// For each rejected candidate (by discriminant), the least p with alpha(p) = -1 and a_p nonzero.
    pub rejected: Vec<(i64, u64)>,
    #[serde(skip)]
    pub character: Option<DirichletCharacter>,
}

/// First nontrivial quadratic alpha mod q such that a_p reduces to 0 at every
/// tested p <= bound with alpha(p) = -1.
pub fn detect_twist(f: &NewformRecord, map: &ReductionMap, bound: u64) -> Result<TwistOutcome> {
    coverage(f, bound)?;
    let q = twist_modulus(f.level);
    let mut out = TwistOutcome { alpha: None, rejected: Vec::new(), character: None };
    if q == 1 {
        return Ok(out);
    }
    let bad = map.ell * f.level * q;
    for cand in quadratic_characters(q)?.iter().filter(|c| c.conductor > 1) {
        let mut violation = None;
        for p in primes_up_to(bound).filter(|p| bad % p != 0) {
            if quad_value(&cand.character, p) == -1 && !reduce(f.ap(p)?, map)?.is_zero() {
                violation = Some(p);
                break;
            }
        }
        match violation {
            Some(p) => out.rejected.push((cand.discriminant, p)),
            None => {
                out.alpha = Some(cand.into());
                out.character = Some(cand.character.clone());
                return Ok(out);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Reducibility {
    /// Every candidate chi fails the congruence; `certificate[i]` is the
    /// least violating prime for the i-th character of the sweep.
    Irreducible { certificate: Vec<u64> },
    PossiblyReducible { chi: CharacterSpec },
}

/// Sweep over all F_l-valued characters mod N of a_p = chi(p) + p eps(p) / chi(p).
pub fn exclude_reducible(f: &NewformRecord, map: &ReductionMap, bound: u64) -> Result<Reducibility> {
    coverage(f, bound)?;
    let (chars, embed) = fl_valued_characters(f.level, map.ell)?;
    let bad = map.ell * f.level;
    let data: Vec<(u64, FieldElement, FieldElement)> = primes_up_to(bound)
        .filter(|p| bad % p != 0)
        .map(|p| frob_charpoly(f, p, map).map(|fd| (p, fd.t, fd.d)))
        .collect::<Result<_>>()?;
    let mut certificate = Vec::with_capacity(chars.len());
    for chi in &chars {
        let mut violation = None;
        for &(p, t, d) in &data {
            let c = chi.evaluate(p as i64, &embed)?;
            if t != c + d / c {
                violation = Some(p);
                break;
            }
        }
        match violation {
            Some(p) => certificate.push(p),
            None => return Ok(Reducibility::PossiblyReducible { chi: chi.to_spec() }),
        }
    }
    Ok(Reducibility::Irreducible { certificate })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct OrderReport {
    /// lcm of the projective Frobenius orders.
    pub n: u64,
    /// Prime at which the running lcm last changed.
    pub stabilized_at: Option<u64>,
    /// alpha(p) = -1 primes with nonzero reduced trace.
    pub trace_zero_violations: Vec<u64>,
    pub n_divides_ell_minus_1: bool,
    pub n_divides_ell_plus_1: bool,
    /// Primes with a repeated eigenvalue, counted with order 1.
    pub repeated_eigenvalue_primes: Vec<u64>,
    /// (order, count) over the primes used.
    pub order_counts: Vec<(u64, u64)>,
    pub primes_used: u64,
}

/// lcm of projective Frobenius orders over tested primes; with `alpha`, only
/// primes where alpha(p) = +1 are used.
pub fn frobenius_orders(f: &NewformRecord, map: &ReductionMap, alpha: Option<&DirichletCharacter>, bound: u64) -> Result<OrderReport> {
    coverage(f, bound)?;
    let q = twist_modulus(f.level);
    let bad = map.ell * f.level * q;
    let mut rep = OrderReport { n: 1, ..Default::default() };
    let mut counts = std::collections::BTreeMap::new();
    for p in primes_up_to(bound).filter(|p| bad % p != 0) {
        let fd = frob_charpoly(f, p, map)?;
        let a = alpha.map_or(1, |a| quad_value(a, p));
        if a == -1 {
            if !fd.t.is_zero() {
                rep.trace_zero_violations.push(p);
            }
            continue;
        }
        if fd.is_repeated() {
            rep.repeated_eigenvalue_primes.push(p);
        }
        let k = projective_frob_order(&fd);
        *counts.entry(k).or_insert(0u64) += 1;
        rep.primes_used += 1;
        let next = lcm(rep.n, k);
        if next != rep.n || rep.stabilized_at.is_none() {
            rep.stabilized_at = Some(p);
        }
        rep.n = next;
    }
    rep.order_counts = counts.into_iter().collect();
    rep.n_divides_ell_minus_1 = (map.ell - 1) % rep.n == 0;
    rep.n_divides_ell_plus_1 = (map.ell + 1) % rep.n == 0;
    Ok(rep)
}

/// n for the dihedral image attached to alpha, with its consistency report.
pub fn dihedral_order(f: &NewformRecord, map: &ReductionMap, alpha: &DirichletCharacter, bound: u64) -> Result<OrderReport> {
    let rep = frobenius_orders(f, map, Some(alpha), bound)?;
    if rep.primes_used == 0 {
        return Err(Error::InsufficientData(format!("{}: no usable alpha-split primes up to {bound}", f.label)));
    }
    Ok(rep)
}

/// Least tested prime whose Frobenius characteristic polynomial is irreducible mod lambda.
pub fn not_borel_witness(f: &NewformRecord, map: &ReductionMap, bound: u64) -> Result<Option<u64>> {
    coverage(f, bound)?;
    let bad = map.ell * f.level;
    for p in primes_up_to(bound).filter(|p| bad % p != 0) {
        if frob_charpoly(f, p, map)?.is_irreducible() {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImageStatus {
    /// Projective image dihedral of order 2n.
    Dihedral { n: u64 },
    /// A twist exists but a reducible (projectively cyclic, of order n) image is not excluded.
    PossiblyReducible { n: u64 },
    NotDihedral,
    InsufficientData { reason: String },
}

impl ImageStatus {
    /// Image name with the order-of-the-group convention (D6 has order 6).
    pub fn image(&self) -> Option<String> {
        match self {
            ImageStatus::Dihedral { n } => Some(format!("D{}", 2 * n)),
            ImageStatus::PossiblyReducible { n } => Some(format!("C{n}")),
            _ => None,
        }
    }

    pub fn n(&self) -> Option<u64> {
        match self {
            ImageStatus::Dihedral { n } | ImageStatus::PossiblyReducible { n } => Some(*n),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ImageReport {
    pub label: String,
    pub ell: u64,
    pub root: u64,
    pub companion_root: u64,
    /// A small generator a + b*beta of the prime, for real quadratic fields.
    pub ideal: Option<String>,
    pub status: ImageStatus,
    pub image: Option<String>,
    pub alpha: Option<TwistInfo>,
    pub twist_rejections: Vec<(i64, u64)>,
    pub reducibility: Option<Reducibility>,
    pub orders: Option<OrderReport>,
    pub not_borel_witness: Option<u64>,
    pub bound: u64,
    pub flags: Vec<String>,
}

impl ImageReport {
    pub fn certified_irreducible(&self) -> bool {
        matches!(self.reducibility, Some(Reducibility::Irreducible { .. }))
    }

    /// Not contained in a Borel subgroup: an irreducible Frobenius polynomial
    /// or an irreducibility certificate.
    pub fn certified_not_borel(&self) -> bool {
        self.not_borel_witness.is_some() || self.certified_irreducible()
    }
}

/// Generator (a + b g) of the kernel of `map` with least |a| + |b|, or None
/// if no generator has coefficients below 20.
pub fn ideal_generator(f: &NewformRecord, map: &ReductionMap) -> Option<(i64, i64)> {
    let field = f.field;
    if field.is_rational() {
        return None;
    }
    let ell = map.ell as i64;
    let mut best: Option<(i64, i64)> = None;
    for s in 1..40i64 {
        for b in -s..=s {
            if b == 0 {
                continue;
            }
            let a = s - b.abs();
            for a in [a, -a] {
                let x = field.elem(a, b);
                if x.numerator_norm().abs() != ell || !reduce(&x, map).map_or(false, |v| v.is_zero()) {
                    continue;
                }
                // prefer positive a, then positive b
                let key = |(a, b): (i64, i64)| (a.abs() + b.abs(), a < 0, b < 0, a.abs());
                if best.map_or(true, |cur| key((a, b)) < key(cur)) {
                    best = Some((a, b));
                }
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

pub fn format_ideal(f: &NewformRecord, (a, b): (i64, i64)) -> String {
    let sym = if f.field.is_real() { "β" } else { "g" };
    let coeff = |b: i64| if b.abs() == 1 { String::new() } else { b.abs().to_string() };
    match (a, b) {
        (0, b) => format!("({}{}{sym})", if b < 0 { "-" } else { "" }, coeff(b)),
        (a, b) => format!("({a}{}{}{sym})", if b < 0 { "-" } else { "+" }, coeff(b)),
    }
}

fn insufficient(e: &Error) -> ImageStatus {
    ImageStatus::InsufficientData { reason: e.to_string() }
}

/// Runs twist detection, the reducibility sweep, the order computation and
/// the not-Borel search at one prime above l.
pub fn image_report(f: &NewformRecord, map: &ReductionMap, bound: u64) -> ImageReport {
    let mut rep = ImageReport {
        label: f.label.clone(),
        ell: map.ell,
        root: map.root.value(),
        companion_root: map.companion_root.value(),
        ideal: ideal_generator(f, map).filter(|_| f.field.is_real()).map(|g| format_ideal(f, g)),
        status: ImageStatus::NotDihedral,
        image: None,
        alpha: None,
        twist_rejections: Vec::new(),
        reducibility: None,
        orders: None,
        not_borel_witness: None,
        bound,
        flags: Vec::new(),
    };
    match not_borel_witness(f, map, bound) {
        Ok(w) => rep.not_borel_witness = w,
        Err(e) => {
            rep.status = insufficient(&e);
            return rep;
        }
    }
    let twist = match detect_twist(f, map, bound) {
        Ok(t) => t,
        Err(e) => {
            rep.status = insufficient(&e);
            return rep;
        }
    };
    rep.twist_rejections = twist.rejected.clone();
    rep.alpha = twist.alpha.clone();
    // the sweep also certifies non-Borel images that have no irreducible Frobenius
    let red = if twist.character.is_some() || rep.not_borel_witness.is_none() {
        match exclude_reducible(f, map, bound) {
            Ok(r) => Some(r),
            Err(e) => {
                rep.status = insufficient(&e);
                return rep;
            }
        }
    } else {
        None
    };
    rep.reducibility = red.clone();
    let Some(alpha) = twist.character else {
        return rep;
    };
    let red = red.expect("sweep ran");
    let reducible = matches!(red, Reducibility::PossiblyReducible { .. });
    let orders = if reducible { frobenius_orders(f, map, None, bound) } else { dihedral_order(f, map, &alpha, bound) };
    let orders = match orders {
        Ok(o) => o,
        Err(e) => {
            rep.status = insufficient(&e);
            return rep;
        }
    };
    if !orders.repeated_eigenvalue_primes.is_empty() {
        rep.flags.push(format!("repeated eigenvalue at {} primes", orders.repeated_eigenvalue_primes.len()));
    }
    if !orders.trace_zero_violations.is_empty() {
        rep.flags.push("trace-zero violations".into());
    }
    if !reducible && !orders.n_divides_ell_minus_1 && !orders.n_divides_ell_plus_1 {
        rep.flags.push("n divides neither l-1 nor l+1".into());
    }
    let stab = orders.stabilized_at.unwrap_or(0);
    rep.status = if stab + STABILIZATION_MARGIN > bound {
        ImageStatus::InsufficientData { reason: format!("order lcm still changing at p = {stab} (bound {bound})") }
    } else if reducible {
        ImageStatus::PossiblyReducible { n: orders.n }
    } else {
        // order-distribution corroboration: trace-zero elements at alpha-inert primes
        // alongside order-n elements at alpha-split primes
        if !orders.order_counts.iter().any(|&(k, _)| k == orders.n) {
            rep.flags.push("no single Frobenius of order n".into());
        }
        ImageStatus::Dihedral { n: orders.n }
    };
    rep.image = rep.status.image();
    rep.orders = Some(orders);
    rep
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Hasse,
    NotHasse,
    Undetermined,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Reasons {
    pub ell_at_least_7: bool,
    pub ell_3_mod_4: bool,
    pub split: bool,
    /// Some ideal has irreducible dihedral image with n odd, n > 1, n | (l-1)/2.
    pub dihedral_odd_n: bool,
    /// The other ideal has a Frobenius with irreducible characteristic
    /// polynomial or an irreducibility certificate.
    pub other_not_borel: bool,
    /// Root of the ideal used for the dihedral condition.
    pub dihedral_root: Option<u64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HasseVerdict {
    pub label: String,
    pub ell: u64,
    pub verdict: Verdict,
    pub reasons: Reasons,
    pub reports: Vec<ImageReport>,
}

fn dihedral_condition(r: &ImageReport, ell: u64) -> bool {
    matches!(r.status, ImageStatus::Dihedral { n } if n > 1 && n % 2 == 1 && ((ell - 1) / 2) % n == 0)
}

/// Verdict from the sufficient criterion for split l: one ideal dihedral of
/// order 2n with n odd, n > 1 and n | (l-1)/2, the other not Borel.
/// `not_hasse` means the criterion certifiably fails.
pub fn hasse_verdict(f: &NewformRecord, ell: u64, bound: Option<u64>) -> HasseVerdict {
    let bound = bound.unwrap_or_else(|| default_bound(f.level));
    let mut reasons = Reasons { ell_at_least_7: ell >= 7, ell_3_mod_4: ell % 4 == 3, ..Default::default() };
    let mut out = HasseVerdict { label: f.label.clone(), ell, verdict: Verdict::NotHasse, reasons: Reasons::default(), reports: Vec::new() };
    if !is_prime(ell) || ell == 2 {
        reasons.notes.push(format!("{ell} is not an odd prime"));
        out.reasons = reasons;
        return out;
    }
    let maps = if f.field.is_rational() {
        reasons.notes.push("coefficient field is Q".into());
        None
    } else {
        match split_primes(&f.field, ell) {
            Ok(Some(m)) => Some(m),
            Ok(None) => {
                reasons.notes.push(format!("{ell} is inert in the coefficient ring"));
                None
            }
            Err(e) => {
                reasons.notes.push(e.to_string());
                None
            }
        }
    };
    let Some((m1, m2)) = maps else {
        out.reasons = reasons;
        return out;
    };
    reasons.split = true;
    let reports = [m1, m2].map(|m| image_report(f, &m, bound));
    for (i, j) in [(0, 1), (1, 0)] {
        if dihedral_condition(&reports[i], ell) {
            reasons.dihedral_odd_n = true;
            if reports[j].certified_not_borel() {
                reasons.other_not_borel = true;
                reasons.dihedral_root = Some(reports[i].root);
                break;
            }
            if reasons.dihedral_root.is_none() {
                reasons.dihedral_root = Some(reports[i].root);
            }
        }
    }
    let data_gap = reports.iter().any(|r| matches!(r.status, ImageStatus::InsufficientData { .. }));
    out.verdict = if !(reasons.ell_at_least_7 && reasons.ell_3_mod_4) {
        Verdict::NotHasse
    } else if reasons.dihedral_odd_n && reasons.other_not_borel {
        Verdict::Hasse
    } else if data_gap || reasons.dihedral_odd_n {
        // a missing not-Borel witness is not a proof of Borel containment
        Verdict::Undetermined
    } else {
        Verdict::NotHasse
    };
    if reports[0].status != reports[1].status {
        reasons.notes.push("the two ideals have different image status".into());
    }
    out.reasons = reasons;
    out.reports = reports.to_vec();
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CongruenceOutcome {
    pub congruent: bool,
    pub first_violation: Option<u64>,
    pub bound: u64,
    pub primes_tested: u64,
    pub note: &'static str,
}

/// Compares reduced a_p of two forms at all p <= bound away from l N_f N_g.
/// Default bound: the Sturm bound at lcm(N_f, N_g).
pub fn congruence_check(f: &NewformRecord, g: &NewformRecord, map_f: &ReductionMap, map_g: &ReductionMap, bound: Option<u64>) -> Result<CongruenceOutcome> {
    if map_f.ell != map_g.ell {
        return Err(Error::Invalid(format!("residue fields differ: F_{} vs F_{}", map_f.ell, map_g.ell)));
    }
    let bound = bound.unwrap_or_else(|| crate::nfdata::sturm_bound(lcm(f.level, g.level), 2));
    coverage(f, bound)?;
    coverage(g, bound)?;
    let bad = map_f.ell * f.level / gcd(f.level, g.level) * g.level;
    let mut tested = 0;
    for p in primes_up_to(bound).filter(|p| bad % p != 0) {
        tested += 1;
        if reduce(f.ap(p)?, map_f)? != reduce(g.ap(p)?, map_g)? {
            return Ok(CongruenceOutcome { congruent: false, first_violation: Some(p), bound, primes_tested: tested, note: "finite verification" });
        }
    }
    Ok(CongruenceOutcome { congruent: true, first_violation: None, bound, primes_tested: tested, note: "finite verification up to the bound, not a proof" })
}

/// All prime maps above l for a record: both split primes, or the single map for Z.
pub fn reduction_maps(f: &NewformRecord, ell: u64) -> Result<Vec<ReductionMap>> {
    if f.field.is_rational() {
        return Ok(vec![ReductionMap::rational(ell)?]);
    }
    match split_primes(&f.field, ell)? {
        Some((a, b)) => Ok(vec![a, b]),
        None => Err(Error::Invalid(format!("{ell} is inert in the coefficient ring of {}", f.label))),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub label: String,
    pub verdict: Option<HasseVerdict>,
    pub error: Option<String>,
}

impl ScanRow {
    /// Image found by twist detection at either ideal.
    pub fn image(&self) -> Option<String> {
        self.verdict.as_ref()?.reports.iter().find_map(|r| r.image.clone())
    }

    pub fn is_hasse(&self) -> bool {
        self.verdict.as_ref().map_or(false, |v| v.verdict == Verdict::Hasse)
    }
}

/// Verdicts for the given labels, label-sorted; failures are recorded per row.
pub fn scan_labels(source: &DataSource, labels: &[String], ell: u64, bound: Option<u64>) -> Vec<ScanRow> {
    let mut rows: Vec<ScanRow> = labels
        .par_iter()
        .map(|label| match source.fetch_form(label, bound) {
            Ok(f) => ScanRow { label: label.clone(), verdict: Some(hasse_verdict(&f, ell, bound)), error: None },
            Err(e) => ScanRow { label: label.clone(), verdict: None, error: Some(e.to_string()) },
        })
        .collect();
    rows.sort_by_cached_key(|r| label_key(&r.label));
    rows
}

/// Candidates up to `level_max` in whose coefficient ring l splits, analysed.
pub fn scan(source: &DataSource, ell: u64, level_max: u64, filters: &Filters, bound: Option<u64>) -> Result<Vec<ScanRow>> {
    let f = Filters { level_range: Some((1, level_max)), ..filters.clone() };
    let labels = source.query_candidates(&f)?;
    let mut keep = Vec::new();
    for l in labels {
        let level: u64 = l.split('.').next().and_then(|s| s.parse().ok()).unwrap_or(0);
        let rec = source.fetch_form(&l, Some(bound.unwrap_or_else(|| default_bound(level))));
        let split = match &rec {
            Ok(r) => !r.field.is_rational() && matches!(split_primes(&r.field, ell), Ok(Some(_))),
            Err(_) => true,
        };
        if split {
            keep.push(l);
        }
    }
    Ok(scan_labels(source, &keep, ell, bound))
}

/// A value printed elsewhere that disagrees with the computed one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub label: String,
    pub field: String,
    pub expected: String,
    pub found: String,
}

/// A row of a reference table: coefficients, image and optionally the ideal.
#[derive(Clone, Debug)]
pub struct Expectation {
    pub label: String,
    pub coefficients: Vec<(u64, i64, i64)>,
    pub image: Option<String>,
    pub ideal: Option<String>,
}

/// Compares fetched coefficients and computed images against a reference row.
pub fn compare_expectation(f: &NewformRecord, v: &HasseVerdict, exp: &Expectation) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    let d = |field: String, expected: String, found: String| Discrepancy { label: f.label.clone(), field, expected, found };
    for &(p, c0, c1) in &exp.coefficients {
        let want = f.field.elem(c0, c1);
        match f.ap(p) {
            Ok(x) if *x == want => {}
            Ok(x) => out.push(d(format!("a_{p}"), show(&want, f), show(x, f))),
            Err(e) => out.push(d(format!("a_{p}"), show(&want, f), e.to_string())),
        }
    }
    let found_dihedral: Vec<&ImageReport> = v.reports.iter().filter(|r| r.image.is_some()).collect();
    if let Some(img) = &exp.image {
        let found = found_dihedral.iter().filter_map(|r| r.image.clone()).collect::<Vec<_>>().join(",");
        if !found_dihedral.iter().any(|r| r.image.as_ref() == Some(img)) {
            out.push(d("image".into(), img.clone(), if found.is_empty() { "none".into() } else { found }));
        }
    }
    if let Some(ideal) = &exp.ideal {
        let at: Vec<String> = found_dihedral.iter().filter_map(|r| r.ideal.clone()).collect();
        if !at.iter().any(|i| i == ideal) {
            out.push(d("ideal".into(), ideal.clone(), if at.is_empty() { "none".into() } else { at.join(",") }));
        }
    }
    out
}

fn show(x: &QuadElement, f: &NewformRecord) -> String {
    let sym = if f.field.is_real() { "β" } else { "g" };
    x.to_string().replace('g', sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmfdb::bundled_fixture_dir;
    use std::sync::OnceLock;

    fn src() -> &'static DataSource {
        static S: OnceLock<DataSource> = OnceLock::new();
        S.get_or_init(|| DataSource::fixtures(bundled_fixture_dir()))
    }

    fn form(label: &str) -> NewformRecord {
        src().fetch_form(label, None).unwrap()
    }

    /// Replaces every a_p by `h(p)` (as a rational integer).
    fn engineered(base: &NewformRecord, h: impl Fn(u64) -> i64) -> NewformRecord {
        let mut f = base.clone();
        for (p, x) in f.ap.iter_mut() {
            *x = f.field.elem(h(*p), 0);
        }
        f
    }

    #[test]
    fn twist_for_189_p_a() {
        let f = form("189.2.p.a");
        for m in reduction_maps(&f, 7).unwrap() {
            let t = detect_twist(&f, &m, 48).unwrap();
            assert_eq!(t.alpha.unwrap().discriminant, -3);
        }
    }

    #[test]
    fn squarefree_level_has_no_twist() {
        let f = form("29.2.a.a");
        let m = split_primes(&f.field, 7).unwrap();
        if let Some((m, _)) = m {
            assert!(detect_twist(&f, &m, 200).unwrap().alpha.is_none());
        }
        assert_eq!(twist_modulus(29), 1);
    }

    #[test]
    fn engineered_reducible_record() {
        // a_p = 1 + p mod 7 for the trivial character: chi = 1 satisfies the congruence
        let base = form("7938.2.a.bk");
        let f = engineered(&base, |p| 1 + p as i64);
        let (m, _) = split_primes(&f.field, 7).unwrap().unwrap();
        match exclude_reducible(&f, &m, 300).unwrap() {
            Reducibility::PossiblyReducible { chi } => assert!(chi.generator_images.iter().all(|g| g.exponent == 0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn engineered_degenerate_order() {
        // trivial character; a_p = 0 at (p/7) = -1 and t = 2s with s^2 = p otherwise,
        // so every alpha-split Frobenius has a repeated eigenvalue
        let base = form("7938.2.a.bk");
        let alpha = quadratic_characters(21).unwrap().into_iter().find(|c| c.discriminant == -7).unwrap().character;
        let mut f = base.clone();
        for (p, x) in f.ap.iter_mut() {
            let pp = FieldElement::reduce(*p as i64, 7);
            *x = match pp.sqrt_mod().unwrap().first() {
                Some(s) if !pp.is_zero() => f.field.elem(2 * s.value() as i64, 0),
                _ => f.field.zero(),
            };
        }
        let (m, _) = split_primes(&f.field, 7).unwrap().unwrap();
        let rep = dihedral_order(&f, &m, &alpha, 300).unwrap();
        assert_eq!(rep.n, 1);
        assert!(rep.trace_zero_violations.is_empty());
        assert_eq!(rep.repeated_eigenvalue_primes.len() as u64, rep.primes_used);
    }

    #[test]
    fn witness_from_discriminant() {
        let fd = crate::nfdata::FrobData { p: 11, t: FieldElement::new(6, 7).unwrap(), d: FieldElement::new(4, 7).unwrap() };
        assert!(fd.is_irreducible());
        // all a_p = 1 + p: split characteristic polynomials, no witness
        let base = form("7938.2.a.bk");
        let f = engineered(&base, |p| 1 + p as i64);
        let (m, _) = split_primes(&f.field, 7).unwrap().unwrap();
        assert_eq!(not_borel_witness(&f, &m, 300).unwrap(), None);
    }

    #[test]
    fn congruence_reflexive_and_violation() {
        let f = form("189.2.p.a");
        let maps = reduction_maps(&f, 7).unwrap();
        let c = congruence_check(&f, &f, &maps[0], &maps[0], None).unwrap();
        assert!(c.congruent);
        let mut g = f.clone();
        let a13 = *g.ap.get(&13).unwrap();
        g.ap.insert(13, a13 + g.field.one());
        let c = congruence_check(&f, &g, &maps[0], &maps[0], None).unwrap();
        assert_eq!(c.first_violation, Some(13));
        let m11 = split_primes(&f.field, 13).unwrap().unwrap().0;
        assert!(congruence_check(&f, &f, &maps[0], &m11, None).is_err());
    }

    #[test]
    fn ideal_display() {
        let f = form("7938.2.a.bk");
        let (m3, m4) = split_primes(&f.field, 7).unwrap().unwrap();
        assert_eq!(m3.root.value(), 3);
        assert_eq!(format_ideal(&f, ideal_generator(&f, &m3).unwrap()), "(1+2β)");
        assert_eq!(format_ideal(&f, ideal_generator(&f, &m4).unwrap()), "(1-2β)");
    }

    #[test]
    fn bk_at_root_3() {
        let f = form("7938.2.a.bk");
        let (m3, _) = split_primes(&f.field, 7).unwrap().unwrap();
        let fd = frob_charpoly(&f, 11, &m3).unwrap();
        assert_eq!((fd.t.value(), fd.d.value()), (2, 4));
        assert_eq!(projective_frob_order(&fd), 3);
    }

    #[test]
    fn empty_scan() {
        assert!(scan_labels(src(), &[], 7, None).is_empty());
    }
}
