//! Translation between the upstream database API and the local newform schema.
//!
//! Endpoint mapping:
//! - candidate labels: `GET {base}/api/mf_newforms/?weight=i2&dim=i2&is_cm=...&inner_twist_count=i..&_fields=label&_format=json&_offset=K`
//! - newform metadata: `GET {base}/api/mf_newforms/?label=L&_format=json`
//!   (`label`, `level`, `weight`, `dim`, `is_cm`, `cm_discs`, `inner_twist_count`, `field_poly`, `hecke_orbit_code`)
//! - coefficients: `GET {base}/api/mf_hecke_nf/?hecke_orbit_code=iH&_format=json`
//!   (`ap` in the Hecke ring basis, `maxp`, `hecke_ring_numerators`, `hecke_ring_denominators`,
//!   `hecke_ring_character_values` as `[generator, coefficients]` pairs)
//!
//! Responses wrap rows as `{"data": [...]}`.

use serde_json::Value;

use super::Filters;
use crate::dchar::{CharacterSpec, DirichletCharacter, GeneratorImage, UnitGroupBasis};
use crate::error::{Error, Result};
use crate::ffield::is_prime;
use crate::nfdata::{ApEntry, NewformJson, QuadElement, QuadField};

pub const PAGE_SIZE: usize = 100;

fn parse_err(msg: impl Into<String>, body: &str) -> Error {
    Error::Parse { msg: msg.into(), excerpt: body.chars().take(200).collect() }
}

pub fn candidates_url(base: &str, f: &Filters, offset: usize) -> String {
    let mut url = format!("{base}/api/mf_newforms/?weight=i2&dim=i{}", f.dimension);
    if let Some(cm) = f.cm {
        url += &format!("&is_cm={cm}");
    }
    if let Some(t) = f.inner_twist_count {
        url += &format!("&inner_twist_count=i{t}");
    }
    if let Some((lo, hi)) = f.level_range {
        if lo == hi {
            url += &format!("&level=i{lo}");
        }
    }
    url + &format!("&_fields=label,level&_format=json&_offset={offset}")
}

pub fn form_url(base: &str, label: &str) -> String {
    format!("{base}/api/mf_newforms/?label={label}&_format=json")
}

pub fn hecke_url(base: &str, orbit_code: i64) -> String {
    format!("{base}/api/mf_hecke_nf/?hecke_orbit_code=i{orbit_code}&_format=json")
}

fn rows(body: &str) -> Result<Vec<Value>> {
    let v: Value = serde_json::from_str(body).map_err(|e| parse_err(e.to_string(), body))?;
    match v.get("data") {
        Some(Value::Array(a)) => Ok(a.clone()),
        _ => Err(parse_err("missing `data` array", body)),
    }
}

/// Labels (with levels) from one page of candidates.
pub fn parse_candidates(body: &str) -> Result<Vec<(String, u64)>> {
    rows(body)?
        .iter()
        .map(|r| {
            let label = r.get("label").and_then(Value::as_str).ok_or_else(|| parse_err("row without label", body))?;
            let level = r.get("level").and_then(Value::as_u64).ok_or_else(|| parse_err("row without level", body))?;
            Ok((label.to_string(), level))
        })
        .collect()
}

/// Metadata needed before the coefficient request.
pub struct FormMeta {
    pub label: String,
    pub level: u64,
    pub weight: u32,
    pub dim: u64,
    pub cm: bool,
    pub cm_disc: Option<i64>,
    pub inner_twist_count: u32,
    pub field_poly: Vec<i64>,
    pub orbit_code: i64,
}

/// `None` when the label is unknown upstream.
pub fn parse_form(body: &str) -> Result<Option<FormMeta>> {
    let rs = rows(body)?;
    let Some(r) = rs.first() else { return Ok(None) };
    let int = |k: &str| r.get(k).and_then(Value::as_i64).ok_or_else(|| parse_err(format!("field `{k}` missing"), body));
    let field_poly = r
        .get("field_poly")
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(Value::as_i64).collect::<Option<Vec<_>>>())
        .ok_or_else(|| parse_err("field `field_poly` missing", body))?;
    let cm_disc = r
        .get("cm_discs")
        .and_then(Value::as_array)
        .and_then(|a| a.first())
        .and_then(Value::as_i64);
    Ok(Some(FormMeta {
        label: r.get("label").and_then(Value::as_str).ok_or_else(|| parse_err("field `label` missing", body))?.to_string(),
        level: int("level")? as u64,
        weight: int("weight")? as u32,
        dim: int("dim")? as u64,
        cm: r.get("is_cm").and_then(Value::as_bool).unwrap_or(false),
        cm_disc,
        inner_twist_count: int("inner_twist_count").unwrap_or(-1).max(0) as u32,
        field_poly,
        orbit_code: int("hecke_orbit_code")?,
    }))
}

fn int_vec(v: &Value) -> Option<Vec<i64>> {
    v.as_array()?.iter().map(Value::as_i64).collect()
}

/// Hecke-ring basis as numerator rows over a common denominator.
struct Basis {
    rows: Vec<Vec<i64>>,
    den: i64,
}

impl Basis {
    fn to_power(&self, field: QuadField, coeffs: &[i64]) -> Result<QuadElement> {
        let mut c = [0i64; 2];
        for (x, row) in coeffs.iter().zip(&self.rows) {
            for (j, r) in row.iter().enumerate().take(2) {
                c[j] += x * r;
            }
        }
        QuadElement::new(field, c[0], c[1], self.den)
    }
}

fn basis(r: &Value, body: &str) -> Result<Basis> {
    let power = r.get("hecke_ring_power_basis").and_then(Value::as_bool).unwrap_or(false);
    let nums = r.get("hecke_ring_numerators").and_then(|v| v.as_array().map(|a| a.iter().map(int_vec).collect::<Option<Vec<_>>>()));
    let dens = r.get("hecke_ring_denominators").and_then(int_vec);
    match (nums, dens) {
        (Some(Some(rows)), Some(dens)) if !power => {
            let den = dens.iter().fold(1i64, |a, &d| a / gcd(a, d) * d);
            let rows = rows.into_iter().zip(&dens).map(|(row, d)| row.iter().map(|x| x * (den / d)).collect()).collect();
            Ok(Basis { rows, den })
        }
        _ if power => Ok(Basis { rows: vec![vec![1, 0], vec![0, 1]], den: 1 }),
        _ => Err(parse_err("Hecke ring basis missing", body)),
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

fn root_order(x: &QuadElement) -> Option<u64> {
    let one = x.field.one();
    (1..=12).find(|&k| x.pow(k) == one)
}

/// Converts character values at the standard generators into exponents of a
/// single root of unity `zeta` in the coefficient ring.
fn character_from_values(level: u64, values: &[(u64, QuadElement)], field: QuadField) -> Result<(CharacterSpec, QuadElement)> {
    let basis = UnitGroupBasis::new(level)?;
    let gens: Vec<u64> = values.iter().map(|(g, _)| *g).collect();
    if gens != basis.generators() {
        return Err(Error::Embedding(format!(
            "upstream character generators {gens:?} differ from {:?} mod {level}",
            basis.generators()
        )));
    }
    let orders: Vec<u64> = values
        .iter()
        .map(|(_, v)| root_order(v).ok_or_else(|| Error::Embedding(format!("character value {v} is not a root of unity"))))
        .collect::<Result<_>>()?;
    let m = orders.iter().fold(1u64, |a, &o| crate::ffield::lcm(a, o));
    // the roots of unity in a quadratic ring form a cyclic group, so some
    // product of generator values has order m
    let mut zeta = None;
    let mut stack = vec![(0usize, field.one())];
    while let Some((i, acc)) = stack.pop() {
        if i == values.len() {
            if root_order(&acc) == Some(m) {
                zeta = Some(acc);
                break;
            }
            continue;
        }
        for k in 0..orders[i] {
            stack.push((i + 1, acc * values[i].1.pow(k)));
        }
    }
    let zeta = zeta.ok_or_else(|| Error::Embedding("no root of unity of the character order".into()))?;
    let images = values
        .iter()
        .map(|(g, v)| {
            let e = (0..m).find(|&k| zeta.pow(k) == *v).expect("value lies in <zeta>");
            GeneratorImage { generator: *g, exponent: e }
        })
        .collect();
    let spec = CharacterSpec { modulus: level, zeta_order: m, generator_images: images };
    DirichletCharacter::from_spec(&spec)?;
    Ok((spec, zeta))
}

/// Builds a local record from metadata and the coefficient response.
pub fn parse_hecke(meta: &FormMeta, body: &str) -> Result<NewformJson> {
    let rs = rows(body)?;
    let r = rs.first().ok_or_else(|| parse_err("no coefficient row", body))?;
    let field = QuadField::from_poly(&meta.field_poly)?;
    let b = basis(r, body)?;
    let ap_raw = r
        .get("ap")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("field `ap` missing", body))?;
    let primes = (2u64..).filter(|&p| is_prime(p));
    let mut ap = Vec::with_capacity(ap_raw.len());
    let mut max_p = 0;
    for (p, v) in primes.zip(ap_raw) {
        let coeffs = int_vec(v).ok_or_else(|| parse_err(format!("a_{p} malformed"), body))?;
        let x = b.to_power(field, &coeffs)?;
        if x.den != 1 {
            return Err(Error::Embedding(format!("{}: a_{p} = {x} is not integral in the power basis", meta.label)));
        }
        ap.push(ApEntry { p, coeffs: vec![x.c0, x.c1] });
        max_p = p;
    }
    let mut values = Vec::new();
    if let Some(Value::Array(cv)) = r.get("hecke_ring_character_values") {
        for pair in cv {
            let g = pair.get(0).and_then(Value::as_u64).ok_or_else(|| parse_err("character generator malformed", body))?;
            let c = pair.get(1).and_then(int_vec).ok_or_else(|| parse_err("character value malformed", body))?;
            values.push((g, b.to_power(field, &c)?));
        }
    }
    let (character, zeta) = if values.is_empty() {
        let t = DirichletCharacter::trivial(meta.level)?;
        (t.to_spec(), field.one())
    } else {
        character_from_values(meta.level, &values, field)?
    };
    Ok(NewformJson {
        label: meta.label.clone(),
        level: meta.level,
        weight: meta.weight,
        character,
        zeta_image: Some(vec![zeta.c0, zeta.c1]),
        field_poly: meta.field_poly.clone(),
        ap,
        cm: meta.cm,
        cm_disc: meta.cm_disc,
        inner_twist_count: meta.inner_twist_count,
        ap_max_prime: r.get("maxp").and_then(Value::as_u64).unwrap_or(max_p).min(max_p),
        ap_den: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfdata::NewformRecord;

    #[test]
    fn parses_canned_payloads() {
        let meta_body = r#"{"data":[{"label":"189.2.p.a","level":189,"weight":2,"dim":2,"is_cm":true,"cm_discs":[-3],
            "inner_twist_count":4,"field_poly":[1,-1,1],"hecke_orbit_code":123}]}"#;
        let meta = parse_form(meta_body).unwrap().unwrap();
        assert_eq!(meta.orbit_code, 123);
        // basis {1/2, g - 1/2}; the character takes the values -1 and g
        let hecke_body = r#"{"data":[{"ap":[[0,0],[0,0],[0,0],[1,3]],"maxp":7,"hecke_ring_power_basis":false,
            "hecke_ring_numerators":[[1,0],[-1,2]],"hecke_ring_denominators":[2,2],
            "hecke_ring_character_values":[[29,[-2,0]],[136,[1,1]]]}]}"#;
        // with the denominator 2 the row [1,3] means (1 + 3(2g-1))/2 = -1 + 3g
        let j = parse_hecke(&meta, hecke_body).unwrap();
        assert_eq!(j.ap[3].coeffs, vec![-1, 3]);
        let rec = NewformRecord::from_json(&j).unwrap();
        assert_eq!(rec.nebentypus.modulus(), 189);
        assert_eq!(rec.nebentypus.conductor(), 21);
        assert_eq!(rec.ap_max_prime, 7);
    }

    #[test]
    fn malformed_payload_reports_excerpt() {
        match parse_candidates("<html>oops</html>") {
            Err(Error::Parse { excerpt, .. }) => assert!(excerpt.starts_with("<html>")),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_form(r#"{"data":[]}"#).unwrap().map(|m| m.label), None);
    }
}
