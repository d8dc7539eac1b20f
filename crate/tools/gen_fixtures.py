#!/usr/bin/env python3
"""Regenerate the committed newform fixtures with PARI/GP (via cypari2).

Fixtures follow the newform JSON schema consumed by `hasse` (see README):

    {label, level, weight, char: {modulus, zeta_order, generator_images},
     zeta_image, field_poly, ap: [{p, coeffs}], cm, cm_disc,
     inner_twist_count, ap_max_prime}

Labels are reproduced with the LMFDB conventions: character orbits sorted by
order then by trace vector, newforms sorted by dimension then trace form.

Usage:
    python3 tools/gen_fixtures.py label 189.2.p.a [--expect n=expr ...]
    python3 tools/gen_fixtures.py sweep --ell 7 --level-max 189
    python3 tools/gen_fixtures.py dump 7938 --bound 3100 --out space7938.json
    python3 tools/gen_fixtures.py label 7938.2.a.bk --space-dump space7938.json [--flip]
    python3 tools/gen_fixtures.py kernel 9099 --bound 2100 --hecke 7=x^2+4*x-4 --hecke 5=x^2+6*x+7 --out k.json
    python3 tools/gen_fixtures.py label 9099.2.a.e --space-dump k.json --match-only --expect 5=-3-g
"""
import argparse
import json
import math
import os
import sys
from fractions import Fraction

import cypari2
from sympy import factorint, primerange

sys.path.insert(0, os.path.dirname(__file__))
from dirichlet_orbits import conrey_index, letter, orbits  # noqa: E402

pari = cypari2.Pari()
pari.allocatemem(6 * 10**9)

OUT_DEFAULT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "fixtures", "newforms")


def letter_index(s):
    i = 0
    for ch in s:
        i = i * 26 + (ord(ch) - ord("a"))
    return i


def sturm(n, k=2):
    mu = Fraction(n)
    for p in factorint(n):
        mu *= Fraction(p + 1, p)
    return int(Fraction(k) * mu / 12)


def twist_modulus(n):
    q = 1
    for p, e in factorint(n).items():
        if e >= 2:
            q *= p
    return q


def default_bound(n):
    q = twist_modulus(n)
    big = n * q * q // math.gcd(n, q * q)
    return max(200, sturm(big))


def squarefree_part(d):
    sign = -1 if d < 0 else 1
    d = abs(d)
    f = 1
    for p, e in factorint(d).items():
        f *= p ** (e // 2)
    return sign * d // (f * f), f


class Field:
    """Quadratic ring Z[g] with g^2 + b g + c = 0 (field_poly = [c, b, 1])."""

    def __init__(self, c, b):
        self.c, self.b = c, b

    def conj(self, x):
        c0, c1 = x
        return (c0 - self.b * c1, -c1)

    def poly(self):
        return [self.c, self.b, 1]

    def mul(self, x, y):
        a0, a1 = x
        b0, b1 = y
        # g^2 = -b g - c
        return (a0 * b0 - self.c * a1 * b1, a0 * b1 + a1 * b0 - self.b * a1 * b1)

    def pow(self, x, k):
        r = (1, 0)
        for _ in range(k):
            r = self.mul(r, x)
        return r


def to_int(fr):
    fr = Fraction(fr)
    assert fr.denominator == 1, f"non-integral coefficient {fr}"
    return int(fr)


def pari_frac(x):
    return Fraction(str(x))


def poly_coeffs(pol, var, deg):
    """rational coefficients of a pari polynomial in var up to deg"""
    out = []
    for k in range(deg + 1):
        out.append(pari_frac(pari.polcoef(pol, k, var)))
    return out


def space_forms(n, conrey, m):
    """Split S_2^new(n, chi_conrey) into orbits of relative degree <= 2; returns count."""
    pari(f"mf=mfinit([{n},2,Mod({conrey},{n})],0)")
    if int(pari("mfdim(mf)")) == 0:
        return []
    dimlim = 2 if m <= 2 else 1
    pari(f"S=mfsplit(mf,{dimlim}); vF=S[1]; vK=S[2]")
    return int(pari("#vK"))


def forms_of_space(n, conrey, m, bound):
    count = space_forms(n, conrey, m)
    if not count:
        return []
    pari(f"M=mfcoefs(mf,{bound})")
    forms = []
    for i in range(1, count + 1):
        P = pari(f"vK[{i}]")
        reldeg = int(pari.poldegree(P, "y"))
        cdeg = 1 if m <= 2 else 2
        if reldeg * cdeg > 2:
            continue
        pari(f"v=M*vF[,{i}]; v=v/v[2]")
        if reldeg == 2:
            pari(f"v=apply(z->lift(Mod(z,vK[{i}])),v)")
        v = pari("v")
        forms.append({"reldeg": reldeg, "P": P, "v": v, "m": m, "cdeg": cdeg})
    return forms


def to_quadratic(form, flip):
    """Convert pari coefficient vector to (Field, [(c0,c1)...], zeta_image).

    flip applies the nontrivial automorphism of the coefficient field.
    """
    m, reldeg, v = form["m"], form["reldeg"], form["v"]
    coefs = []
    if m in (3, 6):
        # field Q(zeta_6) = Z[g], g^2 - g + 1 = 0; t is exp(2 pi i/m)
        fld = Field(1, -1)
        for z in v:
            c = poly_coeffs(pari.lift(z), "t", 1)
            c0, c1 = c
            if m == 6:
                x = (to_int(c0), to_int(c1))
            else:  # zeta_3 = g - 1
                x = (to_int(c0 - c1), to_int(c1))
            coefs.append(x)
        zeta = (0, 1) if m == 6 else (-1, 1)
    elif reldeg == 2:
        P = form["P"]
        c = poly_coeffs(P, "y", 2)
        b, cc = c[1], c[0]
        assert c[2] == 1
        disc = b * b - 4 * cc
        assert disc.denominator == 1
        d, f = squarefree_part(int(disc))
        if d % 4 == 1:
            fld = Field((1 - d) // 4, -1)
        else:
            fld = Field(-d, 0)
        for z in v:
            u = poly_coeffs(pari.lift(z) if pari.type(z) == "t_POLMOD" else z, "y", 1)
            u0, u1 = u
            A = u0 - u1 * b / 2
            B = u1 * f / 2  # coefficient of sqrt(d)
            if d % 4 == 1:
                x = (to_int(A - B), to_int(2 * B))
            else:
                x = (to_int(A), to_int(B))
            coefs.append(x)
        zeta = (-1, 0) if m == 2 else (1, 0)
    else:
        fld = None
        coefs = [(to_int(pari_frac(z)), 0) for z in v]
        zeta = (-1, 0) if m == 2 else (1, 0)
    if flip and fld is not None:
        coefs = [fld.conj(x) for x in coefs]
        zeta = fld.conj(zeta)
    return fld, coefs, zeta


def abs_trace(fld, x):
    if fld is None:
        return x[0]
    return 2 * x[0] - fld.b * x[1]


def parse_expect(fld, expr):
    """'2-3*g' style expression in the field generator g -> (c0,c1)"""
    import sympy

    g = sympy.Symbol("g")
    e = sympy.expand(sympy.sympify(expr, locals={"g": g}))
    p = sympy.Poly(e, g)
    cs = p.all_coeffs()[::-1] + [0, 0]
    return (int(cs[0]), int(cs[1]))


def dump_space(n, bound, path):
    """Trivial-character newforms of relative degree <= 2, with coefficients to bound."""
    pari(f"mf=mfinit([{n},2],0); S=mfsplit(mf,2); vF=S[1]; vK=S[2]")
    pari(f"M=mfcoefs(mf,{bound})")
    res = []
    for i in range(1, int(pari("#vK")) + 1):
        P = pari(f"vK[{i}]")
        pari(f"v=M*vF[,{i}]; v=v/v[2]")
        if int(pari.poldegree(P, "y")) == 2:
            pari(f"v=apply(z->lift(Mod(z,vK[{i}])),v)")
        res.append({"poly": str(P), "coefs": [str(z) for z in pari("v")]})
    with open(path, "w") as fh:
        json.dump(res, fh)


def kernel_dump(n, bound, hecke, path):
    """Newforms cut out by minimal polynomials of a few Hecke eigenvalues.

    hecke: [(p, poly in x)] with the last p's kernel of relative dimension 2.
    """
    pari(f"mf=mfinit([{n},2],0); K=matid(mfdim(mf))")
    for p, f in hecke:
        pari(f"T=mfheckemat(mf,{p}); R=matinverseimage(K,T*K); K=K*matker(subst(Pol({f}),x,R))")
    assert int(pari("#K")) == 2, "Hecke kernel is not a single quadratic orbit"
    p, f = hecke[-1]
    pari(f"M=mfcoefs(mf,{bound}); P=subst(Pol({f}),x,y); w=K[,1]")
    # eigenvector for the root y: (T_p - y') w with y' the conjugate root
    pari("v=T*w-Mod(-polcoef(P,1)-y,P)*w; v=M*v; v=v/v[2]; v=apply(z->lift(z),v)")
    res = [{"poly": str(pari("P")), "coefs": [str(z) for z in pari("v")]}]
    with open(path, "w") as fh:
        json.dump(res, fh)


def forms_from_dump(path):
    forms = []
    for f in json.load(open(path)):
        P = pari(f["poly"])
        v = pari("[" + ",".join(f["coefs"]) + "]")
        forms.append({"reldeg": int(pari.poldegree(P, "y")), "P": P, "v": v, "m": 1, "cdeg": 1})
    return forms


def find_form(n, orbit_letter, form_letter, bound, space_dump=None, match_only=False):
    gens, orbs = orbits(n)
    m, _, orb = orbs[letter_index(orbit_letter)]
    conreys = sorted(conrey_index(n, gens, a) for a in orb)
    rep = conreys[0]
    rep_vec = [a for a in orb if conrey_index(n, gens, a) == rep][0]
    if space_dump:
        assert m == 1, "space dumps hold trivial-character spaces"
        forms = forms_from_dump(space_dump)
    else:
        forms = forms_of_space(n, rep, m, bound)
    keyed = []
    for fm in forms:
        fld, coefs, _ = to_quadratic(fm, False)
        dim = fm["reldeg"] * fm["cdeg"]
        tr = [abs_trace(fld, coefs[k]) if fld else coefs[k][0] * 1 for k in range(1, min(len(coefs), 1001))]
        keyed.append(((dim, tr), fm))
    keyed.sort(key=lambda t: t[0])
    if match_only:
        # the dump holds only candidates; the caller picks by printed coefficients
        return gens, m, rep_vec, None, keyed
    idx = letter_index(form_letter)
    return gens, m, rep_vec, keyed[idx][1], keyed


def char_json(n, gens, m, rep_vec):
    imgs = []
    for (g, o), a in zip(gens, rep_vec):
        imgs.append({"generator": g, "exponent": a * m // o})
    return {"modulus": n, "zeta_order": m, "generator_images": imgs}


def char_value(n, gens, m, rep_vec, x, fld, zeta):
    """value of the stored character at x inside Z[g]"""
    if math.gcd(x, n) != 1:
        return (0, 0)
    # discrete log by brute force over the generator exponents
    from itertools import product

    ranges = [range(o) for _, o in gens]
    for ks in product(*ranges):
        y = 1
        for (g, o), k in zip(gens, ks):
            y = y * pow(g, k, n) % n
        if y == x % n:
            e = sum(Fraction(k * a, o) for (g, o), k, a in zip(gens, ks, rep_vec)) * m
            e = int(e) % m
            if fld is None:
                return ((-1) ** e if m == 2 else 1, 0)
            return fld.pow(zeta, e)
    raise ValueError


def inner_twists(n, fld, coefs, primes_good, m_nebentypus):
    """Count (sigma, psi) with sigma(a_p) = psi(p) a_p for good p (numerically)."""
    import cmath

    if fld is None:
        embed = lambda x: complex(x[0])
        sig = [lambda x: x]
    else:
        disc = fld.b * fld.b - 4 * fld.c
        root = (-fld.b + cmath.sqrt(disc)) / 2
        embed = lambda x: x[0] + x[1] * root
        sig = [lambda x: x, fld.conj]
    gens, orbs = orbits(n)
    from dirichlet_orbits import dlog_table, value_exp

    _, table = dlog_table(n)
    count = 0
    for s in sig:
        for m, _, orb in orbs:
            for a in orb:
                ok = True
                for p in primes_good:
                    ap = coefs[p]
                    if ap == (0, 0):
                        continue
                    e = value_exp(n, gens, table, a, p, m)
                    psi = cmath.exp(2j * cmath.pi * e / m)
                    if abs(embed(s(ap)) - psi * embed(ap)) > 1e-6:
                        ok = False
                        break
                if ok:
                    count += 1
    return count


def build_record(label, expects=None, bound=None, flip=None, space_dump=None, match_only=False):
    n, k, ol, fl = label.split(".")
    n = int(n)
    assert k == "2"
    if bound is None:
        bound = max(1000, default_bound(n))
    gens, m, rep_vec, form, keyed = find_form(n, ol, fl, bound, space_dump, match_only)
    candidates = [fm for _, fm in keyed] if match_only else [form]
    assert expects or not match_only, "--match-only needs --expect"
    choice = None
    for cand in candidates:
        for fl_try in ([False, True] if flip is None else [flip]):
            fld, coefs, zeta = to_quadratic(cand, fl_try)
            if expects:
                if all(coefs[i] == parse_expect(fld, e) for i, e in expects.items()):
                    choice = (fld, coefs, zeta)
                    form = cand
                    break
            else:
                choice = (fld, coefs, zeta)
                break
        if choice:
            break
    bound = min(bound, len(form["v"]) - 1)
    if choice is None:
        raise SystemExit(f"{label}: printed coefficients not matched; data: "
                         + str({i: to_quadratic(form, False)[1][i] for i in expects}))
    fld, coefs, zeta = choice
    primes = list(primerange(2, bound + 1))
    good = [p for p in primes if n % p != 0]
    # nebentypus consistency: a_p * conj(a_p)... eps(p) = a_p / conj(a_p) when a_p != 0
    if fld is not None and m > 2:
        for p in good[:60]:
            ap = coefs[p]
            if ap == (0, 0):
                continue
            eps = char_value(n, gens, m, rep_vec, p, fld, zeta)
            assert fld.mul(eps, fld.conj(ap)) == ap, f"{label}: nebentypus inconsistent at {p}"
    twists = inner_twists(n, fld, coefs, good[:40], m)
    rec = {
        "label": label,
        "level": n,
        "weight": 2,
        "char": char_json(n, gens, m, rep_vec),
        "zeta_image": list(zeta),
        "field_poly": fld.poly() if fld else [0, 1],
        "ap": [{"p": p, "coeffs": list(coefs[p])} for p in primes],
        "inner_twist_count": twists,
        "ap_max_prime": primes[-1],
    }
    cm = cm_discriminant(fld, coefs, good)
    rec["cm"] = cm != 0
    if cm:
        rec["cm_disc"] = cm
    return rec


def cm_discriminant(fld, coefs, good):
    """Imaginary quadratic D with a_p = 0 whenever (D/p) = -1, searched over small |D|."""
    from sympy.functions.combinatorial.numbers import legendre_symbol

    def kron(d, p):
        if p == 2:
            return 0 if d % 2 == 0 else (1 if d % 8 in (1, 7) else -1)
        return legendre_symbol(d % p, p) if d % p else 0

    for D in range(-3, -400, -1):
        if D % 4 not in (0, 1):
            continue
        inert = [p for p in good if kron(D, p) == -1]
        if len(inert) >= 20 and all(coefs[p] == (0, 0) for p in inert):
            zeros = [p for p in good if coefs[p] == (0, 0)]
            if len(zeros) < len(good):
                return fundamental(D)
    return 0


def fundamental(D):
    d, f = squarefree_part(D)
    return d if d % 4 == 1 else 4 * d


def write(rec, out):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, rec["label"] + ".json")
    with open(path, "w") as fh:
        json.dump(rec, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    print("wrote", path, file=sys.stderr)


def splits(fld, ell):
    if fld is None:
        return False
    disc = fld.b * fld.b - 4 * fld.c
    if disc % ell == 0:
        return False
    return pow(disc % ell, (ell - 1) // 2, ell) == 1


def sweep(ell, level_max, out):
    """Every newform of absolute dimension 2 and level <= level_max in which ell splits."""
    labels = []
    for n in range(2, level_max + 1):
        gens, orbs = orbits(n)
        for idx, (m, _, orb) in enumerate(orbs):
            if m not in (1, 2, 3, 6):
                continue
            rep = min(conrey_index(n, gens, a) for a in orb)
            if int(pari(f"zncharisodd(znstar({n},1),znconreylog(znstar({n},1),{rep}))")):
                continue
            try:
                _, _, _, _, keyed = find_form(n, letter(idx), "a", 40)
            except IndexError:
                continue
            for j, ((dim, _), fm) in enumerate(keyed):
                if dim != 2:
                    continue
                fld, _, _ = to_quadratic(fm, False)
                if splits(fld, ell):
                    labels.append(f"{n}.2.{letter(idx)}.{letter(j)}")
        print(n, len(labels), file=sys.stderr, flush=True)
    return labels


def main():
    ap = argparse.ArgumentParser()
    sub = ap.add_subparsers(dest="cmd", required=True)
    lab = sub.add_parser("label")
    lab.add_argument("label")
    lab.add_argument("--expect", action="append", default=[], help="n=expr in g")
    lab.add_argument("--bound", type=int)
    lab.add_argument("--out", default=OUT_DEFAULT)
    lab.add_argument("--flip", action="store_true", help="apply the field automorphism")
    lab.add_argument("--space-dump", help="precomputed space from the dump or kernel command")
    lab.add_argument("--match-only", action="store_true",
                     help="pick the dumped form by --expect instead of by label order (letter unchecked)")
    dp = sub.add_parser("dump", help="dump a trivial-character space (large levels)")
    dp.add_argument("level", type=int)
    dp.add_argument("--bound", type=int, required=True)
    dp.add_argument("--out", required=True)
    kp = sub.add_parser("kernel", help="dump the forms cut out by Hecke eigenvalue minimal polynomials")
    kp.add_argument("level", type=int)
    kp.add_argument("--bound", type=int, required=True)
    kp.add_argument("--hecke", action="append", required=True, help="p=minpoly in x, e.g. 7=x^2+4*x-4")
    kp.add_argument("--out", required=True)
    sw = sub.add_parser("sweep")
    sw.add_argument("--ell", type=int, default=7)
    sw.add_argument("--level-max", type=int, default=189)
    sw.add_argument("--out", default=OUT_DEFAULT)
    sw.add_argument("--list-only", action="store_true")
    args = ap.parse_args()
    if args.cmd == "label":
        expects = {}
        for e in args.expect:
            k, v = e.split("=", 1)
            expects[int(k)] = v
        flip = True if args.flip else None
        write(build_record(args.label, expects or None, args.bound, flip, args.space_dump, args.match_only), args.out)
    elif args.cmd == "dump":
        dump_space(args.level, args.bound, args.out)
    elif args.cmd == "kernel":
        hecke = [(int(h.split("=", 1)[0]), h.split("=", 1)[1]) for h in args.hecke]
        kernel_dump(args.level, args.bound, hecke, args.out)
    else:
        labels = sweep(args.ell, args.level_max, args.out)
        print("\n".join(labels))
        if not args.list_only:
            for label in labels:
                if os.path.exists(os.path.join(args.out, label + ".json")):
                    continue
                write(build_record(label), args.out)


if __name__ == "__main__":
    main()
