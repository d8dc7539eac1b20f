from math import gcd
from sympy import factorint, primitive_root, totient, mobius

def conrey_gens(N):
    """list of (generator mod N, order) in LMFDB/Conrey convention"""
    out = []
    for p, e in sorted(factorint(N).items()):
        q = p**e
        rest = N // q
        def lift(x):
            # x mod q, 1 mod rest
            for t in range(x % q, N, q):
                if t % rest == 1 % rest:
                    return t
        if p == 2:
            if e == 1: continue
            out.append((lift(q-1), 2))
            if e >= 3:
                out.append((lift(5), 2**(e-2)))
        else:
            g = primitive_root(q)
            out.append((lift(g), int(totient(q))))
    return out

def dlog_table(N):
    gens = conrey_gens(N)
    table = {}
    # enumerate products
    vecs = [()]
    for g, o in gens:
        vecs = [v + (k,) for v in vecs for k in range(o)]
    for v in vecs:
        x = 1
        for (g, o), k in zip(gens, v):
            x = x * pow(g, k, N) % N
        table[x] = v
    return gens, table

def lcm(a,b): return a*b//gcd(a,b)

def all_chars(N):
    """characters as exponent tuples a_i meaning chi(g_i)=e(a_i/o_i)"""
    gens, _ = dlog_table(N)
    vecs=[()]
    for g,o in gens:
        vecs=[v+(k,) for v in vecs for k in range(o)]
    return gens, vecs

def char_order(gens, a):
    m = 1
    for (g,o),k in zip(gens,a):
        m = lcm(m, o//gcd(o,k))
    return m

def ramanujan(m, e):
    d = m // gcd(m, e % m) if e % m else 1
    # sum over k in (Z/m)^x of e(k e/m) = mu(d)*phi(m)/phi(d) where d = m/gcd(m,e)
    return int(mobius(d)) * int(totient(m)) // int(totient(d))

def value_exp(N, gens, table, a, n, m):
    """exponent of chi(n) as multiple of 1/m, or None"""
    if gcd(n, N) != 1: return None
    v = table[n % N]
    M = 1
    for g,o in gens: M = lcm(M,o)
    s = 0
    for (g,o),k,j in zip(gens,a,v):
        s += k*j*(M//o)
    s %= M
    assert (s*m) % M == 0
    return (s*m//M) % m

def orbits(N):
    gens, table = dlog_table(N)
    _, vecs = all_chars(N)
    seen=set(); orbs=[]
    for a in vecs:
        if a in seen: continue
        m = char_order(gens,a)
        orb=[]
        for k in range(1, m+1):
            if gcd(k,m)!=1: continue
            b=tuple((x*k)%o for (g,o),x in zip(gens,a))
            orb.append(b); seen.add(b)
        tv=[]
        for n in range(1,N+1):
            e=value_exp(N,gens,table,a,n,m)
            tv.append(0 if e is None else ramanujan(m,e))
        orbs.append((m,tv,sorted(set(orb))))
    orbs.sort(key=lambda t:(t[0],t[1]))
    return gens, orbs

def letter(i):
    s=''
    i0=i
    while True:
        s = chr(ord('a')+i%26)+s
        i//=26
        if i==0: break
    # LMFDB: a..z, ba..bz ...
    return s

def conrey_index(N, gens, a):
    x = 1
    # conrey char number c: chi_c(g_i)=e(ind_i(c)/o_i); c = prod g_i^{a_i}
    for (g,o),k in zip(gens,a):
        x = x*pow(g,k,N)%N
    return x
