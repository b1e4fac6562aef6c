"""Reference values frozen into the C++ tests.

Computed with mpmath at 50 digits (and brute-force enumeration for the exact
signed-rank distribution), independently of the library code. Re-run with
`python3 tests/reference/compute_references.py` to regenerate the printout.
"""
import itertools
from fractions import Fraction

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def fixture_x(n):
    return [((i * 37) % 101) / 10 for i in range(1, n + 1)]


def fixture_y(n):
    return [((i * 37) % 101) / 10 * 0.5 + ((i * 53) % 29) / 7 for i in range(1, n + 1)]


def mpf_list(v):
    return [mp.mpf(x) for x in v]


def pearson(x, y):
    x, y = mpf_list(x), mpf_list(y)
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    r = sxy / mp.sqrt(sxx * syy)
    df = n - 2
    t = r * mp.sqrt(df / (1 - r * r))
    p = mp.betainc(mp.mpf(df) / 2, mp.mpf(1) / 2, 0, df / (df + t * t), regularized=True)
    return r, p


def ranks(v):
    order = sorted(range(len(v)), key=lambda i: v[i])
    out = [0] * len(v)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and v[order[j + 1]] == v[order[i]]:
            j += 1
        for k in range(i, j + 1):
            out[order[k]] = Fraction(i + j, 2) + 1
        i = j + 1
    return [float(r) for r in out]


def var(v):
    n = len(v)
    m = sum(v) / n
    return sum((a - m) ** 2 for a in v) / (n - 1)


def t_sf(t, df):
    # Upper tail of Student t via the regularized incomplete beta.
    x = df / (df + t * t)
    tail = mp.betainc(df / 2, mp.mpf(1) / 2, 0, x, regularized=True) / 2
    return tail if t > 0 else 1 - tail


def welch(a, b):
    a, b = mpf_list(a), mpf_list(b)
    va, vb = var(a) / len(a), var(b) / len(b)
    t = (sum(a) / len(a) - sum(b) / len(b)) / mp.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    return t, df, 2 * t_sf(abs(t), df)


def anova(groups):
    groups = [mpf_list(g) for g in groups]
    allv = [x for g in groups for x in g]
    grand = sum(allv) / len(allv)
    ssb = sum(len(g) * (sum(g) / len(g) - grand) ** 2 for g in groups)
    ssw = sum(sum((x - sum(g) / len(g)) ** 2 for x in g) for g in groups)
    d1, d2 = len(groups) - 1, len(allv) - len(groups)
    f = (ssb / d1) / (ssw / d2)
    p = mp.betainc(mp.mpf(d2) / 2, mp.mpf(d1) / 2, 0, d2 / (d2 + d1 * f), regularized=True)
    return f, p


def wilcoxon_exact(a, b):
    d = [x - y for x, y in zip(a, b) if x != y]
    r = ranks([abs(x) for x in d])
    wp = sum(rk for rk, x in zip(r, d) if x > 0)
    wm = sum(rk for rk, x in zip(r, d) if x < 0)
    stat = min(wp, wm)
    n = len(d)
    count = 0
    for signs in itertools.product([0, 1], repeat=n):
        if sum(k + 1 for k, s in enumerate(signs) if s) <= stat:
            count += 1
    return stat, min(Fraction(1), 2 * Fraction(count, 2 ** n))


def wilcoxon_normal(a, b):
    d = [x - y for x, y in zip(a, b) if x != y]
    r = ranks([abs(x) for x in d])
    wp = sum(rk for rk, x in zip(r, d) if x > 0)
    wm = sum(rk for rk, x in zip(r, d) if x < 0)
    stat = mp.mpf(min(wp, wm))
    n = len(d)
    ties = {}
    for x in d:
        ties[abs(x)] = ties.get(abs(x), 0) + 1
    tie = sum(t ** 3 - t for t in ties.values())
    mu = mp.mpf(n * (n + 1)) / 4
    sd = mp.sqrt(mp.mpf(n * (n + 1) * (2 * n + 1)) / 24 - mp.mpf(tie) / 48)
    diff = stat - mu
    diff -= mp.mpf(0.5) * mp.sign(diff)
    z = diff / sd
    return stat, mp.erfc(abs(z) / mp.sqrt(2))


def alpha(rows):
    k = len(rows[0])
    cols = [[mp.mpf(r[j]) for r in rows] for j in range(k)]
    totals = [sum(mp.mpf(x) for x in r) for r in rows]
    return mp.mpf(k) / (k - 1) * (1 - sum(var(c) for c in cols) / var(totals))


def lml(xs, ys, sf2, ell, sn2, jitter=1e-8):
    xs, ys = np.array(xs), np.array(ys)
    d = xs[:, None] - xs[None, :]
    K = sf2 * np.exp(-0.5 * d * d / ell ** 2) + (sn2 + jitter) * np.eye(len(xs))
    Km = mp.matrix(K.tolist())
    y = mp.matrix(ys.tolist())
    alpha_v = mp.lu_solve(Km, y)
    quad = (y.T * alpha_v)[0]
    return -quad / 2 - mp.log(mp.det(Km)) / 2 - len(xs) / 2 * mp.log(2 * mp.pi)


def show(name, v):
    print(f"{name} = {mp.nstr(mp.mpf(v), 20)}")


if __name__ == "__main__":
    x30, y30 = fixture_x(30), fixture_y(30)
    r, p = pearson(x30, y30)
    show("pearson.r", r); show("pearson.p", p)
    r, p = pearson(ranks(x30), ranks(y30))
    show("spearman.rho", r); show("spearman.p", p)

    a = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 4.9, 3.7, 4.1, 2.6, 3.0]
    b = [1.8, 2.9, 2.5, 4.1, 3.5, 2.0, 3.1, 3.6, 2.2, 3.9, 1.1, 2.4, 2.7]
    t, df, p = welch(a, b)
    show("welch.t", t); show("welch.df", df); show("welch.p", p)
    f, p = anova([a, b, [3.3, 4.8, 5.1, 3.9, 4.6]])
    show("anova3.F", f); show("anova3.p", p)

    pa = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 4.9, 3.7, 4.1, 2.6, 3.0]
    shift = [0.3, 0.5, -0.7, 1.5, 0.9, 1.2, -0.4, 1.3, 1.1, 0.2, 1.6, 0.6]
    pb = [x - s for x, s in zip(pa, shift)]
    s, p = wilcoxon_exact(pa, pb)
    print(f"wilcoxon_exact.W = {s}"); print(f"wilcoxon_exact.p = {p} = {float(p)!r}")
    qa = [((i * 17) % 23) / 3 for i in range(1, 41)]
    qb = [((i * 11) % 19) / 3 for i in range(1, 41)]
    s, p = wilcoxon_normal(qa, qb)
    show("wilcoxon_normal.W", s); show("wilcoxon_normal.p", p)

    rows = [[4, 5, 4], [3, 3, 2], [5, 5, 5], [2, 3, 3], [4, 4, 5], [1, 2, 1]]
    show("alpha.textbook", alpha(rows))
    cols = [[r[j] for r in rows] for j in range(3)]
    rs = [pearson(cols[i], cols[j])[0] for i in range(3) for j in range(i + 1, 3)]
    show("test_retest.textbook", sum(rs) / 3)

    for v in [0.1, 0.5, 1.0, 1.5, 2.0, 3.0, -0.7, 0.01, 4.5, -2.2]:
        show(f"erf({v})", mp.erf(v))
    for (aa, bb, xx) in [(0.5, 0.5, 0.3), (2, 3, 0.4), (10, 5, 0.7), (1.5, 20, 0.05), (50, 50, 0.5),
                         (0.1, 3, 0.9), (7.5, 0.5, 0.95), (3, 3, 0.999), (14, 0.5, 0.6), (100, 2, 0.98)]:
        show(f"ibeta({aa},{bb},{xx})", mp.betainc(aa, bb, 0, xx, regularized=True))
    for (aa, xx) in [(0.5, 0.2), (1, 1), (2.5, 3), (10, 7), (0.1, 0.01), (30, 35), (5, 0.5), (1.5, 10),
                     (100, 90), (3, 2)]:
        show(f"gammap({aa},{xx})", mp.gammainc(aa, 0, xx, regularized=True))

    xs = [1, 2, 3, 4, 5, 6, 7, 8]
    ys = [0.3, -0.1, 0.8, 1.2, 0.4, -0.6, -1.1, -0.2]
    show("lml.uniform", lml(xs, ys, 1.3, 2.5, 0.05))
    xs2 = [0.0, 0.4, 1.5, 1.7, 3.2, 4.0, 6.5]
    ys2 = [1.0, 0.7, -0.2, 0.1, -1.3, -0.4, 0.9]
    show("lml.irregular", lml(xs2, ys2, 0.8, 1.1, 0.1))
