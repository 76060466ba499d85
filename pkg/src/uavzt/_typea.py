"""Arithmetic on the supersingular curve y^2 = x^3 + x over F_p, p = 3 mod 4.

This is the classic "Type A" pairing setting: E(F_p) has p + 1 points, the
prime-order subgroup has order r with p + 1 = h * r, and the distortion map
(x, y) -> (-x, i*y) into E(F_p^2) turns the reduced Tate pairing into a
symmetric bilinear map G1 x G1 -> mu_r in F_p^2 (i^2 = -1).

Points are affine tuples ``(x, y)`` of ``mpz`` or ``None`` for infinity.
F_p^2 elements are tuples ``(a, b)`` meaning ``a + b*i``.
Nothing here is constant time.
"""

from gmpy2 import invert, is_prime, legendre, mpz

# Parameter set with a 160-bit group order and a 512-bit field.
P = mpz(
    "87807107996633125224377819847540498158068831994142082110286533992664756308802"
    "22957078625179422662221423155858769582317459277713367317481324925129998224791"
)
R = mpz(730750818665451621361119245571504901405976559617)
H = mpz(
    "12016012264891146079388821366740534204802954401251311822919615131047207289359"
    "704531102844802183906537786776"
)

assert H * R == P + 1 and P % 4 == 3
assert R == 2**159 + 2**107 + 1

FIELD_BYTES = 64
ORDER_BYTES = 20

_SQRT_EXP = (P + 1) // 4
_R_BITS = bin(R)[3:]


def check_params() -> bool:
    return bool(is_prime(P, 40) and is_prime(R, 40))


# ---------------------------------------------------------------- curve ----

def on_curve(pt) -> bool:
    if pt is None:
        return True
    x, y = pt
    return (y * y - x * x * x - x) % P == 0


def sqrt_fp(a):
    """Square root in F_p, or None if ``a`` is a non-residue."""
    a = a % P
    if a == 0:
        return mpz(0)
    if legendre(a, P) != 1:
        return None
    return pow(a, _SQRT_EXP, P)


def neg(pt):
    if pt is None:
        return None
    return (pt[0], (-pt[1]) % P)


def add(p1, p2):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    x1, y1 = p1
    x2, y2 = p2
    if x1 == x2:
        if (y1 + y2) % P == 0:
            return None
        lam = (3 * x1 * x1 + 1) * invert(2 * y1, P) % P
    else:
        lam = (y2 - y1) * invert(x2 - x1, P) % P
    x3 = (lam * lam - x1 - x2) % P
    return (x3, (lam * (x1 - x3) - y1) % P)


def _jdouble(X, Y, Z):
    if Y == 0 or Z == 0:
        return mpz(1), mpz(1), mpz(0)
    XX = X * X % P
    YY = Y * Y % P
    ZZ = Z * Z % P
    S = 4 * X * YY % P
    M = (3 * XX + ZZ * ZZ) % P
    X3 = (M * M - 2 * S) % P
    Y3 = (M * (S - X3) - 8 * YY * YY) % P
    return X3, Y3, 2 * Y * Z % P


def _jadd_affine(X1, Y1, Z1, x2, y2):
    if Z1 == 0:
        return x2, y2, mpz(1)
    Z1Z1 = Z1 * Z1 % P
    Hd = (x2 * Z1Z1 - X1) % P
    rr = (y2 * Z1 * Z1Z1 - Y1) % P
    if Hd == 0:
        if rr == 0:
            return _jdouble(X1, Y1, Z1)
        return mpz(1), mpz(1), mpz(0)
    HH = Hd * Hd % P
    HHH = Hd * HH % P
    V = X1 * HH % P
    X3 = (rr * rr - HHH - 2 * V) % P
    Y3 = (rr * (V - X3) - Y1 * HHH) % P
    return X3, Y3, Z1 * Hd % P


def _to_affine(X, Y, Z):
    if Z == 0:
        return None
    zi = invert(Z, P)
    zi2 = zi * zi % P
    return (X * zi2 % P, Y * zi2 * zi % P)


def _wnaf(k, w=4):
    digits = []
    half = 1 << (w - 1)
    full = 1 << w
    while k > 0:
        if k & 1:
            d = k % full
            if d >= half:
                d -= full
            k -= d
        else:
            d = 0
        digits.append(d)
        k >>= 1
    return digits


def mul(k, pt):
    """Scalar multiple ``k * pt`` for any non-negative integer ``k``."""
    if pt is None or k == 0:
        return None
    if k < 0:
        return mul(-k, neg(pt))
    if k == 1:
        return pt
    # odd multiples 1P, 3P, ..., 15P in affine form for mixed additions
    table = [pt]
    two_p = add(pt, pt)
    for _ in range(7):
        table.append(add(table[-1], two_p))
    X, Y, Z = mpz(1), mpz(1), mpz(0)
    for d in reversed(_wnaf(mpz(k))):
        X, Y, Z = _jdouble(X, Y, Z)
        if d > 0:
            q = table[d >> 1]
            if q is not None:
                X, Y, Z = _jadd_affine(X, Y, Z, q[0], q[1])
        elif d < 0:
            q = table[(-d) >> 1]
            if q is not None:
                X, Y, Z = _jadd_affine(X, Y, Z, q[0], P - q[1])
    return _to_affine(X, Y, Z)


def in_subgroup(pt) -> bool:
    return on_curve(pt) and mul(R, pt) is None


# ------------------------------------------------------------- F_p^2 ------

ONE2 = (mpz(1), mpz(0))


def f2_mul(u, v):
    a, b = u
    c, d = v
    ac = a * c
    bd = b * d
    return ((ac - bd) % P, ((a + b) * (c + d) - ac - bd) % P)


def f2_sqr(u):
    a, b = u
    return ((a + b) * (a - b) % P, 2 * a * b % P)


def f2_conj(u):
    return (u[0], (-u[1]) % P)


def f2_inv(u):
    a, b = u
    n = invert((a * a + b * b) % P, P)
    return (a * n % P, (-b) * n % P)


def unitary(u) -> bool:
    a, b = u
    return (a * a + b * b) % P == 1


def _usqr(u):
    # (a + bi)^2 with a^2 + b^2 = 1
    a, b = u
    return ((2 * a * a - 1) % P, 2 * a * b % P)


def f2_pow_unitary(u, e):
    """``u**e`` for ``u`` in the norm-1 subgroup (inverse is conjugation)."""
    if e == 0:
        return ONE2
    if e < 0:
        return f2_pow_unitary(f2_conj(u), -e)
    table = [u]
    u2 = _usqr(u)
    for _ in range(7):
        table.append(f2_mul(table[-1], u2))
    acc = ONE2
    for d in reversed(_wnaf(mpz(e))):
        acc = _usqr(acc)
        if d > 0:
            acc = f2_mul(acc, table[d >> 1])
        elif d < 0:
            acc = f2_mul(acc, f2_conj(table[(-d) >> 1]))
    return acc


# ------------------------------------------------------------- pairing ----

def _miller(p1, p2):
    """Miller function f_{r,p1} evaluated at the distorted image of p2.

    Vertical lines take values in F_p and vanish under the final
    exponentiation, so they are skipped.
    """
    xp, yp = p1
    xq, yq = p2
    f = ONE2
    xt, yt = xp, yp
    for bit in _R_BITS:
        # tangent at T
        lam = (3 * xt * xt + 1) * invert(2 * yt, P) % P
        f = f2_mul(f2_sqr(f), ((lam * (xq + xt) - yt) % P, yq))
        x3 = (lam * lam - 2 * xt) % P
        yt = (lam * (xt - x3) - yt) % P
        xt = x3
        if bit == "1":
            if xt == xp:
                # T = -P: only reached on the final bit, vertical line
                break
            lam = (yp - yt) * invert(xp - xt, P) % P
            f = f2_mul(f, ((lam * (xq + xt) - yt) % P, yq))
            x3 = (lam * lam - xt - xp) % P
            yt = (lam * (xt - x3) - yt) % P
            xt = x3
    return f


def _final_exp(f):
    # f^(p-1) = conj(f) / f, then raise to (p + 1) / r
    a, b = f
    n = invert((a * a + b * b) % P, P)
    g = ((a * a - b * b) * n % P, (-2 * a * b) * n % P)
    return f2_pow_unitary(g, H)


def tate(p1, p2):
    """Reduced symmetric Tate pairing e(p1, p2) in the order-r subgroup of F_p^2*."""
    if p1 is None or p2 is None:
        return ONE2
    return _final_exp(_miller(p1, p2))


# ------------------------------------------------------------- hashing ----

def map_to_point(digest_fn, data: bytes):
    """Try-and-increment hash onto the order-r subgroup.

    ``digest_fn(counter, data)`` must return at least 80 bytes; the first 72
    select x, the last byte picks the sign of y.
    """
    ctr = 0
    while True:
        d = digest_fn(ctr, data)
        x = mpz(int.from_bytes(d[:72], "big")) % P
        y = sqrt_fp(x * x * x + x)
        if y is not None:
            if (y & 1) != (d[-1] & 1):
                y = P - y
            pt = mul(H, (x, y % P))
            if pt is not None:
                return pt
        ctr += 1
