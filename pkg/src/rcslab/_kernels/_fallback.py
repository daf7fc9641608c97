"""Pure-Python/numpy implementations of the hot kernels.

Same call signatures as the compiled ``_core`` module. ``apply_gate`` here is
dtype-agnostic and is also the path used for arbitrary-precision (object)
statevectors.
"""

import numpy as np

# Above this modulus, products of two residues overflow int64.
_INT64_SAFE_MODULUS = 3_037_000_499


def apply_gate(state, matrix, targets, n):
    """Return ``(G on targets) |state>`` for a length-``2**n`` vector.

    Qubit ``t`` is bit ``t`` of the basis index; the gate's local index puts
    ``targets[0]`` in the most significant position.
    """
    k = len(targets)
    psi = state.reshape((2,) * n)
    axes = [n - 1 - t for t in targets]
    psi = np.moveaxis(psi, axes, list(range(k)))
    shape = psi.shape
    out = matrix @ psi.reshape(2 ** k, -1)
    out = np.moveaxis(out.reshape(shape), list(range(k)), axes)
    return np.ascontiguousarray(out).reshape(-1)


def _local_index(y, targets):
    idx = 0
    for t in targets:
        idx = (idx << 1) | ((y >> t) & 1)
    return idx


def _scatter(y, targets, r):
    k = len(targets)
    for pos, t in enumerate(targets):
        bit = (r >> (k - 1 - pos)) & 1
        y = (y & ~(1 << t)) | (bit << t)
    return y


def pathsum_amplitude(mats, targets, n, y0, ym):
    """Sum over intermediate strings of products of embedded gate elements.

    ``<y'|G (x) I|y>`` vanishes unless ``y'`` agrees with ``y`` off the
    targets, so only agreeing strings are visited; every other term is an
    exact zero.
    """
    m = len(mats)
    if m == 0:
        return complex(y0 == ym)
    masks = [sum(1 << t for t in tg) for tg in targets]
    dims = [2 ** len(tg) for tg in targets]

    def visit(j, y):
        tg = targets[j]
        g = mats[j]
        c = _local_index(y, tg)
        if j == m - 1:
            if (y & ~masks[j]) != (ym & ~masks[j]):
                return 0j
            return complex(g[_local_index(ym, tg), c])
        total = 0j
        for r in range(dims[j]):
            elem = g[r, c]
            if elem != 0:
                total += elem * visit(j + 1, _scatter(y, tg, r))
        return total

    return complex(visit(0, y0))


def _gray_subsets(n):
    """Yield ``(flipped_column, added, subset_size)`` along a Gray code."""
    size = 0
    prev = 0
    for i in range(1, 2 ** n):
        g = i ^ (i >> 1)
        diff = g ^ prev
        col = diff.bit_length() - 1
        added = bool(g & diff)
        size += 1 if added else -1
        prev = g
        yield col, added, size


def permanent_mod(matrix, q):
    """Ryser's inclusion-exclusion formula over F_q with a Gray-code walk."""
    a = [[int(v) % q for v in row] for row in np.asarray(matrix, dtype=object)]
    n = len(a)
    if n == 0:
        return 1 % q
    rowsums = [0] * n
    total = 0
    for col, added, size in _gray_subsets(n):
        if added:
            for i in range(n):
                rowsums[i] = (rowsums[i] + a[i][col]) % q
        else:
            for i in range(n):
                rowsums[i] = (rowsums[i] - a[i][col]) % q
        prod = 1
        for s in rowsums:
            prod = prod * s % q
            if prod == 0:
                break
        total = (total - prod) % q if size % 2 else (total + prod) % q
    return total if n % 2 == 0 else (-total) % q


def permanent_complex(matrix):
    """Ryser's formula in complex double precision."""
    a = np.asarray(matrix, dtype=np.complex128)
    n = a.shape[0]
    if n == 0:
        return 1 + 0j
    rowsums = np.zeros(n, dtype=np.complex128)
    total = 0j
    for col, added, size in _gray_subsets(n):
        if added:
            rowsums += a[:, col]
        else:
            rowsums -= a[:, col]
        prod = np.prod(rowsums)
        total += -prod if size % 2 else prod
    return complex(total if n % 2 == 0 else -total)


def rref_mod(matrix, q):
    """Reduced row echelon form over F_q.

    Returns ``(R, pivots)`` where ``pivots`` lists the pivot column of each
    nonzero row of ``R``.
    """
    if q < _INT64_SAFE_MODULUS:
        a = np.array(matrix, dtype=np.int64) % q
    else:
        a = np.array([[int(v) % q for v in row] for row in matrix], dtype=object)
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        inv = pow(int(a[r, c]), -1, q)
        a[r] = (a[r] * inv) % q
        factors = a[:, c].copy()
        factors[r] = 0
        a -= (factors[:, None] * a[r][None, :]) % q
        a %= q
        pivots.append(c)
        r += 1
    return a, pivots
