"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Loops run over time (or DP end point) and vectorize across replicas (or
DP start points), so the fallback stays usable at moderate sizes.
"""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
MASK53 = np.uint64((1 << 53) - 1)
TWO_M53 = 2.0 ** -53
ONE_MINUS = 1.0 - 2.0 ** -53

_S30, _S27, _S31, _S63 = (np.uint64(s) for s in (30, 27, 31, 63))
_ONE = np.uint64(1)


def splitmix_next(state):
    """Advance ``state`` (uint64 array, in place) and return the outputs."""
    state += GOLDEN
    z = state.copy()
    z ^= z >> _S30
    z *= MIX1
    z ^= z >> _S27
    z *= MIX2
    z ^= z >> _S31
    return z


def doubling_chunk(k, rs, out):
    C = out.shape[1]
    for t in range(C):
        out[:, t] = k.astype(np.float64) * TWO_M53
        bit = splitmix_next(rs) >> _S63
        k[:] = ((k << _ONE) & MASK53) | bit


def lsv_chunk(y, rs, gamma, out):
    C = out.shape[1]
    for t in range(C):
        out[:, t] = y
        bit = (splitmix_next(rs) >> _S63).astype(np.float64)
        left = y < 0.5
        nxt = np.where(left, y * (1.0 + np.power(2.0 * y, gamma)), 2.0 * y - 1.0)
        nxt += bit * TWO_M53
        nxt[nxt >= 1.0] = ONE_MINUS
        y[:] = nxt


def qvar_first(X, q):
    N = X.shape[0]
    if N < 2:
        return 0.0
    best = np.zeros(N)
    for j in range(1, N):
        d = X[j] - X[:j]
        dist = np.sqrt(np.sum(d * d, axis=1))
        best[j] = max(0.0, np.max(best[:j] + dist ** q))
    return float(best[-1])


def qvar_second(X, M, Xt, Mt, q):
    N = X.shape[0]
    if N < 2:
        return 0.0
    best = np.zeros(N)
    for j in range(1, N):
        inc = M[j] - M[:j] - X[:j, :, None] * (X[j] - X[:j])[:, None, :]
        inc_t = Mt[j] - Mt[:j] - Xt[:j, :, None] * (Xt[j] - Xt[:j])[:, None, :]
        e = inc - inc_t
        dist = np.sqrt(np.sum(e * e, axis=(1, 2)))
        best[j] = max(0.0, np.max(best[:j] + dist ** q))
    return float(best[-1])
