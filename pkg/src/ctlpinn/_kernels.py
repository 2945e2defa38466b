"""Hot inner loops for jet arithmetic, JIT-compiled when numba is present.

Every kernel accumulates in a fixed, explicitly written order (table row
order, input-neuron order), so results are bitwise identical between the
numba and numpy implementations and independent of batch size.  The
numpy fallbacks keep the package importable without numba at several
times the cost.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn
        return deco


@njit(cache=True)
def _table_product_loop(x, y, i_x, i_y, i_acc, factor, out):
    m_count = x.shape[0]
    t_count = i_x.shape[0]
    for m in range(m_count):
        for t in range(t_count):
            out[m, i_acc[t]] += factor[t] * x[m, i_x[t]] * y[m, i_y[t]]


def table_product(x: np.ndarray, y: np.ndarray, i_x, i_y, i_acc, factor,
                  starts, acc_size: int) -> np.ndarray:
    """out[..., i_acc[t]] += factor[t] * x[..., i_x[t]] * y[..., i_y[t]].

    `starts` are reduceat segment offsets for the numpy path (the table
    rows are sorted by `i_acc`, so both paths sum in identical order).
    """
    if x.shape[:-1] != y.shape[:-1]:
        p = x[..., i_x] * y[..., i_y]
        p *= factor
        return np.add.reduceat(p, starts, axis=-1)
    lead = x.shape[:-1]
    out = np.zeros(lead + (acc_size,), dtype=np.float64)
    if HAVE_NUMBA:
        _table_product_loop(
            np.ascontiguousarray(x).reshape(-1, x.shape[-1]),
            np.ascontiguousarray(y).reshape(-1, y.shape[-1]),
            i_x, i_y, i_acc, factor,
            out.reshape(-1, acc_size),
        )
    else:
        p = x[..., i_x] * y[..., i_y]
        p *= factor
        np.add.reduceat(p, starts, axis=-1, out=out)
    return out


@njit(cache=True)
def _linear_loop(a, weight, out):
    n_pts, n_in, n_c = a.shape
    n_out = weight.shape[0]
    for n in range(n_pts):
        for o in range(n_out):
            for j in range(n_in):
                w = weight[o, j]
                for c in range(n_c):
                    out[n, o, c] += w * a[n, j, c]


def linear_forward(weight: np.ndarray, bias: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Affine map over the neuron axis of a jet batch (N, n_in, C)."""
    n, n_in, c = a.shape
    out = np.zeros((n, weight.shape[0], c), dtype=np.float64)
    if HAVE_NUMBA:
        _linear_loop(np.ascontiguousarray(a), weight, out)
    else:
        tmp = np.empty_like(out)
        for j in range(n_in):
            np.multiply(a[:, j, None, :], weight[None, :, j, None], out=tmp)
            out += tmp
    out[:, :, 0] += bias
    return out


@njit(cache=True)
def _unary_compose_loop(a2, series2, i_out, i_a, i_b, factor, order, out2, w2, compute_w):
    m_count, n_c = a2.shape
    t_count = i_out.shape[0]
    ghat = np.empty(n_c)
    power = np.empty(n_c)
    nxt = np.empty(n_c)
    for m in range(m_count):
        for c in range(n_c):
            ghat[c] = a2[m, c]
        ghat[0] = 0.0
        for c in range(n_c):
            power[c] = ghat[c]
        out2[m, 0] = series2[0, m]
        if compute_w:
            w2[m, 0] = series2[1, m]
        for k in range(1, order + 1):
            sk = series2[k, m]
            skw = (k + 1) * series2[k + 1, m] if compute_w else 0.0
            for c in range(1, n_c):  # power[0] == 0 for k >= 1
                out2[m, c] += sk * power[c]
                if compute_w:
                    w2[m, c] += skw * power[c]
            if k < order:
                for c in range(n_c):
                    nxt[c] = 0.0
                for t in range(t_count):
                    nxt[i_out[t]] += factor[t] * power[i_a[t]] * ghat[i_b[t]]
                for c in range(n_c):
                    power[c] = nxt[c]


def unary_compose(a: np.ndarray, series: np.ndarray, mul_tab, order: int,
                  need_w: bool):
    """Truncated Taylor composition given the coefficient series.

    ``series[k]`` holds f^(k)(value)/k!; the returned ``w`` is the jet of
    f' (the tangent weight for the reverse sweep), or None if not needed.
    """
    i_out, i_a, i_b, factor, starts = mul_tab
    out = np.zeros_like(a)
    w = np.zeros_like(a) if need_w else out  # dummy target when unused
    if HAVE_NUMBA:
        lead = a.shape[:-1]
        _unary_compose_loop(
            np.ascontiguousarray(a).reshape(-1, a.shape[-1]),
            np.ascontiguousarray(series).reshape(series.shape[0], -1),
            i_out, i_a, i_b, factor, order,
            out.reshape(-1, a.shape[-1]), w.reshape(-1, a.shape[-1]),
            need_w,
        )
    else:
        out[..., 0] = series[0]
        if need_w:
            w[..., 0] = series[1]
        if order >= 1:
            ghat = a.copy()
            ghat[..., 0] = 0.0
            power = ghat
            for k in range(1, order + 1):
                out += series[k][..., None] * power
                if need_w:
                    w += ((k + 1) * series[k + 1])[..., None] * power
                if k < order:
                    p = power[..., i_a] * ghat[..., i_b]
                    p *= factor
                    power = np.add.reduceat(p, starts, axis=-1)
    return out, (w if need_w else None)


@njit(cache=True)
def _linear_adj_loop(adj, weight, a, adj_w, adj_a):
    n_pts, n_out, n_c = adj.shape
    n_in = weight.shape[1]
    for n in range(n_pts):
        for o in range(n_out):
            for j in range(n_in):
                w = weight[o, j]
                acc = 0.0
                for c in range(n_c):
                    g = adj[n, o, c]
                    acc += g * a[n, j, c]
                    adj_a[n, j, c] += w * g
                adj_w[o, j] += acc


def linear_backward(adj: np.ndarray, weight: np.ndarray, a: np.ndarray,
                    need_w: bool, need_a: bool):
    """Adjoints of the affine map; gradient path only (run-to-run stable)."""
    if HAVE_NUMBA:
        adj_w = np.zeros_like(weight)
        adj_a = np.zeros_like(a)
        _linear_adj_loop(np.ascontiguousarray(adj), weight, np.ascontiguousarray(a),
                         adj_w, adj_a)
        return (adj_w if need_w else None), (adj_a if need_a else None)
    adj_w = np.einsum("noc,nwc->ow", adj, a) if need_w else None
    adj_a = np.einsum("ow,noc->nwc", weight, adj) if need_a else None
    return adj_w, adj_a
