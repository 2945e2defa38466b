import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctlpinn.autodiff import (
    AdjointRecorder,
    Jet,
    grad_params,
    jet_apply,
    jet_seed,
    kmul,
    kunary,
    mlp_forward_jet,
)
from ctlpinn.errors import ConfigurationError, NumericError
from ctlpinn.multiindex import JetSpace, coeff_count, index_of, multi_indices
from ctlpinn.network import MlpSpec, init_params, unpack_params

from conftest import fd_partial, fd_partial_richardson, rel_err


# ---------------------------------------------------------------------------
# multi-index layout


def test_enumeration_is_graded_lex():
    assert multi_indices(2, 2) == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert coeff_count(4, 4) == 70
    assert index_of(1, 2, (2,)) == 2


# ---------------------------------------------------------------------------
# seeds and elementary operations


def test_seed_scalar():
    (j,) = jet_seed([3.0], 2)
    assert j.coeffs.tolist() == [3.0, 1.0, 0.0]


def test_seed_two_vars():
    x, y = jet_seed([1.0, 2.0], 1)
    assert x.coeffs.tolist() == [1.0, 1.0, 0.0]
    assert y.coeffs.tolist() == [2.0, 0.0, 1.0]


def test_seed_order_out_of_range():
    with pytest.raises(ConfigurationError):
        jet_seed([0.0], 5)
    with pytest.raises(ConfigurationError):
        jet_seed([0.0], 0)


def test_square_derivatives():
    (j,) = jet_seed([3.0], 2)
    sq = jet_apply("mul", j, j)
    assert sq.coeffs.tolist() == [9.0, 6.0, 2.0]


def test_tanh_at_zero():
    (j,) = jet_seed([0.0], 2)
    t = jet_apply("tanh", j)
    assert t.coeffs.tolist() == [0.0, 1.0, 0.0]


def test_product_rule_two_vars():
    x, y = jet_seed([1.0, 2.0], 1)
    p = jet_apply("*", x, y)
    assert p.value == 2.0
    assert p.derivative((1, 0)) == 2.0
    assert p.derivative((0, 1)) == 1.0


def test_division_by_zero_value():
    x, y = jet_seed([1.0, 0.0], 2)
    with pytest.raises(NumericError):
        jet_apply("/", x, y)


def test_mixed_order_dim_rejected():
    (a,) = jet_seed([1.0], 2)
    b, _ = jet_seed([1.0, 2.0], 2)
    with pytest.raises(ConfigurationError):
        jet_apply("+", a, b)


def test_abs_convention():
    (j,) = jet_seed([-2.0], 2)
    a = jet_apply("abs", j)
    assert a.coeffs.tolist() == [2.0, -1.0, 0.0]
    (z,) = jet_seed([0.0], 2)
    assert jet_apply("abs", z).coeffs.tolist() == [0.0, 0.0, 0.0]


def test_power_integer_and_fractional():
    (j,) = jet_seed([2.0], 3)
    cubed = jet_apply("power", j, power=3)
    assert cubed.coeffs.tolist() == [8.0, 12.0, 12.0, 6.0]
    frac = jet_apply("power", j, power=4.0 / 3.0)
    assert rel_err(frac.value, 2.0 ** (4.0 / 3.0)) < 1e-14
    assert rel_err(frac.derivative((1,)), (4.0 / 3.0) * 2.0 ** (1.0 / 3.0)) < 1e-13


# ---------------------------------------------------------------------------
# FD oracle for elementary chains (module invariant)


def _chain(pts):
    # scalar chain exercising *, /, tanh, sin, exp on a batch (M, 2)
    x, y = pts[:, 0], pts[:, 1]
    return np.tanh(x * y) + np.sin(x) * np.exp(0.3 * y) / (2.0 + x * x)


def _chain_jet(point, order):
    x, y = jet_seed(point, order)
    t = jet_apply("tanh", jet_apply("*", x, y))
    s = jet_apply("*", jet_apply("sin", x), jet_apply("exp", jet_apply("*", y, 0.3)))
    den = jet_apply("+", jet_apply("*", x, x), 2.0)
    return jet_apply("+", t, jet_apply("/", s, den))


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_chain_matches_fd(order, rng):
    tol = 1e-6 if order <= 2 else 1e-4
    # steps balance truncation against roundoff per derivative order;
    # 3rd/4th order differences get Richardson extrapolation on top
    h = {1: 1e-5, 2: 2e-4, 3: 2e-3, 4: 4e-3}[order]
    differ = fd_partial if order <= 2 else fd_partial_richardson
    for _ in range(5):
        point = rng.uniform(-2.0, 2.0, size=2)
        jet = _chain_jet(point, order)
        scale = max(np.max(np.abs(jet.coeffs)), 1.0)
        for alpha in multi_indices(2, order):
            if sum(alpha) == 0 or sum(alpha) != order:
                continue
            want = differ(_chain, point, alpha, h)
            got = jet.derivative(alpha)
            assert abs(got - want) / max(abs(want), scale * 1e-3) < tol, (alpha, got, want)


def test_associativity_orders():
    x, y = jet_seed([0.7, -1.3], 3)
    a = jet_apply("*", jet_apply("*", x, y), x)
    b = jet_apply("*", x, jet_apply("*", y, x))
    np.testing.assert_allclose(a.coeffs, b.coeffs, rtol=1e-12, atol=1e-15)
    c = jet_apply("+", jet_apply("+", x, y), x)
    d = jet_apply("+", x, jet_apply("+", y, x))
    np.testing.assert_allclose(c.coeffs, d.coeffs, rtol=1e-12, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(-1.5, 1.5), st.floats(-1.5, 1.5),
    st.sampled_from(["tanh", "sin", "cos", "exp", "sigmoid"]),
)
def test_unary_value_and_slope_consistent(xv, yv, op):
    # value coefficient equals the plain function; first derivative obeys
    # the chain rule with the seed's unit tangent
    (j,) = jet_seed([xv], 2)
    prod = jet_apply("*", j, j)
    out = jet_apply(op, prod)
    f = {"tanh": np.tanh, "sin": np.sin, "cos": np.cos, "exp": np.exp,
         "sigmoid": lambda v: 1 / (1 + np.exp(-v))}[op]
    assert rel_err(out.value, float(f(xv * xv))) < 1e-12


def test_determinism_bitwise():
    point = [0.4, -0.9]
    a = _chain_jet(point, 4).coeffs
    b = _chain_jet(point, 4).coeffs
    assert a.tobytes() == b.tobytes()


# ---------------------------------------------------------------------------
# network jets vs finite differences


def _net_value_fn(params, spec, out_idx=0):
    from ctlpinn.network import forward

    def f(pts):
        vals = forward(params, spec, pts)
        return vals[:, out_idx]

    return f


def test_single_neuron_jet():
    spec = MlpSpec((1, 1, 1), seed=0)
    params = np.array([1.0, 0.0, 1.0, 0.0])  # w1, b1, w2, b2
    jets = mlp_forward_jet(params, spec, [0.0], 2)
    assert jets[0].coeffs.tolist() == [0.0, 1.0, 0.0]


def test_zero_params_zero_jet():
    spec = MlpSpec((2, 3, 1), seed=0)
    params = np.zeros(13)
    jets = mlp_forward_jet(params, spec, [0.3, -0.7], 2)
    assert np.all(jets[0].coeffs == 0.0)


def test_mlp_jet_order1_matches_fd(rng):
    spec = MlpSpec((2, 8, 8, 1), seed=3)
    params = init_params(spec)
    point = rng.uniform(-1.0, 1.0, size=2)
    jets = mlp_forward_jet(params, spec, point, 1)
    f = _net_value_fn(params, spec)
    for alpha in [(1, 0), (0, 1)]:
        want = fd_partial(f, point, alpha, 1e-5)
        assert rel_err(jets[0].derivative(alpha), want) < 1e-6


def test_mlp_jet_dim_mismatch():
    spec = MlpSpec((2, 4, 1), seed=0)
    with pytest.raises(ConfigurationError):
        mlp_forward_jet(init_params(spec), spec, [1.0], 1)


# ---------------------------------------------------------------------------
# recorder: replay, gradients


def test_recorder_replay_bitwise():
    rec = AdjointRecorder()
    theta = rec.leaf(np.array(1.3))
    loss = theta * theta + rec.unary("sin", theta)
    before = loss.value.copy()
    after = rec.replay(loss)
    assert before.tobytes() == after.tobytes()


def test_grad_quadratic():
    rec = AdjointRecorder()
    theta = rec.leaf(np.array(1.0))
    loss = theta * theta
    g = grad_params(loss, rec, [theta])
    assert g.tolist() == [2.0]


def test_grad_through_jet_coefficient(rng):
    # loss = (d/dx tanh(theta * x))^2 at x=1, theta=0.5; matches FD in theta
    space = JetSpace.full(1, 1)

    def loss_of(theta_val):
        rec = AdjointRecorder()
        theta = rec.leaf(np.array(theta_val))
        seeds = rec.constant(space.seed(np.array([[1.0]])))
        # theta enters as a constant-in-x jet: theta * x via the Leibniz product
        e0 = np.zeros((1, 1, 2))
        e0[..., 0] = 1.0
        w = rec.emit("mul", (theta, rec.constant(e0)))
        prod = rec.jet_mul(w, seeds, space)
        t = rec.jet_unary("tanh", prod, space)
        dx = rec.extract(t, 1)
        loss = rec.mean(dx * dx)
        return loss, rec, theta

    loss, rec, theta = loss_of(0.5)
    g = grad_params(loss, rec, [theta])[0]
    eps = 1e-6
    lp = loss_of(0.5 + eps)[0].value
    lm = loss_of(0.5 - eps)[0].value
    fd = (lp - lm) / (2 * eps)
    assert rel_err(g, float(fd)) < 1e-6


def test_grad_params_flags_nan():
    rec = AdjointRecorder()
    theta = rec.leaf(np.array([1.0, 0.0]))
    loss = rec.sum(rec.unary("sqrt", theta))  # d sqrt/dx at 0 -> inf
    with pytest.raises(NumericError) as err:
        grad_params(loss, rec, [theta])
    assert "1" in str(err.value)


def test_mlp_param_grad_matches_fd(rng):
    # random small net; loss mixes value and derivative coefficients
    spec = MlpSpec((2, 4, 1), seed=9)
    params = init_params(spec)
    pts = rng.uniform(-1.0, 1.0, size=(5, 2))

    space = JetSpace.full(2, 2)

    def loss_value(pvec):
        from ctlpinn.autodiff import mlp_apply_jets

        rec = AdjointRecorder()
        layers = [(rec.leaf(w), rec.leaf(b)) for w, b in unpack_params(pvec, spec)]
        seeds = rec.constant(space.seed(pts))
        out = rec.extract(mlp_apply_jets(rec, layers, "tanh", seeds, space), slice(0, None))
        val = rec.extract(out, 0)
        dxx = rec.extract(out, index_of(2, 2, (2, 0)))
        r = val + dxx * dxx
        loss = rec.mean(r * r)
        leaves = [n for pair in layers for n in pair]
        return float(loss.value), grad_params(loss, rec, leaves)

    base, grad = loss_value(params)
    for i in rng.choice(len(params), size=6, replace=False):
        eps = 1e-6
        up = params.copy(); up[i] += eps
        dn = params.copy(); dn[i] -= eps
        fd = (loss_value(up)[0] - loss_value(dn)[0]) / (2 * eps)
        assert rel_err(grad[i], fd, floor=1e-7) < 1e-5


# ---------------------------------------------------------------------------
# batched kernels behave like the scalar API


def test_kernels_batch_consistency(rng):
    space = JetSpace.full(2, 3)
    pts = rng.uniform(-1.5, 1.5, size=(7, 2))
    seeds = space.seed(pts)
    x, y = seeds[:, 0], seeds[:, 1]
    prod = kmul(x, y, space)
    tan, _ = kunary("tanh", prod, space)
    for i in range(7):
        sx, sy = jet_seed(pts[i], 3)
        want = jet_apply("tanh", jet_apply("*", sx, sy))
        np.testing.assert_array_equal(tan[i], want.coeffs)


def test_reduced_space_matches_full(rng):
    # a downward-closed subset computes the retained coefficients exactly
    full = JetSpace.full(4, 2)
    reduced = JetSpace.reduced(4, ((2, 0, 0, 0), (0, 2, 0, 0), (0, 0, 2, 0), (0, 0, 0, 2)))
    assert reduced.size == 9 < full.size == 15
    pts = rng.uniform(-1.0, 1.0, size=(5, 4))
    sf, sr = full.seed(pts), reduced.seed(pts)
    pf, _ = kunary("tanh", kmul(sf[:, 0], sf[:, 3], full), full)
    pr, _ = kunary("tanh", kmul(sr[:, 0], sr[:, 3], reduced), reduced)
    for alpha in reduced.alphas:
        np.testing.assert_array_equal(
            pr[..., reduced.index_of(alpha)], pf[..., full.index_of(alpha)])


def test_jet_validates_length():
    with pytest.raises(ConfigurationError):
        Jet(2, 1, np.zeros(4))
