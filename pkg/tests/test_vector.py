import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvsolve import vector as nv
from nvsolve.errors import CompatibilityError, IllegalInputError, RepresentationError

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
positive = st.floats(min_value=1e-3, max_value=1e3)


def test_linear_sum_identity_and_formula():
    z = nv.serial(np.zeros(2))
    nv.linear_sum(1.0, nv.serial([3.0, -1.0]), 0.0, nv.serial([9.0, 9.0]), z)
    assert z.to_array().tolist() == [3.0, -1.0]
    nv.linear_sum(2.0, nv.serial([1.0, 0.0]), 3.0, nv.serial([0.0, 1.0]), z)
    assert z.to_array().tolist() == [2.0, 3.0]


def test_linear_sum_matches_loop(rng):
    x, y = rng.normal(size=100), rng.normal(size=100)
    a, b = rng.normal(), rng.normal()
    z = nv.serial(np.empty(100))
    nv.linear_sum(a, nv.serial(x), b, nv.serial(y), z)
    expected = [a * x[i] + b * y[i] for i in range(100)]
    assert z.to_array().tolist() == expected


def test_linear_sum_aliasing():
    x = nv.serial([1.0, 2.0])
    nv.linear_sum(2.0, x, 1.0, x, x)
    assert x.to_array().tolist() == [3.0, 6.0]


def test_max_norm_examples(rng):
    assert nv.max_norm(nv.serial([1.0, -4.0, 2.0])) == 4.0
    assert nv.max_norm(nv.serial([0.0, 0.0, 0.0])) == 0.0
    v = rng.normal(size=1000)
    best = 0.0
    for e in v:
        best = max(best, abs(e))
    assert nv.max_norm(nv.serial(v)) == best


def test_wrms_norm_examples(rng):
    assert nv.wrms_norm(nv.serial([1.0] * 4), nv.serial([1.0] * 4)) == 1.0
    assert nv.wrms_norm(nv.serial([2.0]), nv.serial([0.5])) == 1.0
    x, w = rng.normal(size=257), rng.uniform(0.1, 2.0, size=257)
    acc = 0.0
    for i in range(257):
        acc += (x[i] * w[i]) ** 2
    assert nv.wrms_norm(nv.serial(x), nv.serial(w)) == pytest.approx(math.sqrt(acc / 257), rel=1e-15)


def test_reductions_match_loop_oracles(rng):
    x, y, w = rng.normal(size=1000), rng.normal(size=1000), rng.uniform(0.1, 3, size=1000)
    vx, vy, vw = nv.serial(x), nv.serial(y), nv.serial(w)
    dot = l1 = wl2 = 0.0
    for i in range(1000):
        dot += x[i] * y[i]
        l1 += abs(x[i])
        wl2 += (x[i] * w[i]) ** 2
    assert nv.dot_product(vx, vy) == pytest.approx(dot, rel=1e-14)
    assert nv.l1_norm(vx) == pytest.approx(l1, rel=1e-14)
    assert nv.weighted_l2_norm(vx, vw) == pytest.approx(math.sqrt(wl2), rel=1e-14)
    assert nv.min_element(vx) == x.min()


def test_elementwise_ops():
    x = nv.serial([1.0, -2.0, 4.0])
    z = nv.clone(x)
    nv.abs(x, z)
    assert z.to_array().tolist() == [1.0, 2.0, 4.0]
    nv.invert(x, z)
    assert z.to_array().tolist() == [1.0, -0.5, 0.25]
    nv.add_constant(x, 1.0, z)
    assert z.to_array().tolist() == [2.0, -1.0, 5.0]
    nv.compare_threshold(2.0, x, z)
    assert z.to_array().tolist() == [0.0, 1.0, 1.0]
    nv.quotient(x, nv.serial([2.0, 2.0, 2.0]), z)
    assert z.to_array().tolist() == [0.5, -1.0, 2.0]
    assert nv.min_quotient(x, nv.serial([1.0, 0.0, 2.0])) == 1.0


def test_invert_with_test_reports_zero():
    z = nv.serial(np.zeros(2))
    assert nv.invert_with_test(nv.serial([2.0, 4.0]), z)
    assert not nv.invert_with_test(nv.serial([2.0, 0.0]), z)


def test_constraint_mask():
    c = nv.serial([2.0, 1.0, -1.0, -2.0, 0.0])
    m = nv.clone(c)
    assert nv.constraint_mask(c, nv.serial([1.0, 0.0, 0.0, -1.0, 5.0]), m)
    assert not nv.constraint_mask(c, nv.serial([0.0, -1.0, 1.0, 0.0, 5.0]), m)
    assert m.to_array().tolist() == [1.0, 1.0, 1.0, 1.0, 0.0]


def test_clone_independence(rng):
    x = nv.serial([1.0, 2.0])
    y = nv.clone(x)
    x.data[0] = 9.0
    assert y.to_array().tolist() == [1.0, 2.0]
    base = rng.normal(size=50)
    v = nv.serial(base.copy())
    c = nv.clone(v)
    for _ in range(1000):
        v.data[rng.integers(50)] = rng.normal()
    assert c.to_array().tolist() == base.tolist()


def test_clone_preserves_tag():
    assert nv.clone(nv.threaded([1.0, 2.0])).backend == nv.THREADED
    assert nv.clone(nv.pylist([1.0])).backend.family == "pylist"


def test_custom_clone_dispatches():
    calls = []
    ops = nv.VectorOpsTable(**{**{n: getattr(nv.LIST_OPS, n) for n in nv.OPERATIONS},
                               "clone": lambda p: calls.append(1) or list(p),
                               "check": nv.LIST_OPS.check, "family": "counting"})
    v = nv.make_custom(ops, [1.0, 2.0])
    nv.clone(v)
    assert calls == [1]
    assert nv.unwrap(v) is v.data


def test_compatible():
    assert nv.compatible(nv.serial(np.zeros(5)), nv.serial(np.zeros(5)))
    assert not nv.compatible(nv.serial(np.zeros(5)), nv.serial(np.zeros(6)))
    assert not nv.compatible(nv.serial(np.zeros(5)), nv.pylist([0.0] * 5))
    assert not nv.compatible(nv.serial(np.zeros(5)), nv.threaded(np.zeros(5)))


def test_mixed_operands_raise():
    with pytest.raises(CompatibilityError):
        nv.linear_sum(1.0, nv.serial([1.0]), 1.0, nv.serial([1.0, 2.0]), nv.serial([0.0]))
    with pytest.raises(CompatibilityError):
        nv.dot_product(nv.serial([1.0]), nv.pylist([1.0]))
    with pytest.raises(CompatibilityError):
        nv.scale(2.0, nv.threaded([1.0]), nv.serial([1.0]))


def test_empty_vector_norms_rejected():
    e = nv.serial(np.zeros(0))
    assert len(e) == 0
    with pytest.raises(IllegalInputError):
        nv.max_norm(e)
    with pytest.raises(IllegalInputError):
        nv.wrms_norm(e, e)


def test_serial_data_representation():
    assert nv.serial_data(nv.threaded([1.0])).tolist() == [1.0]
    with pytest.raises(RepresentationError):
        nv.serial_data(nv.pylist([1.0]))


def test_serial_wraps_without_copy():
    a = np.array([1.0, 2.0])
    v = nv.serial(a)
    a[0] = 5.0
    assert v.data[0] == 5.0


def _all_ops(make, x, y, w):
    X, Y, W = make(x), make(y), make(w)
    out = {}
    z = nv.clone(X)
    for name, fn in [
        ("linear_sum", lambda: nv.linear_sum(0.3, X, -1.7, Y, z)),
        ("product", lambda: nv.product(X, Y, z)),
        ("quotient", lambda: nv.quotient(X, W, z)),
        ("scale", lambda: nv.scale(2.5, X, z)),
        ("abs", lambda: nv.abs(X, z)),
        ("invert", lambda: nv.invert(W, z)),
        ("add_constant", lambda: nv.add_constant(X, 0.75, z)),
        ("const_fill", lambda: nv.const_fill(3.25, z)),
        ("compare_threshold", lambda: nv.compare_threshold(0.5, X, z)),
    ]:
        fn()
        out[name] = z.to_array().tolist()
    out["invert_with_test"] = (nv.invert_with_test(X, z), z.to_array().tolist())
    out["constraint_mask"] = nv.constraint_mask(make(np.sign(np.round(y))), X, z), z.to_array().tolist()
    out["dot"] = nv.dot_product(X, Y)
    out["max"] = nv.max_norm(X)
    out["wrms"] = nv.wrms_norm(X, W)
    out["wl2"] = nv.weighted_l2_norm(X, W)
    out["l1"] = nv.l1_norm(X)
    out["min"] = nv.min_element(X)
    out["minq"] = nv.min_quotient(X, W)
    out["clone"] = nv.clone(X).to_array().tolist()
    return out


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
@settings(max_examples=120, deadline=None)
@given(st.integers(1, 40).flatmap(
    lambda n: st.tuples(st.lists(finite, min_size=n, max_size=n), st.lists(finite, min_size=n, max_size=n),
                        st.lists(positive, min_size=n, max_size=n))))
def test_custom_and_threaded_match_serial_bitwise(data):
    x, y, w = (np.array(d) for d in data)
    ref = _all_ops(nv.serial, x, y, w)
    assert _all_ops(nv.pylist, x, y, w) == ref
    assert _all_ops(lambda a: nv.threaded(a, nchunks=3), x, y, w)["linear_sum"] == ref["linear_sum"]


def test_threaded_reductions_close_to_serial(rng):
    x = rng.normal(size=10000)
    t = nv.threaded(x, nchunks=4, grain=1)
    assert nv.dot_product(t, t) == pytest.approx(nv.dot_product(nv.serial(x), nv.serial(x)), rel=1e-13)
    z = nv.clone(t)
    nv.linear_sum(2.0, t, 1.0, t, z)
    assert np.array_equal(z.data, 3.0 * x)
