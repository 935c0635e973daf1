"""Op contracts and gradient checks (64-bit verification mode)."""

import numpy as np
import pytest

from textcomp import diffcore as dc


def test_sigmoid_at_zero_value_and_derivative():
    x = dc.parameter(np.float64(0.0))
    with dc.tape():
        y = dc.sigmoid(x)
        g = dc.backward(y, params=[x])
    assert float(y.data) == 0.5
    assert abs(g[id(x)] - 0.25) < 1e-15


def test_add_zeros_bit_exact(rng):
    x = rng.normal(size=(5, 7)).astype(np.float32)
    out = dc.add(dc.constant(x), dc.constant(np.zeros_like(x)))
    assert np.array_equal(out.data, x)


def test_mul_gradient_matches_hand_values_and_fd():
    x = dc.parameter(np.float64(2.0))
    y = dc.parameter(np.float64(3.0))
    with dc.tape():
        z = dc.mul(x, y)
        g = dc.backward(z, params=[x, y])
    assert float(g[id(x)]) == 3.0 and float(g[id(y)]) == 2.0
    err = dc.check_grad(lambda a, b: dc.mul(a, b), [x, y])
    assert err <= 1e-9


def test_elementwise_dispatch_and_shape_errors(rng):
    a = dc.constant(rng.normal(size=(3,)))
    b = dc.constant(rng.normal(size=(3,)))
    assert np.allclose(dc.elementwise("add", a, b).data, a.data + b.data)
    with pytest.raises(dc.ShapeError):
        dc.add(a, dc.constant(np.zeros(4)))
    with pytest.raises(ValueError):
        dc.elementwise("nope", a)


def test_nonfinite_output_is_an_error():
    big = dc.constant(np.array([1e308]))
    with pytest.raises(dc.NonFiniteError):
        dc.mul(big, big)


def test_matmul_identity_hand_case_and_gradcheck(rng):
    m = rng.normal(size=(3, 3))
    assert np.array_equal(dc.matmul(dc.constant(np.eye(3)), dc.constant(m)).data, np.eye(3) @ m)
    prod = dc.matmul(dc.constant(np.array([[1.0, 2], [3, 4]])),
                     dc.constant(np.array([[5.0, 6], [7, 8]])))
    assert np.array_equal(prod.data, np.array([[19.0, 22], [43, 50]]))
    a = dc.parameter(rng.normal(size=(3, 4)))
    b = dc.parameter(rng.normal(size=(4, 2)))
    assert dc.check_grad(lambda a, b: dc.sum_all(dc.matmul(a, b)), [a, b]) <= 1e-7


def test_conv2d_identity_kernel_and_box_oracle(rng):
    img = rng.normal(size=(1, 5, 5))
    ident = np.ones((1, 1, 1, 1))
    out = dc.conv2d(dc.constant(img), dc.constant(ident), stride=1, pad=0)
    assert np.array_equal(out.data, img)

    ramp = np.arange(25, dtype=np.float64).reshape(1, 5, 5)
    box = np.ones((1, 1, 3, 3))
    got = dc.conv2d(dc.constant(ramp), dc.constant(box), stride=1, pad=1).data
    expect = np.zeros((1, 5, 5))
    for oy in range(5):
        for ox in range(5):
            acc = 0.0
            for i in range(3):
                for j in range(3):
                    y, x = oy + i - 1, ox + j - 1
                    if 0 <= y < 5 and 0 <= x < 5:
                        acc += ramp[0, y, x]
            expect[0, oy, ox] = acc
    assert np.allclose(got, expect, rtol=0, atol=1e-12)


def test_conv2d_gradcheck_and_shape_contract(rng):
    x = dc.parameter(rng.normal(size=(2, 8, 8)))
    k = dc.parameter(rng.normal(size=(3, 2, 3, 3)))
    err = dc.check_grad(lambda x, k: dc.sumsq(dc.conv2d(x, k, stride=1, pad=1)), [x, k])
    assert err <= 1e-6
    with pytest.raises(dc.ShapeError):
        dc.conv2d(dc.constant(np.zeros((2, 8, 8))), dc.constant(np.zeros((3, 2, 2, 2))))
    with pytest.raises(dc.ShapeError):
        # (8+0-3) % 2 != 0: non-integral output extent
        dc.conv2d(dc.constant(np.zeros((2, 8, 8))), dc.constant(np.zeros((3, 2, 3, 3))), stride=2)


def test_log_softmax_contract(rng):
    out = dc.log_softmax(dc.constant(np.zeros((1, 4)))).data
    assert np.allclose(out, np.log(1 / 4), atol=1e-15)
    big = dc.log_softmax(dc.constant(np.array([[1000.0, 0.0]]))).data
    assert abs(big[0, 0]) < 1e-12 and big[0, 1] <= -999.9
    rows = dc.log_softmax(dc.constant(rng.normal(size=(20, 7)))).data
    assert np.allclose(np.exp(rows).sum(axis=1), 1.0, atol=1e-12)


def test_bilinear_identity_and_half_shift(rng):
    img = rng.normal(size=(1, 4, 6))
    yy, xx = np.mgrid[0:4, 0:6].astype(np.float64)
    ident = np.stack([xx, yy], axis=-1)
    assert np.array_equal(dc.bilinear_sample(dc.constant(img), dc.constant(ident)).data, img)

    ramp = np.tile(np.arange(6, dtype=np.float64), (4, 1))[None]
    shifted = np.stack([xx + 0.5, yy], axis=-1)
    out = dc.bilinear_sample(dc.constant(ramp), dc.constant(shifted)).data
    assert np.allclose(out[0, :, :5], ramp[0, :, :5] + 0.5, atol=1e-12)


def test_bilinear_grid_gradcheck_interior(rng):
    img = dc.parameter(rng.normal(size=(1, 6, 7)))
    grid = dc.parameter(rng.uniform(1.3, 4.6, size=(3, 4, 2)))
    err = dc.check_grad(lambda i, g: dc.sumsq(dc.bilinear_sample(i, g)), [img, grid])
    assert err <= 1e-5


def test_backward_contracts(rng):
    x = dc.parameter(rng.normal(size=(4, 3)))
    with dc.tape():
        loss = dc.sum_all(x)
        g = dc.backward(loss, params=[x])
    assert np.array_equal(g[id(x)], np.ones((4, 3)))

    a = dc.parameter(rng.normal(size=(3, 4)))
    b = dc.parameter(rng.normal(size=(4, 2)))
    err = dc.check_grad(lambda a, b: dc.sum_all(dc.sigmoid(dc.matmul(a, b))), [a, b])
    assert err <= 1e-6

    x2 = dc.parameter(np.float64(5.0))
    with dc.tape():
        l2 = dc.add(x2, x2)
        g2 = dc.backward(l2, params=[x2])
    assert float(g2[id(x2)]) == 2.0

    unreached = dc.parameter(np.zeros((2,)))
    with dc.tape():
        l3 = dc.sum_all(x)
        g3 = dc.backward(l3, params=[x, unreached])
    assert np.array_equal(g3[id(unreached)], np.zeros((2,)))

    with dc.tape():
        vec = dc.add(x, x)
        with pytest.raises(dc.ShapeError):
            dc.backward(vec)


def test_backward_requires_tape(rng):
    x = dc.parameter(np.float64(1.0))
    with dc.tape():
        y = dc.sigmoid(x)
    with pytest.raises(dc.DiffcoreError):
        dc.backward(dc.constant(np.float64(1.0)))


def test_dag_path_products_match_symbolic():
    # z = (x*y + x)^2: dz/dx = 2(xy+x)(y+1), dz/dy = 2(xy+x) x
    x = dc.parameter(np.float64(1.7))
    y = dc.parameter(np.float64(-0.6))
    with dc.tape():
        u = dc.mul(x, y)
        v = dc.add(u, x)
        z = dc.mul(v, v)
        g = dc.backward(z, params=[x, y])
    vv = 1.7 * -0.6 + 1.7
    assert abs(g[id(x)] - 2 * vv * (-0.6 + 1.0)) < 1e-12
    assert abs(g[id(y)] - 2 * vv * 1.7) < 1e-12


def test_ops_do_not_mutate_and_rerun_is_bit_identical(rng):
    x = rng.normal(size=(2, 3, 8, 8))
    k = rng.normal(size=(4, 3, 3, 3))
    xs = x.copy()
    ks = k.copy()
    xt, kt = dc.constant(x), dc.constant(k)
    out1 = dc.conv2d(xt, kt, 1, 1).data
    out2 = dc.conv2d(xt, kt, 1, 1).data
    assert np.array_equal(out1, out2)
    assert np.array_equal(x, xs) and np.array_equal(k, ks)


OPS_FOR_SWEEP = [
    ("add", lambda r: (lambda a, b: dc.sumsq(dc.add(a, b)),
                       [dc.parameter(r.normal(size=(3, 4))), dc.parameter(r.normal(size=(3, 4)))])),
    ("sub", lambda r: (lambda a, b: dc.sumsq(dc.sub(a, b)),
                       [dc.parameter(r.normal(size=(3, 4))), dc.parameter(r.normal(size=(3, 4)))])),
    ("mul", lambda r: (lambda a, b: dc.sumsq(dc.mul(a, b)),
                       [dc.parameter(r.normal(size=(3, 4))), dc.parameter(r.normal(size=(3, 4)))])),
    ("relu", lambda r: (lambda a: dc.sumsq(dc.relu(a)),
                        [dc.parameter(r.normal(size=(3, 4)) + 0.05)])),
    ("sigmoid", lambda r: (lambda a: dc.sumsq(dc.sigmoid(a)), [dc.parameter(r.normal(size=(3, 4)))])),
    ("tanh", lambda r: (lambda a: dc.sumsq(dc.tanh(a)), [dc.parameter(r.normal(size=(3, 4)))])),
    ("exp", lambda r: (lambda a: dc.sumsq(dc.exp(a)), [dc.parameter(r.normal(size=(3, 4)))])),
    ("scale", lambda r: (lambda a: dc.sumsq(dc.scale(a, 1.7)), [dc.parameter(r.normal(size=(3, 4)))])),
    ("matmul", lambda r: (lambda a, b: dc.sumsq(dc.matmul(a, b)),
                          [dc.parameter(r.normal(size=(3, 4))), dc.parameter(r.normal(size=(4, 2)))])),
    ("conv2d", lambda r: (lambda x, k: dc.sumsq(dc.conv2d(x, k, 1, 1)),
                          [dc.parameter(r.normal(size=(2, 6, 6))), dc.parameter(r.normal(size=(2, 2, 3, 3)))])),
    ("log_softmax", lambda r: (lambda a: dc.sumsq(dc.log_softmax(a)), [dc.parameter(r.normal(size=(4, 5)))])),
    ("bilinear", lambda r: (lambda i, g: dc.sumsq(dc.bilinear_sample(i, g)),
                            [dc.parameter(r.normal(size=(1, 6, 7))),
                             dc.parameter(r.uniform(1.3, 4.5, size=(3, 4, 2)))])),
    ("slice", lambda r: (lambda a: dc.sumsq(dc.slice_axis(a, 1, 1, 3)), [dc.parameter(r.normal(size=(3, 5)))])),
    ("concat", lambda r: (lambda a, b: dc.sumsq(dc.concat([a, b], 0)),
                          [dc.parameter(r.normal(size=(2, 3))), dc.parameter(r.normal(size=(4, 3)))])),
    ("upsample2", lambda r: (lambda a: dc.sumsq(dc.upsample2(a)), [dc.parameter(r.normal(size=(1, 2, 3, 4)))])),
    ("avgpool2", lambda r: (lambda a: dc.sumsq(dc.avgpool2(a)), [dc.parameter(r.normal(size=(1, 2, 4, 6)))])),
    ("mean", lambda r: (lambda a: dc.mean_all(dc.mul(a, a)), [dc.parameter(r.normal(size=(5, 5)))])),
    ("sumsq", lambda r: (lambda a: dc.sumsq(dc.tanh(a)), [dc.parameter(r.normal(size=(5, 5)))])),
    ("add_bias", lambda r: (lambda a, b: dc.sumsq(dc.add_bias(a, b)),
                            [dc.parameter(r.normal(size=(4, 3))), dc.parameter(r.normal(size=(3,)))])),
    ("reverse", lambda r: (lambda a: dc.sumsq(dc.mul(a, dc.reverse_axis(a, 1))),
                           [dc.parameter(r.normal(size=(3, 4)))])),
    ("permute", lambda r: (lambda a: dc.sumsq(dc.permute(a, (1, 0))), [dc.parameter(r.normal(size=(3, 4)))])),
    ("reshape", lambda r: (lambda a: dc.sumsq(dc.reshape(a, (2, 6))), [dc.parameter(r.normal(size=(3, 4)))])),
]


@pytest.mark.parametrize("name,builder", OPS_FOR_SWEEP, ids=[n for n, _ in OPS_FOR_SWEEP])
def test_gradients_on_random_instances(name, builder):
    # 20 random instances per op, rel err <= 1e-5 against central differences
    worst = 0.0
    for trial in range(20):
        r = np.random.default_rng(1000 + trial)
        f, xs = builder(r)
        worst = max(worst, dc.check_grad(f, xs))
    assert worst <= 1e-5, f"{name}: {worst:.2e}"


def test_adam_contracts():
    p = dc.parameter(np.full(3, 7.0, dtype=np.float32))
    st = dc.AdamState(lr=0.1)
    dc.adam_step({"p": p}, {"p": np.zeros(3, dtype=np.float32)}, st)
    assert np.array_equal(p.data, np.full(3, 7.0, dtype=np.float32))

    p = dc.parameter(np.zeros(1, dtype=np.float32))
    dc.adam_step({"p": p}, {"p": np.ones(1, dtype=np.float32)}, dc.AdamState(lr=0.1))
    assert abs(float(p.data[0]) + 0.1) < 1e-6

    # two steps of constant gradient shrink a quadratic loss monotonically
    w = dc.parameter(np.array([2.0], dtype=np.float32))
    st = dc.AdamState(lr=0.05)
    losses = []
    for _ in range(2):
        g = w.data.astype(np.float32)   # d/dw of w^2/2
        losses.append(float(w.data[0] ** 2))
        dc.adam_step({"w": w}, {"w": g}, st)
    losses.append(float(w.data[0] ** 2))
    assert losses[0] > losses[1] > losses[2]
