import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fueterlab import frames as fr
from fueterlab.frames import (
    FrameError,
    FrameSpec,
    bracket_fields,
    bracket_oracle,
    divergence_residual,
    dual_coframe,
    frame_vectors,
    is_normal,
    metric_eval,
    product_s1s2,
    random_points,
    singular_s3,
    spinc_lambda,
    standard_s3,
    torus3,
    volume_density,
)

from conftest import random_glplus

CATALOG = [torus3(), standard_s3(), singular_s3(), product_s1s2()]


def test_s3_coframe_at_identity():
    alpha = dual_coframe(standard_s3(), np.array([1.0, 0, 0, 0]))
    assert np.allclose(alpha[0], [0, 1, 0, 0], atol=1e-12)
    assert np.allclose(alpha[1], [0, 0, 1, 0], atol=1e-12)
    assert np.allclose(alpha[2], [0, 0, 0, 1], atol=1e-12)


def test_s3_coframe_formula(rng):
    # alpha_1 = y0 dy1 - y1 dy0 + y2 dy3 - y3 dy2
    y = random_points(fr.SPHERE3, 20, rng)
    alpha = dual_coframe(standard_s3(), y)
    expected = np.stack([-y[:, 1], y[:, 0], -y[:, 3], y[:, 2]], axis=1)
    assert np.allclose(alpha[:, 0], expected, atol=1e-12)


def test_torus_coframe_is_inverse(rng):
    U = random_glplus(rng)
    alpha = dual_coframe(torus3(U), rng.random(3))
    assert np.allclose(alpha, np.linalg.inv(U), atol=1e-12)


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: f.manifold)
def test_duality_pairing(f, rng):
    pts = random_points(f.manifold, 50, rng)
    pairing = np.einsum("pid,pjd->pij", dual_coframe(f, pts), frame_vectors(f, pts))
    assert np.allclose(pairing, np.eye(3), atol=1e-12)


def test_volume_density():
    rng = np.random.default_rng(0)
    for f in (standard_s3(), singular_s3(), product_s1s2(), torus3()):
        pts = random_points(f.manifold, 30, rng)
        assert np.allclose(volume_density(f, pts), 1.0, atol=1e-10)
        assert is_normal(f)
    f = torus3(np.diag([2.0, 1.0, 1.0]))
    assert np.allclose(volume_density(f, random_points(f.manifold, 10, rng)), 2.0)
    assert not is_normal(f)


@pytest.mark.parametrize("f", CATALOG, ids=lambda f: f.manifold)
def test_divergence_free(f):
    assert divergence_residual(f, n=100) < 1e-8


def test_standard_s3_brackets(rng):
    f = standard_s3()
    y = random_points(fr.SPHERE3, 10, rng)
    w = bracket_fields(f, y)
    assert np.allclose(w, 2 * frame_vectors(f, y), atol=1e-12)


def test_torus_brackets_vanish(rng):
    f = torus3(random_glplus(rng))
    assert np.allclose(bracket_fields(f, rng.random((5, 3))), 0.0)


def test_s1s2_brackets(rng):
    # w_i = 2 y_i d/dtheta + e_i x y
    f = product_s1s2()
    p = random_points(fr.PRODUCT_S1S2, 10, rng)
    w = bracket_fields(f, p)
    y = p[:, 1:]
    for i in range(3):
        assert np.allclose(w[:, i, 0], 2 * y[:, i], atol=1e-12)
        assert np.allclose(w[:, i, 1:], np.cross(np.eye(3)[i], y), atol=1e-12)


@pytest.mark.parametrize("f", CATALOG[1:], ids=lambda f: f.manifold)
def test_bracket_oracle_second_order(f, rng):
    p = random_points(f.manifold, 5, rng)
    exact = bracket_fields(f, p)
    e1 = np.abs(bracket_oracle(f, p, h=2e-2) - exact).max()
    e2 = np.abs(bracket_oracle(f, p, h=1e-2) - exact).max()
    assert e2 < 1e-3
    # halving h divides the error by four
    assert 3.5 < e1 / e2 < 4.5


@given(st.integers(0, 2**31 - 1))
def test_metric_makes_frame_orthonormal(seed):
    rng = np.random.default_rng(seed)
    f = FrameSpec(fr.SPHERE3, random_glplus(rng))
    p = random_points(f.manifold, 3, rng)
    V = frame_vectors(f, p)
    for a in range(3):
        for b in range(3):
            assert np.allclose(metric_eval(f, p, V[:, a], V[:, b]), float(a == b), atol=1e-10)


def test_spinc_lambda_catalog(rng):
    for f, lam in ((torus3(), 0.0), (standard_s3(), 1.5), (product_s1s2(), 1.0)):
        pts = random_points(f.manifold, 100, rng)
        assert np.allclose(spinc_lambda(f, pts), lam, atol=1e-10)


def test_json_roundtrip(rng):
    f = FrameSpec(fr.SPHERE3, random_glplus(rng))
    g = FrameSpec.from_json(json.dumps(f.to_json()))
    assert g == f and hash(g) == hash(f)


def test_invalid_frames():
    with pytest.raises(FrameError):
        FrameSpec("Torus4")
    with pytest.raises(FrameError):
        torus3(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(FrameError):
        FrameSpec(fr.PRODUCT_S1S2, 2 * np.eye(3))
    with pytest.raises(FrameError):
        FrameSpec.from_json({"manifold": fr.TORUS3, "U": [1, 2]})
    with pytest.raises(FrameError):
        frame_vectors(standard_s3(), np.array([1.0, 1.0, 0.0, 0.0]))
    with pytest.raises(FrameError):
        frame_vectors(torus3(), np.zeros(4))
