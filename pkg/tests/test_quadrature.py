import numpy as np
import pytest

from hise_bem.quadrature import (
    TRI7_WEIGHTS,
    adaptive_rule,
    duffy_rule,
    regular_rule,
    singular_rule,
    subdivide,
    triangle_areas,
)

TRI = np.array([[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.5, 1.5, 0.0]]])


def test_rule_weights():
    assert TRI7_WEIGHTS.sum() == pytest.approx(1.0, abs=1e-14)
    _, w = regular_rule(TRI)
    assert w.sum() == pytest.approx(triangle_areas(TRI)[0])


@pytest.mark.parametrize("px, py", [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 2), (1, 4), (5, 0)])
def test_degree_five_exact(px, py):
    # compare with the same monomial integrated on a fine subdivision
    p, w = regular_rule(TRI)
    f = lambda q: q[..., 0] ** px * q[..., 1] ** py  # noqa: E731
    fine = TRI
    for _ in range(5):
        fine = subdivide(fine)
    pf, wf = regular_rule(fine)
    assert np.sum(w * f(p)) == pytest.approx(np.sum(wf * f(pf)), rel=1e-12, abs=1e-14)


def test_subdivide_preserves_area():
    sub = subdivide(TRI)
    assert sub.shape == (4, 3, 3)
    assert triangle_areas(sub).sum() == pytest.approx(triangle_areas(TRI)[0])


def test_duffy_reference_area():
    u, v, w = duffy_rule(7)
    # integrates 1 over a unit-area triangle when scaled by 2*area
    assert 2 * w.sum() == pytest.approx(1.0)
    assert np.all((u >= 0) & (u <= 1) & (v >= 0) & (v <= 1))


def _inverse_distance_exact(tri, c):
    # in-plane source: each edge contributes h * (asinh(t1/h) - asinh(t0/h))
    total = 0.0
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        e = (b - a) / np.linalg.norm(b - a)
        foot = a + np.dot(c - a, e) * e
        h = np.linalg.norm(c - foot)
        t0, t1 = np.dot(a - foot, e), np.dot(b - foot, e)
        total += h * (np.arcsinh(t1 / h) - np.arcsinh(t0 / h))
    return total


@pytest.mark.parametrize("order, rel", [(7, 1e-4), (20, 1e-8), (40, 1e-12)])
def test_singular_rule_inverse_distance(order, rel):
    c = TRI[0].mean(axis=0)
    p, w, owner = singular_rule(TRI, c[None], order=order)
    assert np.all(owner == 0)
    assert w.sum() == pytest.approx(triangle_areas(TRI)[0])
    val = np.sum(w / np.linalg.norm(p - c, axis=1))
    assert val == pytest.approx(_inverse_distance_exact(TRI[0], c), rel=rel)


def test_adaptive_rule_near_target():
    target = np.array([[0.8, 0.5, 0.05]])
    p, w, owner = adaptive_rule(target, TRI, eta=2.0, max_level=6)
    assert w.sum() == pytest.approx(triangle_areas(TRI)[0])
    val = np.sum(w / np.linalg.norm(p - target, axis=1))
    p2, w2, _ = adaptive_rule(target, TRI, eta=4.0, max_level=8)
    ref = np.sum(w2 / np.linalg.norm(p2 - target, axis=1))
    assert val == pytest.approx(ref, rel=1e-4)
    # the plain rule is visibly worse this close to the face
    pr, wr = regular_rule(TRI)
    assert abs(np.sum(wr / np.linalg.norm(pr - target, axis=-1)) - ref) > 10 * abs(val - ref)
