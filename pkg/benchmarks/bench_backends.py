"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_backends.py --subdiv 2 --repeat 3

Each row runs the same call through both backends, checks that the results
agree and reports the best of ``--repeat`` wall-clock times.
"""

import argparse
import time

import numpy as np

from hise_bem import _backend
from hise_bem.geometry import icosphere
from hise_bem.materials import Material
from hise_bem.quadrature import adaptive_rule


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def cases(subdiv):
    s = icosphere(1.0, subdiv)
    m = Material(1.0, 1.0, 1.0)
    qp, qw = s.quadrature
    skip = np.arange(s.n_faces, dtype=np.int64)
    tx = s.centroids + 0.05 * s.normals
    pts, w, owner = adaptive_rule(tx, s.triangles)
    rng = np.random.default_rng(0)
    dens = rng.normal(size=(s.n_faces, 3, 6))
    x = rng.uniform(-0.5, 0.5, size=(2000, 3))
    qface = np.repeat(np.arange(s.n_faces), qp.shape[1])
    probe = rng.uniform(-1.5, 1.5, size=(5000, 3))
    tris = np.ascontiguousarray(s.triangles)
    return s.n_faces, {
        "single layer, omega=0": lambda b: _backend.face_matrix(
            _backend.KIND_SINGLE, s.centroids, s.normals, qp, qw, skip, m, 0.0, backend=b),
        "traction, omega=0.3": lambda b: _backend.face_matrix(
            _backend.KIND_TRACTION, s.centroids, s.normals, qp, qw, skip, m, 0.3, backend=b),
        "near pairs (adaptive)": lambda b: _backend.pair_sums(
            _backend.KIND_TRACTION, tx[owner], s.normals[owner], pts, w, owner, s.n_faces, m, 0.0, backend=b),
        "volume potential": lambda b: _backend.potential(
            x, qp.reshape(-1, 3), qw.ravel(), qface, dens, m, 0.0, backend=b),
        "winding numbers": lambda b: _backend.winding_numbers(probe, tris, backend=b),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--subdiv", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _backend.NAME != "cython":
        raise SystemExit("compiled extension not available; build with `pip install -e . --no-build-isolation`")
    faces, table = cases(args.subdiv)
    print(f"icosphere subdivision {args.subdiv} ({faces} faces), best of {args.repeat}")
    print(f"{'kernel':<24}{'cython [s]':>12}{'python [s]':>12}{'speed-up':>10}")
    for name, fn in table.items():
        tc, a = best_of(lambda: fn("cython"), args.repeat)
        tp, b = best_of(lambda: fn("python"), args.repeat)
        if not np.allclose(a, b, rtol=1e-9, atol=1e-12 * np.abs(b).max()):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<24}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
