"""Command-line front end: ``hise-bem {resonance,sphere-oracle,sweep,validate}``.

Runs are described by a plain ``key = value`` file (``--config``) whose
entries can be overridden by flags.  Recognised keys::

    mesh = path/to/surface.off        # or
    icosphere = R,SUBDIV
    lambda = 1                        # background material
    mu = 1
    rho = 1
    delta = 1e-6
    epsilon = 1e-4
    resolution = 32                   # interior grid cells per axis
    omega_grid = START,STOP,COUNT,log # sweep grid (log or lin)
    direction = 0,0,1                 # incident p-wave direction (sweep)
    tolerance = 0.05                  # relative tolerance for validate
    out = result.json
    format = json

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, HiseError
from .geometry import TriangleMesh, icosphere, interior_quadrature, load_off
from .materials import ContrastConfig, Material, validate_material
from .resonance import amplitude_sweep, compute_resonances
from .sphere_oracle import closed_form_eigenvalues, find_sphere_resonances

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SIG_DIGITS = 9
SUBWAVELENGTH_LIMIT = 0.1
DEFAULT_TOLERANCE = 0.05
SWEEP_RESOLUTION = 16
SPHERE_VOLUME_FRACTION = 0.5

SWEEP_HEADER = ("omega", "amplitude", "condition_estimate")

_KEYS = {
    "mesh", "icosphere", "lambda", "mu", "rho", "delta", "epsilon", "resolution",
    "omega_grid", "direction", "tolerance", "out", "format",
}


@dataclass
class RunConfig:
    mesh: Path | None = None
    icosphere: tuple[float, int] | None = (1.0, 3)
    lambda_: float = 1.0
    mu: float = 1.0
    rho: float = 1.0
    delta: float = 1e-6
    epsilon: float = 1e-4
    resolution: int = 32
    omega_grid: tuple[float, float, int, str] | None = None
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    tolerance: float = DEFAULT_TOLERANCE
    out: Path | None = None
    format: str | None = None
    warnings: list = field(default_factory=list)

    def material(self) -> Material:
        return validate_material(self.lambda_, self.mu, self.rho)

    def contrast(self) -> ContrastConfig:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            c = ContrastConfig(self.delta, self.epsilon)
        self.warnings.extend(c.assumption_flags())
        return c

    def geometry(self) -> TriangleMesh:
        if self.mesh is not None:
            if not self.mesh.is_file():
                raise ConfigError(f"mesh file not found: {self.mesh}")
            return load_off(self.mesh)
        R, sub = self.icosphere
        return icosphere(R, sub)

    def omegas(self) -> np.ndarray:
        start, stop, count, kind = self.omega_grid
        return np.geomspace(start, stop, count) if kind == "log" else np.linspace(start, stop, count)


# ----------------------------------------------------------------------------
# parsing


def _float(key, text) -> float:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: value must be finite")
    return v


def _int(key, text) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _parts(key, text, n):
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != n:
        raise ConfigError(f"{key}: expected {n} comma-separated values, got {text!r}")
    return parts


def _parse_icosphere(text):
    r, s = _parts("icosphere", text, 2)
    R, sub = _float("icosphere", r), _int("icosphere", s)
    if R <= 0 or sub < 0:
        raise ConfigError("icosphere: need R > 0 and SUBDIV >= 0")
    return R, sub


def _parse_grid(text):
    a, b, n, kind = _parts("omega_grid", text, 4)
    start, stop, count, kind = _float("omega_grid", a), _float("omega_grid", b), _int("omega_grid", n), kind.lower()
    if kind not in ("log", "lin"):
        raise ConfigError("omega_grid: spacing must be 'log' or 'lin'")
    if count < 1:
        raise ConfigError("omega_grid: empty frequency grid")
    if not 0 < start < stop and not (count == 1 and 0 < start == stop):
        raise ConfigError("omega_grid: need 0 < START < STOP")
    return start, stop, count, kind


def _parse_direction(text):
    d = tuple(_float("direction", p) for p in _parts("direction", text, 3))
    if np.linalg.norm(d) == 0:
        raise ConfigError("direction must be non-zero")
    return d


def _apply(cfg: RunConfig, key: str, value: str) -> None:
    if key == "mesh":
        cfg.mesh, cfg.icosphere = Path(value), None
    elif key == "icosphere":
        cfg.icosphere, cfg.mesh = _parse_icosphere(value), None
    elif key == "lambda":
        cfg.lambda_ = _float(key, value)
    elif key in ("mu", "rho", "delta", "epsilon", "tolerance"):
        setattr(cfg, key, _float(key, value))
    elif key == "resolution":
        cfg.resolution = _int(key, value)
        if cfg.resolution < 8:
            raise ConfigError("resolution must be at least 8")
    elif key == "omega_grid":
        cfg.omega_grid = _parse_grid(value)
    elif key == "direction":
        cfg.direction = _parse_direction(value)
    elif key == "out":
        cfg.out = Path(value)
    elif key == "format":
        if value not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        cfg.format = value
    else:
        raise ConfigError(f"unknown configuration key {key!r}")


def read_config(path) -> dict[str, str]:
    """``key = value`` pairs of a config file; ``#`` starts a comment."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.lower().replace("-", "_")
        if k not in _KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {k!r}")
        out[k] = v
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        for k, v in read_config(args.config).items():
            _apply(cfg, k, v)
    flags = {
        "mesh": args.mesh, "icosphere": args.icosphere, "delta": args.delta,
        "epsilon": args.epsilon, "resolution": args.resolution,
        "omega_grid": args.omega_grid, "out": args.out, "format": args.format,
    }
    for k, v in flags.items():
        if v is not None:
            _apply(cfg, k, v)
    return cfg


# ----------------------------------------------------------------------------
# output


def fmt(x: float) -> str:
    return f"{x:.{SIG_DIGITS}g}"


def _round(obj):
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (np.integer, bool)):
        return obj if isinstance(obj, bool) else int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(fmt(x)) if math.isfinite(x) else fmt(x)
    return obj


def to_json(payload: dict) -> str:
    return json.dumps(_round(payload), indent=2) + "\n"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


class _Collector(logging.Handler):
    def __init__(self, sink):
        super().__init__(logging.WARNING)
        self.sink = sink

    def emit(self, record):
        self.sink.append(record.getMessage())


def _subwavelength_flags(mesh: TriangleMesh, m: Material, freqs) -> list[str]:
    a = float(np.max(np.linalg.norm(mesh.vertices - mesh.vertices.mean(axis=0), axis=1)))
    ka = float(np.max(freqs)) * a / m.c_s
    if ka >= SUBWAVELENGTH_LIMIT:
        return [f"omega*a/c_s={ka:.3g} is not small: sub-wavelength assumption violated"]
    return []


# ----------------------------------------------------------------------------
# commands


def cmd_resonance(cfg: RunConfig) -> tuple[int, str]:
    mesh, m, c = cfg.geometry(), cfg.material(), cfg.contrast()
    run = compute_resonances(mesh, m, c, cfg.resolution)
    r = run.result
    cfg.warnings.extend(_subwavelength_flags(mesh, m, r.frequencies))
    if cfg.format == "csv":
        return EXIT_OK, to_csv(("eigenvalue", "frequency"), zip(r.eigenvalues, r.frequencies))
    payload = {
        "eigenvalues": r.eigenvalues.tolist(),
        "frequencies": r.frequencies.tolist(),
        "multiplicities": r.multiplicities,
        "diagnostics": {
            "mesh_faces": mesh.n_faces,
            "volume_estimate": run.quadrature.volume,
            "nullspace_gap": run.basis.diagnostics.get("gap_ratio"),
        },
        "warnings": cfg.warnings,
    }
    return EXIT_OK, to_json(payload)


def _sphere_radius(mesh: TriangleMesh) -> float:
    v = mesh.vertices - mesh.vertices.mean(axis=0)
    r = np.linalg.norm(v, axis=1)
    if np.ptp(r) > 1e-6 * r.max():
        raise ConfigError("geometry is not a sphere (vertex radii differ)")
    R = float(r.mean())
    # inscribed polyhedra with vertices on a sphere but far from round (a box, say)
    if mesh.signed_volume < SPHERE_VOLUME_FRACTION * 4.0 / 3.0 * math.pi * R**3:
        raise ConfigError("geometry is not a sphere (volume far below that of the circumscribed ball)")
    return R


def _radius(cfg: RunConfig) -> float:
    if cfg.mesh is None:
        return cfg.icosphere[0]
    return _sphere_radius(cfg.geometry())


def cmd_sphere_oracle(cfg: RunConfig) -> tuple[int, str]:
    R, m, c = _radius(cfg), cfg.material(), cfg.contrast()
    s = find_sphere_resonances(R, m, c)
    if not (s.sign_change_T and s.sign_change_I):
        cfg.warnings.append("Re det does not change sign across a located minimum")
    payload = {
        "omega1_closed": s.omega1_closed,
        "omega2_closed": s.omega2_closed,
        "omega_T_root": s.omega_T,
        "omega_I_root": s.omega_I,
        "rel_gap": s.rel_gap,
    }
    if cfg.format == "csv":
        return EXIT_OK, to_csv(("quantity", "value"), payload.items())
    payload["warnings"] = cfg.warnings
    return EXIT_OK, to_json(payload)


def cmd_sweep(cfg: RunConfig) -> tuple[int, str]:
    mesh, m, c = cfg.geometry(), cfg.material(), cfg.contrast()
    if cfg.omega_grid is None:
        raise ConfigError("sweep needs omega_grid (START,STOP,COUNT,log|lin)")
    omegas = cfg.omegas()
    iq = interior_quadrature(mesh, min(cfg.resolution, SWEEP_RESOLUTION))
    res = amplitude_sweep(mesh, m, c, cfg.direction, omegas, iq=iq)
    rows = list(zip(res.omegas, res.amplitudes, res.conditions))
    if cfg.format == "json":
        payload = {k: list(v) for k, v in zip(SWEEP_HEADER, zip(*rows))}
        payload["peak_omega"] = res.peak().omega
        payload["warnings"] = cfg.warnings
        return EXIT_OK, to_json(payload)
    return EXIT_OK, to_csv(SWEEP_HEADER, rows)


def _hint(mesh: TriangleMesh, cfg: RunConfig, failed: bool) -> str | None:
    if mesh.n_faces < 1280 or failed:
        return (f"mesh has {mesh.n_faces} faces; icosphere subdivision >= 3 (1280 faces) and "
                f"resolution >= 32 are needed for percent-level agreement")
    return None


def cmd_validate(cfg: RunConfig) -> tuple[int, str]:
    mesh, m, c = cfg.geometry(), cfg.material(), cfg.contrast()
    R = _sphere_radius(mesh)
    run = compute_resonances(mesh, m, c, cfg.resolution)
    oracle = find_sphere_resonances(R, m, c)
    rho1, rho2 = closed_form_eigenvalues(R, m)
    # ascending frequencies: the translational triple first
    ref_freq = [oracle.omega2_closed] * 3 + [oracle.omega1_closed] * 3
    ref_eig = [rho2] * 3 + [rho1] * 3
    checks = []
    for i, (w, ev) in enumerate(zip(run.result.frequencies, run.result.eigenvalues)):
        err = abs(w - ref_freq[i]) / ref_freq[i]
        checks.append({
            "index": i,
            "channel": "I" if i < 3 else "T",
            "bem_frequency": float(w),
            "oracle_frequency": ref_freq[i],
            "rel_error": err,
            "eigenvalue_rel_error": abs(ev - ref_eig[i]) / ref_eig[i],
            "pass": bool(err <= cfg.tolerance),
        })
    ok = all(ch["pass"] for ch in checks)
    payload = {
        "tolerance": cfg.tolerance,
        "pass": ok,
        "max_rel_error": max(ch["rel_error"] for ch in checks),
        "oracle_root_gap": oracle.rel_gap,
        "checks": checks,
        "hint": _hint(mesh, cfg, not ok),
        "warnings": cfg.warnings,
    }
    code = EXIT_OK if ok else EXIT_VALIDATION
    if cfg.format == "csv":
        header = ("index", "channel", "bem_frequency", "oracle_frequency", "rel_error", "pass")
        return code, to_csv(header, ([ch[k] for k in header] for ch in checks))
    return code, to_json(payload)


COMMANDS = {
    "resonance": cmd_resonance,
    "sphere-oracle": cmd_sphere_oracle,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--mesh", help="closed triangulated surface in OFF format")
    common.add_argument("--icosphere", metavar="R,SUBDIV")
    common.add_argument("--delta", metavar="X")
    common.add_argument("--epsilon", metavar="X")
    common.add_argument("--resolution", metavar="N")
    common.add_argument("--omega-grid", metavar="START,STOP,COUNT,log|lin")
    p = argparse.ArgumentParser(prog="hise-bem", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "resonance": "eigenvalues of M and leading-order resonant frequencies",
        "sphere-oracle": "closed-form and determinant-root frequencies of a ball",
        "sweep": "interior amplitude over a frequency grid",
        "validate": "compare the boundary-element result with the sphere oracle",
    }
    for name, h in helps.items():
        sub.add_parser(name, parents=[common], help=h)
    return p


def _error(kind: str, exc: BaseException) -> None:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    collected: list[str] = []
    handler = _Collector(collected)
    logger = logging.getLogger("hise_bem")
    logger.addHandler(handler)
    try:
        cfg = build_config(args)
        if cfg.format is None:
            cfg.format = "csv" if args.command == "sweep" else "json"
        cfg.warnings = collected
        code, text = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        _error("config", exc)
        return EXIT_CONFIG
    except (HiseError, np.linalg.LinAlgError, FloatingPointError) as exc:
        _error("numerical", exc)
        return EXIT_NUMERICAL
    finally:
        logger.removeHandler(handler)
    if cfg.out is not None:
        try:
            cfg.out.write_text(text)
        except OSError as exc:
            _error("config", exc)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
