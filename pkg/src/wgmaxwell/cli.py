"""Command-line driver: convergence studies, stability probes and single solves.

Usage::

    wgmaxwell converge --config run.json
    wgmaxwell probes --config run.json
    wgmaxwell solve --config run.json --dump-system system.mtx

The config is JSON or ``key = value`` lines (``#`` starts a comment).  Keys:
``kind``, ``case``, ``k``, ``levels`` (subdivision counts or mesh files),
``mesh`` (``triangles`` or ``quadrilaterals``), ``coefficients`` (coefficient
file), ``omega``, ``output``, ``probes``, ``thresholds`` (or
``threshold.<column>`` in text form), ``samples``, ``witness_samples``,
``seed``, ``plot``.

Exit codes: 0 on success, 1 when a rate threshold or probe fails, 2 for
invalid input or an error raised while building or solving a level.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import analysis
from .assembly import ELECTRIC, CoefficientField, Discretization, assemble, _kind
from .basis import monomial_exponents
from .manufactured import case_names, derive_sources, get_case
from .mesh import Mesh, build_structured_quadrilaterals, build_structured_triangulation, load_mesh
from .solver import dump_system, solve
from .weakops import check_commutativity

log = logging.getLogger("wgmaxwell")

COLUMNS = ("energy", "multiplier", "l2", "edge")
PROBES = ("commutativity", "coercivity", "infsup", "inequalities")
EXACT_TOL = 1e-8
SOLVER_TOL = 1e-10
DIVERGENCE_TOL = 1e-9
PROBE_TOL = 1e-11


class ConfigError(ValueError):
    """The run configuration is malformed or inconsistent."""


@dataclass
class RunConfig:
    case: str
    kind: int
    k: int = 1
    levels: list = field(default_factory=lambda: [4, 8, 16])
    mesh: str = "triangles"
    coefficients: str | dict | None = None
    omega: float | None = None
    output: str = "."
    probes: list = field(default_factory=lambda: list(PROBES))
    thresholds: dict = field(default_factory=dict)
    samples: int = 200
    witness_samples: int = 50
    seed: int = 0
    plot: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not self.levels:
            raise ConfigError("at least one refinement level is required")
        if self.mesh not in ("triangles", "quadrilaterals"):
            raise ConfigError(f"mesh must be 'triangles' or 'quadrilaterals', got {self.mesh!r}")
        unknown = set(self.probes) - set(PROBES)
        if unknown:
            raise ConfigError(f"unknown probes {sorted(unknown)}; available: {', '.join(PROBES)}")
        unknown = set(self.thresholds) - set(COLUMNS)
        if unknown:
            raise ConfigError(f"unknown threshold columns {sorted(unknown)}; available: {', '.join(COLUMNS)}")
        if self.omega is not None and self.omega <= 0:
            raise ConfigError(f"omega must be positive, got {self.omega}")

    def default_thresholds(self) -> dict:
        k = self.k
        out = {"energy": k - 0.2, "multiplier": k - 0.2, "l2": k + 0.8, "edge": k + 0.8}
        out.update({c: float(v) for c, v in self.thresholds.items()})
        return out


def _parse_text(text: str) -> dict:
    data: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("threshold."):
            data.setdefault("thresholds", {})[key.split(".", 1)[1]] = value
        elif key in ("levels", "probes"):
            data[key] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            data[key] = value
    return data


def _to_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def config_from_dict(data: dict, base: Path | None = None) -> RunConfig:
    allowed = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "case" not in data:
        raise ConfigError("config must name a case; available: " + ", ".join(case_names()))
    try:
        case = get_case(str(data["case"]))
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    try:
        kind = _kind(data.get("kind", case.kind))
        levels = []
        for lv in data.get("levels", [4, 8, 16]):
            s = str(lv)
            levels.append(int(s) if s.lstrip("-").isdigit() else str(base / s if base and not Path(s).is_absolute() else s))
        coefficients = data.get("coefficients")
        if isinstance(coefficients, str) and base is not None and not Path(coefficients).is_absolute():
            coefficients = str(base / coefficients)
        cfg = RunConfig(
            case=case.name,
            kind=kind,
            k=int(data.get("k", 1)),
            levels=levels,
            mesh=str(data.get("mesh", "triangles")),
            coefficients=coefficients,
            omega=None if data.get("omega") is None else float(data["omega"]),
            output=str(data.get("output", ".")),
            probes=list(data.get("probes", PROBES)),
            thresholds={c: float(v) for c, v in dict(data.get("thresholds", {})).items()},
            samples=int(data.get("samples", 200)),
            witness_samples=int(data.get("witness_samples", 50)),
            seed=int(data.get("seed", 0)),
            plot=_to_bool(data.get("plot", False)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    if kind != case.kind:
        raise ConfigError(f"case {case.name!r} belongs to the {'electric' if case.kind == ELECTRIC else 'magnetic'} problem")
    if base is not None and not Path(cfg.output).is_absolute():
        cfg.output = str(base / cfg.output)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    else:
        data = _parse_text(text)
    return config_from_dict(data, base=path.parent)


def build_mesh(level, kind: str = "triangles") -> Mesh:
    if isinstance(level, str):
        return load_mesh(level)
    builder = build_structured_triangulation if kind == "triangles" else build_structured_quadrilaterals
    return builder(level)


def load_case(cfg: RunConfig):
    """The configured case, with the run frequency applied so its sources stay consistent."""
    case = get_case(cfg.case)
    if cfg.omega is not None:
        case.omega = cfg.omega
    return case


def _coefficients(cfg: RunConfig, case, mesh: Mesh) -> CoefficientField:
    omega = case.omega if cfg.omega is None else cfg.omega
    if cfg.coefficients is None:
        return case.coefficients(mesh, omega)
    if isinstance(cfg.coefficients, dict):
        return CoefficientField.from_dict(cfg.coefficients, mesh.n_cells, omega)
    return CoefficientField.from_file(cfg.coefficients, mesh.n_cells, omega)


# -- convergence -------------------------------------------------------------

@dataclass
class LevelResult:
    level: str
    h: float
    dofs: int
    energy: float
    multiplier: float
    l2: float
    edge: float
    solver_residual: float
    divergence_residual: float


@dataclass
class ConvergenceReport:
    case: str
    kind: int
    k: int
    exact: bool
    levels: list
    rates: dict
    thresholds: dict | None
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "case": self.case, "kind": "electric" if self.kind == ELECTRIC else "magnetic", "k": self.k,
            "exact": self.exact, "levels": [asdict(lv) for lv in self.levels], "rates": self.rates,
            "thresholds": self.thresholds, "failures": self.failures, "passed": self.passed,
        }


class LevelError(RuntimeError):
    pass


def solve_level(cfg: RunConfig, case, level):
    """Build, assemble and solve one level; returns everything later stages need."""
    mesh = build_mesh(level, cfg.mesh)
    disc = Discretization(mesh, cfg.k)
    coeff = _coefficients(cfg, case, mesh)
    source = derive_sources(case)
    system = assemble(disc, coeff, source)
    report = solve(system)
    return mesh, disc, coeff, source, system, report


def run_convergence(cfg: RunConfig) -> ConvergenceReport:
    if len(cfg.levels) < 2:
        raise ConfigError("a convergence run needs at least two levels to fit rates")
    case = load_case(cfg)
    exact = case.degree is not None and case.degree <= cfg.k
    results = []
    for level in cfg.levels:
        try:
            mesh, disc, coeff, source, system, report = solve_level(cfg, case, level)
            x = system.expand(report.solution)
            err = analysis.error_report(x, case.u, case.p, disc, coeff, cfg.kind)
            div = analysis.divergence_residual(x, disc, coeff, cfg.kind, source.rho)
        except ConfigError:
            raise
        except Exception as exc:
            raise LevelError(f"level {level}: {type(exc).__name__}: {exc}") from exc
        results.append(LevelResult(str(level), mesh.h, system.size, err.energy, err.multiplier, err.l2, err.edge,
                                   report.residual, div.relative))
        log.info("level %s: h=%.4g dofs=%d energy=%.3e l2=%.3e", level, mesh.h, system.size, err.energy, err.l2)

    hs = [r.h for r in results]
    failures = []
    rates: dict = {}
    thresholds = None
    if exact:
        for col in COLUMNS:
            rates[col] = ["exact"] * (len(results) - 1)
            worst = max(getattr(r, col) for r in results)
            if worst > EXACT_TOL:
                failures.append(f"{col}: error {worst:.3e} exceeds {EXACT_TOL:g} for an exactly representable solution")
    else:
        for col in COLUMNS:
            rates[col] = analysis.observed_rates(hs, [getattr(r, col) for r in results])
        if case.smooth or cfg.thresholds:
            thresholds = cfg.default_thresholds() if case.smooth else {c: float(v) for c, v in cfg.thresholds.items()}
            for col, minimum in thresholds.items():
                final = rates[col][-1]
                if not final >= minimum:
                    failures.append(f"rate_{col}: finest-pair rate {final:.3f} is below {minimum:.2f}")
    for r in results:
        if not r.solver_residual <= SOLVER_TOL:
            failures.append(f"solver_residual: {r.solver_residual:.2e} exceeds {SOLVER_TOL:g} at level {r.level}")
        if not r.divergence_residual <= DIVERGENCE_TOL:
            failures.append(f"divergence_residual: {r.divergence_residual:.2e} exceeds {DIVERGENCE_TOL:g} at level {r.level}")
    return ConvergenceReport(case.name, cfg.kind, cfg.k, exact, results, rates, thresholds, failures)


def _fmt(v) -> str:
    return v if isinstance(v, str) else f"{v:.6e}"


def convergence_csv(report: ConvergenceReport, timestamp: str | None = None) -> str:
    buf = io.StringIO()
    stamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    buf.write(f"# generated {stamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["level", "h", "dofs", *COLUMNS, "solver_residual", "divergence_residual",
                     *(f"rate_{c}" for c in COLUMNS)])
    for i, r in enumerate(report.levels):
        rates = ["" if i == 0 else _fmt(report.rates[c][i - 1]) for c in COLUMNS]
        writer.writerow([r.level, _fmt(r.h), r.dofs, *(_fmt(getattr(r, c)) for c in COLUMNS),
                         _fmt(r.solver_residual), _fmt(r.divergence_residual), *rates])
    return buf.getvalue()


def write_plot(report: ConvergenceReport, path: Path) -> bool:
    """Log-log error plot; any failure is logged and ignored."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4))
        hs = [r.h for r in report.levels]
        for col in COLUMNS:
            ax.loglog(hs, [max(getattr(r, col), 1e-300) for r in report.levels], "o-", label=col)
        ax.set_xlabel("h")
        ax.set_ylabel("error")
        ax.set_title(f"{report.case}, k = {report.k}")
        ax.legend()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        return True
    except Exception as exc:  # plots never change the outcome of a run
        log.warning("plot not written: %s", exc)
        return False


def _write_outputs(out: Path, payload: dict, csv_text: str | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if csv_text is not None:
        (out / "report.csv").write_text(csv_text)
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- probes ------------------------------------------------------------------

def random_triangle_cells(count: int, rng: np.random.Generator) -> Mesh:
    """``count`` disjoint, randomly shaped and scaled triangles inside [-1, 1]^2."""
    vertices, cells = [], []
    for i in range(count):
        angles = np.sort(rng.uniform(0, 2 * np.pi, 3))
        while np.min(np.diff(np.r_[angles, angles[0] + 2 * np.pi])) < 0.6:
            angles = np.sort(rng.uniform(0, 2 * np.pi, 3))
        side = int(np.ceil(np.sqrt(count)))
        scale = 10 ** rng.uniform(-1, 0) * 0.9 / side
        centre = 2.0 * (np.array([i % side, i // side]) + 0.5) / side - 1.0
        pts = centre + scale * np.column_stack([np.cos(angles), np.sin(angles)])
        cells.append([3 * i, 3 * i + 1, 3 * i + 2])
        vertices.extend(pts)
    return Mesh(np.array(vertices), cells)


def _random_spd(rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((2, 2))
    return a @ a.T + 0.5 * np.eye(2)


def commutativity_probe(k: int, cells: int = 100, seed: int = 0) -> dict:
    """Commutativity residual of a random degree-``k`` polynomial field on random cells."""
    rng = np.random.default_rng(seed)
    mesh = random_triangle_cells(cells, rng)
    exps = monomial_exponents(k)
    coef = rng.standard_normal((2, len(exps)))
    a, b = exps[:, 0], exps[:, 1]

    def w(pts):
        x, y = pts[:, :1], pts[:, 1:]
        return (x**a * y**b) @ coef.T

    def jac(pts):
        x, y = pts[:, :1], pts[:, 1:]
        dx = a * x ** np.maximum(a - 1, 0) * y**b
        dy = b * x**a * y ** np.maximum(b - 1, 0)
        return np.stack([np.stack([dx @ c, dy @ c], axis=-1) for c in coef], axis=1)

    kappa = np.array([_random_spd(rng) for _ in range(cells)])
    res = check_commutativity(w, mesh, k, kappa, jac=jac)
    return {"divergence": res.divergence, "curl": res.curl, "max_residual": res.max_residual, "rms": res.rms,
            "cells": res.cells, "passed": res.max_residual <= PROBE_TOL}


def run_probes(cfg: RunConfig) -> dict:
    case = load_case(cfg)
    meshes = [build_mesh(level, cfg.mesh) for level in cfg.levels]
    out: dict = {"case": case.name, "kind": "electric" if cfg.kind == ELECTRIC else "magnetic", "k": cfg.k}
    coeffs = [_coefficients(cfg, case, m) for m in meshes]
    for c in coeffs:
        c.require_coercive()
    discs = [Discretization(m, cfg.k) for m in meshes]

    if "commutativity" in cfg.probes:
        out["commutativity"] = commutativity_probe(cfg.k, seed=cfg.seed)
    if "coercivity" in cfg.probes:
        probe = analysis.coercivity_probe(discs[0], coeffs[0], cfg.kind, cfg.samples, cfg.seed)
        out["coercivity"] = {**probe.to_dict(), "passed": probe.passed()}
    if "infsup" in cfg.probes:
        rng = np.random.default_rng(cfg.seed)
        disc, coeff = discs[0], coeffs[0]
        gaps, curls = [], []
        for _ in range(cfg.witness_samples):
            wit = analysis.infsup_witness(analysis.random_multiplier(disc, cfg.kind, rng), cfg.kind, disc, coeff)
            gaps.append(wit.relative_gap)
            curls.append(wit.curl_edge_part)
        d = disc.dofmap(cfg.kind)
        ones = np.zeros(d.n_multiplier)
        ones[:: d.nr] = 1.0
        unit = analysis.infsup_witness(ones, cfg.kind, disc, coeff)
        constants = []
        for disc_l, coeff_l in zip(discs, coeffs):
            ops = analysis.NormOperators(disc_l, coeff_l, cfg.kind)
            worst = 0.0
            for _ in range(5):
                q = analysis.random_multiplier(disc_l, cfg.kind, rng)
                wit = analysis.infsup_witness(q, cfg.kind, disc_l, coeff_l)
                b = ops.bundle(wit.v_q.field, q)
                worst = max(worst, b.total / b.multiplier)
            constants.append(worst)
        stable = max(constants) / min(constants) <= 2.0 if len(constants) > 1 else True
        out["infsup"] = {
            "max_relative_gap": max(gaps, default=0.0), "max_curl_edge_part": max(curls, default=0.0),
            "unit_multiplier": {"lhs": unit.lhs, "rhs": unit.rhs, "h": meshes[0].h},
            "witness_constants": constants,
            "passed": max(gaps, default=0.0) <= PROBE_TOL and max(curls, default=0.0) <= 1e-12 and stable,
        }
    if "inequalities" in cfg.probes:
        probe = analysis.trace_inverse_probe(meshes, cfg.k)
        spread = max(probe.spread(probe.trace), probe.spread(probe.inverse))
        out["inequalities"] = {**probe.to_dict(), "passed": spread <= 2.0}
    out["passed"] = all(v.get("passed", True) for v in out.values() if isinstance(v, dict))
    return out


# -- entry point -------------------------------------------------------------

def _cmd_converge(cfg: RunConfig) -> int:
    report = run_convergence(cfg)
    out = Path(cfg.output)
    _write_outputs(out, report.to_dict(), convergence_csv(report))
    if cfg.plot:
        write_plot(report, out / "plot.svg")
    print(convergence_csv(report).split("\n", 1)[1], end="")
    for failure in report.failures:
        print(f"FAILED {failure}")
    print("PASSED" if report.passed else "FAILED")
    return 0 if report.passed else 1


def _cmd_probes(cfg: RunConfig) -> int:
    report = run_probes(cfg)
    _write_outputs(Path(cfg.output), report)
    for name in PROBES:
        if name in report:
            entry = report[name]
            print(f"{name}: {'pass' if entry['passed'] else 'FAIL'}")
    if "infsup" in report:
        u = report["infsup"]["unit_multiplier"]
        print(f"infsup q=1: lhs = {u['lhs']:.12g}, rhs = {u['rhs']:.12g}, 4h = {4 * u['h']:.12g}")
    return 0 if report["passed"] else 1


def _cmd_solve(cfg: RunConfig, dump: str | None) -> int:
    case = load_case(cfg)
    mesh, disc, coeff, source, system, report = solve_level(cfg, case, cfg.levels[0])
    if dump:
        dump_system(system, dump)
    x = system.expand(report.solution)
    div = analysis.divergence_residual(x, disc, coeff, cfg.kind, source.rho)
    payload = {"case": case.name, "level": str(cfg.levels[0]), "dofs": system.size,
               "solver_residual": report.residual, "pivot_health": report.pivot_health,
               "divergence_residual": div.relative}
    _write_outputs(Path(cfg.output), payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0 if report.accurate else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wgmaxwell", description=__doc__.split("\n", 1)[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("converge", "run a refinement study and fit rates"),
                        ("probes", "run the stability and commutativity probes"),
                        ("solve", "assemble and solve the first level")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON or key = value run configuration")
        if name == "solve":
            p.add_argument("--dump-system", metavar="PATH", help="write the matrix in Matrix Market format")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "converge":
            return _cmd_converge(cfg)
        if args.command == "probes":
            return _cmd_probes(cfg)
        return _cmd_solve(cfg, args.dump_system)
    except (ConfigError, LevelError, ValueError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
