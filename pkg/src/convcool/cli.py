"""Command-line driver: example catalog, gamma sweeps and file export.

Usage::

    convcool --example 1 --gamma 4e-7,8.5e-7 --n 64 --out results/
    convcool --config run.cfg --gamma 1e-6

A config file holds ``key = value`` lines (``#`` starts a comment) with the
same keys as the long flags, dashes or underscores alike.  Flags override
the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from .analysis import RateRow, RateTable, compute_rates, sweep_point
from .forward import Discretization
from .io import write_iterations_csv, write_sweep_csv, write_vtk
from .optimizer import AlgorithmAborted, AlgorithmConfig, run_algorithm
from .sources import EXAMPLES, ExpressionError, example_source, source_from_expression

log = logging.getLogger("convcool")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    example: int | None = None
    source: str | None = None
    kappa: float = 1.0
    gamma: list[float] = field(default_factory=list)
    n: int = 64
    eps1: float = 1e-3
    eps2: float = 1e-8
    n1: int = 20
    n2: int = 20
    skew_convection: bool = False
    out: Path = Path("convcool-out")
    workers: int = 1

    def __post_init__(self):
        if self.example is not None and self.source is not None:
            raise ConfigError("give either an example or a custom source, not both")
        if self.example is None and self.source is None:
            raise ConfigError("no heat source: set example or source")
        if self.example is not None and self.example not in EXAMPLES:
            raise ConfigError(f"unknown example {self.example}; choose from {sorted(EXAMPLES)}")
        if self.source is not None:
            try:
                source_from_expression(self.source)
            except ExpressionError as err:
                raise ConfigError(f"bad source expression: {err}") from None
        if not self.gamma:
            raise ConfigError("at least one gamma is required")
        if any(not g > 0 for g in self.gamma):
            raise ConfigError(f"gamma values must be positive, got {self.gamma}")
        if len(set(self.gamma)) != len(self.gamma):
            raise ConfigError(f"duplicate gamma values in {self.gamma}")
        self.gamma = sorted(self.gamma)
        if self.n < 2:
            raise ConfigError(f"mesh size n must be at least 2, got {self.n}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        try:
            AlgorithmConfig(kappa=self.kappa, gamma=self.gamma[0], eps1=self.eps1,
                            eps2=self.eps2, n1=self.n1, n2=self.n2)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        self.out = Path(self.out)

    def algorithm_config(self, gamma: float) -> AlgorithmConfig:
        return AlgorithmConfig(kappa=self.kappa, gamma=gamma, eps1=self.eps1,
                               eps2=self.eps2, n1=self.n1, n2=self.n2)

    def source_term(self):
        if self.example is not None:
            return example_source(self.example)
        return source_from_expression(self.source, tag="custom")


# -- parsing ------------------------------------------------------------------

def parse_gamma_list(text: str) -> list[float]:
    try:
        vals = [float(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse gamma list {text!r}") from None
    if not vals:
        raise ConfigError("empty gamma list")
    if any(not g > 0 for g in vals):
        raise ConfigError(f"gamma values must be positive, got {text!r}")
    return sorted(vals)


def _to_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


CONVERTERS = {
    "example": int, "source": str, "kappa": float, "gamma": parse_gamma_list, "n": int,
    "eps1": float, "eps2": float, "n1": int, "n2": int, "skew_convection": _to_bool,
    "out": Path, "workers": int,
}


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file into converted values."""
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONVERTERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if not value:
            raise ConfigError(f"{path}:{lineno}: missing value for {key!r}")
        try:
            out[key] = CONVERTERS[key](value)
        except (ValueError, ConfigError) as err:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {err}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="convcool", description=(
        "Optimal divergence-free cooling flow: solve the optimality system "
        "with Picard then Newton for one or more control weights."))
    p.add_argument("--example", type=int, choices=sorted(EXAMPLES), help="built-in heat source")
    p.add_argument("--source", help="custom source expression in x, y, e.g. 'exp(-(x-0.5)^2)'")
    p.add_argument("--kappa", type=float, help="thermal diffusivity (default 1)")
    p.add_argument("--gamma", help="comma-separated control weights")
    p.add_argument("--n", type=int, help="cells per side (default 64)")
    p.add_argument("--eps1", type=float, help="Picard relative-change tolerance (default 1e-3)")
    p.add_argument("--eps2", type=float, help="Newton relative-change tolerance (default 1e-8)")
    p.add_argument("--n1", type=int, help="max Picard iterations (default 20)")
    p.add_argument("--n2", type=int, help="max Newton iterations (default 20)")
    p.add_argument("--skew-convection", action="store_true", default=None,
                   help="use the skew-symmetrized convection form")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--workers", type=int, help="parallel gamma runs (default 1)")
    p.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    return p


def parse_config(argv=None) -> ExperimentSpec:
    """Merge defaults, an optional config file and command-line flags."""
    ns = build_parser().parse_args(argv)
    values = read_config_file(ns.config) if ns.config else {}
    for f in fields(ExperimentSpec):
        flag = getattr(ns, f.name, None)
        if flag is None:
            continue
        values[f.name] = CONVERTERS[f.name](flag) if f.name in ("gamma", "out") else flag
    # a flag for one kind of source replaces a file entry of the other kind
    if ns.example is not None and ns.source is None:
        values.pop("source", None)
    if ns.source is not None and ns.example is None:
        values.pop("example", None)
    return ExperimentSpec(**values)


# -- running --------------------------------------------------------------------

def gamma_dir(out: Path, gamma: float) -> Path:
    return out / f"gamma_{gamma:.6e}"


def _run_one(spec: ExperimentSpec, gamma: float):
    """Run one gamma; returns ``(gamma, sweep point or None, message)``."""
    disc = Discretization(spec.n, skew=spec.skew_convection)
    target = gamma_dir(spec.out, gamma)
    target.mkdir(parents=True, exist_ok=True)
    try:
        result = run_algorithm(disc, spec.algorithm_config(gamma), spec.source_term())
    except AlgorithmAborted as err:
        write_iterations_csv(target / "iterations.csv", err.history)
        return gamma, None, f"gamma={gamma:g}: solver failure: {err}"
    write_iterations_csv(target / "iterations.csv", result.history)
    write_vtk(target / "fields.vtk", disc.mesh, result.state,
              title=f"convcool gamma={gamma:.17g} kappa={spec.kappa:.17g}")
    msg = "" if result.converged else f"gamma={gamma:g}: not converged, kept best iterate"
    return gamma, sweep_point(disc, result.state), msg


def rate_table(points) -> RateTable:
    """Rates when defined; otherwise the raw rows with empty rate cells."""
    try:
        return compute_rates(points)
    except ValueError:
        pts = sorted(points, key=lambda p: p.gamma)
        return RateTable([RateRow(p.gamma, p.J, p.variance_norm, p.control_energy) for p in pts])


def run_experiment(spec: ExperimentSpec) -> int:
    """Run every gamma of ``spec`` and write the outputs; returns an exit status."""
    try:
        spec.out.mkdir(parents=True, exist_ok=True)
        probe = spec.out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        print(f"convcool: cannot write to {spec.out}: {err.strerror}", file=sys.stderr)
        return 2

    if spec.workers > 1 and len(spec.gamma) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_one, [spec] * len(spec.gamma), spec.gamma))
    else:
        results = [_run_one(spec, g) for g in spec.gamma]

    status = 0
    points = []
    for gamma, point, msg in results:
        if msg:
            print(f"convcool: {msg}", file=sys.stderr)
        if point is None:
            status = 1
            continue
        points.append(point)
        print(f"gamma={gamma:.6e}  J={point.J:.6e}  |T-<T>|={point.variance_norm:.6e}  "
              f"gamma|grad v|^2={point.control_energy:.6e}")
    if points:
        write_sweep_csv(spec.out / "sweep.csv", rate_table(points))
    return status


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    verbose = "-v" in argv or "--verbose" in argv
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        spec = parse_config(argv)
    except ConfigError as err:
        print(f"convcool: {err}", file=sys.stderr)
        return 2
    return run_experiment(spec)


if __name__ == "__main__":
    sys.exit(main())
