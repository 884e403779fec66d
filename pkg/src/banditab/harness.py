"""Experiment driver: replication studies, convergence checks, CSV plumbing.

Studies fan replications out over a bounded worker pool (capped by the
``BANDIT_AB_THREADS`` environment variable); every replication derives its
random streams from the root seed and its own coordinates, so reports are
reproducible regardless of scheduling order. Rates are reduced from counts,
which keeps the aggregation associative.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .baselines import cuped_test, dim_test, zdml_test
from .crossfit import Dataset, cross_fit, dr_pseudo_outcomes
from .datagen import DgpConfig, generate
from .distributions import BanditParams, bandit_density, bandit_tail_prob, normal_quantile
from .errors import BanditABError, ValidationError
from .learners import LearnerSpec
from .permutation import PermutationPlan, cauchy_combine
from .policy import arm1_increments, optimal_finals, select_lambda_threshold, statistic_p_value
from .rng import int_seed_for, rng_for

__all__ = [
    "METHODS",
    "ExperimentGrid",
    "MethodCellResult",
    "CellResult",
    "StudyReport",
    "ScltReport",
    "run_study",
    "run_sclt_check",
    "write_study",
    "emit_power_curves",
    "ingest_csv",
    "write_csv",
    "load_config",
]

METHODS = ("PWTAB", "WTAB", "zDML", "CUPED", "DIM")
_DML_METHODS = {"PWTAB", "WTAB", "zDML"}


@dataclass(frozen=True)
class ExperimentGrid:
    """Axes and settings of one replication study."""

    f_kinds: tuple = ("I",)
    g_kinds: tuple = ("I",)
    sigma_eps: tuple = (0.5,)
    n_values: tuple = (20000,)
    methods: tuple = METHODS
    replications: int = 500
    alpha: float = 0.05
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    k: int = 2
    tau: float = 0.03
    b: int = 25
    root_seed: int = 0
    p_treat: float = 0.5
    propensity: str = "known"

    def __post_init__(self):
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValidationError(f"unknown methods: {sorted(unknown)}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must lie strictly inside (0, 1)")
        if self.propensity != "known" and self.propensity != "fit":
            raise ValidationError("propensity must be 'known' or 'fit'")

    def cells(self) -> list[tuple[str, str, float, int]]:
        return [(f, g, s, n)
                for f in self.f_kinds for g in self.g_kinds
                for s in self.sigma_eps for n in self.n_values]


@dataclass(frozen=True)
class MethodCellResult:
    method: str
    p_values: tuple
    estimates: tuple
    rejection_rate: float
    stderr: float

    def rate_at(self, alpha: float) -> float:
        p = np.asarray(self.p_values)
        return float(np.mean(p <= alpha)) if p.size else float("nan")


@dataclass(frozen=True)
class CellResult:
    f_kind: str
    g_kind: str
    sigma_eps: float
    n: int
    methods: dict
    n_failed: int
    failures: tuple


@dataclass(frozen=True)
class StudyReport:
    cells: tuple
    grid: ExperimentGrid
    runtime_seconds: float

    def to_dict(self) -> dict:
        return {
            "config": _grid_to_dict(self.grid),
            "runtime_seconds": self.runtime_seconds,
            "cells": [
                {
                    "f": c.f_kind, "g": c.g_kind, "sigma_eps": c.sigma_eps, "n": c.n,
                    "n_failed": c.n_failed,
                    "failures": list(c.failures),
                    "methods": {
                        m: {
                            "rejection_rate": r.rejection_rate,
                            "stderr": r.stderr,
                            "n_effective": len(r.p_values),
                            "estimate_mean": float(np.mean(r.estimates)) if r.estimates else None,
                            "estimate_var": (float(np.var(r.estimates, ddof=1))
                                             if len(r.estimates) > 1 else None),
                            "p_values": list(r.p_values),
                        }
                        for m, r in c.methods.items()
                    },
                }
                for c in self.cells
            ],
        }


def _grid_to_dict(grid: ExperimentGrid) -> dict:
    return {
        "f_kinds": list(grid.f_kinds), "g_kinds": list(grid.g_kinds),
        "sigma_eps": list(grid.sigma_eps), "n_values": list(grid.n_values),
        "methods": list(grid.methods), "replications": grid.replications,
        "alpha": grid.alpha, "learner_kind": grid.learner.kind,
        "learner_hyperparams": dict(grid.learner.hyperparams), "k": grid.k,
        "tau": grid.tau, "b": grid.b, "root_seed": grid.root_seed,
        "p_treat": grid.p_treat, "propensity": grid.propensity,
    }


def worker_count(tasks: int) -> int:
    cap = os.environ.get("BANDIT_AB_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, tasks))


def _one_replication(grid: ExperimentGrid, cell_idx: int, cell, rep: int) -> dict:
    f, g, s, n = cell
    config = DgpConfig(f_kind=f, g_kind=g, sigma_eps=s, n=n, p_treat=grid.p_treat,
                       seed=int_seed_for(grid.root_seed, "data", cell_idx, rep))
    data = generate(config)
    out: dict = {}
    if _DML_METHODS & set(grid.methods):
        known = grid.p_treat if grid.propensity == "known" else None
        fits = cross_fit(data, grid.learner, k=grid.k, known_propensity=known,
                         seed=int_seed_for(grid.root_seed, "crossfit", cell_idx, rep))
        pseudo = dr_pseudo_outcomes(data, fits)
        if "zDML" in grid.methods:
            r = zdml_test(pseudo)
            out["zDML"] = (r.p_two_sided, r.estimate)
        if "WTAB" in grid.methods or "PWTAB" in grid.methods:
            lam = select_lambda_threshold(pseudo.sigma_hat, n, grid.tau)
            base = arm1_increments(pseudo, lam)
        if "WTAB" in grid.methods:
            coin = int(rng_for(grid.root_seed, "wtab-coin", cell_idx, rep).integers(0, 2))
            t = float(optimal_finals(base, [coin])[0])
            out["WTAB"] = (statistic_p_value(t), pseudo.mean)
        if "PWTAB" in grid.methods:
            plan = PermutationPlan.build(
                n, grid.b, int_seed_for(grid.root_seed, "perms", cell_idx, rep))
            coins = np.fromiter(
                (rng_for(grid.root_seed, "coin", cell_idx, rep, i).integers(0, 2)
                 for i in range(grid.b)), dtype=np.int64, count=grid.b)
            finals = optimal_finals(base[plan.permutations], coins)
            _, p_agg = cauchy_combine([statistic_p_value(float(t)) for t in finals])
            out["PWTAB"] = (p_agg, pseudo.mean)
    if "CUPED" in grid.methods:
        r = cuped_test(data)
        out["CUPED"] = (r.p_two_sided, r.estimate)
    if "DIM" in grid.methods:
        r = dim_test(data)
        out["DIM"] = (r.p_two_sided, r.estimate)
    return out


def run_study(grid: ExperimentGrid, out_prefix: str | None = None) -> StudyReport:
    """Run every (cell, replication, method) combination and reduce to rates.

    Replication failures (degenerate variance, fold exhaustion) are recorded
    per cell and excluded from the rates, never silently dropped. When
    ``out_prefix`` is given the report is also written to ``<prefix>.json``
    and ``<prefix>.csv``.
    """
    started = time.perf_counter()
    cells = []
    for cell_idx, cell in enumerate(grid.cells()):
        results: list = [None] * grid.replications
        failures: list[str] = []

        def task(rep: int, _idx=cell_idx, _cell=cell):
            return _one_replication(grid, _idx, _cell, rep)

        workers = worker_count(grid.replications)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {rep: pool.submit(task, rep) for rep in range(grid.replications)}
                for rep, fut in futures.items():
                    try:
                        results[rep] = fut.result()
                    except BanditABError as exc:
                        failures.append(f"replication {rep}: {exc}")
        else:
            for rep in range(grid.replications):
                try:
                    results[rep] = task(rep)
                except BanditABError as exc:
                    failures.append(f"replication {rep}: {exc}")

        per_method = {}
        for m in grid.methods:
            pairs = [r[m] for r in results if r is not None]
            p_values = tuple(p for p, _ in pairs)
            estimates = tuple(e for _, e in pairs)
            if p_values:
                rate = float(np.mean(np.asarray(p_values) <= grid.alpha))
                stderr = math.sqrt(rate * (1.0 - rate) / len(p_values))
            else:
                rate, stderr = float("nan"), float("nan")
            per_method[m] = MethodCellResult(method=m, p_values=p_values,
                                             estimates=estimates,
                                             rejection_rate=rate, stderr=stderr)
        f, g, s, n = cell
        cells.append(CellResult(f_kind=f, g_kind=g, sigma_eps=s, n=n,
                                methods=per_method, n_failed=len(failures),
                                failures=tuple(failures)))
    report = StudyReport(cells=tuple(cells), grid=grid,
                         runtime_seconds=time.perf_counter() - started)
    if out_prefix is not None:
        write_study(report, out_prefix)
    return report


def write_study(report: StudyReport, out_prefix: str) -> None:
    with open(f"{out_prefix}.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    with open(f"{out_prefix}.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["f", "g", "sigma_eps", "n", "method", "rejection_rate",
                         "stderr", "n_effective", "n_failed",
                         "estimate_mean", "estimate_var"])
        for c in report.cells:
            for m, r in c.methods.items():
                writer.writerow([
                    c.f_kind, c.g_kind, repr(float(c.sigma_eps)), c.n, m,
                    repr(r.rejection_rate), repr(r.stderr), len(r.p_values),
                    c.n_failed,
                    repr(float(np.mean(r.estimates))) if r.estimates else "",
                    repr(float(np.var(r.estimates, ddof=1))) if len(r.estimates) > 1 else "",
                ])


def emit_power_curves(report: StudyReport, axis: str, path: str | None = None) -> str:
    """Long-format CSV ``method,axis_value,rejection_rate,stderr`` for plotting.

    Rows are sorted by (method, axis value); methods with no cells produce no
    rows, so an empty study yields a header-only file.
    """
    attr = {"f": "f_kind", "g": "g_kind", "sigma_eps": "sigma_eps", "n": "n"}.get(axis)
    if attr is None:
        raise ValidationError(f"axis must be one of f, g, sigma_eps, n, got {axis!r}")
    rows = []
    for c in report.cells:
        for m, r in c.methods.items():
            rows.append((m, getattr(c, attr), r.rejection_rate, r.stderr))
    rows.sort(key=lambda row: (row[0], row[1]))
    lines = ["method,axis_value,rejection_rate,stderr"]
    lines += [f"{m},{v},{rate!r},{se!r}" for m, v, rate, se in rows]
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


@dataclass(frozen=True)
class ScltReport:
    """Monte Carlo comparison of the policy statistic with its limit law."""

    mu: float
    sigma: float
    lam: float
    n: int
    reps: int
    omega: float
    sigma0: float
    ks_distance: float
    empirical_tail: float
    theoretical_tail: float
    rate_bound: float
    critical_z: float

    def to_dict(self) -> dict:
        return {
            "mu": self.mu, "sigma": self.sigma, "lambda": self.lam,
            "n": self.n, "reps": self.reps,
            "omega": self.omega, "sigma0": self.sigma0,
            "ks_distance": self.ks_distance,
            "empirical_tail": self.empirical_tail,
            "theoretical_tail": self.theoretical_tail,
            "rate_bound": self.rate_bound,
            "critical_z": self.critical_z,
        }


def _quadrature_cdf(sorted_x: np.ndarray, params: BanditParams) -> np.ndarray:
    """CDF at sorted points by cumulative adaptive quadrature of the density."""
    lower = -max(30.0, abs(params.omega) + 12.0 * params.sigma0)

    def pdf(v: float) -> float:
        return bandit_density(v, params)

    def piece(lo: float, hi: float) -> float:
        if lo < 0.0 < hi:
            left, _ = quad(pdf, lo, 0.0, limit=200)
            right, _ = quad(pdf, 0.0, hi, limit=200)
            return left + right
        val, _ = quad(pdf, lo, hi, limit=200)
        return val

    out = np.empty(sorted_x.size)
    prev_x = lower
    acc = 0.0
    for i, x in enumerate(sorted_x):
        acc += piece(prev_x, float(x)) if x > prev_x else 0.0
        out[i] = acc
        prev_x = float(x)
    return np.clip(out, 0.0, 1.0)


def simulate_policy_finals(mu: float, sigma: float, lam: float, n: int,
                           reps: int, seed: int, chunk: int = 2500) -> np.ndarray:
    """Final statistics of ``reps`` independent policy runs on normal rewards."""
    if sigma <= 0 or n < 2 or reps < 1 or not 0.0 <= lam < 1.0:
        raise ValidationError("need sigma > 0, n >= 2, reps >= 1, lam in [0, 1)")
    finals = np.empty(reps)
    pos = 0
    block = 0
    root = math.sqrt(n)
    while pos < reps:
        m = min(chunk, reps - pos)
        rng = rng_for(seed, "sclt", block)
        rewards = mu + sigma * rng.standard_normal((m, n))
        means = rewards.mean(axis=1)
        sds = rewards.std(axis=1, ddof=1)
        inc = (lam / (1.0 - lam) * means / n)[:, None] + rewards / (root * sds[:, None])
        coins = rng.integers(0, 2, size=m)
        finals[pos:pos + m] = optimal_finals(inc, coins)
        pos += m
        block += 1
    return finals


def run_sclt_check(mu: float, sigma: float, lam: float, n: int, reps: int,
                   seed: int = 0, cdf: str = "quadrature") -> ScltReport:
    """Simulate oracle policy runs and compare with the limiting spike law.

    Reports the Kolmogorov-Smirnov distance between the empirical finals and
    the limit CDF (quadrature of the density by default, or the closed form),
    plus empirical and theoretical two-sided tail mass at the 97.5% normal
    quantile. Agreement is only expected where the convergence penalty
    ``sigma / ((1 - lam) sqrt(n))`` is small; the report includes it.
    """
    if cdf not in ("quadrature", "closed_form"):
        raise ValidationError("cdf must be 'quadrature' or 'closed_form'")
    params = BanditParams.from_mean_sigma(mu, sigma, lam, n)
    finals = simulate_policy_finals(mu, sigma, lam, n, reps, seed)
    xs = np.sort(finals)
    if cdf == "quadrature":
        F = _quadrature_cdf(xs, params)
    else:
        from .distributions import bandit_cdf
        F = bandit_cdf(xs, params)
    hi = np.arange(1, reps + 1) / reps
    lo = np.arange(0, reps) / reps
    ks = float(max(np.max(hi - F), np.max(F - lo)))
    z = normal_quantile(0.975)
    return ScltReport(
        mu=mu, sigma=sigma, lam=lam, n=n, reps=reps,
        omega=params.omega, sigma0=params.sigma0,
        ks_distance=ks,
        empirical_tail=float(np.mean(np.abs(finals) > z)),
        theoretical_tail=bandit_tail_prob(z, params),
        rate_bound=sigma / ((1.0 - lam) * math.sqrt(n)),
        critical_z=z,
    )


def write_csv(data: Dataset, path: str) -> None:
    """Write a dataset as ``x1..xd,y,a`` with shortest round-trip decimals."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        header = [f"x{j + 1}" for j in range(data.d)] + ["y", "a"]
        fh.write(",".join(header) + "\n")
        for i in range(data.n):
            parts = [repr(float(v)) for v in data.X[i]]
            parts.append(repr(float(data.Y[i])))
            parts.append(str(int(data.A[i])))
            fh.write(",".join(parts) + "\n")


def ingest_csv(path: str) -> Dataset:
    """Parse the ``x1..xd,y,a`` schema with strict per-cell validation.

    Errors name the offending row (1-based file line, header is row 1) and
    column.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[-2:] != ["y", "a"]:
            raise ValidationError(f"{path}: header must be x1..xd,y,a, got {header}")
        d = len(header) - 2
        expected = [f"x{j + 1}" for j in range(d)]
        if header[:d] != expected:
            raise ValidationError(f"{path}: covariate columns must be {expected}, got {header[:d]}")
        xs, ys, az = [], [], []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != d + 2:
                raise ValidationError(
                    f"{path}: row {row_no} has {len(row)} fields, expected {d + 2}")
            try:
                values = [float(v) for v in row[:d + 1]]
            except ValueError:
                bad = next(j for j, v in enumerate(row[:d + 1]) if not _is_float(v))
                raise ValidationError(
                    f"{path}: row {row_no}, column {header[bad]}: "
                    f"non-numeric value {row[bad]!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise ValidationError(f"{path}: row {row_no}: non-finite value")
            if row[d + 1].strip() not in ("0", "1"):
                raise ValidationError(
                    f"{path}: row {row_no}, column a: expected 0 or 1, got {row[d + 1]!r}")
            xs.append(values[:d])
            ys.append(values[d])
            az.append(int(row[d + 1]))
    if not ys:
        raise ValidationError(f"{path}: no data rows")
    return Dataset(X=np.asarray(xs), Y=np.asarray(ys), A=np.asarray(az))


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def load_config(path: str) -> dict:
    """Flat ``key = value`` manifest; keys are normalized to underscores."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}: line {line_no} is not 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out
