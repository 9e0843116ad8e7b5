"""Experiment configuration, benchmark runs and CSV records.

A ladder is a list of ``(N, M, s)`` triples, given explicitly or generated
from ``N`` by a named relation such as ``"N=M^2=s"``.  Every triple is run
``R`` times per method; replication ``r`` of either method reads stream
index ``r``, so the values do not depend on how replications are scheduled.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import anova
from .estimators import (
    EstimateResult,
    ReplicationStats,
    efficiency,
    replicate,
)
from .fem1d import SingularSystemError, estimate_u_half
from .fem2d import ConvergenceError, estimate_center
from .sampling import Law, generate_mvn, random_upper_factor

__all__ = [
    "BENCHMARKS",
    "RELATIONS",
    "ExperimentConfig",
    "ExperimentRecord",
    "CheckResult",
    "ladder_from_relation",
    "run",
    "emit_csv",
    "format_row",
    "verify_anova",
    "CSV_HEADER",
]

BENCHMARKS = ("mvn", "ode1d-uniform", "ode1d-lognormal", "pde2d", "anova-verify")
METHODS = ("MC", "TMC")
CSV_HEADER = ("benchmark", "method", "N", "M", "s", "mean", "variance", "time_s", "efficiency")


def _isqrt_exact(n: int) -> Optional[int]:
    if n < 0:
        return None
    r = math.isqrt(n)
    return r if r * r == n else None


def _half(n: int) -> Optional[int]:
    return n // 2 if n % 2 == 0 else None


def _sqrt_of(n: Optional[int]) -> Optional[int]:
    return None if n is None else _isqrt_exact(n)


# relation -> N -> (M, s), or None when N does not fit the relation
RELATIONS: dict[str, Callable[[int], Optional[tuple]]] = {
    "N=s": lambda N: (0, N),
    "N=M=s": lambda N: (N, N),
    "N=M^2=s": lambda N: (_isqrt_exact(N), N),
    "N=2M=2s": lambda N: (_half(N), _half(N)),
    "N=2M^2=2s": lambda N: (_sqrt_of(_half(N)), _half(N)),
    "2N=M^2=2s": lambda N: (_isqrt_exact(2 * N), N),
    "2N=M^2=s": lambda N: (_isqrt_exact(2 * N), 2 * N),
}


def _normalize_relation(name: str) -> str:
    key = name.replace(" ", "").replace("²", "^2")
    if key not in RELATIONS:
        raise ValueError(f"unknown ladder relation {name!r}; known: {', '.join(RELATIONS)}")
    return key


def ladder_from_relation(relation: str, Ns) -> list[tuple[int, int, int]]:
    """Triples ``(N, M, s)`` for each ``N``; rejects ``N`` that make ``M`` or ``s`` non-integral."""
    rel = _normalize_relation(relation)
    out = []
    for N in Ns:
        N = int(N)
        Ms = RELATIONS[rel](N)
        if N < 1 or Ms is None or None in Ms:
            raise ValueError(f"N={N} gives non-integral M or s under {rel}")
        out.append((N, Ms[0], Ms[1]))
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    benchmark: str
    ladder: tuple = ()
    relation: Optional[str] = None
    R: int = 25
    base_seed: int = 0
    methods: tuple = METHODS

    def __post_init__(self):
        if self.benchmark not in BENCHMARKS:
            raise ValueError(f"unknown benchmark {self.benchmark!r}")
        methods = tuple(m.upper() for m in self.methods)
        if not methods or any(m not in METHODS for m in methods):
            raise ValueError(f"methods must be a nonempty subset of {METHODS}, got {self.methods}")
        object.__setattr__(self, "methods", tuple(m for m in METHODS if m in methods))
        if self.R < 2:
            raise ValueError("R must be >= 2")
        ladder = tuple(tuple(int(v) for v in t) for t in self.ladder)
        object.__setattr__(self, "ladder", ladder)
        if self.benchmark == "anova-verify":
            return
        if not ladder:
            raise ValueError("empty ladder")
        if self.relation is not None:
            rel = _normalize_relation(self.relation)
            object.__setattr__(self, "relation", rel)
            for N, M, s in ladder:
                if RELATIONS[rel](N) != (M, s):
                    raise ValueError(f"triple ({N}, {M}, {s}) violates {rel}")
        for N, M, s in ladder:
            if N < 1 or s < 1:
                raise ValueError(f"triple ({N}, {M}, {s}): need N, s >= 1")
            if self.benchmark != "mvn" and (M < 2 or M % 2):
                raise ValueError(f"triple ({N}, {M}, {s}): {self.benchmark} needs an even M >= 2")


@dataclass
class ExperimentRecord:
    benchmark: str
    method: str
    N: int
    M: int
    s: int
    grand_mean: float
    estimator_variance: float
    avg_time_seconds: float
    efficiency: Optional[float] = None
    failed: bool = False
    error: str = ""
    stats: Optional[ReplicationStats] = field(default=None, repr=False)


def _mvn_runner(N: int, s: int, base_seed: int, method: str):
    factor = random_upper_factor(s, base_seed)
    mu = np.zeros(s)

    def one(seed: int, idx: int) -> EstimateResult:
        t0 = time.perf_counter()
        Y = generate_mvn(method, mu, factor, N, seed, idx)
        value = float(Y.mean())
        draws = N * s if method == "MC" else N + s - 1
        return EstimateResult(value, N, method, time.perf_counter() - t0, draws)

    return one


def _runner(benchmark: str, method: str, N: int, M: int, s: int, base_seed: int):
    if benchmark == "mvn":
        return _mvn_runner(N, s, base_seed, method)
    if benchmark == "ode1d-uniform":
        return lambda seed, idx: estimate_u_half("uniform", method, N, M, s, seed, idx)
    if benchmark == "ode1d-lognormal":
        return lambda seed, idx: estimate_u_half("lognormal", method, N, M, s, seed, idx)
    if benchmark == "pde2d":
        return lambda seed, idx: estimate_center(method, N, M, s, seed, idx)
    raise ValueError(f"no runner for {benchmark!r}")


def _warm_up(config: ExperimentConfig) -> None:
    """One tiny untimed estimate per method so JIT loading stays out of the timings."""
    M = 0 if config.benchmark == "mvn" else 4
    for method in config.methods:
        _runner(config.benchmark, method, 4, M, 2, config.base_seed)(config.base_seed, 0)


def run(config: ExperimentConfig, threads: int = 1,
        progress: Optional[Callable[[str], None]] = None) -> list[ExperimentRecord]:
    """One record per (triple, method), in ladder order then method order."""
    if config.benchmark == "anova-verify":
        raise ValueError("anova-verify produces checks, not records; use verify_anova")
    _warm_up(config)
    records = []
    for N, M, s in config.ladder:
        row = {}
        for method in config.methods:
            fn = _runner(config.benchmark, method, N, M, s, config.base_seed)
            try:
                # both methods read the same replication streams, so s = 1 rows coincide
                st = replicate(fn, config.R, config.base_seed, workers=threads)
                rec = ExperimentRecord(config.benchmark, method, N, M, s, st.grand_mean,
                                       st.estimator_variance, st.avg_time, stats=st)
            except (SingularSystemError, ConvergenceError) as exc:
                rec = ExperimentRecord(config.benchmark, method, N, M, s, math.nan, math.nan,
                                       math.nan, failed=True, error=str(exc))
            row[method] = rec
            if progress:
                progress(f"{config.benchmark} {method} N={N} M={M} s={s}: "
                         + (f"mean={rec.grand_mean:.6g} var={rec.estimator_variance:.3e} "
                            f"time={rec.avg_time_seconds:.3f}s" if not rec.failed else f"FAILED {rec.error}"))
        mc, tmc = row.get("MC"), row.get("TMC")
        if mc and tmc and not (mc.failed or tmc.failed):
            eff = efficiency(mc.stats, tmc.stats)
            mc.efficiency = tmc.efficiency = eff
        records.extend(row[m] for m in config.methods)
    return records


def _fmt_mean(x: float) -> str:
    return f"{x:.6g}"


def _fmt_var(x: float) -> str:
    return f"{x:.2e}"


def _fmt_time(x: float) -> str:
    return f"{x:.3f}"


def _efficiency_from_columns(mc: tuple, tmc: tuple) -> float:
    """Efficiency from the printed variance and time strings of both rows."""
    num = float(mc[0]) * float(mc[1])
    den = float(tmc[0]) * float(tmc[1])
    if not den > 0.0:
        # both legs below the printed time resolution: the ratio is undefined
        return math.inf if num > 0.0 else math.nan
    return num / den


def format_row(rec: ExperimentRecord, efficiency_text: str = "") -> list[str]:
    return [rec.benchmark, rec.method, str(rec.N), str(rec.M), str(rec.s),
            _fmt_mean(rec.grand_mean), _fmt_var(rec.estimator_variance),
            _fmt_time(rec.avg_time_seconds), efficiency_text]


def emit_csv(records, path) -> None:
    """Write ``records`` as CSV.  ``path`` may be a filename or an open text stream.

    The efficiency column is recomputed from the row's own printed variance
    and time columns, so a reader of the file reproduces it exactly.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    eff_text = {}
    pairs: dict = {}
    for i, r in enumerate(records):
        pairs.setdefault((r.benchmark, r.N, r.M, r.s), {})[r.method] = i
    for key, idx in pairs.items():
        if "MC" in idx and "TMC" in idx:
            mc, tmc = records[idx["MC"]], records[idx["TMC"]]
            if mc.efficiency is None or mc.failed or tmc.failed:
                continue
            eff = _efficiency_from_columns(
                (_fmt_var(mc.estimator_variance), _fmt_time(mc.avg_time_seconds)),
                (_fmt_var(tmc.estimator_variance), _fmt_time(tmc.avg_time_seconds)))
            eff_text[idx["MC"]] = eff_text[idx["TMC"]] = f"{eff:.4g}"
    rows = [format_row(r, eff_text.get(i, "")) for i, r in enumerate(records)]

    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(rows)

    if hasattr(path, "write"):
        write(path)
    else:
        with open(path, "w", newline="") as fh:
            write(fh)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _example_integrand(law: Law = Law.NORMAL):
    # x - y - z + xy - xz - yz
    coeffs = {(0,): 1, (1,): -1, (2,): -1, (0, 1): 1, (0, 2): -1, (1, 2): -1}
    return anova.multilinear_integrand(3, coeffs, law)


def verify_anova(seed: int = 0, n_random: int = 20) -> list[CheckResult]:
    """Variance formulas against exact enumeration and closed forms."""
    checks = []

    dec = anova.anova_decompose(_example_integrand(), 3, anova.gauss_hermite_law(4))
    for N in (3, 4, 16, 100):
        v_mc = anova.mc_variance(dec, N)
        v_tmc = anova.tmc_variance_theorem(dec, N).v_tmc
        ok = math.isclose(v_mc, 6 / N, rel_tol=0, abs_tol=1e-12) and \
            math.isclose(v_tmc, 2 / N + 6 / N ** 2, rel_tol=0, abs_tol=1e-12)
        checks.append(CheckResult(f"closed form N={N}", ok,
                                  f"v_mc={v_mc:.12g} (6/N) v_tmc={v_tmc:.12g} (2/N+6/N^2)"))

    rng = np.random.default_rng(seed)
    law = anova.two_point_law()
    for N, s in ((2, 2), (3, 2), (3, 3), (4, 3)):
        worst = 0.0
        bound_ok = True
        for _ in range(n_random):
            f = anova.random_multilinear(s, rng)
            d = anova.anova_decompose(f, s, law)
            e_mc, e_tmc = anova.enumerate_variance_exact(f, N, s)
            t_mc = anova.mc_variance(d, N)
            t_tmc = anova.tmc_variance_theorem(d, N).v_tmc
            worst = max(worst, abs(e_mc - t_mc), abs(e_tmc - t_tmc))
            bound_ok &= -1e-12 <= t_tmc <= anova.corollary_bound(d, N) + 1e-12
        checks.append(CheckResult(f"enumeration N={N} s={s}", worst <= 1e-12,
                                  f"max |enumerated - formula| = {worst:.2e} over {n_random} integrands"))
        checks.append(CheckResult(f"bound chain N={N} s={s}", bool(bound_ok),
                                  "0 <= v_tmc <= (sum alpha)^2 / N"))
    return checks

