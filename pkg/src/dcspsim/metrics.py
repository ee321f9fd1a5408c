"""Aggregation and statistics over trial batches.

Produces one summary row per (protocol, cell) with means, sample standard
deviations, solved fraction and the one-sided paired p(AWC <= APO).  The
CSV schema is part of the tool contract:

protocol,family,n,density,targets,trials,solved_pct,cycles_mean,cycles_sd,
msgs_mean,msgs_sd,bytes_mean,bytes_sd,work_mean,work_sd,links_pct_mean,
links_pct_sd,central_pct_mean,central_pct_sd,p_value
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import t as student_t

from .sim import TrialResult, Verdict

CSV_HEADER = (
    "protocol,family,n,density,targets,trials,solved_pct,cycles_mean,cycles_sd,"
    "msgs_mean,msgs_sd,bytes_mean,bytes_sd,work_mean,work_sd,links_pct_mean,"
    "links_pct_sd,central_pct_mean,central_pct_sd,p_value"
)


def pct_links(trial: TrialResult) -> float:
    """Directed view links used, as a percentage of the n(n-1) possible."""
    possible = trial.n * (trial.n - 1)
    if possible == 0:
        return 100.0
    return 100.0 * trial.links_used / possible


def pct_central(trial: TrialResult) -> float:
    """Largest fraction of the problem any one agent centralized."""
    return 100.0 * trial.max_view / trial.n


def mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def sample_sd(xs: list[float]) -> float:
    """Sample (n-1) standard deviation; 0 by convention for one value."""
    if len(xs) < 2:
        return 0.0
    m = mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def paired_t_test(a: list[float], b: list[float]) -> float:
    """One-sided p-value for mean(b - a) <= 0: small when b is reliably
    greater, 0.5 for identical samples.  With a = APO and b = AWC this is
    the tables' p(AWC <= APO)."""
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    if len(a) < 2:
        raise ValueError("need at least two pairs")
    diffs = [y - x for x, y in zip(a, b)]
    m = mean(diffs)
    sd = sample_sd(diffs)
    if sd == 0.0:
        return 0.5 if m == 0.0 else (0.0 if m > 0.0 else 1.0)
    stat = m / (sd / math.sqrt(len(diffs)))
    return float(student_t.sf(stat, len(diffs) - 1))


@dataclass
class BatchSummary:
    protocol: str
    family: str
    n: int
    density: float | None
    targets: int | None
    trials: int
    solved_pct: float
    cycles_mean: float
    cycles_sd: float
    msgs_mean: float
    msgs_sd: float
    bytes_mean: float
    bytes_sd: float
    work_mean: float
    work_sd: float
    links_pct_mean: float
    links_pct_sd: float
    central_pct_mean: float
    central_pct_sd: float
    p_value: float | None = None
    single_trial: bool = False

    def csv_row(self) -> str:
        def num(x: float) -> str:
            return f"{x:.4f}"

        density = "" if self.density is None else f"{self.density}"
        targets = "" if self.targets is None else f"{self.targets}"
        p = "" if self.p_value is None else f"{self.p_value:.6f}"
        cells = [
            self.protocol, self.family, str(self.n), density, targets,
            str(self.trials), num(self.solved_pct), num(self.cycles_mean),
            num(self.cycles_sd), num(self.msgs_mean), num(self.msgs_sd),
            num(self.bytes_mean), num(self.bytes_sd), num(self.work_mean),
            num(self.work_sd), num(self.links_pct_mean), num(self.links_pct_sd),
            num(self.central_pct_mean), num(self.central_pct_sd), p,
        ]
        return ",".join(cells)


def summarize(
    trials: list[TrialResult],
    protocol: str,
    family: str,
    n: int,
    density: float | None = None,
    targets: int | None = None,
    censor_cycles: bool = False,
) -> BatchSummary:
    """Summary statistics for one cell's batch.  ``censor_cycles`` computes
    the cycle stats over completed trials only (cutoff trials excluded);
    messages/bytes/work always include every trial."""
    if not trials:
        raise ValueError("empty batch")
    completed = [t for t in trials if t.verdict is not Verdict.CYCLE_LIMIT]
    cycle_base = completed if (censor_cycles and completed) else trials
    cycles = [float(t.cycles) for t in cycle_base]
    msgs = [float(t.messages_total) for t in trials]
    byts = [float(t.bytes_total) for t in trials]
    work = [float(t.work_total) for t in trials]
    links = [pct_links(t) for t in trials]
    central = [pct_central(t) for t in trials]
    return BatchSummary(
        protocol=protocol,
        family=family,
        n=n,
        density=density,
        targets=targets,
        trials=len(trials),
        solved_pct=100.0 * len(completed) / len(trials),
        cycles_mean=mean(cycles),
        cycles_sd=sample_sd(cycles),
        msgs_mean=mean(msgs),
        msgs_sd=sample_sd(msgs),
        bytes_mean=mean(byts),
        bytes_sd=sample_sd(byts),
        work_mean=mean(work),
        work_sd=sample_sd(work),
        links_pct_mean=mean(links),
        links_pct_sd=sample_sd(links),
        central_pct_mean=mean(central),
        central_pct_sd=sample_sd(central),
        single_trial=len(trials) == 1,
    )
