"""Constraint verification of allocation results, recomputed from the bound
and rate expressions rather than from the solver's reformulated thresholds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import comm
from .allocation import AllocationProblem, AllocationSolution
from .bounds import aged_crlb_approx, crlb_block1, predict_trajectory


@dataclass
class CheckReport:
    slack: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_solution(problem: AllocationProblem, sol: AllocationSolution, rtol: float = 1e-8,
                   require_integer: bool | None = None) -> CheckReport:
    """Relative slack of every constraint (negative beyond ``rtol`` is a violation)."""
    report = CheckReport()
    cfg, cons = problem.cfg, problem.constraints

    def record(name, value, limit, upper=True):
        slack = (limit - value) / abs(limit) if upper else (value - limit) / max(abs(limit), 1e-300)
        report.slack[name] = min(report.slack.get(name, np.inf), slack)
        if slack < -rtol:
            report.violations.append((name, value, limit))

    n_blocks = sol.num_blocks
    p, b = sol.training_power, sol.training_band
    record("C5", p.sum(), cons.total_power)
    record("C7", b.sum(), cons.total_subcarriers)
    if np.any(p < 0) or np.any(b < 0):
        report.violations.append(("C8", float(min(p.min(), b.min())), 0.0))
    integer = sol.integer if require_integer is None else require_integer
    if integer and np.any(np.abs(b - np.round(b)) > 1e-9):
        report.violations.append(("C10", b.tolist(), "integer"))
    for k, target in enumerate(problem.targets):
        c1 = crlb_block1(target, p[k + 1], b[k + 1], cfg)
        traj = predict_trajectory(target, cfg.block_duration, n_blocks)
        limits = cons.gamma_max[k]
        for n in range(1, n_blocks + 1):
            aged = aged_crlb_approx(c1, traj, target.evolution_cov, n, cfg.block_duration)
            for name, value, limit in zip(("C1", "C2", "C3"), aged.diag, limits):
                record(name, value, limit)
    p0b0 = p[0] * b[0]
    for n in range(1, n_blocks + 1):
        powers = sol.data_power[n - 1]
        record("C6", powers.sum(), cons.total_power)
        if np.any(powers < 0):
            report.violations.append(("C9", float(powers.min()), 0.0))
        for q, user in enumerate(problem.users):
            gamma = comm.gamma_closed_form(user.beta, user.rho, p0b0, 1.0, n, sol.comm_scheme, cfg)
            r = comm.rate(gamma, powers[q], n, cfg)
            record("C4", r, cons.min_rates[q], upper=False)
    return report
