"""Decision-vector layout, constraint violations, and analytic gradients.

A decision is (vm all buses, va all buses with the slack angle pinned to 0,
pg and qg of every online generator). Violations split into equality
(per-bus active/reactive balance residuals) and inequality (clipped excess
over generator limits, voltage bounds, and branch thermal ratings).

Gradients of the squared residual/excess terms with respect to the
decision are assembled from the polar power-flow derivative blocks; finite
differences in the tests pin every sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid.model import GridCase
from ..powerflow import branch_admittances, build_ybus


@dataclass(frozen=True)
class ViolationReport:
    """Mean constraint violations of one decision (pu).

    overall_mean weights equality and inequality terms equally.
    """

    equality_mean: float
    inequality_mean: float
    overall_mean: float

    @staticmethod
    def combine(equality_mean: float, inequality_mean: float) -> "ViolationReport":
        return ViolationReport(
            equality_mean=float(equality_mean),
            inequality_mean=float(inequality_mean),
            overall_mean=float(0.5 * equality_mean + 0.5 * inequality_mean))


class DecisionSpace:
    """Precomputed case tensors shared by violation and gradient passes."""

    def __init__(self, case: GridCase):
        self.case = case
        self.bus_index = {b.id: i for i, b in enumerate(case.buses)}
        self.n_bus = len(case.buses)
        self.y = build_ybus(case).matrix.toarray()
        self.slack = next(i for i, b in enumerate(case.buses) if b.kind == "slack")
        self.v_min = np.array([b.v_min for b in case.buses])
        self.v_max = np.array([b.v_max for b in case.buses])

        self.gens = tuple(g for g in case.generators if g.online)
        self.n_gen = len(self.gens)
        self.gen_bus = np.array([self.bus_index[g.bus] for g in self.gens])
        self.p_min = np.array([g.p_min for g in self.gens])
        self.p_max = np.array([g.p_max for g in self.gens])
        self.q_min = np.array([g.q_min for g in self.gens])
        self.q_max = np.array([g.q_max for g in self.gens])
        self.cost_c2 = np.array([g.cost_c2 for g in self.gens])
        self.cost_c1 = np.array([g.cost_c1 for g in self.gens])
        self.cost_c0 = np.array([g.cost_c0 for g in self.gens])
        ref = float(np.sum(self.cost_c2 * self.p_max**2
                           + self.cost_c1 * self.p_max + self.cost_c0))
        self.cost_ref = max(ref, 1e-9)

        rated = [(k, br) for k, br in enumerate(case.branches)
                 if br.closed and br.rate_a > 0]
        self.rate = np.array([br.rate_a for _, br in rated])
        self.br_f = np.array([self.bus_index[br.from_bus] for _, br in rated], dtype=int)
        self.br_t = np.array([self.bus_index[br.to_bus] for _, br in rated], dtype=int)
        yff, yft, ytf, ytt = [], [], [], []
        for _, br in rated:
            a, b, c, d = branch_admittances(br)
            yff.append(a)
            yft.append(b)
            ytf.append(c)
            ytt.append(d)
        self.yff = np.array(yff, dtype=complex)
        self.yft = np.array(yft, dtype=complex)
        self.ytf = np.array(ytf, dtype=complex)
        self.ytt = np.array(ytt, dtype=complex)
        self.n_rated = len(rated)

        # loads aggregated onto buses for the bundled case demand
        self.base_pd_bus, self.base_qd_bus = self.loads_to_buses(
            np.array([[l.pd for l in case.loads]]),
            np.array([[l.qd for l in case.loads]]))
        self.n_load = len(case.loads)
        self.load_bus = np.array([self.bus_index[l.bus] for l in case.loads], dtype=int)

        self.dim = 2 * self.n_bus + 2 * self.n_gen
        self.n_ineq = (4 * self.n_gen + 2 * self.n_bus + 2 * self.n_rated)

    # -- packing -----------------------------------------------------------

    def pack(self, vm, va, pg, qg) -> np.ndarray:
        return np.concatenate([vm, va, pg, qg], axis=-1)

    def unpack(self, decision: np.ndarray):
        decision = np.atleast_2d(decision)
        n, g = self.n_bus, self.n_gen
        vm = decision[:, :n]
        va = decision[:, n:2 * n].copy()
        va[:, self.slack] = 0.0
        pg = decision[:, 2 * n:2 * n + g]
        qg = decision[:, 2 * n + g:]
        return vm, va, pg, qg

    def loads_to_buses(self, pd: np.ndarray, qd: np.ndarray):
        """Aggregate per-load columns onto buses: (B, n_load) -> (B, n_bus)."""
        pd = np.atleast_2d(pd)
        qd = np.atleast_2d(qd)
        idx = np.array([self.bus_index[l.bus] for l in self.case.loads], dtype=int)
        pdb = np.zeros((pd.shape[0], self.n_bus))
        qdb = np.zeros((qd.shape[0], self.n_bus))
        np.add.at(pdb, (slice(None), idx), pd)
        np.add.at(qdb, (slice(None), idx), qd)
        return pdb, qdb

    def gens_to_buses(self, pg: np.ndarray, qg: np.ndarray):
        pgb = np.zeros((pg.shape[0], self.n_bus))
        qgb = np.zeros((qg.shape[0], self.n_bus))
        np.add.at(pgb, (slice(None), self.gen_bus), pg)
        np.add.at(qgb, (slice(None), self.gen_bus), qg)
        return pgb, qgb

    # -- physics ------------------------------------------------------------

    def injections(self, vm: np.ndarray, va: np.ndarray):
        """Calculated complex injections and terminal branch powers."""
        v = vm * np.exp(1j * va)
        i_bus = v @ self.y.T
        s_calc = v * np.conj(i_bus)
        vf = v[:, self.br_f]
        vt = v[:, self.br_t]
        i_f = self.yff * vf + self.yft * vt
        i_t = self.ytf * vf + self.ytt * vt
        s_f = vf * np.conj(i_f)
        s_t = vt * np.conj(i_t)
        return v, i_bus, s_calc, s_f, s_t

    def residuals(self, decision, pd_bus, qd_bus):
        """Equality residuals r_P, r_Q (B, n_bus) and thermal excesses."""
        vm, va, pg, qg = self.unpack(decision)
        pgb, qgb = self.gens_to_buses(pg, qg)
        _, _, s_calc, s_f, s_t = self.injections(vm, va)
        r_p = pgb - pd_bus - s_calc.real
        r_q = qgb - qd_bus - s_calc.imag
        exc_f = np.maximum(0.0, np.abs(s_f) - self.rate) if self.n_rated else np.zeros((vm.shape[0], 0))
        exc_t = np.maximum(0.0, np.abs(s_t) - self.rate) if self.n_rated else np.zeros((vm.shape[0], 0))
        return r_p, r_q, exc_f, exc_t

    def inequality_excesses(self, decision):
        """All clipped inequality excesses, (B, n_ineq)."""
        vm, va, pg, qg = self.unpack(decision)
        _, _, _, s_f, s_t = self.injections(vm, va)
        parts = [
            np.maximum(0.0, pg - self.p_max),
            np.maximum(0.0, self.p_min - pg),
            np.maximum(0.0, qg - self.q_max),
            np.maximum(0.0, self.q_min - qg),
            np.maximum(0.0, vm - self.v_max),
            np.maximum(0.0, self.v_min - vm),
        ]
        if self.n_rated:
            parts.append(np.maximum(0.0, np.abs(s_f) - self.rate))
            parts.append(np.maximum(0.0, np.abs(s_t) - self.rate))
        return np.concatenate(parts, axis=1)

    def violations(self, decision, pd=None, qd=None) -> ViolationReport:
        """Mean violation report for decisions against given (or case) loads."""
        decision = np.atleast_2d(decision)
        if pd is None:
            pd_bus = np.repeat(self.base_pd_bus, decision.shape[0], axis=0)
            qd_bus = np.repeat(self.base_qd_bus, decision.shape[0], axis=0)
        else:
            pd_bus, qd_bus = self.loads_to_buses(pd, qd)
        r_p, r_q, _, _ = self.residuals(decision, pd_bus, qd_bus)
        eq = float(np.mean(np.concatenate([np.abs(r_p), np.abs(r_q)], axis=1)))
        ineq = float(np.mean(self.inequality_excesses(decision)))
        return ViolationReport.combine(eq, ineq)

    def cost(self, pg: np.ndarray) -> np.ndarray:
        """Normalized quadratic generation cost per sample."""
        raw = (self.cost_c2 * pg**2 + self.cost_c1 * pg + self.cost_c0).sum(axis=1)
        return raw / self.cost_ref


def acopf_violations(case: GridCase, decision: np.ndarray) -> ViolationReport:
    """Violation report of one decision vector against the case's loads."""
    return DecisionSpace(case).violations(decision)


def feasible_decision_from_pf(space: DecisionSpace, pd=None, qd=None) -> np.ndarray:
    """Decision assembled from a dispatched, converged power flow (testing aid).

    Generation follows the demand (proportional-to-capacity dispatch with a
    small loss allowance) so the slack lands inside its active range.
    """
    from dataclasses import replace as _replace

    from ..powerflow import solve_pf
    from ..scenario import generation_dispatch

    case = space.case
    if pd is not None:
        loads = tuple(_replace(l, pd=pd[j], qd=qd[j])
                      for j, l in enumerate(case.loads))
        case = case.with_loads(loads)
    total = sum(l.pd for l in case.loads)
    dispatch = generation_dispatch(case, total * 1.02)
    case = _replace(case, generators=tuple(
        _replace(g, pg=dispatch[g.id]) if g.online else g
        for g in case.generators))
    sol = solve_pf(case)
    if not sol.converged:
        raise RuntimeError("power flow failed while building a feasible decision")
    pg = []
    qg = []
    for g, bus in zip(space.gens, space.gen_bus):
        gens_here = [h for h in space.gens if space.bus_index[h.bus] == bus]
        pg.append(sol.pg[bus] / len(gens_here))
        qg.append(sol.qg[bus] / len(gens_here))
    return space.pack(sol.vm, sol.va, np.array(pg), np.array(qg))
