"""Sparse admittance construction and Newton-Raphson AC power flow.

Conventions:
    - complex voltage V = vm * exp(j*va), arrays ordered like case.buses
    - mismatch = specified injection minus calculated injection (pu)
    - the Jacobian here is d(mismatch)/d(va, vm), i.e. the negative of the
      calculated-injection derivatives; the same blocks are reused for
      training gradients elsewhere

PV buses hold their generator voltage setpoint; reactive limits are not
enforced during the solve (limit violations are scored downstream). A PV
bus with no online generator is treated as PQ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid.model import Branch, GridCase, islands_of


class PowerFlowError(RuntimeError):
    """Structurally unsolvable case or singular Jacobian."""


@dataclass(frozen=True)
class AdmittanceMatrix:
    """Bus admittance matrix with the bus-id ordering it was built on."""

    dimension: int
    matrix: sp.csr_matrix  # complex, dimension x dimension
    bus_ids: tuple[int, ...]

    @property
    def index(self) -> dict[int, int]:
        return {b: i for i, b in enumerate(self.bus_ids)}


@dataclass(frozen=True)
class PFSolution:
    bus_ids: tuple[int, ...]
    vm: np.ndarray
    va: np.ndarray
    pg: np.ndarray  # recovered net generation per bus (pu)
    qg: np.ndarray
    iterations: int
    converged: bool
    max_mismatch: float


@dataclass(frozen=True)
class BranchFlows:
    branch_ids: tuple[int, ...]
    p_from: np.ndarray
    q_from: np.ndarray
    p_to: np.ndarray
    q_to: np.ndarray
    i_from_mag: np.ndarray
    i_to_mag: np.ndarray


def branch_admittances(br: Branch) -> tuple[complex, complex, complex, complex]:
    """Pi-model terminal admittances (yff, yft, ytf, ytt) incl. tap/shift."""
    ys = 1.0 / complex(br.r, br.x)
    bc = 1j * br.b / 2.0
    tap = br.tap * np.exp(1j * br.shift)
    yff = (ys + bc) / (tap * np.conj(tap))
    yft = -ys / np.conj(tap)
    ytf = -ys / tap
    ytt = ys + bc
    return yff, yft, ytf, ytt


def build_ybus(case: GridCase) -> AdmittanceMatrix:
    """Assemble the bus admittance matrix over closed branches plus shunts."""
    bus_ids = tuple(b.id for b in case.buses)
    idx = {b: i for i, b in enumerate(bus_ids)}
    n = len(bus_ids)
    rows, cols, vals = [], [], []
    for br in case.branches:
        if not br.closed:
            continue
        f, t = idx[br.from_bus], idx[br.to_bus]
        yff, yft, ytf, ytt = branch_admittances(br)
        rows += [f, f, t, t]
        cols += [f, t, f, t]
        vals += [yff, yft, ytf, ytt]
    for b in case.buses:
        if b.gs != 0.0 or b.bs != 0.0:
            i = idx[b.id]
            rows.append(i)
            cols.append(i)
            vals.append(complex(b.gs, b.bs))
    y = sp.coo_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, n))
    return AdmittanceMatrix(dimension=n, matrix=y.tocsr(), bus_ids=bus_ids)


def specified_injections(case: GridCase) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus scheduled net injection (online generation minus demand), pu."""
    idx = {b.id: i for i, b in enumerate(case.buses)}
    p = np.zeros(len(case.buses))
    q = np.zeros(len(case.buses))
    for g in case.generators:
        if g.online:
            p[idx[g.bus]] += g.pg
            q[idx[g.bus]] += g.qg
    for l in case.loads:
        p[idx[l.bus]] -= l.pd
        q[idx[l.bus]] -= l.qd
    return p, q


def effective_bus_kinds(case: GridCase) -> list[str]:
    """Bus kinds used by the solver: PV without an online generator is PQ."""
    online_gen_buses = {g.bus for g in case.generators if g.online}
    kinds = []
    for b in case.buses:
        if b.kind == "pv" and b.id not in online_gen_buses:
            kinds.append("pq")
        else:
            kinds.append(b.kind)
    return kinds


def _setpoint_voltages(case: GridCase) -> np.ndarray:
    """vm targets for slack/PV buses: first online generator's v_set."""
    vset = np.array([b.vm for b in case.buses])
    idx = {b.id: i for i, b in enumerate(case.buses)}
    seen = set()
    for g in sorted(case.generators, key=lambda g: g.id):
        if g.online and g.bus not in seen:
            vset[idx[g.bus]] = g.v_set
            seen.add(g.bus)
    return vset


def calculated_injections(ybus: AdmittanceMatrix, vm: np.ndarray, va: np.ndarray) -> np.ndarray:
    v = vm * np.exp(1j * va)
    return v * np.conj(ybus.matrix @ v)


def mismatch(case: GridCase, vm: np.ndarray, va: np.ndarray,
             ybus: AdmittanceMatrix | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(P, Q) mismatch = specified minus calculated injection, all buses."""
    if ybus is None:
        ybus = build_ybus(case)
    p_spec, q_spec = specified_injections(case)
    s = calculated_injections(ybus, vm, va)
    return p_spec - s.real, q_spec - s.imag


def _dSbus_dV(y: sp.csr_matrix, v: np.ndarray) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Derivatives of calculated complex injections wrt angle and magnitude."""
    n = len(v)
    ibus = y @ v
    diag_v = sp.diags(v)
    diag_i = sp.diags(ibus)
    diag_vnorm = sp.diags(v / np.abs(v))
    ds_dva = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
    ds_dvm = diag_v @ np.conj(y @ diag_vnorm) + np.conj(diag_i) @ diag_vnorm
    return ds_dva.tocsr(), ds_dvm.tocsr()


def jacobian(case: GridCase, vm: np.ndarray, va: np.ndarray,
             ybus: AdmittanceMatrix | None = None) -> sp.csr_matrix:
    """Full 2n x 2n real Jacobian of the mismatch wrt (va, vm).

    Row order: P mismatch of every bus, then Q mismatch of every bus.
    Column order: va of every bus, then vm of every bus.
    """
    if ybus is None:
        ybus = build_ybus(case)
    v = vm * np.exp(1j * va)
    ds_dva, ds_dvm = _dSbus_dV(ybus.matrix, v)
    top = sp.hstack([-ds_dva.real, -ds_dvm.real])
    bot = sp.hstack([-ds_dva.imag, -ds_dvm.imag])
    return sp.vstack([top, bot]).tocsr()


def _check_islands_solvable(case: GridCase) -> list[int]:
    """Indices of buses excluded from the solve (inert slackless islands).

    An island without a slack bus is only tolerated when nothing electrical
    happens there: no load, no online generator, no shunt, and no closed
    branch (line charging would inject reactive power).
    """
    idx = {b.id: i for i, b in enumerate(case.buses)}
    excluded: list[int] = []
    for members in islands_of(case):
        mset = set(members)
        if any(case.bus(b).kind == "slack" for b in members):
            continue
        has_load = any(l.bus in mset for l in case.loads)
        has_gen = any(g.bus in mset and g.online for g in case.generators)
        has_shunt = any(case.bus(b).gs != 0 or case.bus(b).bs != 0 for b in members)
        has_branch = any(br.closed and br.from_bus in mset for br in case.branches)
        if has_load or has_gen or has_shunt or has_branch:
            raise PowerFlowError(
                f"island with buses {members} has no slack bus but carries "
                "load, generation, shunts, or energized branches")
        excluded.extend(idx[b] for b in members)
    return excluded


def solve_pf(case: GridCase, start: str | tuple[np.ndarray, np.ndarray] = "flat",
             tol: float = 1e-8, max_iter: int = 30) -> PFSolution:
    """Newton-Raphson power flow in polar form.

    ``start`` is "flat" or a (vm, va) warm-start pair. Non-convergence is
    reported in the result, not raised; a singular Jacobian raises
    :class:`PowerFlowError`.
    """
    if any(s.status == "closed" for s in case.switches):
        raise PowerFlowError(
            "case still has closed switches; run the topology processor first")
    ybus = build_ybus(case)
    n = ybus.dimension
    kinds = effective_bus_kinds(case)
    excluded = set(_check_islands_solvable(case))

    slack = [i for i in range(n) if kinds[i] == "slack"]
    pv = [i for i in range(n) if kinds[i] == "pv" and i not in excluded]
    pq = [i for i in range(n) if kinds[i] == "pq" and i not in excluded]
    if not slack:
        raise PowerFlowError("case has no slack bus")

    vset = _setpoint_voltages(case)
    if start == "flat":
        vm = np.ones(n)
        va = np.full(n, case.buses[slack[0]].va if len(slack) == 1 else 0.0)
        for i in slack + pv:
            vm[i] = vset[i]
        for i in slack:
            va[i] = case.buses[i].va
    else:
        vm0, va0 = start
        vm = np.asarray(vm0, dtype=float).copy()
        va = np.asarray(va0, dtype=float).copy()
        if vm.shape != (n,) or va.shape != (n,):
            raise PowerFlowError("warm start dimensions do not match case")
        for i in slack + pv:
            vm[i] = vset[i]
        for i in slack:
            va[i] = case.buses[i].va

    p_spec, q_spec = specified_injections(case)
    pvpq = pv + pq
    npvpq, npq = len(pvpq), len(pq)

    def current_mismatch():
        s = calculated_injections(ybus, vm, va)
        f = np.concatenate([(p_spec - s.real)[pvpq], (q_spec - s.imag)[pq]])
        return f

    iterations = 0
    f = current_mismatch()
    max_mis = float(np.max(np.abs(f))) if len(f) else 0.0
    while max_mis > tol and iterations < max_iter:
        v = vm * np.exp(1j * va)
        ds_dva, ds_dvm = _dSbus_dV(ybus.matrix, v)
        j11 = -ds_dva[np.ix_(pvpq, pvpq)].real
        j12 = -ds_dvm[np.ix_(pvpq, pq)].real
        j21 = -ds_dva[np.ix_(pq, pvpq)].imag
        j22 = -ds_dvm[np.ix_(pq, pq)].imag
        jac = sp.vstack([sp.hstack([j11, j12]), sp.hstack([j21, j22])]).tocsc()
        try:
            lu = spla.splu(jac)
            dx = lu.solve(f)
        except RuntimeError as exc:
            raise PowerFlowError(f"singular Jacobian at iteration {iterations}: {exc}") from exc
        if not np.all(np.isfinite(dx)):
            raise PowerFlowError(f"singular Jacobian at iteration {iterations}")
        # f(x + dx) = 0 to first order with J = df/dx: dx = -J^{-1} f,
        # and J here already carries the minus sign of the mismatch.
        va[pvpq] = va[pvpq] - dx[:npvpq]
        vm[pq] = vm[pq] - dx[npvpq:npvpq + npq]
        iterations += 1
        f = current_mismatch()
        max_mis = float(np.max(np.abs(f))) if len(f) else 0.0

    converged = max_mis <= tol
    s = calculated_injections(ybus, vm, va)
    idx = ybus.index
    pd = np.zeros(n)
    qd = np.zeros(n)
    for l in case.loads:
        pd[idx[l.bus]] += l.pd
        qd[idx[l.bus]] += l.qd
    # Recovered net generation: scheduled at PV/PQ buses, balanced at the
    # slack; PV-bus reactive output comes from the solution.
    pg = p_spec + pd
    qg = q_spec + qd
    for i in slack:
        pg[i] = s.real[i] + pd[i]
        qg[i] = s.imag[i] + qd[i]
    for i in pv:
        qg[i] = s.imag[i] + qd[i]
    return PFSolution(bus_ids=ybus.bus_ids, vm=vm, va=va, pg=pg, qg=qg,
                      iterations=iterations, converged=converged,
                      max_mismatch=max_mis)


def branch_flows(case: GridCase, sol: PFSolution) -> BranchFlows:
    """Terminal power flows and current magnitudes per branch (pu).

    Open branches report zeros.
    """
    idx = {b: i for i, b in enumerate(sol.bus_ids)}
    v = sol.vm * np.exp(1j * sol.va)
    nbr = len(case.branches)
    p_f = np.zeros(nbr)
    q_f = np.zeros(nbr)
    p_t = np.zeros(nbr)
    q_t = np.zeros(nbr)
    i_f = np.zeros(nbr)
    i_t = np.zeros(nbr)
    for k, br in enumerate(case.branches):
        if not br.closed:
            continue
        vf, vt = v[idx[br.from_bus]], v[idx[br.to_bus]]
        yff, yft, ytf, ytt = branch_admittances(br)
        cur_f = yff * vf + yft * vt
        cur_t = ytf * vf + ytt * vt
        sf = vf * np.conj(cur_f)
        st = vt * np.conj(cur_t)
        p_f[k], q_f[k] = sf.real, sf.imag
        p_t[k], q_t[k] = st.real, st.imag
        i_f[k], i_t[k] = abs(cur_f), abs(cur_t)
    return BranchFlows(branch_ids=tuple(br.id for br in case.branches),
                       p_from=p_f, q_from=q_f, p_to=p_t, q_to=q_t,
                       i_from_mag=i_f, i_to_mag=i_t)


def total_losses(case: GridCase, sol: PFSolution) -> float:
    """Total active power absorbed by the network (series + shunt), pu."""
    s = calculated_injections(build_ybus(case), sol.vm, sol.va)
    return float(np.sum(s.real))
