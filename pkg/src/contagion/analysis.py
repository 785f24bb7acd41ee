"""Global vulnerability, clearing-model closed forms, and model-order audits."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import LiabilityNetwork, ShockSpec, apply_first_round, leverage_decomposition, relative_liabilities
from .errors import AggregateMismatch, ModelMismatch, PreconditionViolated, ProvedOrderingViolated
from .models import (
    ModelConfig, Trajectory, ADR, CDR, DC, EN, RV,
    run_acyclic_debtrank, run_cyclic_debtrank, run_default_cascade,
    run_eisenberg_noe, run_rogers_veraart,
)

BOUNDARY_TOL = 1e-12


def equity_weights(network: LiabilityNetwork) -> np.ndarray:
    E = network.equity
    return E / E.sum()


def global_vulnerability(trajectory: Trajectory, network: LiabilityNetwork,
                         t: int | None = None) -> float:
    """Equity-weighted average of individual vulnerabilities at time t."""
    if t is None:
        t = trajectory.h.shape[0] - 1
    if not -trajectory.h.shape[0] <= t < trajectory.h.shape[0]:
        raise IndexError(f"t={t} outside trajectory of length {trajectory.h.shape[0]}")
    return float(equity_weights(network) @ trajectory.h[t])


def first_round_default_set(network: LiabilityNetwork, shock: ShockSpec):
    """Banks whose first-round loss meets or exceeds their equity.

    Returns (index set, boundary flag); the boundary flag marks instances
    where some bank's loss equals its equity exactly, which the tie rule
    places inside the default set.
    """
    first = apply_first_round(network, shock)
    lev = leverage_decomposition(network).external_leverage_total
    raw = first.h1.copy()
    # recompute unclipped loss ratio for the boundary diagnosis
    unclipped = lev * first.effective_shock
    if shock.per_class_shock is not None:
        unclipped = leverage_decomposition(network).external_leverage @ np.asarray(
            shock.per_class_shock, dtype=float)
    members = np.flatnonzero(unclipped >= 1.0 - BOUNDARY_TOL)
    boundary = bool(np.any(np.abs(unclipped - 1.0) <= BOUNDARY_TOL))
    return frozenset(members.tolist()), boundary


@dataclass(frozen=True)
class VulnerabilityReport:
    model: str
    H1: float
    H_inf: float
    second_round: float
    equity_weights: np.ndarray
    defaulted_first_round: frozenset
    defaulted_final: frozenset
    boundary_default: bool = False

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "H1": self.H1,
            "H_inf": self.H_inf,
            "second_round": self.second_round,
            "equity_weights": self.equity_weights.tolist(),
            "defaulted_first_round": sorted(self.defaulted_first_round),
            "defaulted_final": sorted(self.defaulted_final),
            "boundary_default": self.boundary_default,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def vulnerability_report(trajectory: Trajectory, network: LiabilityNetwork,
                         shock: ShockSpec) -> VulnerabilityReport:
    H1 = global_vulnerability(trajectory, network, 1)
    H_inf = global_vulnerability(trajectory, network)
    d1, boundary = first_round_default_set(network, shock)
    return VulnerabilityReport(
        model=trajectory.model,
        H1=H1,
        H_inf=H_inf,
        second_round=H_inf - H1,
        equity_weights=equity_weights(network),
        defaulted_first_round=d1,
        defaulted_final=trajectory.default_sets[-1],
        boundary_default=boundary,
    )


def _require_payments(trajectory: Trajectory):
    if trajectory.payments is None:
        raise ModelMismatch("trajectory carries no payment vectors; need a clearing run")


def en_closed_form_H(network: LiabilityNetwork, shock: ShockSpec,
                     en_trajectory: Trajectory) -> float:
    """Final global vulnerability from first-round losses and payment shortfalls.

    H(inf) = (1/sum E) sum_i [A^e_i s_i - (1 - beta_i)(p_bar_i - p_i(inf))].
    """
    _require_payments(en_trajectory)
    rel = relative_liabilities(network)
    s = shock.effective_per_bank(network)
    shortfall = rel.total_obligations - en_trajectory.payments[-1]
    total = network.external_assets @ s - (1.0 - rel.financial_connectivity) @ shortfall
    return float(total / network.equity.sum())


def en_second_round_exact(network: LiabilityNetwork, shock: ShockSpec,
                          en_trajectory: Trajectory) -> float:
    """Exact second-round loss: first-round excess over equity of defaulters,
    net of the share of payment shortfalls externalized outside the network."""
    _require_payments(en_trajectory)
    rel = relative_liabilities(network)
    s = shock.effective_per_bank(network)
    d1, _ = first_round_default_set(network, shock)
    idx = sorted(d1)
    excess = network.external_assets[idx] * s[idx] - network.equity[idx]
    shortfall = rel.total_obligations - en_trajectory.payments[-1]
    leak = (1.0 - rel.financial_connectivity) @ shortfall
    return float((excess.sum() - leak) / network.equity.sum())


def en_second_round_bound(network: LiabilityNetwork, shock: ShockSpec) -> float:
    """Topology-free upper bound on second-round losses.

    (1/sum E) sum_{i in D(1)} beta_i (A^e_i s_i - E_i); the equivalent
    weighted form sum beta_i w_i (l^e_i s_i - 1) is checked internally.
    """
    rel = relative_liabilities(network)
    s = shock.effective_per_bank(network)
    d1, _ = first_round_default_set(network, shock)
    idx = sorted(d1)
    beta = rel.financial_connectivity[idx]
    excess = network.external_assets[idx] * s[idx] - network.equity[idx]
    bound = float((beta @ excess) / network.equity.sum())

    w = equity_weights(network)[idx]
    lev = leverage_decomposition(network).external_leverage_total[idx]
    alt = float(np.sum(beta * w * (lev * s[idx] - 1.0)))
    if abs(alt - bound) > 1e-12 * max(1.0, abs(bound)):
        raise AssertionError("equivalent bound forms disagree; internal fault")
    return bound


def conservation_check(network: LiabilityNetwork, shock: ShockSpec,
                       en_trajectory: Trajectory) -> float:
    """Aggregate equity loss must equal the external-asset loss when no
    liabilities leave the network (connectivity 1 for every bank)."""
    _require_payments(en_trajectory)
    rel = relative_liabilities(network)
    if np.any(network.external_liabilities > 1e-12):
        raise PreconditionViolated("conservation requires zero outside liabilities")
    s = shock.effective_per_bank(network)
    E0 = network.equity
    h_inf = en_trajectory.h[-1]
    final_equity = E0 * (1.0 - h_inf)
    residual = abs(E0.sum() - final_equity.sum() - float(s @ network.external_assets))
    return residual


@dataclass(frozen=True)
class TopologyInvarianceReport:
    H_values: list
    max_spread: float
    h_dispersion: np.ndarray  # per-bank std of final h across networks
    passed: bool

    def to_dict(self) -> dict:
        return {
            "H_values": self.H_values,
            "max_spread": self.max_spread,
            "h_dispersion": self.h_dispersion.tolist(),
            "passed": self.passed,
        }


def _first_round_signature(network, shock):
    s = shock.effective_per_bank(network)
    d1, _ = first_round_default_set(network, shock)
    beta = relative_liabilities(network).financial_connectivity
    idx = sorted(d1)
    return (network.equity, network.external_assets * s,
            idx, beta[idx])


def topology_invariance_check(networks, shock: ShockSpec,
                              tol: float = 1e-9) -> TopologyInvarianceReport:
    """Final clearing H must agree across networks whose aggregates match.

    Networks must share equities, first-round monetary losses, and the
    connectivity of first-round defaulters — the ingredients of the exact
    second-round expression.
    """
    ref = _first_round_signature(networks[0], shock)
    for net in networks[1:]:
        sig = _first_round_signature(net, shock)
        if (not np.allclose(sig[0], ref[0]) or not np.allclose(sig[1], ref[1])
                or sig[2] != ref[2] or not np.allclose(sig[3], ref[3])):
            raise AggregateMismatch("networks do not share the aggregates that pin H")
    H_vals = []
    finals = []
    for net in networks:
        traj = run_eisenberg_noe(net, shock)
        H_vals.append(global_vulnerability(traj, net))
        finals.append(traj.h[-1])
    spread = max(H_vals) - min(H_vals)
    finals = np.vstack(finals)
    return TopologyInvarianceReport(
        H_values=H_vals,
        max_spread=float(spread),
        h_dispersion=finals.std(axis=0),
        passed=bool(spread <= tol),
    )


def _pad_to(h: np.ndarray, T: int) -> np.ndarray:
    if h.shape[0] >= T:
        return h
    pad = np.repeat(h[-1][None, :], T - h.shape[0], axis=0)
    return np.vstack([h, pad])


@dataclass(frozen=True)
class OrderingReport:
    H_final: dict                      # model -> H(inf)
    proved_chain_checked: bool
    empirical_chain_holds: bool
    dc_exceeds_adr: bool
    en_exceeds_adr: bool
    leading_eigenvalue: float
    recovery_rate: float
    rv_beta: float

    def to_dict(self) -> dict:
        return {
            "H_final": self.H_final,
            "proved_chain_checked": self.proved_chain_checked,
            "empirical_chain_holds": self.empirical_chain_holds,
            "dc_exceeds_adr": self.dc_exceeds_adr,
            "en_exceeds_adr": self.en_exceeds_adr,
            "leading_eigenvalue": self.leading_eigenvalue,
            "recovery_rate": self.recovery_rate,
            "rv_beta": self.rv_beta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def assert_proved_ordering(lo: Trajectory, hi: Trajectory, pair: str,
                           tol: float = 1e-9) -> None:
    """Hard componentwise check h_lo(i, t) <= h_hi(i, t) after padding."""
    T = max(lo.h.shape[0], hi.h.shape[0])
    a = _pad_to(lo.h, T)
    b = _pad_to(hi.h, T)
    bad = np.argwhere(a > b + tol)
    if bad.size:
        t, i = int(bad[0, 0]), int(bad[0, 1])
        raise ProvedOrderingViolated(pair, i, t)


def ordering_audit(network: LiabilityNetwork, shock: ShockSpec,
                   recovery_rate: float = 0.0, rv_beta: float = 1.0) -> OrderingReport:
    """Run all five models, hard-assert the proved chain, report the rest.

    The proved chain is clearing <= discounted clearing <= full-propagation
    cascade, with the cascade run at zero recovery (the regime covered by the
    proofs). The five-model empirical chain at the supplied (R, beta) is
    reported, never asserted.
    """
    cfg_rv = ModelConfig(model=RV, rv_beta=rv_beta)
    cfg_R = ModelConfig(exogenous_recovery_rate=recovery_rate, model=DC)
    en = run_eisenberg_noe(network, shock)
    rv = run_rogers_veraart(network, shock, cfg_rv)
    dc = run_default_cascade(network, shock, cfg_R)
    adr = run_acyclic_debtrank(network, shock,
                               ModelConfig(model=ADR, exogenous_recovery_rate=recovery_rate))
    cdr = run_cyclic_debtrank(network, shock,
                              ModelConfig(model=CDR, exogenous_recovery_rate=recovery_rate))
    cdr0 = cdr if recovery_rate == 0.0 else run_cyclic_debtrank(
        network, shock, ModelConfig(model=CDR, exogenous_recovery_rate=0.0))

    assert_proved_ordering(en, rv, "EN<=RV")
    assert_proved_ordering(rv, cdr0, "RV<=cDR")

    H = {t.model: global_vulnerability(t, network)
         for t in (en, rv, dc, adr, cdr)}
    chain = (H[EN] <= H[DC] + 1e-12 and H[DC] <= H[RV] + 1e-12
             and H[RV] <= H[ADR] + 1e-12 and H[ADR] <= H[CDR] + 1e-12)
    lb = leverage_decomposition(network).interbank_leverage
    lead = float(np.max(np.abs(np.linalg.eigvals(lb))))
    return OrderingReport(
        H_final=H,
        proved_chain_checked=True,
        empirical_chain_holds=bool(chain),
        dc_exceeds_adr=bool(H[DC] > H[ADR] + 1e-12),
        en_exceeds_adr=bool(H[EN] > H[ADR] + 1e-12),
        leading_eigenvalue=lead,
        recovery_rate=recovery_rate,
        rv_beta=rv_beta,
    )
