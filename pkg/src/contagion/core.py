"""Leverage-network data model: balance sheets, liability networks, shocks.

All monetary quantities are float64. Networks are immutable after
construction and safe to share across workers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    IdentityViolation,
    NegativeEntry,
    NonPositiveEquity,
)

IDENTITY_RTOL = 1e-6
MARGIN_RTOL = 1e-6
LEVERAGE_RTOL = 1e-9

DEFAULT_ASSET_CLASSES = ("derivatives", "impaired_loans", "other")


@dataclass(frozen=True)
class BalanceSheet:
    """Book values of a single bank at t=0."""

    external_assets_by_class: np.ndarray  # one entry per asset class
    interbank_assets_total: float
    interbank_liabilities_total: float
    external_liabilities: float
    equity: float

    @property
    def external_assets(self) -> float:
        return float(np.sum(self.external_assets_by_class))

    @property
    def total_assets(self) -> float:
        return self.external_assets + self.interbank_assets_total

    def identity_residual(self) -> float:
        return self.equity - (self.total_assets
                              - self.external_liabilities
                              - self.interbank_liabilities_total)

    @staticmethod
    def single_class(external_assets, interbank_assets, interbank_liabilities,
                     external_liabilities, equity) -> "BalanceSheet":
        return BalanceSheet(
            external_assets_by_class=np.array([float(external_assets)]),
            interbank_assets_total=float(interbank_assets),
            interbank_liabilities_total=float(interbank_liabilities),
            external_liabilities=float(external_liabilities),
            equity=float(equity),
        )


@dataclass(frozen=True)
class LiabilityNetwork:
    """System state at t=0: nominal liability matrix plus per-bank balance sheets.

    liabilities[i, j] is the nominal liability of bank i to bank j.
    """

    n: int
    liabilities: np.ndarray
    balance_sheets: tuple
    asset_classes: tuple = DEFAULT_ASSET_CLASSES

    def __post_init__(self):
        self.liabilities.setflags(write=False)

    @property
    def equity(self) -> np.ndarray:
        return np.array([b.equity for b in self.balance_sheets])

    @property
    def external_assets(self) -> np.ndarray:
        return np.array([b.external_assets for b in self.balance_sheets])

    @property
    def external_assets_by_class(self) -> np.ndarray:
        return np.vstack([b.external_assets_by_class for b in self.balance_sheets])

    @property
    def external_liabilities(self) -> np.ndarray:
        return np.array([b.external_liabilities for b in self.balance_sheets])

    @property
    def interbank_assets(self) -> np.ndarray:
        return np.array([b.interbank_assets_total for b in self.balance_sheets])

    @property
    def interbank_liabilities(self) -> np.ndarray:
        return np.array([b.interbank_liabilities_total for b in self.balance_sheets])

    @property
    def asset_matrix(self) -> np.ndarray:
        """Interbank asset matrix: entry (i, j) is bank i's claim on bank j."""
        return self.liabilities.T


@dataclass(frozen=True)
class LeverageDecomposition:
    external_leverage: np.ndarray     # n x m, per asset class
    interbank_leverage: np.ndarray    # n x n, claim of i on j over E_i
    total_leverage: np.ndarray
    system_external_leverage: float

    @property
    def external_leverage_total(self) -> np.ndarray:
        return self.external_leverage.sum(axis=1)


@dataclass(frozen=True)
class RelativeLiabilities:
    total_obligations: np.ndarray   # p_bar
    pi_matrix: np.ndarray           # row-substochastic relative liabilities
    financial_connectivity: np.ndarray  # beta in [0, 1]


@dataclass(frozen=True)
class ShockSpec:
    """Relative write-downs on external assets at t=1.

    Exactly one of per_class_shock / per_bank_shock must be given; components
    lie in [0, 1].
    """

    per_class_shock: np.ndarray | None = None
    per_bank_shock: np.ndarray | None = None

    def __post_init__(self):
        if (self.per_class_shock is None) == (self.per_bank_shock is None):
            raise ValueError("give exactly one of per_class_shock or per_bank_shock")
        vec = self.per_class_shock if self.per_class_shock is not None else self.per_bank_shock
        vec = np.asarray(vec, dtype=float)
        if np.any(vec < 0) or np.any(vec > 1):
            raise ValueError("shock components must lie in [0, 1]")

    @staticmethod
    def uniform(s: float) -> "ShockSpec":
        return ShockSpec(per_bank_shock=np.array([float(s)]))

    @staticmethod
    def on_bank(i: int, s: float, n: int) -> "ShockSpec":
        vec = np.zeros(n)
        vec[i] = s
        return ShockSpec(per_bank_shock=vec)

    @staticmethod
    def on_class(name: str, s: float, classes=DEFAULT_ASSET_CLASSES) -> "ShockSpec":
        vec = np.zeros(len(classes))
        vec[list(classes).index(name)] = s
        return ShockSpec(per_class_shock=vec)

    def effective_per_bank(self, network: LiabilityNetwork) -> np.ndarray:
        """Relative shock on each bank's total external assets."""
        if self.per_bank_shock is not None:
            s = np.asarray(self.per_bank_shock, dtype=float)
            if s.size == 1:
                return np.full(network.n, s.item())
            if s.size != network.n:
                raise DimensionMismatch(f"per-bank shock has size {s.size}, expected {network.n}")
            return s.copy()
        s_k = np.asarray(self.per_class_shock, dtype=float)
        by_class = network.external_assets_by_class
        if s_k.size != by_class.shape[1]:
            raise DimensionMismatch(
                f"per-class shock has size {s_k.size}, expected {by_class.shape[1]}")
        totals = by_class.sum(axis=1)
        loss = by_class @ s_k
        out = np.zeros(network.n)
        nz = totals > 0
        out[nz] = loss[nz] / totals[nz]
        return out


@dataclass(frozen=True)
class FirstRound:
    shocked_external_assets: np.ndarray  # A^e_i (1 - s_i)
    h1: np.ndarray                       # min{1, l^e_i s_i}
    effective_shock: np.ndarray          # s_i


def build_network(balance_sheets, liability_matrix,
                  asset_classes=DEFAULT_ASSET_CLASSES) -> LiabilityNetwork:
    """Validate and assemble a LiabilityNetwork.

    Rejects banks with non-positive equity, negative entries, self-exposure,
    and row/column sums inconsistent with the per-bank interbank totals.
    """
    L = np.array(liability_matrix, dtype=float)
    n = len(balance_sheets)
    if L.shape != (n, n):
        raise DimensionMismatch(f"liability matrix is {L.shape}, expected ({n}, {n})")
    neg = np.argwhere(L < 0)
    if neg.size:
        raise NegativeEntry(int(neg[0, 0]), int(neg[0, 1]))
    diag = np.argwhere(np.diag(L) != 0)
    if diag.size:
        i = int(diag[0, 0])
        raise NegativeEntry(i, i)

    sheets = []
    for i, b in enumerate(balance_sheets):
        if not isinstance(b, BalanceSheet):
            raise TypeError("balance_sheets must contain BalanceSheet records")
        if b.equity <= 0:
            raise NonPositiveEquity(i)
        scale = max(1.0, b.total_assets)
        resid = b.identity_residual()
        if abs(resid) > IDENTITY_RTOL * scale:
            raise IdentityViolation(i, resid)
        sheets.append(b)

    row = L.sum(axis=1)
    col = L.sum(axis=0)
    for i, b in enumerate(sheets):
        if abs(row[i] - b.interbank_liabilities_total) > MARGIN_RTOL * max(1.0, b.interbank_liabilities_total):
            raise IdentityViolation(i, row[i] - b.interbank_liabilities_total)
        if abs(col[i] - b.interbank_assets_total) > MARGIN_RTOL * max(1.0, b.interbank_assets_total):
            raise IdentityViolation(i, col[i] - b.interbank_assets_total)

    return LiabilityNetwork(n=n, liabilities=L, balance_sheets=tuple(sheets),
                            asset_classes=tuple(asset_classes))


def network_from_vectors(external_assets, external_liabilities, liability_matrix,
                         equity=None) -> LiabilityNetwork:
    """Convenience constructor: derive per-bank totals from the matrix.

    If equity is omitted it is computed from the balance sheet identity.
    """
    L = np.array(liability_matrix, dtype=float)
    ae = np.asarray(external_assets, dtype=float)
    le = np.asarray(external_liabilities, dtype=float)
    ab = L.sum(axis=0)
    lb = L.sum(axis=1)
    if equity is None:
        equity = ae + ab - le - lb
    sheets = [
        BalanceSheet.single_class(ae[i], ab[i], lb[i], le[i], equity[i])
        for i in range(len(ae))
    ]
    return build_network(sheets, L, asset_classes=("external",))


def leverage_decomposition(network: LiabilityNetwork) -> LeverageDecomposition:
    E = network.equity
    ext = network.external_assets_by_class / E[:, None]
    inter = network.asset_matrix / E[:, None]
    total = ext.sum(axis=1) + inter.sum(axis=1)
    l_sys = float(network.external_assets.sum() / E.sum())
    return LeverageDecomposition(
        external_leverage=ext,
        interbank_leverage=inter,
        total_leverage=total,
        system_external_leverage=l_sys,
    )


def relative_liabilities(network: LiabilityNetwork) -> RelativeLiabilities:
    p_bar = network.liabilities.sum(axis=1) + network.external_liabilities
    pi = np.zeros_like(network.liabilities)
    nz = p_bar > 0
    pi[nz] = network.liabilities[nz] / p_bar[nz, None]
    # beta from the same arithmetic path as the Pi row sums
    beta = pi.sum(axis=1)
    return RelativeLiabilities(total_obligations=p_bar, pi_matrix=pi,
                               financial_connectivity=beta)


def apply_first_round(network: LiabilityNetwork, shock: ShockSpec) -> FirstRound:
    """Shock external assets and return the first-round vulnerabilities.

    h_i(1) = min{1, l^e_i s_i}, with per-class shocks aggregated as
    sum_k l^e_ik s_k.
    """
    s = shock.effective_per_bank(network)
    ae = network.external_assets
    lev = leverage_decomposition(network)
    if shock.per_class_shock is not None:
        raw = lev.external_leverage @ np.asarray(shock.per_class_shock, dtype=float)
    else:
        raw = lev.external_leverage_total * s
    h1 = np.minimum(1.0, raw)
    return FirstRound(shocked_external_assets=ae * (1.0 - s), h1=h1, effective_shock=s)
