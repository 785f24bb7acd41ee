"""Financial-contagion simulation on leverage networks.

Five distress-propagation models over a shared balance-sheet data model,
analytical cross-checks (closed forms, conservation, orderings), interbank
network reconstruction from aggregates, panel ingestion, and sweep tooling.
"""
from .core import (
    BalanceSheet, FirstRound, LeverageDecomposition, LiabilityNetwork,
    RelativeLiabilities, ShockSpec, apply_first_round, build_network,
    leverage_decomposition, network_from_vectors, relative_liabilities,
)
from .models import (
    ADR, CDR, DC, EN, MODEL_NAMES, RV, ModelConfig, Trajectory,
    en_vulnerability_form, run_acyclic_debtrank, run_cyclic_debtrank,
    run_default_cascade, run_eisenberg_noe, run_model, run_rogers_veraart,
)
from .analysis import (
    OrderingReport, TopologyInvarianceReport, VulnerabilityReport,
    conservation_check, en_closed_form_H, en_second_round_bound,
    en_second_round_exact, first_round_default_set, global_vulnerability,
    ordering_audit, topology_invariance_check, vulnerability_report,
)
from .reconstruct import (
    Aggregates, EnsembleResult, ReconstructionConfig, calibrate_z,
    fitness_scores, generate_ensemble, ipf_weights, rebalance_totals,
    sample_adjacency, write_ensemble,
)
from .ingest import (
    Panel, PanelRecord, interpolate_missing, load_panel, synthesize_panel,
    to_aggregates,
)
from .sweeps import (
    SweepSpec, make_shock, run_recovery_sweep, run_shock_sweep,
    run_timeseries, run_with_firewall,
)
from . import errors, fixtures

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
