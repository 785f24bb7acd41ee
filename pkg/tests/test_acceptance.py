"""End-to-end acceptance checks.

Each test covers one release criterion at its stated tolerance and prints a
single PASS/FAIL line (run pytest with -rA to see the lines for passing
tests). Tolerances are never loosened here; a red test means the criterion
is not met.
"""
import time
from contextlib import contextmanager

import numpy as np
import pytest

from contagion import (
    ModelConfig, ShockSpec, en_closed_form_H, en_second_round_bound,
    en_second_round_exact, en_vulnerability_form, global_vulnerability,
    network_from_vectors, run_acyclic_debtrank, run_cyclic_debtrank,
    run_default_cascade, run_eisenberg_noe, run_rogers_veraart,
    topology_invariance_check,
)
from contagion import fixtures as fx
from contagion.ingest import interpolate_missing, synthesize_panel, to_aggregates
from contagion.reconstruct import (
    ReconstructionConfig, generate_ensemble, rebalance_totals, write_ensemble,
)


@contextmanager
def criterion(line):
    try:
        yield
    except BaseException:
        print(f"FAIL  {line}")
        raise
    print(f"PASS  {line}")


def pad(h, T):
    return np.vstack([h, np.repeat(h[-1][None], T - h.shape[0], axis=0)])


def cfg(model, R=0.0, beta=1.0):
    return ModelConfig(model=model, exogenous_recovery_rate=R, rv_beta=beta)


def test_criterion_1_golden_fixtures():
    with criterion("criterion 1: golden chain/star/cycle fixtures (<1 s)"):
        t0 = time.time()
        for f in fx.topology_family():
            en = run_eisenberg_noe(f.network, f.shock)
            assert np.allclose(en.h_final, f.expected_h_en, atol=1e-9)
            assert global_vulnerability(en, f.network) == pytest.approx(
                0.16, abs=1e-9)
            assert en_second_round_exact(f.network, f.shock, en) == pytest.approx(
                0.6 / 35.0, abs=1e-9)
            adr = run_acyclic_debtrank(
                f.network, f.shock, cfg("ADR", R=f.recovery_rate))
            H_adr = global_vulnerability(adr, f.network)
            assert H_adr == pytest.approx(f.expected_H_adr, abs=1e-9)
            expected_2dp = 0.79 if f.name == "star" else 0.64
            assert round(H_adr, 2) == expected_2dp
        assert time.time() - t0 < 1.0


def test_criterion_2_counterexample_fixtures():
    with criterion("criterion 2: cascade-ordering counterexamples (exact)"):
        ce = fx.dc_vs_adr_fixture()
        dc = run_default_cascade(ce.network, ce.shock, cfg("DC", R=0.0))
        adr = run_acyclic_debtrank(ce.network, ce.shock, cfg("ADR", R=0.0))
        assert np.allclose(dc.h_final, [1.0, 1.0, 1.0], atol=1e-12)
        assert np.allclose(adr.h_final, [1.0, 1.0, 4.0 / 5.0], atol=1e-12)
        assert dc.h_final[2] > adr.h_final[2]

        ce = fx.en_vs_adr_fixture()
        en = run_eisenberg_noe(ce.network, ce.shock)
        adr = run_acyclic_debtrank(ce.network, ce.shock, cfg("ADR", R=0.0))
        assert np.allclose(en.h_final, [1.0, 1.0, 1.0], atol=1e-12)
        assert np.allclose(adr.h_final, [1.0, 1.0, 32.0 / 49.0], atol=1e-12)
        assert en.h_final[2] > adr.h_final[2]


def test_criterion_3_theorem_suite():
    with criterion("criterion 3: ordering/closed-form theorems on 1000 "
                   "random networks (<60 s)"):
        rng = np.random.default_rng(2024)
        t0 = time.time()
        for _ in range(1000):
            n = int(rng.integers(3, 51))
            net = fx.random_network(rng, n)
            shock = ShockSpec.uniform(rng.uniform(0.0, 1.0))
            beta = rng.uniform(0.0, 1.0)

            en = run_eisenberg_noe(net, shock)
            rv = run_rogers_veraart(net, shock, cfg("RV", beta=beta))
            cdr = run_cyclic_debtrank(net, shock, cfg("CDR", R=0.0))

            # (a) EN <= RV <= cDR componentwise in (i, t)
            T = max(en.h.shape[0], rv.h.shape[0], cdr.h.shape[0])
            assert np.all(pad(en.h, T) <= pad(rv.h, T) + 1e-9)
            assert np.all(pad(rv.h, T) <= pad(cdr.h, T) + 1e-9)

            # (b) discounted payments never exceed full-clearing payments
            Tp = max(en.payments.shape[0], rv.payments.shape[0])
            assert np.all(pad(rv.payments, Tp) <= pad(en.payments, Tp) + 1e-9)

            # (c, d, e) closed forms against the simulation
            H_inf = global_vulnerability(en, net)
            H1 = global_vulnerability(en, net, 1)
            assert en_closed_form_H(net, shock, en) == pytest.approx(
                H_inf, abs=1e-9)
            exact = en_second_round_exact(net, shock, en)
            assert exact == pytest.approx(H_inf - H1, abs=1e-9)
            assert en_second_round_bound(net, shock) >= exact - 1e-9

            # (f) full-recovery discounting reproduces the baseline bitwise
            rv1 = run_rogers_veraart(net, shock, cfg("RV", beta=1.0))
            assert np.array_equal(en.h, rv1.h)
            assert np.array_equal(en.payments, rv1.payments)
        assert time.time() - t0 < 60.0


def _checkerboard_rewire(L, rng, swaps):
    L = L.copy()
    n = L.shape[0]
    done = 0
    for _ in range(200 * swaps):
        if done >= swaps:
            break
        i1, i2 = rng.integers(0, n, size=2)
        j1, j2 = rng.integers(0, n, size=2)
        if i1 == i2 or j1 == j2:
            continue
        if i1 == j1 or i2 == j2 or i1 == j2 or i2 == j1:
            continue
        if L[i1, j1] <= 0 or L[i2, j2] <= 0:
            continue
        delta = rng.uniform(0.2, 0.8) * min(L[i1, j1], L[i2, j2])
        L[i1, j1] -= delta
        L[i2, j2] -= delta
        L[i1, j2] += delta
        L[i2, j1] += delta
        done += 1
    return L


def test_criterion_4_conservation_and_topology_invariance():
    with criterion("criterion 4: loss conservation on 200 closed networks "
                   "+ invariance under 20 rewirings per base"):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(3, 30))
            net = fx.random_network(rng, n, zero_external_liabilities=True)
            s = rng.uniform(0.0, 1.0)
            traj = run_eisenberg_noe(net, ShockSpec.uniform(s))
            initial = net.equity.sum()
            final = (net.equity * (1.0 - traj.h_final)).sum()
            shock_loss = (s * net.external_assets).sum()
            assert abs(initial - final - shock_loss) < 1e-6 * max(1.0, initial)
            # common shock: closed-form system-level vulnerability
            H = global_vulnerability(traj, net)
            l_sys = net.external_assets.sum() / net.equity.sum()
            assert H == pytest.approx(s * l_sys, abs=1e-9)

        for base in range(10):
            n = int(rng.integers(5, 20))
            net = fx.random_network(rng, n, density=0.5,
                                    zero_external_liabilities=True)
            shock = ShockSpec.uniform(rng.uniform(0.01, 0.5))
            variants = [net]
            for _ in range(20):
                L = _checkerboard_rewire(net.liabilities, rng, swaps=3 * n)
                variants.append(network_from_vectors(
                    net.external_assets, np.zeros(n), L, equity=net.equity))
            report = topology_invariance_check(variants, shock)
            assert report.passed
            assert report.max_spread < 1e-9


def test_criterion_5_dual_implementation_oracle():
    with criterion("criterion 5: leverage-form clearing equals payment-form "
                   "clearing to 1e-9"):
        fixtures = [fx.by_name(name) for name in fx.ALL_GOLDEN]
        for f in fixtures:
            base = run_eisenberg_noe(f.network, f.shock)
            alt = en_vulnerability_form(f.network, f.shock)
            assert base.h.shape == alt.h.shape
            assert np.allclose(base.h, alt.h, atol=1e-9)
        rng = np.random.default_rng(99)
        for _ in range(100):
            net = fx.random_network(rng, int(rng.integers(3, 40)))
            shock = ShockSpec.uniform(rng.uniform(0.0, 1.0))
            base = run_eisenberg_noe(net, shock)
            alt = en_vulnerability_form(net, shock)
            T = max(base.h.shape[0], alt.h.shape[0])
            assert np.allclose(pad(base.h, T), pad(alt.h, T), atol=1e-9)


def test_criterion_6_wheel_family_mutualization():
    with criterion("criterion 6: wheel-family counterparty vulnerability "
                   "2.5/(70(n-1)) with equal mutualization"):
        for n in (2, 4, 8, 16):
            f = fx.wheel_fixture(n)
            traj = run_eisenberg_noe(f.network, f.shock)
            leaf_h = traj.h_final[1:]
            assert np.allclose(leaf_h, 2.5 / (70.0 * (n - 1)), rtol=1e-12,
                               atol=0)
            # the centre's excess loss splits equally across the leaves
            assert np.ptp(leaf_h) < 1e-15
            center = f.network
            excess = (center.external_assets[0] * 0.1 - center.equity[0])
            beta1 = (center.interbank_liabilities[0]
                     / (center.interbank_liabilities[0]
                        + center.external_liabilities[0]))
            leaf_loss = traj.h_final[1] * center.equity[1]
            assert leaf_loss == pytest.approx(beta1 * excess / (n - 1),
                                              rel=1e-12)


def test_criterion_7_reconstruction_statistics():
    with criterion("criterion 7: 1000-member reconstruction at n=50 "
                   "(density, marginals, determinism, <2 min)"):
        t0 = time.time()
        panel = synthesize_panel(50, 4, seed=2024)
        panel, _ = interpolate_missing(panel)
        agg, issues = to_aggregates(panel, panel.quarters[-1])
        assert issues == []
        config = ReconstructionConfig(ensemble_size=1000, rng_seed=11,
                                      target_density=0.20)
        result = generate_ensemble(agg, config)

        d = result.densities
        se = d.std() / np.sqrt(len(d))
        assert abs(d.mean() - 0.20) < 3 * se

        balanced = rebalance_totals(agg)
        volume = balanced.interbank_assets.sum()
        row_t = balanced.interbank_assets / volume
        col_t = balanced.interbank_liabilities / volume
        for net in result.networks:
            rows = net.liabilities.sum(axis=0) / volume   # lending shares
            cols = net.liabilities.sum(axis=1) / volume   # borrowing shares
            assert np.abs(rows - row_t).max() < 0.01
            assert np.abs(cols - col_t).max() < 0.01
            rel_r = np.abs(rows - row_t)[row_t > 0] / row_t[row_t > 0]
            rel_c = np.abs(cols - col_t)[col_t > 0] / col_t[col_t > 0]
            assert rel_r.max() < 0.01 and rel_c.max() < 0.01

        rerun = generate_ensemble(agg, config)
        assert len(rerun.networks) == len(result.networks)
        for a, b in zip(result.networks, rerun.networks):
            assert np.array_equal(a.liabilities, b.liabilities)
        assert time.time() - t0 < 120.0


def test_criterion_7_reconstruction_byte_identical(tmp_path):
    with criterion("criterion 7 (files): identical seed writes byte-identical "
                   "ensemble artifacts"):
        panel = synthesize_panel(50, 4, seed=2024)
        panel, _ = interpolate_missing(panel)
        agg, _ = to_aggregates(panel, panel.quarters[-1])
        config = ReconstructionConfig(ensemble_size=25, rng_seed=11,
                                      target_density=0.20)
        for sub in ("a", "b"):
            result = generate_ensemble(agg, config)
            write_ensemble(result, agg, str(tmp_path / sub))
        for name in ("edges.csv", "balance_sheets.csv", "manifest.json"):
            assert ((tmp_path / "a" / name).read_bytes()
                    == (tmp_path / "b" / name).read_bytes()), name


def _h_at(traj, t, net):
    return global_vulnerability(traj, net, t)


def test_criterion_8_qualitative_regimes():
    with criterion("criterion 8: shock/recovery sweep regimes on a fixed "
                   "synthetic ensemble"):
        panel = synthesize_panel(50, 4, seed=77)
        panel, _ = interpolate_missing(panel)
        agg, _ = to_aggregates(panel, panel.quarters[-1])
        config = ReconstructionConfig(ensemble_size=10, rng_seed=5,
                                      target_density=0.20)
        networks = generate_ensemble(agg, config).networks
        assert len(networks) == 10

        thresholds = [1.0 / (net.external_assets / net.equity)
                      for net in networks]
        s_lo = 0.5 * min(t.min() for t in thresholds)
        s_hi = min(1.0, 1.05 * max(t.max() for t in thresholds))
        assert 0.0 < s_lo < s_hi <= 1.0

        for net in networks:
            shock = ShockSpec.uniform(s_lo)
            for traj in (run_eisenberg_noe(net, shock),
                         run_rogers_veraart(net, shock, cfg("RV", beta=0.6)),
                         run_default_cascade(net, shock, cfg("DC", R=0.6))):
                second = (_h_at(traj, None, net) - _h_at(traj, 1, net))
                assert abs(second) < 1e-12   # no defaults, no propagation
            for traj in (run_acyclic_debtrank(net, shock, cfg("ADR", R=0.6)),
                         run_cyclic_debtrank(net, shock, cfg("CDR", R=0.6))):
                second = (_h_at(traj, None, net) - _h_at(traj, 1, net))
                assert second > 0.0          # mark-to-market losses propagate

            shock = ShockSpec.uniform(s_hi)
            for traj in (run_eisenberg_noe(net, shock),
                         run_rogers_veraart(net, shock, cfg("RV", beta=0.6)),
                         run_default_cascade(net, shock, cfg("DC", R=0.6)),
                         run_acyclic_debtrank(net, shock, cfg("ADR", R=0.6)),
                         run_cyclic_debtrank(net, shock, cfg("CDR", R=0.6))):
                assert _h_at(traj, None, net) == pytest.approx(1.0, abs=1e-12)

        mid_shock = ShockSpec.uniform(float(np.median(
            [t.min() for t in thresholds])))
        for net in networks[:5]:
            prev = None
            for R in np.linspace(0.0, 1.0, 6):
                traj = run_acyclic_debtrank(net, mid_shock, cfg("ADR", R=R))
                H = global_vulnerability(traj, net)
                if prev is not None:
                    assert H <= prev + 1e-12
                prev = H


def test_criterion_9_termination_bounds():
    with criterion("criterion 9: sweep/round/iteration bounds, zero "
                   "iteration-cap hits"):
        cases = []
        for name in fx.ALL_GOLDEN:
            f = fx.by_name(name)
            cases.append((f.network, f.shock))
        rng = np.random.default_rng(55)
        for _ in range(300):
            n = int(rng.integers(3, 51))
            cases.append((fx.random_network(rng, n),
                          ShockSpec.uniform(rng.uniform(0.0, 1.0))))
        for net, shock in cases:
            n = net.n
            en = run_eisenberg_noe(net, shock)
            assert en.payments.shape[0] - 2 <= n + 1
            rv = run_rogers_veraart(net, shock, cfg("RV", beta=0.5))
            assert rv.payments.shape[0] - 2 <= n + 1
            for runner, name in ((run_default_cascade, "DC"),
                                 (run_acyclic_debtrank, "ADR")):
                traj = runner(net, shock, cfg(name, R=0.3))
                assert traj.h.shape[0] - 2 <= n
            cdr = run_cyclic_debtrank(net, shock, cfg("CDR", R=0.3))
            assert not cdr.cap_hit
            assert cdr.h.shape[0] - 2 <= 10 * n
