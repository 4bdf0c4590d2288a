import time

import numpy as np

from kcontract import models, nl_verify as nv, reproduce, sim


def test_compound_constant_check_helper():
    dev = reproduce.compound_constant_check(models.builtin("rossler"), count=10)
    assert dev == 0.0


def test_derive_attractor_box_protocol():
    bundle = models.builtin("rossler_mod")
    box, tr = reproduce.derive_attractor_box(bundle, [0.2, 0.5, 0.0], t_end=200.0)
    assert not tr.truncated
    assert box.contains(tr.states[-1])
    # inflation leaves slack around the trailing samples
    tail = tr.states[len(tr) // 2:]
    assert np.all(box.lower < tail.min(axis=0))
    assert np.all(box.upper > tail.max(axis=0))


def test_decay_rate_dominates_certificate_budget():
    # accepted pair with rates (mu0, mu1): fitted compound decay is at least
    # -(mu1 + (k-1) mu0) up to transient tolerance, over random starts
    bundle = models.builtin("rossler_mod")
    doc = reproduce.load_data("rossler_mod_cert.json")
    box, _ = reproduce.derive_attractor_box(bundle, [0.2, 0.5, 0.0], t_end=200.0)
    cert = nv.search_nl_certificate(bundle.model, box, 3, budget=12, seed=0,
                                    mus=(doc["mu0"], doc["mu1"]))
    assert cert is not None
    bound = -cert.rate_sum - 0.1
    rng = np.random.default_rng(5)
    for x0 in box.sample(rng, 20):
        tr = sim.integrate_compound(bundle.model, x0, np.eye(3), 3, 8.0, 1e-3,
                                    record_every=10)
        a, _, _ = sim.fit_decay(tr)
        assert a >= bound


def test_no_repelling_equilibria_under_full_order_contraction():
    # the chaotic example has constant negative full-order compound, so no
    # equilibrium can repel in every direction
    bundle = models.builtin("rossler")
    eqs = sim.find_equilibria(bundle.model.f, bundle.box, seeds=40)
    assert eqs, "expected at least one equilibrium in the box"
    assert all(not e.repelling for e in eqs)


def test_bundle_quick_synchronverter():
    r = reproduce.reproduce_synchronverter(classify=False, squares=0)
    assert r["verdict"] == "success"
    assert r["printed_inertia"] == {"P0": [0, 0, 4], "P1": [1, 0, 3]}


def test_bundle_quick_example25():
    r = reproduce.reproduce_example25(classify=False)
    assert r["verdict"] == "success"
    assert np.all(np.abs(np.array(r["K"]) - r["K_expected"]) <= 0.02)


def test_all_bundles_under_five_minutes():
    t0 = time.time()
    for name, fn in reproduce.BUNDLES.items():
        result = fn(seed=0)
        assert result["verdict"] == "success", (name, result["checks"])
    elapsed = time.time() - t0
    print(f"\nfour bundles end-to-end: {elapsed:.0f}s")
    assert elapsed < 300.0
