import math

import numpy as np
import pytest

import ebpca


def test_version():
    assert ebpca.__version__ == "0.1.0"


def test_signal_estimate_roundtrip():
    s, g = 2.0, 2.0
    lam = ebpca.spike_singular_limit(s, g) / math.sqrt(g)
    assert ebpca.estimate_signal(lam, g) == pytest.approx(s, abs=1e-10)
    assert ebpca.critical_signal(1.0) == pytest.approx(1.0)
    assert ebpca.bulk_edges(4.0) == pytest.approx((1.0, 3.0))


def test_predict_observables():
    p = ebpca.predict_observables(2.0, 2.0)
    assert p["sigma_star_sq"] == pytest.approx(9 / 40)
    assert p["mu_star"] ** 2 + p["sigma_star_sq"] == pytest.approx(1.0)


def test_npmle_and_denoise():
    rng = np.random.default_rng(0)
    theta = rng.choice([-1.0, 1.0], size=(2000, 1))
    x = theta + rng.standard_normal((2000, 1))
    one = np.eye(1)
    fit = ebpca.fit_npmle(x, one, one)
    assert fit["converged"]
    assert np.all(np.diff(fit["log_likelihood"]) >= 0)
    assert fit["weights"].sum() == pytest.approx(1.0)
    mean, jac = ebpca.denoise(np.array([[1.0]]), one, one, np.array([[-1.0], [1.0]]), np.array([0.5, 0.5]))
    assert mean[0, 0] == pytest.approx(math.tanh(1.0), abs=1e-10)
    assert jac[0, 0] == pytest.approx(1.0 - math.tanh(1.0) ** 2, abs=1e-10)


def test_ebpca_beats_pca_on_two_point():
    inst = ebpca.generate(600, 900, [2.0], seed=3)
    res = ebpca.ebpca(inst["Y"], 1, iters=5, seed=3, U_true=inst["U"], V_true=inst["V"])
    assert res["U"].shape == (600, 1)
    assert res["V"].shape == (900, 1)
    pca = ebpca.accuracy(res["G_pca"], inst["V"])["alignment"][0]
    eb = ebpca.accuracy(res["V"], inst["V"])["alignment"][0]
    assert eb > pca
    assert len(res["history"]) == 6
    assert "acc_v" in res["history"][-1]


def test_state_evolution_fixed_point():
    fp = ebpca.se_fixed_point("two_point", "two_point", [2.0], 1.0)
    assert fp["converged"]
    assert fp["Q"][0, 0] == pytest.approx(1.833022022076, abs=1e-8)
    assert fp["bayes_risk"] == pytest.approx(0.640030266586, abs=1e-8)


def test_diagnose_pure_noise():
    y = np.random.default_rng(1).standard_normal((300, 300))
    d = ebpca.diagnose(y, 1)
    assert d["outliers"] == 0
    assert d["edges"] == pytest.approx((0.0, 2.0))


def test_errors_are_translated():
    y = np.random.default_rng(2).standard_normal((200, 200))
    with pytest.raises(ebpca.EbpcaError, match="nothing_to_denoise|no super-critical"):
        ebpca.ebpca(y, 1)
    with pytest.raises(ValueError):
        ebpca.generate(100, 100, [0.0])
