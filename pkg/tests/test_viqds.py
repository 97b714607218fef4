import numpy as np
import pytest
from scipy.stats import chi2_contingency

from viqds_lab.adversaries import random_povm
from viqds_lab.vis_core import run_seeds
from viqds_lab.viqds import (ForgeryScenario, bitwise_sign, exact_session_acceptance,
                             forge_attack, keygen, keygen_bitwise, relay_exact_enumerated,
                             run_scenario, sign_session)


def test_keygen_counts():
    keys, parts = keygen(2, 2, 3, np.random.default_rng(0))
    assert len(keys.sk) == 2 and len(parts) == 3
    assert sum(len(p.memory) for p in parts) == 6
    for part in parts:
        for copy in part.memory.values():
            assert all(abs(np.linalg.norm(s.state) - 1) < 1e-12 for s in copy)
    with pytest.raises(RuntimeError):
        parts[0].store(5, keys.pk(0))
    with pytest.raises(ValueError):
        keygen(2, 1, 1, np.random.default_rng(0))


def test_keygen_distinct_seeds():
    # 16^8 possible maps, so 100 draws collide with probability below 1e-6
    maps = {tuple(sorted((m, w[0].values) for m, w in keygen(2, 8, 1, np.random.default_rng(s))[0].sk.items()))
            for s in range(100)}
    assert len(maps) == 100


def test_honest_sessions_always_accept():
    keys, parts = keygen(2, 4, 2, np.random.default_rng(1))
    seeds = run_seeds(5, 10_000)
    assert sum(sign_session(keys, parts[i % 2], i % 4, s).accept for i, s in enumerate(seeds)) == 10_000


def test_wrong_key_bounded():
    rng = np.random.default_rng(2)
    for p in (2, 3):
        keys, parts = keygen(p, 5, 1, rng)
        for m in range(5):
            for m2 in range(5):
                q = exact_session_acceptance(keys, m, m2)
                if keys.sk[m] != keys.sk[m2]:
                    assert q <= 1 / p + 1e-10


def test_missing_pk_copy():
    keys, parts = keygen(2, 2, 1, np.random.default_rng(3))
    with pytest.raises(KeyError):
        sign_session(keys, parts[0], 9, 0)


def test_forgery_examples():
    rng = np.random.default_rng(4)
    scns = [ForgeryScenario(2, 0, 1, "constant"), ForgeryScenario(2, 0, 1, "relay"),
            ForgeryScenario(2, 0, 1, "misdirect"),
            ForgeryScenario(2, 0, 1, "povm", povm=random_povm(2, rng))]
    keys, _ = keygen(2, 2, 1, rng)
    for scn in scns:
        res = forge_attack(scn, keys, seed=6, trials=400)
        assert res.exact <= res.bound + 1e-10
        q = res.exact_given_keys
        assert abs(res.empirical - q) <= 3 * np.sqrt(max(q * (1 - q), 1e-12) / 400) + 1e-12
    assert forge_attack(scns[0], keys, 6, 10).exact_given_keys == pytest.approx(0.5, abs=1e-12)
    assert forge_attack(scns[1], keys, 6, 10).exact_given_keys == pytest.approx(0.5, abs=1e-12)
    assert forge_attack(scns[3], keys, 6, 10).exact == pytest.approx(0.5, abs=1e-9)


def test_relay_enumeration():
    assert relay_exact_enumerated(2) == pytest.approx(0.5, abs=1e-12)
    assert relay_exact_enumerated(3) == pytest.approx(1 / 3, abs=1e-12)


def test_forgery_key_averaged_sampling():
    scn = ForgeryScenario(2, 0, 1, "misdirect")
    res = forge_attack(scn, None, seed=8, trials=4000)
    assert abs(res.empirical - res.exact) <= 3 * np.sqrt(res.exact * (1 - res.exact) / 4000)


def test_forgery_independence_enforced():
    keys, _ = keygen(2, 2, 1, np.random.default_rng(9))
    late = ForgeryScenario(2, 0, 1, "constant")
    with pytest.raises(ValueError):
        forge_attack(late, keys, 0, 10)
    with pytest.raises(ValueError):
        ForgeryScenario(2, 0, 0, "constant")
    with pytest.raises(ValueError):
        ForgeryScenario(2, 0, 1, "telepathy")


def test_bitwise_examples():
    rng = np.random.default_rng(10)
    forged = ForgeryScenario(2, (3, 0), (3, 1), "constant")
    forged4 = ForgeryScenario(2, (3, 0), (3, 1), "constant")
    keys, parts = keygen_bitwise(2, 8, 2, rng)
    res = bitwise_sign("10110010", keys, parts[0], 1)
    assert res.accept_all == 1 and res.key_systems == 16 and res.challenges == 8
    att = bitwise_sign("10110010", keys, parts[0], 1, forgeries={3: forged})
    assert att.exact_accept == pytest.approx(0.5, abs=1e-12)
    keys4, parts4 = keygen_bitwise(2, 8, 1, rng, l=4)
    att4 = bitwise_sign("10110010", keys4, parts4[0], 2, forgeries={3: forged4})
    assert att4.exact_accept == pytest.approx(1 / 16, abs=1e-12)
    with pytest.raises(ValueError):
        bitwise_sign("101", keys, parts[0], 0)


def test_session_independence():
    keys, parts = keygen(2, 2, 1, np.random.default_rng(11))
    sig = np.zeros((2, 2), dtype=int)
    for s in run_seeds(12, 10_000):
        a, b = run_seeds(int(s), 2)
        r0 = sign_session(keys, parts[0], 0, a)
        r1 = sign_session(keys, parts[0], 1, b)
        sig[r0.signature[0], r1.signature[0]] += 1
    assert chi2_contingency(sig)[1] > 0.01


def test_scenarios():
    lines, summary = run_scenario({"p": 2, "L": 2, "N": 2, "seed": 1, "sessions": 50})
    assert len(lines) == 50 and summary["completeness_rate"] == 1.0
    _, summary = run_scenario({"p": 3, "L": 2, "N": 1, "seed": 2, "sessions": 200,
                               "adversary": {"kind": "constant", "parameters": {"value": 0}}})
    assert summary["exact_bound"] == pytest.approx(1 / 3) and summary["exact_forgery"] == pytest.approx(1 / 3)
    _, summary = run_scenario({"p": 2, "N": 1, "seed": 3, "sessions": 2, "scheme": "bitwise", "bits": "10110010"})
    assert summary["key_systems"] == 16 and summary["accept_rate"] == 1.0
    _, summary = run_scenario({"p": 2, "N": 1, "seed": 3, "sessions": 2, "deterrent_rate": 1.0, "L": 3})
    assert summary["completeness_rate"] == 1.0
    with pytest.raises(ValueError):
        run_scenario({"p": 4, "seed": 1})
    with pytest.raises(ValueError):
        run_scenario({"p": 2})
