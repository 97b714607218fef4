"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""
import itertools
import subprocess
import sys
import time

import numpy as np

from viqds_lab import adversaries as adv
from viqds_lab.concatenation import concat_exact, concat_type2_bound, mixed_type2_bound
from viqds_lab.soundness_opt import build_game_from_vis, game_operator_by_partial_trace, random_game, solve_game
from viqds_lab.vis_core import Witness, all_witnesses, exact_acceptance, run_seeds
from viqds_lab.viqds import (ForgeryScenario, forge_attack, keygen, keygen_bitwise,
                             bitwise_sign, relay_exact_enumerated, sign_session)

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)


def test_criterion_01_completeness():
    t0 = time.perf_counter()
    worst = 0.0
    for p in (2, 3):
        for w in all_witnesses(p):
            worst = max(worst, abs(exact_acceptance(w, w) - 1))
    rng = np.random.default_rng(1)
    for _ in range(200):
        w = Witness.random(5, rng)
        worst = max(worst, abs(exact_acceptance(w, w) - 1))
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and dt < 10
    report(1, ok, f"max |honest acceptance - 1| = {worst:.2e} over p=2,3 exhaustive + 200 at p=5 ({dt:.2f}s)")
    assert ok


def _structured_wrong(w: Witness) -> list[Witness]:
    """Wrong witnesses covering each way a key can differ: bases only, values
    only, one basis, and both bases with arbitrary values."""
    p = w.p
    out = []
    for d in range(1, p):
        out += [Witness(p, w.w1 + d, w.w2, w.w3, w.w4), Witness(p, w.w1, w.w2, w.w3 + d, w.w4),
                Witness(p, w.w1 + d, w.w2, w.w3 + d, w.w4), Witness(p, w.w1, w.w2 + d, w.w3, w.w4),
                Witness(p, w.w1, w.w2, w.w3, w.w4 + d), Witness(p, w.w1, w.w2 + d, w.w3, w.w4 + d),
                Witness(p, w.w1 + d, w.w2 + d, w.w3 + d, w.w4 + d)]
    return out


def test_criterion_02_type1_soundness():
    t0 = time.perf_counter()
    ws = list(all_witnesses(2))
    pairs = [(a, b) for a in ws for b in ws if a != b]
    worst2 = max(exact_acceptance(a, b) for a, b in pairs)
    rng = np.random.default_rng(2)
    worst3 = 0.0
    n3 = 0
    while n3 < 1000:
        a, b = Witness.random(3, rng), Witness.random(3, rng)
        if a != b:
            worst3 = max(worst3, exact_acceptance(a, b))
            n3 += 1
    for a in all_witnesses(3):
        for b in _structured_wrong(a):
            worst3 = max(worst3, exact_acceptance(a, b))
    dt = time.perf_counter() - t0
    ok = worst2 <= 0.5 + 1e-10 and worst3 <= 1 / 3 + 1e-10 and len(pairs) == 240 and dt < 60
    report(2, ok, f"max wrong-witness acceptance p=2: {worst2:.12f} ({len(pairs)} pairs), "
                  f"p=3: {worst3:.12f} (1000 random + structured) ({dt:.2f}s)")
    assert ok


def test_criterion_03_type2_closed_form():
    rng = np.random.default_rng(3)
    err_free = err_abort = 0.0
    for p in (2, 3):
        for _ in range(100):
            free = adv.random_povm(p, rng)
            err_free = max(err_free, abs(adv.type2_acceptance_enumerated(free) - 1 / p))
            ab = adv.random_povm(p, rng, with_abort=True)
            expect = 1 / p - np.trace(ab.abort).real / p ** 3
            err_abort = max(err_abort, abs(adv.type2_acceptance_enumerated(ab) - expect))
    ok = err_free < 1e-9 and err_abort < 1e-9
    report(3, ok, f"abort-free max |avg - 1/p| = {err_free:.2e}; with abort max |avg - closed form| = {err_abort:.2e}")
    assert ok


def test_criterion_04_sdp_certification():
    parts, ok = [], True
    for p in (2, 3, 5):
        t0 = time.perf_counter()
        rep = solve_game(build_game_from_vis(p))
        dt = time.perf_counter() - t0
        good = abs(rep.primal - 1 / p) < 1e-5 and 0 <= rep.gap < 1e-6 and dt < 10
        ok &= good
        parts.append(f"p={p}: primal={rep.primal:.10f} gap={rep.gap:.1e} ({dt:.2f}s)")
    report(4, ok, "; ".join(parts))
    assert ok


def test_criterion_05_multiplicativity():
    v22 = concat_type2_bound(2, 2).primal
    v23 = mixed_type2_bound([2, 3]).primal
    ok = abs(v22 - 0.25) < 1e-5 and abs(v23 - 1 / 6) < 1e-5
    report(5, ok, f"p_max(V2 x V2) = {v22:.10f}, p_max(V2 x V3) = {v23:.10f}")
    assert ok


def test_criterion_06_g_positivity():
    rng = np.random.default_rng(6)
    lo = np.inf
    for i in range(100):
        dims = tuple(int(x) for x in rng.integers(1, 4, size=3))
        g = game_operator_by_partial_trace(random_game(dims, rng, classical_b=bool(i % 2)))
        lo = min(lo, float(np.linalg.eigvalsh((g + g.conj().T) / 2).min()))
    ok = lo > -1e-10
    report(6, ok, f"min eigenvalue of G over 100 random games = {lo:.2e}")
    assert ok


def test_criterion_07_zero_knowledge():
    rng = np.random.default_rng(7)
    insts = [adv.honest_verifier_instrument(2)] + [adv.random_specious_instrument(2, rng) for _ in range(20)]
    tv = cf = 0.0
    all_specious = True
    for inst in insts:
        rep = adv.zero_knowledge_report(inst)
        all_specious &= rep.is_specious
        tv = max(tv, rep.max_tv)
        cf = max(cf, rep.closed_form_error if rep.closed_form_error is not None else np.inf)
    control = adv.zero_knowledge_report(adv.eigenbasis_measure_instrument(2))
    ok = all_specious and tv < 1e-9 and cf < 1e-9 and (not control.is_specious) and control.max_tv > 0.01
    report(7, ok, f"21 specious instruments: max TV = {tv:.1e}, closed-form error = {cf:.1e}; "
                  f"control {control.name}: specious={control.is_specious}, TV = {control.max_tv:.3f}")
    assert ok


def test_criterion_08_concatenation():
    ws = list(all_witnesses(2))
    table = np.array([[exact_acceptance(a, b) for b in ws] for a in ws])
    wrong = table[~np.eye(16, dtype=bool)]  # every (true, prover) pair with a wrong key
    # all-components-wrong type-1: l=1,2,3 by full enumeration, l=4 as a product of two l=2 maxima
    t1 = {1: wrong.max()}
    t1[2] = max(concat_exact(2, [ws[a1], ws[a2]], [ws[b1], ws[b2]])
                for (a1, b1), (a2, b2) in itertools.product(
                    [(a, b) for a in range(16) for b in range(16) if a != b], repeat=2))
    t1[3] = float(np.einsum("i,j,k->ijk", wrong, wrong, wrong).max())
    t1[4] = t1[2] * t1[2]
    rng = np.random.default_rng(8)
    t2 = {1: concat_type2_bound(1, 2).primal, 2: concat_type2_bound(2, 2).primal}
    for l in (3, 4):
        t2[l] = float(np.prod([adv.type2_acceptance(adv.random_povm(2, rng)) for _ in range(l)]))
    comp = min(concat_exact(l, w, w) for l in range(1, 5)
               for w in ([Witness.random(2, rng) for _ in range(l)] for _ in range(50)))
    ok = abs(comp - 1) < 1e-10
    for l in range(1, 5):
        ok &= abs(t1[l] - 2.0 ** -l) < 1e-10 and abs(t2[l] - 2.0 ** -l) < 1e-5
    report(8, ok, "type-1 " + ", ".join(f"l={l}:{t1[l]:.6f}" for l in t1)
           + "; type-2 " + ", ".join(f"l={l}:{t2[l]:.6f}" for l in t2) + f"; completeness {comp:.12f}")
    assert ok


def test_criterion_09_viqds():
    parts, ok = [], True
    keys, people = keygen(2, 2, 3, np.random.default_rng(9))
    accepts = sum(sign_session(keys, people[i % 3], i % 2, s).accept
                  for i, s in enumerate(run_seeds(9, 10_000)))
    ok &= accepts == 10_000
    parts.append(f"honest {accepts}/10000")
    for p in (2, 3):
        rng = np.random.default_rng(90 + p)
        scns = [ForgeryScenario(p, 0, 1, "constant", value=v) for v in range(p)]
        scns += [ForgeryScenario(p, 0, 1, "relay"), ForgeryScenario(p, 0, 1, "misdirect")]
        scns += [ForgeryScenario(p, 0, 1, "povm", povm=adv.random_povm(p, rng, with_abort=bool(i % 2)))
                 for i in range(10)]
        keys, _ = keygen(p, 2, 1, rng)
        results = [forge_attack(s, keys, seed=i, trials=200) for i, s in enumerate(scns)]
        worst = max(r.exact for r in results)
        zero = results[0].exact
        ok &= worst <= 1 / p + 1e-10 and abs(zero - 1 / p) < 1e-12
        parts.append(f"p={p}: max exact forgery {worst:.6f} over {len(scns)} strategies, respond-0 {zero:.6f}")
    relay = relay_exact_enumerated(2)
    ok &= abs(relay - 0.5) < 1e-12
    bkeys, bpeople = keygen_bitwise(2, 8, 1, np.random.default_rng(99))
    res = bitwise_sign("10110010", bkeys, bpeople[0], 1)
    ok &= res.key_systems == 16 and res.accept_all == 1
    parts.append(f"relay enumerated {relay:.6f}; bitwise key_systems={res.key_systems}")
    report(9, ok, "; ".join(parts))
    assert ok


def test_criterion_10_reproducibility():
    cmd = [sys.executable, "-m", "viqds_lab.cli", "suite", "--seed", "424242"]
    a = subprocess.run(cmd, capture_output=True)
    b = subprocess.run(cmd, capture_output=True)
    ok = a.returncode == 0 and a.stdout == b.stdout and len(a.stdout) > 0
    report(10, ok, f"two suite runs, {len(a.stdout)} bytes each, identical={a.stdout == b.stdout}, exit={a.returncode}")
    assert ok


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
