"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
Criteria 7 and 8 share one set of desk-protocol runs (about two minutes on one core).
"""
import contextlib
import itertools
import math
import random
import statistics
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from lsconf.combinatorics import MultisetSpec, count_permutations, iter_permutations, rank, unrank
from lsconf.nn_core import backward, forward, init_model, predict
from lsconf.training import (DESK_SEEDS, TrainConfig, SyntheticDatasetSpec, ce_loss, cosine_loss,
                             desk_config, epochs_to_accuracy, euclidean_loss, train)
from lsconf.vector_systems import (build_system, mcs_analytic, mcs_bruteforce, n_min, parse_label,
                                   project_hyperplane)

THRESHOLD = 0.9


@pytest.fixture
def criterion(request):
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(text):
        if reporter is not None:
            reporter.write_line(text)
        else:
            print(text)

    @contextlib.contextmanager
    def run(number, title):
        t0 = time.perf_counter()
        details = []
        try:
            yield details
        except BaseException as exc:
            why = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            emit(f"criterion {number} FAIL {title} ({time.perf_counter() - t0:.1f}s): {why}")
            raise
        extra = f" [{'; '.join(details)}]" if details else ""
        emit(f"criterion {number} PASS {title} ({time.perf_counter() - t0:.1f}s){extra}")

    return run


# ---------------------------------------------------------------- 1. counts

def test_criterion_1_counts(criterion):
    with criterion(1, "n=384 member counts exact") as notes:
        t0 = time.perf_counter()
        got = {lab: build_system(lab, 384).n_vects for lab in ("11", "21", "22", "P")}
        elapsed = time.perf_counter() - t0
        assert got["11"] == 147072
        assert got["21"] == 28090752
        assert got["22"] == 5351288256
        digits = str(got["P"])
        assert len(digits) == 828
        # leading digits from log-gamma, independent of the integer arithmetic
        log10 = math.lgamma(385) / math.log(10)
        assert int(log10) == 827
        lead = 10 ** (log10 - 827)
        assert digits[:6] == f"{lead:.5f}".replace(".", "")
        assert elapsed < 1.0, f"took {elapsed:.3f}s"
        notes.append(f"P_384 = {digits[:6]}...e827")


# ---------------------------------------------------------------- 2. mcs

def pair_scan(rows):
    """Closest-pair |cos| over non-antipodal pairs by exhaustive double loop."""
    unit = [np.asarray(r, float) / np.linalg.norm(np.asarray(r, float)) for r in rows]
    best = 0.0
    for i in range(len(unit)):
        for j in range(i + 1, len(unit)):
            c = float(unit[i] @ unit[j])
            if c > -1 + 1e-12:
                best = max(best, abs(c))
    return best


def test_criterion_2_mcs(criterion):
    with criterion(2, "mcs analytic vs brute force") as notes:
        t0 = time.perf_counter()
        for lab, value in (("11", 0.5), ("21", 2 / 3), ("22", 0.75)):
            for n in (6, 7):
                assert mcs_analytic(parse_label(lab), n) == pytest.approx(value, abs=1e-15)
                assert abs(mcs_bruteforce(build_system(lab, n)) - value) < 1e-12, (lab, n)
        for n, value in ((3, 0.5), (4, 0.8), (5, 0.9)):
            assert abs(1 - 12 / (n * (n * n - 1)) - value) < 1e-15
            sys_p = build_system("P", n)
            scan = pair_scan(itertools.permutations(np.arange(n) - (n - 1) / 2))
            assert abs(mcs_bruteforce(sys_p) - value) < 1e-12, n
            assert abs(scan - value) < 1e-12, n
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0, f"took {elapsed:.1f}s"


# ---------------------------------------------------------------- 3. n_min

def count_by_formula(label, n):
    mults = {"11": (1, 1), "21": (2, 1), "22": (2, 2)}[label]
    nonzero = sum(mults)
    zeros = n - nonzero
    if zeros < max(mults):
        return 0
    return math.factorial(n) // (math.factorial(zeros) * math.prod(math.factorial(m) for m in mults))


def iterate_n_min(label, classes):
    n = 1
    while count_by_formula(label, n) < classes:
        n += 1
    return n


def test_criterion_3_n_min(criterion):
    with criterion(3, "n_min values") as notes:
        cases = [("21", 1000, 14), ("21", 5000, 23), ("11", 5000, 72), ("22", 5000, 14), ("21", 600000, 108)]
        for lab, classes, expected in cases:
            assert iterate_n_min(lab, classes) == expected
            assert n_min(parse_label(lab), classes) == expected, (lab, classes)
        notes.append(", ".join(f"{lab}/{c}->{e}" for lab, c, e in cases))


# ---------------------------------------------------------------- 4. rank/unrank

def lex_multiset_perms(counts):
    """Lexicographic multiset permutations by recursion over sorted distinct values."""
    values = sorted(counts)
    total = sum(counts.values())
    out, prefix = [], []

    def rec():
        if len(prefix) == total:
            out.append(tuple(prefix))
            return
        for v in values:
            if counts[v]:
                counts[v] -= 1
                prefix.append(v)
                rec()
                prefix.pop()
                counts[v] += 1

    rec()
    return out


ROUNDTRIP_SPECS = [
    {1: 1, -1: 1, 0: 3},
    {1: 1, -1: 1, 0: 10},
    {1: 2, -1: 1, 0: 9},
    {1: 2, -1: 2, 0: 8},
    {1: 2, -1: 2, 0: 2},
    {Fraction(k) - Fraction(7, 2): 1 for k in range(8)},
    {Fraction(k) - Fraction(11, 2): 1 for k in range(12)},
    {0: 4, 1: 4, 2: 4},
    {3: 1, 5: 2, 7: 3, 9: 4},
    {0: 11, 1: 1},
    {-2: 3, 0: 3, 2: 3, 4: 2},
    {1: 6, -1: 6},
]


def test_criterion_4_rank_unrank(criterion):
    with criterion(4, "rank/unrank roundtrips and enumeration") as notes:
        rng = random.Random(2024)
        enumerated = 0
        for counts in ROUNDTRIP_SPECS:
            spec = MultisetSpec.from_counts(counts)
            total = count_permutations(spec)
            assert total == math.factorial(sum(counts.values())) // math.prod(
                math.factorial(m) for m in counts.values())
            for _ in range(1000):
                i = rng.randrange(total)
                v = unrank(spec, i)
                assert sorted(v) == sorted(itertools.chain.from_iterable([k] * m for k, m in counts.items()))
                assert rank(spec, v) == i
            if total <= 10 ** 5:
                assert list(iter_permutations(spec)) == lex_multiset_perms(dict(counts))
                enumerated += 1
        assert len(ROUNDTRIP_SPECS) >= 10 and enumerated >= 5
        notes.append(f"{len(ROUNDTRIP_SPECS)} specs, {enumerated} fully enumerated")


# ---------------------------------------------------------------- 5. gradients

def numeric_grads(model, loss_of_output, x, h=1e-5):
    grads = []
    for p in model.params():
        g = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + h
            lp = loss_of_output(predict(model, x))
            p[i] = old - h
            lm = loss_of_output(predict(model, x))
            p[i] = old
            g[i] = (lp - lm) / (2 * h)
        grads.append(g)
    return grads


def test_criterion_5_gradients(criterion):
    with criterion(5, "loss gradients through a 3-layer model") as notes:
        t0 = time.perf_counter()
        rng = np.random.default_rng(11)
        x = rng.standard_normal((8, 10))
        targets = rng.standard_normal((8, 5))
        targets /= np.linalg.norm(targets, axis=1, keepdims=True)
        labels = rng.integers(0, 6, size=8)
        worst = {}
        for loss in ("cosine", "euclidean", "ce"):
            model = init_model([10, 12, 9, 5], "relu", seed=3, n_classes=6 if loss == "ce" else None)
            fn = {"cosine": lambda o: cosine_loss(o, targets)[:2],
                  "euclidean": lambda o: euclidean_loss(o, targets),
                  "ce": lambda o: ce_loss(o, labels)}[loss]
            out, cache = forward(model, x)
            analytic = backward(model, cache, fn(out)[1])
            numeric = numeric_grads(model, lambda o: fn(o)[0], x)
            a = np.concatenate([g.ravel() for g in analytic])
            b = np.concatenate([g.ravel() for g in numeric])
            worst[loss] = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
        elapsed = time.perf_counter() - t0
        assert max(worst.values()) < 1e-4, worst
        assert elapsed < 30.0, f"took {elapsed:.1f}s"
        notes.append(", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


# ---------------------------------------------------------------- 6. projection

def test_criterion_6_projection_gram(criterion):
    with criterion(6, "Gram invariance under hyperplane projection") as notes:
        worst = 0.0
        for k in range(2, 7):
            roots = build_system("11", k + 1).vectors(normalize=False)
            assert roots.shape[0] == k * (k + 1)  # |A_k| = k(k+1)
            proj = project_hyperplane(roots)
            assert proj.shape[1] == k
            worst = max(worst, float(np.max(np.abs(roots @ roots.T - proj @ proj.T))))
        assert worst < 1e-9
        notes.append(f"max deviation {worst:.1e}")


# ---------------------------------------------------------------- 7/8. desk protocol

DESK_RUNS = {
    "A": dict(label="11"),
    "V21": dict(label="21"),
    "P": dict(label="P"),
    "V21@4n": dict(label="21", n=4 * n_min(parse_label("21"), 200)),
    "CE@n": dict(label="21", loss="ce"),
    "CE@4n": dict(label="21", n=4 * n_min(parse_label("21"), 200), loss="ce"),
}


@pytest.fixture(scope="module")
def desk_results():
    """name -> (per-seed epochs-to-threshold with inf for never, any diverged, seconds)."""
    out = {}
    for name, kw in DESK_RUNS.items():
        t0 = time.perf_counter()
        epochs, diverged = [], False
        for seed in DESK_SEEDS:
            metrics = train(desk_config(seed=seed, stop_at_accuracy=THRESHOLD, **kw)).metrics
            hit = epochs_to_accuracy(metrics, THRESHOLD)
            epochs.append(math.inf if hit is None else hit)
            diverged |= metrics.diverged
        out[name] = (epochs, diverged, time.perf_counter() - t0)
    return out


def median(results, name):
    return statistics.median(results[name][0])


def test_criterion_7_configuration_ordering(criterion, desk_results):
    with criterion(7, "V21 <= A and P diverged or worst (median epochs to 0.9)") as notes:
        summary = {k: median(desk_results, k) for k in ("A", "V21", "P")}
        notes.append(", ".join(f"{k} {v}" for k, v in summary.items()))
        for name in ("A", "V21", "P"):
            assert desk_results[name][2] < 600, f"{name} took {desk_results[name][2]:.0f}s"
        p_epochs, p_diverged, _ = desk_results["P"]
        assert p_diverged or summary["P"] >= max(summary["A"], summary["V21"]), summary
        assert summary["V21"] <= summary["A"], f"median epochs {summary}"


def test_criterion_8_n_min_benefit(criterion, desk_results):
    with criterion(8, "V21 at n_min no slower than at 4*n_min") as notes:
        lsc, wide = median(desk_results, "V21"), median(desk_results, "V21@4n")
        ce, ce_wide = median(desk_results, "CE@n"), median(desk_results, "CE@4n")
        notes.append(f"LSC {lsc} vs {wide}; CE (informational) {ce} vs {ce_wide}")
        assert lsc <= wide, (lsc, wide)


# ---------------------------------------------------------------- 9. determinism

def test_criterion_9_determinism(criterion, tmp_path):
    with criterion(9, "rerun gives bitwise-identical metrics CSV") as notes:
        configs = [
            desk_config("21", seed=3, epochs=4),
            TrainConfig(label="P", n=6, loss="euclidean", epochs=4, hidden=(48,), strategy="shuffled",
                        assign_seed=9, dataset=SyntheticDatasetSpec(n_classes=60, samples_per_class=20)),
            TrainConfig(label="22", loss="ce", epochs=4, optimizer="sgd_momentum", lr=0.05,
                        dataset=SyntheticDatasetSpec(n_classes=40, samples_per_class=20, seed=5)),
        ]
        for i, cfg in enumerate(configs):
            a, b = tmp_path / f"{i}a.csv", tmp_path / f"{i}b.csv"
            train(cfg).metrics.write_csv(a)
            train(cfg).metrics.write_csv(b)
            assert a.read_bytes() == b.read_bytes(), cfg.config_hash()
        notes.append(f"{len(configs)} configs")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
