"""Acceptance checks, one test (or group) per criterion.

A short PASS/FAIL line per criterion is printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from chain import run_chain, small_config
from conftest import make_video, random_volume, random_weights
from exmoves.bench import bench_sliding
from exmoves.calibration import fit_platt, sigmoid_probability
from exmoves.classifier import rfe_rank, train_ovr
from exmoves.core import histogram_score, overlap_ratio
from exmoves.descriptor import bow_descriptor, extract_descriptor
from exmoves.exemplar import (
    ActiveSet,
    ExMoveParams,
    active_objective,
    balanced_costs,
    calibrate,
    solve_linear_svm,
    train_exmove,
)
from exmoves.integral import build_integral_stack, raw_score, subvolume_sum
from exmoves.svm import fit_hinge_svm
from exmoves.synthetic import SyntheticSpec, gen_synthetic, negatives_for
from test_descriptor import random_bank
from test_svm import active_set, load_reference

pytestmark = pytest.mark.slow


# --- 1 ----------------------------------------------------------------------


@pytest.mark.criterion(1, "integral-video score equals explicit-histogram score (200 triples, rtol 1e-9, < 10 s)")
def test_score_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for i in range(200):
        dims = tuple(int(d) for d in rng.integers(4, 33, size=3))
        K = 1 if i % 2 == 0 else 5
        sizes = tuple(int(s) for s in rng.integers(2, 40, size=K))
        n = int(rng.integers(0, 2001)) // K
        v = make_video(rng, dims, n * K, sizes=sizes)
        assert len(v.points) <= 2000
        w = random_weights(rng, sizes)
        b = float(rng.normal())
        vol = random_volume(rng, dims)
        fast = raw_score(build_integral_stack(v, w), b, vol)
        slow = histogram_score(v, w, b, vol)
        assert fast == pytest.approx(slow, rel=1e-9, abs=1e-12)
        worst = max(worst, abs(fast - slow) / max(abs(slow), 1e-300))
    elapsed = time.perf_counter() - start
    print(f"max relative difference {worst:.2e}, {elapsed:.2f} s")
    assert elapsed < 10


# --- 2 ----------------------------------------------------------------------


@pytest.mark.criterion(2, "every buffer entry and 500 subvolume sums match brute force (< 30 s)")
def test_buffer_correctness():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    n_volumes = 0
    for i in range(50):
        dims = tuple(int(d) for d in rng.integers(2, 13, size=3))
        v = make_video(rng, dims, int(rng.integers(0, 400)), sizes=(6,))
        w = rng.normal(size=6)
        stack = build_integral_stack(v, [w])
        # voxel grids rebuilt point by point, independent of the buffer code
        counts = np.zeros(dims)
        weights = np.zeros(dims)
        for r, c, t, _, j in v.points:
            counts[r, c, t] += 1
            weights[r, c, t] += w[j]
        for buf, grid in ((stack.denominator, counts), (stack.numerators[0], weights)):
            vals = buf.values
            for r in range(dims[0]):
                for c in range(dims[1]):
                    for t in range(dims[2]):
                        expected = grid[:r + 1, :c + 1, :t + 1].sum()
                        assert vals[r, c, t] == pytest.approx(expected, rel=1e-9, abs=1e-9)
        for _ in range(10):
            vol = random_volume(rng, dims)
            (r0, c0, t0), (r1, c1, t1) = vol.origin, vol.end
            assert subvolume_sum(stack.denominator, vol) == pytest.approx(
                counts[r0:r1, c0:c1, t0:t1].sum(), rel=1e-9, abs=1e-9)
            assert subvolume_sum(stack.numerators[0], vol) == pytest.approx(
                weights[r0:r1, c0:c1, t0:t1].sum(), rel=1e-9, abs=1e-9)
            n_volumes += 1
    elapsed = time.perf_counter() - start
    print(f"{n_volumes} volumes, {elapsed:.2f} s")
    assert n_volumes == 500
    assert elapsed < 30


# --- 3 ----------------------------------------------------------------------


@pytest.mark.criterion(3, "descriptor lengths 41,172 and 2,190; hierarchy holds on 50 extractions")
def test_descriptor_geometry():
    rng = np.random.default_rng(3)
    v = make_video(rng, (24, 24, 24), 500, sizes=(16,))
    assert len(extract_descriptor(v, random_bank(rng, 188, (16,)), stride=(8, 8, 8))) == 41_172
    assert len(extract_descriptor(v, random_bank(rng, 10, (16,)), stride=(8, 8, 8))) == 2_190
    for _ in range(50):
        dims = tuple(int(d) for d in rng.integers(8, 25, size=3))
        v = make_video(rng, dims, int(rng.integers(0, 600)), sizes=(8,))
        bank = random_bank(rng, 3, (8,), extent_range=(2, 10))
        d = extract_descriptor(v, bank, stride=tuple(int(s) for s in rng.integers(1, 5, size=3)))
        for a in range(len(bank)):
            block = d.block(a)
            assert np.all(block[:, :1] >= block[:, 1:])


# --- 4, 5, 6: the exemplar training suite -----------------------------------


@pytest.fixture(scope="module")
def suite():
    """20 exemplars at 32^3, each trained against 30 negative videos."""
    spec = SyntheticSpec(dims=(32, 32, 32), videos_per_class=15, test_per_class=0,
                         exemplars_per_class=7, seed=21)
    ds = gen_synthetic(spec)
    params = ExMoveParams(C=100.0, stride=(4, 4, 4))
    runs = []
    start = time.perf_counter()
    for n, idx in enumerate(ds.exemplars[:20]):
        negs = negatives_for(ds, idx)
        assert len(negs) == 30
        p = ExMoveParams(**{**params.__dict__, "seed": n})
        model, active = train_exmove(ds.videos[idx], ds.volumes[idx], negs, p, exemplar_id=ds.videos[idx].id)
        runs.append((idx, model, active))
    return ds, params, runs, time.perf_counter() - start


def _set_before(active, iteration):
    s = ActiveSet()
    for e in active.entries:
        if e.iteration < iteration:
            s.add(e)
    return s


def _costs(s, C):
    y = np.array([e.label for e in s.entries], dtype=float)
    c = balanced_costs(y, C)
    return float(c[y > 0][0]), float(c[y < 0][0])


@pytest.mark.criterion(4, "mining loop: terminates, mined entries violate at mine time, >= 80% converge (< 5 min)")
def test_mining_contract(suite):
    ds, params, runs, elapsed = suite
    videos = {v.id: v for v in ds.videos}
    converged = 0
    for idx, model, active in runs:
        meta = model.training_meta
        assert meta["iterations"] <= params.max_iterations
        if meta["converged"] and meta["iterations"] < params.max_iterations:
            converged += 1
        # re-solve each iteration's active set and re-score what was mined from it
        for it in range(1, meta["iterations"] + 1):
            mined = [e for e in active.entries if e.iteration == it]
            if not mined:
                continue
            s = _set_before(active, it)
            sol = solve_linear_svm(s, *_costs(s, params.C), tol=params.solver_tol)
            for e in mined:
                score = raw_score(build_integral_stack(videos[e.video_id], sol.weights), sol.bias, e.volume)
                assert score == pytest.approx(e.mined_score, rel=1e-9, abs=1e-9)
                if e.label > 0:
                    assert score < 1.0
                    assert overlap_ratio(e.volume, ds.volumes[idx]) > 0.5
                else:
                    assert score > -1.0
    print(f"{converged}/20 converged before iteration {params.max_iterations}, training {elapsed:.1f} s")
    assert converged >= 16
    assert elapsed < 300


@pytest.mark.criterion(5, "solver within 1e-3 of reference on 20 sets; re-solves never increase the objective")
def test_solver_quality(suite):
    for seed, expected in load_reference():
        X, y, cost = active_set(seed)
        assert fit_hinge_svm(X, y, cost).objective == pytest.approx(expected, rel=1e-3)
    _, params, runs, _ = suite
    for _, model, active in runs:
        iters = model.training_meta["iterations"]
        prev = None
        for it in range(1, iters + 2):
            s = _set_before(active, it)
            C1, C2 = _costs(s, params.C)
            sol = solve_linear_svm(s, C1, C2, tol=params.solver_tol)
            tol = 1e-6 * max(1.0, sol.objective)
            if prev is not None:
                # the previous solution carried onto the grown set is never better than re-solving it
                assert sol.objective <= active_objective(s, prev.weights, prev.bias, C1, C2) + tol
            again = solve_linear_svm(s, C1, C2, tol=params.solver_tol)
            assert again.objective <= sol.objective + tol
            prev = sol


def _stratified(alpha, beta, n_levels=50, per_level=100):
    levels = np.linspace(-3, 3, n_levels)
    n_pos = np.round(sigmoid_probability(levels, alpha, beta) * per_level).astype(int)
    s = np.repeat(levels, per_level)
    y = np.concatenate([np.r_[np.ones(k), -np.ones(per_level - k)] for k in n_pos])
    return s, y


@pytest.mark.criterion(6, "Platt fit recovers planted parameters within 5% (n=5,000); rank preserved")
def test_calibration(suite):
    alpha, beta = -2.0, 1.0
    s, y = _stratified(alpha, beta)
    assert len(s) == 5000
    a, b = fit_platt(s, y)
    print(f"recovered alpha={a:.4f} beta={b:.4f}")
    assert abs(a - alpha) <= 0.05 * abs(alpha)
    assert abs(b - beta) <= 0.05 * abs(beta)
    _, _, runs, _ = suite
    for _, model, active in runs:
        cal = calibrate(model, active)
        X, _ = active.arrays()
        raw = cal.decision(X)
        prob = cal.probability(raw)
        order = np.argsort(raw, kind="stable")
        assert np.all(np.diff(prob[order]) >= 0)
        assert cal.platt[0] < 0


# --- 7 ----------------------------------------------------------------------


@pytest.mark.criterion(7, "3-class pipeline: EXMOVES >= 90% test accuracy and above BOW (< 10 min)")
def test_pipeline_efficacy():
    start = time.perf_counter()
    spec = SyntheticSpec(videos_per_class=20, test_per_class=10, exemplars_per_class=2, seed=0)
    ds = gen_synthetic(spec)
    train, test = ds.indices("train"), ds.indices("test")
    assert (len(train), len(test)) == (60, 30)
    bank = []
    for n, idx in enumerate(ds.exemplars):
        model, active = train_exmove(ds.videos[idx], ds.volumes[idx], negatives_for(ds, idx),
                                     ExMoveParams(C=100.0, seed=n), exemplar_id=ds.videos[idx].id)
        bank.append(calibrate(model, active))

    def features(fn, ids):
        return np.vstack([fn(ds.videos[i]) for i in ids])

    ytr = [ds.labels[i] for i in train]
    yte = [ds.labels[i] for i in test]
    desc = lambda v: extract_descriptor(v, bank).values  # noqa: E731
    ex_acc = train_ovr(features(desc, train), ytr, 1.0).accuracy(features(desc, test), yte)
    bow_acc = train_ovr(features(bow_descriptor, train), ytr, 1.0).accuracy(features(bow_descriptor, test), yte)
    elapsed = time.perf_counter() - start
    print(f"EXMOVES {ex_acc:.3f}  BOW {bow_acc:.3f}  ({elapsed:.1f} s)")
    assert ex_acc >= 0.9
    assert ex_acc > bow_acc
    assert elapsed < 600


# --- 8 ----------------------------------------------------------------------


def planted_descriptors(rng, n_per_class, n_informative=5, n_noise=15, n_classes=3, block=219, spread=0.3):
    """Blocks that respond to one class; noise blocks respond the same way to a random fake label."""
    y = np.repeat(np.arange(n_classes), n_per_class)
    X = np.empty((len(y), (n_informative + n_noise) * block))
    for a in range(n_informative + n_noise):
        key = y if a < n_informative else rng.integers(0, n_classes, size=len(y))
        level = np.where(key == a % n_classes, 0.75, 0.25)
        X[:, a * block:(a + 1) * block] = np.clip(
            level[:, None] + rng.normal(scale=spread, size=(len(y), block)), 0, 1)
    return X, [f"class{c}" for c in y]


@pytest.mark.criterion(8, "RFE keeps exactly the 5 informative exemplars; accuracy within 3 points down to 8")
def test_rfe_sanity():
    rng = np.random.default_rng(8)
    X, y = planted_descriptors(rng, 20)
    H, hy = planted_descriptors(rng, 10)
    ids = [f"info{a}" for a in range(5)] + [f"noise{a}" for a in range(15)]
    trace = rfe_rank(X, y, (20, 3, 73), 1.0, 5, heldout=(H, hy), exemplar_ids=ids)
    print(f"full accuracy {trace.full_accuracy:.3f}, curve {[round(a, 3) for a in trace.accuracy_curve]}")
    assert sorted(trace.survivors) == ids[:5]
    for acc, left in zip(trace.accuracy_curve, trace.remaining):
        if left >= 8:
            assert abs(acc - trace.full_accuracy) <= 0.03


# --- 9 ----------------------------------------------------------------------


@pytest.mark.criterion(9, "integral scoring >= 10x faster than naive at 64^3 with identical scores")
def test_sliding_speedup():
    res = bench_sliding(dims=(64, 64, 64), extent=(16, 16, 16), stride=(2, 2, 3), density=0.05, seed=0)
    print(f"speedup {res['speedup']:.1f}x over {res['positions']} positions, "
          f"{res['mean_points_per_volume']:.0f} points per volume")
    assert res["positions"] >= 10_000
    assert res["mean_points_per_volume"] >= 100
    assert res["scores_match"]
    assert res["speedup"] >= 10


# --- 10 ---------------------------------------------------------------------


@pytest.mark.criterion(10, "CLI chain is byte-identical across runs and worker counts")
def test_cli_determinism(tmp_path):
    outs = [run_chain(tmp_path / name, small_config(seed=5, workers=w))
            for name, w in (("a", 1), ("b", 1), ("c", 2))]

    def files(o):
        return [*o["models"], o["bank"], *o["descriptors"], o["predictions"]]

    ref = [p.read_bytes() for p in files(outs[0])]
    assert len(ref) == 3 + 1 + 2 + 1
    for other in outs[1:]:
        names = [p.name for p in files(other)]
        assert names == [p.name for p in files(outs[0])]
        assert [p.read_bytes() for p in files(other)] == ref
