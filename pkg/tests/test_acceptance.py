"""Exit criteria; each test reports one PASS/FAIL line in the terminal summary."""

from __future__ import annotations

import json
import time

import numpy as np
import pytest

from cherryrec.cnle import MockEvaluator, RemoteEvaluator
from cherryrec.cnle.server import serve_mock_llm
from cherryrec.config import EngineConfig
from cherryrec.evaluation import metrics_at_k
from cherryrec.httpjson import server_url
from cherryrec.ingest import apply_k_core, build_snapshot
from cherryrec.knrs import KnowledgeSelector, KnrsSettings, load_credibility, survivor_count
from cherryrec.pipeline import Engine, evaluate, save_models, train
from cherryrec.synthetic import SyntheticSpec, generate
from cherryrec.vans import (
    EnsembleModel,
    LinearSVR,
    PolyModel,
    RandomForest,
    RegressionTree,
    ensemble_predict,
    expand_polynomial,
    loss_and_grad,
    n_terms,
    predict_poly,
    train_poly,
)

from .conftest import clicks_profile
from .oracles import brute_metrics, brute_top, central_difference, naive_k_core, poly_loss
from .test_ingest import _edges, _graph_sequences
from .test_knrs import H, brute_force_values, random_catalog


def criterion(name):
    return pytest.mark.acceptance(name=name)


@criterion("gradient matches central differences")
def test_gradient_correctness(record_property):
    rng = np.random.default_rng(20240501)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=(50, 6))
        y = rng.normal(size=50)
        beta = rng.normal(size=n_terms(6))
        lam = float(rng.uniform(0, 1e-2))
        _, grad = loss_and_grad(beta, expand_polynomial(x), y, lam)
        numeric = central_difference(lambda b: poly_loss(b, x, y, lam), beta, h=1e-5)
        worst = max(worst, float(np.linalg.norm(grad - numeric) / np.linalg.norm(numeric)))
    elapsed = time.perf_counter() - start
    record_property("detail", f"max rel err {worst:.2e}, {elapsed:.2f}s")
    assert worst < 1e-6
    assert elapsed < 5.0


@criterion("metric oracle equivalence")
def test_metric_oracle(record_property):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        ranked = [f"n{i}" for i in rng.permutation(n)]
        truth = f"n{int(rng.integers(0, n + 5))}"
        k = int(rng.choice([1, 5, 10]))
        got, want = metrics_at_k(ranked, truth, k), brute_metrics(ranked, truth, k)
        worst = max(worst, max(abs(a - b) for a, b in zip(got, want)))
    record_property("detail", f"max abs diff {worst:.1e}")
    assert worst <= 1e-12
    assert metrics_at_k(["a", "b", "c", "d", "e"], "c", 5) == (1 / 3, 0.5, 1.0)


@criterion("planted coefficient recovery")
def test_planted_recovery(record_property):
    rng = np.random.default_rng(99)
    planted = PolyModel(6, rng.uniform(-1, 1, size=n_terms(6)))
    x = rng.normal(size=(500, 6))
    y = planted.predict(x)
    start = time.perf_counter()
    # the default learning rate of 0.001 cannot converge in 500 epochs; see the decisions ledger
    trained = train_poly(PolyModel(6, learning_rate=0.1, l2=0.0, epochs=500), x, y)
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(trained.coef - planted.coef)))
    record_property("detail", f"L-inf {err:.2e} after {trained.epochs_run} epochs, {elapsed:.2f}s")
    assert trained.epochs_run <= 500
    assert err < 0.05
    assert elapsed < 10.0


@criterion("filter correctness vs brute-force top fraction")
def test_filter_correctness(record_property):
    rng = np.random.default_rng(5)
    cred = load_credibility()
    settings = KnrsSettings()
    now = 500 * H
    for _ in range(100):
        n = int(rng.integers(40, 1001))
        catalog, signals = random_catalog(rng, n, now)
        ids = sorted(catalog)
        clicked = [ids[int(i)] for i in rng.choice(n, size=int(rng.integers(0, 6)), replace=False)]
        profile = clicks_profile("u", clicked, focus=("sports",))
        selector = KnowledgeSelector(catalog, settings, cred)
        history = selector.recent_history(profile)
        values = brute_force_values(profile, catalog, signals, now, history, settings.weights, cred)
        want = brute_top(values, survivor_count(len(values), settings.keep_fraction))
        assert selector.survivors(profile, now, signals) == want
    record_property("detail", "100 catalogs")


@criterion("k-core oracle")
def test_k_core_oracle(record_property):
    rng = np.random.default_rng(3)
    for _ in range(50):
        users, items = int(rng.integers(1, 26)), int(rng.integers(1, 26))
        density = rng.uniform(0.1, 0.9)
        edges = {(f"u{u}", f"n{i}") for u in range(users) for i in range(items) if rng.random() < density}
        k = int(rng.integers(1, 7))
        seqs, cat = _graph_sequences(edges)
        out, _ = apply_k_core(seqs, cat, k)
        assert _edges(out) == naive_k_core(edges, k)
    record_property("detail", "50 graphs")


@criterion("ensemble identity weights")
def test_ensemble_identity(record_property):
    rng = np.random.default_rng(11)
    for _ in range(1000):
        poly = PolyModel(6, rng.normal(size=n_terms(6)))
        model = EnsembleModel(poly, RandomForest([RegressionTree.constant(rng.normal())]),
                              LinearSVR(rng.normal(size=6), rng.normal()), (1.0, 0.0, 0.0))
        x = rng.normal(size=6) * 10 ** rng.uniform(-3, 3)
        assert ensemble_predict(model, x) == predict_poly(poly, x)
    record_property("detail", "1000 inputs bit-exact")


# --- end-to-end runs on the planted-preference snapshot -----------------------------------

FULL_SPEC = SyntheticSpec(users=200, news=2000, categories=12, seed=0)


def _full_run(raw, out_dir):
    snap = build_snapshot(raw["news"], raw["behaviors"], raw["roles"])
    cfg = EngineConfig()
    result = train(snap, cfg)
    save_models(result, out_dir, cfg)
    outcome = evaluate(snap, result.model, cfg)
    (out_dir / "eval.json").write_text(json.dumps(outcome.to_json(), sort_keys=True, indent=2) + "\n")
    return snap, result, outcome


@pytest.fixture(scope="module")
def full(tmp_path_factory):
    root = tmp_path_factory.mktemp("full")
    start = time.perf_counter()
    raw = generate(FULL_SPEC, root / "raw")
    snap, result, outcome = _full_run(raw, root / "run1")
    elapsed = time.perf_counter() - start
    return {"root": root, "raw": raw, "snap": snap, "result": result, "outcome": outcome, "elapsed": elapsed}


@criterion("planted preference end-to-end")
def test_planted_preference_end_to_end(full, record_property):
    rep, baseline = full["outcome"].report, full["outcome"].random_recall
    ratio = rep.recall / baseline if baseline else float("inf")
    record_property("detail", f"Recall@5 {rep.recall:.4f} vs random {baseline:.4f} ({ratio:.1f}x), {full['elapsed']:.1f}s")
    assert len(full["snap"].catalog) > 0 and rep.users > 0
    assert rep.recall >= 5 * baseline
    assert full["elapsed"] < 60.0


@criterion("subset dominance")
def test_subset_dominance(full, small_snapshot, small_trained, record_property):
    reports = [full["outcome"].report, evaluate(small_snapshot, small_trained.model).report]
    for rep in reports:
        assert rep.subset_recall is not None
        assert rep.subset_mrr >= rep.mrr and rep.subset_ndcg >= rep.ndcg and rep.subset_recall >= rep.recall
    record_property("detail", f"{len(reports)} evaluation runs")


@criterion("determinism of train and eval")
def test_determinism(full, record_property):
    run1, run2 = full["root"] / "run1", full["root"] / "run2"
    _full_run(full["raw"], run2)
    names = sorted(p.name for p in run1.iterdir())
    assert names == sorted(p.name for p in run2.iterdir())
    for name in names:
        assert (run1 / name).read_bytes() == (run2 / name).read_bytes(), name
    record_property("detail", ", ".join(names))


@criterion("protocol round-trip with 4 in flight")
def test_protocol_round_trip(full, record_property):
    snap, model = full["snap"], full["result"].model
    users = sorted(snap.profiles)
    server = serve_mock_llm(delay=0.005)
    try:
        remote = Engine(snap, model=model, evaluator=RemoteEvaluator(server_url(server), concurrency=4))
        local = Engine(snap, model=model, evaluator=MockEvaluator())
        assert remote.recommend_many(users, 10) == local.recommend_many(users, 10)
        remote_eval = evaluate(snap, model, evaluator=RemoteEvaluator(server_url(server), concurrency=4))
        assert remote_eval.to_json() == full["outcome"].to_json()
        assert [r.ranked for r in remote_eval.results] == [r.ranked for r in full["outcome"].results]
        peak = server.max_in_flight
    finally:
        server.shutdown()
        server.server_close()
    record_property("detail", f"{len(users)} users, {server.handled} requests, peak in flight {peak}")
    assert peak == 4
