"""Smoke test of the Python bindings.

Build and run from the repository root:

    cargo build --release -p checkins-py
    cp target/release/libcheckins_py.so python/checkins.so
    python python/smoke_test.py
"""
import json
import math
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import checkins  # noqa: E402


def main():
    graph, truth, log = checkins.generate(seed=1, power=3, n_events=800)
    assert graph.n == 8 and truth.n_users == 8
    assert len(log) == 800 and log.n_locations == 8
    times = [e[0] for e in log.events()]
    assert times == sorted(times)

    train, test = log.split(0.8)
    assert len(train) + len(test) == len(log)

    hyper = checkins.HyperParams()
    result = checkins.fit(train, hyper=hyper, mask=graph)
    trace = result.loglik_trace
    assert all(b >= a - 1e-8 for a, b in zip(trace, trace[1:])), trace
    est = result.params
    for v in range(graph.n):
        for u in range(graph.n):
            if not graph.has_edge(v, u):
                assert est.alpha[v * graph.n + u] == 0.0

    mse = checkins.param_mse(est, truth, aligned=True)
    assert set(mse) == {"joint", "mu", "beta", "alpha", "eta", "temporal"}
    assert mse["joint"] < 0.05, mse

    ll = checkins.avg_pred_loglik(log, est, train.horizon)
    assert math.isfinite(ll)

    t_next = checkins.predict_next_time(log, est, 0, log.horizon)
    assert t_next > log.horizon
    ranked = checkins.rank_locations(log, est, 0, 0, log.horizon)
    assert abs(sum(p for _, p in ranked) - 1.0) < 1e-12
    assert [p for _, p in ranked] == sorted((p for _, p in ranked), reverse=True)

    assert checkins.accuracy_at_k([[2, 0, 1]], [0], 1) == 0.0
    assert checkins.accuracy_at_k([[2, 0, 1]], [0], 2) == 1.0
    assert abs(checkins.ndcg_at_k([[2, 0, 1]], [0], 2) - 1 / math.log2(3)) < 1e-12
    auc = checkins.edge_auc(truth, graph)
    assert auc == 1.0 or graph.edge_count() == 0

    soc = checkins.sociality(log, graph)
    assert all(s is None or 0.0 <= s <= 1.0 for s in soc)

    # a second simulation from the fitted parameters, and file round trips
    sim = checkins.simulate(est, 1, n_events=100, seed=4)
    assert len(sim) == 100
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "events.csv"
        sim.write_csv(str(path))
        back = checkins.EventLog.read_csv(str(path))
        assert back.events() == sim.events()
        graph.write_csv(str(Path(d) / "graph.csv"))
        assert checkins.SocialGraph.read_csv(str(Path(d) / "graph.csv"), graph.n).edges() == graph.edges()
    again = checkins.ModelParams.from_json(est.to_json())
    assert again.alpha == est.alpha
    assert json.loads(result.to_json())["em_iters_used"] == result.em_iters_used

    try:
        checkins.EventLog(1, [0], [(1.0, 0, 0, 3)], 3.0)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown location accepted")

    g = checkins.kronecker_graph("core-periphery", power=4, seed=2)
    assert g.n == 16
    print(f"ok: {len(log)} events, EM {result.em_iters_used} iterations, aligned MSE {mse['joint']:.2e}, "
          f"AvgPredLogLik {ll:.3f}, edge AUC {auc:.2f}")


if __name__ == "__main__":
    main()
