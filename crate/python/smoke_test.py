#!/usr/bin/env python3
"""Smoke test for the evkit extension module.

Build the module first:

    cargo build -p evkit-py --release

The script copies the cdylib next to itself under the importable name and
exercises each binding once with known-answer checks.
"""
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def import_evkit():
    candidates = [
        ROOT / "target" / "release" / "libevkit.so",
        ROOT / "target" / "debug" / "libevkit.so",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("libevkit.so not found; run: cargo build -p evkit-py --release")
    stage = Path(tempfile.mkdtemp(prefix="evkit-py-"))
    shutil.copy2(built, stage / "evkit.so")
    sys.path.insert(0, str(stage))
    import evkit

    return evkit


def check(label, ok):
    print(f"{'ok' if ok else 'FAIL':4} {label}")
    if not ok:
        sys.exit(1)


def main():
    evkit = import_evkit()

    # worked example: v({1})=2, v({2})=4, v({1,2})=10
    game = evkit.Game(["1", "2"])
    game.set_value(["1"], 2.0)
    game.set_value(["2"], 4.0)
    game.set_value(["1", "2"], 10.0)
    sv = game.shapley()
    ev = game.exchange()
    check("two-agent shapley (4, 6)", sv == {"1": 4.0, "2": 6.0})
    check("two-agent exchange (-2, 2)", ev == {"1": -2.0, "2": 2.0})
    check("exchange sums to zero", abs(sum(ev.values())) < 1e-9)

    # size-constrained game: only pairs observable among 4 agents
    names = ["a", "b", "c", "d"]
    contrib = {"a": 1.0, "b": 2.0, "c": 3.0, "d": 10.0}
    pair_game = evkit.Game(names, sizes=[2])
    for i in range(4):
        for j in range(i + 1, 4):
            g = [names[i], names[j]]
            pair_game.set_value(g, contrib[g[0]] + contrib[g[1]])
    pev = pair_game.exchange()
    check("constrained exchange zero-sum", abs(sum(pev.values())) < 1e-9)
    check("constrained exchange ranks d first", max(pev, key=pev.get) == "d")

    # observation-based estimation from singleton scores
    obs = evkit.Observations(names, sizes=[1])
    for n in names:
        obs.push([n], contrib[n])
    est = obs.estimate()
    check("singleton estimates rank d first", max(est, key=est.get) == "d")
    clusters, objective = obs.cluster_search(2, restarts=64, seed=1)
    check("cluster search isolates d", clusters["d"] != clusters["a"] == clusters["b"] == clusters["c"])
    check("cluster objective positive", objective > 0.0)
    shared = obs.clustered(clusters)
    check("clustered credit shared in-cluster", shared["a"] == shared["b"] == shared["c"])

    # commons benchmark: complete coverage of the 12-agent roster
    ds = evkit.commons_dataset(agents=12, dvf="v_final", seed=0)
    o = ds.observations()
    check("complete roster coverage (220 groups)", len(o) == 220)
    credit = o.estimate()
    check(
        "fixed takers rank by restraint",
        credit["take_1"] > credit["take_3"] > credit["take_10"],
    )
    check("plain dataset has no truth map", ds.truth() is None)

    retotal = ds.rescore("v_total").estimate()
    check("rescoring changes the credits", retotal["take_1"] != credit["take_1"])

    anon = evkit.commons_dataset(agents=12, dvf="v_final", anonymize=True, seed=0)
    ids = anon.observations().agents()
    truth = dict(anon.truth())
    check("anonymized ids are one-time (660)", len(ids) == 660 == len(set(ids)))
    check("truth maps every one-time id", sorted(truth) == sorted(ids))
    check("truth targets the original roster", set(truth.values()) == set(credit))

    # imitation: fit and evaluate one policy per method
    means = {}
    for method in ("bc", "group-bc", "ev2bc"):
        policy = ds.imitate(method=method, dvf="v_final")
        mean, sd = policy.evaluate(dvf="v_final", episodes=10, seed=7)
        check(f"{method} evaluation is finite", math.isfinite(mean) and sd >= 0.0)
        means[method] = mean
    again, _ = ds.imitate(method="ev2bc", dvf="v_final").evaluate(
        dvf="v_final", episodes=10, seed=7
    )
    check("evaluation is seed-deterministic", again == means["ev2bc"])

    print("smoke test passed")


if __name__ == "__main__":
    main()
