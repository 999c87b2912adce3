"""Prior-work home/work heuristics next to the two-level pipeline on synthetic users.

Hour weights for the weighted estimators are trained on a random 22% of the
users; every method is scored on the remaining users.

    python3 scripts/compare_baselines.py --users 200 --seed 7
"""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from geoleak.baseline import HeuristicId, train_hour_weights, write_weights
from geoleak.cluster import promote_first_level
from geoleak.core import normalize_address
from geoleak.ingest import load_dataset
from geoleak.pipeline import AuditConfig, AuditContext, infer_timeline, localize_clusters, run_audit
from geoleak.scoring import read_ground_truth, score
from geoleak.synthgen import make_corpus, write_corpus

ALL = ",".join(h.value for h in HeuristicId)


def training_sample(paths, user_ids, truths):
    ctx = AuditContext.from_config(AuditConfig(geocode_db=str(paths["geocode_db"]), tz_db=str(paths["tz_db"])))
    timelines = load_dataset(paths["dataset"])
    for uid in user_ids:
        inf = infer_timeline(timelines[uid], ctx)
        fl = promote_first_level(inf.first_level)
        home = normalize_address(truths[uid].home_address)
        home_ids = [c.id for c in fl if c.label.address == home]
        if not home_ids:
            continue
        # the largest first-level cluster carrying the home address stands in for "home"
        yield localize_clusters(fl, inf.posts, ctx.tz, []), home_ids[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--weeks", type=int, default=26)
    ap.add_argument("--train-share", type=float, default=0.22)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        paths = write_corpus(Path(tmp), make_corpus(args.users, seed=args.seed, weeks=args.weeks))
        truths = read_ground_truth(paths["ground_truth"])
        rng = np.random.default_rng(args.seed)
        ids = sorted(truths)
        train = set(rng.choice(ids, size=max(1, round(args.train_share * len(ids))), replace=False))
        weights = train_hour_weights(training_sample(paths, sorted(train), truths))
        wpath = Path(tmp) / "hour_weights.csv"
        write_weights(wpath, weights)

        cfg = AuditConfig(dataset=str(paths["dataset"]), geocode_db=str(paths["geocode_db"]),
                          tz_db=str(paths["tz_db"]), weights=str(wpath), stages=("keyloc",),
                          baselines=tuple(ALL.split(",")))
        _, users = run_audit(cfg)
        held_out = [u for u in users if u["user_id"] not in train]
        table = score(held_out, truths)

    print(f"trained hour weights on {len(train)} users, evaluating {len(held_out)}")
    print(f"{'method':<28} {'precision':>9} {'coverage':>8}")
    for h in HeuristicId:
        s = table.baselines[h.value]
        print(f"{h.value + ' ' + h.name.split('_', 1)[1]:<28} {s.precision:9.1%} {s.coverage:8.1%}")
    print(f"{'two-level home':<28} {table.home.precision:9.1%} {table.home.coverage:8.1%}")
    print(f"{'two-level work':<28} {table.work.precision:9.1%} {table.work.coverage:8.1%}")


if __name__ == "__main__":
    main()
