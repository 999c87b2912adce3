"""Home/work/sensitive recovery on a synthetic corpus, optionally across GPS noise levels.

    python3 scripts/synthetic_recovery.py --users 200 --seed 7 --sigmas 0 10 20 30
"""

import argparse
import tempfile
import time
from pathlib import Path

from geoleak.pipeline import AuditConfig, run_audit
from geoleak.scoring import read_ground_truth, score
from geoleak.synthgen import make_corpus, write_corpus


def run_once(users, seed, sigma, weeks, workdir, stages):
    paths = write_corpus(Path(workdir) / f"sigma{sigma:g}", make_corpus(users, seed=seed, sigma=sigma, weeks=weeks))
    cfg = AuditConfig(dataset=str(paths["dataset"]), geocode_db=str(paths["geocode_db"]),
                      venue_db=str(paths["venue_db"]), tz_db=str(paths["tz_db"]), stages=stages)
    t0 = time.perf_counter()
    meta, report = run_audit(cfg)
    elapsed = time.perf_counter() - t0
    return score(report, read_ground_truth(paths["ground_truth"])), elapsed, meta


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--weeks", type=int, default=26)
    ap.add_argument("--sigmas", type=float, nargs="+", default=[10.0])
    ap.add_argument("--stages", default="keyloc,sensitive")
    ap.add_argument("--workdir")
    args = ap.parse_args()
    stages = tuple(s for s in args.stages.split(",") if s)

    with tempfile.TemporaryDirectory() as tmp:
        workdir = args.workdir or tmp
        print(f"{'sigma_m':>7} {'home_prec':>9} {'home_cov':>8} {'work_prec':>9} {'work_cov':>8} "
              f"{'cb_prec':>7} {'db_prec':>7} {'cache_hit':>9} {'secs':>6}")
        for sigma in args.sigmas:
            table, secs, meta = run_once(args.users, args.seed, sigma, args.weeks, workdir, stages)
            cache = meta.get("cache", {})
            lookups = cache.get("hits", 0) + cache.get("misses", 0)
            hit = cache.get("hits", 0) / lookups if lookups else 0.0
            cb = f"{table.content.precision:.1%}" if table.content else "-"
            db = f"{table.duration.precision:.1%}" if table.duration else "-"
            print(f"{sigma:7g} {table.home.precision:9.1%} {table.home.coverage:8.1%} {table.work.precision:9.1%} "
                  f"{table.work.coverage:8.1%} {cb:>7} {db:>7} {hit:9.1%} {secs:6.1f}")


if __name__ == "__main__":
    main()
