"""Provider calls saved by the proximity cache, global versus per-user scope.

    python3 scripts/cache_savings.py --users 100 --radii 0 1 2 5
"""

import argparse
import tempfile
from pathlib import Path

from geoleak.pipeline import AuditConfig, run_audit
from geoleak.synthgen import make_corpus, write_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--weeks", type=int, default=26)
    ap.add_argument("--radii", type=float, nargs="+", default=[0.0, 1.0, 2.0, 5.0])
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        paths = write_corpus(Path(tmp), make_corpus(args.users, seed=args.seed, weeks=args.weeks))
        print(f"{'radius_m':>8} {'lookups':>8} {'provider_calls':>14} {'saved':>6}")
        for r in args.radii:
            cfg = AuditConfig(dataset=str(paths["dataset"]), geocode_db=str(paths["geocode_db"]),
                              tz_db=str(paths["tz_db"]), stages=("keyloc",), cache_m=r)
            meta, _ = run_audit(cfg)
            hits, misses = meta["cache"]["hits"], meta["cache"]["misses"]
            total = hits + misses
            print(f"{r:8g} {total:8d} {misses:14d} {hits / total if total else 0:6.1%}")


if __name__ == "__main__":
    main()
