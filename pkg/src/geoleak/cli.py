"""Command-line entry point: ``geoleak audit | score | synth``."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from geoleak.pipeline import STAGES, AuditConfig, ConfigError, read_report, run_audit
from geoleak.scoring import MissingGroundTruth, read_ground_truth, score


def _csv(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geoleak", description="Location-privacy audit of geotagged posts.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", help="infer key and sensitive locations for every user of a dataset")
    d = AuditConfig()
    a.add_argument("--dataset", required=True)
    a.add_argument("--geocode-db")
    a.add_argument("--auth-geocode-db", help="provider used to verify the largest clusters (default: --geocode-db)")
    a.add_argument("--venue-db")
    a.add_argument("--wordlists-dir")
    a.add_argument("--tz-db")
    a.add_argument("--weights", help="hour-weight table for H9-H11 (default: uniform)")
    a.add_argument("--stages", type=_csv, default=d.stages, help=f"comma list from {','.join(STAGES)}")
    a.add_argument("--baselines", type=_csv, default=(), help="e.g. H1,H15")
    a.add_argument("--cache-scope", choices=("global", "per-user"), default=d.cache_scope)
    a.add_argument("--cache-m", type=float, default=d.cache_m)
    a.add_argument("--eps-m", type=float, default=d.eps_m)
    a.add_argument("--merge-m", type=float, default=d.merge_m)
    a.add_argument("--venue-m", type=float, default=d.venue_m)
    a.add_argument("--verify-k", type=int, default=d.verify_k)
    a.add_argument("--top-candidates", type=int, default=d.top_candidates)
    a.add_argument("--shift-max-h", type=float, default=d.shift_max_h)
    a.add_argument("--shift-latest-end", default=d.shift_latest_end)
    a.add_argument("--shift-min-rest-h", type=float, default=d.shift_min_rest_h)
    a.add_argument("--long-day-h", type=float, default=d.long_day_h)
    a.add_argument("--long-day-share", type=float, default=d.long_day_share)
    a.add_argument("--tfidf-top-k", type=int, default=d.tfidf_top_k)
    a.add_argument("--visit-gap-h", type=float, default=d.visit_gap_h)
    a.add_argument("--visit-span-min", type=float, default=d.visit_span_min)
    a.add_argument("--passby-min", type=float, default=d.passby_min)
    a.add_argument("--out", required=True)
    a.add_argument("--seed", type=int, default=d.seed)
    a.add_argument("--strict", action="store_true")
    a.add_argument("--workers", type=int, default=d.workers)

    s = sub.add_parser("score", help="score a report against ground truth")
    s.add_argument("--report", required=True)
    s.add_argument("--ground-truth", required=True)

    g = sub.add_parser("synth", help="write a synthetic corpus with ground truth")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--users", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--weeks", type=int, default=26)
    g.add_argument("--sigma", type=float, default=10.0)
    g.add_argument("--night-fraction", type=float, default=0.15)
    return ap


def _config(ns: argparse.Namespace) -> AuditConfig:
    fields = AuditConfig.__dataclass_fields__
    return AuditConfig(**{k: v for k, v in vars(ns).items() if k in fields})


def summary(meta: dict, users: list[dict]) -> str:
    homes = sum(1 for u in users if u.get("home"))
    works = sum(1 for u in users if u.get("work"))
    lines = [f"users: {meta['n_users']}", f"homes inferred: {homes}", f"workplaces inferred: {works}"]
    if "sensitive" in meta["stages"]:
        pscs = sum(u.get("sensitive", {}).get("n_pscs", 0) for u in users)
        cb = sum(u.get("sensitive", {}).get("n_content", 0) for u in users)
        db = sum(u.get("sensitive", {}).get("n_duration", 0) for u in users)
        lines.append(f"sensitive clusters: {pscs} (content-corroborated {cb}, duration-corroborated {db})")
    failed = [u["user_id"] for u in users if "error" in u]
    if failed:
        lines.append(f"failed users: {len(failed)}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if ns.command == "audit":
            t0 = time.perf_counter()
            meta, users = run_audit(_config(ns))
            print(summary(meta, users))
            print(f"report written to {ns.out} in {time.perf_counter() - t0:.1f}s")
        elif ns.command == "score":
            _, users = read_report(ns.report)
            print(score(users, read_ground_truth(ns.ground_truth)).format())
        elif ns.command == "synth":
            from geoleak.synthgen import make_corpus, write_corpus
            corpus = make_corpus(ns.users, seed=ns.seed, weeks=ns.weeks, sigma=ns.sigma,
                                 night_fraction=ns.night_fraction)
            for name, path in write_corpus(ns.out_dir, corpus).items():
                print(f"{name}: {path}")
    except (ConfigError, MissingGroundTruth, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
