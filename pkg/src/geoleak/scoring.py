"""Precision/coverage of audit reports against planted ground truth."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from geoleak.core import GeoleakError, normalize_address


class MissingGroundTruth(GeoleakError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    user_id: str
    home_address: str | None
    work_address: str | None = None
    sensitive_venue_ids: frozenset[str] = frozenset()


def read_ground_truth(path: str | Path) -> dict[str, GroundTruth]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            venues = frozenset(v for v in (row.get("sensitive_venue_ids") or "").split("|") if v)
            out[row["user_id"]] = GroundTruth(row["user_id"], row.get("home_address") or None,
                                              row.get("work_address") or None, venues)
    return out


def write_ground_truth(path: str | Path, truths: Iterable[GroundTruth]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "home_address", "work_address", "sensitive_venue_ids"])
        for gt in sorted(truths, key=lambda g: g.user_id):
            w.writerow([gt.user_id, gt.home_address or "", gt.work_address or "",
                        "|".join(sorted(gt.sensitive_venue_ids))])


@dataclass(frozen=True)
class PRF:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f_score(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class LocationScore:
    users: int
    inferred: int
    correct: int

    @property
    def precision(self) -> float:
        return self.correct / self.inferred if self.inferred else 0.0

    @property
    def coverage(self) -> float:
        return self.inferred / self.users if self.users else 0.0

    @property
    def accuracy(self) -> float:
        """Correct inferences over all users with this location planted."""
        return self.correct / self.users if self.users else 0.0


@dataclass
class ScoreTable:
    home: LocationScore
    work: LocationScore
    content: PRF | None = None
    duration: PRF | None = None
    baselines: dict[str, LocationScore] = field(default_factory=dict)

    def rows(self) -> list[tuple[str, str]]:
        out = [
            ("home precision", f"{self.home.precision:.2%} ({self.home.correct}/{self.home.inferred})"),
            ("home coverage", f"{self.home.coverage:.2%} ({self.home.inferred}/{self.home.users})"),
            ("work precision", f"{self.work.precision:.2%} ({self.work.correct}/{self.work.inferred})"),
            ("work coverage", f"{self.work.coverage:.2%} ({self.work.inferred}/{self.work.users})"),
        ]
        for name, prf in (("CB", self.content), ("DB", self.duration)):
            if prf is not None:
                out.append((f"{name} precision", f"{prf.precision:.2%} (TP={prf.tp}, FP={prf.fp})"))
                out.append((f"{name} recall", f"{prf.recall:.2%} (FN={prf.fn})"))
                out.append((f"{name} F-score", f"{prf.f_score:.2%}"))
        for h, s in sorted(self.baselines.items(), key=lambda kv: int(kv[0][1:])):
            out.append((f"{h} precision", f"{s.precision:.2%} ({s.correct}/{s.inferred})"))
        return out

    def format(self) -> str:
        width = max(len(k) for k, _ in self.rows())
        return "\n".join(f"{k:<{width}}  {v}" for k, v in self.rows())


def _addr(block: dict | None) -> str | None:
    if not block or not block.get("address"):
        return None
    return normalize_address(block["address"])


def _location_score(users: Iterable[dict], truths: Mapping[str, GroundTruth], kind: str) -> LocationScore:
    n = inferred = correct = 0
    for rec in users:
        truth = getattr(truths[rec["user_id"]], f"{kind}_address")
        if truth is None:
            continue
        n += 1
        got = rec.get(kind)
        if got:
            inferred += 1
            correct += _addr(got) == normalize_address(truth)
    return LocationScore(n, inferred, correct)


def _sensitive_prf(users: Iterable[dict], truths: Mapping[str, GroundTruth], key: str) -> PRF | None:
    tp = fp = fn = 0
    seen_any = False
    for rec in users:
        sens = rec.get("sensitive")
        if sens is None:
            continue
        seen_any = True
        planted = truths[rec["user_id"]].sensitive_venue_ids
        found = set()
        for psc in sens["pscs"]:
            if not psc.get(key):
                continue
            if key == "content":
                cat = psc["content"]["category"]
                ids = {v["venue_id"] for v in psc["venues"] if v["category"] == cat}
            else:
                ids = {v["venue_id"] for v in psc["venues"]}
            if ids & planted:
                tp += 1
                found |= ids & planted
            else:
                fp += 1
        fn += len(planted - found)
    return PRF(tp, fp, fn) if seen_any else None


def score(users: Iterable[dict], truths: Mapping[str, GroundTruth]) -> ScoreTable:
    """Score report user records against ground truth.

    Home/work precision is correct over inferred with addresses compared
    after normalization; coverage is inferred over users with the location
    planted.  Sensitive findings count a corroborated cluster as a true
    positive when one of its matching venues was planted for that user.
    """
    users = [u for u in users if "error" not in u]
    missing = sorted(u["user_id"] for u in users if u["user_id"] not in truths)
    if missing:
        raise MissingGroundTruth(f"no ground truth for {len(missing)} user(s), e.g. {missing[:3]}")
    users.sort(key=lambda u: u["user_id"])
    table = ScoreTable(
        home=_location_score(users, truths, "home"),
        work=_location_score(users, truths, "work"),
        content=_sensitive_prf(users, truths, "content"),
        duration=_sensitive_prf(users, truths, "duration"),
    )
    names = sorted({h for u in users for h in u.get("baselines", {})})
    for h in names:
        n = inferred = correct = 0
        kind = "work" if h in ("H14", "H15") else "home"
        for u in users:
            truth = getattr(truths[u["user_id"]], f"{kind}_address")
            if truth is None:
                continue
            n += 1
            got = u.get("baselines", {}).get(h)
            if got and got.get("cluster_id"):
                inferred += 1
                correct += _addr(got) == normalize_address(truth)
        table.baselines[h] = LocationScore(n, inferred, correct)
    return table
