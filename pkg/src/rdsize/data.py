"""Observed RDS data: ingestion, the coupon matrix, and per-subject statistics.

Subjects are indexed 0..n-1 in order of entry into the study.  Seeds carry a
recruiter index of -1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

SCHEMA_VERSION = 1
CSV_COLUMNS = ("id", "recruiter_id", "time", "degree", "coupons")


class RDSDataError(ValueError):
    """Observed data violate the structure of an RDS recruitment record."""


def _frozen(a, dtype):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ObservedData:
    """The recruitment forest, degrees, recruitment times and coupon record.

    ``exhaust_index[i]`` is the event at which subject ``i`` handed out its last
    coupon (``n - 1`` if it still held one at the end, ``i`` if it never had
    any).  Row ``i`` of the coupon matrix is 1 exactly on events
    ``i < k <= exhaust_index[i]``.
    """

    recruiter_of: np.ndarray
    degrees: np.ndarray
    times: np.ndarray
    coupons_issued: np.ndarray
    ids: tuple[str, ...]
    exhaust_index: np.ndarray = field(init=False)

    def __post_init__(self):
        rec = _frozen(self.recruiter_of, np.int64)
        deg = _frozen(self.degrees, np.int64)
        t = _frozen(self.times, np.float64)
        cpn = _frozen(self.coupons_issued, np.int64)
        object.__setattr__(self, "recruiter_of", rec)
        object.__setattr__(self, "degrees", deg)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "coupons_issued", cpn)
        n = rec.shape[0]
        if not (deg.shape == t.shape == cpn.shape == (n,)) or len(self.ids) != n:
            raise RDSDataError("field lengths disagree")
        if n == 0:
            raise RDSDataError("no subjects")
        if not np.all(np.isfinite(t)):
            raise RDSDataError("recruitment times must be finite")
        _validate(rec, deg, t, cpn)
        object.__setattr__(self, "exhaust_index", _frozen(_exhaust(rec, cpn), np.int64))

    # -- basic shape -------------------------------------------------------

    @property
    def n(self) -> int:
        return int(self.recruiter_of.shape[0])

    @property
    def is_seed(self) -> np.ndarray:
        return self.recruiter_of < 0

    @property
    def seeds(self) -> np.ndarray:
        return np.flatnonzero(self.is_seed)

    @property
    def m(self) -> int:
        return int(self.is_seed.sum())

    @property
    def n_min(self) -> int:
        """Smallest admissible population size, ``n + max degree``."""
        return self.n + int(self.degrees.max())

    @property
    def recruit_counts(self) -> np.ndarray:
        rec = self.recruiter_of
        return np.bincount(rec[rec >= 0], minlength=self.n)

    @property
    def recruitment_edges(self) -> np.ndarray:
        """(recruiter, recruit) pairs, recruiter always the earlier subject."""
        j = np.flatnonzero(self.recruiter_of >= 0)
        return np.column_stack([self.recruiter_of[j], j])

    @property
    def waiting_times(self) -> np.ndarray:
        return np.diff(self.times, prepend=0.0)

    @property
    def coupon_exhaust_time(self) -> np.ndarray:
        """Time each subject used its last coupon, else the end of the study."""
        return self.times[self.exhaust_index]

    # -- coupon matrix -----------------------------------------------------

    @property
    def coupon_matrix(self) -> np.ndarray:
        n = self.n
        k = np.arange(n)
        i = np.arange(n)[:, None]
        return ((k > i) & (k <= self.exhaust_index[:, None])).astype(np.int64)

    def coupon_holders(self, j: int) -> np.ndarray:
        """Subjects holding at least one coupon just before event ``j``."""
        i = np.arange(j)
        return i[self.exhaust_index[:j] >= j]

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "ids": list(self.ids),
            "seeds": [int(i) for i in self.seeds],
            "recruiter_of": [None if r < 0 else int(r) for r in self.recruiter_of],
            "degrees": [int(d) for d in self.degrees],
            "times": [float(t) for t in self.times],
            "coupons_issued": [int(c) for c in self.coupons_issued],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ObservedData":
        rec = [-1 if r is None else int(r) for r in doc["recruiter_of"]]
        n = len(rec)
        if doc.get("n", n) != n:
            raise RDSDataError("declared n does not match recruiter_of")
        ids = tuple(doc.get("ids") or (str(i) for i in range(n)))
        obs = cls(rec, doc["degrees"], doc["times"], doc["coupons_issued"], ids)
        if "seeds" in doc and sorted(doc["seeds"]) != list(obs.seeds):
            raise RDSDataError("seed list disagrees with recruiter_of")
        return obs

    @classmethod
    def from_json(cls, text: str) -> "ObservedData":
        return cls.from_dict(json.loads(text))


def _validate(rec, deg, t, cpn):
    n = rec.shape[0]
    j = np.arange(n)
    nonseed = rec >= 0
    if np.any(rec[nonseed] >= j[nonseed]):
        bad = int(j[nonseed][np.argmax(rec[nonseed] >= j[nonseed])])
        raise RDSDataError(f"subject {bad} recruited by a subject entering no earlier")
    if np.any(rec < -1):
        raise RDSDataError("recruiter indices must be -1 (seed) or a subject index")
    dt = np.diff(t)
    if np.any(dt < 0):
        raise RDSDataError("subjects are not in time order")
    tied = np.flatnonzero(dt == 0)
    if tied.size and np.any(nonseed[tied] | nonseed[tied + 1]):
        k = int(tied[np.argmax(nonseed[tied] | nonseed[tied + 1])])
        raise RDSDataError(f"subjects {k} and {k + 1} share recruitment time {t[k]}")
    if np.any(cpn < 0):
        raise RDSDataError("coupon counts must be nonnegative")
    made = np.bincount(rec[nonseed], minlength=n)
    if np.any(made > cpn):
        bad = int(np.argmax(made > cpn))
        raise RDSDataError(f"subject {bad} made {made[bad]} recruits with {cpn[bad]} coupons")
    need = made + nonseed
    if np.any(deg < need):
        bad = int(np.argmax(deg < need))
        raise RDSDataError(
            f"subject {bad} reports degree {deg[bad]} but has {need[bad]} recruitment edges")
    if np.any(deg[nonseed] < 1) or np.any(deg < 0):
        raise RDSDataError("degrees must be positive")


def _exhaust(rec, cpn):
    n = rec.shape[0]
    out = np.full(n, n - 1, dtype=np.int64)
    left = cpn.copy()
    for i in range(n):
        if left[i] == 0:
            out[i] = i
    for j in range(n):
        r = rec[j]
        if r >= 0:
            left[r] -= 1
            if left[r] == 0:
                out[r] = j
    return out


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def _field(row, name):
    v = row.get(name)
    if v is None:
        return ""
    return str(v).strip()


def ingest_rds_table(rows: Iterable[Mapping]) -> ObservedData:
    """Build :class:`ObservedData` from records with the CSV column names.

    Subjects are re-indexed by ascending time.  Seeds (empty recruiter_id)
    may share an entry time; they keep their input order.  Any other tie is
    rejected.
    """
    records = []
    seen = set()
    for line, row in enumerate(rows):
        sid = _field(row, "id")
        if not sid:
            raise RDSDataError(f"row {line}: missing id")
        if sid in seen:
            raise RDSDataError(f"duplicate id {sid!r}")
        seen.add(sid)
        try:
            t = float(_field(row, "time"))
            deg = int(_field(row, "degree"))
            cpn = int(_field(row, "coupons"))
        except ValueError as exc:
            raise RDSDataError(f"row {line} ({sid!r}): {exc}") from None
        if not math.isfinite(t):
            raise RDSDataError(f"row {line} ({sid!r}): time is not finite")
        records.append((t, line, sid, _field(row, "recruiter_id"), deg, cpn))
    if not records:
        raise RDSDataError("empty table")
    records.sort(key=lambda r: (r[0], r[1]))
    index = {r[2]: k for k, r in enumerate(records)}
    rec = []
    for k, (t, _, sid, rid, _, _) in enumerate(records):
        if not rid:
            rec.append(-1)
            continue
        if rid not in index:
            raise RDSDataError(f"subject {sid!r}: unknown recruiter {rid!r}")
        if index[rid] >= k:
            raise RDSDataError(f"subject {sid!r}: recruiter {rid!r} entered no earlier")
        rec.append(index[rid])
    return ObservedData(
        recruiter_of=rec,
        degrees=[r[4] for r in records],
        times=[r[0] for r in records],
        coupons_issued=[r[5] for r in records],
        ids=tuple(r[2] for r in records),
    )


def read_rds_csv(path) -> ObservedData:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        missing.discard("recruiter_id")
        if missing:
            raise RDSDataError(f"{path}: missing columns {sorted(missing)}")
        return ingest_rds_table(reader)


def write_rds_csv(obs: ObservedData, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i in range(obs.n):
            r = obs.recruiter_of[i]
            writer.writerow([
                obs.ids[i],
                "" if r < 0 else obs.ids[r],
                repr(float(obs.times[i])),
                int(obs.degrees[i]),
                int(obs.coupons_issued[i]),
            ])


def load_observed(path) -> ObservedData:
    """Read either the CSV table or the canonical JSON document."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return ObservedData.from_json(path.read_text())
    return read_rds_csv(path)


# ---------------------------------------------------------------------------
# subgraph statistics
# ---------------------------------------------------------------------------


def recruitment_adjacency(obs: ObservedData) -> np.ndarray:
    """Symmetric adjacency of the undirected recruitment edges."""
    A = np.zeros((obs.n, obs.n), dtype=np.uint8)
    e = obs.recruitment_edges
    A[e[:, 0], e[:, 1]] = 1
    A[e[:, 1], e[:, 0]] = 1
    return A


def check_compatibility(A, obs: ObservedData) -> tuple[bool, int | None]:
    """Whether ``A`` is a compatible subgraph estimate.

    Returns ``(True, None)`` or ``(False, k)`` with ``k`` the first violated
    condition: 1 vertex set, 2 recruitment edges, 3 degree bound.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be square")
    if np.any(A != A.T) or np.any(np.diag(A) != 0) or np.any((A != 0) & (A != 1)):
        raise ValueError("adjacency must be symmetric 0/1 with zero diagonal")
    if A.shape[0] != obs.n:
        return False, 1
    e = obs.recruitment_edges
    if np.any(A[e[:, 0], e[:, 1]] == 0):
        return False, 2
    if np.any(A.sum(axis=1) > obs.degrees):
        return False, 3
    return True, None


def compute_du(A, degrees) -> tuple[np.ndarray, int]:
    """Pendant-edge count of each subject at the moment it was recruited."""
    A = np.asarray(A, dtype=np.int64)
    du = np.asarray(degrees, dtype=np.int64) - np.tril(A, -1).sum(axis=1)
    if np.any(du < 0):
        raise ValueError("negative pendant count: adjacency incompatible with degrees")
    return du, int(du.sum())


def compute_s_full(A, C, u, w) -> tuple[np.ndarray, float]:
    """Susceptible-edge counts just before each event and their time exposure.

    ``lowerTri`` keeps the diagonal: the edge a recruitment happens along is
    susceptible just before that recruitment.
    """
    A = np.asarray(A, dtype=np.int64)
    C = np.asarray(C, dtype=np.int64)
    s = np.tril(A @ C).sum(axis=0) + C.T @ np.asarray(u, dtype=np.int64)
    return s, float(s @ np.asarray(w, dtype=np.float64))
