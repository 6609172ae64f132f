"""Code vocabulary, patient records, synthetic case/control cohort
generation, binary encoding, group-level splitting, and line-delimited
JSON persistence.

The synthetic generator is a stand-in for real claims data. Each case
patient carries a planted signal: risk codes appear with a hazard that
grows toward the end of the observation window, and the final visits of a
case arrive in a tight burst of short day gaps. Half of the controls are
"confusers" that show the same risk codes in their final visits by
sequence position but spaced at wide day gaps, so day-interval information
is required to separate them from cases. Demographics are matched within
each group and carry no label signal.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .numerics import ArgumentError, make_rng

__all__ = [
    "KINDS",
    "DataError",
    "ParseError",
    "VocabularyConfig",
    "CodeVocabulary",
    "build_vocabulary",
    "VisitRecord",
    "PatientRecord",
    "EncodedSequence",
    "encode_patient",
    "GeneratorConfig",
    "Dataset",
    "generate_cohort",
    "split_dataset",
    "make_batches",
    "write_dataset",
    "read_dataset",
    "write_vocabulary",
    "read_vocabulary",
]

KINDS = ("diagnosis", "treatment", "prescription")
GENDERS = ("F", "M")


class DataError(ValueError):
    """A record violates the dataset contract."""


class ParseError(ValueError):
    """A persisted file cannot be decoded; carries the offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class VocabularyConfig:
    n_diagnosis: int = 268
    n_treatment: int = 500
    n_prescription: int = 632
    labels: dict[str, list[str]] | None = None  # optional per-kind label override


class CodeVocabulary:
    """Dense code ids 0..C-1 laid out as the diagnosis block, then
    treatment, then prescription."""

    def __init__(self, entries: list[tuple[int, str, str]]):
        self.entries = entries
        self.size = len(entries)
        self.labels = [e[1] for e in entries]
        self.kinds = [e[2] for e in entries]
        self.kind_counts = {k: self.kinds.count(k) for k in KINDS}
        self._kind_ids = {
            k: [i for i, kk in enumerate(self.kinds) if kk == k] for k in KINDS
        }

    def ids_of_kind(self, kind: str) -> list[int]:
        return list(self._kind_ids[kind])

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        return isinstance(other, CodeVocabulary) and self.entries == other.entries

    def fingerprint(self) -> str:
        import hashlib

        blob = json.dumps(self.entries, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def build_vocabulary(config: VocabularyConfig = VocabularyConfig()) -> CodeVocabulary:
    counts = {
        "diagnosis": config.n_diagnosis,
        "treatment": config.n_treatment,
        "prescription": config.n_prescription,
    }
    for kind, n in counts.items():
        if n < 1:
            raise ArgumentError(f"need at least one {kind} code, got {n}")
    prefixes = {"diagnosis": "DX", "treatment": "TX", "prescription": "RX"}
    entries: list[tuple[int, str, str]] = []
    next_id = 0
    for kind in KINDS:
        override = (config.labels or {}).get(kind)
        if override is not None and len(override) != counts[kind]:
            raise ArgumentError(f"{kind} label override has wrong length")
        for i in range(counts[kind]):
            label = override[i] if override else f"{prefixes[kind]}-{i:04d}"
            entries.append((next_id, label, kind))
            next_id += 1
    labels = [e[1] for e in entries]
    if len(set(labels)) != len(labels):
        raise ArgumentError("duplicate code labels")
    return CodeVocabulary(entries)


@dataclass(frozen=True)
class VisitRecord:
    """One encounter: an integer day index and a non-empty code set,
    stored as a sorted tuple."""

    day: int
    codes: tuple[int, ...]

    def __post_init__(self):
        if self.day < 0:
            raise DataError(f"negative visit day {self.day}")
        if len(self.codes) == 0:
            raise DataError("visit has no codes")
        object.__setattr__(self, "codes", tuple(sorted(set(self.codes))))


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    age: int
    gender: str
    visits: tuple[VisitRecord, ...]
    label: int
    group_id: str

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise DataError(f"unknown gender {self.gender!r}")
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label}")
        if len(self.visits) < 1:
            raise DataError(f"patient {self.patient_id} has no visits")
        days = [v.day for v in self.visits]
        if any(b < a for a, b in zip(days, days[1:])):
            raise DataError(f"patient {self.patient_id} has decreasing visit days")
        object.__setattr__(self, "visits", tuple(self.visits))

    @property
    def n_visits(self) -> int:
        return len(self.visits)


@dataclass(frozen=True)
class EncodedSequence:
    """Binary visit vectors in index form: codes[t] lists the positions of
    the ones in the t-th {0,1}^C vector."""

    days: tuple[int, ...]
    codes: tuple[tuple[int, ...], ...]
    n_codes: int

    @property
    def length(self) -> int:
        return len(self.days)

    def dense(self) -> np.ndarray:
        x = np.zeros((self.length, self.n_codes))
        for t, cs in enumerate(self.codes):
            x[t, list(cs)] = 1.0
        return x

    def truncated(self, t: int) -> "EncodedSequence":
        """First t visits only."""
        return EncodedSequence(self.days[:t], self.codes[:t], self.n_codes)


def encode_patient(record: PatientRecord, vocab: CodeVocabulary) -> EncodedSequence:
    """Binary-encode the visit sequence; repeated codes inside one visit
    collapse to a single 1."""
    C = len(vocab)
    for v in record.visits:
        for c in v.codes:
            if not 0 <= c < C:
                raise DataError(f"code id {c} outside vocabulary of size {C}")
    return EncodedSequence(
        days=tuple(v.day for v in record.visits),
        codes=tuple(v.codes for v in record.visits),
        n_codes=C,
    )


@dataclass(frozen=True)
class GeneratorConfig:
    n_case_groups: int = 100
    controls_per_case: int = 10
    # visit-count distribution: lognormal excess over min, clipped to max
    min_visits: int = 5
    max_visits: int = 188
    mean_visits: float = 20.79
    visit_sigma: float = 0.65
    window_days: int = 181
    age_min: int = 20
    age_max: int = 89
    age_band_width: int = 10
    # 0 = controls share the case's exact visit count, so sequence length
    # carries no label information
    visit_band: int = 0
    codes_per_visit_mean: float = 2.8
    # Planted risk signal. Cases and confuser controls draw risk codes
    # from the same index-from-end hazard profile: an exponentially
    # recency-weighted tail plus a randomly placed earlier onset window,
    # with the confuser's onset scaled by confuser_onset_scale. At scale
    # 1.0 the code sequences are distributionally identical and only day
    # gaps separate them (cases pack the tail into a tight burst of
    # 1..burst_gap_max day gaps, confusers space the same visits widely),
    # which is what rewards temporal modeling. Below 1.0 the onset adds a
    # code-count contrast every model can learn. Plain controls carry
    # background hazard only and are separable by any model.
    n_risk_codes_per_kind: int = 8
    risk_hazard_base: float = 0.005
    risk_hazard_amp: float = 0.30
    risk_recency_tau_days: float = 22.0
    tail_visits: int = 8
    burst_gap_max: int = 3
    onset_visits: int = 4
    onset_hazard_amp: float = 0.20
    onset_early_frac: float = 0.45
    confuser_fraction: float = 0.08
    confuser_onset_scale: float = 1.0
    confuser_gap_min: int = 9
    confuser_gap_max: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.n_case_groups < 1 or self.controls_per_case < 1:
            raise ArgumentError("need at least one case group and one control")
        if self.min_visits < 5:
            raise ArgumentError("minimum visit count must be at least 5")
        if not (self.min_visits <= self.max_visits):
            raise ArgumentError("max_visits below min_visits")
        if self.mean_visits <= self.min_visits:
            raise ArgumentError("mean_visits must exceed min_visits")
        if self.window_days < self.min_visits:
            raise ArgumentError("observation window too short for minimum visits")
        if not 0.0 <= self.confuser_fraction <= 1.0:
            raise ArgumentError("confuser_fraction must lie in [0, 1]")


@dataclass
class Dataset:
    vocabulary: CodeVocabulary | None
    patients: list[PatientRecord]
    provenance: dict | None = None

    def __len__(self) -> int:
        return len(self.patients)

    def groups(self) -> dict[str, list[PatientRecord]]:
        out: dict[str, list[PatientRecord]] = {}
        for p in self.patients:
            out.setdefault(p.group_id, []).append(p)
        return out

    def validate_groups(self, controls_per_case: int | None = None) -> None:
        for gid, members in self.groups().items():
            cases = [p for p in members if p.label == 1]
            if len(cases) != 1:
                raise DataError(f"group {gid} has {len(cases)} cases, expected 1")
            if controls_per_case is not None:
                n_ctl = len(members) - 1
                if n_ctl != controls_per_case:
                    raise DataError(
                        f"group {gid} has {n_ctl} controls, expected {controls_per_case}"
                    )


def _visit_count(cfg: GeneratorConfig, rng: np.random.Generator) -> int:
    mu = math.log(cfg.mean_visits - cfg.min_visits) - 0.5 * cfg.visit_sigma**2
    excess = rng.lognormal(mu, cfg.visit_sigma)
    return int(np.clip(cfg.min_visits + round(excess), cfg.min_visits, cfg.max_visits))


def _burst_days(window: int, n: int, gap_lo: int, gap_hi: int, rng) -> list[int]:
    """n days ending near the window edge, walking backwards with gaps in
    [gap_lo, gap_hi]."""
    day = window - 1 - int(rng.integers(0, 3))
    days = [day]
    for _ in range(n - 1):
        day -= int(rng.integers(gap_lo, gap_hi + 1))
        days.append(day)
    return sorted(max(d, 0) for d in days)


def _background_codes(n: int, cum_popularity: np.ndarray, rng) -> set[int]:
    draws = np.searchsorted(cum_popularity, rng.random(n))
    return set(int(d) for d in draws)


def _tail_hazard(n_tail: int, cfg: GeneratorConfig) -> np.ndarray:
    """Hazard for the last n_tail visits, by index from the end: the
    profile of a tight end-of-window burst. Shared verbatim by cases and
    confusers, so tail code content carries no case/control information;
    only the day gaps differ."""
    mean_gap = 0.5 * (1 + cfg.burst_gap_max)
    k = np.arange(n_tail - 1, -1, -1, dtype=np.float64)  # distance from final visit
    return np.clip(
        cfg.risk_hazard_base
        + cfg.risk_hazard_amp * np.exp(-k * mean_gap / cfg.risk_recency_tau_days),
        0.0,
        0.95,
    )


def _full_hazard(T: int, cfg: GeneratorConfig, role: str, rng) -> np.ndarray:
    """Per-visit risk-code hazard for one patient. role is one of
    case / confuser / plain."""
    hazard = np.full(T, cfg.risk_hazard_base)
    if role == "plain":
        return hazard
    # case and confuser draw from the same profile; only day gaps differ
    tail = min(cfg.tail_visits, max(T - 1, 1))
    hazard[T - tail :] = _tail_hazard(tail, cfg)
    head = T - tail
    width = min(cfg.onset_visits, head)
    if width > 0:
        hi = max(0, min(int(cfg.onset_early_frac * head), head - width))
        start = int(rng.integers(0, hi + 1))
        amp = cfg.onset_hazard_amp * (
            cfg.confuser_onset_scale if role == "confuser" else 1.0
        )
        hazard[start : start + width] = cfg.risk_hazard_base + amp
    return hazard


def generate_cohort(config: GeneratorConfig, vocab: CodeVocabulary | None = None) -> Dataset:
    """Deterministic synthetic cohort: one case plus matched controls per
    group, with the planted recency/interval signal described in the
    module docstring. Label prevalence is exactly 1/(1+controls_per_case).
    """
    if vocab is None:
        vocab = build_vocabulary()
    rng = make_rng(config.seed)
    C = len(vocab)

    # Arbitrary but fixed background popularity: a seeded permutation of a
    # power-law weight profile.
    ranks = np.argsort(rng.permutation(C))
    weights = (ranks + 10.0) ** -0.8
    cum_popularity = np.cumsum(weights / weights.sum())

    risk_ids: list[int] = []
    for kind in KINDS:
        ids = vocab.ids_of_kind(kind)
        take = min(config.n_risk_codes_per_kind, len(ids))
        risk_ids.extend(int(i) for i in rng.choice(ids, size=take, replace=False))
    risk_ids = sorted(risk_ids)
    risk_weights = np.ones(len(risk_ids))

    patients: list[PatientRecord] = []
    for gi in range(config.n_case_groups):
        gid = f"g{gi:05d}"
        gender = GENDERS[int(rng.integers(0, 2))]
        band_lo = config.age_min + int(
            rng.integers(0, max(1, (config.age_max - config.age_min) // config.age_band_width))
        ) * config.age_band_width
        band_hi = min(band_lo + config.age_band_width - 1, config.age_max)
        t_case = _visit_count(config, rng)
        t_lo = max(config.min_visits, t_case - config.visit_band)
        t_hi = min(config.max_visits, t_case + config.visit_band)

        def make_patient(pid: str, label: int, confuser: bool) -> PatientRecord:
            age = int(rng.integers(band_lo, band_hi + 1))
            T = t_case if label == 1 else int(rng.integers(t_lo, t_hi + 1))
            burst = min(config.tail_visits, max(T - 1, 1))
            if label == 1:
                tail = _burst_days(config.window_days, burst, 1, config.burst_gap_max, rng)
            elif confuser:
                tail = _burst_days(
                    config.window_days, burst, config.confuser_gap_min, config.confuser_gap_max, rng
                )
            else:
                tail = []
            n_head = T - len(tail)
            head_end = (min(tail) if tail else config.window_days) - 1
            head = sorted(
                int(d) for d in rng.integers(0, max(head_end, 1), size=n_head)
            )
            days = head + tail
            role = "case" if label == 1 else ("confuser" if confuser else "plain")
            hazard = _full_hazard(T, config, role, rng)
            visits = []
            for t, day in enumerate(days):
                n_bg = 1 + int(rng.poisson(config.codes_per_visit_mean - 1.0))
                codes = _background_codes(n_bg, cum_popularity, rng)
                hit = rng.random(len(risk_ids)) < hazard[t] * risk_weights
                codes.update(c for c, h in zip(risk_ids, hit) if h)
                visits.append(VisitRecord(day=day, codes=tuple(codes)))
            return PatientRecord(
                patient_id=pid, age=age, gender=gender,
                visits=tuple(visits), label=label, group_id=gid,
            )

        patients.append(make_patient(f"{gid}.case", 1, False))
        for k in range(config.controls_per_case):
            confuser = rng.random() < config.confuser_fraction
            patients.append(make_patient(f"{gid}.c{k:02d}", 0, confuser))

    return Dataset(
        vocabulary=vocab,
        patients=patients,
        provenance=dataclasses.asdict(config),
    )


def split_dataset(
    ds: Dataset, ratios: tuple[float, float, float], seed: int = 0
) -> tuple[Dataset, Dataset, Dataset]:
    """Partition at case-group granularity with a seeded shuffle. Group
    counts follow the largest-remainder rule so the partition is exact."""
    if any(r <= 0 for r in ratios):
        raise ArgumentError("split ratios must be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ArgumentError(f"split ratios must sum to 1, got {sum(ratios)}")
    groups = ds.groups()
    gids = sorted(groups)
    order = list(make_rng(seed).permutation(len(gids)))
    shuffled = [gids[i] for i in order]
    G = len(gids)
    exact = [r * G for r in ratios]
    counts = [int(math.floor(e)) for e in exact]
    remainder = G - sum(counts)
    by_frac = sorted(range(3), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in range(remainder):
        counts[by_frac[i % 3]] += 1
    out = []
    start = 0
    for n in counts:
        chunk = shuffled[start : start + n]
        start += n
        pts = [p for gid in chunk for p in groups[gid]]
        out.append(Dataset(ds.vocabulary, pts, ds.provenance))
    return tuple(out)


def make_batches(ds: Dataset, seed: int = 0) -> list[list[PatientRecord]]:
    """One batch per case group (case first, then its controls), in seeded
    shuffled order."""
    groups = ds.groups()
    batches = []
    for gid in sorted(groups):
        members = groups[gid]
        cases = [p for p in members if p.label == 1]
        if len(cases) != 1:
            raise DataError(f"group {gid} has {len(cases)} cases; orphan controls")
        controls = [p for p in members if p.label == 0]
        batches.append([cases[0]] + controls)
    order = make_rng(seed).permutation(len(batches))
    return [batches[i] for i in order]


# ---------------------------------------------------------------------------
# Persistence. Dataset file: UTF-8 JSON lines, one patient per line with
# fields id, age, gender, label, group, visits:[{day, codes:[int]}].
# Vocabulary file: JSON array of {id, label, kind}.
# ---------------------------------------------------------------------------


def _patient_to_json(p: PatientRecord) -> str:
    obj = {
        "id": p.patient_id,
        "age": p.age,
        "gender": p.gender,
        "label": p.label,
        "group": p.group_id,
        "visits": [{"day": v.day, "codes": list(v.codes)} for v in p.visits],
    }
    return json.dumps(obj, separators=(",", ":"), sort_keys=True)


def write_dataset(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in ds.patients:
            fh.write(_patient_to_json(p) + "\n")


def read_dataset(path, vocabulary: CodeVocabulary | None = None) -> Dataset:
    patients = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from exc
            try:
                patients.append(
                    PatientRecord(
                        patient_id=obj["id"],
                        age=int(obj["age"]),
                        gender=obj["gender"],
                        visits=tuple(
                            VisitRecord(day=int(v["day"]), codes=tuple(v["codes"]))
                            for v in obj["visits"]
                        ),
                        label=int(obj["label"]),
                        group_id=obj["group"],
                    )
                )
            except (KeyError, TypeError, DataError) as exc:
                raise ParseError(f"bad patient record: {exc}", lineno) from exc
    return Dataset(vocabulary=vocabulary, patients=patients)


def write_vocabulary(vocab: CodeVocabulary, path) -> None:
    objs = [{"id": i, "label": lab, "kind": kind} for i, lab, kind in vocab.entries]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(objs, fh, separators=(",", ":"))


def read_vocabulary(path) -> CodeVocabulary:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            objs = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid vocabulary JSON ({exc.msg})") from exc
    entries = []
    for o in objs:
        if o.get("kind") not in KINDS:
            raise ParseError(f"unknown code kind {o.get('kind')!r}")
        entries.append((int(o["id"]), str(o["label"]), o["kind"]))
    expected = list(range(len(entries)))
    if [e[0] for e in entries] != expected:
        raise ParseError("vocabulary ids are not dense 0..C-1")
    return CodeVocabulary(entries)
