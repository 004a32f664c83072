"""Welding datasets: layout parsing, wire vectors, CSV I/O, synthesis and splits.

A record pairs a :class:`WireVector` (16 cross-sections in mm², sorted
descending, zero padded) with a :class:`ParamTriple` (energy Ws, amplitude %,
pressure bar). A :class:`Dataset` stores them as two read-only arrays of
shape ``(n, 16)`` and ``(n, 3)``.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

N_SLOTS = 16
PARAM_NAMES = ("energy", "amplitude", "pressure")
PARAM_UNITS = ("Ws", "%", "bar")
WIRE_COLUMNS = tuple(f"Wire {i}" for i in range(1, N_SLOTS + 1))
LABEL_COLUMNS = ("Energy", "Amplitude", "Pressure")

MAX_PER_SIDE_BILATERAL = 5
MAX_UNILATERAL = 15


class LayoutParseError(ValueError):
    """A product layout string does not follow ``s*n (+ s*n)*``."""

    def __init__(self, message: str, term: str, offset: int):
        super().__init__(f"{message}: {term!r} at byte offset {offset}")
        self.term = term
        self.offset = offset


class InvalidRecordError(ValueError):
    pass


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class WireVector:
    """Canonical 16-slot cross-section vector (mm²)."""

    sections: tuple[float, ...]

    def __post_init__(self):
        secs = tuple(float(s) for s in self.sections)
        if len(secs) != N_SLOTS:
            raise InvalidRecordError(f"expected {N_SLOTS} slots, got {len(secs)}")
        if not all(math.isfinite(s) for s in secs):
            raise InvalidRecordError("non-finite cross-section")
        if any(s < 0 for s in secs):
            raise InvalidRecordError("negative cross-section")
        canon = tuple(sorted(secs, reverse=True))
        if sum(1 for s in canon if s > 0) < 2:
            raise InvalidRecordError("a weld node needs at least 2 wires")
        object.__setattr__(self, "sections", canon)

    @classmethod
    def from_sections(cls, sections: Iterable[float]) -> "WireVector":
        secs = [float(s) for s in sections]
        if len(secs) > N_SLOTS:
            nonzero = [s for s in secs if s != 0]
            if len(nonzero) > N_SLOTS:
                raise InvalidRecordError(f"more than {N_SLOTS} wires")
            secs = nonzero
        return cls(tuple(secs) + (0.0,) * (N_SLOTS - len(secs)))

    @property
    def wire_count(self) -> int:
        return sum(1 for s in self.sections if s > 0)

    def total_section(self) -> float:
        return math.fsum(self.sections)

    def as_array(self) -> np.ndarray:
        return np.array(self.sections, dtype=float)


@dataclass(frozen=True)
class ParamTriple:
    energy: float
    amplitude: float
    pressure: float

    def __post_init__(self):
        vals = (self.energy, self.amplitude, self.pressure)
        for name, v in zip(PARAM_NAMES, vals):
            if not math.isfinite(v) or v <= 0:
                raise InvalidRecordError(f"{name} must be finite and > 0, got {v}")
        if self.amplitude > 100:
            raise InvalidRecordError(f"amplitude must be <= 100 %, got {self.amplitude}")

    def as_array(self) -> np.ndarray:
        return np.array([self.energy, self.amplitude, self.pressure], dtype=float)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered (WireVector, ParamTriple) records.

    ``X`` holds canonical wire vectors, ``Y`` the (energy, amplitude,
    pressure) labels. Equality compares records only, not provenance.
    """

    X: np.ndarray
    Y: np.ndarray
    provenance: str = "ingested"
    seed: int | None = None
    rejected: tuple[tuple[int, str], ...] = field(default=())

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if X.shape[0] == 0:
            raise InvalidRecordError("dataset is empty")
        if X.shape != (Y.shape[0], N_SLOTS) or Y.shape[1] != 3:
            raise InvalidRecordError(f"bad shapes X{X.shape} Y{Y.shape}")
        if self.provenance not in ("ingested", "synthetic"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        for k in range(X.shape[0]):
            WireVector(tuple(X[k]))
            ParamTriple(*Y[k])
        # canonical form: every row sorted descending
        X = -np.sort(-X, axis=1)
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "Y", _readonly(Y))

    @classmethod
    def from_records(cls, records: Sequence[tuple[WireVector, ParamTriple]], **kw) -> "Dataset":
        if not records:
            raise InvalidRecordError("dataset is empty")
        X = np.array([w.sections for w, _ in records], dtype=float)
        Y = np.array([p.as_array() for _, p in records], dtype=float)
        return cls(X, Y, **kw)

    def __len__(self) -> int:
        return self.X.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.Y, other.Y)
        )

    __hash__ = None  # type: ignore[assignment]

    def records(self) -> list[tuple[WireVector, ParamTriple]]:
        return [(WireVector(tuple(x)), ParamTriple(*y)) for x, y in zip(self.X, self.Y)]

    def subset(self, idx: Sequence[int]) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.Y[idx], provenance=self.provenance, seed=self.seed)

    def total_sections(self) -> np.ndarray:
        return self.X.sum(axis=1)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.Y).tobytes())
        return h.hexdigest()

    def row_digests(self) -> list[str]:
        return [row_digest(x, y) for x, y in zip(self.X, self.Y)]


def row_digest(x: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256(np.ascontiguousarray(x, dtype=float).tobytes())
    h.update(np.ascontiguousarray(y, dtype=float).tobytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# layout strings

_TERM_RE = re.compile(r"^\s*(?P<sec>[0-9]+(?:[.,][0-9]*)?|[.,][0-9]+)\s*\*\s*(?P<cnt>[+-]?[0-9]+)\s*$")


def _to_float(text: str) -> float:
    return float(text.strip().replace(",", "."))


def parse_layout(text: str) -> list[float]:
    """Expand a product layout such as ``"2,5*2+4,00*1"`` into sections.

    >>> parse_layout("1,00*1+4,00*1")
    [1.0, 4.0]
    """
    if text is None or text.strip() == "":
        return []
    out: list[float] = []
    pos = 0
    for term in text.split("+"):
        offset = len(text[:pos].encode("utf-8"))
        pos += len(term) + 1
        m = _TERM_RE.match(term)
        if m is None:
            if "*" not in term:
                raise LayoutParseError("malformed term (expected section*count)", term, offset)
            sec, _, cnt = term.partition("*")
            try:
                _to_float(sec)
            except ValueError:
                raise LayoutParseError("non-numeric section", term, offset) from None
            raise LayoutParseError("malformed wire count", term, offset)
        count = int(m.group("cnt"))
        if count <= 0:
            raise LayoutParseError("wire count must be a positive integer", term, offset)
        section = _to_float(m.group("sec"))
        out.extend([section] * count)
    return out


def build_wire_vector(side1: Sequence[float], side2: Sequence[float]) -> WireVector:
    """Combine the two sides of a node into a canonical :class:`WireVector`.

    Sides are irrelevant to the process parameters, so only the multiset of
    sections is kept. Machine limits still apply per side: at most 5 wires on
    each side of a bilateral node, at most 15 on a unilateral one.
    """
    s1, s2 = list(side1), list(side2)
    for s in s1 + s2:
        if not math.isfinite(s) or s <= 0:
            raise InvalidRecordError(f"cross-section must be positive, got {s}")
    if s1 and s2:
        if len(s1) > MAX_PER_SIDE_BILATERAL or len(s2) > MAX_PER_SIDE_BILATERAL:
            raise InvalidRecordError(
                f"bilateral node allows at most {MAX_PER_SIDE_BILATERAL} wires per side "
                f"(got {len(s1)}+{len(s2)})"
            )
    elif len(s1) + len(s2) > MAX_UNILATERAL:
        raise InvalidRecordError(
            f"unilateral node allows at most {MAX_UNILATERAL} wires (got {len(s1) + len(s2)})"
        )
    n = len(s1) + len(s2)
    if n < 2:
        raise InvalidRecordError("a weld node needs at least 2 wires")
    if n > N_SLOTS:
        raise InvalidRecordError(f"more than {N_SLOTS} wires")
    return WireVector.from_sections(s1 + s2)


# ---------------------------------------------------------------------------
# CSV I/O


def _norm_header(name: str) -> str:
    return re.sub(r"\s+", "", name).lower()


def _sniff_delimiter(header_line: str) -> str:
    counts = {d: header_line.count(d) for d in (";", "\t", ",")}
    best = max(counts, key=lambda d: counts[d])
    return best if counts[best] > 0 else ","


def _read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise InvalidRecordError(f"{path}: missing header row")
    reader = csv.reader(lines, delimiter=_sniff_delimiter(lines[0]))
    rows = list(reader)
    return rows[0], rows[1:]


def _column_index(header: list[str], wanted: Sequence[str], path) -> list[int]:
    norm = [_norm_header(h) for h in header]
    idx, missing = [], []
    for w in wanted:
        key = _norm_header(w)
        if key in norm:
            idx.append(norm.index(key))
        else:
            missing.append(w)
    if missing:
        raise InvalidRecordError(f"{path}: missing columns {missing}")
    return idx


def ingest_csv(path: str | Path) -> Dataset:
    """Read a cleaned dataset (``Wire 1``..``Wire 16``, Energy, Amplitude, Pressure).

    Rows that violate the record invariants are skipped and listed in
    ``Dataset.rejected`` as ``(row_number, reason)``; row numbers are 1-based
    file lines, the header being line 1.
    """
    header, rows = _read_rows(path)
    cols = _column_index(header, WIRE_COLUMNS + LABEL_COLUMNS, path)
    X, Y, rejected = [], [], []
    for lineno, row in enumerate(rows, start=2):
        if not any(c.strip() for c in row):
            continue
        try:
            vals = [_to_float(row[c]) for c in cols]
            wv = WireVector(tuple(vals[:N_SLOTS]))
            pt = ParamTriple(*vals[N_SLOTS:])
        except (ValueError, IndexError) as exc:
            rejected.append((lineno, str(exc) or type(exc).__name__))
            continue
        X.append(wv.sections)
        Y.append(pt.as_array())
    for lineno, why in rejected:
        log.warning("%s: row %d rejected: %s", path, lineno, why)
    if not X:
        raise InvalidRecordError(f"{path}: no valid rows ({len(rejected)} rejected)")
    return Dataset(np.array(X), np.array(Y), provenance="ingested", rejected=tuple(rejected))


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Write ``ds`` in the cleaned 19-column layout, dot decimals, exact floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(WIRE_COLUMNS + LABEL_COLUMNS)
        for x, y in zip(ds.X, ds.Y):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])


RAW_COLUMNS = ("Product layout side1", "Product layout side2", "Pressure", "Amplitude", "Energy")


def convert_raw(path: str | Path) -> Dataset:
    """Turn a raw factory export (layout strings per side) into a Dataset."""
    header, rows = _read_rows(path)
    side1, side2, press, amp, energy = _column_index(header, RAW_COLUMNS, path)
    X, Y, rejected = [], [], []
    for lineno, row in enumerate(rows, start=2):
        if not any(c.strip() for c in row):
            continue
        try:
            wv = build_wire_vector(parse_layout(row[side1]), parse_layout(row[side2]))
            pt = ParamTriple(_to_float(row[energy]), _to_float(row[amp]), _to_float(row[press]))
        except (ValueError, IndexError) as exc:
            rejected.append((lineno, str(exc) or type(exc).__name__))
            continue
        X.append(wv.sections)
        Y.append(pt.as_array())
    for lineno, why in rejected:
        log.warning("%s: row %d rejected: %s", path, lineno, why)
    if not X:
        raise InvalidRecordError(f"{path}: no convertible rows ({len(rejected)} rejected)")
    return Dataset(np.array(X), np.array(Y), provenance="ingested", rejected=tuple(rejected))


# ---------------------------------------------------------------------------
# synthetic generator

# Raw export rows used to calibrate the generator: (side1, side2, TS, pressure, amplitude, energy).
# The pressure of the 21 mm² node sits in the cross-section column of the export.
REFERENCE_ROWS = (
    ("0,35*3", "0,35*2", 1.75, 1.68, 70.0, 187.0),
    ("0,35*3", "0,35*2", 1.50, 1.60, 60.0, 185.0),
    ("0,35*3", "0,35*1", 1.40, 1.40, 60.0, 140.0),
    ("1,00*2", "1,00*2", 3.00, 2.00, 75.0, 290.0),
    ("0,75*2", "0,75*2", 3.00, 1.85, 65.0, 300.0),
    ("2,5*1", "1,00*1+4,00*1", 7.50, 2.25, 80.0, 645.0),
    ("", "2,5*2+4,00*1+6,00*2", 21.00, 3.60, 80.0, 1500.0),
    ("0,35*4", "0,35*3", 2.45, 1.90, 60.0, 270.0),
    ("0,35*2", "0,35*2", 1.40, 1.50, 50.0, 144.0),
    ("1,5*2", "2,5*1", 5.50, 2.30, 70.0, 400.0),
)


def _reference_fit() -> dict[str, float]:
    ts = np.array([r[2] for r in REFERENCE_ROWS])
    press = np.array([r[3] for r in REFERENCE_ROWS])
    amp = np.array([r[4] for r in REFERENCE_ROWS])
    energy = np.array([r[5] for r in REFERENCE_ROWS])
    lin = np.column_stack([ts, np.ones_like(ts)])
    logd = np.column_stack([np.log1p(ts), np.ones_like(ts)])
    out = {}
    for name, A, y in (("energy", lin, energy), ("amp", logd, amp), ("press", lin, press)):
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        out[f"{name}_a"], out[f"{name}_b"] = float(coef[0]), float(coef[1])
        out[f"{name}_noise"] = float(np.sqrt(np.mean(resid**2)))
    return out


_FIT = _reference_fit()


@dataclass(frozen=True)
class GeneratorParams:
    """Label model ``energy = a*S + b``, ``amplitude = a*ln(1+S) + b``, ``pressure = a*S + b``.

    Defaults are least-squares fits to the reference export rows; noise
    defaults to each fit's RMS residual. Wire counts and the section alphabet
    mirror the same rows.
    """

    energy_a: float = _FIT["energy_a"]
    energy_b: float = _FIT["energy_b"]
    amp_a: float = _FIT["amp_a"]
    amp_b: float = _FIT["amp_b"]
    press_a: float = _FIT["press_a"]
    press_b: float = _FIT["press_b"]
    noise_std: tuple[float, float, float] = (_FIT["energy_noise"], _FIT["amp_noise"], _FIT["press_noise"])
    wire_count: tuple[int, int] = (3, 7)
    alphabet: tuple[float, ...] = (0.35, 0.75, 1.0, 1.5, 2.5, 4.0, 6.0)

    def __post_init__(self):
        object.__setattr__(self, "noise_std", tuple(float(v) for v in self.noise_std))
        object.__setattr__(self, "wire_count", tuple(int(v) for v in self.wire_count))
        object.__setattr__(self, "alphabet", tuple(float(v) for v in self.alphabet))
        if len(self.noise_std) != 3 or any(not math.isfinite(v) or v < 0 for v in self.noise_std):
            raise ValueError("noise_std needs three finite values >= 0")
        lo, hi = self.wire_count
        if not 2 <= lo <= hi <= MAX_UNILATERAL:
            raise ValueError(f"wire_count range must satisfy 2 <= lo <= hi <= {MAX_UNILATERAL}")
        if not self.alphabet or any(not math.isfinite(s) or s <= 0 for s in self.alphabet):
            raise ValueError("alphabet needs positive sections")
        coefs = (self.energy_a, self.energy_b, self.amp_a, self.amp_b, self.press_a, self.press_b)
        if not all(math.isfinite(c) for c in coefs):
            raise ValueError("non-finite generator coefficient")

    def with_noise(self, noise_std: Sequence[float]) -> "GeneratorParams":
        from dataclasses import replace

        return replace(self, noise_std=tuple(noise_std))

    def labels(self, total_section: np.ndarray, noise: np.ndarray | None = None) -> np.ndarray:
        """Labels for total sections ``S``; ``noise`` is an ``(n, 3)`` additive term."""
        S = np.asarray(total_section, dtype=float)
        if noise is None:
            noise = np.zeros((S.shape[0], 3))
        energy = self.energy_a * S + self.energy_b + noise[:, 0]
        amp = np.clip(self.amp_a * np.log1p(S) + self.amp_b + noise[:, 1], 1.0, 100.0)
        press = self.press_a * S + self.press_b + noise[:, 2]
        # keep labels physical
        energy = np.maximum(energy, 1.0)
        press = np.maximum(press, 0.01)
        return np.column_stack([energy, amp, press])

    def to_dict(self) -> dict:
        return {
            "energy_a": self.energy_a,
            "energy_b": self.energy_b,
            "amp_a": self.amp_a,
            "amp_b": self.amp_b,
            "press_a": self.press_a,
            "press_b": self.press_b,
            "noise_std": list(self.noise_std),
            "wire_count": list(self.wire_count),
            "alphabet": list(self.alphabet),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorParams":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown generator parameters {sorted(unknown)}")
        return cls(**d)


def synthesize(n: int, params: GeneratorParams | None = None, seed: int = 0) -> Dataset:
    """Draw ``n`` synthetic records; a pure function of ``(n, params, seed)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    params = params or GeneratorParams()
    rng = np.random.default_rng(seed)
    lo, hi = params.wire_count
    counts = rng.integers(lo, hi + 1, size=n)
    alphabet = np.array(params.alphabet)
    X = np.zeros((n, N_SLOTS))
    for k, c in enumerate(counts):
        secs = alphabet[rng.integers(0, alphabet.size, size=c)]
        X[k, :c] = np.sort(secs)[::-1]
    noise = rng.standard_normal((n, 3)) * np.array(params.noise_std)
    Y = params.labels(X.sum(axis=1), noise)
    return Dataset(X, Y, provenance="synthetic", seed=seed)


def split(ds: Dataset, test_count: int = 10, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first ``test_count`` records become the test set."""
    n = len(ds)
    if not 1 <= test_count < n:
        raise ValueError(f"test_count must be in [1, {n - 1}], got {test_count}")
    perm = np.random.default_rng(seed).permutation(n)
    return ds.subset(perm[test_count:]), ds.subset(perm[:test_count])


def noise_for_range(n: int, params: GeneratorParams | None = None, seed: int = 0,
                    fraction: float = 0.05) -> tuple[float, float, float]:
    """Noise std set to ``fraction`` of each label's noise-free span over the same draw."""
    if fraction < 0:
        raise ValueError("fraction must be >= 0")
    params = params or GeneratorParams()
    clean = synthesize(n, params.with_noise((0.0, 0.0, 0.0)), seed)
    span = clean.Y.max(axis=0) - clean.Y.min(axis=0)
    return tuple(float(fraction * s) for s in span)  # type: ignore[return-value]
