"""Time/temperature datasets: CSV I/O, cleaning, train/test split, synthesis."""

from __future__ import annotations

import enum
import hashlib
import io
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import CsvParseError, DataError

log = logging.getLogger(__name__)

CSV_MAGIC = "# vrfb-dataset v1"
CSV_COLUMNS = "time_s,temperature_c"


class Mode(str, enum.Enum):
    CHARGING = "charging"
    DISCHARGING = "discharging"


class Source(str, enum.Enum):
    EXPERIMENTAL = "experimental"
    SYNTHETIC = "synthetic"


class SplitStrategy(str, enum.Enum):
    SHUFFLED = "shuffled"
    CHRONOLOGICAL = "chronological"


@dataclass(frozen=True)
class ScenarioMeta:
    current_a: float
    mode: Mode
    flow_l_min: float
    ambient_c: float = 30.0
    source: Source = Source.EXPERIMENTAL
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "source", Source(self.source))

    @property
    def key(self) -> tuple[float, str]:
        return (self.current_a, self.mode.value)

    def header_line(self) -> str:
        seed = "none" if self.seed is None else str(int(self.seed))
        return (f"# current_a={self.current_a!r} mode={self.mode.value} "
                f"flow_l_min={self.flow_l_min!r} ambient_c={self.ambient_c!r} "
                f"source={self.source.value} seed={seed}")

    @classmethod
    def parse_header(cls, line: str, lineno: int = 2) -> ScenarioMeta:
        body = line.lstrip("#").split()
        fields = {}
        for token in body:
            key, sep, value = token.partition("=")
            if not sep:
                raise CsvParseError(f"malformed metadata token {token!r}", lineno)
            fields[key] = value
        required = ("current_a", "mode", "flow_l_min", "ambient_c", "source", "seed")
        missing = [k for k in required if k not in fields]
        if missing:
            raise CsvParseError(f"metadata missing {missing}", lineno)
        try:
            seed = None if fields["seed"] == "none" else int(fields["seed"])
            return cls(current_a=float(fields["current_a"]), mode=Mode(fields["mode"]),
                       flow_l_min=float(fields["flow_l_min"]),
                       ambient_c=float(fields["ambient_c"]),
                       source=Source(fields["source"]), seed=seed)
        except ValueError as exc:
            raise CsvParseError(f"bad metadata value: {exc}", lineno) from None


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """Ordered (time, temperature) samples for one operating scenario.

    Raw datasets (pre-cleaning) may be unsorted or contain NaNs; call
    :meth:`validate` or :func:`preprocess` before fitting.
    """

    time: np.ndarray
    temperature: np.ndarray
    meta: ScenarioMeta

    @classmethod
    def from_arrays(cls, time, temperature, meta: ScenarioMeta) -> TimeSeriesDataset:
        t = np.array(time, dtype=float)
        y = np.array(temperature, dtype=float)
        if t.shape != y.shape or t.ndim != 1:
            raise DataError(f"time and temperature must be equal-length 1-D, got {t.shape} and {y.shape}")
        t.flags.writeable = False
        y.flags.writeable = False
        return cls(t, y, meta)

    def __len__(self) -> int:
        return len(self.time)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeriesDataset):
            return NotImplemented
        return (self.meta == other.meta and np.array_equal(self.time, other.time)
                and np.array_equal(self.temperature, other.temperature))

    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.time.tolist(), self.temperature.tolist()))

    def subset(self, index) -> TimeSeriesDataset:
        return TimeSeriesDataset.from_arrays(self.time[index], self.temperature[index], self.meta)

    def validate(self) -> None:
        if len(self) == 0:
            raise DataError("dataset is empty")
        if not (np.all(np.isfinite(self.time)) and np.all(np.isfinite(self.temperature))):
            raise DataError("dataset contains non-finite values")
        if len(self) > 1 and not np.all(np.diff(self.time) > 0):
            raise DataError("time must be strictly increasing")

    def content_hash(self) -> str:
        """SHA-256 of the canonical CSV encoding; identifies a dataset across runs."""
        return hashlib.sha256(to_csv_text(self).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SplitDataset:
    train: TimeSeriesDataset
    test: TimeSeriesDataset
    seed: int
    ratio: float
    strategy: SplitStrategy = SplitStrategy.SHUFFLED


# --- CSV -------------------------------------------------------------------

def to_csv_text(dataset: TimeSeriesDataset) -> str:
    buf = io.StringIO()
    buf.write(CSV_MAGIC + "\n")
    buf.write(dataset.meta.header_line() + "\n")
    buf.write(CSV_COLUMNS + "\n")
    for t, y in zip(dataset.time.tolist(), dataset.temperature.tolist()):
        # repr gives the shortest string that round-trips the float
        buf.write(f"{t!r},{y!r}\n")
    return buf.getvalue()


def write_csv(dataset: TimeSeriesDataset, path) -> None:
    dataset.validate()
    Path(path).write_text(to_csv_text(dataset), encoding="utf-8", newline="\n")


def load_csv(path, *, strict: bool = True) -> TimeSeriesDataset:
    """Read a dataset written by :func:`write_csv` (or an experimental export
    in the same schema).

    With ``strict`` the dataset invariants are enforced: non-finite values and
    non-increasing time raise :class:`DataError`. Pass ``strict=False`` to load
    raw data for :func:`preprocess`.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != CSV_MAGIC:
        raise CsvParseError(f"expected {CSV_MAGIC!r} header", 1)
    if len(lines) < 2 or not lines[1].startswith("#"):
        raise CsvParseError("missing metadata line", 2)
    meta = ScenarioMeta.parse_header(lines[1].rstrip("\r"), 2)
    if len(lines) < 3:
        raise DataError("missing column header line")
    columns = [c.strip() for c in lines[2].rstrip("\r").split(",")]
    if columns != CSV_COLUMNS.split(","):
        raise DataError(f"expected columns {CSV_COLUMNS!r}, got {lines[2]!r}")

    times, temps = [], []
    for lineno, raw in enumerate(lines[3:], start=4):
        row = raw.rstrip("\r")
        if not row.strip():
            continue
        parts = row.split(",")
        if len(parts) != 2:
            raise CsvParseError(f"expected 2 fields, got {len(parts)}: {row!r}", lineno)
        try:
            t, y = float(parts[0]), float(parts[1])
        except ValueError:
            raise CsvParseError(f"non-numeric value in {row!r}", lineno) from None
        if strict and not (math.isfinite(t) and math.isfinite(y)):
            raise DataError(f"line {lineno}: non-finite value in {row!r}")
        times.append(t)
        temps.append(y)

    dataset = TimeSeriesDataset.from_arrays(times, temps, meta)
    if strict:
        dataset.validate()
    return dataset


# --- cleaning --------------------------------------------------------------

@dataclass(frozen=True)
class PreprocessConfig:
    rebase_time: bool = False


@dataclass(frozen=True)
class CleaningReport:
    n_in: int
    n_out: int
    dropped_non_finite: int
    dropped_duplicates: int


def preprocess_with_report(dataset: TimeSeriesDataset,
                           config: PreprocessConfig | None = None
                           ) -> tuple[TimeSeriesDataset, CleaningReport]:
    config = config or PreprocessConfig()
    t, y = dataset.time, dataset.temperature
    finite = np.isfinite(t) & np.isfinite(y)
    t, y = t[finite], y[finite]
    order = np.argsort(t, kind="stable")
    t, y = t[order], y[order]
    keep = np.ones(len(t), dtype=bool)
    keep[1:] = t[1:] != t[:-1]  # stable sort keeps the first occurrence leading
    t, y = t[keep], y[keep]
    if len(t) == 0:
        raise DataError("dataset is empty after cleaning")
    if config.rebase_time:
        t = t - t[0]
    report = CleaningReport(n_in=len(dataset), n_out=len(t),
                            dropped_non_finite=int((~finite).sum()),
                            dropped_duplicates=int((~keep).sum()))
    return TimeSeriesDataset.from_arrays(t, y, dataset.meta), report


def preprocess(dataset: TimeSeriesDataset, config: PreprocessConfig | None = None) -> TimeSeriesDataset:
    """Drop non-finite rows, sort by time, collapse duplicate timestamps (first wins)."""
    cleaned, report = preprocess_with_report(dataset, config)
    if report.dropped_non_finite or report.dropped_duplicates:
        log.info("preprocess: dropped %d non-finite and %d duplicate rows",
                 report.dropped_non_finite, report.dropped_duplicates)
    return cleaned


# --- split -----------------------------------------------------------------

def split(dataset: TimeSeriesDataset, ratio: float = 0.75, seed: int = 0,
          strategy: SplitStrategy | str = SplitStrategy.SHUFFLED) -> SplitDataset:
    """Partition into train/test with ``floor(ratio * N)`` training samples.

    Both halves come back sorted by time.
    """
    strategy = SplitStrategy(strategy)
    if not 0 < ratio < 1:
        raise DataError(f"split ratio must lie in (0, 1), got {ratio}")
    n = len(dataset)
    n_train = math.floor(ratio * n)
    if n < 2 or n_train == 0 or n_train == n:
        raise DataError(f"degenerate split: N={n}, ratio={ratio} gives {n_train} train samples")
    if strategy is SplitStrategy.SHUFFLED:
        perm = np.random.default_rng(seed).permutation(n)
        train_idx, test_idx = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    else:
        order = np.argsort(dataset.time, kind="stable")
        train_idx, test_idx = np.sort(order[:n_train]), np.sort(order[n_train:])
    return SplitDataset(dataset.subset(train_idx), dataset.subset(test_idx),
                        seed=seed, ratio=ratio, strategy=strategy)


# --- synthesis -------------------------------------------------------------

def synthesize(params, profile, noise_sigma: float = 0.15, seed: int = 0, dt: float = 1.0,
               *, sample_every: int = 1) -> TimeSeriesDataset:
    """Simulated stack temperature plus i.i.d. Gaussian measurement noise."""
    from .thermal import simulate_cycle

    if not noise_sigma >= 0:
        raise DataError(f"noise_sigma must be >= 0, got {noise_sigma}")
    clean = simulate_cycle(params, profile, dt, sample_every=sample_every).dataset
    temps = clean.temperature
    if noise_sigma > 0:
        temps = temps + np.random.default_rng(seed).normal(0.0, noise_sigma, size=len(temps))
    meta = replace(clean.meta, source=Source.SYNTHETIC, seed=int(seed))
    return TimeSeriesDataset.from_arrays(clean.time, temps, meta)
