"""Dataset ingestion: metadata CSVs, binary waveform records, label assignment.

Records are 10-second, 100 Hz, 12-lead recordings stored either in the WFDB
header/data layout (format 16 only: interleaved 16-bit little-endian
two's-complement samples, converted to millivolts via per-signal gain and
baseline) or in a portable CSV format used by the tests and export tooling.

Each record's diagnostic label is one of five superclasses.  A record is kept
only when the set of superclasses reachable from its statement codes is a
singleton; everything else is unlabeled and dropped from the dataset.
"""

from __future__ import annotations

import ast
import csv
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

__all__ = [
    "DatasetError",
    "Superclass",
    "RecordMeta",
    "EcgSignal",
    "LabeledDataset",
    "SIGNAL_LENGTH",
    "NUM_LEADS",
    "LEAD_NAMES",
    "parse_metadata",
    "parse_statement_map",
    "read_wfdb_record",
    "assign_superclass",
    "build_dataset",
    "read_portable_record",
    "write_portable_record",
    "read_portable_dataset",
    "write_portable_dataset",
]

SIGNAL_LENGTH = 1000
NUM_LEADS = 12
SAMPLING_RATE = 100.0
LEAD_NAMES = ("I", "II", "III", "AVL", "AVR", "AVF",
              "V1", "V2", "V3", "V4", "V5", "V6")


class DatasetError(Exception):
    """Raised for unreadable, malformed, or inconsistent dataset inputs."""


class Superclass(IntEnum):
    NORM = 0
    MI = 1
    STTC = 2
    CD = 3
    HYP = 4


_CLASS_BY_NAME = {c.name: c for c in Superclass}


@dataclass(frozen=True)
class RecordMeta:
    """One metadata row: identifiers, statement codes, fold, waveform location."""

    ecg_id: int
    patient_id: int
    scp_codes: dict[str, float]
    strat_fold: int
    waveform_path: str
    sampling_rate: float = SAMPLING_RATE


@dataclass
class EcgSignal:
    """A (1000, 12) matrix of finite millivolt samples, time-major."""

    samples: np.ndarray
    lead_names: tuple[str, ...] = LEAD_NAMES

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.shape != (SIGNAL_LENGTH, NUM_LEADS):
            raise DatasetError(
                f"signal shape {self.samples.shape} != ({SIGNAL_LENGTH}, {NUM_LEADS})")
        if not np.all(np.isfinite(self.samples)):
            raise DatasetError("signal contains non-finite samples")
        if len(self.lead_names) != NUM_LEADS:
            raise DatasetError(f"expected {NUM_LEADS} lead names")


@dataclass
class LabeledDataset:
    """Stacked single-label records: signals (n,1000,12), labels, fold ids."""

    signals: np.ndarray
    labels: np.ndarray
    folds: np.ndarray

    def __post_init__(self):
        self.signals = np.asarray(self.signals, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.folds = np.asarray(self.folds, dtype=np.int64)
        n = len(self.labels)
        if self.signals.shape[0] != n or self.folds.shape[0] != n:
            raise DatasetError("signals, labels and folds must have equal length")
        if n and (self.signals.ndim != 3 or self.signals.shape[1:] != (SIGNAL_LENGTH, NUM_LEADS)):
            raise DatasetError(
                f"signals must be (n, {SIGNAL_LENGTH}, {NUM_LEADS}), got {self.signals.shape}")
        if n and (self.labels.min() < 0 or self.labels.max() > 4):
            raise DatasetError("labels must be superclass codes in [0, 4]")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.signals[idx], self.labels[idx], self.folds[idx])

    def class_counts(self) -> dict[Superclass, int]:
        return {c: int(np.sum(self.labels == c.value)) for c in Superclass}

    @classmethod
    def empty(cls) -> "LabeledDataset":
        return cls(
            signals=np.empty((0, SIGNAL_LENGTH, NUM_LEADS)),
            labels=np.empty(0, dtype=np.int64),
            folds=np.empty(0, dtype=np.int64),
        )


def _parse_scp_codes(text: str) -> dict[str, float]:
    try:
        raw = ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ValueError(f"unparseable scp_codes {text!r}: {exc}") from None
    if not isinstance(raw, dict):
        raise ValueError(f"scp_codes must be a mapping, got {type(raw).__name__}")
    codes: dict[str, float] = {}
    for code, likelihood in raw.items():
        if not isinstance(code, str):
            raise ValueError(f"scp_codes key {code!r} is not a statement code")
        if not isinstance(likelihood, (int, float)):
            raise ValueError(f"scp_codes[{code!r}] likelihood {likelihood!r} is not numeric")
        value = float(likelihood)
        if not 0.0 <= value <= 100.0:
            raise ValueError(f"scp_codes[{code!r}] likelihood {value} outside [0, 100]")
        codes[code] = value
    return codes


def parse_metadata(csv_path) -> list[RecordMeta]:
    """Parse the per-record metadata CSV into :class:`RecordMeta` rows.

    Expected columns: ecg_id, patient_id, scp_codes (textual code->likelihood
    mapping, single or double quotes, integer or real likelihoods),
    strat_fold, and filename_lr for the 100 Hz waveform path.  Malformed rows
    raise with their row number; nothing is silently dropped.
    """
    path = Path(csv_path)
    if not path.is_file():
        raise DatasetError(f"metadata file not found: {path}")
    records: list[RecordMeta] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"ecg_id", "patient_id", "scp_codes", "strat_fold"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise DatasetError(
                f"metadata file {path} missing columns: {sorted(missing)}")
        for row_no, row in enumerate(reader, start=2):
            try:
                ecg_id = int(float(row["ecg_id"]))
                patient_id = int(float(row["patient_id"]))
                if ecg_id <= 0 or patient_id <= 0:
                    raise ValueError("ecg_id and patient_id must be positive")
                scp_codes = _parse_scp_codes(row["scp_codes"])
                fold = int(float(row["strat_fold"]))
                if not 1 <= fold <= 10:
                    raise ValueError(f"strat_fold {fold} outside 1-10")
            except ValueError as exc:
                raise DatasetError(f"{path} row {row_no}: {exc}") from None
            records.append(RecordMeta(
                ecg_id=ecg_id,
                patient_id=patient_id,
                scp_codes=scp_codes,
                strat_fold=fold,
                waveform_path=row.get("filename_lr", "") or "",
            ))
    return records


def parse_statement_map(csv_path) -> dict[str, Superclass | None]:
    """Map statement codes to superclasses (None for non-diagnostic codes).

    The file's first column holds the code; a ``diagnostic`` flag column
    selects rows that carry a ``diagnostic_class`` of NORM, MI, STTC, CD or
    HYP.  An unrecognized diagnostic class is an error naming the code.
    """
    path = Path(csv_path)
    if not path.is_file():
        raise DatasetError(f"statement map file not found: {path}")
    mapping: dict[str, Superclass | None] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if not fields:
            return mapping
        code_col = "code" if "code" in fields else fields[0]
        if "diagnostic" not in fields or "diagnostic_class" not in fields:
            raise DatasetError(
                f"statement map {path} needs 'diagnostic' and 'diagnostic_class' columns")
        for row in reader:
            code = (row[code_col] or "").strip()
            if not code:
                continue
            flag = (row["diagnostic"] or "").strip()
            is_diag = bool(flag) and float(flag) == 1.0
            if not is_diag:
                mapping[code] = None
                continue
            cls_name = (row["diagnostic_class"] or "").strip()
            if cls_name not in _CLASS_BY_NAME:
                raise DatasetError(
                    f"statement {code!r}: unknown diagnostic_class {cls_name!r}")
            mapping[code] = _CLASS_BY_NAME[cls_name]
    return mapping


def _parse_gain_field(field: str) -> tuple[float, float | None, str]:
    """Split a header gain spec 'gain(baseline)/units' into its parts."""
    units = ""
    if "/" in field:
        field, units = field.split("/", 1)
    baseline = None
    if "(" in field:
        if not field.endswith(")"):
            raise ValueError(f"malformed gain field {field!r}")
        field, inner = field[:-1].split("(", 1)
        baseline = float(inner)
    gain = float(field) if field else 0.0
    if gain == 0.0:
        gain = 200.0  # WFDB convention: zero means the default gain
    return gain, baseline, units


def read_wfdb_record(header_path, data_path=None) -> EcgSignal:
    """Read one WFDB record (format 16, 12 signals, 100 Hz, 1000 samples).

    Physical value = (raw - baseline) / gain millivolts, using each signal's
    gain and baseline from the header.  Anything outside the supported layout
    is rejected with a descriptive error.
    """
    header_path = Path(header_path)
    if not header_path.is_file():
        raise DatasetError(f"header file not found: {header_path}")
    lines = [ln.strip() for ln in header_path.read_text().splitlines()
             if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise DatasetError(f"empty header: {header_path}")
    head = lines[0].split()
    if len(head) < 4:
        raise DatasetError(f"{header_path}: record line needs name/nsig/fs/nsamples")
    n_sig = int(head[1])
    fs = float(head[2].split("/")[0])
    n_samples = int(head[3])
    if n_sig != NUM_LEADS:
        raise DatasetError(f"{header_path}: expected {NUM_LEADS} signals, got {n_sig}")
    if fs != SAMPLING_RATE:
        raise DatasetError(f"{header_path}: only {SAMPLING_RATE:.0f} Hz records supported, got {fs}")
    if n_samples != SIGNAL_LENGTH:
        raise DatasetError(
            f"{header_path}: expected {SIGNAL_LENGTH} samples per signal, got {n_samples}")
    if len(lines) < 1 + n_sig:
        raise DatasetError(f"{header_path}: missing signal specification lines")

    gains = np.empty(n_sig)
    baselines = np.empty(n_sig)
    names: list[str] = []
    dat_names: set[str] = set()
    for i, line in enumerate(lines[1:1 + n_sig]):
        parts = line.split()
        if len(parts) < 2:
            raise DatasetError(f"{header_path}: signal line {i} too short")
        dat_names.add(parts[0])
        if parts[1] != "16":
            raise DatasetError(
                f"{header_path}: signal {i} uses format {parts[1]}; only format 16 is supported")
        try:
            gain, baseline, _units = _parse_gain_field(parts[2]) if len(parts) > 2 else (200.0, None, "")
        except ValueError as exc:
            raise DatasetError(f"{header_path}: signal {i}: {exc}") from None
        if baseline is None:
            # fall back on adc_zero (field 5) when no explicit baseline given
            baseline = float(parts[4]) if len(parts) > 4 else 0.0
        gains[i] = gain
        baselines[i] = baseline
        names.append(parts[-1] if len(parts) >= 10 else LEAD_NAMES[i])
    if len(dat_names) != 1:
        raise DatasetError(f"{header_path}: all signals must share one data file")

    if data_path is None:
        data_path = header_path.parent / next(iter(dat_names))
    data_path = Path(data_path)
    if not data_path.is_file():
        raise DatasetError(f"data file not found: {data_path}")
    raw = np.fromfile(data_path, dtype="<i2")
    if raw.size != n_samples * n_sig:
        raise DatasetError(
            f"{data_path}: holds {raw.size} samples, header promises {n_samples * n_sig}")
    raw = raw.reshape(n_samples, n_sig).astype(np.float64)
    physical = (raw - baselines) / gains
    return EcgSignal(samples=physical, lead_names=tuple(names))


def assign_superclass(meta: RecordMeta,
                      stmt_map: dict[str, Superclass | None]) -> Superclass | None:
    """Single-label rule: the record's label iff exactly one superclass is
    reachable from its statement codes (any likelihood, including zero)."""
    classes = {stmt_map[code] for code in meta.scp_codes
               if stmt_map.get(code) is not None}
    if len(classes) == 1:
        return next(iter(classes))
    return None


def build_dataset(meta_list: list[RecordMeta],
                  stmt_map: dict[str, Superclass | None],
                  data_root) -> LabeledDataset:
    """Load waveforms for every single-label record, ordered by ecg_id."""
    root = Path(data_root)
    signals, labels, folds = [], [], []
    for meta in sorted(meta_list, key=lambda m: m.ecg_id):
        label = assign_superclass(meta, stmt_map)
        if label is None:
            continue
        base = root / meta.waveform_path
        try:
            sig = read_wfdb_record(base.with_suffix(".hea"), base.with_suffix(".dat"))
        except DatasetError as exc:
            raise DatasetError(f"record {meta.ecg_id}: {exc}") from None
        signals.append(sig.samples)
        labels.append(int(label))
        folds.append(meta.strat_fold)
    if not signals:
        return LabeledDataset.empty()
    return LabeledDataset(
        signals=np.stack(signals), labels=np.array(labels), folds=np.array(folds))


# ---------------------------------------------------------------------------
# Portable record format: <stem>.csv holds a header of 12 lead names followed
# by 1000 rows of 12 millivolt values; <stem>.label holds one line
# "<CLASS_NAME>,<strat_fold>".  Tests and exports use it so no binary dataset
# is ever required.
# ---------------------------------------------------------------------------

def write_portable_record(stem, signal: EcgSignal, label: Superclass, fold: int) -> None:
    stem = Path(stem)
    with open(f"{stem}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(signal.lead_names)
        for row in signal.samples:
            writer.writerow([repr(v) for v in row])
    with open(f"{stem}.label", "w") as fh:
        fh.write(f"{Superclass(label).name},{int(fold)}\n")


def read_portable_record(stem) -> tuple[EcgSignal, Superclass, int]:
    stem = Path(stem)
    csv_path = Path(f"{stem}.csv")
    label_path = Path(f"{stem}.label")
    if not csv_path.is_file() or not label_path.is_file():
        raise DatasetError(f"portable record {stem} needs both .csv and .label files")
    with csv_path.open(newline="") as fh:
        reader = csv.reader(fh)
        leads = tuple(next(reader))
        rows = [[float(v) for v in row] for row in reader]
    samples = np.array(rows, dtype=np.float64)
    text = label_path.read_text().strip()
    try:
        name, fold_s = text.split(",")
        label = _CLASS_BY_NAME[name.strip()]
        fold = int(fold_s)
    except (ValueError, KeyError):
        raise DatasetError(f"{label_path}: malformed label line {text!r}") from None
    return EcgSignal(samples=samples, lead_names=leads), label, fold


def write_portable_dataset(directory, ds: LabeledDataset, prefix: str = "rec") -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(len(ds))))
    for i in range(len(ds)):
        write_portable_record(
            directory / f"{prefix}{i:0{width}d}",
            EcgSignal(samples=ds.signals[i]),
            Superclass(int(ds.labels[i])),
            int(ds.folds[i]),
        )


def read_portable_dataset(directory) -> LabeledDataset:
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"portable dataset directory not found: {directory}")
    stems = sorted(p.with_suffix("") for p in directory.glob("*.csv"))
    if not stems:
        return LabeledDataset.empty()
    signals, labels, folds = [], [], []
    for stem in stems:
        sig, label, fold = read_portable_record(stem)
        signals.append(sig.samples)
        labels.append(int(label))
        folds.append(fold)
    return LabeledDataset(
        signals=np.stack(signals), labels=np.array(labels), folds=np.array(folds))
