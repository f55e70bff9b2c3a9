"""On-disk dataset format: a JSON manifest plus one raw float64 file per channel.

Layout::

    <root>/manifest.json
    <root>/cuts/tool01_cut001/M_spindle.f8
    <root>/cuts/tool01_cut001/drive_position.f8
    ...

Every binary is a flat little-endian float64 array. Paths in the manifest are
relative to the manifest's directory. Labels are stored as the 10-value array
in canonical order; per-edge measurements may be stored as a 4x10 array.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DatasetFormatError, InvalidMeasurement
from .labels import LABEL_NAMES, LABEL_SIZE, EdgeWearMeasurement, WearLabel
from .signals import CONDITION_KEYS, RAW_CHANNELS, ChannelId, CutRecord, CuttingConditions
from .transfer import normalize_fpt

FORMAT_NAME = "wearcast-dataset"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
DTYPE = np.dtype("<f8")
CSV_COLUMNS = tuple(c.value for c in RAW_CHANNELS) + ("drive_position",)


@dataclass(frozen=True)
class LabeledCut:
    record: CutRecord
    label: WearLabel
    edges: tuple[EdgeWearMeasurement, ...] | None = None


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    code: str
    message: str
    path: str = ""

    def __str__(self) -> str:
        where = f" [{self.path}]" if self.path else ""
        return f"{self.severity}: {self.code}: {self.message}{where}"


def manifest_path(root) -> Path:
    root = Path(root)
    return root if root.suffix == ".json" else root / MANIFEST_NAME


def _cut_dir(tool_id: int, cut_index: int) -> str:
    return f"cuts/tool{tool_id:02d}_cut{cut_index:03d}"


def _write_f8(path: Path, values) -> None:
    np.ascontiguousarray(values, dtype=DTYPE).tofile(path)


def _read_f8(path: Path) -> np.ndarray:
    return np.fromfile(path, dtype=DTYPE).astype(np.float64)


def write_dataset(root, cuts: Iterable[LabeledCut], meta: dict | None = None) -> Path:
    """Write cuts below ``root`` and return the manifest path.

    Output is byte-stable: binaries are written verbatim and the manifest is
    serialized with sorted keys and repr-exact floats.
    """
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directory {root}: {exc.strerror}") from exc
    entries = []
    for cut in cuts:
        rec = cut.record
        rel = _cut_dir(rec.tool_id, rec.cut_index)
        (root / rel).mkdir(parents=True, exist_ok=True)
        channels = {}
        for cid in RAW_CHANNELS:
            if cid not in rec.channels:
                raise DatasetFormatError(f"tool {rec.tool_id} cut {rec.cut_index}: missing channel {cid.value}")
            name = f"{rel}/{cid.value}.f8"
            _write_f8(root / name, rec.channels[cid])
            channels[cid.value] = name
        pos = f"{rel}/drive_position.f8"
        _write_f8(root / pos, rec.drive_position)
        entry = {
            "tool_id": int(rec.tool_id),
            "cut_index": int(rec.cut_index),
            "conditions": rec.conditions.as_dict(),
            "sampling_period": float(rec.sampling_period),
            "tool_diameter": float(rec.tool_diameter),
            "edge_count": int(rec.edge_count),
            "n_samples": len(rec),
            "channels": channels,
            "drive_position": pos,
            "label": [float(v) for v in cut.label.as_array()],
        }
        if cut.edges is not None:
            entry["edges"] = [[float(v) for v in e.as_vector()] for e in cut.edges]
        entries.append(entry)
    entries.sort(key=lambda e: (e["tool_id"], e["cut_index"]))
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "label_names": list(LABEL_NAMES),
        "meta": meta or {},
        "cuts": entries,
    }
    path = root / MANIFEST_NAME
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(root) -> dict:
    path = manifest_path(root)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DatasetFormatError(f"manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"manifest is not valid JSON: {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("cuts"), list):
        raise DatasetFormatError(f"manifest has no 'cuts' list: {path}")
    return doc


def _conditions(entry: dict) -> CuttingConditions:
    c = dict(entry["conditions"])
    c["f_z"] = normalize_fpt(float(c["f_z"]))
    return CuttingConditions(**{k: float(c[k]) for k in CONDITION_KEYS})


def load_dataset(root) -> list[LabeledCut]:
    """Read every cut listed in the manifest. Feed 0.525 is mapped to 0.0525 on load."""
    path = manifest_path(root)
    base = path.parent
    out = []
    for entry in read_manifest(path)["cuts"]:
        try:
            channels = {ChannelId(name): _read_f8(base / rel) for name, rel in entry["channels"].items()}
            edges = entry.get("edges")
            out.append(LabeledCut(
                CutRecord(
                    tool_id=int(entry["tool_id"]),
                    cut_index=int(entry["cut_index"]),
                    conditions=_conditions(entry),
                    sampling_period=float(entry["sampling_period"]),
                    channels=channels,
                    drive_position=_read_f8(base / entry["drive_position"]),
                    tool_diameter=float(entry.get("tool_diameter", 6.0)),
                    edge_count=int(entry.get("edge_count", 4)),
                ),
                WearLabel.from_array(entry["label"]),
                None if edges is None else tuple(
                    EdgeWearMeasurement.from_vector(v, edge_index=i + 1) for i, v in enumerate(edges)
                ),
            ))
        except (KeyError, TypeError) as exc:
            raise DatasetFormatError(f"malformed manifest entry {entry!r:.80}: {exc}") from exc
        except FileNotFoundError as exc:
            raise DatasetFormatError(f"missing channel file: {exc.filename}") from exc
    return out


def validate_dataset(root, fpt_grid: Sequence[float] | None = None) -> list[Diagnostic]:
    """Check a dataset without raising; returns diagnostics (errors and warnings)."""
    path = manifest_path(root)
    base = path.parent
    diags: list[Diagnostic] = []
    err = lambda code, msg, where="": diags.append(Diagnostic("error", code, msg, where))
    warn = lambda code, msg, where="": diags.append(Diagnostic("warning", code, msg, where))
    try:
        doc = read_manifest(path)
    except DatasetFormatError as exc:
        err("manifest", str(exc), str(path))
        return diags

    seen = set()
    last_vb: dict[int, tuple[int, float]] = {}
    for i, entry in enumerate(doc["cuts"]):
        tag = f"cuts[{i}]"
        try:
            key = (int(entry["tool_id"]), int(entry["cut_index"]))
            tag = f"tool {key[0]} cut {key[1]}"
        except (KeyError, TypeError, ValueError):
            err("entry", "missing or invalid tool_id/cut_index", tag)
            continue
        if key in seen:
            err("duplicate", "tool/cut pair listed twice", tag)
        seen.add(key)

        try:
            raw_fz = float(entry["conditions"]["f_z"])
            cond = _conditions(entry)
            if raw_fz != cond.f_z:
                warn("fpt_normalized", f"feed {raw_fz:g} read as {cond.f_z:g}", tag)
            if fpt_grid and not any(math.isclose(cond.f_z, g, abs_tol=1e-9) for g in fpt_grid):
                warn("fpt_off_grid", f"feed {cond.f_z:g} is not on the grid", tag)
        except (KeyError, TypeError, ValueError) as exc:
            err("conditions", f"invalid conditions: {exc}", tag)
        try:
            if not float(entry["sampling_period"]) > 0:
                err("sampling_period", "sampling_period must be positive", tag)
        except (KeyError, TypeError, ValueError):
            err("sampling_period", "missing or invalid sampling_period", tag)

        lengths = {}
        files = dict(entry.get("channels") or {})
        missing = [c.value for c in RAW_CHANNELS if c.value not in files]
        if missing:
            err("channels", f"manifest lacks channels {missing}", tag)
        if "drive_position" in entry:
            files["drive_position"] = entry["drive_position"]
        else:
            err("channels", "manifest lacks drive_position", tag)
        for name, rel in sorted(files.items()):
            fp = base / rel
            if not fp.is_file():
                err("missing_file", f"{name} file not found", str(fp))
                continue
            size = fp.stat().st_size
            if size % DTYPE.itemsize:
                err("file_size", f"{name} size {size} is not a multiple of 8 bytes", str(fp))
                continue
            lengths[name] = size // DTYPE.itemsize
        if len(set(lengths.values())) > 1:
            err("length", f"channel lengths differ: {lengths}", tag)
        elif lengths and "n_samples" in entry and next(iter(lengths.values())) != entry["n_samples"]:
            err("length", f"files hold {next(iter(lengths.values()))} samples, manifest says {entry['n_samples']}", tag)

        label = entry.get("label")
        if not isinstance(label, list) or len(label) != LABEL_SIZE:
            err("label", f"label must be a list of {LABEL_SIZE} numbers", tag)
        else:
            try:
                for problem in WearLabel.from_array(label).violations():
                    err("label", problem, tag)
                vb = float(label[8])
                prev = last_vb.get(key[0])
                if prev is not None and prev[0] < key[1] and vb < prev[1]:
                    warn("label_order", f"VB_E drops from {prev[1]:g} to {vb:g}", tag)
                last_vb[key[0]] = (key[1], vb)
            except (TypeError, ValueError) as exc:
                err("label", str(exc), tag)
        if entry.get("edges") is not None:
            edges = entry["edges"]
            if np.shape(edges) != (4, LABEL_SIZE):
                err("edges", f"edges must be a 4x{LABEL_SIZE} array, got shape {np.shape(edges)}", tag)
            else:
                for j, vec in enumerate(edges):
                    try:
                        EdgeWearMeasurement.from_vector(vec, edge_index=j + 1).check()
                    except InvalidMeasurement as exc:
                        err("edges", str(exc), tag)
    return diags


# ---- CSV


def write_cut_csv(path, record: CutRecord) -> None:
    """One row per sample with a time column, the raw channels and drive position."""
    cols = [np.arange(len(record)) * record.sampling_period]
    cols += [np.asarray(record.channels[c], dtype=np.float64) for c in RAW_CHANNELS]
    cols.append(np.asarray(record.drive_position, dtype=np.float64))
    np.savetxt(path, np.column_stack(cols), delimiter=",", fmt="%.17g", header=",".join(("time",) + CSV_COLUMNS), comments="")


def read_cut_csv(path, tool_id: int, cut_index: int, conditions: CuttingConditions, sampling_period: float) -> CutRecord:
    """Parse a per-cut CSV with a header naming the raw channels and drive_position.

    Extra columns (such as time) are ignored.
    """
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise DatasetFormatError(f"{path}: empty CSV")
    header = [h.strip() for h in header]
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise DatasetFormatError(f"{path}: missing columns {missing}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    col = {name: data[:, header.index(name)] for name in CSV_COLUMNS}
    return CutRecord(
        tool_id=tool_id,
        cut_index=cut_index,
        conditions=CuttingConditions(conditions.v_c, conditions.a_p, conditions.a_e, normalize_fpt(conditions.f_z)),
        sampling_period=sampling_period,
        channels={c: col[c.value] for c in RAW_CHANNELS},
        drive_position=col["drive_position"],
    )


INDEX_COLUMNS = ("file", "tool_id", "cut_index", "v_c", "a_p", "a_e", "f_z", "sampling_period") + LABEL_NAMES


def import_csv(index_path, out_root) -> Path:
    """Build a dataset from an index CSV listing per-cut CSV files and their labels.

    The index needs the columns in ``INDEX_COLUMNS``; ``file`` is resolved
    relative to the index's directory.
    """
    index_path = Path(index_path)
    cuts = []
    with open(index_path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in INDEX_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DatasetFormatError(f"{index_path}: index lacks columns {missing}")
        for row in reader:
            cond = CuttingConditions(*(float(row[k]) for k in CONDITION_KEYS))
            rec = read_cut_csv(
                index_path.parent / row["file"], int(row["tool_id"]), int(row["cut_index"]), cond, float(row["sampling_period"])
            )
            cuts.append(LabeledCut(rec, WearLabel.from_array([float(row[k]) for k in LABEL_NAMES])))
    return write_dataset(out_root, cuts, meta={"source": "csv-import"})


__all__ = [
    "LabeledCut",
    "Diagnostic",
    "MANIFEST_NAME",
    "CSV_COLUMNS",
    "INDEX_COLUMNS",
    "write_dataset",
    "read_manifest",
    "load_dataset",
    "validate_dataset",
    "write_cut_csv",
    "read_cut_csv",
    "import_csv",
]
