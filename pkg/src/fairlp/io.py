"""File formats: dataset CSVs, channel and joint JSON, curve and scatter CSVs.

Writers are deterministic: floats use ``repr``, JSON keys are sorted and
every file ends with a single LF.
"""

from __future__ import annotations

import csv
import enum
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import EmptyData, InvalidInput, ParseError
from .prob_core import Channel, ChannelLike, DistortionMatrix, JointDistribution, normalize_counts

DATASET_HEADER = ("a", "x", "y")
COUNTS_HEADER = ("a", "x", "y", "count")


def _read_rows(path, header: Sequence[str]) -> list[tuple[int, list[str]]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise EmptyData(f"{path}: file is empty") from None
        if tuple(c.strip() for c in first) != tuple(header):
            raise ParseError(path, 1, f"expected header {','.join(header)!r}, got {','.join(first)!r}")
        return [(reader.line_num, row) for row in reader if row]


def _category(path, line: int, name: str, text: str) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise ParseError(path, line, f"{name}={text!r} is not an integer") from None
    if value < 0:
        raise ParseError(path, line, f"{name}={value} is negative")
    if name == "a" and value > 1:
        raise ParseError(path, line, f"a={value}; the sensitive attribute must be 0 or 1")
    return value


def _tally(records: list[tuple[int, int, int, float]], n_x: int | None, n_y: int | None) -> np.ndarray:
    if not records:
        raise EmptyData("no data rows")
    nx = max(2, max(r[1] for r in records) + 1, n_x or 0)
    ny = max(2, max(r[2] for r in records) + 1, n_y or 0)
    counts = np.zeros((2, nx, ny))
    for a, x, y, c in records:
        counts[a, x, y] += c
    return counts


def read_dataset_csv(path, n_x: int | None = None, n_y: int | None = None) -> np.ndarray:
    """Count tensor ``[a, x, y]`` from a one-record-per-row CSV.

    Alphabet sizes are the largest observed code plus one, at least 2, or the
    explicit ``n_x`` / ``n_y`` when larger.
    """
    records = []
    for line, row in _read_rows(path, DATASET_HEADER):
        if len(row) != 3:
            raise ParseError(path, line, f"expected 3 fields, got {len(row)}")
        a, x, y = (_category(path, line, n, v) for n, v in zip(DATASET_HEADER, row))
        records.append((a, x, y, 1.0))
    return _tally(records, n_x, n_y)


def read_counts_csv(path, n_x: int | None = None, n_y: int | None = None) -> np.ndarray:
    records = []
    for line, row in _read_rows(path, COUNTS_HEADER):
        if len(row) != 4:
            raise ParseError(path, line, f"expected 4 fields, got {len(row)}")
        a, x, y = (_category(path, line, n, v) for n, v in zip(DATASET_HEADER, row[:3]))
        try:
            c = float(row[3])
        except ValueError:
            raise ParseError(path, line, f"count={row[3]!r} is not a number") from None
        if not np.isfinite(c) or c < 0:
            raise ParseError(path, line, f"count={row[3]!r} must be finite and non-negative")
        records.append((a, x, y, c))
    return _tally(records, n_x, n_y)


def load_joint_from_data(data=None, counts=None, n_x: int | None = None, n_y: int | None = None) -> JointDistribution:
    if (data is None) == (counts is None):
        raise InvalidInput("give exactly one of a dataset CSV or a counts CSV")
    tensor = read_dataset_csv(data, n_x, n_y) if data is not None else read_counts_csv(counts, n_x, n_y)
    return normalize_counts(tensor)


# JSON

def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, Channel):
        return channel_to_dict(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_json(path, obj: Any) -> None:
    write_text(path, dumps(obj))


def read_json(path) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg) from None


def channel_to_dict(ch: Channel) -> dict:
    return {"rows": ch.n_in, "cols": ch.n_out, "data": [float(v) for v in ch.k.ravel()]}


def _matrix_from_dict(obj: Any, what: str) -> np.ndarray:
    if not isinstance(obj, dict) or not {"rows", "cols", "data"} <= obj.keys():
        raise InvalidInput(f"{what} must be an object with rows, cols and data")
    rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    if not isinstance(rows, int) or not isinstance(cols, int) or rows < 1 or cols < 1:
        raise InvalidInput(f"{what}: rows and cols must be positive integers")
    if not isinstance(data, list) or len(data) != rows * cols:
        raise InvalidInput(f"{what}: data must hold rows*cols = {rows * cols} numbers")
    return np.asarray(data, dtype=float).reshape(rows, cols)


def channel_from_dict(obj: Any) -> ChannelLike:
    """A single channel object, or a list of two indexed by the sensitive attribute.

    Exported curve points wrap the channel under a ``channel`` key; that
    wrapper is accepted too.
    """
    if isinstance(obj, dict) and "channel" in obj:
        obj = obj["channel"]
    if isinstance(obj, list):
        if len(obj) != 2:
            raise InvalidInput(f"group-conditioned channels need exactly 2 entries, got {len(obj)}")
        return tuple(Channel(_matrix_from_dict(o, f"channel[{a}]")) for a, o in enumerate(obj))
    return Channel(_matrix_from_dict(obj, "channel"))


def channel_payload(ch: ChannelLike) -> Any:
    if isinstance(ch, tuple):
        return [channel_to_dict(c) for c in ch]
    return channel_to_dict(ch)


def load_channel(path) -> ChannelLike:
    return channel_from_dict(read_json(path))


def save_channel(path, ch: ChannelLike) -> None:
    write_json(path, channel_payload(ch))


def joint_to_dict(joint: JointDistribution) -> dict:
    return {"shape": list(joint.p.shape), "axes": ["a", "x", "y"], "p": joint.p.tolist()}


def joint_from_dict(obj: Any) -> JointDistribution:
    if not isinstance(obj, dict) or "p" not in obj:
        raise InvalidInput("joint file must be an object with a 'p' array indexed [a][x][y]")
    return JointDistribution(np.asarray(obj["p"], dtype=float))


def load_joint(path) -> JointDistribution:
    return joint_from_dict(read_json(path))


def load_distortion(spec: str, n: int) -> DistortionMatrix:
    """``zero-one`` or a path to a ``{rows, cols, data}`` matrix."""
    if spec == "zero-one":
        return DistortionMatrix.zero_one(n)
    d = DistortionMatrix(_matrix_from_dict(read_json(spec), "distortion matrix"))
    if d.n != n:
        raise InvalidInput(f"distortion matrix is {d.n}x{d.n} but |Y| = {n}")
    return d


# CSV

def _fmt(v: float) -> str:
    return repr(float(v))


def _config_comment(config: dict | None) -> str:
    if config is None:
        return ""
    return "# config=" + json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":")) + "\n"


def curve_csv(rows: Iterable[tuple[float, float, bool]], config: dict | None = None) -> str:
    """``D,disc,breakpoint_flag`` lines; breakpoint rows carry flag 1."""
    lines = [_config_comment(config), "D,disc,breakpoint_flag\n"]
    lines += [f"{_fmt(D)},{_fmt(v)},{int(flag)}\n" for D, v, flag in rows]
    return "".join(lines)


def read_curve_csv(path) -> np.ndarray:
    """Array of ``(D, disc, flag)`` rows; comment lines are skipped."""
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for row in csv.DictReader(lines):
        rows.append((float(row["D"]), float(row["disc"]), int(row["breakpoint_flag"])))
    return np.array(rows, dtype=float).reshape(-1, 3)


def scatter_csv(pairs: Sequence[tuple[float, float]], seed: int, config: dict | None = None) -> str:
    lines = [f"# seed={seed} n={len(pairs)}\n", _config_comment(config), "tv,mi\n"]
    lines += [f"{_fmt(tv)},{_fmt(mi)}\n" for tv, mi in pairs]
    return "".join(lines)


def read_scatter_csv(path) -> np.ndarray:
    with Path(path).open(encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return np.array([(float(r["tv"]), float(r["mi"])) for r in csv.DictReader(lines)]).reshape(-1, 2)
