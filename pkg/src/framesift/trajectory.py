"""Trajectory data model and line-delimited trajectory file I/O.

A trajectory file (``.fst``) is UTF-8 text with one JSON record per line.
Each record carries the action matrix of one demonstration plus optional
sparse visual features and stage annotations.  Frame indices are 1-based
everywhere in this package.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterator

import numpy as np

REQUIRED_KEYS = frozenset({"id", "instruction", "actions", "gripper_dims"})
OPTIONAL_KEYS = frozenset({"visual_features", "stage_centers"})


class FstFormatError(ValueError):
    """Raised for malformed trajectory files or invariant violations."""


@dataclass(frozen=True, eq=False)
class VisualFeature:
    """A feature vector observed at one (1-based) frame index."""

    frame: int
    vec: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "frame", int(self.frame))
        object.__setattr__(self, "vec", np.asarray(self.vec, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One demonstration: action matrix plus optional side data.

    Attributes:
        id: Nonempty identifier, unique within a dataset.
        instruction: Natural-language task instruction.
        actions: (T, D) float64 action matrix, T >= 2, D >= 1.
        gripper_dims: 0-based action columns carrying gripper state.
        visual_features: Optional sparse per-frame feature vectors, sorted
            by strictly increasing frame index.
        stage_centers: Optional annotated stage centers as progress values
            in [0, 1].
    """

    id: str
    instruction: str
    actions: np.ndarray
    gripper_dims: tuple[int, ...] = ()
    visual_features: tuple[VisualFeature, ...] | None = None
    stage_centers: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", np.asarray(self.actions, dtype=np.float64))
        object.__setattr__(self, "gripper_dims", tuple(int(g) for g in self.gripper_dims))
        if self.visual_features is not None:
            object.__setattr__(self, "visual_features", tuple(self.visual_features))
        if self.stage_centers is not None:
            object.__setattr__(
                self, "stage_centers", tuple(float(c) for c in self.stage_centers)
            )

    @property
    def num_frames(self) -> int:
        return int(self.actions.shape[0])

    @property
    def action_dim(self) -> int:
        return int(self.actions.shape[1])

    def __repr__(self) -> str:
        return (
            f"Trajectory(id={self.id!r}, T={self.actions.shape[0]}, "
            f"D={self.actions.shape[1]}, gripper_dims={self.gripper_dims})"
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of trajectories with unique ids."""

    name: str
    trajectories: tuple[Trajectory, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "trajectories", tuple(self.trajectories))

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)


def validate_trajectory(traj: Trajectory) -> list[str]:
    """Check every trajectory invariant and return violation messages.

    Returns an empty list when the trajectory is valid.  Each message names
    the offending field so callers can report precise errors.
    """
    problems: list[str] = []
    if not traj.id:
        problems.append("id: must be nonempty")
    a = traj.actions
    if a.ndim != 2:
        problems.append(f"actions: expected a 2-d matrix, got {a.ndim}-d")
        return problems
    T, D = a.shape
    if T < 2:
        problems.append(f"actions: need at least 2 frames, got {T}")
    if D < 1:
        problems.append(f"actions: need at least 1 dimension, got {D}")
    if not np.all(np.isfinite(a)):
        problems.append("actions: non-finite action value")
    seen: set[int] = set()
    for g in traj.gripper_dims:
        if g < 0 or g >= D:
            problems.append(f"gripper_dims: index {g} outside [0, {D})")
        if g in seen:
            problems.append(f"gripper_dims: duplicate index {g}")
        seen.add(g)
    if traj.visual_features is not None and len(traj.visual_features) > 0:
        feats = traj.visual_features
        F = feats[0].vec.shape[0] if feats[0].vec.ndim == 1 else -1
        prev = 0
        for vf in feats:
            if vf.frame <= prev:
                problems.append(
                    f"visual_features: frame indices not strictly increasing at {vf.frame}"
                )
            prev = vf.frame
            if vf.frame < 1 or vf.frame > T:
                problems.append(f"visual_features: frame {vf.frame} outside [1, {T}]")
            if vf.vec.ndim != 1 or vf.vec.shape[0] < 1 or vf.vec.shape[0] != F:
                problems.append("visual_features: vectors must share one length F >= 1")
            elif not np.all(np.isfinite(vf.vec)):
                problems.append(f"visual_features: non-finite value at frame {vf.frame}")
    if traj.stage_centers is not None:
        for c in traj.stage_centers:
            if not np.isfinite(c) or c < 0.0 or c > 1.0:
                problems.append(f"stage_centers: value {c} outside [0, 1]")
    return problems


def _require(cond: bool, lineno: int, msg: str) -> None:
    if not cond:
        raise FstFormatError(f"line {lineno}: {msg}")


def _is_number(x: object) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _parse_record(obj: object, lineno: int) -> Trajectory:
    _require(isinstance(obj, dict), lineno, "record must be a JSON object")
    assert isinstance(obj, dict)
    keys = set(obj.keys())
    unknown = keys - REQUIRED_KEYS - OPTIONAL_KEYS
    _require(not unknown, lineno, f"unknown keys {sorted(unknown)}")
    missing = REQUIRED_KEYS - keys
    _require(not missing, lineno, f"missing keys {sorted(missing)}")

    _require(isinstance(obj["id"], str), lineno, "id must be a string")
    _require(isinstance(obj["instruction"], str), lineno, "instruction must be a string")

    actions = obj["actions"]
    _require(isinstance(actions, list) and len(actions) > 0, lineno, "actions must be a nonempty array")
    width = None
    for row in actions:
        _require(isinstance(row, list) and all(_is_number(x) for x in row), lineno,
                 "actions rows must be arrays of numbers")
        if width is None:
            width = len(row)
        _require(len(row) == width, lineno, "actions rows must have equal length")

    gripper = obj["gripper_dims"]
    _require(isinstance(gripper, list) and all(isinstance(g, int) and not isinstance(g, bool) for g in gripper),
             lineno, "gripper_dims must be an array of integers")

    visual = None
    if "visual_features" in obj:
        raw = obj["visual_features"]
        _require(isinstance(raw, list), lineno, "visual_features must be an array")
        visual = []
        for item in raw:
            _require(isinstance(item, dict) and set(item.keys()) == {"frame", "vec"}, lineno,
                     "visual_features entries must be {frame, vec} objects")
            _require(isinstance(item["frame"], int) and not isinstance(item["frame"], bool),
                     lineno, "visual_features frame must be an integer")
            _require(isinstance(item["vec"], list) and all(_is_number(x) for x in item["vec"]),
                     lineno, "visual_features vec must be an array of numbers")
            visual.append(VisualFeature(frame=item["frame"], vec=np.asarray(item["vec"], dtype=np.float64)))

    stages = None
    if "stage_centers" in obj:
        raw = obj["stage_centers"]
        _require(isinstance(raw, list) and all(_is_number(x) for x in raw), lineno,
                 "stage_centers must be an array of numbers")
        stages = tuple(float(c) for c in raw)

    traj = Trajectory(
        id=obj["id"],
        instruction=obj["instruction"],
        actions=np.asarray(actions, dtype=np.float64),
        gripper_dims=tuple(gripper),
        visual_features=tuple(visual) if visual is not None else None,
        stage_centers=stages,
    )
    problems = validate_trajectory(traj)
    if problems:
        raise FstFormatError(f"line {lineno}: trajectory '{traj.id}': " + "; ".join(problems))
    return traj


def parse_trajectory_stream(stream: IO, name: str = "") -> Dataset:
    """Parse a line-delimited trajectory stream into a validated Dataset.

    Accepts binary or text streams.  Raises FstFormatError with the 1-based
    line number for malformed records, invariant violations, or duplicate
    trajectory ids.
    """
    trajectories: list[Trajectory] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise FstFormatError(f"line {lineno}: invalid UTF-8 ({exc})") from None
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FstFormatError(f"line {lineno}: malformed record ({exc.msg})") from None
        traj = _parse_record(obj, lineno)
        if traj.id in seen_ids:
            raise FstFormatError(f"line {lineno}: duplicate trajectory id '{traj.id}'")
        seen_ids.add(traj.id)
        trajectories.append(traj)
    return Dataset(name=name, trajectories=tuple(trajectories))


def _record_dict(traj: Trajectory) -> dict:
    rec: dict = {
        "id": traj.id,
        "instruction": traj.instruction,
        "actions": traj.actions.tolist(),
        "gripper_dims": list(traj.gripper_dims),
    }
    if traj.visual_features is not None:
        rec["visual_features"] = [
            {"frame": vf.frame, "vec": vf.vec.tolist()} for vf in traj.visual_features
        ]
    if traj.stage_centers is not None:
        rec["stage_centers"] = list(traj.stage_centers)
    return rec


def write_trajectory_stream(dataset: Dataset, stream: IO) -> None:
    """Write a dataset as one JSON record per line.

    Floats are emitted in shortest round-trip form, so write followed by
    parse reproduces every value bit-exactly.
    """
    for traj in dataset:
        line = json.dumps(_record_dict(traj), separators=(", ", ": ")) + "\n"
        if hasattr(stream, "mode") and "b" in getattr(stream, "mode", ""):
            stream.write(line.encode("utf-8"))
        else:
            stream.write(line)


def load_dataset(path: str) -> Dataset:
    with open(path, "rb") as fp:
        return parse_trajectory_stream(fp, name=path)


def save_dataset(dataset: Dataset, path: str) -> None:
    """Save atomically: write to a temp file in the same directory, then rename."""
    import os
    import tempfile

    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fp:
            write_trajectory_stream(dataset, fp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
