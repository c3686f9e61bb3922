"""Datasets, synthetic group-structured generation, disjoint partitioning, test splits.

Observations carry a group tag; partitioning assigns disjoint subsets of
observation ids to neuron units. All operations are pure functions of their
inputs and a seed.
"""

import csv
import json
import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .errors import DataError
from .seeding import rng_for

SELECTIONS = ("contiguous", "stratified", "explicit")
LABEL_RULE_KINDS = ("all-zero", "all-one", "linear-threshold")


@dataclass(frozen=True)
class Observation:
    id: int
    group: int
    label: int
    features: tuple[float, ...]

    def __post_init__(self):
        if self.id < 0 or self.group < 0:
            raise DataError(f"observation id/group must be non-negative, got id={self.id} group={self.group}")
        if self.label not in (0, 1):
            raise DataError(f"invalid label {self.label!r} for observation {self.id}")


@dataclass(frozen=True)
class Dataset:
    dim: int
    groups: tuple[tuple[int, str], ...]
    observations: tuple[Observation, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise DataError("dataset dimension must be >= 1")
        ids = [g for g, _ in self.groups]
        if sorted(ids) != list(range(len(ids))):
            raise DataError(f"group ids must be dense 0..G-1, got {ids}")
        known_groups = set(ids)
        seen = set()
        for obs in self.observations:
            if len(obs.features) != self.dim:
                raise DataError(f"observation {obs.id} has {len(obs.features)} features, expected {self.dim}")
            if obs.group not in known_groups:
                raise DataError(f"observation {obs.id} references unknown group {obs.group}")
            if obs.id in seen:
                raise DataError(f"duplicate observation id {obs.id}")
            seen.add(obs.id)

    @cached_property
    def _by_id(self) -> dict:
        return {obs.id: obs for obs in self.observations}

    def observation(self, obs_id: int) -> Observation:
        try:
            return self._by_id[obs_id]
        except KeyError:
            raise DataError(f"unknown observation id {obs_id}") from None

    def ids(self) -> tuple[int, ...]:
        return tuple(obs.id for obs in self.observations)

    def group_name(self, group: int) -> str:
        for g, name in self.groups:
            if g == group:
                return name
        raise DataError(f"unknown group {group}")


@dataclass(frozen=True)
class LabelRule:
    kind: str
    weights: tuple[float, ...] | None = None
    bias: float = 0.0

    def __post_init__(self):
        if self.kind not in LABEL_RULE_KINDS:
            raise DataError(f"unknown label rule {self.kind!r}")
        if self.kind == "linear-threshold" and not self.weights:
            raise DataError("linear-threshold rule needs weights")

    def apply(self, features) -> int:
        if self.kind == "all-zero":
            return 0
        if self.kind == "all-one":
            return 1
        if len(self.weights) != len(features):
            raise DataError("label rule weight length does not match features")
        z = sum(w * x for w, x in zip(self.weights, features)) + self.bias
        return 1 if z > 0 else 0

    def to_json(self):
        if self.kind == "linear-threshold":
            return {"kind": self.kind, "weights": list(self.weights), "bias": self.bias}
        return self.kind

    @classmethod
    def from_json(cls, obj) -> "LabelRule":
        if isinstance(obj, str):
            return cls(kind=obj)
        return cls(kind=obj["kind"], weights=tuple(float(w) for w in obj["weights"]),
                   bias=float(obj.get("bias", 0.0)))


@dataclass(frozen=True)
class GroupSpec:
    name: str
    mean: tuple[float, ...]
    scale: tuple[float, ...]
    label_rule: LabelRule
    count: int

    def __post_init__(self):
        if len(self.mean) != len(self.scale):
            raise DataError(f"group {self.name!r}: mean and scale lengths differ")
        if any(s <= 0 for s in self.scale):
            raise DataError(f"group {self.name!r}: scale entries must be > 0")
        if self.count < 1:
            raise DataError(f"group {self.name!r}: count must be >= 1")

    def to_json(self) -> dict:
        return {"name": self.name, "mean": list(self.mean), "scale": list(self.scale),
                "label_rule": self.label_rule.to_json(), "count": self.count}

    @classmethod
    def from_json(cls, obj: dict) -> "GroupSpec":
        return cls(name=str(obj["name"]),
                   mean=tuple(float(v) for v in obj["mean"]),
                   scale=tuple(float(v) for v in obj["scale"]),
                   label_rule=LabelRule.from_json(obj["label_rule"]),
                   count=int(obj["count"]))


@dataclass(frozen=True)
class PartitionPlan:
    assignments: tuple[tuple[int, int], ...]
    selection: str = "stratified"
    explicit_ids: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.selection not in SELECTIONS:
            raise DataError(f"unknown selection {self.selection!r}")
        units = [u for u, _ in self.assignments]
        if sorted(units) != list(range(len(units))):
            raise DataError(f"unit indices must be unique and contiguous from 0, got {units}")
        if any(c < 1 for _, c in self.assignments):
            raise DataError("planned counts must be positive")
        if self.selection == "explicit":
            if self.explicit_ids is None or len(self.explicit_ids) != len(self.assignments):
                raise DataError("explicit selection needs one id list per unit")
            for (unit, count), ids in zip(self.assignments, self.explicit_ids):
                if len(set(ids)) != len(ids):
                    raise DataError(f"unit {unit}: explicit id list has duplicates")
                if len(ids) != count:
                    raise DataError(f"unit {unit}: explicit list has {len(ids)} ids, plan says {count}")
        elif self.explicit_ids is not None:
            raise DataError("explicit_ids only valid with selection='explicit'")

    @classmethod
    def from_counts(cls, counts, selection: str = "stratified",
                    explicit_ids=None) -> "PartitionPlan":
        assignments = tuple((k, int(c)) for k, c in enumerate(counts))
        ids = None if explicit_ids is None else tuple(tuple(int(i) for i in lst) for lst in explicit_ids)
        return cls(assignments=assignments, selection=selection, explicit_ids=ids)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(c for _, c in self.assignments)

    def to_json(self) -> dict:
        out = {"selection": self.selection, "assignments": [list(a) for a in self.assignments]}
        if self.explicit_ids is not None:
            out["explicit_ids"] = [list(lst) for lst in self.explicit_ids]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PartitionPlan":
        explicit = obj.get("explicit_ids")
        return cls(assignments=tuple((int(u), int(c)) for u, c in obj["assignments"]),
                   selection=obj["selection"],
                   explicit_ids=None if explicit is None else tuple(tuple(int(i) for i in lst) for lst in explicit))


@dataclass(frozen=True)
class PartitionSet:
    subsets: dict
    plan: PartitionPlan
    seed: int

    def __post_init__(self):
        claimed = set()
        for unit, ids in self.subsets.items():
            if not ids:
                raise DataError(f"unit {unit}: subset is empty")
            overlap = claimed.intersection(ids)
            if overlap:
                raise DataError(f"subsets overlap on observation ids {sorted(overlap)}")
            claimed.update(ids)

    def unit_indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.subsets))

    def assigned_ids(self) -> frozenset:
        return frozenset(i for ids in self.subsets.values() for i in ids)

    def to_json(self) -> dict:
        out = {"seed": self.seed,
               "selection": self.plan.selection,
               "plan": [list(a) for a in self.plan.assignments],
               "subsets": {str(u): list(self.subsets[u]) for u in sorted(self.subsets)}}
        if self.plan.explicit_ids is not None:
            out["explicit_ids"] = [list(ids) for ids in self.plan.explicit_ids]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PartitionSet":
        explicit = obj.get("explicit_ids")
        plan = PartitionPlan(assignments=tuple((int(u), int(c)) for u, c in obj["plan"]),
                             selection=obj["selection"],
                             explicit_ids=None if explicit is None else tuple(
                                 tuple(int(i) for i in ids) for ids in explicit))
        subsets = {int(u): tuple(int(i) for i in ids) for u, ids in obj["subsets"].items()}
        return cls(subsets=subsets, plan=plan, seed=int(obj["seed"]))


def generate_synthetic(specs, seed: int) -> Dataset:
    """Sample a group-structured dataset.

    Each observation i of group g is mean_g + scale_g * N(0, I) drawn from a
    generator keyed by (seed, g, i), so the dataset is a pure function of
    (specs, seed) and independent of generation order.
    """
    specs = tuple(specs)
    if not specs:
        raise DataError("need at least one group spec")
    dim = len(specs[0].mean)
    for spec in specs:
        if len(spec.mean) != dim:
            raise DataError(f"group {spec.name!r} has dimension {len(spec.mean)}, expected {dim}")
    observations = []
    obs_id = 0
    for g, spec in enumerate(specs):
        for i in range(spec.count):
            draws = rng_for(seed, g, i).standard_normal(dim)
            features = tuple(float(m + s * d) for m, s, d in zip(spec.mean, spec.scale, draws))
            observations.append(Observation(id=obs_id, group=g,
                                            label=spec.label_rule.apply(features),
                                            features=features))
            obs_id += 1
    groups = tuple((g, spec.name) for g, spec in enumerate(specs))
    return Dataset(dim=dim, groups=groups, observations=tuple(observations))


_GROUP_COMMENT = re.compile(r"^# group (\d+): (.*)$")


def save_dataset(dataset: Dataset, path) -> None:
    """Write the dataset CSV (group names carried in leading comment lines)."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        for g, name in dataset.groups:
            fh.write(f"# group {g}: {name}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "group", "label"] + [f"f{i}" for i in range(dataset.dim)])
        for obs in dataset.observations:
            writer.writerow([obs.id, obs.group, obs.label] + [repr(x) for x in obs.features])


def load_dataset(path) -> Dataset:
    """Parse a dataset CSV; errors name the offending physical line."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    names = {}
    header = None
    rows = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                m = _GROUP_COMMENT.match(line)
                if m:
                    names[int(m.group(1))] = m.group(2)
                continue
            if header is None:
                header = next(csv.reader([line]))
                if header[:3] != ["id", "group", "label"] or any(
                        h != f"f{i}" for i, h in enumerate(header[3:])) or len(header) < 4:
                    raise DataError(f"bad header, line {lineno}: {line!r}")
                continue
            rows.append((lineno, next(csv.reader([line]))))
    if header is None:
        raise DataError(f"no header line in {path}")
    dim = len(header) - 3
    observations = []
    for lineno, row in rows:
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} columns, got {len(row)}, line {lineno}")
        try:
            obs_id, group = int(row[0]), int(row[1])
        except ValueError:
            raise DataError(f"non-integer id/group, line {lineno}") from None
        if row[2] not in ("0", "1"):
            raise DataError(f"invalid label, line {lineno}")
        try:
            features = tuple(float(v) for v in row[3:])
        except ValueError:
            raise DataError(f"non-numeric feature, line {lineno}") from None
        if names and group not in names:
            raise DataError(f"unknown group {group}, line {lineno}")
        observations.append(Observation(id=obs_id, group=group, label=int(row[2]), features=features))
    group_ids = sorted(names) if names else sorted({o.group for o in observations})
    groups = tuple((g, names.get(g, f"group {g}")) for g in group_ids)
    return Dataset(dim=dim, groups=groups, observations=tuple(observations))


def partition(dataset: Dataset, plan: PartitionPlan, seed: int) -> PartitionSet:
    """Assign disjoint observation subsets to units per the plan."""
    total = sum(plan.counts)
    if total > len(dataset.observations):
        raise DataError(f"plan needs {total} observations, dataset has {len(dataset.observations)}")
    subsets = {}
    if plan.selection == "contiguous":
        cursor = 0
        all_ids = dataset.ids()
        for unit, count in plan.assignments:
            subsets[unit] = tuple(sorted(all_ids[cursor:cursor + count]))
            cursor += count
    elif plan.selection == "stratified":
        group_ids = {g for g, _ in dataset.groups}
        for unit, count in plan.assignments:
            if unit not in group_ids:
                raise DataError(f"stratified selection: no group {unit} for unit {unit}")
            pool = [obs.id for obs in dataset.observations if obs.group == unit]
            if len(pool) < count:
                raise DataError(f"stratified group {unit} exhausted: has {len(pool)}, unit needs {count}")
            order = rng_for(seed, "partition", unit).permutation(len(pool))
            subsets[unit] = tuple(sorted(pool[j] for j in order[:count]))
    else:  # explicit
        known = set(dataset.ids())
        for (unit, _), ids in zip(plan.assignments, plan.explicit_ids):
            missing = set(ids) - known
            if missing:
                raise DataError(f"unit {unit}: explicit ids not in dataset: {sorted(missing)}")
            subsets[unit] = tuple(sorted(ids))
    return PartitionSet(subsets=subsets, plan=plan, seed=seed)


def make_test_sets(dataset: Dataset, partitions: PartitionSet, holdout_fraction: float,
                   seed: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Build the two evaluation id sets.

    non-overlapping: ids never assigned to any unit (unseen data).
    overlapping: a seeded sample of holdout_fraction of the assigned ids,
    measuring performance on data the units trained on.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise DataError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
    assigned = sorted(partitions.assigned_ids())
    non_overlapping = tuple(i for i in sorted(dataset.ids()) if i not in set(assigned))
    if not non_overlapping:
        raise DataError("no unassigned observations: non-overlapping test set would be empty")
    k = math.floor(holdout_fraction * len(assigned))
    picks = rng_for(seed, "holdout").choice(len(assigned), size=k, replace=False)
    overlapping = tuple(sorted(assigned[j] for j in picks))
    return overlapping, non_overlapping


def save_group_specs(specs, path) -> None:
    Path(path).write_text(json.dumps([s.to_json() for s in specs], indent=2) + "\n", encoding="utf-8")


def load_group_specs(path) -> tuple[GroupSpec, ...]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return tuple(GroupSpec.from_json(obj) for obj in raw)
