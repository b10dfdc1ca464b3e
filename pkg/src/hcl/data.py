"""Dataset ingestion, validation, splitting, normalization, synthesis.

Two on-disk formats are supported:

* ARFF (the Clus-style dialect): numeric attributes followed by one final
  ``hierarchical`` class attribute whose domain lists slash-separated paths;
  data rows carry the feature values and then one or more label paths,
  separated by commas and/or ``@``.
* Native: ``features.csv`` (headerless comma-separated decimals),
  ``labels.txt`` (one example per line, ``;``-separated paths) and
  ``hierarchy.txt`` (one path per line, ``#`` comments allowed).

Labels are stored as {-1,+1} matrices and ancestor-closed on ingestion: the
source files list only the most specific classes per example.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .losses import check_label_matrix
from .taxonomy import Taxonomy, load_hierarchy_file, parse_hierarchy

SPLIT_NAMES = ("train", "valid", "test")


@dataclass
class Dataset:
    features: np.ndarray  # N x D float64
    labels: np.ndarray  # N x C int8 over {-1, +1}, ancestor-closed
    taxonomy: Taxonomy
    split_tags: np.ndarray | None = None  # per-example index into SPLIT_NAMES

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def indices(self, split: str) -> np.ndarray:
        if self.split_tags is None:
            raise ValueError("dataset has no split tags; call split() first")
        if split not in SPLIT_NAMES:
            raise ValueError(f"unknown split {split!r}, expected one of {SPLIT_NAMES}")
        return np.flatnonzero(self.split_tags == SPLIT_NAMES.index(split))


def validate_dataset(d: Dataset) -> Dataset:
    if d.features.ndim != 2 or d.features.shape[0] == 0 or d.features.shape[1] == 0:
        raise ValueError(f"features must be a non-empty N x D matrix, got {d.features.shape}")
    if not np.isfinite(d.features).all():
        raise ValueError("features contain non-finite values")
    if d.labels.shape[0] != d.features.shape[0]:
        raise ValueError(
            f"row count mismatch: {d.features.shape[0]} feature rows vs "
            f"{d.labels.shape[0]} label rows"
        )
    check_label_matrix(d.labels, d.taxonomy)
    return d


def close_labels(positives_per_row, taxonomy: Taxonomy) -> np.ndarray:
    """Encode per-row positive class-id lists as an ancestor-closed +-1 matrix."""
    y = np.full((len(positives_per_row), taxonomy.n_classes), -1, dtype=np.int8)
    for i, pos in enumerate(positives_per_row):
        for c in pos:
            y[i, c] = 1
            for a in taxonomy.ancestors(c):
                y[i, a] = 1
    return y


def _paths_to_ids(paths, taxonomy, row):
    ids = []
    for p in paths:
        try:
            ids.append(taxonomy.id_of(p))
        except ValueError:
            raise ValueError(f"row {row}: unknown label path {p!r}") from None
    return ids


def parse_arff_hmc(path) -> Dataset:
    """Parse a hierarchical multi-label ARFF file (Clus dialect subset)."""
    feature_names: list[str] = []
    class_domain: list[str] | None = None
    data_rows: list[str] = []
    in_data = False
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            if in_data:
                data_rows.append(line)
                continue
            low = line.lower()
            if low.startswith("@relation"):
                continue
            if low.startswith("@data"):
                in_data = True
                continue
            if low.startswith("@attribute"):
                if class_domain is not None:
                    raise ValueError(
                        "the hierarchical class attribute must be the last attribute"
                    )
                body = line.split(None, 1)[1]
                name, _, typedecl = body.partition(" ")
                typedecl = typedecl.strip()
                if typedecl.lower().startswith("hierarchical"):
                    domain = typedecl[len("hierarchical"):].strip()
                    class_domain = [t.strip() for t in domain.split(",") if t.strip()]
                elif typedecl.lower() in ("numeric", "real"):
                    feature_names.append(name)
                else:
                    raise ValueError(
                        f"unsupported attribute type {typedecl!r} for {name!r}; "
                        "only numeric features and one hierarchical class attribute"
                    )
                continue
            raise ValueError(f"unrecognized ARFF header line: {line!r}")
    if class_domain is None:
        raise ValueError(f"{path}: no hierarchical class attribute declared")
    if not data_rows:
        raise ValueError(f"{path}: no data rows")

    taxonomy = parse_hierarchy(class_domain)
    n_feat = len(feature_names)
    features = np.empty((len(data_rows), n_feat), dtype=np.float64)
    positives = []
    for i, row in enumerate(data_rows):
        fields = [f.strip() for f in row.split(",")]
        if len(fields) < n_feat + 1:
            raise ValueError(f"row {i}: expected at least {n_feat + 1} fields, got {len(fields)}")
        for j, tok in enumerate(fields[:n_feat]):
            try:
                features[i, j] = float(tok)
            except ValueError:
                raise ValueError(
                    f"row {i}: non-numeric value {tok!r} for feature {feature_names[j]!r}"
                ) from None
        paths = [p.strip() for f in fields[n_feat:] for p in f.split("@") if p.strip()]
        if not paths:
            raise ValueError(f"row {i}: no label paths")
        positives.append(_paths_to_ids(paths, taxonomy, i))
    labels = close_labels(positives, taxonomy)
    return validate_dataset(Dataset(features=features, labels=labels, taxonomy=taxonomy))


def parse_native(features_csv, labels_file, hierarchy_file) -> Dataset:
    """Assemble a dataset from the three native files."""
    taxonomy = load_hierarchy_file(hierarchy_file)
    with open(features_csv, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"{features_csv}: no feature rows")
    try:
        features = np.array([[float(t) for t in r.split(",")] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{features_csv}: non-numeric feature value ({exc})") from None
    with open(labels_file, encoding="utf-8") as fh:
        label_lines = [line.rstrip("\n") for line in fh]
    while label_lines and label_lines[-1] == "":
        label_lines.pop()
    if len(label_lines) != len(rows):
        raise ValueError(
            f"row count mismatch: {len(rows)} feature rows vs {len(label_lines)} label lines"
        )
    positives = []
    for i, line in enumerate(label_lines):
        paths = [p.strip() for p in line.split(";") if p.strip()]
        if not paths:
            raise ValueError(f"row {i}: empty label line")
        positives.append(_paths_to_ids(paths, taxonomy, i))
    labels = close_labels(positives, taxonomy)
    return validate_dataset(Dataset(features=features, labels=labels, taxonomy=taxonomy))


def load_native_dir(directory) -> Dataset:
    return parse_native(
        os.path.join(directory, "features.csv"),
        os.path.join(directory, "labels.txt"),
        os.path.join(directory, "hierarchy.txt"),
    )


def emit_native(d: Dataset, directory) -> None:
    """Write the three native files. Only the most specific positives are
    listed per example; ancestor closure restores the rest on read."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "features.csv"), "w", encoding="utf-8") as fh:
        for row in d.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    tax = d.taxonomy
    with open(os.path.join(directory, "labels.txt"), "w", encoding="utf-8") as fh:
        for yrow in d.labels:
            pos = np.flatnonzero(yrow == 1)
            maximal = [
                c for c in pos
                if not any(yrow[k] == 1 for k in tax.children[c])
            ]
            fh.write(";".join(tax.class_names[c] for c in maximal) + "\n")
    tax.to_file(os.path.join(directory, "hierarchy.txt"))


def split(d: Dataset, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> Dataset:
    """Assign train/valid/test tags, stratified by top-level class.

    Global split sizes follow the ratios exactly (largest-remainder
    rounding); within that budget examples are dealt group by group, where a
    group is the example's first positive top-level class.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"need three positive ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got sum {sum(ratios)}")
    n = d.n_examples
    targets = _largest_remainder(n, ratios)
    if any(t == 0 for t in targets):
        raise ValueError(f"split of {n} examples by {ratios} leaves an empty split: {targets}")

    rng = np.random.default_rng(seed)
    top = d.taxonomy.top_level_ids
    group_key = np.array([int(top[np.argmax(d.labels[i, top] == 1)]) for i in range(n)])
    tags = np.full(n, -1, dtype=np.int64)
    remaining = list(targets)
    for g in sorted(set(group_key.tolist())):
        members = np.flatnonzero(group_key == g)
        members = members[rng.permutation(len(members))]
        quota = _largest_remainder(len(members), ratios)
        # clip to what each split can still absorb, spill the rest later
        start = 0
        for sidx in range(3):
            take = min(quota[sidx], remaining[sidx])
            tags[members[start:start + take]] = sidx
            remaining[sidx] -= take
            start += take
        for i in members[start:]:
            sidx = max(range(3), key=lambda k: remaining[k])
            tags[i] = sidx
            remaining[sidx] -= 1
    assert (tags >= 0).all() and remaining == [0, 0, 0]
    return replace(d, split_tags=tags)


def _largest_remainder(n: int, ratios) -> list[int]:
    exact = [n * r for r in ratios]
    counts = [int(np.floor(e)) for e in exact]
    rem = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: exact[i] - counts[i], reverse=True)
    for i in order[:rem]:
        counts[i] += 1
    return counts


@dataclass
class NormParams:
    mean: np.ndarray
    std: np.ndarray


def normalize(d: Dataset):
    """Standardize features with train-split statistics applied everywhere.

    Zero-variance features pass through unchanged. Returns the normalized
    dataset and the parameters used.
    """
    train_idx = d.indices("train")
    mean = d.features[train_idx].mean(axis=0)
    std = d.features[train_idx].std(axis=0)
    keep = std == 0.0
    mean = np.where(keep, 0.0, mean)
    std = np.where(keep, 1.0, std)
    feats = (d.features - mean) / std
    return replace(d, features=feats), NormParams(mean=mean, std=std)


# Spread of each example around its leaf center. Fixed so that
# cluster_separation alone sets the difficulty: at the default separation
# top-level clusters are cleanly separable while sibling leaves overlap.
FEATURE_NOISE_SCALE = 0.65


@dataclass
class SynthConfig:
    levels: int = 3  # tree levels counting the virtual root
    branching: int = 3
    examples_per_leaf: int = 150
    feature_dim: int = 16
    cluster_separation: float = 2.0
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if self.branching < 1:
            raise ValueError(f"branching must be >= 1, got {self.branching}")
        if self.examples_per_leaf < 1 or self.feature_dim < 1:
            raise ValueError("examples_per_leaf and feature_dim must be positive")
        if self.cluster_separation <= 0:
            raise ValueError(f"cluster_separation must be > 0, got {self.cluster_separation}")
        if not 0.0 <= self.label_noise < 0.5:
            raise ValueError(f"label_noise must lie in [0, 0.5), got {self.label_noise}")


def synth_generate(cfg: SynthConfig) -> Dataset:
    """Sample a hierarchical Gaussian-cluster dataset.

    A complete ``branching``-ary tree is built with classes at levels
    1..levels-1 (the root is virtual). Cluster centers nest: each child's
    center offsets its parent's by a direction scaled with
    ``cluster_separation`` and halved per level, so top-level clusters are
    far apart and sibling leaves overlap. ``label_noise`` relabels an
    example to a sibling leaf while its features stay with the original
    cluster, corrupting only the deepest label level.
    """
    rng = np.random.default_rng(cfg.seed)
    depth = cfg.levels - 1  # class levels
    paths = []
    frontier = [""]
    for _ in range(depth):
        nxt = []
        for prefix in frontier:
            for k in range(cfg.branching):
                p = f"{prefix}/{k}" if prefix else f"{k}"
                paths.append(p)
                nxt.append(p)
        frontier = nxt
    taxonomy = parse_hierarchy(paths)

    # centers keyed by path; direction draws in lexicographic class order so
    # the dataset is a pure function of the config
    centers = {"": np.zeros(cfg.feature_dim)}
    for name in taxonomy.class_names:
        parts = name.split("/")
        parent = "/".join(parts[:-1])
        direction = rng.standard_normal(cfg.feature_dim)
        direction /= np.linalg.norm(direction)
        scale = cfg.cluster_separation * 0.5 ** (len(parts) - 1)
        centers[name] = centers[parent] + scale * direction

    leaves = [taxonomy.class_names[c] for c in taxonomy.leaf_ids]
    n = len(leaves) * cfg.examples_per_leaf
    features = np.empty((n, cfg.feature_dim))
    positives = []
    row = 0
    for leaf in leaves:
        siblings = [
            taxonomy.class_names[k]
            for k in taxonomy.children[taxonomy.parent[taxonomy.id_of(leaf)]]
            if taxonomy.class_names[k] != leaf
        ] if taxonomy.parent[taxonomy.id_of(leaf)] is not None else [
            taxonomy.class_names[k] for k in taxonomy.top_level_ids
            if taxonomy.class_names[k] != leaf
        ]
        for _ in range(cfg.examples_per_leaf):
            features[row] = centers[leaf] + FEATURE_NOISE_SCALE * rng.standard_normal(cfg.feature_dim)
            labeled = leaf
            if cfg.label_noise > 0 and siblings and rng.random() < cfg.label_noise:
                labeled = siblings[rng.integers(len(siblings))]
            positives.append([taxonomy.id_of(labeled)])
            row += 1
    labels = close_labels(positives, taxonomy)
    return validate_dataset(Dataset(features=features, labels=labels, taxonomy=taxonomy))
