"""File formats: edge lists, labels, SGE1 matrices, checkpoints, run configs, JSONL."""
import configparser
import json
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from specaug.augment import AugmentationConfig, CropSpec
from specaug.contrastive import TrainConfig
from specaug.encoder import GinParams
from specaug.graph import from_edge_pairs

SGE1_MAGIC = b"SGE1"
CHECKPOINT_MAGIC = b"SGCK"
_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    """Malformed input file."""


# ---------------------------------------------------------------- edge lists

@dataclass(eq=False)
class LoadedGraph:
    graph: object
    labels: np.ndarray = None
    # original id of each dense node id; None when ids were already 0..n-1
    remap: np.ndarray = None


def _data_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def parse_edge_list(text, source="<edges>"):
    """``(pairs, original_ids)`` from ``u v`` lines; ``#`` lines are comments."""
    pairs = []
    for lineno, line in _data_lines(text):
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{source}:{lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"{source}:{lineno}: node ids must be integers, got {line!r}") from None
        if u < 0 or v < 0:
            raise FormatError(f"{source}:{lineno}: node ids must be non-negative")
        pairs.append((u, v))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def densify(pairs):
    """Map ids onto ``0..n-1``; returns ``(pairs, remap)`` with ``remap=None``
    when the ids already are contiguous from 0."""
    ids = np.unique(pairs)
    if len(ids) == 0 or (ids[0] == 0 and ids[-1] == len(ids) - 1):
        return pairs, None
    return np.searchsorted(ids, pairs), ids


def load_dataset(edge_path, label_path=None, allow_self_loops=True):
    """Graph (and labels) from text files.

    Node ids that are not exactly ``0..n-1`` are densified in sorted order;
    ``remap[i]`` gives the original id of node ``i``. Label lines are
    ``node_id label`` in original ids; unlabelled nodes get ``-1``.
    """
    edge_path = Path(edge_path)
    pairs = parse_edge_list(edge_path.read_text(), str(edge_path))
    pairs, remap = densify(pairs)
    n = int(pairs.max()) + 1 if len(pairs) else 0
    g = from_edge_pairs(pairs, n, allow_self_loops=allow_self_loops)
    labels = None
    if label_path is not None:
        labels = load_labels(label_path, n, remap)
    return LoadedGraph(g, labels, remap)


def load_labels(label_path, num_nodes, remap=None):
    label_path = Path(label_path)
    labels = np.full(num_nodes, -1, dtype=np.int64)
    for lineno, line in _data_lines(label_path.read_text()):
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{label_path}:{lineno}: expected 'node_id label', got {line!r}")
        try:
            node, lab = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"{label_path}:{lineno}: expected integers, got {line!r}") from None
        if remap is not None:
            i = np.searchsorted(remap, node)
            if i >= len(remap) or remap[i] != node:
                raise FormatError(f"{label_path}:{lineno}: label for unknown node {node}")
            node = int(i)
        elif not 0 <= node < num_nodes:
            raise FormatError(f"{label_path}:{lineno}: label for unknown node {node}")
        labels[node] = lab
    return labels


def write_edge_list(path, g, node_ids=None):
    """``u v`` lines for each edge ``u <= v``; optional relabelling via ``node_ids``."""
    e = g.edges()
    if node_ids is not None:
        e = np.asarray(node_ids)[e]
    Path(path).write_text("".join(f"{u} {v}\n" for u, v in e))


# ---------------------------------------------------------------- SGE1

def sge1_bytes(matrix):
    """Header ``SGE1``, rows and cols as u32 LE, then row-major f32 LE values."""
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValueError("SGE1 stores 2-D matrices")
    if not np.isfinite(m).all():
        raise ValueError("SGE1 entries must be finite")
    rows, cols = m.shape
    if rows >= 2 ** 32 or cols >= 2 ** 32:
        raise ValueError("matrix too large for a u32 header")
    return _HEADER.pack(SGE1_MAGIC, rows, cols) + np.ascontiguousarray(m, dtype="<f4").tobytes()


def sge1_from_bytes(data):
    if len(data) < _HEADER.size:
        raise FormatError("truncated SGE1 header")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != SGE1_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {SGE1_MAGIC!r}")
    need = _HEADER.size + 4 * rows * cols
    if len(data) < need:
        raise FormatError(f"truncated SGE1 payload: {len(data)} bytes, need {need}")
    if len(data) > need:
        raise FormatError(f"{len(data) - need} trailing bytes after SGE1 payload")
    vals = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=_HEADER.size)
    return vals.reshape(rows, cols).astype(np.float32)


def write_sge1(path, matrix):
    Path(path).write_bytes(sge1_bytes(matrix))


def read_sge1(path):
    return sge1_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------- checkpoints

def checkpoint_bytes(params):
    """Deterministic little-endian float64 encoding of encoder parameters.

    Layout: magic ``SGCK``, a u32 length then a UTF-8 JSON header (sorted
    keys) describing shapes in storage order, then the raw arrays.
    """
    header = {
        "pos_dim": params.pos_dim, "degree_buckets": params.degree_buckets,
        "hidden_dim": params.hidden_dim, "num_layers": params.num_layers,
        "eps": [float(e) for e in params.eps],
        "arrays": [[name, list(a.shape)] for name, a in params.arrays.items()],
    }
    head = json.dumps(header, sort_keys=True).encode()
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.arrays.values())
    return CHECKPOINT_MAGIC + struct.pack("<I", len(head)) + head + body


def checkpoint_from_bytes(data):
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError("not a checkpoint file")
    (n,) = struct.unpack_from("<I", data, 4)
    header = json.loads(data[8:8 + n].decode())
    offset = 8 + n
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        if offset + 8 * count > len(data):
            raise FormatError("truncated checkpoint")
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset) \
            .reshape(shape).astype(np.float64)
        offset += 8 * count
    if offset != len(data):
        raise FormatError("trailing bytes in checkpoint")
    return GinParams(arrays, np.array(header["eps"], dtype=np.float64), header["pos_dim"],
                     header["degree_buckets"], header["hidden_dim"], header["num_layers"])


def save_checkpoint(path, params):
    Path(path).write_bytes(checkpoint_bytes(params))


def load_checkpoint(path):
    return checkpoint_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------- JSONL

class JsonlWriter:
    """Append-only writer of one JSON object per line."""

    def __init__(self, path):
        self._fh = open(path, "a", encoding="utf-8")

    def __call__(self, record):
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ---------------------------------------------------------------- run config

class ConfigError(ValueError):
    """Invalid run configuration."""


def _coerce(value, default, key):
    if isinstance(default, bool):
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        if isinstance(default, int) or (default is None and value.strip().lstrip("-").isdigit()):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return value.strip()


def parse_crop_specs(text):
    """``x0 x1 y0 y1 @ prob`` entries separated by ``;``; empty means no crops."""
    specs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            quant, prob = chunk.split("@")
            specs.append(CropSpec(tuple(float(x) for x in quant.split()), float(prob)))
        except ValueError as exc:
            raise ConfigError(f"crop_specs: cannot parse {chunk!r} ({exc})") from None
    return tuple(specs)


def format_crop_specs(specs):
    return "; ".join(" ".join(f"{q:g}" for q in s.quantiles) + f" @ {s.probability:g}"
                     for s in specs)


def _build(cls, section, name):
    defaults = cls()
    kwargs = {}
    known = {f.name for f in fields(cls)}
    for key, value in section.items():
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        if key == "crop_specs":
            kwargs[key] = parse_crop_specs(value)
        else:
            kwargs[key] = _coerce(value, getattr(defaults, key), f"[{name}] {key}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


@dataclass
class RunConfig:
    augment: AugmentationConfig = field(default_factory=AugmentationConfig)
    train: TrainConfig = field(default_factory=TrainConfig.desk)
    eval: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    seed: int = None
    output_dir: str = None


def load_run_config(path=None, text=None):
    """Read a flat ``key = value`` file with [run], [data], [augment], [train], [eval].

    Paths in [data] resolve relative to the config file and must exist.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        text = path.read_text()
        base = path.parent
    try:
        parser.read_string(text or "")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(parser.sections()) - {"run", "data", "augment", "train", "eval"}
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    cfg = RunConfig()
    if parser.has_section("augment"):
        cfg.augment = _build(AugmentationConfig, parser["augment"], "augment")
    if parser.has_section("train"):
        section = dict(parser["train"])
        preset = section.pop("preset", "desk")
        scheme = section.get("scheme", "e2e")
        if preset not in ("desk", "full"):
            raise ConfigError("[train] preset must be 'desk' or 'full'")
        base_cfg = TrainConfig.desk(scheme) if preset == "desk" else TrainConfig.full_scale(scheme)
        overrides = {f.name: getattr(base_cfg, f.name) for f in fields(TrainConfig)}
        for key, value in section.items():
            if key not in overrides:
                raise ConfigError(f"[train] unknown key {key!r}")
            overrides[key] = _coerce(value, overrides[key], f"[train] {key}")
        try:
            cfg.train = TrainConfig(**overrides)
        except ValueError as exc:
            raise ConfigError(f"[train] {exc}") from None
    if parser.has_section("eval"):
        cfg.eval = dict(parser["eval"])
    if parser.has_section("data"):
        for key, value in parser["data"].items():
            p = Path(value)
            p = p if p.is_absolute() else base / p
            if not p.exists():
                raise ConfigError(f"[data] {key}: {p} does not exist")
            cfg.data[key] = str(p)
    if parser.has_section("run"):
        run = parser["run"]
        if "seed" in run:
            cfg.seed = _coerce(run["seed"], 0, "[run] seed")
        cfg.output_dir = run.get("output_dir")
    return cfg


def dump_run_config(cfg):
    """Config text that :func:`load_run_config` reads back to an equal config."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    run = {}
    if cfg.seed is not None:
        run["seed"] = str(cfg.seed)
    if cfg.output_dir:
        run["output_dir"] = cfg.output_dir
    parser["run"] = run
    parser["data"] = dict(cfg.data)
    aug = {}
    for f in fields(AugmentationConfig):
        value = getattr(cfg.augment, f.name)
        aug[f.name] = format_crop_specs(value) if f.name == "crop_specs" else str(value)
    parser["augment"] = aug
    parser["train"] = {f.name: str(getattr(cfg.train, f.name)) for f in fields(TrainConfig)}
    parser["eval"] = dict(cfg.eval)
    lines = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in parser[section].items())
        lines.append("")
    return "\n".join(lines)
