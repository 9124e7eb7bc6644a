"""Run configuration: flat key = value sections (INI), one file per run."""

import configparser
from dataclasses import asdict, dataclass, field


@dataclass
class RunConfig:
    # [data]
    csv: str = ""  # empty -> synthetic
    id_column: str = "id"
    label_column: str = "label"
    positive_label: str = ""
    synthetic_rows: int = 200
    synthetic_features: int = 8
    train_count: int = 160
    test_count: int = 40

    # [model]
    kind: str = "logistic"
    alpha: float = 0.5
    lam: float = 0.0
    epochs: int = 10
    batch_size: int = 8
    batches_per_epoch: int = 4
    per_batch_update: bool = True
    init_scale: float = 0.0  # 0 -> zero weight init

    # [protocol]
    parties: int = 2
    active_party: int = 1
    min_parties: int = 1
    bias: bool = True
    resolution: str = "none"  # none | exact | clk
    clk_threshold: float = 0.8
    clk_length: int = 1024
    clk_hashes: int = 2
    dropout_rate: float = 0.0
    dropout_party: int = 0  # 1-based, 0 -> nobody drops
    loss_every: int = 0  # secure-loss round every k epochs, 0 -> off

    # [crypto]
    group_bits: int = 48
    scale: int = 1000
    value_bound: float = 16.0
    table_bound: int = 1 << 16

    # [seeds]
    seed_group: int = 101
    seed_keys: int = 202
    seed_shuffle: int = 303
    seed_enc: int = 404
    seed_dropout: int = 505
    seed_init: int = 606

    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.resolution not in ("none", "exact", "clk"):
            raise ValueError(f"unknown resolution mode {self.resolution!r}")
        if not 1 <= self.active_party <= self.parties:
            raise ValueError("active party index out of range")


_SECTIONS = {
    "data": (
        "csv", "id_column", "label_column", "positive_label",
        "synthetic_rows", "synthetic_features", "train_count", "test_count",
    ),
    "model": (
        "kind", "alpha", "lam", "epochs", "batch_size",
        "batches_per_epoch", "per_batch_update", "init_scale",
    ),
    "protocol": (
        "parties", "active_party", "min_parties", "bias", "resolution",
        "clk_threshold", "clk_length", "clk_hashes",
        "dropout_rate", "dropout_party", "loss_every",
    ),
    "crypto": ("group_bits", "scale", "value_bound", "table_bound"),
    "seeds": (
        "seed_group", "seed_keys", "seed_shuffle",
        "seed_enc", "seed_dropout", "seed_init",
    ),
}

_BOOLS = ("per_batch_update", "bias")


def load_config(path):
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    defaults = RunConfig()
    kwargs = {}
    for section, keys in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        for key in keys:
            if not parser.has_option(section, key):
                continue
            current = getattr(defaults, key)
            if key in _BOOLS:
                kwargs[key] = parser.getboolean(section, key)
            elif isinstance(current, int):
                kwargs[key] = parser.getint(section, key)
            elif isinstance(current, float):
                kwargs[key] = parser.getfloat(section, key)
            else:
                kwargs[key] = parser.get(section, key)
    return RunConfig(**kwargs)


def save_config(cfg, path):
    parser = configparser.ConfigParser()
    values = asdict(cfg)
    for section, keys in _SECTIONS.items():
        parser.add_section(section)
        for key in keys:
            parser.set(section, key, str(values[key]))
    with open(path, "w") as fh:
        parser.write(fh)
