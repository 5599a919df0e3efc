"""Model/experiment configuration and flat ``key=value`` config files."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

PROFILES: dict[str, dict[str, Any]] = {
    "desk": dict(word_dim=100, char_dim=32, char_filters=30, pos_dim=32, hidden=128, layers=3,
                 arc_mlp=64, label_mlp=64, epochs=30, patience=5),
    "paper": dict(word_dim=300, char_dim=100, char_filters=100, pos_dim=100, hidden=1024, layers=3,
                  arc_mlp=512, label_mlp=128, epochs=100, patience=10),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ParserConfig:
    """Hyper-parameters shared by parsers and taggers.

    ``hidden`` is the per-direction LSTM size; encoder outputs are 2*hidden.
    """
    profile: str = "desk"
    word_dim: int = 100
    char_dim: int = 32
    char_filters: int = 30
    pos_dim: int = 32
    hidden: int = 128
    layers: int = 3
    arc_mlp: int = 64
    label_mlp: int = 64
    tagger_fc1: int = 128
    tagger_fc2: int = 64
    lm_vocab: int = 10000
    max_chars: int = 30
    epochs: int = 30
    batch_size: int = 16
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.9
    dropout: float = 0.33
    patience: int = 5
    clip: float = 5.0
    seed: int = 1
    pretrained: str = ""

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type == "int" and f.name not in ("seed",) and v < 1:
                raise ConfigError(f"{f.name} must be >= 1, got {v}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")

    @classmethod
    def for_profile(cls, profile: str = "desk", **overrides) -> "ParserConfig":
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}")
        return cls(profile=profile, **{**PROFILES[profile], **overrides})

    def with_(self, **kw) -> "ParserConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


SETUPS = ("lightly_supervised", "domain_adaptation", "length_adaptation")
MODELS = ("Base", "Base-FS", "Base+RG", "Self-Training", "DCST-LM", "DCST-NC", "DCST-DR", "DCST-RPE", "DCST-ENS")


@dataclass(frozen=True)
class ExperimentConfig:
    setup: str = "lightly_supervised"
    models: tuple[str, ...] = ("Base", "DCST-ENS")
    budget: str = "100"  # 100 | 500 | 1000 | all
    n_dev: int = 100
    seeds: tuple[int, ...] = (1,)
    freeze: str = "false"  # true | false | tune_on_dev
    rg_freeze: bool = False
    length_threshold: int = 10
    # lightly supervised: one corpus split into L/dev/U; test evaluated as given
    train: str = ""
    dev: str = ""
    test: str = ""
    # domain adaptation: source L/dev, target unlabeled train/dev, target test
    target_train: str = ""
    target_dev: str = ""
    # synthetic corpus when no paths are given
    synth_seed: int = 0
    synth_train: int = 2200
    synth_test: int = 500
    out: str = "runs/experiment"
    parser: ParserConfig = field(default_factory=ParserConfig)
    tagger_epochs: int = 0  # 0: same as parser epochs
    u_dev_fraction: float = 0.1

    def __post_init__(self):
        if self.setup not in SETUPS:
            raise ConfigError(f"unknown setup {self.setup!r}")
        bad = [m for m in self.models if m not in MODELS]
        if bad:
            raise ConfigError(f"unknown models {bad}")
        if not self.models:
            raise ConfigError("no models requested")
        if self.freeze not in ("true", "false", "tune_on_dev"):
            raise ConfigError(f"freeze must be true|false|tune_on_dev, got {self.freeze!r}")
        if self.budget != "all":
            try:
                if int(self.budget) < 1:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"budget must be a positive integer or 'all', got {self.budget!r}") from None


_EXPERIMENT_KEYS = {f.name: f for f in fields(ExperimentConfig) if f.name != "parser"}
_PARSER_KEYS = {f.name: f for f in fields(ParserConfig)}


def _coerce(value: str, typ: str):
    if typ == "int":
        return int(value)
    if typ == "float":
        return float(value)
    if typ == "bool":
        if value.lower() in ("1", "true", "yes"):
            return True
        if value.lower() in ("0", "false", "no"):
            return False
        raise ValueError(value)
    if typ.startswith("tuple[int"):
        return tuple(int(v) for v in value.replace(" ", "").split(",") if v)
    if typ.startswith("tuple[str"):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return value


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser_config(kv: dict[str, str]) -> ParserConfig:
    kv = dict(kv)
    profile = kv.pop("profile", "desk")
    unknown = [k for k in kv if k not in _PARSER_KEYS]
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    try:
        vals = {k: _coerce(v, _PARSER_KEYS[k].type) for k, v in kv.items()}
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return ParserConfig.for_profile(profile, **vals)


def build_experiment_config(kv: dict[str, str]) -> ExperimentConfig:
    exp, par = {}, {}
    for k, v in kv.items():
        if k in _EXPERIMENT_KEYS:
            exp[k] = v
        elif k in _PARSER_KEYS:
            par[k] = v
        else:
            raise ConfigError(f"unknown config key {k!r}")
    try:
        vals = {k: _coerce(v, _EXPERIMENT_KEYS[k].type) for k, v in exp.items()}
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return ExperimentConfig(parser=build_parser_config(par), **vals)


def dump_kv(cfg) -> str:
    """Fully resolved config in key=value form (parser keys flattened)."""
    lines = []
    d = asdict(cfg)
    nested = d.pop("parser", None)
    for k, v in sorted(d.items()):
        lines.append(f"{k}={_fmt(v)}")
    if nested is not None:
        for k, v in sorted(nested.items()):
            lines.append(f"{k}={_fmt(v)}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)
