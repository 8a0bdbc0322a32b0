"""Flat key=value experiment configuration.

`#` starts a comment, blank lines are ignored, whitespace around keys and
values is tolerated. Every unknown key is an error naming the key, so typos
cannot drift silently. Command-line flags arrive as overrides and win over
file values; defaults fill whatever remains.
"""

from __future__ import annotations

from dataclasses import dataclass

from .activation import Barrier, EnergyMap


class ConfigError(ValueError):
    pass


MODELS = ("qt-bnn", "relu-bnn", "qt-rnn", "relu-rnn")
ENERGY_MAPS = ("smooth", "clamp")

KNOWN_KEYS = (
    "model", "barrier.height", "barrier.width", "energy_map", "hidden",
    "epochs", "lr", "batch", "mc_samples", "beta", "seed", "data.path",
    "data.synthetic.count", "split.fraction",
)

DEFAULT_SYNTHETIC_COUNT = 2500  # bnn runs without data.path: 2000/500 split


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    barrier_height: float
    barrier_width: float
    energy_map: str
    hidden: int
    epochs: int
    lr: float
    batch: int
    mc_samples: int
    beta: float
    seed: int
    data_path: str | None
    synthetic_count: int | None
    split_fraction: float

    @property
    def family(self) -> str:
        return "bnn" if self.model.endswith("bnn") else "rnn"

    @property
    def activation_name(self) -> str:
        return "qt" if self.model.startswith("qt-") else "relu"

    def barrier(self) -> Barrier:
        return Barrier(self.barrier_height, self.barrier_width)

    def energy_map_obj(self) -> EnergyMap:
        return EnergyMap(self.energy_map, 1.0)


def _parse_lines(text: str) -> dict:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = val
    return values


def _as_int(key: str, val: str, minimum: int) -> int:
    try:
        n = int(val)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {val!r} is not an integer") from exc
    if n < minimum:
        raise ConfigError(f"key {key!r}: {n} is below the minimum {minimum}")
    return n


def _as_float(key: str, val: str) -> float:
    try:
        return float(val)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {val!r} is not a number") from exc


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse config text, apply overrides (flag wins), fill defaults."""
    values = _parse_lines(text)
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = str(val)

    unknown = [k for k in values if k not in KNOWN_KEYS]
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}")

    model = values.pop("model", None)
    if model is None:
        raise ConfigError("missing required key 'model'")
    if model not in MODELS:
        raise ConfigError(f"key 'model': {model!r} is not one of {MODELS}")
    family = "bnn" if model.endswith("bnn") else "rnn"
    is_qt = model.startswith("qt-")

    if not is_qt:
        for key in ("barrier.height", "barrier.width"):
            if key in values:
                raise ConfigError(
                    f"key {key!r} is only valid for qt-* models, not {model}")
    if family == "rnn" and "data.synthetic.count" in values:
        raise ConfigError(
            "key 'data.synthetic.count' applies to image (bnn) models; "
            "rnn runs use the generated phrase corpus or data.path")
    if "data.path" in values and "data.synthetic.count" in values:
        raise ConfigError("data.path and data.synthetic.count are mutually exclusive")

    height = _as_float("barrier.height", values.pop("barrier.height", "1"))
    width = _as_float("barrier.width", values.pop("barrier.width", "1"))
    if is_qt:
        try:
            Barrier(height, width)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    energy_map = values.pop("energy_map", "smooth")
    if energy_map not in ENERGY_MAPS:
        raise ConfigError(f"key 'energy_map': {energy_map!r} is not one of {ENERGY_MAPS}")

    hidden = _as_int("hidden", values.pop("hidden", "64"), 1)
    epochs = _as_int("epochs", values.pop("epochs", "400" if family == "bnn" else "500"), 0)
    batch = _as_int("batch", values.pop("batch", "32"), 1)
    mc_samples = _as_int("mc_samples", values.pop("mc_samples", "10"), 1)

    lr = _as_float("lr", values.pop("lr", "0.05"))
    if lr <= 0:
        raise ConfigError(f"key 'lr': must be > 0, got {lr}")
    beta = _as_float("beta", values.pop("beta", "1"))
    if beta < 0:
        raise ConfigError(f"key 'beta': must be >= 0, got {beta}")

    seed = _as_int("seed", values.pop("seed", "0"), 0)
    if seed >= 2 ** 64:
        raise ConfigError("key 'seed': must fit in 64 bits")

    fraction = _as_float("split.fraction", values.pop("split.fraction", "0.8"))
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"key 'split.fraction': must be in (0, 1), got {fraction}")

    data_path = values.pop("data.path", None)
    synth = values.pop("data.synthetic.count", None)
    synthetic_count = None
    if family == "bnn" and data_path is None:
        synthetic_count = _as_int("data.synthetic.count",
                                  synth if synth is not None
                                  else str(DEFAULT_SYNTHETIC_COUNT), 2)

    assert not values, f"unconsumed keys {list(values)}"
    return ExperimentConfig(
        model=model, barrier_height=height, barrier_width=width,
        energy_map=energy_map, hidden=hidden, epochs=epochs, lr=lr,
        batch=batch, mc_samples=mc_samples, beta=beta, seed=seed,
        data_path=data_path, synthetic_count=synthetic_count,
        split_fraction=fraction,
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)
