import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path

from app.dagger.models import DaggerConfig, HybridConfig
from app.depth_aug.models import AugmentConfig
from app.errors import ConfigError, ValidationError
from app.geometry import RigidTransform, UnitQuaternion
from app.pnp_servo.models import AXES, PidGains, ServoConfig, default_gains
from app.rewards.models import RewardConfig
from app.simworld.models import ScenarioConfig, WorldConfig

logger = logging.getLogger(__name__)

SECTIONS = {
    "world": WorldConfig,
    "servo": ServoConfig,
    "scenario": ScenarioConfig,
    "augmentation": AugmentConfig,
    "reward": RewardConfig,
    "dagger": DaggerConfig,
    "hybrid": HybridConfig,
}
TOP_LEVEL_KEYS = ("seed", "output_dir")


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    servo: ServoConfig = field(default_factory=ServoConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    augmentation: AugmentConfig = field(default_factory=AugmentConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    dagger: DaggerConfig = field(default_factory=DaggerConfig)
    hybrid: HybridConfig = field(default_factory=HybridConfig)
    seed: int | None = None
    output_dir: str | None = None
    source: str | None = None


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _check_keys(path, values, allowed):
    if not isinstance(values, dict):
        raise ConfigError(f"'{path}' must be a table")
    for key in values:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}'")


def _build_gains(values):
    _check_keys("servo.gains", values, AXES)
    gains = default_gains()
    allowed = [f.name for f in fields(PidGains)]
    for axis, overrides in values.items():
        _check_keys(f"servo.gains.{axis}", overrides, allowed)
        defaults = {name: getattr(gains[axis], name) for name in allowed}
        gains[axis] = PidGains(**{**defaults, **overrides})
    return gains


def _build_extrinsic(values):
    _check_keys("servo.extrinsic", values, ("translation", "rotation"))
    rotation = values.get("rotation", (1.0, 0.0, 0.0, 0.0))
    translation = values.get("translation", (0.0, 0.0, 0.0))
    return RigidTransform(UnitQuaternion.from_wxyz(rotation), translation)


def _build_section(name, cls, values):
    _check_keys(name, values, [f.name for f in fields(cls)])
    kwargs = {key: _freeze(value) for key, value in values.items()}
    try:
        if name == "servo":
            if "gains" in kwargs:
                kwargs["gains"] = _build_gains(values["gains"])
            if "extrinsic" in kwargs:
                kwargs["extrinsic"] = _build_extrinsic(values["extrinsic"])
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValidationError, ValueError, TypeError) as e:
        raise ConfigError(f"[{name}] {e}")


def parse_override(text):
    """Splits 'section.key=value' into a key path and a TOML-typed value."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    try:
        value = tomllib.loads(f"value = {raw.strip()}")["value"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key.strip().split("."), value


def apply_overrides(raw: dict, overrides) -> dict:
    merged = {k: dict(v) if isinstance(v, dict) else v for k, v in raw.items()}
    for text in overrides:
        path, value = parse_override(text)
        node = merged
        for depth, part in enumerate(path[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(
                    f"override {text!r}: '{'.'.join(path[: depth + 1])}' is not a table"
                )
            child = dict(child)
            node[part] = child
            node = child
        node[path[-1]] = value
    return merged


def build_experiment(raw: dict, source=None) -> ExperimentConfig:
    for key in raw:
        if key not in SECTIONS and key not in TOP_LEVEL_KEYS:
            raise ConfigError(f"unknown key '{key}'")
    sections = {
        name: _build_section(name, cls, raw.get(name, {}))
        for name, cls in SECTIONS.items()
    }

    dataset = sections["augmentation"].dataset_image
    if dataset is not None and not Path(dataset).is_file():
        raise ConfigError(f"'augmentation.dataset_image' file not found: {dataset}")

    seed = raw.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ConfigError(f"'seed' must be an integer, got {seed!r}")
    return ExperimentConfig(
        **sections, seed=seed, output_dir=raw.get("output_dir"), source=source
    )


def load_experiment(path=None, overrides=()) -> ExperimentConfig:
    """Reads a TOML experiment file, applies overrides and validates every section."""
    raw = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"experiment file not found: {path}")
        try:
            with open(path, "rb") as f:
                raw = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}")
    source = None if path is None else str(path)
    experiment = build_experiment(apply_overrides(raw, overrides), source=source)
    logger.info(f"Loaded experiment {path or '<defaults>'} with {len(overrides)} overrides")
    return experiment
