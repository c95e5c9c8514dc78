"""Run configuration: schemas, file loading and flag overrides.

Config files are YAML (JSON is accepted too, being a YAML subset). Every
section rejects unknown keys. Validation failures are reported one line per
problem as ``file:line: dotted.field: message``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Mapping

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError
from .physics import LaserParams
from .readout import MicChainParams, SmiChainParams
from .scenarios import (
    AMBIENT_SPL_DB,
    DropScenario,
    EventKind,
    SceneParams,
    WristProfile,
    default_recipe,
)
from .spectro import MelConfig


class ConfigValidationError(ConfigError):
    def __init__(self, diagnostics: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(diagnostics))
        self.diagnostics = diagnostics


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LaserConfig(_Section):
    wavelength_m: float = Field(650e-9, gt=0)
    feedback_C: float = Field(3.0, ge=0)
    linewidth_alpha: float = Field(4.6, ge=0)
    modulation_depth: float = Field(0.1, gt=0, le=1)


class SmiChainConfig(_Section):
    hp_cutoff_hz: float = Field(20.0, gt=0)
    sa_gain: float = Field(30.0, gt=0)
    adc_rate_hz: float = Field(18_000.0, gt=0)
    adc_bits: int = Field(12, ge=8, le=24)
    full_scale: float = Field(4.0, gt=0)
    electronic_noise_rms: float | None = Field(None, ge=0)


class MicChainConfig(_Section):
    sample_rate_hz: float = Field(20_000.0, gt=0)
    sensitivity: float = Field(1.0, gt=0)
    self_noise_rms: float = Field(0.001, ge=0)


class SceneConfig(_Section):
    airborne_to_surface_attenuation_db: float = Field(30.0, ge=0)
    room_anl_db: float | None = 57.0
    wrist_speed_rad_s: float = Field(0.4, gt=0)
    laser: LaserConfig = LaserConfig()
    smi_chain: SmiChainConfig = SmiChainConfig()
    mic_chain: MicChainConfig = MicChainConfig()

    def to_params(self) -> SceneParams:
        return SceneParams(
            airborne_to_surface_attenuation_db=self.airborne_to_surface_attenuation_db,
            room_anl_db=self.room_anl_db,
            laser=LaserParams(**self.laser.model_dump()),
            smi_chain=SmiChainParams(**self.smi_chain.model_dump()),
            mic_chain=MicChainParams(**self.mic_chain.model_dump()),
        )

    def wrist(self) -> WristProfile:
        return WristProfile(speed_rad_s=self.wrist_speed_rad_s)


class RecipeConfig(_Section):
    train_per_class: int = Field(50, ge=1)
    test_per_set: int = Field(10, ge=1)
    ambient_spl_db: float = AMBIENT_SPL_DB

    def build(self):
        return default_recipe(self.train_per_class, self.test_per_set, self.ambient_spl_db)


class DropConfig(_Section):
    events_per_scenario: int = Field(8, ge=1)
    baseline_anl_db: float = 57.0
    noise_anl_db: float = 82.0

    def build(self) -> tuple[DropScenario, ...]:
        n = self.events_per_scenario
        return (
            DropScenario("silicone_baseline", EventKind.SILICONE_DROP, self.baseline_anl_db, "robot", n),
            DropScenario("silicone_noise", EventKind.SILICONE_DROP, self.noise_anl_db, "robot", n),
            DropScenario("bolts_robot_cup", EventKind.BOLT_DROP, self.baseline_anl_db, "robot", n),
            DropScenario("bolts_person_cup", EventKind.BOLT_DROP, self.baseline_anl_db, "person", n),
        )


class MelSection(_Section):
    target_rate_hz: float = Field(16_000.0, gt=0)
    n_mels: int = Field(128, ge=1)
    window_ms: float = Field(25.0, gt=0)
    hop_ms: float = Field(10.0, gt=0)
    fmin_hz: float = Field(0.0, ge=0)
    fmax_hz: float | None = None
    n_fft: int = Field(1024, ge=1)
    log_floor: float = Field(1e-10, gt=0)

    def build(self) -> MelConfig:
        return MelConfig(**self.model_dump())


DEFAULT_SEED = 1234


class SimulateConfig(_Section):
    suite: Literal["shake", "drop"] = "shake"
    seed: int = Field(DEFAULT_SEED, ge=0)
    output_dir: str = "dataset"
    dry_run: bool = False
    recipe: RecipeConfig = RecipeConfig()
    drop: DropConfig = DropConfig()
    scene: SceneConfig = SceneConfig()


class TimedomainConfig(_Section):
    dataset_dir: str = "dataset"
    output_dir: str | None = None  # None -> the dataset directory
    rest_segment_s: float = Field(0.5, gt=0)
    peak_window_s: float = Field(0.05, gt=0)
    threshold_k: float = Field(5.0, gt=0)
    refractory_s: float = Field(0.1, gt=0)


class ClassifierSection(_Section):
    k: int = Field(5, ge=2)
    epochs: int = Field(10, ge=1)
    lr: float = Field(0.1, gt=0)
    lr_decay: float = Field(0.8, gt=0, le=1)
    batch_size: int = Field(8, ge=1)


class TrainEvalConfig(_Section):
    dataset_dir: str = "dataset"
    output_dir: str = "results"
    seed: int = Field(DEFAULT_SEED, ge=0)
    classifier: ClassifierSection = ClassifierSection()
    mel: MelSection = MelSection()
    save_models: bool = True


class SpectrogramConfig(_Section):
    input: str | None = None
    output_dir: str = "spectrograms"
    mel: MelSection = MelSection()


COMMAND_SCHEMAS: dict[str, type[_Section]] = {
    "simulate": SimulateConfig,
    "timedomain": TimedomainConfig,
    "train-eval": TrainEvalConfig,
    "spectrogram": SpectrogramConfig,
}


# -- loading -----------------------------------------------------------------


def _line_index(node, prefix=(), out=None) -> dict[tuple, int]:
    """Map key paths to 1-based source lines from a composed YAML node."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = prefix + (key.value,)
            out[path] = key.start_mark.line + 1
            _line_index(value, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            out[prefix + (i,)] = item.start_mark.line + 1
            _line_index(item, prefix + (i,), out)
    return out


def _set_dotted(tree: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"cannot override {dotted}: {part} is not a section")
        node = child
    node[parts[-1]] = value


def read_config_file(path) -> tuple[dict, dict[tuple, int]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from None
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigValidationError([f"{where}: syntax error: {getattr(exc, 'problem', exc)}"]) from None
    if data is None:
        return {}, {}
    if not isinstance(data, dict):
        raise ConfigValidationError([f"{path}:1: top level must be a mapping of keys"])
    return data, _line_index(node)


def load_config(command: str, path=None, overrides: Mapping[str, Any] | None = None):
    """Validated config for ``command``: defaults <- file <- flag overrides."""
    try:
        schema = COMMAND_SCHEMAS[command]
    except KeyError:
        raise ConfigError(f"unknown command {command!r}") from None
    data, lines = read_config_file(path) if path is not None else ({}, {})
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(data, dotted, value)
    try:
        return schema.model_validate(data)
    except ValidationError as exc:
        diags = []
        for err in exc.errors():
            loc = tuple(err["loc"])
            field = ".".join(str(p) for p in loc) or "<root>"
            line = next((lines[loc[:i]] for i in range(len(loc), 0, -1) if loc[:i] in lines), None)
            where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
            diags.append(f"{where}{field}: {err['msg']}")
        raise ConfigValidationError(diags) from None


def config_echo(cfg: BaseModel) -> dict:
    return cfg.model_dump(mode="json")
