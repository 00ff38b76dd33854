"""Experiment configuration file (YAML, versioned schema).

Every sub-section maps onto the corresponding module config dataclass;
unknown keys are rejected so typos surface as validation errors.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .classifier import ClassifierConfig
from .dataio import SynthConfig
from .preprocess import PreprocessConfig
from .protocol import AUG_METHODS, ProtocolConfig
from .relevance import RelevanceConfig
from .transfer import GanTrainConfig

SCHEMA_VERSION = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SynthSection(_Section):
    n_subjects: int = Field(6, ge=1)
    trials_per_class: int = Field(40, ge=1)
    c: int = Field(8, ge=1)
    p: int = Field(500, ge=1)
    fs: float = Field(250.0, gt=0)
    class_freqs: tuple[float, float] = (10.0, 22.0)
    subject_mixing_jitter: float = Field(0.5, ge=0)
    noise_level: float = Field(8.0, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _freqs_below_nyquist(self) -> SynthSection:
        for f in self.class_freqs:
            if not 0 < f < self.fs / 2:
                raise ValueError(f"class_freqs entry {f} must lie strictly inside (0, fs/2 = {self.fs / 2})")
        return self

    def build(self) -> SynthConfig:
        return SynthConfig(**self.model_dump())


class PreprocessSection(_Section):
    band_low: float = 8.0
    band_high: float = 30.0
    filter_order: int = Field(5, ge=1)
    channels_keep: list[str] = ["F3", "C3", "P3", "Cz", "Pz", "F4", "C4", "P4"]
    zscore: bool = True

    @model_validator(mode="after")
    def _band(self) -> PreprocessSection:
        if not 0 < self.band_low < self.band_high:
            raise ValueError("band_low/band_high: need 0 < band_low < band_high")
        if not self.channels_keep or len(set(self.channels_keep)) != len(self.channels_keep):
            raise ValueError("channels_keep must be nonempty without duplicates")
        return self

    def build(self) -> PreprocessConfig:
        d = self.model_dump()
        d["channels_keep"] = tuple(d["channels_keep"])
        return PreprocessConfig(**d)


class RelevanceSection(_Section):
    beta1: float = Field(0.8, gt=0, le=1)
    beta2: float = Field(0.8, gt=0, le=1)
    pca_dims: Union[int, float] = 0.95

    @field_validator("pca_dims")
    @classmethod
    def _dims(cls, v):
        if isinstance(v, int) and v < 1 or isinstance(v, float) and not 0 < v <= 1:
            raise ValueError("pca_dims: integer >= 1 or explained-variance fraction in (0, 1]")
        return v

    def build(self) -> RelevanceConfig:
        return RelevanceConfig(**self.model_dump())


class GanSection(_Section):
    lambda_gp: float = Field(10.0, ge=0)
    alpha_cyc: float = Field(10.0, ge=0)
    iterations: int = Field(1000, ge=0)
    batch_size: int = Field(8, ge=1)
    critic_steps_per_gen_step: int = Field(5, ge=1)
    learning_rate: float = Field(2e-4, ge=0)
    adam_betas: tuple[float, float] = (0.5, 0.9)
    gen_hidden: int = Field(8, ge=1)
    critic_hidden: int = Field(4, ge=1)
    n_res_blocks: int = Field(2, ge=0)
    critic_objective: Literal["log-score", "wgan-linear"] = "wgan-linear"
    gp_mode: Literal["real-pair", "real-fake"] = "real-fake"

    def build(self, seed: int = 0) -> GanTrainConfig:
        return GanTrainConfig(**self.model_dump(), seed=seed)


class ClassifierSection(_Section):
    f1: int = Field(8, ge=1)
    depth_mult: int = Field(2, ge=1)
    f2: int = Field(16, ge=1)
    temporal_kernel: Optional[int] = Field(None, ge=1)
    separable_kernel: int = Field(16, ge=1)
    dropout: float = Field(0.5, ge=0, lt=1)
    epochs: int = Field(50, ge=0)
    batch_size: int = Field(16, ge=1)
    learning_rate: float = Field(1e-3, ge=0)

    def build(self, seed: int = 0) -> ClassifierConfig:
        return ClassifierConfig(**self.model_dump(), seed=seed)


class AugmentSection(_Section):
    method: Literal[AUG_METHODS] = "cycle_gan"  # type: ignore[valid-type]
    gamma: Optional[float] = Field(None, gt=0)
    ratio: int = Field(10, ge=1)


class ExperimentConfig(_Section):
    schema_version: Literal[1] = SCHEMA_VERSION
    dataset_root: Optional[str] = None
    synth: Optional[SynthSection] = None
    preprocess: PreprocessSection = PreprocessSection()
    relevance: RelevanceSection = RelevanceSection()
    gan: GanSection = GanSection()
    classifier: ClassifierSection = ClassifierSection()
    augment: AugmentSection = AugmentSection()
    methods: list[Literal[AUG_METHODS]] = ["none", "cycle_gan"]  # type: ignore[valid-type]
    ratios: list[int] = [10, 20, 30, 40, 50]
    seeds: list[int] = [0]
    targets: Optional[list[str]] = None
    test_fraction: float = Field(0.2, gt=0, lt=1)
    spectral: bool = True
    band: tuple[float, float] = (8.0, 30.0)
    output_dir: str = "out"

    @field_validator("ratios")
    @classmethod
    def _ratios(cls, v: list[int]) -> list[int]:
        if any(r < 1 for r in v):
            raise ValueError("ratios must be positive integers")
        return v

    def protocol(self, method: str | None = None, ratio: int | None = None, seed: int | None = None) -> ProtocolConfig:
        return ProtocolConfig(
            method=self.augment.method if method is None else method,
            ratio=self.augment.ratio if ratio is None else ratio,
            gamma=self.augment.gamma,
            test_fraction=self.test_fraction,
            seed=self.seeds[0] if seed is None else seed,
            preprocess=self.preprocess.build(),
            relevance=self.relevance.build(),
            gan=self.gan.build(),
            classifier=self.classifier.build(),
            spectral=self.spectral,
            band=tuple(self.band),
        )

    def resolved(self) -> dict[str, Any]:
        return self.model_dump(mode="json")


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    return ExperimentConfig.model_validate(raw)


def dump_config(cfg: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(cfg.resolved(), sort_keys=True))
    return path
