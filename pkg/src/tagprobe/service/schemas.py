"""Pydantic request/response models for the HTTP service.

Paths in requests are interpreted on the service host's filesystem; the
bundled CLI runs the service in-process, so they are ordinary local paths.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..probe import TrainConfig

Normalize = Literal["zscore", "l2", "none"]
OrderPolicy = Literal["frequency_descending", "manifest_order", "seeded_shuffle"]
ReportKind = Literal["heatmap_csv", "curve_csv", "summary_json"]


class TrainSettings(BaseModel):
    learning_rate: float = 1e-3
    max_epochs: int = 1000
    patience: int = 20
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    l2_penalty: float = 0.0
    probability_clamp: float = 1e-7

    def to_config(self) -> TrainConfig:
        return TrainConfig(**self.model_dump())


class HealthResponse(BaseModel):
    status: str
    version: str


class SynthRequest(BaseModel):
    out_dir: str
    num_clips: int = 500
    num_tags: int = 10
    frame_dim: int = 32
    frames_per_clip: int = 4
    noise_scale: float = 0.1
    seed: int = 42
    name: Optional[str] = None


class SynthResponse(BaseModel):
    manifest: str
    files: list[str]


class AggregateRequest(BaseModel):
    manifest: str
    out_dir: str
    normalize: Normalize = "zscore"
    sources: Optional[list[str]] = None


class AggregateResponse(BaseModel):
    manifest: str
    files: list[str]


class TrainFullRequest(BaseModel):
    manifest: str
    out_dir: str
    embedding: str = "combined"
    normalize: Normalize = "zscore"
    seed: int = 0
    train: TrainSettings = Field(default_factory=TrainSettings)


class TrainFullResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_path: str
    map: Optional[float]
    mean_auc: Optional[float]
    num_test_rows: int
    excluded_tags: int
    files: list[str]


class GridRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    manifest: str
    out_dir: str
    embedding: str = "combined"
    normalize: Normalize = "zscore"
    n_values: Optional[list[int]] = None
    k_values: Optional[list[int]] = None
    seeds: Optional[list[int]] = None
    train: TrainSettings = Field(default_factory=TrainSettings)
    order_policy: OrderPolicy = "frequency_descending"
    dedup: bool = True
    correlation: bool = True
    full_model: Optional[str] = None
    workers: int = 1
    resume: bool = False
    timings: bool = False


class SweepRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    manifest: str
    out_dir: str
    embedding: str = "combined"
    normalize: Normalize = "zscore"
    k_values: Optional[list[int]] = None
    seeds: Optional[list[int]] = None
    train: TrainSettings = Field(default_factory=TrainSettings)
    order_policy: OrderPolicy = "frequency_descending"
    dedup: bool = True
    correlation: bool = True
    full_model: Optional[str] = None
    workers: int = 1
    resume: bool = False
    timings: bool = False


class RunResponse(BaseModel):
    out_dir: str
    rows: int
    files: list[str]


class ReportRequest(BaseModel):
    results: str
    kind: ReportKind
    out_dir: str


class ReportResponse(BaseModel):
    files: list[str]


class ValidateRequest(BaseModel):
    paths: list[str]


class ValidateResponse(BaseModel):
    ok: bool
    reports: list[dict]
