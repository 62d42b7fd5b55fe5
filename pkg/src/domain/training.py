from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from configs.config import CameraSamplerConfig, RenderConfig
from domain.field import Grid, VoxelField
from domain.geometry import Aabb
from domain.layout import SceneLayout
from domain.occupancy import OccupancyGrid


@dataclass(eq=False)
class AdamState:
    m_density: Grid
    m_color: Grid
    v_density: Grid
    v_color: Grid
    t: int = 0

    @classmethod
    def zeros_like(cls, field: VoxelField) -> "AdamState":
        return cls(
            np.zeros_like(field.density), np.zeros_like(field.color),
            np.zeros_like(field.density), np.zeros_like(field.color),
        )


@dataclass(frozen=True, eq=False)
class FrozenScene:
    """Замороженная копия поля и сетки занятости, массивы недоступны для записи"""
    field: VoxelField
    grid: OccupancyGrid


@dataclass(eq=False)
class SceneState:
    trainable: VoxelField
    grid: OccupancyGrid
    layout: SceneLayout
    boxes: list[Aabb]
    adam: AdamState
    render: RenderConfig = field(default_factory=RenderConfig)
    camera: CameraSamplerConfig = field(default_factory=CameraSamplerConfig)
    frozen: Optional[FrozenScene] = None
    step: int = 0


@dataclass(frozen=True)
class LossReport:
    per_object: list[float]
    rec_loss: float
    alpha: float
    grad_norm: float
    # норма градиента только от объектных потерь, без сохранения сцены
    object_grad_norm: float = 0.0

    @property
    def total(self) -> float:
        return sum(self.per_object) + self.alpha * self.rec_loss


class MetricsRecord(BaseModel):
    """Строка NDJSON-потока метрик"""
    model_config = ConfigDict(extra='forbid')

    step: int
    per_object_loss: list[float]
    rec_loss: float
    total: float
    grad_norm: float
    object_grad_norm: float
    outside_box_opacity: float


class CheckpointMeta(BaseModel):
    """Sidecar JSON чекпоинта: все, что нужно для продолжения обучения кроме сеток"""
    model_config = ConfigDict(extra='ignore')

    step: int
    adam_t: int
    lr: float
    beta1: float
    beta2: float
    eps: float
    alpha: float
    seed: int
    layout: SceneLayout
    field_file: str = "field.bxf"
    optimizer_file: str = "optimizer.bxf"
    frozen_file: Optional[str] = "frozen.bxf"
    rng_state: Optional[dict[str, Any]] = None
    oracle_rng_state: Optional[dict[str, Any]] = None
