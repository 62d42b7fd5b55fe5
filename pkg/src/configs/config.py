"""
Настройки запуска - при помощи pydantic-settings собираются из TOML-файла, переменных среды и флагов CLI

Приоритет источников: флаги командной строки > переменные среды (BOXFIELD_*) > TOML-файл > значения по умолчанию.

Classes
--------
FieldConfig
    Разрешение воксельного поля
OccupancyConfig
    Параметры сетки занятости
DensityBiasConfig
    Начальное смещение плотности (шар или эллипсоиды по боксам)
RenderConfig
    Параметры рендеринга лучей
CameraSamplerConfig
    Диапазоны случайных поз камеры
OptimizerConfig
    Шаги, скорость обучения, alpha и расписание метрик/чекпоинтов
OracleConfig
    Какой оракул градиента использовать и куда смотреть за целевыми картинками
LlmConfig
    Клиент LLM для генерации раскладки (живой или mock)
RunConfig
    Общие настройки запуска
"""

import math
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ValidationError, field_validator, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from service.service_result import ExitCode, ServiceResult

Vec3Tuple = tuple[float, float, float]

MOCK_LLM_DIR = Path(__file__).resolve().parent.parent / "resources" / "mock_llm"


class FieldConfig(BaseModel):
    resolution: int = 64

    @field_validator("resolution")
    @classmethod
    def check_resolution(cls, resolution: int) -> int:
        if resolution < 2:
            raise ValueError("Разрешение поля (resolution) должно быть не меньше 2")
        return resolution


class OccupancyConfig(BaseModel):
    resolution: int = 32
    threshold: float = 0.5
    update_interval: int = 16

    @field_validator("resolution", "update_interval")
    @classmethod
    def check_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("Значение должно быть положительным")
        return value

    @field_validator("threshold")
    @classmethod
    def check_threshold(cls, threshold: float) -> float:
        if threshold <= 0:
            raise ValueError("Порог занятости (threshold) должен быть больше нуля")
        return threshold


class DensityBiasConfig(BaseModel):
    """λ_σ - пиковая плотность, s_σ - безразмерный радиус"""
    lambda_sigma: float = 10.0
    s_sigma: float = 0.5
    floor: float = 1e-4
    init: Literal["object-centric", "uni-sphere"] = "object-centric"

    @field_validator("lambda_sigma", "s_sigma", "floor")
    @classmethod
    def check_positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("Параметры смещения плотности должны быть больше нуля")
        return value


class RenderConfig(BaseModel):
    samples_per_ray: int = 128
    near: float = 0.05
    far: float = 6.0
    background_color: Vec3Tuple = (0.0, 0.0, 0.0)
    stratified: bool = True
    # [near, far] дополнительно обрезается пересечением луча с кубом [-1, 1]^3
    clip_to_world: bool = True
    strict_transmittance: bool = False
    chunk_size: int = 4096

    @field_validator("samples_per_ray", "chunk_size")
    @classmethod
    def check_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("Значение должно быть положительным")
        return value

    @field_validator("background_color")
    @classmethod
    def check_background(cls, color: Vec3Tuple) -> Vec3Tuple:
        if any(c < 0 or c > 1 for c in color):
            raise ValueError("Цвет фона (background_color) должен лежать в [0, 1]")
        return color

    @model_validator(mode="after")
    def check_range(self) -> "RenderConfig":
        if not self.near < self.far:
            raise ValueError("near должен быть меньше far")
        return self


class CameraSamplerConfig(BaseModel):
    beta: float = 1.0
    distance_range: tuple[float, float] = (2.0, 2.5)
    elevation_range: tuple[float, float] = (0.0, math.radians(40))
    azimuth_range: tuple[float, float] = (-math.pi, math.pi)
    fov_y: float = math.radians(40)

    @field_validator("beta")
    @classmethod
    def check_beta(cls, beta: float) -> float:
        if beta <= 0:
            raise ValueError("beta должна быть больше нуля")
        return beta

    @field_validator("fov_y")
    @classmethod
    def check_fov(cls, fov_y: float) -> float:
        if not 0 < fov_y < math.pi:
            raise ValueError("fov_y должен лежать в (0, π)")
        return fov_y

    @field_validator("distance_range", "elevation_range", "azimuth_range")
    @classmethod
    def check_ordered(cls, bounds: tuple[float, float]) -> tuple[float, float]:
        if bounds[0] > bounds[1]:
            raise ValueError("Нижняя граница диапазона больше верхней")
        return bounds


class OptimizerConfig(BaseModel):
    steps: int = 10000
    lr: float = 0.05
    alpha: float = 0.3
    rays_per_object_per_step: int = 1024
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    clipped: bool = True
    checkpoint_every: int = 500
    metrics_every: int = 50
    n_probe_views: int = 4
    probe_resolution: int = 32

    @field_validator("steps")
    @classmethod
    def check_steps(cls, steps: int) -> int:
        if steps < 0:
            raise ValueError("Количество шагов (steps) не может быть отрицательным")
        return steps

    @field_validator("alpha")
    @classmethod
    def check_alpha(cls, alpha: float) -> float:
        if alpha < 0:
            raise ValueError("alpha не может быть отрицательной")
        return alpha

    @field_validator("rays_per_object_per_step")
    @classmethod
    def check_square(cls, rays: int) -> int:
        if rays < 1 or math.isqrt(rays) ** 2 != rays:
            raise ValueError("rays_per_object_per_step должно быть полным квадратом")
        return rays

    @field_validator("checkpoint_every", "metrics_every", "n_probe_views", "probe_resolution")
    @classmethod
    def check_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("Значение должно быть положительным")
        return value

    @property
    def image_side(self) -> int:
        return math.isqrt(self.rays_per_object_per_step)


class OracleConfig(BaseModel):
    kind: Literal["synthetic", "photometric"] = "synthetic"
    # каталог с PNG <object>_<bin>.png, без него цели - аналитические сферы
    targets: Optional[Path] = None
    kappa: float = 1.0
    timestep_range: tuple[float, float] = (0.02, 0.98)
    noise_seed: int = 0

    @field_validator("kappa")
    @classmethod
    def check_kappa(cls, kappa: float) -> float:
        if kappa <= 0:
            raise ValueError("kappa должна быть больше нуля")
        return kappa


class LlmConfig(BaseModel):
    endpoint: Optional[str] = None
    model: str = "gpt-4"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.5
    mode: Literal["live", "mock"] = "live"
    mock_dir: Optional[Path] = None
    timeout: float = 60.0

    @model_validator(mode="after")
    def check_mode(self) -> "LlmConfig":
        if self.mode == "mock" and self.mock_dir is None:
            raise ValueError("Для режима mock нужен каталог с ответами (mock_dir)")
        if self.mode == "live" and (not self.endpoint or not self.api_key_env):
            raise ValueError("Для живого режима нужны endpoint и имя переменной с ключом (api_key_env)")
        return self


class RunConfig(BaseSettings):
    """Общие настройки запуска"""
    model_config = SettingsConfigDict(
        env_prefix="BOXFIELD_",
        env_nested_delimiter="__",
        extra="ignore",
    )

    seed: int
    out: Path = Path("out")
    layout: Optional[Path] = None
    caption: Optional[str] = None
    workers: int = 1
    log_level: str = "INFO"
    # сторона картинок поворотного стола и cmd_render
    image_size: int = 128

    field: FieldConfig = FieldConfig()
    occupancy: OccupancyConfig = OccupancyConfig()
    bias: DensityBiasConfig = DensityBiasConfig()
    render: RenderConfig = RenderConfig()
    camera: CameraSamplerConfig = CameraSamplerConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    oracle: OracleConfig = OracleConfig()
    llm: LlmConfig = LlmConfig(mode="mock", mock_dir=MOCK_LLM_DIR)

    @classmethod
    def settings_customise_sources(
            cls,
            settings_cls: type[BaseSettings],
            init_settings: PydanticBaseSettingsSource,
            env_settings: PydanticBaseSettingsSource,
            dotenv_settings: PydanticBaseSettingsSource,
            file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return init_settings, env_settings, TomlConfigSettingsSource(settings_cls)

    @field_validator("workers", "image_size")
    @classmethod
    def check_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("Значение должно быть не меньше 1")
        return value

    @field_validator("layout")
    @classmethod
    def check_layout_exists(cls, layout: Optional[Path]) -> Optional[Path]:
        if layout is not None and not layout.is_file():
            raise ValueError(f"Файл раскладки не найден: {layout}")
        return layout

    @model_validator(mode="after")
    def sync_seed(self) -> "RunConfig":
        if self.oracle.targets is not None and not self.oracle.targets.is_dir():
            raise ValueError(f"Каталог с целевыми картинками не найден: {self.oracle.targets}")
        self.optimizer = self.optimizer.model_copy(update={"seed": self.seed})
        return self


def load_settings(config_path: Optional[Path], overrides: dict[str, Any]) -> ServiceResult[RunConfig]:
    """Собирает RunConfig: overrides - значения из флагов CLI (вложенные секции - словарями)"""
    if config_path is not None and not config_path.is_file():
        return ServiceResult.failure(f"Файл настроек не найден: {config_path}", ExitCode.INPUT)

    class FileRunConfig(RunConfig):
        model_config = SettingsConfigDict(**{**RunConfig.model_config, "toml_file": config_path})

    try:
        return ServiceResult.success(FileRunConfig(**overrides))
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        return ServiceResult.failure(f"Ошибка в настройках ({location}): {first['msg']}", ExitCode.INPUT)
