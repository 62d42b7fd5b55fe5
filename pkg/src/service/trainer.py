"""
Цикл генерации: лоссы по объектам через оракул, лосс сохранения сцены, шаг оптимизатора
и обновление сетки занятости по расписанию
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import numpy.typing as npt
from tqdm import tqdm

import service.field_service as field_service
import service.occupancy_service as occupancy_service
import service.renderer as renderer
from configs.config import CameraSamplerConfig, DensityBiasConfig, OccupancyConfig, OptimizerConfig, RenderConfig
from domain.errors import OracleError, SceneAlreadyFrozenError, SceneNotFrozenError
from domain.field import FieldGradient, VoxelField
from domain.geometry import WORLD_BOX
from domain.layout import SceneLayout
from domain.occupancy import OccupancyGrid
from domain.render import RenderedImage
from domain.training import AdamState, FrozenScene, LossReport, MetricsRecord, SceneState
from service.geometry import generate_camera_rays, layout_boxes, probe_poses, sample_base_pose, \
    sample_object_centric_pose
from service.guidance import GuidanceOracle, TargetSource

MetricsSink = Callable[[MetricsRecord], None]
CheckpointSink = Callable[[SceneState, np.random.Generator], None]


def new_scene_state(
        layout: SceneLayout,
        field: VoxelField,
        occupancy: OccupancyConfig,
        render: RenderConfig,
        camera: CameraSamplerConfig,
        grid: Optional[OccupancyGrid] = None,
        refresh_grid: bool = True
) -> SceneState:
    """Состояние перед обучением; при refresh_grid сетка занятости пересчитывается по полю (шаг 0)"""
    if grid is None:
        grid = OccupancyGrid(occupancy.resolution, occupancy.threshold, occupancy.update_interval)
    if refresh_grid:
        occupancy_service.update_occupancy(grid, field, 0)
    return SceneState(
        trainable=field,
        grid=grid,
        layout=layout,
        boxes=layout_boxes(layout),
        adam=AdamState.zeros_like(field),
        render=render,
        camera=camera,
    )


def initialize_field(layout: SceneLayout, resolution: int, bias: DensityBiasConfig) -> VoxelField:
    field = VoxelField.zeros(resolution)
    if bias.init == "uni-sphere":
        field_service.init_uni_sphere_bias(field, bias)
    else:
        field_service.init_object_centric_bias(field, layout_boxes(layout), bias)
    return field


def freeze_scene(state: SceneState, from_scratch: bool) -> None:
    """
    Замораживает копию сцены для лосса сохранения.

    С нуля - пустое поле и пустая сетка занятости (рендер - только фон).
    При вставке в готовую сцену - копия загруженного поля как есть.
    """
    if state.frozen is not None:
        raise SceneAlreadyFrozenError()
    if from_scratch:
        field = VoxelField.zeros(state.trainable.resolution)
        grid = OccupancyGrid(state.grid.resolution, state.grid.threshold, state.grid.update_interval)
    else:
        field = state.trainable.copy()
        grid = state.grid.copy()
    state.frozen = FrozenScene(field.freeze(), grid.freeze())


def reconstruction_loss(image: RenderedImage, reference: RenderedImage) -> tuple[float, npt.NDArray[np.float64]]:
    """Средняя абсолютная ошибка по rgb и ее котангенс sign(I - Î) / (пикселей * 3)"""
    if image.resolution != reference.resolution:
        raise ValueError(f"Разрешения не совпадают: {image.resolution} и {reference.resolution}")
    difference = image.rgb - reference.rgb
    return float(np.mean(np.abs(difference))), np.sign(difference) / difference.size


@dataclass
class StepContext:
    """Что шагу нужно помимо сцены: число воркеров и наблюдатель за градиентом (для тестов)"""
    workers: int = 1
    on_gradient: Optional[Callable[[FieldGradient], None]] = None


def training_step(
        state: SceneState,
        oracle: GuidanceOracle,
        cfg: OptimizerConfig,
        rng: np.random.Generator,
        context: Optional[StepContext] = None
) -> LossReport:
    if state.frozen is None:
        raise SceneNotFrozenError()
    context = context or StepContext()
    field, grid, render = state.trainable, state.grid, state.render
    grad = FieldGradient.zeros_like(field)
    side = cfg.image_side
    per_object = []
    for index, box in enumerate(state.boxes):
        pose = sample_object_centric_pose(rng, WORLD_BOX, box, state.camera)
        rays = generate_camera_rays(pose, (side, side))
        jitter = renderer.draw_jitter(rng, len(rays), render)
        if cfg.clipped:
            image = renderer.render_clipped(field, grid, rays, box, render, jitter, context.workers)
        else:
            image = renderer.render_full(field, grid, rays, render, jitter, context.workers)
        try:
            guidance = oracle.gradient_of(image, index)
        except Exception as e:
            raise OracleError(index, str(e)) from e
        if cfg.clipped:
            renderer.render_clipped_backward(
                field, grid, rays, box, render, guidance.cotangent, grad, jitter, context.workers
            )
        else:
            renderer.render_full_backward(field, grid, rays, render, guidance.cotangent, grad, jitter, context.workers)
        per_object.append(guidance.loss if guidance.loss is not None else 0.0)
    object_grad_norm = grad.norm()

    pose = sample_base_pose(rng, WORLD_BOX.center, state.camera)
    rays = generate_camera_rays(pose, (side, side))
    jitter = renderer.draw_jitter(rng, len(rays), render)
    inverse = renderer.render_inverse_clipped(field, grid, rays, state.boxes, render, jitter, context.workers)
    reference = renderer.render_full(state.frozen.field, state.frozen.grid, rays, render, jitter, context.workers)
    rec_loss, rec_cotangent = reconstruction_loss(inverse, reference)
    if cfg.alpha > 0:
        renderer.render_inverse_clipped_backward(
            field, grid, rays, state.boxes, render, cfg.alpha * rec_cotangent, grad, jitter, context.workers
        )

    if context.on_gradient is not None:
        context.on_gradient(grad)
    grad_norm = grad.norm()
    field_service.apply_update(field, grad, state.adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    state.step += 1
    occupancy_service.update_occupancy(grid, field, state.step)
    return LossReport(per_object, rec_loss, cfg.alpha, grad_norm, object_grad_norm)


def outside_box_opacity(state: SceneState, n_probe_views: int, resolution: int = 32, workers: int = 1) -> float:
    """Средняя непрозрачность обучаемого поля вне всех боксов минус то же для замороженного"""
    if n_probe_views < 1:
        raise ValueError("Нужен хотя бы один вид")
    if state.frozen is None:
        raise SceneNotFrozenError()
    trainable: list[float] = []
    frozen: list[float] = []
    for pose in probe_poses(state.camera, n_probe_views):
        rays = generate_camera_rays(pose, (resolution, resolution))
        image = renderer.render_inverse_clipped(state.trainable, state.grid, rays, state.boxes, state.render, None, workers)
        trainable.append(float(image.opacity.mean()))
        image = renderer.render_inverse_clipped(
            state.frozen.field, state.frozen.grid, rays, state.boxes, state.render, None, workers
        )
        frozen.append(float(image.opacity.mean()))
    return float(np.mean(trainable) - np.mean(frozen))


def frozen_region_deviation(state: SceneState, n_probe_views: int, resolution: int = 32, workers: int = 1) -> float:
    """Средний модуль разницы рендера вне боксов и полного рендера замороженной сцены"""
    if state.frozen is None:
        raise SceneNotFrozenError()
    deviations = []
    for pose in probe_poses(state.camera, n_probe_views):
        rays = generate_camera_rays(pose, (resolution, resolution))
        inverse = renderer.render_inverse_clipped(
            state.trainable, state.grid, rays, state.boxes, state.render, None, workers
        )
        reference = renderer.render_full(state.frozen.field, state.frozen.grid, rays, state.render, None, workers)
        deviations.append(float(np.mean(np.abs(inverse.rgb - reference.rgb))))
    return float(np.mean(deviations))


def target_loss(
        state: SceneState,
        targets: TargetSource,
        n_views: int,
        resolution: int = 32,
        seed: int = 0,
        workers: int = 1
) -> float:
    """Среднеквадратичная ошибка полного рендера с объектно-центричных видов относительно целей"""
    rng = np.random.default_rng(seed)
    losses = []
    for index, box in enumerate(state.boxes):
        for _ in range(n_views):
            pose = sample_object_centric_pose(rng, WORLD_BOX, box, state.camera)
            rays = generate_camera_rays(pose, (resolution, resolution))
            image = renderer.render_full(state.trainable, state.grid, rays, state.render, None, workers)
            target = targets.image_for(index, pose, resolution, resolution)
            losses.append(float(np.mean((image.rgb - target) ** 2)))
    return float(np.mean(losses))


def detect_vanishing_objects(state: SceneState) -> list[int]:
    """Объекты, в боксах которых нет ни одной занятой ячейки: градиент по ним будет нулевым"""
    return [
        index for index, box in enumerate(state.boxes)
        if occupancy_service.occupied_cells_in_box(state.grid, box) == 0
    ]


def metrics_record(state: SceneState, report: LossReport, cfg: OptimizerConfig, workers: int = 1) -> MetricsRecord:
    return MetricsRecord(
        step=state.step,
        per_object_loss=report.per_object,
        rec_loss=report.rec_loss,
        total=report.total,
        grad_norm=report.grad_norm,
        object_grad_norm=report.object_grad_norm,
        outside_box_opacity=outside_box_opacity(state, cfg.n_probe_views, cfg.probe_resolution, workers),
    )


def run_generation(
        state: SceneState,
        oracle: GuidanceOracle,
        cfg: OptimizerConfig,
        rng: Optional[np.random.Generator] = None,
        workers: int = 1,
        on_metrics: Optional[MetricsSink] = None,
        on_checkpoint: Optional[CheckpointSink] = None,
        progress: bool = False
) -> tuple[SceneState, list[MetricsRecord]]:
    """Выполняет шаги от state.step до cfg.steps, снимает метрики и чекпоинты по расписанию"""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    context = StepContext(workers=workers)
    series: list[MetricsRecord] = []
    for _ in tqdm(range(state.step, cfg.steps), disable=not progress, desc="generation"):
        report = training_step(state, oracle, cfg, rng, context)
        if state.step % cfg.metrics_every == 0 or state.step == cfg.steps:
            record = metrics_record(state, report, cfg, workers)
            series.append(record)
            logging.info(
                f"Шаг {record.step}: total={record.total:.6g}, rec={record.rec_loss:.6g}, "
                f"grad_norm={record.grad_norm:.6g} (объекты {record.object_grad_norm:.6g}), "
                f"вне боксов={record.outside_box_opacity:.6g}"
            )
            if on_metrics is not None:
                on_metrics(record)
        if on_checkpoint is not None and state.step % cfg.checkpoint_every == 0:
            on_checkpoint(state, rng)
    return state, series
