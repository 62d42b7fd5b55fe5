"""
Общие шаги команд: раскладка из файла или от LLM, сетка для загруженного поля, чекпоинты
и картинки поворотного стола
"""

import asyncio
import logging
from pathlib import Path
from typing import Optional

import numpy as np

import service.occupancy_service as occupancy_service
import service.renderer as renderer
from configs.config import RunConfig
from domain.field import VoxelField
from domain.geometry import WORLD_BOX
from domain.layout import SceneLayout
from domain.occupancy import OccupancyGrid
from domain.training import CheckpointMeta, SceneState
from helpers import checkpointhelper, imagehelper
from resources.strings import CliMessage
from service.geometry import generate_camera_rays, turntable_poses
from service.guidance import GuidanceOracle
from service.layout_service import parse_layout, request_layout, validate_layout
from service.service_result import ExitCode, ServiceResult
from service.trainer import CheckpointSink

TURNTABLE_VIEWS = 8


def resolve_layout(settings: RunConfig) -> ServiceResult[SceneLayout]:
    if settings.layout is not None:
        return parse_layout(settings.layout.read_text(encoding="utf-8"))
    if settings.caption is not None:
        return asyncio.run(request_layout(settings.llm, settings.caption))
    return ServiceResult.failure(CliMessage.NO_INPUT, ExitCode.INPUT)


def report_warnings(layout: SceneLayout) -> list[str]:
    warnings = validate_layout(layout)
    for warning in warnings:
        logging.warning(warning)
        print(CliMessage.WARNING.format(warning=warning))
    return warnings


def grid_for(field: VoxelField, grid: Optional[OccupancyGrid], settings: RunConfig) -> OccupancyGrid:
    """Сетка из файла, а если ее там нет - пересчитанная по полю"""
    if grid is not None:
        return grid
    occupancy = settings.occupancy
    grid = OccupancyGrid(occupancy.resolution, occupancy.threshold, occupancy.update_interval)
    occupancy_service.update_occupancy(grid, field, 0)
    return grid


def checkpoint_meta(
        state: SceneState,
        settings: RunConfig,
        rng: Optional[np.random.Generator],
        oracle: Optional[GuidanceOracle] = None
) -> CheckpointMeta:
    optimizer = settings.optimizer
    return CheckpointMeta(
        step=state.step,
        adam_t=state.adam.t,
        lr=optimizer.lr,
        beta1=optimizer.beta1,
        beta2=optimizer.beta2,
        eps=optimizer.eps,
        alpha=optimizer.alpha,
        seed=settings.seed,
        layout=state.layout,
        frozen_file="frozen.bxf" if state.frozen is not None else None,
        rng_state=rng.bit_generator.state if rng is not None else None,
        oracle_rng_state=oracle.random_state() if oracle is not None else None,
    )


def checkpoint_writer(settings: RunConfig, out: Path, oracle: Optional[GuidanceOracle] = None) -> CheckpointSink:
    def write(state: SceneState, rng: np.random.Generator) -> None:
        directory = out / "checkpoints" / f"step_{state.step:06d}"
        checkpointhelper.save_checkpoint(directory, state, checkpoint_meta(state, settings, rng, oracle))

    return write


def write_turntable(state: SceneState, settings: RunConfig, out: Path) -> list[Path]:
    """8 видов по кругу: по картинке на каждый объект (рендер внутри его бокса) и общее превью"""
    size = settings.image_size
    distance = sum(settings.camera.distance_range) / 2
    paths = []
    for view, pose in enumerate(turntable_poses(WORLD_BOX.center, distance, settings.camera.fov_y, TURNTABLE_VIEWS)):
        rays = generate_camera_rays(pose, (size, size))
        merged = renderer.render_merged_preview(
            state.trainable, state.grid, rays, state.boxes, state.render, settings.workers
        )
        paths.append(imagehelper.write_png(out / "turntable" / f"merged_{view}.png", merged))
        for index, box in enumerate(state.boxes):
            image = renderer.render_clipped(state.trainable, state.grid, rays, box, state.render, None, settings.workers)
            paths.append(imagehelper.write_png(out / "turntable" / f"object{index}_{view}.png", image))
    logging.info(f"Записали {len(paths)} картинок поворотного стола в {out / 'turntable'}")
    return paths
