"""
Команды generate (сцена с нуля) и place (новые объекты в обученной сцене)
"""

import logging
from pathlib import Path
from typing import Any, Optional

import numpy as np

import service.field_service as field_service
import service.occupancy_service as occupancy_service
import service.trainer as trainer
from configs.config import RunConfig
from domain.geometry import vec3
from domain.training import SceneState
from handlers.common import checkpoint_meta, checkpoint_writer, grid_for, report_warnings, resolve_layout, \
    write_turntable
from helpers import checkpointhelper
from helpers.metricshelper import MetricsWriter
from middlewares.try_execute import try_execute
from resources.strings import CliMessage
from service.guidance import build_oracle
from service.layout_service import serialize_layout
from service.service_result import ExitCode


def _run(
        state: SceneState,
        settings: RunConfig,
        rng: Optional[np.random.Generator] = None,
        oracle_rng_state: Optional[dict[str, Any]] = None
) -> ExitCode:
    out = settings.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "layout.json").write_text(serialize_layout(state.layout), encoding="utf-8")

    vanishing = trainer.detect_vanishing_objects(state)
    if vanishing:
        names = ", ".join(f"#{i} ({state.layout.objects[i].description})" for i in vanishing)
        logging.warning(CliMessage.VANISHING.format(objects=names))

    oracle = build_oracle(
        settings.oracle, state.boxes, settings.bias.s_sigma, vec3(*settings.render.background_color)
    )
    if oracle_rng_state is not None:
        oracle.restore_random_state(oracle_rng_state)
    metrics = MetricsWriter(out / "metrics.ndjson")
    rng = rng if rng is not None else np.random.default_rng(settings.seed)
    trainer.run_generation(
        state,
        oracle,
        settings.optimizer,
        rng,
        workers=settings.workers,
        on_metrics=metrics.write,
        on_checkpoint=checkpoint_writer(settings, out, oracle),
        progress=True,
    )
    checkpointhelper.save_checkpoint(out / "checkpoint", state, checkpoint_meta(state, settings, rng, oracle))
    write_turntable(state, settings, out)
    print(CliMessage.DONE.format(path=out))
    return ExitCode.OK


def _resume(settings: RunConfig, path: Path) -> ExitCode:
    """
    Продолжение обучения из каталога чекпоинта до settings.optimizer.steps. Раскладка, гиперпараметры
    Adam, alpha и оба генератора берутся из чекпоинта, поэтому продолженный прогон совпадает с непрерывным.
    """
    loaded = checkpointhelper.load_checkpoint(path)
    if loaded.is_failure:
        print(loaded.error)
        return loaded.exit_code
    checkpoint = loaded.unwrap()
    if checkpoint.meta is None or checkpoint.adam is None or checkpoint.frozen is None:
        print(CliMessage.NOT_RESUMABLE.format(path=path))
        return ExitCode.INPUT
    meta = checkpoint.meta
    if meta.step > settings.optimizer.steps:
        print(CliMessage.RESUME_PAST_END.format(step=meta.step, steps=settings.optimizer.steps))
        return ExitCode.INPUT
    if meta.seed != settings.seed:
        logging.warning(f"Чекпоинт обучался с seed={meta.seed}, --seed {settings.seed} не используется")
    optimizer = settings.optimizer.model_copy(update={
        "lr": meta.lr, "beta1": meta.beta1, "beta2": meta.beta2, "eps": meta.eps, "alpha": meta.alpha, "seed": meta.seed,
    })
    settings = settings.model_copy(update={"seed": meta.seed, "optimizer": optimizer})

    grid = grid_for(checkpoint.field, checkpoint.grid, settings)
    state = trainer.new_scene_state(
        meta.layout, checkpoint.field, settings.occupancy, settings.render, settings.camera, grid, refresh_grid=False
    )
    state.adam = checkpoint.adam
    state.frozen = checkpoint.frozen
    state.step = meta.step
    rng = np.random.default_rng(meta.seed)
    if meta.rng_state is not None:
        rng.bit_generator.state = meta.rng_state
    logging.info(f"Продолжаем обучение с шага {meta.step} из {path}")
    return _run(state, settings, rng, meta.oracle_rng_state)


@try_execute
def cmd_generate(settings: RunConfig, resume: Optional[Path] = None) -> ExitCode:
    if resume is not None:
        return _resume(settings, resume)
    layout = resolve_layout(settings)
    if layout.is_failure:
        print(layout.error)
        return layout.exit_code
    report_warnings(layout.unwrap())
    field = trainer.initialize_field(layout.unwrap(), settings.field.resolution, settings.bias)
    state = trainer.new_scene_state(layout.unwrap(), field, settings.occupancy, settings.render, settings.camera)
    trainer.freeze_scene(state, from_scratch=True)
    return _run(state, settings)


@try_execute
def cmd_place(settings: RunConfig, scene: Path) -> ExitCode:
    """
    Загруженная сцена - и стартовое поле, и замороженный эталон. Смещение плотности добавляется
    только внутри новых боксов; содержимое сцены внутри бокса может быть перезаписано.
    """
    loaded = checkpointhelper.load_checkpoint(scene)
    if loaded.is_failure:
        print(loaded.error)
        return loaded.exit_code
    layout = resolve_layout(settings)
    if layout.is_failure:
        print(layout.error)
        return layout.exit_code
    report_warnings(layout.unwrap())

    field = loaded.unwrap().field
    grid = grid_for(field, loaded.unwrap().grid, settings)
    state = trainer.new_scene_state(
        layout.unwrap(), field, settings.occupancy, settings.render, settings.camera, grid, refresh_grid=False
    )
    trainer.freeze_scene(state, from_scratch=False)
    field_service.add_object_centric_bias(state.trainable, state.boxes, settings.bias)
    occupancy_service.update_occupancy(state.grid, state.trainable, 0)
    logging.info(f"Сцена {scene} загружена, добавлено объектов: {len(state.boxes)}")
    return _run(state, settings)
