"""
Команда ablate: пять конфигураций, в которых включаются и выключаются отсечение лучей по боксу (crs),
объектно-центричное смещение плотности (ocdb) и сохранение сцены (sp)

Classes
--------
AblationRow
    Одна строка таблицы: название и три флага
"""

import logging
from dataclasses import dataclass

import numpy as np

import service.trainer as trainer
from configs.config import RunConfig
from domain.geometry import vec3
from domain.layout import SceneLayout
from handlers.common import resolve_layout
from helpers.metricshelper import MetricsWriter, ablation_table, write_ablation_report
from middlewares.try_execute import try_execute
from resources.strings import CliMessage
from service.guidance import build_oracle, build_targets
from service.service_result import ExitCode


@dataclass(frozen=True)
class AblationRow:
    name: str
    crs: bool
    ocdb: bool
    sp: bool


ABLATION_ROWS = [
    AblationRow("baseline", crs=False, ocdb=False, sp=False),
    AblationRow("crs", crs=True, ocdb=False, sp=False),
    AblationRow("ocdb", crs=False, ocdb=True, sp=False),
    AblationRow("crs+ocdb", crs=True, ocdb=True, sp=False),
    AblationRow("crs+ocdb+sp", crs=True, ocdb=True, sp=True),
]


def row_settings(settings: RunConfig, row: AblationRow) -> RunConfig:
    """Копия настроек с флагами строки; sp выключается нулевой alpha"""
    optimizer = settings.optimizer.model_copy(update={
        "clipped": row.crs,
        "alpha": settings.optimizer.alpha if row.sp else 0.0,
    })
    bias = settings.bias.model_copy(update={"init": "object-centric" if row.ocdb else "uni-sphere"})
    return settings.model_copy(update={"optimizer": optimizer, "bias": bias, "out": settings.out / row.name})


def run_row(settings: RunConfig, layout: SceneLayout, row: AblationRow) -> dict[str, object]:
    config = row_settings(settings, row)
    field = trainer.initialize_field(layout, config.field.resolution, config.bias)
    state = trainer.new_scene_state(layout, field, config.occupancy, config.render, config.camera)
    trainer.freeze_scene(state, from_scratch=True)
    background = vec3(*config.render.background_color)
    oracle = build_oracle(config.oracle, state.boxes, config.bias.s_sigma, background)
    metrics = MetricsWriter(config.out / "metrics.ndjson")
    rng = np.random.default_rng(config.seed)

    first = trainer.training_step(state, oracle, config.optimizer, rng, trainer.StepContext(config.workers))
    trainer.run_generation(state, oracle, config.optimizer, rng, config.workers, on_metrics=metrics.write)

    targets = build_targets(config.oracle, state.boxes, config.bias.s_sigma, background)
    optimizer = config.optimizer
    result: dict[str, object] = {
        "configuration": row.name,
        "crs": row.crs,
        "ocdb": row.ocdb,
        "sp": row.sp,
        "grad_norm_step1": first.object_grad_norm,
        "outside_box_opacity": trainer.outside_box_opacity(
            state, optimizer.n_probe_views, optimizer.probe_resolution, config.workers
        ),
        "target_loss": trainer.target_loss(
            state, targets, optimizer.n_probe_views, optimizer.probe_resolution, config.seed, config.workers
        ),
    }
    logging.info(f"Абляция {row.name}: {result}")
    return result


@try_execute
def cmd_ablate(settings: RunConfig) -> ExitCode:
    layout = resolve_layout(settings)
    if layout.is_failure:
        print(layout.error)
        return layout.exit_code
    if settings.optimizer.steps < 1:
        print(CliMessage.NO_STEPS)
        return ExitCode.INPUT
    rows = [run_row(settings, layout.unwrap(), row) for row in ABLATION_ROWS]
    table = ablation_table(rows)
    write_ablation_report(table, settings.out)
    print(table.to_string(index=False))
    print(CliMessage.DONE.format(path=settings.out))
    return ExitCode.OK
