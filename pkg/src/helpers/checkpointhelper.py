"""
Файлы поля и чекпоинты обучения

Файл поля (.bxf), little-endian:
    "<4sII"  магия BXF1, разрешение решетки, число скалярных сеток
    float64  сетки в C-порядке: для поля density и 3 сетки color (4), для оптимизатора 8 сеток моментов
    "<IdII"  секция сетки занятости (необязательная): разрешение, порог, интервал обновления, шагов с обновления
    bytes    биты сетки, numpy.packbits(bitorder="little")

Чекпоинт - каталог с field.bxf, optimizer.bxf, frozen.bxf и checkpoint.json (CheckpointMeta).
"""

import io
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import ValidationError

from domain.field import VoxelField
from domain.occupancy import OccupancyGrid
from domain.training import AdamState, CheckpointMeta, FrozenScene, SceneState
from service.service_result import ExitCode, ServiceResult

MAGIC = b"BXF1"
HEADER = struct.Struct("<4sII")
GRID_HEADER = struct.Struct("<IdII")
META_FILE = "checkpoint.json"


@dataclass(frozen=True, eq=False)
class LoadedCheckpoint:
    field: VoxelField
    # None, если в файле поля нет секции сетки
    grid: Optional[OccupancyGrid]
    meta: Optional[CheckpointMeta] = None
    adam: Optional[AdamState] = None
    frozen: Optional[FrozenScene] = None


def _write_grids(file: io.BufferedWriter, resolution: int, arrays: list[np.ndarray]) -> None:
    grids = sum(1 if a.ndim == 3 else a.shape[-1] for a in arrays)
    file.write(HEADER.pack(MAGIC, resolution, grids))
    for array in arrays:
        file.write(np.ascontiguousarray(array, dtype="<f8").tobytes(order="C"))


def write_field(path: Path, field: VoxelField, grid: Optional[OccupancyGrid] = None) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as file:
        _write_grids(file, field.resolution, [field.density, field.color])
        if grid is not None:
            file.write(GRID_HEADER.pack(grid.resolution, grid.threshold, grid.update_interval, grid.steps_since_update))
            file.write(np.packbits(grid.bits.reshape(-1), bitorder="little").tobytes())
    return path


def _read_grids(payload: bytes, path: Path) -> tuple[int, int, np.ndarray, int]:
    if len(payload) < HEADER.size:
        raise ValueError(f"{path}: файл слишком короткий")
    magic, resolution, grids = HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise ValueError(f"{path}: неверная магия {magic!r}")
    count = resolution ** 3 * grids
    end = HEADER.size + count * 8
    if len(payload) < end:
        raise ValueError(f"{path}: данные сеток обрезаны")
    data = np.frombuffer(payload, dtype="<f8", count=count, offset=HEADER.size).astype(np.float64)
    return resolution, grids, data, end


def read_field(path: Path) -> ServiceResult[LoadedCheckpoint]:
    try:
        payload = path.read_bytes()
        resolution, grids, data, offset = _read_grids(payload, path)
        if grids != 4:
            raise ValueError(f"{path}: у поля должно быть 4 сетки, найдено {grids}")
        cells = resolution ** 3
        field = VoxelField(
            data[:cells].reshape((resolution,) * 3).copy(),
            data[cells:].reshape((resolution,) * 3 + (3,)).copy(),
        )
        grid: Optional[OccupancyGrid] = None
        if len(payload) > offset:
            grid_resolution, threshold, interval, since = GRID_HEADER.unpack_from(payload, offset)
            n_bits = grid_resolution ** 3
            packed = np.frombuffer(payload, dtype=np.uint8, offset=offset + GRID_HEADER.size)
            bits = np.unpackbits(packed, count=n_bits, bitorder="little").astype(bool)
            grid = OccupancyGrid(grid_resolution, threshold, interval, since, bits.reshape((grid_resolution,) * 3))
    except (OSError, ValueError, struct.error) as e:
        logging.error(f"Не удалось прочитать файл поля {path}: {e}")
        return ServiceResult.failure(f"Не удалось прочитать файл поля {path}: {e}", ExitCode.INPUT)
    return ServiceResult.success(LoadedCheckpoint(field, grid))


def _write_adam(path: Path, adam: AdamState, resolution: int) -> None:
    with open(path, "wb") as file:
        _write_grids(file, resolution, [adam.m_density, adam.m_color, adam.v_density, adam.v_color])


def _read_adam(path: Path, t: int) -> AdamState:
    resolution, grids, data, _ = _read_grids(path.read_bytes(), path)
    if grids != 8:
        raise ValueError(f"{path}: у оптимизатора должно быть 8 сеток, найдено {grids}")
    cells = resolution ** 3
    scalar = (resolution,) * 3
    vector = scalar + (3,)
    return AdamState(
        data[:cells].reshape(scalar).copy(),
        data[cells:4 * cells].reshape(vector).copy(),
        data[4 * cells:5 * cells].reshape(scalar).copy(),
        data[5 * cells:].reshape(vector).copy(),
        t,
    )


def save_checkpoint(directory: Path, state: SceneState, meta: CheckpointMeta) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    write_field(directory / meta.field_file, state.trainable, state.grid)
    _write_adam(directory / meta.optimizer_file, state.adam, state.trainable.resolution)
    if state.frozen is not None and meta.frozen_file is not None:
        write_field(directory / meta.frozen_file, state.frozen.field, state.frozen.grid)
    (directory / META_FILE).write_text(meta.model_dump_json(indent=2), encoding="utf-8")
    logging.info(f"Сохранили чекпоинт шага {meta.step} в {directory}")
    return directory


def load_checkpoint(path: Path) -> ServiceResult[LoadedCheckpoint]:
    """Каталог чекпоинта или отдельный файл поля .bxf"""
    if path.is_file():
        return read_field(path)
    meta_path = path / META_FILE
    if not meta_path.is_file():
        return ServiceResult.failure(f"Чекпоинт не найден: {path}", ExitCode.INPUT)
    try:
        meta = CheckpointMeta.model_validate_json(meta_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        return ServiceResult.failure(f"Испорченный {meta_path}: {e.errors()[0]['msg']}", ExitCode.INPUT)
    loaded = read_field(path / meta.field_file)
    if loaded.is_failure:
        return loaded
    frozen = None
    if meta.frozen_file is not None and (path / meta.frozen_file).is_file():
        frozen_loaded = read_field(path / meta.frozen_file)
        if frozen_loaded.is_failure:
            return frozen_loaded
        data = frozen_loaded.unwrap()
        if data.grid is None:
            return ServiceResult.failure(f"В {meta.frozen_file} нет сетки занятости", ExitCode.INPUT)
        frozen = FrozenScene(data.field.freeze(), data.grid.freeze())
    try:
        adam = _read_adam(path / meta.optimizer_file, meta.adam_t)
    except (OSError, ValueError) as e:
        return ServiceResult.failure(f"Не удалось прочитать состояние оптимизатора: {e}", ExitCode.INPUT)
    base = loaded.unwrap()
    return ServiceResult.success(LoadedCheckpoint(base.field, base.grid, meta, adam, frozen))
