import logging

import numpy as np
import numpy.typing as npt

import service.field_service as field_service
from domain.field import FieldSample, VoxelField
from domain.geometry import Aabb, Vec3
from domain.occupancy import OccupancyGrid


def update_occupancy(grid: OccupancyGrid, field: VoxelField, step: int) -> bool:
    """Пересчитывает все биты по плотности в центрах ячеек, если шаг попадает в расписание"""
    if step % grid.update_interval != 0:
        grid.steps_since_update += 1
        return False
    centers = grid.cell_centers().reshape(-1, 3)
    sigma, _ = field_service.query_points(field, centers)
    grid.bits[...] = (sigma > grid.threshold).reshape(grid.bits.shape)
    grid.steps_since_update = 0
    logging.debug(f"Сетка занятости обновлена на шаге {step}: занято {int(grid.bits.sum())} ячеек")
    return True


def gated_query_points(
        field: VoxelField,
        grid: OccupancyGrid,
        points: npt.NDArray[np.float64]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Запрос поля только в занятых ячейках, остальные точки - (0, черный) без обращения к полю"""
    sigma = np.zeros(points.shape[0])
    color = np.zeros((points.shape[0], 3))
    occupied = grid.occupied(points)
    if np.any(occupied):
        sigma[occupied], color[occupied] = field_service.query_points(field, points[occupied])
    return sigma, color


def gated_query(field: VoxelField, grid: OccupancyGrid, x: Vec3, d: Vec3) -> FieldSample:
    sigma, color = gated_query_points(field, grid, np.asarray(x, dtype=np.float64)[None])
    return FieldSample(float(sigma[0]), color[0])


def occupied_cells_in_box(grid: OccupancyGrid, box: Aabb) -> int:
    """Сколько занятых ячеек пересекается с боксом"""
    low = np.clip(np.floor((box.min_corner + 1.0) / grid.cell_size).astype(int), 0, grid.resolution - 1)
    high = np.clip(np.ceil((box.max_corner + 1.0) / grid.cell_size).astype(int) - 1, 0, grid.resolution - 1)
    return int(grid.bits[low[0]:high[0] + 1, low[1]:high[1] + 1, low[2]:high[2] + 1].sum())
