import numpy as np
import pytest

import service.field_service as field_service
import service.occupancy_service as occupancy_service
from configs.config import DensityBiasConfig
from domain.field import VoxelField
from domain.geometry import vec3
from domain.occupancy import OccupancyGrid
from service.geometry import aabb_from_layout


@pytest.fixture
def sphere_field() -> VoxelField:
    field = VoxelField.zeros(17)
    field_service.init_uni_sphere_bias(field, DensityBiasConfig())
    return field


def test_update_marks_dense_cells(sphere_field) -> None:
    grid = OccupancyGrid(16, 0.5, 16)
    assert occupancy_service.update_occupancy(grid, sphere_field, 0)
    assert grid.bits[8, 8, 8] and grid.bits[7, 7, 7]
    assert not grid.bits[0, 0, 0] and not grid.bits[15, 15, 15]
    assert grid.steps_since_update == 0


def test_update_follows_schedule(sphere_field) -> None:
    grid = OccupancyGrid(16, 0.5, 16)
    assert not occupancy_service.update_occupancy(grid, sphere_field, 5)
    assert grid.steps_since_update == 1
    assert not grid.bits.any()
    assert occupancy_service.update_occupancy(grid, sphere_field, 32)
    assert grid.bits.any()


def test_points_outside_world_are_free() -> None:
    grid = OccupancyGrid.filled(8, True)
    occupied = grid.occupied(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [1.0001, 0.0, 0.0], [0.0, 0.0, -3.0]]))
    assert occupied.tolist() == [True, True, False, False]


def test_cell_centers() -> None:
    grid = OccupancyGrid(4)
    assert np.allclose(grid.cell_centers()[0, 1, 3], [-0.75, -0.25, 0.75])


def test_gated_query_skips_free_cells(monkeypatch, sphere_field) -> None:
    grid = OccupancyGrid(2)
    grid.bits[1, 1, 1] = True
    queried = []
    original = field_service.query_points

    def recording(field: VoxelField, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        queried.append(points.copy())
        return original(field, points)

    monkeypatch.setattr(field_service, "query_points", recording)
    points = np.array([[0.5, 0.5, 0.5], [-0.5, 0.5, 0.5], [0.1, 0.2, 0.3]])
    sigma, color = occupancy_service.gated_query_points(sphere_field, grid, points)
    assert len(queried) == 1 and np.array_equal(queried[0], points[[0, 2]])
    assert sigma[1] == 0.0 and np.all(color[1] == 0.0)
    assert sigma[0] > 0.0


def test_gated_single_query(sphere_field) -> None:
    grid = OccupancyGrid.filled(4, False)
    sample = occupancy_service.gated_query(sphere_field, grid, vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0))
    assert sample.sigma == 0.0


def test_corner_box_has_no_occupied_cells() -> None:
    field = VoxelField.zeros(16)
    field_service.init_uni_sphere_bias(field, DensityBiasConfig())
    grid = OccupancyGrid(32, 0.5, 16)
    occupancy_service.update_occupancy(grid, field, 0)
    corner = aabb_from_layout([448, 448, 448, 64, 64, 64])
    center = aabb_from_layout([192, 192, 192, 128, 128, 128])
    assert occupancy_service.occupied_cells_in_box(grid, corner) == 0
    assert occupancy_service.occupied_cells_in_box(grid, center) > 0


def test_frozen_grid_rejects_writes() -> None:
    grid = OccupancyGrid.filled(4, True).freeze()
    with pytest.raises(ValueError):
        grid.bits[0, 0, 0] = False
