from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from domain.geometry import Vec3

Grid = npt.NDArray[np.float64]


@dataclass(eq=False)
class VoxelField:
    """
    Плотное воксельное поле: значения до активации в вершинах решетки над [-1, 1]^3.

    density - (R, R, R), после softplus; color - (R, R, R, 3), после sigmoid.
    Вершина [i, j, k] лежит в точке -1 + 2 * (i, j, k) / (R - 1).
    """
    density: Grid
    color: Grid

    def __post_init__(self) -> None:
        r = self.density.shape[0]
        if self.density.shape != (r, r, r) or self.color.shape != (r, r, r, 3):
            raise ValueError(f"Несогласованные сетки поля: {self.density.shape} и {self.color.shape}")

    @classmethod
    def zeros(cls, resolution: int) -> "VoxelField":
        return cls(
            density=np.zeros((resolution,) * 3, dtype=np.float64),
            color=np.zeros((resolution,) * 3 + (3,), dtype=np.float64),
        )

    @property
    def resolution(self) -> int:
        return int(self.density.shape[0])

    @property
    def spacing(self) -> float:
        return 2.0 / (self.resolution - 1)

    def vertex_positions(self) -> Grid:
        axis = np.linspace(-1.0, 1.0, self.resolution)
        return np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)

    def copy(self) -> "VoxelField":
        return VoxelField(self.density.copy(), self.color.copy())

    def freeze(self) -> "VoxelField":
        """Копия, запрещенная к записи"""
        frozen = self.copy()
        frozen.density.flags.writeable = False
        frozen.color.flags.writeable = False
        return frozen


@dataclass(frozen=True, eq=False)
class FieldSample:
    sigma: float
    color: Vec3


@dataclass(eq=False)
class FieldGradient:
    d_density: Grid
    d_color: Grid

    @classmethod
    def zeros_like(cls, field: VoxelField) -> "FieldGradient":
        return cls(np.zeros_like(field.density), np.zeros_like(field.color))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.d_density ** 2) + np.sum(self.d_color ** 2)))

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.d_density)), np.max(np.abs(self.d_color))))
