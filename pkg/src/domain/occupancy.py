from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt


@dataclass(eq=False)
class OccupancyGrid:
    """
    Бинарная сетка занятости G(x) над [-1, 1]^3.

    Ячейка [i, j, k] покрывает куб со стороной 2 / resolution, центр в -1 + (i + 0.5) * 2 / resolution.
    Точки вне мирового куба считаются незанятыми.
    """
    resolution: int = 32
    threshold: float = 0.5
    update_interval: int = 16
    steps_since_update: int = 0
    bits: npt.NDArray[np.bool_] = field(default_factory=lambda: np.zeros((0, 0, 0), dtype=bool))

    def __post_init__(self) -> None:
        if self.bits.size == 0:
            self.bits = np.zeros((self.resolution,) * 3, dtype=bool)
        if self.bits.shape != (self.resolution,) * 3:
            raise ValueError(f"Размер битсета {self.bits.shape} не совпадает с разрешением {self.resolution}")
        if self.threshold <= 0:
            raise ValueError("Порог занятости должен быть больше нуля")

    @classmethod
    def filled(cls, resolution: int, value: bool, threshold: float = 0.5) -> "OccupancyGrid":
        return cls(resolution=resolution, threshold=threshold, bits=np.full((resolution,) * 3, value, dtype=bool))

    @property
    def cell_size(self) -> float:
        return 2.0 / self.resolution

    def cell_centers(self) -> npt.NDArray[np.float64]:
        axis = -1.0 + (np.arange(self.resolution) + 0.5) * self.cell_size
        return np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)

    def cell_index(self, points: npt.NDArray[np.float64]) -> tuple[npt.NDArray[np.intp], npt.NDArray[np.bool_]]:
        """Индексы ячеек (N, 3) и маска точек внутри мирового куба"""
        inside = np.all((points >= -1.0) & (points <= 1.0), axis=-1)
        index = np.floor((points + 1.0) / self.cell_size).astype(np.intp)
        return np.clip(index, 0, self.resolution - 1), inside

    def occupied(self, points: npt.NDArray[np.float64]) -> npt.NDArray[np.bool_]:
        index, inside = self.cell_index(points)
        return inside & self.bits[index[..., 0], index[..., 1], index[..., 2]]

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.threshold, self.update_interval,
                             self.steps_since_update, self.bits.copy())

    def freeze(self) -> "OccupancyGrid":
        frozen = self.copy()
        frozen.bits.flags.writeable = False
        return frozen
