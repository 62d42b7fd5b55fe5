from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt

from domain.geometry import CameraPose


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Выборка вдоль одного луча: глубины t_i, плотности, цвета (m, 3) и длины отрезков δ_i"""
    depths: npt.NDArray[np.float64]
    sigma: npt.NDArray[np.float64]
    color: npt.NDArray[np.float64]
    delta: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        m = self.depths.shape[0]
        if self.sigma.shape != (m,) or self.delta.shape != (m,) or self.color.shape != (m, 3):
            raise ValueError("Размеры массивов выборки не совпадают")
        if m > 1 and not np.all(np.diff(self.depths) > 0):
            raise ValueError("Глубины выборки должны строго возрастать")
        if np.any(self.delta < 0) or np.any(self.sigma < 0):
            raise ValueError("δ и σ не могут быть отрицательными")

    def __len__(self) -> int:
        return int(self.depths.shape[0])

    @classmethod
    def empty(cls) -> "SampleSet":
        return cls(np.zeros(0), np.zeros(0), np.zeros((0, 3)), np.zeros(0))


@dataclass(frozen=True, eq=False)
class RenderedImage:
    rgb: npt.NDArray[np.float64]
    opacity: npt.NDArray[np.float64]
    pose: Optional[CameraPose] = None

    def __post_init__(self) -> None:
        h, w = self.opacity.shape
        if self.rgb.shape != (h, w, 3):
            raise ValueError(f"Форма rgb {self.rgb.shape} не совпадает с opacity {self.opacity.shape}")

    @property
    def width(self) -> int:
        return int(self.opacity.shape[1])

    @property
    def height(self) -> int:
        return int(self.opacity.shape[0])

    @property
    def resolution(self) -> tuple[int, int]:
        return self.width, self.height
