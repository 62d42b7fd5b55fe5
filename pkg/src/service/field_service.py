"""
Операции над воксельным полем: запрос с трилинейной интерполяцией, сопряженное накопление градиента,
начальные смещения плотности и шаг Adam
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt

from configs.config import DensityBiasConfig
from domain.field import FieldGradient, FieldSample, Grid, VoxelField
from domain.geometry import Aabb, Vec3
from domain.training import AdamState

Points = npt.NDArray[np.float64]

# смещения восьми углов ячейки в порядке (dx, dy, dz)
CORNERS = np.array([[dx, dy, dz] for dx in (0, 1) for dy in (0, 1) for dz in (0, 1)], dtype=np.intp)
MID_GRAY = 0.0


def softplus(u: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return np.logaddexp(0.0, u)


def inverse_softplus(sigma: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """p такое, что softplus(p) = sigma; sigma > 0"""
    return sigma + np.log(-np.expm1(-sigma))


def sigmoid(u: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return np.exp(-np.logaddexp(0.0, -u))


@dataclass(frozen=True, eq=False)
class Stencil:
    """Трилинейный шаблон: плоские индексы 8 вершин (N, 8), веса (N, 8) и маска точек внутри сетки"""
    flat_index: npt.NDArray[np.intp]
    weights: npt.NDArray[np.float64]
    inside: npt.NDArray[np.bool_]


def trilinear_stencil(resolution: int, points: Points) -> Stencil:
    inside = np.all((points >= -1.0) & (points <= 1.0), axis=-1)
    pts = points[inside]
    scaled = (pts + 1.0) / 2.0 * (resolution - 1)
    base = np.clip(np.floor(scaled).astype(np.intp), 0, resolution - 2)
    frac = scaled - base
    corner_index = base[:, None, :] + CORNERS[None, :, :]
    corner_weight = np.where(CORNERS[None, :, :] == 1, frac[:, None, :], 1.0 - frac[:, None, :])
    weights = np.prod(corner_weight, axis=-1)
    flat = np.ravel_multi_index(
        (corner_index[..., 0], corner_index[..., 1], corner_index[..., 2]), (resolution,) * 3
    )
    return Stencil(flat, weights, inside)


def interpolate_raw(field: VoxelField, stencil: Stencil) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    raw_density = np.sum(field.density.reshape(-1)[stencil.flat_index] * stencil.weights, axis=-1)
    raw_color = np.sum(field.color.reshape(-1, 3)[stencil.flat_index] * stencil.weights[..., None], axis=1)
    return raw_density, raw_color


def query_points(field: VoxelField, points: Points) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Пакетный запрос поля: sigma (N,), color (N, 3); вне сетки - (0, черный)"""
    stencil = trilinear_stencil(field.resolution, points)
    sigma = np.zeros(points.shape[0])
    color = np.zeros((points.shape[0], 3))
    raw_density, raw_color = interpolate_raw(field, stencil)
    sigma[stencil.inside] = softplus(raw_density)
    color[stencil.inside] = sigmoid(raw_color)
    return sigma, color


def query(field: VoxelField, x: Vec3, d: Vec3) -> FieldSample:
    # d принимается ради сигнатуры f(x, d), поле от направления не зависит
    sigma, color = query_points(field, np.asarray(x, dtype=np.float64)[None])
    return FieldSample(float(sigma[0]), color[0])


def accumulate_gradient_points(
        field: VoxelField,
        grad: FieldGradient,
        points: Points,
        d_sigma: npt.NDArray[np.float64],
        d_color: npt.NDArray[np.float64]
) -> None:
    """Сопряженный к query_points проход: раскладывает котангенсы по 8 вершинам в порядке точек"""
    stencil = trilinear_stencil(field.resolution, points)
    if not np.any(stencil.inside):
        return
    raw_density, raw_color = interpolate_raw(field, stencil)
    # softplus' = sigmoid, sigmoid' = s * (1 - s)
    g_density = d_sigma[stencil.inside] * sigmoid(raw_density)
    s = sigmoid(raw_color)
    g_color = d_color[stencil.inside] * s * (1.0 - s)
    np.add.at(grad.d_density.reshape(-1), stencil.flat_index.reshape(-1),
              (stencil.weights * g_density[:, None]).reshape(-1))
    color_flat = grad.d_color.reshape(-1, 3)
    np.add.at(color_flat, stencil.flat_index.reshape(-1),
              (stencil.weights[..., None] * g_color[:, None, :]).reshape(-1, 3))


def accumulate_gradient(field: VoxelField, grad: FieldGradient, x: Vec3, d_sigma: float, d_color: Vec3) -> None:
    accumulate_gradient_points(
        field, grad, np.asarray(x, dtype=np.float64)[None],
        np.array([d_sigma], dtype=np.float64), np.asarray(d_color, dtype=np.float64)[None],
    )


def bake_density(field: VoxelField, sigma_init: Grid, floor: float) -> None:
    field.density[...] = inverse_softplus(np.maximum(sigma_init, floor))
    field.color[...] = MID_GRAY


def uni_sphere_density(positions: Points, cfg: DensityBiasConfig) -> npt.NDArray[np.float64]:
    squared = np.sum(positions ** 2, axis=-1)
    return cfg.lambda_sigma * np.exp(-squared / (2 * cfg.s_sigma ** 2))


def object_centric_density(positions: Points, boxes: Sequence[Aabb], cfg: DensityBiasConfig) -> npt.NDArray[np.float64]:
    if len(boxes) == 0:
        raise ValueError("Для объектно-центричного смещения нужен хотя бы один бокс")
    sigma = np.zeros(positions.shape[:-1])
    for box in boxes:
        scaled = np.linalg.norm((positions - box.center) / box.half_extent, axis=-1)
        sigma = np.maximum(sigma, cfg.lambda_sigma * (1.0 - scaled / cfg.s_sigma))
    return sigma


def init_uni_sphere_bias(field: VoxelField, cfg: DensityBiasConfig) -> None:
    bake_density(field, uni_sphere_density(field.vertex_positions(), cfg), cfg.floor)


def init_object_centric_bias(field: VoxelField, boxes: Sequence[Aabb], cfg: DensityBiasConfig) -> None:
    bake_density(field, object_centric_density(field.vertex_positions(), boxes, cfg), cfg.floor)


def add_object_centric_bias(field: VoxelField, boxes: Sequence[Aabb], cfg: DensityBiasConfig) -> None:
    """Для загруженной сцены: внутри боксов плотность = max(текущая, смещение), снаружи не трогаем"""
    positions = field.vertex_positions()
    inside = np.zeros(positions.shape[:-1], dtype=bool)
    for box in boxes:
        inside |= box.contains(positions)
    bias = object_centric_density(positions, boxes, cfg)
    current = softplus(field.density)
    raised = inside & (bias > current)
    field.density[raised] = inverse_softplus(bias[raised])


def apply_update(
        field: VoxelField,
        grad: FieldGradient,
        state: AdamState,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.99,
        eps: float = 1e-8
) -> None:
    """Шаг Adam по сеткам до активации, моменты и счетчик шага обновляются в state"""
    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t
    for params, g, m, v in (
            (field.density, grad.d_density, state.m_density, state.v_density),
            (field.color, grad.d_color, state.m_color, state.v_color),
    ):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
