"""
Объемный рендеринг вдоль лучей и сопряженные проходы

Режимы выборки точек на луче:
    full     - все точки в занятых ячейках
    clipped  - только точки внутри (t_entry, t_exit) одного бокса
    inverse  - только точки вне всех боксов
    union    - точки внутри хотя бы одного бокса (превью сцены целиком)

Глубины берутся по m равным корзинам на [near, far], точки в незанятых ячейках выбрасываются.
Случайный сдвиг внутри корзин (jitter) выбирает вызывающий код через draw_jitter, чтобы прямой и
обратный проходы видели одни и те же глубины.
"""

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
import numpy.typing as npt

import service.field_service as field_service
import service.occupancy_service as occupancy_service
from configs.config import RenderConfig
from domain.field import FieldGradient, VoxelField
from domain.geometry import Aabb, Ray, RayBatch, WORLD_BOX
from domain.occupancy import OccupancyGrid
from domain.render import RenderedImage, SampleSet
from service.geometry import ray_box_intersect_batch
from workers.render_pool import Span, chunk_spans, map_ordered

Array = npt.NDArray[np.float64]
Mask = npt.NDArray[np.bool_]
Mode = Literal["full", "clipped", "inverse", "union"]


@dataclass(frozen=True, eq=False)
class RaySamples:
    """Глубины (n, m), дополненные inf после последней валидной точки"""
    depths: Array
    valid: Mask
    delta: Array
    points: Array


@dataclass(frozen=True, eq=False)
class Composite:
    rgb: Array
    opacity: Array
    weights: Array
    tau: Array
    cumulative: Array
    final_transmittance: Array


def draw_jitter(rng: Optional[np.random.Generator], n_rays: int, cfg: RenderConfig) -> Array:
    if cfg.stratified and rng is not None:
        return rng.random((n_rays, cfg.samples_per_ray))
    return np.full((n_rays, cfg.samples_per_ray), 0.5)


def ray_bounds(origins: Array, directions: Array, cfg: RenderConfig) -> tuple[Array, Array, Mask]:
    near = np.full(origins.shape[0], cfg.near)
    far = np.full(origins.shape[0], cfg.far)
    if cfg.clip_to_world:
        t_entry, t_exit, hit = ray_box_intersect_batch(origins, directions, WORLD_BOX)
        near = np.where(hit, np.maximum(near, t_entry), near)
        far = np.where(hit, np.minimum(far, t_exit), far)
        return near, far, hit & (near < far)
    return near, far, np.ones(origins.shape[0], dtype=bool)


def sample_depths_batch(
        origins: Array,
        directions: Array,
        cfg: RenderConfig,
        grid: OccupancyGrid,
        jitter: Array
) -> RaySamples:
    n, m = origins.shape[0], cfg.samples_per_ray
    near, far, has_range = ray_bounds(origins, directions, cfg)
    width = (far - near) / m
    depths = near[:, None] + (np.arange(m)[None, :] + jitter) * width[:, None]
    points = origins[:, None, :] + depths[..., None] * directions[:, None, :]
    keep = has_range[:, None] & grid.occupied(points.reshape(-1, 3)).reshape(n, m)
    # пропущенные точки уезжают в конец строки, порядок остальных сохраняется
    depths = np.sort(np.where(keep, depths, np.inf), axis=1)
    valid = np.isfinite(depths)
    following = np.concatenate([depths[:, 1:], np.full((n, 1), np.inf)], axis=1)
    following = np.where(np.isfinite(following), following, far[:, None])
    delta = np.where(valid, following - depths, 0.0)
    safe = np.where(valid, depths, 0.0)
    points = origins[:, None, :] + safe[..., None] * directions[:, None, :]
    return RaySamples(depths, valid, delta, points)


def sample_depths(ray: Ray, cfg: RenderConfig, grid: OccupancyGrid, rng: Optional[np.random.Generator]) -> Array:
    samples = sample_depths_batch(ray.origin[None], ray.direction[None], cfg, grid, draw_jitter(rng, 1, cfg))
    return samples.depths[0][samples.valid[0]]


def box_interior_mask(samples: RaySamples, origins: Array, directions: Array, box: Aabb) -> Mask:
    """Точки строго внутри (t_entry, t_exit)"""
    t_entry, t_exit, hit = ray_box_intersect_batch(origins, directions, box)
    depths = samples.depths
    return hit[:, None] & (depths > t_entry[:, None]) & (depths < t_exit[:, None])


def contribution_mask(
        samples: RaySamples,
        origins: Array,
        directions: Array,
        mode: Mode,
        boxes: Sequence[Aabb]
) -> Mask:
    if mode == "full":
        return samples.valid
    if mode == "clipped":
        return samples.valid & box_interior_mask(samples, origins, directions, boxes[0])
    inside_any = np.zeros_like(samples.valid)
    for box in boxes:
        inside_any |= box_interior_mask(samples, origins, directions, box)
    if mode == "inverse":
        return samples.valid & ~inside_any
    return samples.valid & inside_any


def composite_arrays(sigma: Array, color: Array, delta: Array, background: Array, strict: bool = False) -> Composite:
    """
    Сумма по лучу: C = Σ T_i (1 - exp(-σ_i δ_i)) c_i + T_{m+1} * фон.

    Обычный режим: T_i = exp(-Σ_{j<i} σ_j δ_j). strict: T_i = exp(-Σ_{j<=i} σ_j δ_j).
    """
    n = sigma.shape[0]
    tau = sigma * delta
    cumulative = np.cumsum(tau, axis=1)
    alpha = -np.expm1(-tau)
    if strict:
        transmittance = np.exp(-cumulative)
    else:
        exclusive = np.concatenate([np.zeros((n, 1)), cumulative[:, :-1]], axis=1)
        transmittance = np.exp(-exclusive)
    weights = transmittance * alpha
    total = cumulative[:, -1] if cumulative.shape[1] > 0 else np.zeros(n)
    final_transmittance = np.exp(-total)
    rgb = np.sum(weights[..., None] * color, axis=1) + final_transmittance[:, None] * background[None, :]
    opacity = -np.expm1(-total)
    return Composite(np.clip(rgb, 0.0, 1.0), opacity, weights, tau, cumulative, final_transmittance)


def composite(samples: SampleSet, background: Array, strict: bool = False) -> tuple[Array, float]:
    result = composite_arrays(
        samples.sigma[None], samples.color[None], samples.delta[None], np.asarray(background, dtype=np.float64), strict
    )
    return result.rgb[0], float(result.opacity[0])


def composite_backward(
        result: Composite,
        color: Array,
        delta: Array,
        background: Array,
        d_rgb: Array,
        strict: bool = False
) -> tuple[Array, Array]:
    """Производные цвета пикселя по σ_i (n, m) и c_i (n, m, 3) при котангенсе d_rgb (n, 3)"""
    d_color = result.weights[..., None] * d_rgb[:, None, :]
    g = np.sum(color * d_rgb[:, None, :], axis=-1)
    weighted = result.weights * g
    suffix = np.cumsum(weighted[:, ::-1], axis=1)[:, ::-1]
    suffix = np.concatenate([suffix[:, 1:], np.zeros((suffix.shape[0], 1))], axis=1)
    after = np.exp(-result.cumulative)
    if strict:
        self_coef = after * (np.exp(-result.tau) + np.expm1(-result.tau))
    else:
        self_coef = after
    background_term = (d_rgb @ background) * result.final_transmittance
    d_sigma = delta * (self_coef * g - suffix - background_term[:, None])
    return d_sigma, d_color


@dataclass(frozen=True, eq=False)
class _ChunkPass:
    samples: RaySamples
    mask: Mask
    color: Array
    result: Composite


def _forward_chunk(
        field: VoxelField,
        grid: OccupancyGrid,
        rays: RayBatch,
        cfg: RenderConfig,
        mode: Mode,
        boxes: Sequence[Aabb],
        jitter: Array,
        span: Span
) -> _ChunkPass:
    start, stop = span
    origins, directions = rays.origins[start:stop], rays.directions[start:stop]
    samples = sample_depths_batch(origins, directions, cfg, grid, jitter[start:stop])
    mask = contribution_mask(samples, origins, directions, mode, boxes)
    sigma = np.zeros(mask.shape)
    color = np.zeros(mask.shape + (3,))
    if np.any(mask):
        sigma[mask], color[mask] = occupancy_service.gated_query_points(field, grid, samples.points[mask])
    background = np.asarray(cfg.background_color, dtype=np.float64)
    result = composite_arrays(sigma, color, samples.delta, background, cfg.strict_transmittance)
    return _ChunkPass(samples, mask, color, result)


def _render(
        field: VoxelField,
        grid: OccupancyGrid,
        rays: RayBatch,
        cfg: RenderConfig,
        mode: Mode,
        boxes: Sequence[Aabb],
        jitter: Optional[Array],
        workers: int
) -> RenderedImage:
    jitter = draw_jitter(None, len(rays), cfg) if jitter is None else jitter
    passes = map_ordered(
        lambda span: _forward_chunk(field, grid, rays, cfg, mode, boxes, jitter, span),
        chunk_spans(len(rays), cfg.chunk_size),
        workers,
    )
    rgb = np.concatenate([p.result.rgb for p in passes]) if passes else np.zeros((0, 3))
    opacity = np.concatenate([p.result.opacity for p in passes]) if passes else np.zeros(0)
    return RenderedImage(rgb.reshape(rays.height, rays.width, 3), opacity.reshape(rays.height, rays.width), rays.pose)


def _backward(
        field: VoxelField,
        grid: OccupancyGrid,
        rays: RayBatch,
        cfg: RenderConfig,
        mode: Mode,
        boxes: Sequence[Aabb],
        cotangent: Array,
        grad: FieldGradient,
        jitter: Optional[Array],
        workers: int
) -> None:
    if cotangent.shape != (rays.height, rays.width, 3):
        raise ValueError(f"Котангенс {cotangent.shape} не совпадает с разрешением {rays.width}x{rays.height}")
    jitter = draw_jitter(None, len(rays), cfg) if jitter is None else jitter
    d_rgb_all = cotangent.reshape(-1, 3)
    background = np.asarray(cfg.background_color, dtype=np.float64)

    def backward_chunk(span: Span) -> tuple[Array, Array, Array]:
        start, stop = span
        d_rgb = d_rgb_all[start:stop]
        forward = _forward_chunk(field, grid, rays, cfg, mode, boxes, jitter, span)
        selected = forward.mask & np.any(d_rgb != 0.0, axis=1)[:, None]
        if not np.any(selected):
            return np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3))
        d_sigma, d_color = composite_backward(
            forward.result, forward.color, forward.samples.delta, background, d_rgb, cfg.strict_transmittance
        )
        return forward.samples.points[selected], d_sigma[selected], d_color[selected]

    parts = map_ordered(backward_chunk, chunk_spans(len(rays), cfg.chunk_size), workers)
    if not parts:
        return
    # одно упорядоченное накопление: порядок лучей не зависит от числа воркеров
    points = np.concatenate([p[0] for p in parts])
    if points.shape[0] == 0:
        return
    field_service.accumulate_gradient_points(
        field, grad, points, np.concatenate([p[1] for p in parts]), np.concatenate([p[2] for p in parts])
    )


def render_full(
        field: VoxelField,
        grid: OccupancyGrid,
        rays: RayBatch,
        cfg: RenderConfig,
        jitter: Optional[Array] = None,
        workers: int = 1
) -> RenderedImage:
    return _render(field, grid, rays, cfg, "full", [], jitter, workers)


def render_clipped(
        field: VoxelField,
        grid: OccupancyGrid,
        rays: RayBatch,
        box: Aabb,
        cfg: RenderConfig,
        jitter: Optional[Array] = None,
        workers: int = 1
) -> RenderedImage:
    return _render(field, grid, rays, cfg, "clipped", [box], jitter, workers)


def render_inverse_clipped(
        field: VoxelField,
        grid: OccupancyGrid,
        rays: RayBatch,
        boxes: Sequence[Aabb],
        cfg: RenderConfig,
        jitter: Optional[Array] = None,
        workers: int = 1
) -> RenderedImage:
    return _render(field, grid, rays, cfg, "inverse", boxes, jitter, workers)


def render_merged_preview(
        field: VoxelField,
        grid: OccupancyGrid,
        rays: RayBatch,
        boxes: Sequence[Aabb],
        cfg: RenderConfig,
        workers: int = 1
) -> RenderedImage:
    """Превью всех объектов сразу: объединение масок боксов, только для картинок на выходе"""
    return _render(field, grid, rays, cfg, "union", boxes, None, workers)


def render_full_backward(
        field: VoxelField,
        grid: OccupancyGrid,
        rays: RayBatch,
        cfg: RenderConfig,
        cotangent: Array,
        grad: FieldGradient,
        jitter: Optional[Array] = None,
        workers: int = 1
) -> None:
    _backward(field, grid, rays, cfg, "full", [], cotangent, grad, jitter, workers)


def render_clipped_backward(
        field: VoxelField,
        grid: OccupancyGrid,
        rays: RayBatch,
        box: Aabb,
        cfg: RenderConfig,
        cotangent: Array,
        grad: FieldGradient,
        jitter: Optional[Array] = None,
        workers: int = 1
) -> None:
    _backward(field, grid, rays, cfg, "clipped", [box], cotangent, grad, jitter, workers)


def render_inverse_clipped_backward(
        field: VoxelField,
        grid: OccupancyGrid,
        rays: RayBatch,
        boxes: Sequence[Aabb],
        cfg: RenderConfig,
        cotangent: Array,
        grad: FieldGradient,
        jitter: Optional[Array] = None,
        workers: int = 1
) -> None:
    _backward(field, grid, rays, cfg, "inverse", boxes, cotangent, grad, jitter, workers)
