import math
from typing import Optional

import numpy as np
import pytest

import service.field_service as field_service
import service.renderer as renderer
import service.trainer as trainer
from configs.config import CameraSamplerConfig, DensityBiasConfig, OccupancyConfig, OptimizerConfig, RenderConfig
from domain.errors import OracleError, SceneAlreadyFrozenError, SceneNotFrozenError
from domain.field import FieldGradient, VoxelField
from domain.geometry import CameraPose, vec3
from domain.layout import LayoutObject, SceneLayout
from domain.render import RenderedImage
from domain.training import MetricsRecord, SceneState
from service.geometry import Z_UP, generate_camera_rays
from service.guidance import GuidanceOracle, GuidanceResult, PhotometricOracle, SphereSilhouetteTargets

CORNER_BOX = [448, 448, 448, 64, 64, 64]
CENTER_BOX = [192, 192, 192, 128, 128, 128]


class ZeroOracle(GuidanceOracle):

    def gradient_of(self, image: RenderedImage, object_id: int) -> GuidanceResult:
        return GuidanceResult(np.zeros_like(image.rgb), None)


class BrokenOracle(GuidanceOracle):

    def gradient_of(self, image: RenderedImage, object_id: int) -> GuidanceResult:
        raise RuntimeError("сервис недоступен")


def make_layout(*boxes: list[int]) -> SceneLayout:
    return SceneLayout(
        caption="test scene",
        objects=[LayoutObject(description=f"object {i}", box=box) for i, box in enumerate(boxes)],
    )


def make_state(
        *boxes: list[int],
        init: str = "object-centric",
        freeze: Optional[bool] = True,
        chunk_size: int = 4096,
        resolution: int = 16,
        samples: int = 32
) -> SceneState:
    """freeze: True - с нуля, False - копия поля как при вставке, None - не замораживать"""
    layout = make_layout(*boxes)
    bias = DensityBiasConfig(init=init)
    field = trainer.initialize_field(layout, resolution, bias)
    state = trainer.new_scene_state(
        layout, field, OccupancyConfig(), RenderConfig(samples_per_ray=samples, chunk_size=chunk_size),
        CameraSamplerConfig()
    )
    if freeze is not None:
        trainer.freeze_scene(state, from_scratch=freeze)
    return state


def optimizer(**update: object) -> OptimizerConfig:
    values: dict[str, object] = {"steps": 3, "rays_per_object_per_step": 64, "n_probe_views": 2, "probe_resolution": 8}
    values.update(update)
    return OptimizerConfig.model_validate(values)


def sphere_oracle(state: SceneState) -> GuidanceOracle:
    return PhotometricOracle(SphereSilhouetteTargets.inscribed(state.boxes, 0.5, vec3(0.0, 0.0, 0.0)))


def probe_rays():
    pose = CameraPose(vec3(2.2, 0.4, 0.6), vec3(0.0, 0.0, 0.0), Z_UP, math.radians(40))
    return generate_camera_rays(pose, (12, 12))


class TestReconstructionLoss:

    def test_identical_images(self) -> None:
        image = RenderedImage(np.full((3, 3, 3), 0.3), np.ones((3, 3)))
        loss, cotangent = trainer.reconstruction_loss(image, image)
        assert loss == 0.0 and not cotangent.any()

    def test_white_against_black(self) -> None:
        white = RenderedImage(np.ones((2, 2, 3)), np.ones((2, 2)))
        black = RenderedImage(np.zeros((2, 2, 3)), np.zeros((2, 2)))
        loss, cotangent = trainer.reconstruction_loss(white, black)
        assert loss == 1.0
        assert np.allclose(cotangent, 1.0 / 12)

    def test_mixed_signs(self) -> None:
        image = RenderedImage(np.array([[[0.5] * 3, [0.25] * 3]]), np.ones((1, 2)))
        reference = RenderedImage(np.array([[[0.0] * 3, [0.5] * 3]]), np.ones((1, 2)))
        loss, cotangent = trainer.reconstruction_loss(image, reference)
        assert loss == pytest.approx(0.375)
        assert np.all(cotangent[0, 0] == 1.0 / 6) and np.all(cotangent[0, 1] == -1.0 / 6)

    def test_resolution_mismatch(self) -> None:
        with pytest.raises(ValueError):
            trainer.reconstruction_loss(
                RenderedImage(np.zeros((2, 2, 3)), np.zeros((2, 2))),
                RenderedImage(np.zeros((2, 3, 3)), np.zeros((2, 3))),
            )


class TestFreeze:

    def test_second_freeze_fails(self) -> None:
        state = make_state(CENTER_BOX)
        with pytest.raises(SceneAlreadyFrozenError):
            trainer.freeze_scene(state, from_scratch=True)

    def test_from_scratch_renders_background(self) -> None:
        state = make_state(CENTER_BOX)
        cfg = RenderConfig(samples_per_ray=32, background_color=(0.1, 0.2, 0.3))
        image = renderer.render_full(state.frozen.field, state.frozen.grid, probe_rays(), cfg)
        assert np.all(image.opacity == 0.0)
        assert np.array_equal(image.rgb, np.broadcast_to(np.array([0.1, 0.2, 0.3]), image.rgb.shape))

    def test_placement_copy_is_bit_exact(self) -> None:
        state = make_state(CENTER_BOX, freeze=False)
        rays = probe_rays()
        trainable = renderer.render_full(state.trainable, state.grid, rays, state.render)
        frozen = renderer.render_full(state.frozen.field, state.frozen.grid, rays, state.render)
        assert np.array_equal(trainable.rgb, frozen.rgb)

    def test_frozen_copy_is_isolated_and_read_only(self) -> None:
        state = make_state(CENTER_BOX, freeze=False)
        saved = state.frozen.field.density.copy()
        state.trainable.density += 1.0
        state.grid.bits[...] = False
        assert np.array_equal(state.frozen.field.density, saved)
        assert state.frozen.grid.bits.any()
        with pytest.raises(ValueError):
            state.frozen.field.density[0, 0, 0] = 0.0

    def test_step_needs_frozen_scene(self) -> None:
        state = make_state(CENTER_BOX, freeze=None)
        with pytest.raises(SceneNotFrozenError):
            trainer.training_step(state, ZeroOracle(), optimizer(), np.random.default_rng(0))
        with pytest.raises(SceneNotFrozenError):
            trainer.outside_box_opacity(state, 2)


class TestTrainingStep:

    def test_oracle_failure_names_object(self) -> None:
        state = make_state(CENTER_BOX, CORNER_BOX)
        with pytest.raises(OracleError, match="#0"):
            trainer.training_step(state, BrokenOracle(), optimizer(), np.random.default_rng(0))

    def test_total_is_sum_of_parts(self) -> None:
        state = make_state(CENTER_BOX, [0, 0, 0, 128, 128, 128])
        cfg = optimizer(alpha=0.3)
        report = trainer.training_step(state, sphere_oracle(state), cfg, np.random.default_rng(1))
        assert len(report.per_object) == 2
        assert report.total == sum(report.per_object) + 0.3 * report.rec_loss
        assert state.step == 1 and state.adam.t == 1

    def test_zero_guidance_without_preservation_keeps_field(self) -> None:
        state = make_state(CENTER_BOX)
        before = state.trainable.copy()
        report = trainer.training_step(state, ZeroOracle(), optimizer(alpha=0.0), np.random.default_rng(2))
        assert report.grad_norm == 0.0 and report.per_object == [0.0]
        assert np.array_equal(state.trainable.density, before.density)

    def test_uni_sphere_bias_starves_corner_object(self) -> None:
        state = make_state(CORNER_BOX, init="uni-sphere")
        assert trainer.detect_vanishing_objects(state) == [0]
        before = state.trainable.copy()
        largest: list[float] = []
        context = trainer.StepContext(on_gradient=lambda grad: largest.append(grad.max_abs()))
        cfg = optimizer(alpha=0.0, rays_per_object_per_step=256)
        rng = np.random.default_rng(3)
        oracle = sphere_oracle(state)
        for _ in range(100):
            trainer.training_step(state, oracle, cfg, rng, context)
        assert largest == [0.0] * 100
        assert np.array_equal(state.trainable.density, before.density)
        assert np.array_equal(state.trainable.color, before.color)

    def test_object_gradient_of_starved_object_is_zero_with_preservation(self) -> None:
        state = make_state(CORNER_BOX, init="uni-sphere")
        cfg = optimizer(alpha=1.0, rays_per_object_per_step=256)
        report = trainer.training_step(state, sphere_oracle(state), cfg, np.random.default_rng(3))
        assert report.object_grad_norm == 0.0
        assert report.grad_norm > 0.0

    def test_object_centric_bias_reaches_corner_object(self) -> None:
        state = make_state(CORNER_BOX, resolution=32, samples=128)
        assert trainer.detect_vanishing_objects(state) == []
        cfg = optimizer(alpha=0.0, rays_per_object_per_step=1024)
        report = trainer.training_step(state, sphere_oracle(state), cfg, np.random.default_rng(3))
        assert report.object_grad_norm > 0.0

    def test_preservation_gradient_stays_outside_boxes(self, monkeypatch) -> None:
        # облако равномерной сферы лежит вне углового бокса и отличается от пустой замороженной сцены
        state = make_state(CORNER_BOX, init="uni-sphere")
        box = state.boxes[0]
        recorded = []
        original = field_service.accumulate_gradient_points

        def recording(field: VoxelField, grad: FieldGradient, points: np.ndarray, *args: np.ndarray) -> None:
            recorded.append(points.copy())
            original(field, grad, points, *args)

        monkeypatch.setattr(field_service, "accumulate_gradient_points", recording)
        report = trainer.training_step(state, ZeroOracle(), optimizer(alpha=1.0), np.random.default_rng(4))
        assert report.rec_loss > 0.0 and report.grad_norm > 0.0
        points = np.concatenate(recorded)
        interior = np.all((points > box.min_corner + 1e-9) & (points < box.max_corner - 1e-9), axis=-1)
        assert len(points) > 0 and not interior.any()

    def test_same_seed_same_run(self) -> None:
        reports = []
        fields = []
        for workers, chunk_size in ((1, 4096), (4, 7)):
            state = make_state(CENTER_BOX, [0, 0, 0, 128, 128, 128], chunk_size=chunk_size)
            rng = np.random.default_rng(5)
            oracle = sphere_oracle(state)
            context = trainer.StepContext(workers=workers)
            reports.append([trainer.training_step(state, oracle, optimizer(), rng, context) for _ in range(3)])
            fields.append(state.trainable)
        assert reports[0] == reports[1]
        assert np.array_equal(fields[0].density, fields[1].density)
        assert np.array_equal(fields[0].color, fields[1].color)


class TestSceneMetrics:

    def test_no_opacity_change_right_after_placement_freeze(self) -> None:
        state = make_state(CORNER_BOX, init="uni-sphere", freeze=False)
        assert trainer.outside_box_opacity(state, 2, 8) == 0.0
        assert trainer.frozen_region_deviation(state, 2, 8) == 0.0

    def test_cloud_outside_boxes_raises_opacity(self) -> None:
        state = make_state(CORNER_BOX, init="uni-sphere")
        assert trainer.outside_box_opacity(state, 2, 8) > 0.1

    def test_needs_probe_views(self) -> None:
        with pytest.raises(ValueError):
            trainer.outside_box_opacity(make_state(CENTER_BOX), 0)

    def test_target_loss_is_seeded(self) -> None:
        state = make_state(CENTER_BOX)
        targets = SphereSilhouetteTargets.inscribed(state.boxes, 0.5, vec3(0.0, 0.0, 0.0))
        first = trainer.target_loss(state, targets, 2, 8, seed=1)
        assert first == trainer.target_loss(state, targets, 2, 8, seed=1)
        assert 0.0 < first < 1.0


class TestRunGeneration:

    def test_zero_steps_keep_state(self) -> None:
        state = make_state(CENTER_BOX)
        before = state.trainable.copy()
        _, series = trainer.run_generation(state, ZeroOracle(), optimizer(steps=0))
        assert series == [] and state.step == 0
        assert np.array_equal(state.trainable.density, before.density)

    def test_metrics_and_checkpoint_schedule(self) -> None:
        state = make_state(CENTER_BOX)
        written: list[MetricsRecord] = []
        checkpoints: list[int] = []
        cfg = optimizer(steps=3, metrics_every=2, checkpoint_every=2)
        _, series = trainer.run_generation(
            state, sphere_oracle(state), cfg, np.random.default_rng(6),
            on_metrics=written.append,
            on_checkpoint=lambda s, rng: checkpoints.append(s.step),
        )
        assert [record.step for record in series] == [2, 3]
        assert written == series
        assert checkpoints == [2]
        assert all(len(record.per_object_loss) == 1 for record in series)

    def test_resumes_from_current_step(self) -> None:
        state = make_state(CENTER_BOX)
        oracle = sphere_oracle(state)
        trainer.run_generation(state, oracle, optimizer(steps=2))
        trainer.run_generation(state, oracle, optimizer(steps=3))
        assert state.step == 3
