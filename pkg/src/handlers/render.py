import logging
from pathlib import Path
from typing import Optional, Sequence

import service.renderer as renderer
from configs.config import RunConfig
from domain.geometry import Aabb, CameraPose, WORLD_BOX, vec3
from handlers.common import TURNTABLE_VIEWS, grid_for
from helpers import checkpointhelper, imagehelper
from middlewares.try_execute import try_execute
from resources.strings import CliMessage
from service.geometry import Z_UP, aabb_from_layout, generate_camera_rays, turntable_poses
from service.service_result import ExitCode


def parse_pose(text: str, fov_y: float) -> CameraPose:
    """"px,py,pz,lx,ly,lz" - положение камеры и точка, куда она смотрит (z вверх)"""
    values = [float(v) for v in text.split(",")]
    if len(values) != 6:
        raise ValueError(f"Нужно 6 чисел, получено {len(values)}")
    return CameraPose(vec3(*values[:3]), vec3(*values[3:]), Z_UP.copy(), fov_y)


def parse_clip_box(text: str) -> Aabb:
    """Бокс в координатах раскладки: "x,y,z,depth,width,height" """
    return aabb_from_layout([int(v) for v in text.split(",")])


@try_execute
def cmd_render(
        settings: RunConfig,
        checkpoint: Path,
        poses: Sequence[str] = (),
        clip: Optional[str] = None,
        raw: bool = False
) -> ExitCode:
    """Полный рендер чекпоинта с заданных поз (по умолчанию поворотный стол), с --clip - только внутри бокса"""
    loaded = checkpointhelper.load_checkpoint(checkpoint)
    if loaded.is_failure:
        print(loaded.error)
        return loaded.exit_code
    try:
        cameras = [parse_pose(pose, settings.camera.fov_y) for pose in poses]
        box = parse_clip_box(clip) if clip is not None else None
    except ValueError as e:
        print(CliMessage.BAD_POSE.format(pose=e))
        return ExitCode.INPUT
    if not cameras:
        distance = sum(settings.camera.distance_range) / 2
        cameras = turntable_poses(WORLD_BOX.center, distance, settings.camera.fov_y, TURNTABLE_VIEWS)

    field = loaded.unwrap().field
    grid = grid_for(field, loaded.unwrap().grid, settings)
    size = settings.image_size
    for index, pose in enumerate(cameras):
        rays = generate_camera_rays(pose, (size, size))
        if box is not None:
            image = renderer.render_clipped(field, grid, rays, box, settings.render, None, settings.workers)
        else:
            image = renderer.render_full(field, grid, rays, settings.render, None, settings.workers)
        imagehelper.write_png(settings.out / f"render_{index:02d}.png", image)
        if raw:
            imagehelper.write_raw(settings.out / f"render_{index:02d}.bxi", image)
    logging.info(f"Отрисовали {len(cameras)} видов чекпоинта {checkpoint}")
    print(CliMessage.DONE.format(path=settings.out))
    return ExitCode.OK
