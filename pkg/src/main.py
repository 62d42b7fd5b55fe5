import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from configs.config import load_settings
from handlers.ablate import cmd_ablate
from handlers.generate import cmd_generate, cmd_place
from handlers.layout import cmd_layout, cmd_validate
from handlers.render import cmd_render


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML-файл настроек")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="Каталог для всех результатов")
    common.add_argument("--layout", type=Path, help="JSON-файл раскладки")
    common.add_argument("--caption", help="Подпись сцены, раскладку для нее даст LLM")
    common.add_argument("--steps", type=int)
    common.add_argument("--alpha", type=float, help="Вес лосса сохранения сцены")
    common.add_argument("--beta", type=float, help="Масштаб смещения камеры к объекту")
    common.add_argument("--init", choices=["object-centric", "uni-sphere"], help="Начальное смещение плотности")
    common.add_argument("--no-crs", action="store_true", help="Рендер объектов без отсечения по боксу")
    common.add_argument("--no-sp", action="store_true", help="Без лосса сохранения сцены (alpha = 0)")
    common.add_argument("--mock-llm", type=Path, metavar="DIR", help="Ответы LLM из каталога, без сети")
    common.add_argument("--workers", type=int)
    common.add_argument("--resolution", type=int, help="Разрешение воксельного поля")
    common.add_argument("--samples", type=int, help="Сэмплов на луч")
    common.add_argument("--log-level")

    parser = argparse.ArgumentParser(prog="boxfield", description="Генерация сцен по раскладке боксов")
    commands = parser.add_subparsers(dest="command", required=True)

    layout = commands.add_parser("layout", parents=[common], help="Раскладка по подписи")
    layout.add_argument("text", metavar="CAPTION")
    generate = commands.add_parser("generate", parents=[common], help="Сцена с нуля")
    generate.add_argument(
        "--resume", type=Path, metavar="CHECKPOINT", help="Продолжить обучение из каталога чекпоинта"
    )
    place = commands.add_parser("place", parents=[common], help="Новые объекты в обученной сцене")
    place.add_argument("--scene", type=Path, required=True, help="Чекпоинт сцены")
    render = commands.add_parser("render", parents=[common], help="Рендер чекпоинта")
    render.add_argument("--checkpoint", type=Path, required=True)
    render.add_argument("--pose", action="append", default=[], help="px,py,pz,lx,ly,lz")
    render.add_argument("--clip", help="Бокс x,y,z,depth,width,height в координатах раскладки")
    render.add_argument("--raw", action="store_true", help="Дополнительно дамп float32 (.bxi)")
    commands.add_parser("ablate", parents=[common], help="Таблица абляций")
    validate = commands.add_parser("validate", parents=[common], help="Проверка раскладки")
    validate.add_argument("file", type=Path, nargs="?", metavar="LAYOUT")
    validate.add_argument("--dataset", type=Path, help="JSON Lines набора подписей")
    return parser


def settings_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Флаги CLI в виде словаря для RunConfig, вложенные секции - словарями"""
    overrides: dict[str, Any] = {}
    sections: dict[str, dict[str, Any]] = {}
    for key in ("seed", "out", "layout", "caption", "workers", "log_level"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.steps is not None:
        sections.setdefault("optimizer", {})["steps"] = args.steps
    if args.alpha is not None:
        sections.setdefault("optimizer", {})["alpha"] = args.alpha
    if args.no_sp:
        sections.setdefault("optimizer", {})["alpha"] = 0.0
    if args.no_crs:
        sections.setdefault("optimizer", {})["clipped"] = False
    if args.beta is not None:
        sections.setdefault("camera", {})["beta"] = args.beta
    if args.init is not None:
        sections.setdefault("bias", {})["init"] = args.init
    if args.resolution is not None:
        sections.setdefault("field", {})["resolution"] = args.resolution
    if args.samples is not None:
        sections.setdefault("render", {})["samples_per_ray"] = args.samples
    if args.mock_llm is not None:
        sections["llm"] = {"mode": "mock", "mock_dir": args.mock_llm}
    return {**overrides, **sections}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return int(cmd_validate(args.file or args.layout, args.dataset))

    settings = load_settings(args.config, settings_overrides(args))
    if settings.is_failure:
        logging.error(settings.error)
        print(settings.error)
        return int(settings.exit_code)
    config = settings.unwrap()
    logging.getLogger().setLevel(config.log_level.upper())

    if args.command == "layout":
        code = cmd_layout(config, args.text)
    elif args.command == "generate":
        code = cmd_generate(config, args.resume)
    elif args.command == "place":
        code = cmd_place(config, args.scene)
    elif args.command == "render":
        code = cmd_render(config, args.checkpoint, args.pose, args.clip, args.raw)
    else:
        code = cmd_ablate(config)
    return int(code)


if __name__ == "__main__":
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s"
    )
    sys.exit(main())
