"""
Раскладки сцен: разбор и сериализация, предупреждения о вложенных и сильно пересекающихся боксах,
получение раскладки от LLM (живой запрос или сохраненные ответы) и чтение набора подписей
"""

import ast
import hashlib
import json
import logging
import os
import re
from itertools import combinations
from pathlib import Path
from typing import Any, Optional

import httpx
from pydantic import ValidationError

from configs.config import LlmConfig
from domain.layout import DatasetRecord, SceneLayout
from resources.strings import LAYOUT_SYSTEM_PROMPT, LayoutError, LayoutWarning
from service.geometry import aabb_from_layout
from service.service_result import ExitCode, ServiceResult

OVERLAP_RATIO = 0.5
CAPTION_LINE = re.compile(r"^\s*Caption\s*:\s*(.+?)\s*$", re.MULTILINE)
OBJECTS_BLOCK = re.compile(r"Objects\s*:\s*(\[.*\])", re.DOTALL)
CODE_FENCE = re.compile(r"^```[a-zA-Z]*\s*|\s*```$")
QUOTES = str.maketrans({"`": "'", "‘": "'", "’": "'", "“": '"', "”": '"'})


def describe_validation_error(error: ValidationError) -> str:
    """Первая ошибка pydantic в виде "objects.1.box: сообщение" """
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"])
    message = first["msg"].removeprefix("Value error, ")
    return f"{location}: {message}" if location else message


def _layout_from_data(data: Any) -> ServiceResult[SceneLayout]:
    try:
        return ServiceResult.success(SceneLayout.model_validate(data))
    except ValidationError as e:
        return ServiceResult.failure(describe_validation_error(e), ExitCode.INPUT)


def parse_layout(text: str) -> ServiceResult[SceneLayout]:
    """Строгий разбор JSON-раскладки"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        return ServiceResult.failure(f"{LayoutError.BAD_JSON}: {e.msg} (строка {e.lineno})", ExitCode.INPUT)
    return _layout_from_data(data)


def serialize_layout(layout: SceneLayout) -> str:
    return layout.model_dump_json(indent=2) + "\n"


def _integral_box(box: Any) -> list[Any]:
    """Печатный вид допускает 156.0 вместо 156, дробные и прочие значения оставляем строгой проверке"""
    return [int(v) if isinstance(v, float) and v.is_integer() else v for v in box]


def _extract_layout_data(text: str) -> ServiceResult[Any]:
    """
    Данные раскладки из ответа без проверки схемы: JSON (в том числе внутри блока ```json) или печатный вид

        Caption: a chicken near a desk
        Objects: [('a desk', [156, 106, 200, 200, 300, 150]), ('a chicken', [...])]
    """
    stripped = CODE_FENCE.sub("", text.strip())
    if stripped.startswith("{"):
        try:
            return ServiceResult.success(json.loads(stripped))
        except json.JSONDecodeError as e:
            return ServiceResult.failure(f"{LayoutError.BAD_JSON}: {e.msg} (строка {e.lineno})", ExitCode.INPUT)
    normalized = stripped.translate(QUOTES)
    caption = CAPTION_LINE.search(normalized)
    if caption is None:
        return ServiceResult.failure(LayoutError.NO_CAPTION, ExitCode.INPUT)
    objects = OBJECTS_BLOCK.search(normalized)
    if objects is None:
        return ServiceResult.failure(LayoutError.NO_OBJECTS, ExitCode.INPUT)
    try:
        pairs = ast.literal_eval(objects.group(1))
        return ServiceResult.success({
            "caption": caption.group(1).strip().strip("'\""),
            "objects": [{"description": description, "box": _integral_box(box)} for description, box in pairs],
        })
    except (ValueError, SyntaxError, TypeError) as e:
        return ServiceResult.failure(f"{LayoutError.BAD_TEXT}: {e}", ExitCode.INPUT)


def parse_layout_text(text: str) -> ServiceResult[SceneLayout]:
    """Мягкий разбор ответа LLM, затем та же проверка схемы, что и у parse_layout"""
    data = _extract_layout_data(text)
    if data.is_failure:
        return ServiceResult.failure(data.error, data.exit_code)
    return _layout_from_data(data.unwrap())


def validate_layout(layout: SceneLayout) -> list[str]:
    """
    Предупреждения для каждой пары объектов: один бокс целиком внутри другого,
    объем пересечения больше половины меньшего бокса. Ни на что не влияет, только сообщает.
    Результат не зависит от порядка объектов.
    """
    warnings = []
    for pair in combinations(layout.objects, 2):
        first, second = sorted(pair, key=lambda o: (o.description, o.box))
        first_box, second_box = aabb_from_layout(first.box), aabb_from_layout(second.box)
        if first_box.contains_box(second_box) or second_box.contains_box(first_box):
            outer, inner = (first, second) if first_box.contains_box(second_box) else (second, first)
            warnings.append(LayoutWarning.CONTAINMENT.format(
                outer=outer.box, outer_name=outer.description, inner=inner.box, inner_name=inner.description
            ))
        ratio = first_box.overlap_volume(second_box) / min(first_box.volume, second_box.volume)
        if ratio > OVERLAP_RATIO:
            warnings.append(LayoutWarning.OVERLAP.format(
                first=first.box, first_name=first.description,
                second=second.box, second_name=second.description, ratio=ratio
            ))
    return sorted(warnings)


def layout_fixture_key(caption: str) -> str:
    return hashlib.sha256(caption.encode("utf-8")).hexdigest()[:16]


def _read_mock(cfg: LlmConfig, caption: str) -> ServiceResult[SceneLayout]:
    if cfg.mock_dir is None:
        return ServiceResult.failure(f"{LayoutError.MOCK_MISS} {caption!r}", ExitCode.EXTERNAL)
    path = cfg.mock_dir / f"{layout_fixture_key(caption)}.json"
    if not path.is_file():
        logging.error(f"Нет mock-ответа {path} для подписи {caption!r}")
        return ServiceResult.failure(f"{LayoutError.MOCK_MISS} {caption!r} ({path.name})", ExitCode.EXTERNAL)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        return ServiceResult.failure(f"{path}: {LayoutError.BAD_JSON}: {e.msg}", ExitCode.EXTERNAL)
    # ответ прочитан, но раскладка неверна: это ошибка входных данных
    parsed = _layout_from_data(data)
    if parsed.is_failure:
        return ServiceResult.failure(f"{path}: {parsed.error}", ExitCode.INPUT)
    return parsed


def _completion_text(response: httpx.Response) -> Optional[str]:
    try:
        content = response.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        return None
    return content if isinstance(content, str) else None


async def request_layout(
        cfg: LlmConfig,
        caption: str,
        transport: Optional[httpx.AsyncBaseTransport] = None
) -> ServiceResult[SceneLayout]:
    """
    Раскладка для подписи. В режиме mock ответ читается из каталога <sha256(caption)[:16]>.json
    без сети. В живом режиме - один запрос chat completions, при неразборчивом ответе еще одна попытка.
    Неверная раскладка в ответе - INPUT, сеть и нечитаемый ответ - EXTERNAL.
    """
    if cfg.mode == "mock":
        return _read_mock(cfg, caption)
    api_key = os.environ.get(cfg.api_key_env)
    if not api_key:
        logging.error(f"Переменная {cfg.api_key_env} не задана, запрос к LLM не отправлен")
        return ServiceResult.failure(f"{LayoutError.NO_API_KEY} ({cfg.api_key_env})", ExitCode.EXTERNAL)
    body = {
        "model": cfg.model,
        "temperature": cfg.temperature,
        "messages": [
            {"role": "system", "content": LAYOUT_SYSTEM_PROMPT},
            {"role": "user", "content": f"Caption: {caption}"},
        ],
    }
    raw = ""
    schema_error: Optional[str] = None
    async with httpx.AsyncClient(transport=transport, timeout=cfg.timeout) as client:
        for attempt in range(2):
            try:
                response = await client.post(
                    cfg.endpoint or "",
                    json=body,
                    headers={"Authorization": f"Bearer {api_key}"},
                )
            except httpx.HTTPError as e:
                logging.error(f"Ошибка при запросе раскладки: {e}")
                return ServiceResult.failure(f"{LayoutError.NETWORK}: {e}", ExitCode.EXTERNAL)
            if response.status_code != 200:
                logging.error(f"Ошибка при запросе раскладки: {response.status_code}")
                return ServiceResult.failure(
                    f"{LayoutError.NETWORK}: HTTP {response.status_code} {response.text[:200]}", ExitCode.EXTERNAL
                )
            content = _completion_text(response)
            raw = content if content is not None else response.text
            if content is None:
                schema_error = None
                continue
            data = _extract_layout_data(content)
            if data.is_failure:
                schema_error = None
                logging.warning(f"Попытка {attempt + 1}: ответ LLM не разобран ({data.error})")
                continue
            parsed = _layout_from_data(data.unwrap())
            if parsed.is_success:
                return parsed
            schema_error = parsed.error
            logging.warning(f"Попытка {attempt + 1}: раскладка из ответа LLM не прошла проверку ({parsed.error})")
    if schema_error is not None:
        return ServiceResult.failure(f"{schema_error}. Ответ: {raw}", ExitCode.INPUT)
    return ServiceResult.failure(f"{LayoutError.BAD_RESPONSE}. Ответ: {raw}", ExitCode.EXTERNAL)


def load_dataset(path: Path) -> ServiceResult[list[DatasetRecord]]:
    """JSON Lines: {"subset": "normal"|"complex", "caption": ..., "objects": [...]} в каждой строке"""
    if not path.is_file():
        return ServiceResult.failure(f"Файл набора не найден: {path}", ExitCode.INPUT)
    records = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            return ServiceResult.failure(f"Строка {number}: {LayoutError.BAD_JSON} ({e.msg})", ExitCode.INPUT)
        if not isinstance(data, dict):
            return ServiceResult.failure(f"Строка {number}: запись должна быть объектом", ExitCode.INPUT)
        layout = _layout_from_data({"caption": data.get("caption"), "objects": data.get("objects")})
        if layout.is_failure:
            return ServiceResult.failure(f"Строка {number}: {layout.error}", ExitCode.INPUT)
        try:
            records.append(DatasetRecord(subset=data.get("subset"), layout=layout.unwrap()))
        except ValidationError as e:
            return ServiceResult.failure(f"Строка {number}: {describe_validation_error(e)}", ExitCode.INPUT)
    logging.info(f"Прочитали {len(records)} записей набора из {path}")
    return ServiceResult.success(records)
