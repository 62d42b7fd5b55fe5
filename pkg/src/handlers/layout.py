"""
Команды layout (раскладка по подписи) и validate (проверка файла раскладки или набора)
"""

import asyncio
from pathlib import Path
from typing import Optional

from configs.config import RunConfig
from handlers.common import report_warnings
from middlewares.try_execute import try_execute
from resources.strings import CliMessage
from service.layout_service import load_dataset, parse_layout, request_layout, serialize_layout
from service.service_result import ExitCode


@try_execute
def cmd_layout(settings: RunConfig, caption: str) -> ExitCode:
    layout = asyncio.run(request_layout(settings.llm, caption))
    if layout.is_failure:
        print(layout.error)
        return layout.exit_code
    report_warnings(layout.unwrap())
    settings.out.mkdir(parents=True, exist_ok=True)
    path = settings.out / "layout.json"
    path.write_text(serialize_layout(layout.unwrap()), encoding="utf-8")
    print(CliMessage.LAYOUT_WRITTEN.format(path=path))
    return ExitCode.OK


@try_execute
def cmd_validate(layout_path: Optional[Path], dataset: Optional[Path] = None) -> ExitCode:
    if dataset is not None:
        records = load_dataset(dataset)
        if records.is_failure:
            print(records.error)
            return records.exit_code
        for record in records.unwrap():
            report_warnings(record.layout)
        print(CliMessage.DATASET_VALID.format(count=len(records.unwrap())))
        return ExitCode.OK
    if layout_path is None or not layout_path.is_file():
        print(CliMessage.NO_INPUT)
        return ExitCode.INPUT
    layout = parse_layout(layout_path.read_text(encoding="utf-8"))
    if layout.is_failure:
        print(layout.error)
        return layout.exit_code
    report_warnings(layout.unwrap())
    print(CliMessage.LAYOUT_VALID.format(count=len(layout.unwrap().objects)))
    return ExitCode.OK
