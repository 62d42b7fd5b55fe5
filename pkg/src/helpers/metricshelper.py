"""
Поток метрик в NDJSON и таблица сравнения для абляций
"""

import logging
from pathlib import Path
from typing import Sequence

import pandas as pd

from domain.training import MetricsRecord

ABLATION_COLUMNS = ["configuration", "crs", "ocdb", "sp", "grad_norm_step1", "outside_box_opacity", "target_loss"]


class MetricsWriter:
    """Дописывает записи в файл по одной строке JSON"""

    def __init__(self, path: Path) -> None:
        self.path = path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("", encoding="utf-8")

    def write(self, record: MetricsRecord) -> None:
        with open(self.path, "a", encoding="utf-8") as file:
            file.write(record.model_dump_json() + "\n")


def read_metrics(path: Path) -> list[MetricsRecord]:
    return [
        MetricsRecord.model_validate_json(line)
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


def ablation_table(rows: Sequence[dict[str, object]]) -> pd.DataFrame:
    table = pd.DataFrame(list(rows), columns=ABLATION_COLUMNS)
    errors = []
    for column in ("grad_norm_step1", "outside_box_opacity", "target_loss"):
        if table[column].isna().any():
            errors.append(f"В колонке {column} есть пропуски")
    if errors:
        raise ValueError("; ".join(errors))
    return table


def write_ablation_report(table: pd.DataFrame, directory: Path) -> tuple[Path, Path]:
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / "ablation.csv"
    text_path = directory / "ablation.txt"
    table.to_csv(csv_path, index=False, float_format="%.6g")
    text_path.write_text(table.to_string(index=False, float_format=lambda v: f"{v:.6g}") + "\n", encoding="utf-8")
    logging.info(f"Отчет по абляциям записан в {csv_path}")
    return csv_path, text_path
