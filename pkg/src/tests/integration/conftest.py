from pathlib import Path

import pytest

import tests.integration.data_gen as data_gen
from main import main
from service.layout_service import parse_layout


@pytest.fixture
def config(tmp_path: Path) -> Path:
    return data_gen.written_config(tmp_path)


@pytest.fixture
def chicken_layout(tmp_path: Path) -> Path:
    layout = data_gen.layout_of([156, 106, 200, 200, 300, 150], [156, 436, 200, 150, 76, 112],
                                caption=data_gen.CHICKEN)
    return data_gen.written_layout(tmp_path, layout)


@pytest.fixture
def generated(tmp_path: Path, config: Path, chicken_layout: Path) -> Path:
    """Каталог короткого прогона generate по раскладке с курицей"""
    out = tmp_path / "generated"
    code = main(["generate", "--config", str(config), "--layout", str(chicken_layout), "--seed", "1",
                 "--out", str(out)])
    assert code == 0
    assert parse_layout((out / "layout.json").read_text(encoding="utf-8")).is_success
    return out
