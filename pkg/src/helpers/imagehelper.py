"""
Методы для записи и чтения картинок: 8-битный PNG и сырой дамп float32

Формат дампа .bxi: заголовок 16 байт "<4sIII" (магия BXI1, ширина, высота, каналы),
затем float32 little-endian построчно.
"""

import logging
import struct
from pathlib import Path

import numpy as np
import numpy.typing as npt
from PIL import Image

from domain.render import RenderedImage

RAW_MAGIC = b"BXI1"
RAW_HEADER = struct.Struct("<4sIII")


def to_uint8(rgb: npt.NDArray[np.float64]) -> npt.NDArray[np.uint8]:
    return np.rint(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(path: Path, image: RenderedImage) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(image.rgb)).save(path, format="PNG")
    logging.debug(f"Сохранили картинку {path}")
    return path


def read_png(path: Path) -> npt.NDArray[np.float64]:
    with Image.open(path) as picture:
        return np.asarray(picture.convert("RGB"), dtype=np.float64) / 255.0


def write_raw(path: Path, image: RenderedImage) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    data = image.rgb.astype("<f4")
    with open(path, "wb") as file:
        file.write(RAW_HEADER.pack(RAW_MAGIC, image.width, image.height, 3))
        file.write(data.tobytes(order="C"))
    return path


def read_raw(path: Path) -> npt.NDArray[np.float32]:
    payload = path.read_bytes()
    magic, width, height, channels = RAW_HEADER.unpack_from(payload)
    if magic != RAW_MAGIC:
        raise ValueError(f"{path} не является дампом картинки (магия {magic!r})")
    data = np.frombuffer(payload, dtype="<f4", offset=RAW_HEADER.size)
    return data.reshape(height, width, channels)
