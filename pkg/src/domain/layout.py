"""
Раскладка сцены: подпись и список объектов с боксами в пространстве [0, 512]^3

Бокс задается как [x, y, z, depth, width, height], depth/width/height - размеры вдоль x/y/z.
"""

from typing import Literal

from pydantic import BaseModel, ConfigDict, StrictInt, field_validator, model_validator

LAYOUT_EXTENT = 512
BOX_FIELDS = ("x", "y", "z", "depth", "width", "height")


def check_box6(box: list[int], extent: int = LAYOUT_EXTENT) -> list[int]:
    """Проверяет бокс и называет первое неверное поле"""
    if len(box) != 6:
        raise ValueError(f"Бокс должен состоять из 6 чисел, получено {len(box)}")
    for name, value in zip(BOX_FIELDS, box):
        if not 0 <= value <= extent:
            raise ValueError(f"box.{name} = {value} выходит за пределы [0, {extent}]")
    for axis, size_name in enumerate(BOX_FIELDS[3:]):
        size = box[axis + 3]
        if size <= 0:
            raise ValueError(f"box.{size_name} = {size} должен быть больше нуля")
        if box[axis] + size > extent:
            raise ValueError(f"box.{BOX_FIELDS[axis]} + box.{size_name} = {box[axis] + size} больше {extent}")
    return box


class LayoutObject(BaseModel):
    model_config = ConfigDict(extra='forbid')

    description: str
    # без приведения типов: "156", 156.0 и true - ошибки раскладки
    box: list[StrictInt]

    @field_validator("description")
    @classmethod
    def check_description(cls, description: str) -> str:
        if description.strip() == "":
            raise ValueError("Описание объекта не должно быть пустым")
        return description

    @field_validator("box")
    @classmethod
    def check_box(cls, box: list[int]) -> list[int]:
        return check_box6(box)


class SceneLayout(BaseModel):
    model_config = ConfigDict(extra='forbid')

    caption: str
    objects: list[LayoutObject]

    @field_validator("objects")
    @classmethod
    def check_objects(cls, objects: list[LayoutObject]) -> list[LayoutObject]:
        if len(objects) == 0:
            raise ValueError("В раскладке должен быть хотя бы один объект")
        return objects


class DatasetRecord(BaseModel):
    """Запись набора данных: подмножество normal - ровно 2 объекта, complex - от 2 до 7"""
    model_config = ConfigDict(extra='ignore')

    subset: Literal["normal", "complex"]
    layout: SceneLayout

    @field_validator("layout")
    @classmethod
    def check_count(cls, layout: SceneLayout) -> SceneLayout:
        if not 2 <= len(layout.objects) <= 7:
            raise ValueError(f"В записи набора должно быть от 2 до 7 объектов, получено {len(layout.objects)}")
        return layout

    @model_validator(mode="after")
    def check_subset(self) -> "DatasetRecord":
        if self.subset == "normal" and len(self.layout.objects) != 2:
            raise ValueError("В подмножестве normal ровно два объекта")
        return self
