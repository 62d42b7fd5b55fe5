"""
Тексты для команд: ошибки и предупреждения раскладки, сообщения CLI и системный промпт генератора раскладок
"""

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        """Бэкпорт enum.StrEnum: str() и format() возвращают значение"""

        def __str__(self) -> str:
            return str(self.value)

        __format__ = str.__format__

        @staticmethod
        def _generate_next_value_(name: str, start: int, count: int, last_values: list) -> str:
            return name.lower()


class LayoutError(StrEnum):
    """Ошибки разбора и получения раскладки"""
    BAD_JSON = "Раскладка не является корректным JSON"
    BAD_TEXT = "Не удалось разобрать раскладку ни как JSON, ни как список кортежей"
    NO_CAPTION = "В тексте раскладки нет строки Caption"
    NO_OBJECTS = "В тексте раскладки нет строки Objects"
    MOCK_MISS = "Нет сохраненного ответа для подписи"
    NO_API_KEY = "Не задана переменная окружения с ключом API"
    NETWORK = "Ошибка при запросе к LLM"
    BAD_RESPONSE = "LLM вернула ответ, который не удалось разобрать как раскладку"


class LayoutWarning(StrEnum):
    """Предупреждения validate_layout, форматируются описаниями объектов"""
    CONTAINMENT = "Бокс {outer_name} {outer} целиком содержит бокс {inner_name} {inner}"
    OVERLAP = "Боксы {first_name} {first} и {second_name} {second} пересекаются на {ratio:.0%} меньшего"


class CliMessage(StrEnum):
    """Сообщения, которые команды печатают пользователю"""
    LAYOUT_WRITTEN = "Раскладка записана в {path}"
    LAYOUT_VALID = "Раскладка корректна: {count} объект(ов)"
    DATASET_VALID = "Набор корректен: {count} запис(ей)"
    WARNING = "Предупреждение: {warning}"
    VANISHING = "Ни одна ячейка сетки занятости не попадает в боксы {objects}: градиент по ним будет нулевым"
    DONE = "Готово, результаты в {path}"
    UNEXPECTED = "Возникла неожиданная ошибка, подробности в логе"
    NO_INPUT = "Нужно указать раскладку (--layout) или подпись (--caption)"
    BAD_POSE = "Не удалось разобрать позу камеры: {pose}"
    NO_STEPS = "Для абляций нужен хотя бы один шаг (--steps)"
    NOT_RESUMABLE = "{path} - не чекпоинт обучения: нужны checkpoint.json, optimizer.bxf и frozen.bxf"
    RESUME_PAST_END = "Чекпоинт уже на шаге {step}, а --steps = {steps}"


# Восстановлен по описанию: генерация в пространстве [512, 512, 512], примеры в контексте
# и требование объединять вложенные объекты в один бокс
LAYOUT_SYSTEM_PROMPT = """You are a 3D scene layout designer. Given a caption, decompose the scene into \
the individual objects it mentions and place an axis-aligned 3D bounding box for each of them, in accordance \
with the threestudio coordinate convention, in a space of [512, 512, 512].

Each box is written as [x, y, z, depth, width, height]: (x, y, z) is the minimum corner, depth runs along x, \
width along y and height along z (z points up). All numbers are integers, every box stays inside \
[0, 512] on each axis and every size is positive.

Containment relationship: if one object is contained in or carried by another (a tie draped over a briefcase, \
food on a plate, flowers in a vase), do not give them separate boxes. Combine them into a single object with \
one description and one box.

Keep the sizes of objects plausible relative to each other, and leave the objects that do not touch apart.

Answer with JSON only, in the form:
{"caption": "<the caption>", "objects": [{"description": "<object>", "box": [x, y, z, depth, width, height]}]}

Examples:

Caption: a chicken near a desk
{"caption": "a chicken near a desk", "objects": [\
{"description": "a desk", "box": [156, 106, 200, 200, 300, 150]}, \
{"description": "a chicken", "box": [156, 436, 200, 150, 76, 112]}]}

Caption: Two dogs sitting side by side, one larger than the other, with a plate of dog food in front.
{"caption": "Two dogs sitting side by side, one larger than the other, with a plate of dog food in front.", \
"objects": [\
{"description": "a large sitting dog", "box": [156, 106, 0, 200, 150, 300]}, \
{"description": "a small sitting dog", "box": [156, 256, 0, 150, 100, 200]}, \
{"description": "a plate of dog food", "box": [356, 206, 0, 100, 100, 50]}]}

Caption: A pair of brown shoes placed neatly next to a black briefcase with a blue tie draped over it.
{"caption": "A pair of brown shoes placed neatly next to a black briefcase with a blue tie draped over it.", \
"objects": [\
{"description": "a pair of brown shoes", "box": [0, 0, 0, 256, 256, 200]}, \
{"description": "a black briefcase with a blue tie draped over it", "box": [256, 0, 0, 256, 256, 300]}]}
"""
