class SceneAlreadyFrozenError(RuntimeError):
    def __init__(self) -> None:
        super().__init__("Сцена уже заморожена, повторная заморозка запрещена")


class SceneNotFrozenError(RuntimeError):
    def __init__(self) -> None:
        super().__init__("Перед обучением сцену нужно заморозить (freeze_scene)")


class OracleError(RuntimeError):
    """Сбой оракула градиента, с номером объекта"""

    def __init__(self, object_index: int, reason: str) -> None:
        super().__init__(f"Оракул упал на объекте #{object_index}: {reason}")
        self.object_index = object_index
