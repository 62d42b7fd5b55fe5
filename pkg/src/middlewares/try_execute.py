import functools
import logging
import traceback
from typing import Callable, ParamSpec

from resources.strings import CliMessage
from service.service_result import ExitCode

P = ParamSpec("P")


def try_execute(handler: Callable[P, ExitCode]) -> Callable[P, ExitCode]:
    """Любое непредвиденное исключение команды - в лог с трейсбеком и код RUNTIME"""

    @functools.wraps(handler)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> ExitCode:
        try:
            return handler(*args, **kwargs)
        except Exception:
            logging.error(f"Неожиданная ошибка в команде {handler.__name__}.\n{traceback.format_exc()}")
            print(CliMessage.UNEXPECTED)
            return ExitCode.RUNTIME

    return wrapper
