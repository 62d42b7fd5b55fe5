from dataclasses import dataclass
from enum import IntEnum
from typing import Generic, TypeVar, Optional, Callable

T = TypeVar('T')
U = TypeVar('U')


class ExitCode(IntEnum):
    """Коды завершения CLI, они же коды ошибок ServiceResult"""
    OK = 0
    INPUT = 2
    EXTERNAL = 3
    RUNTIME = 4


@dataclass(frozen=True)
class ServiceResult(Generic[T]):
    data: Optional[T] = None
    error: Optional[str] = None
    error_code: Optional[ExitCode] = None

    @classmethod
    def success(cls, data: T) -> 'ServiceResult[T]':
        return cls(data=data)

    @classmethod
    def failure(cls, error: str, error_code: ExitCode = ExitCode.RUNTIME) -> 'ServiceResult[T]':
        return cls(error=error, error_code=error_code)

    @property
    def is_success(self) -> bool:
        return self.error is None

    @property
    def is_failure(self) -> bool:
        return not self.is_success

    @property
    def exit_code(self) -> ExitCode:
        return ExitCode.OK if self.is_success else (self.error_code or ExitCode.RUNTIME)

    def unwrap(self) -> T:
        if self.is_success:
            return self.data  # type: ignore[return-value]
        raise ValueError(f"[{int(self.exit_code)}] {self.error}")

    def map(self, func: Callable[[T], U]) -> 'ServiceResult[U]':
        if self.is_success:
            return ServiceResult.success(func(self.data))  # type: ignore[arg-type]
        return ServiceResult.failure(self.error or "", self.exit_code)
