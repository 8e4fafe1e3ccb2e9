from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from .models import DynamicEquilibrium


class EqkitError(Exception):
    """Base class for every error raised by eqkit."""


class NegativeLoad(EqkitError, ValueError):
    pass


class NonConcaveUtility(EqkitError, ValueError):
    pass


class InfeasibleBalance(EqkitError):
    pass


class DimensionMismatch(EqkitError, ValueError):
    pass


class ZeroCurvature(EqkitError, ValueError):
    pass


class PartialOrderViolated(EqkitError, ValueError):
    pass


class SingularSystem(EqkitError):
    pass


class InfeasibleScenario(EqkitError, ValueError):
    pass


class InfeasiblePoint(EqkitError, ValueError):
    pass


class GridTooLarge(EqkitError, ValueError):
    pass


class UnknownCommand(EqkitError, ValueError):
    pass


class NoConvergence(EqkitError):
    def __init__(
        self,
        message: str,
        *,
        residual: float,
        iterations: int,
        equilibrium: DynamicEquilibrium | None = None,
    ) -> None:
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations
        self.equilibrium = equilibrium


class SchemaError(EqkitError, ValueError):
    def __init__(
        self,
        message: str,
        *,
        path: str | None = None,
        line: int | None = None,
        field: str | None = None,
    ) -> None:
        where = []
        if path:
            where.append(path)
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field {field}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")
        self.path = path
        self.line = line
        self.field = field

    def as_dict(self) -> dict[str, Any]:
        return {"path": self.path, "line": self.line, "field": self.field, "error": str(self)}
