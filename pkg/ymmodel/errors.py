class ModelError(Exception):
    pass


class ConfigError(ModelError):
    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class GradeOrderError(ModelError):
    pass


class IndexSetError(ModelError):
    pass


class SupportError(ModelError):
    pass


class GridError(ModelError):
    pass


class BumpConstructionError(ModelError):
    pass


class LieAlgebraError(ModelError):
    pass


class TriangularityError(ModelError):
    pass


class InvariantViolation(ModelError):
    def __init__(self, message, beta=None, gamma=None, x=None, y=None):
        self.beta = beta
        self.gamma = gamma
        self.x = x
        self.y = y
        context = {k: v for k, v in (("beta", beta), ("gamma", gamma), ("x", x), ("y", y)) if v is not None}
        if context:
            message = f"{message} ({', '.join(f'{k}={v}' for k, v in context.items())})"
        super().__init__(message)


class NumericalAbort(ModelError):
    pass
