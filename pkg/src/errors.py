__all__ = ['FilteringError', 'DegenerateModel', 'EmptyObservations', 'StepOutOfRange', 'GridTooCoarse',
           'PsiOverflow', 'UnsupportedZeroA', 'SingularMatrix', 'DimensionMismatch', 'MalformedInput']


class FilteringError(Exception):
    """
    Base class of every error raised by the filtering modules
    """


class DegenerateModel(FilteringError):
    def __init__(self, constraint: str, message: str = None):
        self.constraint = constraint
        super().__init__(message or f'Degenerate model: constraint {constraint} violated')


class EmptyObservations(FilteringError):
    def __init__(self):
        super().__init__('Observation sequence is empty')


class StepOutOfRange(FilteringError):
    def __init__(self, step: int, length: int):
        self.step = step
        self.length = length
        super().__init__(f'Step {step} outside 1..{length}')


class GridTooCoarse(FilteringError):
    def __init__(self, step: int, boundary_mass: float):
        self.step = step
        self.boundary_mass = boundary_mass
        super().__init__(f'Posterior mass {boundary_mass:.3g} at the grid boundary after step {step}; '
                         f'widen the grid')


class PsiOverflow(FilteringError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f'psi_{index} = {value:.3g} exceeds the overflow guard; use the product-of-ratios path')


class UnsupportedZeroA(FilteringError):
    def __init__(self, operation: str):
        self.operation = operation
        super().__init__(f'{operation} needs a != 0 (the psi recurrences divide by a)')


class SingularMatrix(FilteringError):
    def __init__(self, pivot_index: int, pivot: float):
        self.pivot_index = pivot_index
        self.pivot = pivot
        super().__init__(f'Matrix is singular: pivot {pivot_index} has magnitude {abs(pivot):.3g}')


class DimensionMismatch(FilteringError):
    def __init__(self, left: tuple, right: tuple):
        self.left = left
        self.right = right
        super().__init__(f'Dimension mismatch: {left} vs {right}')


class MalformedInput(FilteringError):
    def __init__(self, message: str, line: int = None):
        self.line = line
        super().__init__(f'line {line}: {message}' if line is not None else message)
