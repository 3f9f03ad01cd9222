"""Exception types shared across the package."""


class WalkBoundsError(Exception):
    """Base class for package errors."""


class NonHermitianError(WalkBoundsError, ValueError):
    def __init__(self, asymmetry, tolerance):
        self.asymmetry = float(asymmetry)
        self.tolerance = float(tolerance)
        super().__init__(
            f"matrix is not Hermitian: max |X - X^H| = {self.asymmetry:.3e} "
            f"exceeds tolerance {self.tolerance:.3e}"
        )


class ShapeMismatchError(WalkBoundsError, ValueError):
    pass


class DomainError(WalkBoundsError, ValueError):
    """An eigenvalue or argument fell outside a function's domain."""

    def __init__(self, message, value=None):
        self.value = value
        super().__init__(message)


class PremiseViolation(WalkBoundsError, ValueError):
    """A mathematical premise required by a bound does not hold."""

    def __init__(self, conditions):
        if isinstance(conditions, str):
            conditions = [conditions]
        self.conditions = list(conditions)
        super().__init__("premise violated: " + "; ".join(self.conditions))


class DisconnectedGraphError(WalkBoundsError):
    def __init__(self, components):
        self.components = [list(map(int, c)) for c in components]
        sizes = ", ".join(str(len(c)) for c in self.components)
        super().__init__(
            f"graph has {len(self.components)} connected components (sizes {sizes}); "
            f"first vertices: {[c[0] for c in self.components]}"
        )


class ConfigError(WalkBoundsError, ValueError):
    pass
