"""Exception hierarchy.

Every error carries the name of the module that raised it so the CLI can
print a single machine-parsable line.
"""


class PtwellError(Exception):
    module = "ptwell"

    @property
    def kind(self) -> str:
        return type(self).__name__


class PotentialError(PtwellError):
    module = "potentials"


class GridNotInvariant(PotentialError):
    pass


class WellCountMismatch(PotentialError):
    pass


class WellTouchesBoundary(PotentialError):
    pass


class WellsNotExchanged(PotentialError):
    pass


class BallsOverlap(PotentialError):
    pass


class FillInsufficient(PotentialError):
    pass


class AgmonError(PtwellError):
    module = "agmon"


class EmptySource(AgmonError):
    pass


class GridMismatch(AgmonError):
    pass


class SpectraError(PtwellError):
    module = "spectra"


class WindowInvalid(SpectraError):
    pass


class ConvergenceFailure(SpectraError):
    pass


class WindowBoundaryHit(SpectraError):
    pass


class SolveFailure(SpectraError):
    pass


class NonIdempotent(SpectraError):
    pass


class ReductionError(PtwellError):
    module = "reduction"


class NotSimple(ReductionError):
    pass


class GramIllConditioned(ReductionError):
    pass


class DualIllConditioned(ReductionError):
    pass


class SymmetryViolation(ReductionError):
    pass


class EpsilonTooLarge(ReductionError):
    pass


class NonPositiveWeight(ReductionError):
    pass


class BifurcationError(PtwellError):
    module = "bifurcation"


class BracketInvalid(BifurcationError):
    pass


class ConfigInvalid(PtwellError):
    module = "cli"

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
