class BarnavError(Exception):
    pass


class PoseOutOfBounds(BarnavError):
    pass


class CellOccupied(BarnavError):
    pass


class PlanningError(BarnavError):
    pass


class NoPath(PlanningError):
    pass


class StartBlocked(PlanningError):
    pass


class GoalBlocked(PlanningError):
    pass


class GenerationExhausted(BarnavError):
    pass


class RoiOutOfWindow(BarnavError):
    pass


class DegenerateTarget(BarnavError, ValueError):
    pass


class DegenerateLookahead(BarnavError, ValueError):
    pass


class InvalidOptimalTime(BarnavError, ValueError):
    pass


class InvalidPathLength(BarnavError, ValueError):
    pass
