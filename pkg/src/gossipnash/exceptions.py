"""Exception hierarchy.

Every error raised by the library derives from :class:`GossipNashError` and
carries a ``category`` used by the command line to build its error record.
"""

from __future__ import annotations


class GossipNashError(Exception):
    category = "RuntimeError"


class ConfigError(GossipNashError, ValueError):
    category = "ConfigError"


class ValidationError(GossipNashError, ValueError):
    category = "ValidationError"


class EmptyGraph(ValidationError):
    pass


class DisconnectedGraph(ValidationError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        super().__init__(f"graph is disconnected, components: {self.components}")


class NotSubgraph(ValidationError):
    def __init__(self, edges):
        self.edges = sorted(edges)
        super().__init__(f"communication edges not in interference graph: {self.edges}")


class MissingTriangleCover(ValidationError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(
            f"interference edge {edge} is neither a communication edge nor "
            "covered by a communication triangle"
        )


class NotANeighbor(ValidationError):
    pass


class NotCommNeighbors(ValidationError):
    pass


class BadDistribution(ValidationError):
    pass


class InfeasibleInit(ValidationError):
    pass


class OutOfDomain(GossipNashError, ValueError):
    pass


class SingularCost(GossipNashError, ArithmeticError):
    pass


class MonotonicityViolation(GossipNashError):
    pass


class NoConvergence(GossipNashError):
    pass


class CycleDetected(GossipNashError):
    def __init__(self, period, states=None):
        self.period = period
        self.states = states
        super().__init__(f"best-response dynamics entered a cycle of period {period}")


class NotReached(GossipNashError):
    def __init__(self, message, horizon=None):
        self.horizon = horizon
        super().__init__(message)


class TargetNotReached(NotReached):
    pass
