"""Exception hierarchy shared by every module."""


class CrlabError(Exception):
    pass


class SpecError(CrlabError):
    """A spec document or constructor argument is malformed."""


class PreconditionError(CrlabError):
    """An operation was called outside its domain."""


class InterfaceMismatch(PreconditionError):
    pass


class UnrealizablePrefix(PreconditionError):
    def __init__(self, history, step):
        self.history = history
        self.step = step
        super().__init__(f"history is not realizable: step {step} ({history[step]!r}) has zero probability")


class NoBasisInPool(PreconditionError):
    pass


class DistinctnessUnachievable(CrlabError):
    pass
