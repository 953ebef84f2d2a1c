"""Exception hierarchy shared across the package."""
from __future__ import annotations


class RaxonError(Exception):
    """Base class for every error raised by this package."""


class NTriplesError(RaxonError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MergeError(RaxonError):
    pass


class EnumerationBudgetExceeded(MergeError):
    def __init__(self, needed: int, budget: int):
        super().__init__(
            f"optimal merge needs {needed} assignments in one component, budget is {budget}; use greedy"
        )
        self.needed = needed
        self.budget = budget


class StorageError(RaxonError):
    pass


class NotADatabaseError(StorageError):
    pass


class FormatVersionError(StorageError):
    pass


class CorruptFileError(StorageError):
    def __init__(self, path, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path


class UnknownColumnError(StorageError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class QueryError(RaxonError):
    pass


class QuerySyntaxError(QueryError):
    def __init__(self, position: int, message: str):
        super().__init__(f"syntax error at position {position}: {message}")
        self.position = position


class UnsupportedFeatureError(QueryError):
    def __init__(self, feature: str):
        super().__init__(f"unsupported feature: {feature}")
        self.feature = feature
