"""Exception types shared across the package."""


class PoolRankError(Exception):
    """Base class for all library errors."""


class EmptyPool(PoolRankError):
    """A response pool was built with no candidates."""


class EmptyContext(PoolRankError):
    """A response pool was built with no context turns."""


class DuplicateId(PoolRankError):
    """Two candidates in one pool share a candidate_id."""


class MismatchedPool(PoolRankError):
    """An annotation record references a different pool."""


class UnknownCandidate(PoolRankError):
    """A grade references a candidate_id not present in the pool."""


class DomainError(PoolRankError):
    """A numeric argument is outside its valid domain."""


class DanglingAnnotation(PoolRankError):
    """An annotation references a pool that is not in the corpus."""


class NotEnoughPositivePools(PoolRankError):
    """Too few pools with a preferred response to fill the test split."""


class MissingState(PoolRankError):
    """Dialogue state is inconsistent (last RG set but no continuation signal)."""


class BackendError(PoolRankError):
    """A scoring backend failed; message carries the backend identity."""


class TooFewRows(PoolRankError):
    """A metric matrix has fewer than two rows."""


class DegenerateGroup(PoolRankError):
    """A significance test group has fewer than two samples."""


class NoPreferredResponse(PoolRankError):
    """A test pool has an empty preferred set."""


class EmptyArm(PoolRankError):
    """An A/B arm contains no conversations."""


class UnknownRanker(PoolRankError):
    """A rank request names a ranker that is not registered."""


class RankerFailure(PoolRankError):
    """The configured ranker raised during ranking."""


class StorageError(PoolRankError):
    """The pool store could not persist a record."""


class LeaseExpired(PoolRankError):
    """An annotation was submitted after its lease lapsed."""


class InvalidGrades(PoolRankError):
    """A submitted annotation violates the grading invariants."""


class OverflowAfterTruncation(PoolRankError):
    """A candidate cannot fit in the encoder budget even with no context."""


class CorpusMissing(PoolRankError):
    """A training corpus path does not exist or is empty."""


class DivergenceDetected(PoolRankError):
    """Training loss became NaN."""
