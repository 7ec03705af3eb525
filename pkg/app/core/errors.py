# app/core/errors.py


class MatchVarError(ValueError):
    """Base class for every domain error; `code` is stable and shows up in API/CLI output."""

    code = "matchvar_error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def as_detail(self) -> dict:
        return {"code": self.code, "message": self.message}


class KOutOfRange(MatchVarError):
    code = "k_out_of_range"


class MTooLarge(MatchVarError):
    code = "m_too_large"


class GroupTooSmall(MatchVarError):
    code = "group_too_small"


class DegenerateEnsemble(MatchVarError):
    code = "degenerate_ensemble"


class MtryOutOfRange(MatchVarError):
    code = "mtry_out_of_range"


class NodesizeOutOfRange(MatchVarError):
    code = "nodesize_out_of_range"


class InvalidConfig(MatchVarError):
    code = "invalid_config"

    def __init__(self, violations: list[MatchVarError]):
        self.violations = list(violations)
        summary = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(f"{len(self.violations)} config violation(s): {summary}")

    def as_detail(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "violations": [v.as_detail() for v in self.violations],
        }


class InvalidDataset(MatchVarError):
    code = "invalid_dataset"


class NonFiniteValue(InvalidDataset):
    code = "non_finite_value"


class EmptySubsample(MatchVarError):
    code = "empty_subsample"


class DimensionMismatch(MatchVarError):
    code = "dimension_mismatch"


class NegativeVariance(MatchVarError):
    code = "negative_variance"


class IndexOutOfRange(MatchVarError):
    code = "index_out_of_range"


class CombinatorialBlowup(MatchVarError):
    code = "combinatorial_blowup"


class KTooLargeForVh(MatchVarError):
    code = "k_too_large_for_vh"


class KTooLarge(MatchVarError):
    code = "k_too_large"


class MalformedCsv(MatchVarError):
    code = "malformed_csv"


class UnknownColumn(MalformedCsv):
    code = "unknown_column"


class UnknownCategory(MalformedCsv):
    code = "unknown_category"
