# app/schemas/csv_schema.py
from enum import Enum

from pydantic import BaseModel, RootModel, model_validator


class ColumnRole(str, Enum):
    FEATURE = "feature"
    RESPONSE = "response"


class ColumnKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


class MissingPolicy(str, Enum):
    ERROR = "error"
    MEAN = "mean"
    ZERO = "zero"


class ColumnSpec(BaseModel):
    role: ColumnRole
    kind: ColumnKind = ColumnKind.NUMERIC
    missing: MissingPolicy = MissingPolicy.ERROR

    @model_validator(mode="after")
    def _check_policy(self):
        if self.kind is ColumnKind.CATEGORICAL and self.missing is MissingPolicy.MEAN:
            raise ValueError("categorical columns cannot be mean-imputed")
        if self.role is ColumnRole.RESPONSE and self.kind is ColumnKind.CATEGORICAL:
            raise ValueError("the response column must be numeric")
        return self


class CsvSchema(RootModel[dict[str, ColumnSpec]]):
    """{column: {role, kind, missing}}; columns the schema does not name are ignored."""

    @model_validator(mode="after")
    def _check_roles(self):
        responses = [name for name, spec in self.root.items() if spec.role is ColumnRole.RESPONSE]
        if len(responses) != 1:
            raise ValueError(f"schema needs exactly one response column, found {len(responses)}")
        if not self.feature_columns:
            raise ValueError("schema needs at least one feature column")
        return self

    @property
    def feature_columns(self) -> list[str]:
        return [name for name, spec in self.root.items() if spec.role is ColumnRole.FEATURE]

    @property
    def response_column(self) -> str:
        return next(name for name, spec in self.root.items() if spec.role is ColumnRole.RESPONSE)

    def __getitem__(self, name: str) -> ColumnSpec:
        return self.root[name]
