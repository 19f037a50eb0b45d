"""Base model with common functionality."""

import json
from pathlib import Path
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

from pydantic import BaseModel, ConfigDict

from ..utils import canonical_json, read_structured_file, short_hash


class BaseConfigModel(BaseModel):
    """Base model with JSON/YAML file loading/saving capabilities."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @classmethod
    def from_json_file(cls, file_path: Path | str) -> Self:
        """Load configuration from JSON file."""
        with open(file_path, 'r') as f:
            data = json.load(f)
        return cls.model_validate(data)

    @classmethod
    def from_json_data(cls, json_data: str) -> Self:
        """Load configuration from a JSON string."""
        return cls.model_validate(json.loads(json_data))

    @classmethod
    def from_file(cls, file_path: Path | str) -> Self:
        """Load configuration from a JSON or YAML file."""
        return cls.model_validate(read_structured_file(file_path))

    def to_json_file(self, file_path: Path | str) -> None:
        """Save configuration to JSON file."""
        with open(file_path, 'w') as f:
            json.dump(self.model_dump(mode="json", exclude_none=True, by_alias=True), f, indent=2, sort_keys=True)
            f.write("\n")

    def config_hash(self) -> str:
        """Short SHA-256 of the canonical alias-keyed dump."""
        return short_hash(canonical_json(self.model_dump(mode="json", by_alias=True)))
