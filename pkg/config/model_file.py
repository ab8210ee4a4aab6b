"""JSON model files.

    {"R": 2,
     "prefix": [[0, 1, 1], [4, 1, 1]],
     "tail": {"kind": "constant"}}

Each row is (mu, lambda1, ..., lambdaR). A constant tail repeats the last
prefix row, or the single row in `tail.block` if one is given; a periodic
tail cycles through `tail.block`.
"""

import json
from pathlib import Path
from typing import Annotated, Any, List, Literal, Optional, Sequence, Union

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from config.settings import settings
from core.errors import ModelFileError, ParseError, SchemaError
from core.model import ProcessModel, RateProfile, TailRule, build_model

Rate = Annotated[float, Field(ge=0, allow_inf_nan=False)]


class TailSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["constant", "periodic"] = "constant"
    block: Optional[List[List[Rate]]] = None


class ModelFileSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    R: int = Field(..., ge=1, description="Largest upward jump")
    prefix: List[List[Rate]] = Field(..., min_length=1, description="Rate rows for sites 0..L-1")
    tail: TailSpec = Field(default_factory=TailSpec)


def _rate_name(k: int) -> str:
    return "mu" if k == 0 else f"lambda{k}"


def render_location(loc: Sequence[Union[str, int]]) -> str:
    """('prefix', 1, 0) -> 'prefix[1].mu'; ('tail', 'block', 0, 2) -> 'tail.block[0].lambda2'."""
    out = ""
    rows_seen = 0
    for part in loc:
        if isinstance(part, int):
            if rows_seen == 0:
                out += f"[{part}]"
            else:
                out += f".{_rate_name(part)}"
            rows_seen += 1
        else:
            out += f".{part}" if out else part
            rows_seen = 0
    return out


def check_file(path: Union[str, Path]) -> Path:
    """Resolve and vet a model file before reading it."""
    try:
        full_path = Path(path).expanduser().resolve()
    except (OSError, RuntimeError) as e:
        raise ModelFileError(f"Invalid path {path}: {e}")
    if not full_path.exists():
        raise ModelFileError(f"Model file not found: {path}")
    if not full_path.is_file():
        raise ModelFileError(f"Not a file: {path}")
    try:
        size_mb = full_path.stat().st_size / (1024 * 1024)
    except OSError as e:
        raise ModelFileError(f"Cannot stat {path}: {e.strerror or e}")
    if size_mb > settings.MAX_MODEL_FILE_MB:
        raise ModelFileError(f"Model file too large: {size_mb:.2f}MB (max {settings.MAX_MODEL_FILE_MB}MB)")
    return full_path


def _check_rows(rows: Sequence[Sequence[float]], R: int, where: str) -> None:
    for i, row in enumerate(rows):
        if len(row) != R + 1:
            raise SchemaError(f"{where}[{i}]", f"expected {R + 1} entries (mu + {R} lambdas), got {len(row)}")


def profile_from_data(data: Any) -> RateProfile:
    """Validate decoded JSON against the schema and convert it to a RateProfile."""
    try:
        spec = ModelFileSpec.model_validate(data)
    except ValidationError as e:
        errors = e.errors()
        for error in errors:
            logger.error(f"   - {render_location(error['loc']) or '<root>'}: {error['msg']}")
        first = errors[0]
        raise SchemaError(render_location(first["loc"]) or "<root>", first["msg"])

    _check_rows(spec.prefix, spec.R, "prefix")
    block = spec.tail.block or []
    _check_rows(block, spec.R, "tail.block")
    if spec.tail.kind == "periodic" and not block:
        raise SchemaError("tail.block", "a periodic tail needs at least one row")
    if spec.tail.kind == "constant" and len(block) > 1:
        raise SchemaError("tail.block", "a constant tail takes at most one row")

    return RateProfile(
        R=spec.R,
        prefix=tuple(tuple(row) for row in spec.prefix),
        tail=TailRule(kind=spec.tail.kind, block=tuple(tuple(row) for row in block)),
    )


def parse_model_file(path: Union[str, Path]) -> RateProfile:
    """
    Read a model file into a RateProfile.

    Raises:
        ModelFileError: missing, unreadable, not a regular file, or too large.
        ParseError: invalid UTF-8 or invalid JSON, located as "line L, column C".
        SchemaError: valid JSON that does not match the schema.
    """
    full_path = check_file(path)
    try:
        raw = full_path.read_bytes()
    except OSError as e:
        raise ModelFileError(f"Cannot read {path}: {e.strerror or e}")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        line = raw.count(b"\n", 0, e.start) + 1
        column = e.start - raw.rfind(b"\n", 0, e.start)
        raise ParseError(f"line {line}, column {column}", f"invalid UTF-8 byte 0x{raw[e.start]:02x}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}", e.msg)
    except RecursionError:
        raise ParseError("line 1, column 1", "document is nested too deeply")
    profile = profile_from_data(data)
    logger.debug(f"Parsed {full_path.name}: R={profile.R}, {len(profile.prefix)} prefix rows, {profile.tail.kind} tail")
    return profile


def load_model(path: Union[str, Path]) -> ProcessModel:
    return build_model(parse_model_file(path))

