import json
import hashlib
import logging
import numpy as np

from enum import Enum
from typing import Any, List, Sequence

logger = logging.getLogger(__name__)


class ExplicitEnum(str, Enum):
    @classmethod
    def _missing_(cls, value):
        raise ValueError(
            f"{value} is not a valid {cls.__name__}, please select one of {list(cls._value2member_map_.keys())}"
        )


def split_data(data: Sequence, k: int) -> List[Sequence]:
    """Split `data` into at most `k` contiguous chunks whose sizes differ by at most one."""
    n = len(data)
    if n == 0:
        return []
    if n < k:
        logger.debug(f"only {n} items for {k} chunks, using {n} chunks")
        k = n

    quotient = n // k
    remainder = n % k

    result = []
    start = 0
    for i in range(k):
        if i < remainder:
            end = start + quotient + 1
        else:
            end = start + quotient

        result.append(data[start:end])
        start = end

    return result


def to_jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(",", ":"))


def content_hash(value: Any) -> str:
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


def render_table(rows: Sequence[dict], columns: Sequence[str], title: str = "", air_space: int = 5, first_indent: int = 10) -> str:
    """Fixed-width text table, one centred cell per column, rows numbered on the left.

    example:

        Points:
                      K     |     P     |    mean     |
                  -------------------------------------
           (0)       100    |     1     |   0.4213    |
                  -------------------------------------
    """
    widths = {
        column: max([len(column)] + [len(str(row.get(column, ""))) for row in rows]) + air_space for column in columns
    }
    n_character_line = sum(widths.values()) + len(columns)

    table = f"{title}:\n" if title else ""
    table += " " * first_indent
    table += "".join(column.center(widths[column]) + "|" for column in columns) + "\n"
    table += " " * first_indent + "-" * n_character_line + "\n"
    for i, row in enumerate(rows):
        table += f"({i})".center(first_indent)
        table += "".join(str(row.get(column, "")).center(widths[column]) + "|" for column in columns) + "\n"
    table += " " * first_indent + "-" * n_character_line + "\n"
    return table
