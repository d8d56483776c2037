import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, TypeVar, Union

from ..core.errors import AnnotationToolError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class CaseFailure:
    case_id: str
    error: str
    detail: str

    def to_dict(self) -> dict:
        return {"case_id": self.case_id, "status": "failed", "error": self.error, "detail": self.detail}


def map_ordered(
    fn: Callable[[T], R],
    items: Sequence[T],
    jobs: int = 1,
    key: Optional[Callable[[T], str]] = None,
) -> List[Union[R, CaseFailure]]:
    """Apply fn to every item on a bounded thread pool; results keep input order.

    A failing item becomes a CaseFailure instead of aborting the batch.
    """
    key = key or (lambda item: getattr(item, "case_id", str(item)))

    def guarded(item: T) -> Union[R, CaseFailure]:
        case_id = key(item)
        try:
            return fn(item)
        except AnnotationToolError as e:
            logger.error("Case %s failed: %s", case_id, e.detail)
            return CaseFailure(case_id, type(e).__name__, e.detail)
        except (OSError, ValueError) as e:
            logger.exception("Case %s failed unexpectedly", case_id)
            return CaseFailure(case_id, type(e).__name__, str(e))

    if jobs <= 1 or len(items) <= 1:
        return [guarded(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(guarded, items))
