"""Cultural signatures and boundaries of geographic areas from venue check-ins."""

from .errors import (
    DataError,
    EmptyAreaError,
    ParseError,
    TaxonomyError,
    UndefinedMetric,
    UndefinedSimilarity,
)
from .model import (
    Area,
    AreaSignature,
    CheckIn,
    Taxonomy,
    UserProfile,
    class_slice,
    load_taxonomy,
    reference_taxonomy_path,
)

__version__ = "0.1.0"

__all__ = [
    "Area",
    "AreaSignature",
    "CheckIn",
    "DataError",
    "EmptyAreaError",
    "ParseError",
    "Taxonomy",
    "TaxonomyError",
    "UndefinedMetric",
    "UndefinedSimilarity",
    "UserProfile",
    "class_slice",
    "load_taxonomy",
    "reference_taxonomy_path",
    "__version__",
]
