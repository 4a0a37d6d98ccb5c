from . import exceptions, linalg
from .error_handler import ERROR_MODES, error_handler
from .units import COMMON_UNIT_NAMES, common_unit_fixes, convert_units, parse_quantity

__all__ = [
    "common_unit_fixes",
    "convert_units",
    "error_handler",
    "exceptions",
    "linalg",
    "parse_quantity",
    "COMMON_UNIT_NAMES",
    "ERROR_MODES",
]
