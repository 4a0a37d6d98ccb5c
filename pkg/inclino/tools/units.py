import logging
import re
import typing as T

import cf_units

from .exceptions import ConfigError

LOG = logging.getLogger(__name__)

# Spellings seen in instrument exports and hand written configs which are
# not recognised by cf-units. Can be extended by callers.
COMMON_UNIT_NAMES = {
    "d": "day",
    "days": "day",
    "hr": "hour",
    "hrs": "hour",
    "wk": "week",
    "wks": "week",
    "mm per m": "mm/m",
    "mm per metre": "mm/m",
    "mm per meter": "mm/m",
    "mm/metre": "mm/m",
    "-": "1",
    "dimensionless": "1",
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def common_unit_fixes(
    units: str, common_unit_names: T.Union[T.Dict[str, str], None] = None
) -> str:
    """Map a unit spelling onto one recognised by cf-units."""
    if common_unit_names is None:
        common_unit_names = COMMON_UNIT_NAMES
    return common_unit_names.get(units.strip(), units.strip())


def convert_units(
    value: float,
    source_units: str,
    target_units: str,
    common_unit_names: T.Union[T.Dict[str, str], None] = None,
) -> float:
    """
    Convert a scalar between units using cf-units relationships.

    Parameters
    ----------
    value : float
        Value expressed in ``source_units``.
    source_units : str
        Units of the value.
    target_units : str
        Units to convert to.

    Returns
    -------
    float
        The value expressed in ``target_units``.
    """
    source = common_unit_fixes(source_units, common_unit_names)
    target = common_unit_fixes(target_units, common_unit_names)
    if source == target:
        return float(value)
    try:
        _source = cf_units.Unit(source)
        _target = cf_units.Unit(target)
    except ValueError as err:
        raise ConfigError(f"Units not recognised by cf-units: {source!r} -> {target!r} ({err})")
    if not _source.is_convertible(_target):
        raise ConfigError(f"Cannot convert {source_units!r} to {target_units!r}")
    return float(_source.convert(float(value), _target))


def parse_quantity(
    value: T.Union[str, float, int],
    target_units: str,
    name: str = "value",
    common_unit_names: T.Union[T.Dict[str, str], None] = None,
) -> float:
    """
    Read a configuration quantity given either as a bare number, taken to be in
    ``target_units``, or as a string ``"<number> <units>"``.
    """
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a number or quantity string, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{name} must be a number or quantity string, got {value!r}")
    match = _QUANTITY.match(value)
    if match is None:
        raise ConfigError(f"{name}: cannot read quantity {value!r}")
    number, units = match.groups()
    if not units:
        return float(number)
    converted = convert_units(float(number), units, target_units, common_unit_names)
    LOG.debug(f"{name}: {value!r} read as {converted} {target_units}")
    return converted
