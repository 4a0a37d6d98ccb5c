import logging
import typing as T

from .exceptions import InclinoError

ERROR_MODES = ("ignore", "warn", "raise")


def error_handler(
    message: str,
    logger: logging.Logger,
    err: T.Union[Exception, str] = "",
    warn_extra: str = "",
    error_mode: str = "warn",
    exc_type: T.Type[InclinoError] = InclinoError,
) -> None:
    """
    Dispatch a recoverable data-quality event according to ``error_mode``.

    Parameters
    ----------
    message : str
        Description of the event.
    logger : logging.Logger
        Logger of the calling module, used in "warn" mode.
    err : Exception or str (optional)
        Underlying error, appended to the message.
    warn_extra : str (optional)
        Extra text only used when warning, e.g. what happens instead.
    error_mode : str
        "ignore": the event is dropped; "warn": the event is logged as a warning;
        "raise": ``exc_type`` is raised.
    exc_type : type (optional)
        InclinoError subclass raised in "raise" mode.
    """
    if error_mode not in ERROR_MODES:
        raise ValueError(f"error_mode must be one of {ERROR_MODES}, got {error_mode!r}")
    if err:
        message = f"{message} ({err})"
    if error_mode == "raise":
        raise exc_type(message)
    if error_mode == "warn":
        if warn_extra:
            message = f"{message} {warn_extra}"
        logger.warning(message)
