import logging

logger = logging.getLogger(__name__)


def backoff_handler_generic(details):
    """Log backoff retry attempts."""
    logger.warning(
        f"Backing off {details['wait']:.1f} seconds after {details['tries']} tries "
        f"calling function {details['target'].__name__} with args {details['args']}"
    )


def format_grid(matrix) -> str:
    """Integer matrix as whitespace-separated rows."""
    return "\n".join(" ".join(str(int(v)) for v in row) for row in matrix)
