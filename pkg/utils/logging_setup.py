import logging
import sys

from config.config import LOG_LEVEL

_configured = False


def setup_logging():
    global _configured
    if not _configured:
        # stdout is reserved for reports
        logging.basicConfig(
            level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            stream=sys.stderr,
        )

        # Quiet third-party loggers
        logging.getLogger('matplotlib').setLevel(logging.WARNING)
        logging.getLogger('numba').setLevel(logging.WARNING)
        logging.getLogger('urllib3').setLevel(logging.WARNING)
        _configured = True

    return logging.getLogger(__name__)
