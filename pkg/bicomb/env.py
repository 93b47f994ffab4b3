import logging
import os

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)


def _positive_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"{name}={raw!r} is not an integer, falling back to 1")
        return 1
    if value < 1:
        logger.warning(f"{name}={raw!r} must be positive, falling back to 1")
        return 1
    return value


log_level = os.getenv("LOG_LEVEL", "INFO").upper()
thread_cap = _positive_int("BICOMBING_LAB_THREADS", 4)
default_tol = float(os.getenv("BICOMBING_LAB_TOL", "1e-9"))
certificate_tol = float(os.getenv("BICOMBING_LAB_CERT_TOL", "1e-7"))
max_chart_seq_len = _positive_int("BICOMBING_LAB_MAX_CHART_SEQ_LEN", 8)
default_seed = int(os.getenv("BICOMBING_LAB_SEED", "7"))
