import os

# Set env vars before any bicomb module is imported.
# bicomb.env reads them once at import time, so the thread cap and the
# default seed must be in place before the first bicomb import chain runs.
os.environ.setdefault("LOG_LEVEL", "WARNING")
os.environ.setdefault("BICOMBING_LAB_THREADS", "1")
os.environ.setdefault("BICOMBING_LAB_SEED", "7")
