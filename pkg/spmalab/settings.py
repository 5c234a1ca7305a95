"""
Process-level defaults, overridable from the environment or a .env file.
"""
import os
from dotenv import load_dotenv

load_dotenv()

OUTPUT_DIR = os.getenv("SPMALAB_OUTPUT_DIR", "results")
THREADS = int(os.getenv("SPMALAB_THREADS", "0"))
LOG_LEVEL = os.getenv("SPMALAB_LOG_LEVEL", "INFO").upper()

# Tolerances shared by every module
PROB_TOL = 1e-12
ROW_SUM_TOL = 1e-10
ADV_MEAN_TOL = 1e-8
TIE_TOL = 1e-9
BOUND_SLACK = 1e-10
