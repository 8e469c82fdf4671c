from dotenv import load_dotenv
import os

load_dotenv()

DEFAULT_SEED = int(os.getenv("ENTANGLE_SEED", "7"))
DEFAULT_OUTPUT_DIR = os.getenv("ENTANGLE_OUTPUT_DIR", "output")
DEFAULT_COUNTS_MODE = os.getenv("ENTANGLE_COUNTS_MODE", "net")
LOG_LEVEL = os.getenv("ENTANGLE_LOG_LEVEL", "INFO")
