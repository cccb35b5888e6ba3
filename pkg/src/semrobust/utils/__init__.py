from .logging import get_logger
from .logging import set_log_level
