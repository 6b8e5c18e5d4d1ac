import logging
import math
from typing import Dict, Any

def setup_logging(level: str = "INFO"):
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

def create_response(success: bool, message: str, data: Any = None) -> Dict[str, Any]:
    return {
        "success": success,
        "message": message,
        "data": data
    }

def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0

def format_float(value: float) -> str:
    """Render a float with 17 significant digits (round-trips exactly)."""
    if value is None:
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.17g}"
