from .helpers import setup_logging, create_response, is_power_of_two, format_float

__all__ = ["setup_logging", "create_response", "is_power_of_two", "format_float"]
