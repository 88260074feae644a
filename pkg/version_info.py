"""Version and naming constants."""
VERSION = "0.3.0"
TOOL_NAME = "twodcs-sim"
