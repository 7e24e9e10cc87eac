"""HTTP service exposing the forecasting and keyword engines.

The CLI is a thin client of this app: every subcommand maps onto one
endpoint, requests carry file contents rather than paths, and package
errors surface as typed JSON bodies with stable status codes.
"""

from .app import create_app

__all__ = ["create_app"]
