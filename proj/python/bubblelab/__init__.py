"""Blow-up branches of the singular mean field equation on the unit disk."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import verify_report as _verify_report


def verify(config):
    """Run the verification diagnostics for a config dict; returns the report dict."""
    return _json.loads(_verify_report(_json.dumps(config)))
