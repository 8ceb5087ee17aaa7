"""Entry point for python -m trafficfill."""

import sys

from .cli import main

sys.exit(main())
