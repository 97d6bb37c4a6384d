"""Module entry point: python -m mott1d."""

import sys

from .cli import main

sys.exit(main())
