"""Allow `python -m pairplan`."""

import sys

from .cli import main

sys.exit(main())
