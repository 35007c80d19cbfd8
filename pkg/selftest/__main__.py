"""CLI entry point: python -m selftest"""

import sys

from selftest.main import main

sys.exit(main())
