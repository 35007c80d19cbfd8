"""CLI entry point: python -m report"""

import sys

from report.main import main

sys.exit(main())
