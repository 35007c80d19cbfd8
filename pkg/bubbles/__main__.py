"""CLI entry point: python -m bubbles"""

import sys
from bubbles.main import main

sys.exit(main())
