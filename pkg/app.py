"""
bdjumps - birth-death processes with bounded upward jumps
Main entry point
"""

import sys

from ui.cli import main

if __name__ == "__main__":
    sys.exit(main())
