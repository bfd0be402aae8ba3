"""
Entry point for running movmax as a module.

Usage:
    python -m movmax [options] COMMAND ...
"""

import sys
from movmax.cli import main

if __name__ == "__main__":
    sys.exit(main())
