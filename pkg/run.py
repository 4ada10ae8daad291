"""Run the fluxgap command-line tool."""

import sys

from fluxgap.main import main

if __name__ == "__main__":
    sys.exit(main())
