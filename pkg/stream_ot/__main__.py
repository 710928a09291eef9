"""
Main Application Entry Point
============================

Runs the stream_ot command line: `python -m stream_ot <subcommand> ...`
"""

import sys

from stream_ot.cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
