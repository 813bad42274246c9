#!/usr/bin/env python3
"""
Landmark Planner - command-line runner
Thin wrapper so the planner runs from a checkout without installation
"""
import sys
from pathlib import Path


def main() -> int:
    """Put the checkout on the import path and hand over to the CLI"""
    current_dir = Path(__file__).parent
    sys.path.insert(0, str(current_dir))

    from cli.main import main as cli_main

    try:
        return cli_main(sys.argv[1:])
    except KeyboardInterrupt:
        sys.stderr.write("\n🛑 Interrupted\n")
        return 130


if __name__ == "__main__":
    sys.exit(main())
