#!/usr/bin/env python3
"""Entry script: ``python src/run_lcqhnn.py train --dataset fashion``."""

import sys

from lcqhnn.cli import main

if __name__ == "__main__":
    sys.exit(main())
