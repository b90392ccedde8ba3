#!/usr/bin/env python3
"""
Entry script for the entrance-measure lab.

    python run_lab.py examples list
    python run_lab.py examples run bpsv
    python run_lab.py contract --schedule schedule.csv --delta 0.1 --R 20
"""

import logging
import sys

from dotenv import load_dotenv

# Load ENTRANCE_LAB_OUTPUT_DIR from .env before the configuration is built
load_dotenv()

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

from entrancelab.cli import main

if __name__ == "__main__":
    sys.exit(main())
