"""
Main Execution Script
=====================

Command-line entry point of the Spherical Factor Model Toolkit.

    python main.py simulate --scenario sphere2 --seed 1 --output-dir data/sphere2
    python main.py fit --data data/sphere2/votes.csv -K 2 --chains 2 --seed 7
    python main.py diagnose --data data/sphere2/votes.csv --chains output/chain_*.csv
"""

import sys
import os

# Add src directory to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from modules.cli import main


if __name__ == "__main__":
    sys.exit(main())
