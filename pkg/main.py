"""
brainmatch - command-line entry point.

Usage:
    python main.py synth --out-dir data/synth --planted-index 17
    python main.py match --components data/synth --template data/synth/template.nii.gz --out-csv scores.csv
    python main.py bench --workers 4 --reps 5
"""

import sys

from brainmatch.cli import main

if __name__ == "__main__":
    sys.exit(main())
