# tdec_pipeline.py
"""
TDEC coordination pipeline - command-line entry point

Run with: python tdec_pipeline.py <command> [options]
  e.g.    python tdec_pipeline.py synth --preset tv --out-dir run1
          python tdec_pipeline.py corr --preset tv --out-dir run1 --cohort run1/cohort_TV.csv
"""

import os
import sys

# Make the tdec_coordination package importable when run from any directory
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def main():
    from tdec_coordination.cli import main as cli_main
    return cli_main()


if __name__ == '__main__':
    sys.exit(main())
