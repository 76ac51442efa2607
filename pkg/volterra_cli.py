"""Command-line entry point.

Sets up the Python path and runs the click group from experiments/cli.py:

    python volterra_cli.py --seed 0 --out out reproduce fig5
"""

import sys
from pathlib import Path

# experiments/ uses bare-name imports, so it has to be first on the path
project_root = Path(__file__).parent
experiments_path = project_root / "experiments"
if str(experiments_path) in sys.path:
    sys.path.remove(str(experiments_path))
sys.path.insert(0, str(experiments_path))

from cli import main

if __name__ == "__main__":
    main()
