"""Run the default verify experiment and write results/verify.csv plus its JSON sidecar.

Extra arguments are passed through to the CLI, e.g. `--seed 3` or `--threads 4`.
"""

import sys
from pathlib import Path

from ormlab.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    argv = ["verify", "--config", str(ROOT / "configs" / "verify.json"), "--out", str(ROOT / "results" / "verify.csv")]
    sys.exit(main(argv + sys.argv[1:]))
