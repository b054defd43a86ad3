"""Run every TOML in configs/ through the CLI and compare exit statuses.

    python scripts/run_configs.py [--out runs/]
"""

import argparse
import contextlib
import io
import time
from pathlib import Path

from papangelou.cli import main

ROOT = Path(__file__).resolve().parent.parent
EXPECTED = {"remark": 1, "gnz_mismatch": 1, "asymmetric": 1, "remark_transform": 1, "bad_z": 2}


def run(out: Path) -> int:
    failures = 0
    for path in sorted((ROOT / "configs").glob("*.toml")):
        t0 = time.perf_counter()
        err = io.StringIO()
        with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(err):
            code = main(["run", "--config", str(path), "--out", str(out / path.stem)])
        want = EXPECTED.get(path.stem, 0)
        ok = code == want
        failures += not ok
        print(f"{'ok  ' if ok else 'FAIL'} {path.stem:24s} exit {code} (expected {want}) "
              f"{time.perf_counter() - t0:6.2f}s")
    return failures


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "runs")
    raise SystemExit(1 if run(ap.parse_args().out) else 0)
