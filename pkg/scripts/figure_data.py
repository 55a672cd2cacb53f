"""Emit the data behind every figure as CSV files, one CLI run per file.

    python3 scripts/figure_data.py [outdir]
"""
import sys
from pathlib import Path

from freerider.cli import main

RECIPES = {
    "fig02_resident_pattern": ["resident-pattern", "--c", "1.5", "--T", "2"],
    "fig05_07_mutant_pattern_c3": ["mutant-pattern", "--c", "3", "--eps", "0", "--T", "4"],
    "fig08_season_A": ["season", "--c", "3", "--T", "0.9"],
    "fig08_season_B": ["season", "--c", "3", "--T", "2"],
    "fig08_season_C": ["season", "--c", "3", "--T", "4"],
    "fig09_mimic_c3_T4": ["season", "--c", "3", "--T", "4", "--policy", "mimic"],
    "fig10_value_sweep": ["value-sweep", "--c", "3", "--T-min", "0.05", "--T-max", "6", "--n", "120"],
    "fig11_mutant_pattern_c1.25": ["mutant-pattern", "--c", "1.25", "--eps", "0.35", "--T", "4"],
    "fig12_13_invasion": ["invasion", "--seasons", "200"],
}


def run(outdir: Path) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name, argv in RECIPES.items():
        path = outdir / f"{name}.csv"
        code = main([*argv, "--out", str(path)])
        print(f"{code}  {path}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run(Path(sys.argv[1] if len(sys.argv) > 1 else "figure_data")))
