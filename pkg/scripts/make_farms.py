#!/usr/bin/env python3
"""Regenerate the shipped farm description files under farms/."""

from pathlib import Path

from wfdem.cases import case_farm, identical_zero_network_farm, single_wt_farm
from wfdem.farm import save_farm

OUT = Path(__file__).resolve().parent.parent / "farms"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    for case in "abcd":
        save_farm(case_farm(case), OUT / f"case_{case}.json")
    save_farm(single_wt_farm(p_m0=0.9), OUT / "single_wt.json")
    save_farm(identical_zero_network_farm(33, p_m0=0.8),
              OUT / "zero_network.json")
    print(f"wrote {len(list(OUT.glob('*.json')))} farm files to {OUT}")


if __name__ == "__main__":
    main()
