"""Dump every scenario preset as YAML (SI numbers) into a directory."""
import argparse
from pathlib import Path

from dlmemory.config import SCENARIOS, serialize
from dlmemory.scenarios import preset_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="presets")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in SCENARIOS:
        (out / f"{name}.yaml").write_text(serialize(preset_config(name)))
        print(out / f"{name}.yaml")


if __name__ == "__main__":
    main()
