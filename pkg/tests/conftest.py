from __future__ import annotations

import json
from pathlib import Path

DATA = Path(__file__).parent / "data"


def load_oracle(name: str) -> dict:
    with open(DATA / name) as fh:
        return json.load(fh)
