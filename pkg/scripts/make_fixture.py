"""Regenerate tests/fixtures/synthetic_returns.csv.

1567 business days x 18 series of iid Student-t(3) returns (constant
volatility), laid out like a daily FX log-return table.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import numpy as np

from svspectra.distributions import LawSpec
from svspectra.sv_simulator import ModelSpec, simulate_panel
from svspectra.volatility_field import preset_field

SEED = 20240101
P, N = 18, 1567
OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "synthetic_returns.csv"


def business_days(start: dt.date, count: int) -> list[str]:
    days, d = [], start
    while len(days) < count:
        if d.weekday() < 5:
            days.append(d.isoformat())
        d += dt.timedelta(days=1)
    return days


def main() -> None:
    spec = ModelSpec("case1_heavy_Z", LawSpec.student_t(3), LawSpec.constant(0.0), preset_field("single"), P, N, SEED)
    x = simulate_panel(spec).values
    names = [f"CCY{i + 1:02d}" for i in range(P)]
    lines = [f"# synthetic iid student_t(3) returns, seed={SEED}", ",".join(["date"] + names)]
    for date, row in zip(business_days(dt.date(2000, 1, 3), N), np.asarray(x).T.tolist()):
        lines.append(",".join([date] + [repr(v) for v in row]))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n")
    print(OUT)


if __name__ == "__main__":
    main()
