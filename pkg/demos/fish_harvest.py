"""Stage-structured fish stock: harvest sweep and yield/resilience trade-off.

Run with ``python3 demos/fish_harvest.py [out_dir]``. Writes ``fish_sweep.csv`` and
``fish_pareto.csv``.
"""

import sys
from pathlib import Path

from basinmeasures import harness
from basinmeasures.config import RunConfig
from basinmeasures.models import fish


def main(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    thr = fish.extinction_threshold("equal")
    print(f"equal harvesting drives the stock extinct above h={thr:.4f}")

    # equal harvest on juveniles and adults: both parameters tied to the swept value
    cfg = RunConfig.from_dict({"model": {"name": "fish"},
                               "sweep": {"param": ["h_J", "h_A"], "start": 0.0, "stop": 2.4, "step": 0.2,
                                         "count": 500}})
    rows = harness.run_sweep(cfg)
    harness.write_reports_csv(out / "fish_sweep.csv", rows)
    for r in rows:
        if r.p_hat is None:
            print(f"  h={r.params['h_J']:.1f}  {r.status}")
        else:
            print(f"  h={r.params['h_J']:.1f}  p_hat={r.p_hat:.3f}  r_hat={r.r_hat:.4f}  p_tau={r.p_tau:.3f}")

    # same yield, different strategy: compare resilience at matching yields
    cfg = RunConfig.from_dict({"model": {"name": "fish"}, "pareto": {"count": 500, "strategies": {
        "equal": {"start": 0.0, "stop": 1.2, "step": 0.2},
        "adult": {"values": [0, 2, 5, 10, 20, 35, 50]},
    }}})
    rows = harness.run_pareto(cfg)
    harness.write_reports_csv(out / "fish_pareto.csv", rows)
    for r in rows:
        if r.r_hat is not None:
            print(f"  {r.params['strategy']:<5} t={r.params['t']:<5g} yield={r.params['yield']:.4f}  "
                  f"r_hat={r.r_hat:.4f}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out"))
