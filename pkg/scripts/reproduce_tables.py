"""Print the first- and second-order resource tables and the phase-estimation baseline."""

import argparse
import json

from qspert import costmodel as cm
from qspert.cli import data_path


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta-chem", type=float, default=cm.DELTA_CHEM)
    args = ap.parse_args()

    rows = json.loads(data_path("table1.json").read_text())
    systems = [cm.SystemParams.from_dict(r | {"delta_chem": args.delta_chem}) for r in rows]
    for order in ("first", "second"):
        print(f"# {order} order")
        print(cm.report_tables(systems, order)["csv"])
    print("# phase-estimation baseline")
    for sp in systems:
        pe = cm.phase_estimation_cost(sp)
        print(f"{sp.name},{pe['baseline_total']:.2e}")


if __name__ == "__main__":
    main()
