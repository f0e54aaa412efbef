"""Field-order refinement study on a model file.

Solves the model at a range of field orders (geometry untouched) and
tabulates a probe displacement functional against the DOF count.  Writes
the table as CSV when --csv is given.
"""

import argparse
from pathlib import Path

from gibem.model import build_cube_model
from gibem.modelio import parse_model
from gibem.solve import refinement_study


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "model", nargs="?", type=Path, default=None,
        help="model JSON file (default: built-in unit cube)",
    )
    parser.add_argument(
        "--orders", type=int, nargs="+", default=[2, 3, 4]
    )
    parser.add_argument(
        "--probe", type=float, nargs=3, default=None,
        metavar=("PATCH", "U", "V"),
    )
    parser.add_argument("--csv", type=Path, default=None)
    args = parser.parse_args()

    model = parse_model(args.model) if args.model else build_cube_model()
    probe = None
    if args.probe is not None:
        probe = (int(args.probe[0]), args.probe[1], args.probe[2])
    rows = refinement_study(
        model, args.orders, probe=probe, csv_path=args.csv
    )

    print(f"{'order':>5} {'dof':>6} {'functional':>14} {'residual':>10}")
    for order, dof_count, functional, residual in rows:
        print(f"{order:>5} {dof_count:>6} {functional:>14.6e} {residual:>10.2e}")
    if args.csv:
        print(f"wrote {args.csv}")


if __name__ == "__main__":
    main()
