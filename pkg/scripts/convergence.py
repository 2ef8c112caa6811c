"""Standard-error envelope in the fit windows versus number of realizations."""
import argparse
import math

from waveguide_decay import CloudSpec, RunSpec, convergence_report, make_mode_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-atoms", type=int, default=7)
    ap.add_argument("--checkpoints", default="1000,3000,10000,30000,100000")
    ap.add_argument("--seed", type=int, default=20240607)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    checkpoints = [int(c) for c in args.checkpoints.split(",")]
    spec = RunSpec(CloudSpec.single(0.0, 200e3, args.n_atoms), make_mode_spec(),
                   realizations=checkpoints[-1], master_seed=args.seed)
    rows = convergence_report(spec, checkpoints, workers=args.workers)
    first_n, first_err = rows[0]
    print("realizations  max_stderr  sqrt-scaling prediction")
    for n, err in rows:
        print(f"{n:12d}  {err:.3e}   {first_err * math.sqrt(first_n / n):.3e}")


if __name__ == "__main__":
    main()
