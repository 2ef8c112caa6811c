"""Fast-window rate versus atom number (and OD) with a weighted linear fit."""
import argparse
import os

from waveguide_decay import CloudSpec, RunSpec, make_mode_spec, sweep_rate_vs_n
from waveguide_decay.io import SWEEP_COLUMNS, write_json, write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=6)
    ap.add_argument("--realizations", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=20240607)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="output/rate_sweep")
    args = ap.parse_args()

    base = RunSpec(CloudSpec.single(0.0, 200e3, 1), make_mode_spec(),
                   realizations=args.realizations, master_seed=args.seed)
    res = sweep_rate_vs_n(base, range(1, args.n_max + 1), workers=args.workers,
                          progress=lambda n, f: print(f"N={n}: {f.rate:.4f} +- {f.rate_stderr:.4f}"))
    line = res.line
    print(f"slope {line.slope:.5f} +- {line.slope_stderr:.5f}, intercept {line.intercept:.4f}, "
          f"chi2_red {line.chi2_reduced:.2f}")
    os.makedirs(args.out, exist_ok=True)
    write_table(os.path.join(args.out, "sweep.csv"), SWEEP_COLUMNS,
                zip(res.n_atoms, res.od_equivalent, res.rates, res.rate_stderr))
    write_json(os.path.join(args.out, "sweep_fit.json"), {
        "slope": line.slope, "slope_stderr": line.slope_stderr, "intercept": line.intercept,
        "intercept_stderr": line.intercept_stderr, "chi2_reduced": line.chi2_reduced})


if __name__ == "__main__":
    main()
