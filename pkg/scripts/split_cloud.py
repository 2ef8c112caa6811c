"""Single cloud versus two clouds 318 um apart at equal atom number."""
import argparse

from waveguide_decay import CloudSpec, KernelOptions, RunSpec, make_mode_spec
from waveguide_decay.decay_analysis import make_split_spec, split_compare


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-atoms", type=int, default=7)
    ap.add_argument("--realizations", type=int, default=20_000)
    ap.add_argument("--separation", type=float, default=318e3)
    ap.add_argument("--sub-fwhm", type=float, default=None)
    ap.add_argument("--partition", default="weighted", choices=("weighted", "fixed"))
    ap.add_argument("--variant", default="full_free_space")
    ap.add_argument("--seed", type=int, default=20240609)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    single = RunSpec(CloudSpec.single(0.0, 200e3, args.n_atoms), make_mode_spec(),
                     KernelOptions(args.variant), realizations=args.realizations,
                     master_seed=args.seed)
    split = make_split_spec(single, args.separation, args.partition, args.sub_fwhm)
    c = split_compare(single, split, workers=args.workers)
    print(f"single {c.rate_single:.4f} +- {c.stderr_single:.4f}")
    print(f"split  {c.rate_split:.4f} +- {c.stderr_split:.4f}")
    print(f"difference {c.difference:+.5f} ({c.difference / c.combined_stderr:+.2f} sigma)")


if __name__ == "__main__":
    main()
