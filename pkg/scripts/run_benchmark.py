"""Generate a test set and score dirty, GS-50, GS-100 and gradient refinement.

    python3 scripts/run_benchmark.py --out runs/bench --count 32 --noise clean:1
"""

import argparse
import tempfile
from pathlib import Path

from holotwin.dataset import generate_dataset, load_records
from holotwin.metrics import default_workers, evaluate_method, write_aggregate_csv, write_per_sample_csv
from holotwin.reconstruction import parse_method


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/bench")
    ap.add_argument("--data", help="existing dataset; generated into a temp dir when omitted")
    ap.add_argument("--count", type=int, default=32, help="test samples to generate")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", default="uniform", help="noise distribution, e.g. clean:1")
    ap.add_argument("--methods", default="dirty,gs:50,gs:100,grad:200")
    ap.add_argument("--workers", type=int, default=default_workers())
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        data = args.data
        if data is None:
            data = tmp
            generate_dataset(data, count=1, seed=args.seed, test_count=args.count, noise_dist=args.noise, workers=args.workers)
        records = load_records(data, "test")
        results = []
        for spec in args.methods.split(","):
            m = parse_method(spec)
            res = evaluate_method(m, records, name=m.name, workers=args.workers)
            results.append(res)
            mu = res.mean
            print(
                f"{res.name:>9}  phase PSNR {mu['psnr_phase']:6.2f}  phase SSIM {mu['ssim_phase']:.4f}  "
                f"amp SSIM {mu['ssim_amp']:.4f}  B/S {mu['bs_ratio']:.4f}  {res.mean_time_ms:7.1f} ms"
            )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_aggregate_csv(out / "metrics_aggregate.csv", results)
    write_per_sample_csv(out / "metrics_per_sample.csv", results)
    print(f"wrote {out}/metrics_aggregate.csv")


if __name__ == "__main__":
    main()
