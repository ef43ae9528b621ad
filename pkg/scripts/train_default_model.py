"""Train the LTC motion model at the published scale (50k/3k pairs, 120 epochs).

    python scripts/train_default_model.py --out runs/model
    python scripts/train_default_model.py --quick --out runs/model_quick
"""
import argparse
import logging
import time
from pathlib import Path

from lnnrfs.ltc import save_model
from lnnrfs.scenario import export_training_set
from lnnrfs.training import TrainingConfig, save_datasets, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/model")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quick", action="store_true", help="5000 pairs, 40 epochs")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    n_train, epochs = (5_000, 40) if args.quick else (50_000, 120)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tr, te = export_training_set(n_train, 3_000, seed=args.seed)
    save_datasets(out / "dataset.jsonl", tr, te)

    t0 = time.perf_counter()
    model, hist = train(tr, TrainingConfig(epochs=epochs, seed=args.seed), test=te)
    save_model(model, out / "model.json")
    with open(out / "loss.csv", "w") as fh:
        fh.write("epoch,train_mse,test_mse\n")
        for e, a, b in hist.rows():
            fh.write(f"{e},{a!r},{b!r}\n")
    print(f"trained in {time.perf_counter() - t0:.1f}s; test MSE "
          f"{hist.initial_test_mse:.4g} -> {hist.test_mse[-1]:.4g}")


if __name__ == "__main__":
    main()
