"""Smoke test for the pycfkit extension module.

Build first with `cargo build --release -p cfkit-python`; the script loads
target/release/libpycfkit.so (or the debug build) when the module is not
already importable.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    try:
        import pycfkit

        return pycfkit
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libpycfkit.so", "libpycfkit.dylib", "pycfkit.dll"):
            path = ROOT / "target" / profile / name
            if path.exists():
                loader = importlib.machinery.ExtensionFileLoader("pycfkit", str(path))
                spec = importlib.util.spec_from_file_location("pycfkit", path, loader=loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                sys.modules["pycfkit"] = module
                return module
    sys.exit("pycfkit not found; run `cargo build --release -p cfkit-python` first")


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    cf = load_module()
    m = cf.RatingsMatrix(
        [("u1", "i1", 4.0), ("u1", "i2", 2.0), ("u2", "i1", 4.0),
         ("u2", "i3", 5.0), ("u3", "i2", 3.0), ("u3", "i3", 1.0)]
    )
    assert (m.n_users, m.n_items, m.n_ratings) == (3, 3, 6)
    assert m.get("u2", "i3") == 5.0 and m.get("u1", "i3") is None

    bias = cf.BiasModel.fit(m, alpha_item=0.0, alpha_user=0.0)
    assert close(bias.global_mean, 19 / 6)
    assert close(bias.item_offset("i1"), 5 / 6)
    assert close(bias.user_offset("u2"), 1.0)
    assert close(bias.predict("u1", "i3"), 2.75)

    co = cf.CoOccurrence(m)
    assert close(co.lift("i3", "i2"), 0.75)
    assert close(co.popularity("i1"), 2 / 3)

    knn = cf.ItemKnnModel.build(m)
    assert close(knn.score(m, "u2", "i2"), 0.5)
    assert [t for t, _ in knn.neighbors("i2")] == ["i3"]
    assert cf.user_knn_score(m, "u1", "i3", min_common=1) is not None

    fm = cf.FactorModel.from_factors([("u", [1.0, 1.0])], [("i", [1.0, 1.0])], sigma=[4.0, 9.0])
    assert fm.user_factors("u") == [2.0, 3.0]
    assert close(fm.score("u", "i"), 13.0)

    chain = cf.Chain(m)
    chain.add_bias(bias)
    top = chain.rank(5, user="u1")
    assert [t for t, _ in top] == ["i3"], top
    chain = cf.Chain(m)
    chain.add_lift()
    assert [t for t, _ in chain.rank(2, query="i2")] == ["i1", "i3"]

    data, truth = cf.synth(60, 40, 0.4, 0.3, seed=3, latent_rank=2)
    assert len(truth) == 60 * 40
    train, test = cf.split(data, 0.2, 1)
    assert train.n_ratings + len(test) == data.n_ratings
    mf = cf.FactorModel.train(train, k=4, epochs=20, seed=7)
    chain = cf.Chain(train)
    chain.add_factors(mf)
    chain.add_bias(cf.BiasModel.fit(train))
    report = chain.evaluate(test)
    assert report["n"] == len(test) and 0 < report["rmse"] < 2 and report["mae"] <= report["rmse"]

    with tempfile.TemporaryDirectory() as tmp:
        path = str(pathlib.Path(tmp) / "mf.txt")
        mf.save(path)
        back = cf.FactorModel.load(path)
        assert all(back.score(u, i) == mf.score(u, i) for u, i, _ in test[:50])
        csv = str(pathlib.Path(tmp) / "r.csv")
        data.write_csv(csv)
        assert sorted(cf.RatingsMatrix.read_csv(csv).triples()) == sorted(data.triples())

    try:
        cf.RatingsMatrix([("u", "i", math.nan)])
    except ValueError:
        pass
    else:
        raise AssertionError("non-finite rating accepted")

    print(f"pycfkit smoke test passed (rmse={report['rmse']:.4f})")


if __name__ == "__main__":
    main()
