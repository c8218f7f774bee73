"""End-to-end check of the Python bindings on a small tissue.

Run after `pip install --no-build-isolation ./crates/py`:

    python python/smoke_test.py
"""

import tempfile
from pathlib import Path

import numpy as np

import scarmap


def main():
    assert scarmap.reference_mix(330) == [("HeI", 107), ("HoA", 187), ("HeA", 36)]

    field, mask = scarmap.gen_substrate("HeI", seed=3, n=64, dx=0.05)
    assert field.shape == (64, 64) and field.is_spd()
    assert mask is not None and mask.dtype == np.uint8 and 0 < mask.sum() < mask.size
    scar = field.d_xx < scarmap.DEFAULT_JACCARD_THRESHOLD
    assert (scar == (mask == 1)).all()

    again, _ = scarmap.gen_substrate("HeI", seed=3, n=64, dx=0.05)
    assert np.array_equal(again.d_xx, field.d_xx)
    fibres, no_mask = scarmap.gen_substrate("HoA", seed=3, n=64, dx=0.05)
    assert no_mask is None and np.abs(fibres.d_xy).max() > 0

    with tempfile.TemporaryDirectory() as tmp:
        path = field.save(str(Path(tmp) / "f"), seed=3)
        back = scarmap.TensorField.load(path)
        assert np.allclose(back.d_xx, field.d_xx, rtol=1e-6)

    run = scarmap.simulate(field, duration_ms=60.0, electrodes=(8, 8, 0.4, 0.1))
    vm, egm = run["vm"], run["egm"]
    assert vm.shape == (60, 64, 64) and egm.shape == (60, 8, 8)
    assert np.isfinite(vm).all() and vm.max() > 0.0
    assert run["activation_coverage"] > 0.3

    # the offline integral over the stored stack reproduces the inline traces
    offline = scarmap.electrograms(vm, 0.05, 1.0, 8, 8, 0.4)
    assert np.allclose(offline, egm, rtol=1e-9, atol=1e-12)

    blocks = scarmap.extract_samples(egm, n=4, n_t=5, n_tau=10)
    assert blocks.shape == (scarmap.count_samples(4, 5, 10, 60), 4, 8, 8)
    z = scarmap.normalize(blocks[0])
    assert abs(z.mean(axis=0)).max() < 1e-9

    try:
        scarmap.simulate(field, duration_ms=10.0, dt=5.0)
    except ValueError as e:
        assert "stability" in str(e)
    else:
        raise AssertionError("unstable dt accepted")

    assert scarmap.rmse(field.d_xx, field.d_xx) == 0.0
    assert scarmap.jaccard(field, field) == 1.0
    surr = scarmap.make_surrogates(field.d_xx, seed=1, count=4)
    assert surr.shape == (4, 64, 64)
    assert np.allclose(np.sort(surr[0].ravel()), np.sort(field.d_xx.ravel()))
    test = scarmap.surrogate_test(field.d_xx, field.d_xx, count=5, seed=2)
    assert test["rmse_prediction"] == 0.0 and len(test["rmse_surrogates"]) == 5

    t, df, p = scarmap.welch_less(np.array([1.0, 1.1, 0.9]), np.array([2.0, 2.2, 1.9]))
    assert t < 0 and 0 < p < 0.01
    assert scarmap.fisher_combine([1.0, 1.0]) > 0.99

    out = np.stack([field.d_xx, field.d_yy, field.d_xy, field.d_xx, field.d_xx]).astype(np.float32)
    sim_id, avg = scarmap.average_outputs([(7, out), (7, out)], 0.05)
    assert sim_id == 7 and np.allclose(avg.d_xx, field.d_xx, rtol=1e-6)

    print("python smoke test passed")


if __name__ == "__main__":
    main()
