"""Smoke test for the `lowband` extension module.

Build and install first, e.g. `pip install maturin && maturin develop -m crates/py/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import math

import lowband


def main():
    pnm, annotations = lowband.synthetic_scene(7, side=64, objects=3)
    assert pnm.startswith(b"P6\n64 64\n255\n")

    for codec in ("huffman", "predictive"):
        assert lowband.decode(lowband.encode(codec, pnm)) == pnm, codec

    sizes = [len(lowband.encode("dct", pnm, quality=q)) for q in (10, 50, 90)]
    assert sizes == sorted(sizes), sizes
    decoded = lowband.decode(lowband.encode("dct", pnm, quality=75))
    q = lowband.quality(pnm, decoded)
    assert 20.0 < q["psnr_db"] < 60.0, q
    assert math.isinf(lowband.quality(pnm, pnm)["psnr_db"])

    text = lowband.caption(annotations)
    assert text.endswith("detected.") and len(text.encode()) < 98, text

    assert lowband.compression_ratio_spatial(256, 128) == 25.0

    timeline = lowband.simulate(
        [("raw_image", 1_000_000), ("caption", 100), ("lossy_image", 10_000)], 10_000.0
    )
    assert [kind for _, kind, _, _ in timeline] == ["caption", "lossy_image", "raw_image"]
    assert [t for *_, t in timeline] == [0.01, 1.01, 101.01]

    try:
        lowband.encode("dct", pnm, quality=0)
    except ValueError:
        pass
    else:
        raise AssertionError("quality 0 accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
