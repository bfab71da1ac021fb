#!/usr/bin/env python3
"""Smoke test for the irissr_py extension module.

Builds nothing itself: run `cargo build -p irissr-py` first, then
`python3 python/smoke_test.py`. The script copies the built cdylib into a
temporary directory under an importable name and exercises the image,
metric, iris, and synthesis surfaces end to end.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def import_extension():
    candidates = [
        REPO_ROOT / "target" / profile / name
        for profile in ("debug", "release")
        for name in ("libirissr_py.so", "libirissr_py.dylib", "irissr_py.dll")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("error: extension not built; run `cargo build -p irissr-py` first")
    stage = Path(tempfile.mkdtemp(prefix="irissr_py_"))
    suffix = ".pyd" if built.suffix == ".dll" else ".so"
    shutil.copy2(built, stage / f"irissr_py{suffix}")
    sys.path.insert(0, str(stage))
    import irissr_py

    return irissr_py


def main():
    ir = import_extension()
    checks = 0

    def check(name, ok):
        nonlocal checks
        checks += 1
        if not ok:
            sys.exit(f"smoke test failed at: {name}")
        print(f"  ok: {name}")

    # Synthetic eye rendering and image plumbing.
    img, ann = ir.synth_eye(eye=0, variant=0, seed=3)
    check("synth_eye shape", img.width == 340 and img.height == 320)
    check("annotation circles nest", ann.pupil[2] < ann.sclera[2])

    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "eye.png"
        img.save(path)
        reloaded = ir.Image.load(path)
        max_err = max(
            abs(a - b) for a, b in zip(img.data()[:2000], reloaded.data()[:2000])
        )
        check("png round trip within 8-bit step", max_err <= 1.0 / 255.0)

    half = img.resize(170, 160)
    check("resize", half.width == 170 and half.height == 160)
    degraded = img.degrade(4)
    check("degrade keeps size", degraded.width == 340 and degraded.height == 320)

    # Quality metrics: identities and a degradation ordering.
    check("psnr identity", math.isinf(ir.psnr(img, img)))
    check("ssim identity", abs(ir.ssim(img, img) - 1.0) <= 1e-9)
    check("vif identity", abs(ir.vif(img, img) - 1.0) <= 1e-9)
    p, s, v = ir.quality(img, degraded)
    check("degraded scores finite and below identity", p < 60 and s < 1.0 and v < 1.0)

    rec2 = ir.reconstruct(img, "bicubic", 2)
    rec8 = ir.reconstruct(img, "bicubic", 8)
    check("bicubic factor ordering", ir.psnr(img, rec2) > ir.psnr(img, rec8))

    # Iris pipeline: crop, unwrap, encode, match.
    pre = ir.preprocess(img, ann)
    check("preprocess returns a crop", pre is not None)
    crop, crop_ann = pre
    check("crop is 231x231", crop.width == 231 and crop.height == 231)
    norm = ir.unwrap_iris(crop, crop_ann)
    check("strip is 240x20", norm.strip.width == 240 and norm.strip.height == 20)
    code = ir.encode(norm)
    check("code usable", code.usable())
    check("self distance", ir.hamming_distance(code, code) == 0.0)
    flipped = ir.IrisCode([not b for b in code.bits], code.mask)
    check("complement distance", ir.hamming_distance(code, flipped, max_shift=0) == 1.0)

    img2, ann2 = ir.synth_eye(eye=1, variant=0, seed=3)
    pre2 = ir.preprocess(img2, ann2)
    check("second eye preprocesses", pre2 is not None)
    norm2 = ir.unwrap_iris(*pre2)
    other = ir.encode(norm2)
    d_other = ir.hamming_distance(code, other)
    check("different eyes are far apart", d_other > 0.2)

    eer, threshold = ir.compute_eer([0.1, 0.3], [0.2, 0.4])
    check("eer worked example", eer == 0.25 and threshold == 0.25)

    # Corpus generation.
    with tempfile.TemporaryDirectory() as td:
        n = ir.generate_corpus(Path(td) / "corpus", eyes=2, images_per_eye=2, seed=9)
        check("corpus image count", n == 4)
        check(
            "corpus annotations exist",
            (Path(td) / "corpus" / "annotations.csv").exists(),
        )

    print(f"smoke test passed ({checks} checks)")


if __name__ == "__main__":
    main()
