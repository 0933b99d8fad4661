"""Generate the toy JPEG corpus used by the tests.

100 grayscale 64x64 textures in 4 classes, one phase, stored as JPEG at
quality 90. Features are 8x8 block means (64-dim) of the decoded image, for
the original and for each candidate quality re-encoded from it.

    python tools/make_jpeg_corpus.py tests/data/jpeg_corpus
"""

import io
import json
import struct
import sys
from pathlib import Path

import numpy as np
from PIL import Image

SIZE = 64
PER_CLASS = 25
SOURCE_QUALITY = 90
QUALITIES = [10, 25, 50, 75, 90]


def texture(rng, family):
    y, x = np.mgrid[0:SIZE, 0:SIZE] / SIZE
    theta = family * np.pi / 4 + rng.normal(0, 0.15)
    freq = 3 + 2 * family + rng.normal(0, 0.5)
    u = x * np.cos(theta) + y * np.sin(theta)
    img = 128 + 60 * np.sin(2 * np.pi * freq * u + rng.uniform(0, 2 * np.pi))
    blob = rng.uniform(0.2, 0.8, size=2)
    img += 50 * np.exp(-((x - blob[0]) ** 2 + (y - blob[1]) ** 2) / 0.02)
    img += rng.normal(0, 12, size=img.shape)
    return Image.fromarray(np.clip(img, 0, 255).astype(np.uint8), mode="L")


def encode(img, q):
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=q)
    return buf.getvalue()


def features(jpeg_bytes):
    a = np.asarray(Image.open(io.BytesIO(jpeg_bytes)).convert("L"), dtype=np.float64) / 255.0
    return a.reshape(8, SIZE // 8, 8, SIZE // 8).mean(axis=(1, 3)).ravel().astype(np.float32)


def write_fmx(path, cols, ids):
    m = np.stack(cols, axis=1) if cols else np.zeros((64, 0), np.float32)
    with open(path, "wb") as f:
        f.write(b"FMX1" + struct.pack("<II", m.shape[0], m.shape[1]))
        f.write(m.astype("<f4").tobytes(order="F"))
    Path(str(path) + ".ids.json").write_text(json.dumps(ids))


def main(out):
    out = Path(out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "features").mkdir(exist_ok=True)
    rng = np.random.default_rng(20240607)
    samples, ids, cols = [], [], {q: [] for q in ["original"] + QUALITIES}
    classes = [f"tex{k}" for k in range(4)]
    for k, label in enumerate(classes):
        for i in range(PER_CLASS):
            sid = f"{label}_{i:02d}"
            data = encode(texture(rng, k), SOURCE_QUALITY)
            (out / "images" / f"{sid}.jpg").write_bytes(data)
            samples.append({"id": sid, "class": label, "phase": 0, "payload": f"images/{sid}.jpg", "bytes": len(data)})
            ids.append(sid)
            cols["original"].append(features(data))
            decoded = Image.open(io.BytesIO(data))
            for q in QUALITIES:
                cols[q].append(features(encode(decoded, q)))
    manifest = {"phases": [{"index": 0, "classes": classes}], "samples": samples}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    write_fmx(out / "features" / "original.fmx", cols["original"], ids)
    for q in QUALITIES:
        write_fmx(out / "features" / f"q{q}.fmx", cols[q], ids)
    config = {"manifest": "manifest.json", "features_dir": "features", "backend": "jpeg",
              "qualities": QUALITIES, "epsilon": 0.5, "budget_k": 20, "budget_scope": "phase"}
    (out / "config.json").write_text(json.dumps(config, indent=1) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/jpeg_corpus")
