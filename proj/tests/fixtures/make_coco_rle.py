"""Regenerates coco_rle.txt with the reference COCO mask codec.

Each line: height width bits counts, where bits is the row-major 0/1 string.
"""
import numpy as np
from pycocotools import mask as cocomask


def encode(m):
    rle = cocomask.encode(np.asfortranarray(m.astype(np.uint8)))
    return rle["counts"].decode("ascii")


def main():
    rng = np.random.default_rng(20240521)
    masks = []
    m = np.zeros((5, 7), dtype=np.uint8)
    m[1:4, 2:5] = 1
    masks.append(m)
    masks.append(np.zeros((3, 4), dtype=np.uint8))
    masks.append(np.ones((4, 3), dtype=np.uint8))
    masks.append(np.ones((1, 1), dtype=np.uint8))
    for _ in range(200):
        h, w = rng.integers(1, 40, size=2)
        kind = rng.integers(0, 3)
        if kind == 0:
            m = (rng.random((h, w)) < rng.random()).astype(np.uint8)
        elif kind == 1:
            m = np.zeros((h, w), dtype=np.uint8)
            y0, x0 = rng.integers(0, h), rng.integers(0, w)
            m[y0:rng.integers(y0, h) + 1, x0:rng.integers(x0, w) + 1] = 1
        else:
            yy, xx = np.mgrid[0:h, 0:w]
            cy, cx, r = rng.random() * h, rng.random() * w, rng.random() * max(h, w)
            m = (((yy - cy) ** 2 + (xx - cx) ** 2) < r * r).astype(np.uint8)
        masks.append(m)
    # Long runs exercise multi-group deltas.
    big = np.zeros((120, 300), dtype=np.uint8)
    big[20:100, 40:260] = 1
    big[50:60, 100:110] = 0
    masks.append(big)
    with open("coco_rle.txt", "w") as f:
        for m in masks:
            h, w = m.shape
            bits = "".join(str(v) for v in m.reshape(-1))
            f.write(f"{h} {w} {bits} {encode(m)}\n")


if __name__ == "__main__":
    main()
