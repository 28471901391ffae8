#!/usr/bin/env python3
"""Convert AlexNet conv weights stored in a NumPy .npz archive to EFW1.

Expected arrays (Caffe blob layout, out x in/groups x kh x kw):
  conv1_w conv1_b ... conv5_w conv5_b
Optional:
  mean   shape (3,) per-channel mean, or (3, H, W) mean image; images larger
         than 227x227 are center-cropped.

Caffe models expect BGR input; pass --bgr to reorder conv1's input channels
and the mean so the network accepts RGB images as elmdoc feeds them.
"""

import argparse
import struct
import sys

import numpy as np

# (name, stride, pad, groups) followed by the layers after it
CONVS = [("conv1", 4, 0, 1), ("conv2", 1, 2, 2), ("conv3", 1, 1, 1), ("conv4", 1, 1, 2), ("conv5", 1, 1, 2)]
AFTER = {"conv1": ["relu", "lrn", "pool"], "conv2": ["relu", "lrn", "pool"], "conv3": ["relu"],
         "conv4": ["relu"], "conv5": ["relu", "pool"]}
INPUT = (3, 227, 227)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("npz")
    ap.add_argument("output")
    ap.add_argument("--bgr", action="store_true", help="weights and mean are in BGR channel order")
    args = ap.parse_args()

    z = np.load(args.npz)
    mean_channel = np.zeros(3, np.float32)
    mean_image = None
    if "mean" in z:
        m = np.asarray(z["mean"], np.float32)
        if m.shape == (3,):
            mean_channel = m
        elif m.ndim == 3 and m.shape[0] == 3 and m.shape[1] >= 227 and m.shape[2] >= 227:
            y0, x0 = (m.shape[1] - 227) // 2, (m.shape[2] - 227) // 2
            mean_image = m[:, y0:y0 + 227, x0:x0 + 227]
            mean_channel = mean_image.mean(axis=(1, 2))
        else:
            sys.exit(f"mean has unsupported shape {m.shape}")
        if args.bgr:
            mean_channel = mean_channel[::-1]
            mean_image = None if mean_image is None else mean_image[::-1]

    layers = []
    in_c = 3
    for name, stride, pad, groups in CONVS:
        w = np.asarray(z[name + "_w"], np.float32)
        b = np.asarray(z[name + "_b"], np.float32).reshape(-1)
        out_c, per_group, kh, kw = w.shape
        if kh != kw or per_group * groups != in_c or b.size != out_c:
            sys.exit(f"{name}: weight shape {w.shape} does not fit {in_c} input channels, groups {groups}")
        if name == "conv1" and args.bgr:
            w = w[:, ::-1]
        layers.append(struct.pack("<B6I", 0, in_c, out_c, kh, stride, pad, groups) +
                      np.ascontiguousarray(w).astype("<f4").tobytes() + b.astype("<f4").tobytes())
        for extra in AFTER[name]:
            if extra == "relu":
                layers.append(struct.pack("<B", 1))
            elif extra == "pool":
                layers.append(struct.pack("<B2I", 2, 3, 2))
            else:
                layers.append(struct.pack("<BIfff", 3, 5, 1e-4, 0.75, 1.0))
        in_c = out_c

    flags = 1 if mean_image is not None else 0
    with open(args.output, "wb") as f:
        f.write(b"EFW1" + struct.pack("<6I", 1, len(layers), flags, *INPUT))
        f.write(np.ascontiguousarray(mean_channel).astype("<f4").tobytes())
        for layer in layers:
            f.write(layer)
        if mean_image is not None:
            f.write(np.ascontiguousarray(mean_image).astype("<f4").tobytes())


if __name__ == "__main__":
    main()
