#!/usr/bin/env python3
"""Scripted peer for the detection exchange protocol.

usage: detector_stub.py MODE
  empty      no detections
  one        one Car at 10,10,50,30 with conf 0.9
  mixed      labels inside and outside the class set, a box past the border
  malformed  a response line that is not a record
  wrong_id   echoes a different id
  error      an error record
  silent     reads the request and never answers
  exit       exits without answering
  blobs      connected regions that differ from the image median luma
"""
import json
import sys


def read_ppm(path):
    import numpy as np

    with open(path, "rb") as f:
        data = f.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    w, h = int(tokens[1]), int(tokens[2])
    return np.frombuffer(data[pos:pos + w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def blobs(path):
    import numpy as np
    from scipy import ndimage

    rgb = read_ppm(path).astype(np.float64)
    y = np.rint(rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114)
    bg = np.median(y)
    mask = np.abs(y - bg) > 25
    labels, _ = ndimage.label(mask, structure=np.ones((3, 3)))
    out = []
    for sl in ndimage.find_objects(labels):
        ys, xs = sl
        if (ys.stop - ys.start) * (xs.stop - xs.start) < 20:
            continue
        out.append({"class": "Car", "conf": 0.9, "x0": xs.start, "y0": ys.start, "x1": xs.stop, "y1": ys.stop})
    return out


def main():
    mode = sys.argv[1]
    for line in sys.stdin:
        if mode == "exit":
            return 3
        try:
            req = json.loads(line)
            rid = req["id"]
        except (ValueError, KeyError, TypeError) as e:
            print(json.dumps({"id": None, "error": str(e)}), flush=True)
            continue
        if mode == "silent":
            continue
        if mode == "malformed":
            print('{"id": "%s", "detections": [' % rid, flush=True)
            continue
        if mode == "wrong_id":
            rid = rid + "-other"
        if mode == "error":
            print(json.dumps({"id": rid, "error": "cannot read image"}), flush=True)
            continue
        dets = []
        if mode == "one":
            dets = [{"class": "Car", "conf": 0.9, "x0": 10, "y0": 10, "x1": 50, "y1": 30}]
        elif mode == "mixed":
            dets = [
                {"class": "Car", "conf": 0.5, "x0": -5, "y0": 2, "x1": 12.4, "y1": 9.6},
                {"class": "Bicycle", "conf": 0.8, "x0": 1, "y0": 1, "x1": 4, "y1": 4},
                {"class": "Truck", "conf": 1, "x0": 30, "y0": 30, "x1": 90, "y1": 90},
                {"class": "Van", "conf": 0.7, "x0": 200, "y0": 200, "x1": 210, "y1": 210},
            ]
        elif mode == "blobs":
            dets = blobs(req["image"])
        print(json.dumps({"id": rid, "detections": dets}), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
