#!/usr/bin/env python3
"""External codec for survtx built on OpenCV: MPEG-4 Part 2 video, JPEG images.

Usage (as codec command templates):

    codec.video.encode = "python3 cv2_codec.py video-encode {input} {output} {width} {height} {fps} {pix_fmt}"
    codec.video.decode = "python3 cv2_codec.py video-decode {input} {output} {width} {height} {fps} {pix_fmt}"
    codec.image.encode = "python3 cv2_codec.py image-encode {input} {output}"
    codec.image.decode = "python3 cv2_codec.py image-decode {input} {output}"
"""

import argparse
import os
import shutil
import sys
import tempfile
from fractions import Fraction

import cv2
import numpy as np

JPEG_QUALITY = int(os.environ.get("SURVTX_JPEG_QUALITY", "90"))


def channels(pix_fmt):
    return {"gray": 1, "rgb24": 3}[pix_fmt]


def video_encode(a):
    ch = channels(a.pix_fmt)
    raw = np.fromfile(a.input, dtype=np.uint8)
    frame_bytes = a.width * a.height * ch
    if raw.size % frame_bytes:
        sys.exit(f"input size {raw.size} is not a multiple of {frame_bytes}")
    frames = raw.reshape(-1, a.height, a.width, ch)
    fps = float(Fraction(a.fps))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "out.mp4")
        writer = cv2.VideoWriter(path, cv2.VideoWriter_fourcc(*"mp4v"), fps, (a.width, a.height), True)
        if not writer.isOpened():
            sys.exit("cannot open mp4v writer")
        for f in frames:
            bgr = cv2.cvtColor(f, cv2.COLOR_GRAY2BGR) if ch == 1 else cv2.cvtColor(f, cv2.COLOR_RGB2BGR)
            writer.write(bgr)
        writer.release()
        shutil.copyfile(path, a.output)


def video_decode(a):
    ch = channels(a.pix_fmt)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "in.mp4")
        shutil.copyfile(a.input, path)
        cap = cv2.VideoCapture(path)
        out = []
        while True:
            ok, bgr = cap.read()
            if not ok:
                break
            if bgr.shape[:2] != (a.height, a.width):
                bgr = cv2.resize(bgr, (a.width, a.height), interpolation=cv2.INTER_AREA)
            if ch == 1:
                out.append(cv2.cvtColor(bgr, cv2.COLOR_BGR2GRAY))
            else:
                out.append(cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB))
        cap.release()
    if not out:
        sys.exit("no frames decoded")
    np.stack(out).astype(np.uint8).tofile(a.output)


def image_encode(a):
    img = cv2.imread(a.input, cv2.IMREAD_UNCHANGED)
    if img is None:
        sys.exit(f"cannot read {a.input}")
    ok, buf = cv2.imencode(".jpg", img, [cv2.IMWRITE_JPEG_QUALITY, JPEG_QUALITY])
    if not ok:
        sys.exit("jpeg encoding failed")
    buf.tofile(a.output)


def image_decode(a):
    data = np.fromfile(a.input, dtype=np.uint8)
    img = cv2.imdecode(data, cv2.IMREAD_UNCHANGED)
    if img is None:
        sys.exit("jpeg decoding failed")
    ok, buf = cv2.imencode(".png", img)
    if not ok:
        sys.exit("png encoding failed")
    buf.tofile(a.output)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    for name in ("video-encode", "video-decode"):
        s = sub.add_parser(name)
        s.add_argument("input")
        s.add_argument("output")
        s.add_argument("width", type=int)
        s.add_argument("height", type=int)
        s.add_argument("fps")
        s.add_argument("pix_fmt", choices=["gray", "rgb24"])
    for name in ("image-encode", "image-decode"):
        s = sub.add_parser(name)
        s.add_argument("input")
        s.add_argument("output")
    a = p.parse_args()
    {
        "video-encode": video_encode,
        "video-decode": video_decode,
        "image-encode": image_encode,
        "image-decode": image_decode,
    }[a.cmd](a)


if __name__ == "__main__":
    main()
