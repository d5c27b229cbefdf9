#!/usr/bin/env python3
"""Convert a CheXNet DenseNet-121 checkpoint (model.pth.tar) into the tensor archive
format read by `cxr` (model.init_weights).

    python3 tools/convert_chexnet_weights.py model.pth.tar chexnet_densenet121.st

Only backbone tensors (features.*) are kept; the 14-way CheXNet head is dropped.
Prints the SHA-256 of the output for model.init_weights_sha256.
"""

import argparse
import hashlib
import json
import re
import struct
import sys

import torch

DTYPES = {
    torch.float32: ("F32", "<f4"),
    torch.float64: ("F64", "<f8"),
    torch.int64: ("I64", "<i8"),
    torch.int32: ("I32", "<i4"),
    torch.uint8: ("U8", "|u1"),
}

_PREFIXES = ("module.densenet121.", "densenet121.", "module.")
_OLD_LAYER = re.compile(r"\.(norm|relu|conv)\.(\d+)\.")


def rename(key):
    for prefix in _PREFIXES:
        if key.startswith(prefix):
            key = key[len(prefix):]
            break
    # torchvision < 0.4 named dense-layer parts "norm.1", "conv.2", ...
    return _OLD_LAYER.sub(r".\1\2.", key)


def convert_state(state):
    out = {}
    for key, value in state.items():
        name = rename(key)
        if name.startswith("features."):
            out[name] = value.detach().cpu().contiguous()
    for name in list(out):
        if name.endswith(".running_mean"):
            tracked = name[: -len("running_mean")] + "num_batches_tracked"
            out.setdefault(tracked, torch.tensor(0, dtype=torch.int64))
    return dict(sorted(out.items()))


def write_archive(path, tensors, metadata):
    header = {}
    blobs = []
    offset = 0
    for name, t in tensors.items():
        if t.dtype not in DTYPES:
            raise SystemExit(f"unsupported dtype {t.dtype} for {name}")
        tag, np_dtype = DTYPES[t.dtype]
        data = t.numpy().astype(np_dtype, copy=False).tobytes()
        header[name] = {"dtype": tag, "shape": list(t.shape), "data_offsets": [offset, offset + len(data)]}
        blobs.append(data)
        offset += len(data)
    header["__metadata__"] = metadata
    raw = json.dumps(header, separators=(",", ":")).encode()
    raw += b" " * (-len(raw) % 8)
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(raw)))
        f.write(raw)
        for b in blobs:
            f.write(b)


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("checkpoint", help="CheXNet model.pth.tar")
    ap.add_argument("output", help="archive to write")
    args = ap.parse_args(argv)

    blob = torch.load(args.checkpoint, map_location="cpu", weights_only=False)
    state = blob.get("state_dict", blob) if isinstance(blob, dict) else blob
    tensors = convert_state(state)
    if not tensors:
        raise SystemExit("no features.* tensors found; is this a DenseNet-121 checkpoint?")
    write_archive(args.output, tensors, {"source": "chexnet", "backbone": "densenet121"})
    print(f"{len(tensors)} tensors -> {args.output}")
    print(f"sha256 {sha256(args.output)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
