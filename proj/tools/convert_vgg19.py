#!/usr/bin/env python3
"""Convert a torchvision VGG-19 state dict into the checkpoint format read by
Vgg19FeatureBackend::load_weights.

    python3 tools/convert_vgg19.py vgg19-dcbb9e9d.pth vgg19.ckpt

Input: a state dict (or a full model) saved with torch.save, keyed
features.<n>.weight / features.<n>.bias. Classifier weights are ignored.
"""

import argparse
import struct
import sys

import torch

CONV_LAYERS = [0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25, 28, 30, 32, 34]
MEAN = [0.485, 0.456, 0.406]
STD = [0.229, 0.224, 0.225]


def load_state_dict(path):
    obj = torch.load(path, map_location="cpu", weights_only=False)
    if hasattr(obj, "state_dict"):
        obj = obj.state_dict()
    if not isinstance(obj, dict):
        raise SystemExit(f"{path}: expected a state dict, got {type(obj).__name__}")
    return obj


def write_record(out, name, tensor):
    t = tensor.detach().to(torch.float32).contiguous()
    encoded = name.encode()
    out.write(struct.pack(">I", len(encoded)))
    out.write(encoded)
    out.write(struct.pack(">BB", 0, t.dim()))
    for extent in t.shape:
        out.write(struct.pack(">Q", extent))
    out.write(t.numpy().astype("<f4").tobytes())


def convert(state, path):
    records = {}
    for n in CONV_LAYERS:
        for kind in ("weight", "bias"):
            key = f"features.{n}.{kind}"
            if key not in state:
                raise SystemExit(f"missing {key}; is this a VGG-19 state dict?")
            records[key] = state[key]
    records["mean"] = torch.tensor(MEAN).view(1, 3, 1, 1)
    records["std"] = torch.tensor(STD).view(1, 3, 1, 1)
    with open(path, "wb") as out:
        out.write(b"format=mttf-vgg19-1\n\n")
        for name in sorted(records):
            write_record(out, name, records[name])


def main(argv):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("input", help="torchvision VGG-19 .pth")
    parser.add_argument("output", help="converted checkpoint")
    args = parser.parse_args(argv)
    convert(load_state_dict(args.input), args.output)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main(sys.argv[1:])
