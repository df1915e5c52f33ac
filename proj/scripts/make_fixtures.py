#!/usr/bin/env python3
"""Regenerates the checked-in test fixtures under tests/data/.

* alexnet_seeded.mrpw            AlexNet convolutional stack (torchvision layout) with
                                 seeded Kaiming initialization, ImageNet preprocessing
                                 constants and five ReLU block taps.
* alexnet_seeded.golden64.mrpw   reference activations of golden64.png computed by torch
* alexnet_seeded.golden128.mrpw  same for the x2 bilinear upscale of the golden image
* squeezenet_seeded.mrpw         SqueezeNet 1.1 stack, seven block taps; each Fire module's
                                 parallel 1x1 / 3x3 expand convolutions are folded into one
                                 3x3 convolution (1x1 kernels placed at the center tap)
* squeezenet_seeded.golden64.mrpw
* golden64.png                   the 64x64 golden image (8-bit, identical to golden/input)
* mini2afc/                      60 synthetic 2AFC triplets, 10 per category

Pretrained ImageNet weights are not required; any MRPW export can be used in their place.
"""
import json
import struct
import zlib
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
import torchvision
from PIL import Image, ImageFilter

OUT = Path(__file__).resolve().parent.parent / "tests" / "data"

MEAN = [0.485, 0.456, 0.406]
STD = [0.229, 0.224, 0.225]


def write_mrpw(path, manifest, entries):
    payload = bytearray(json.dumps(manifest, indent=None, separators=(",", ":")).encode())
    manifest_len = len(payload)
    for name, arr in entries:
        arr = np.ascontiguousarray(arr, dtype="<f4")
        nb = name.encode()
        payload += struct.pack("<I", len(nb)) + nb
        payload += struct.pack("<I", arr.ndim) + struct.pack("<%dI" % arr.ndim, *arr.shape)
        payload += arr.tobytes()
    header = b"MRPW" + struct.pack("<IIII", 1, zlib.crc32(payload) & 0xFFFFFFFF, len(entries), manifest_len)
    path.write_bytes(header + bytes(payload))


def seeded_alexnet():
    torch.manual_seed(20240611)
    features = torchvision.models.alexnet(weights=None).features[:12].eval()
    for m in features:
        if isinstance(m, torch.nn.Conv2d):
            torch.nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
            torch.nn.init.normal_(m.bias, std=0.05)
    return features


def manifest_for(features):
    layers = []
    for i, m in enumerate(features):
        name = f"features.{i}"
        if isinstance(m, torch.nn.Conv2d):
            layers.append({
                "name": name, "kind": "conv",
                "weight": name + ".weight", "bias": name + ".bias",
                "weight_shape": list(m.weight.shape), "bias_shape": list(m.bias.shape),
                "stride": m.stride[0], "padding": m.padding[0], "tap": False,
            })
        elif isinstance(m, torch.nn.ReLU):
            layers.append({"name": name, "kind": "relu", "tap": True})
        elif isinstance(m, torch.nn.MaxPool2d):
            layers.append({"name": name, "kind": "maxpool", "kernel": m.kernel_size,
                           "stride": m.stride, "tap": False})
    return {
        "backbone": "alexnet",
        "input_channels": 3,
        "preprocess": {"mean": MEAN, "std": STD},
        "layers": layers,
        "source": {"framework": "torch " + torch.__version__, "weights": "seeded-kaiming-20240611"},
    }


def golden_image():
    y, x = np.mgrid[0:64, 0:64].astype(np.float64) / 63.0
    r = 0.5 + 0.4 * np.sin(6.0 * x + 2.0 * y)
    g = np.clip(((x - 0.5) ** 2 + (y - 0.4) ** 2 < 0.08) * 0.8 + 0.1 * y, 0, 1)
    b = 0.5 + 0.5 * np.cos(10.0 * y) * x
    img = np.stack([r, g, b])
    return np.round(np.clip(img, 0, 1) * 255.0) / 255.0


def taps(features, x):
    out = []
    with torch.no_grad():
        for m in features:
            x = m(x)
            if isinstance(m, torch.nn.ReLU):
                out.append(x[0].numpy().copy())
    return out


def export_alexnet():
    features = seeded_alexnet()
    manifest = manifest_for(features)
    entries = []
    for i, m in enumerate(features):
        if isinstance(m, torch.nn.Conv2d):
            entries.append((f"features.{i}.weight", m.weight.detach().numpy()))
            entries.append((f"features.{i}.bias", m.bias.detach().numpy()))
    write_mrpw(OUT / "alexnet_seeded.mrpw", manifest, entries)

    img = golden_image().astype(np.float32)
    Image.fromarray(np.round(img.transpose(1, 2, 0) * 255).astype(np.uint8)).save(OUT / "golden64.png")
    mean = torch.tensor(MEAN).view(1, 3, 1, 1)
    std = torch.tensor(STD).view(1, 3, 1, 1)
    t64 = torch.from_numpy(img)[None]
    t128 = F.interpolate(t64, size=(128, 128), mode="bilinear", align_corners=False)
    for tag, t in (("golden64", t64), ("golden128", t128)):
        blocks = taps(features, (t - mean) / std)
        entries = [("golden/input", t[0].numpy())]
        entries += [(f"golden/block{b + 1}", a) for b, a in enumerate(blocks)]
        write_mrpw(OUT / f"alexnet_seeded.{tag}.mrpw",
                   {"backbone": "alexnet", "kind": "golden", "blocks": len(blocks),
                    "input_shape": list(t.shape[1:])}, entries)


def export_squeezenet():
    torch.manual_seed(20240612)
    features = torchvision.models.squeezenet1_1(weights=None).features.eval()
    for m in features.modules():
        if isinstance(m, torch.nn.Conv2d):
            torch.nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
            torch.nn.init.normal_(m.bias, std=0.05)
    # block ends follow the usual seven-slice split of the feature stack
    tap_after = {1, 4, 7, 9, 10, 11, 12}
    layers, entries = [], []

    def conv(name, weight, bias, stride, padding):
        layers.append({"name": name, "kind": "conv", "weight": name + ".weight", "bias": name + ".bias",
                       "weight_shape": list(weight.shape), "bias_shape": list(bias.shape),
                       "stride": stride, "padding": padding, "tap": False})
        entries.append((name + ".weight", weight))
        entries.append((name + ".bias", bias))

    for i, m in enumerate(features):
        name = f"features.{i}"
        if isinstance(m, torch.nn.Conv2d):
            conv(name, m.weight.detach().numpy(), m.bias.detach().numpy(), m.stride[0], m.padding[0])
        elif isinstance(m, torch.nn.ReLU):
            layers.append({"name": name, "kind": "relu", "tap": i in tap_after})
        elif isinstance(m, torch.nn.MaxPool2d):
            # ceil_mode pooling agrees with floor pooling on the odd sizes reached from 64 and 128
            layers.append({"name": name, "kind": "maxpool", "kernel": m.kernel_size, "stride": m.stride,
                           "tap": False})
        else:  # Fire
            conv(name + ".squeeze", m.squeeze.weight.detach().numpy(), m.squeeze.bias.detach().numpy(), 1, 0)
            layers.append({"name": name + ".squeeze_activation", "kind": "relu", "tap": False})
            e1, e3 = m.expand1x1.weight.detach().numpy(), m.expand3x3.weight.detach().numpy()
            fused = np.zeros((e1.shape[0] + e3.shape[0], e1.shape[1], 3, 3), dtype=np.float32)
            fused[: e1.shape[0], :, 1, 1] = e1[:, :, 0, 0]
            fused[e1.shape[0]:] = e3
            bias = np.concatenate([m.expand1x1.bias.detach().numpy(), m.expand3x3.bias.detach().numpy()])
            conv(name + ".expand", fused, bias, 1, 1)
            layers.append({"name": name + ".expand_activation", "kind": "relu", "tap": i in tap_after})
    manifest = {"backbone": "squeezenet1_1", "input_channels": 3,
                "preprocess": {"mean": MEAN, "std": STD}, "layers": layers,
                "source": {"framework": "torch " + torch.__version__, "weights": "seeded-kaiming-20240612"}}
    write_mrpw(OUT / "squeezenet_seeded.mrpw", manifest, entries)

    mean = torch.tensor(MEAN).view(1, 3, 1, 1)
    std = torch.tensor(STD).view(1, 3, 1, 1)
    t64 = torch.from_numpy(golden_image().astype(np.float32))[None]
    blocks = []
    with torch.no_grad():
        x = (t64 - mean) / std
        for i, m in enumerate(features):
            x = m(x)
            if i in tap_after:
                blocks.append(x[0].numpy().copy())
    entries = [("golden/input", t64[0].numpy())] + [(f"golden/block{b + 1}", a) for b, a in enumerate(blocks)]
    write_mrpw(OUT / "squeezenet_seeded.golden64.mrpw",
               {"backbone": "squeezenet1_1", "kind": "golden", "blocks": len(blocks),
                "input_shape": [3, 64, 64]}, entries)


# ---------------------------------------------------------------- mini 2AFC corpus

CATEGORIES = ["traditional", "cnn", "superres", "deblur", "colorization", "frameinterp"]


def random_reference(rng):
    y, x = np.mgrid[0:64, 0:64].astype(np.float64) / 63.0
    img = np.zeros((64, 64, 3))
    for c in range(3):
        for _ in range(3):
            fx, fy, ph = rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(0, 6.28)
            img[..., c] += rng.uniform(0.05, 0.2) * np.sin(fx * x + fy * y + ph)
        img[..., c] += rng.uniform(0.3, 0.7)
    for _ in range(rng.integers(2, 5)):
        cx, cy, rad = rng.uniform(0, 1, 2).tolist() + [rng.uniform(0.05, 0.25)]
        mask = (x - cx) ** 2 + (y - cy) ** 2 < rad ** 2
        img[mask] = rng.uniform(0, 1, 3)
    return np.clip(img, 0, 1)


def to_pil(a):
    return Image.fromarray(np.round(np.clip(a, 0, 1) * 255).astype(np.uint8))


def from_pil(im):
    return np.asarray(im, dtype=np.float64) / 255.0


def distort(category, ref, strength, rng):
    if category == "traditional":
        noisy = ref + rng.normal(0, 0.15 * strength, ref.shape)
        return from_pil(to_pil(noisy).filter(ImageFilter.GaussianBlur(1.5 * strength)))
    if category == "cnn":
        blurred = from_pil(to_pil(ref).filter(ImageFilter.GaussianBlur(2.0 * strength)))
        return blurred + rng.normal(0, 0.05 * strength, ref.shape)
    if category == "superres":
        size = max(8, int(round(64 / (1 + 3 * strength))))
        return from_pil(to_pil(ref).resize((size, size), Image.BILINEAR).resize((64, 64), Image.BICUBIC))
    if category == "deblur":
        k = max(1, int(round(1 + 6 * strength)))
        out = np.zeros_like(ref)
        for s in range(k):
            out += np.roll(ref, s, axis=1)
        return out / k
    if category == "colorization":
        gray = ref.mean(axis=2, keepdims=True)
        tint = rng.uniform(-0.3, 0.3, 3) * strength
        return gray + (ref - gray) * (1 - strength) + tint
    shift = int(round(4 * strength))
    moved = np.roll(ref, shift, axis=0)
    return 0.5 * ref + 0.5 * moved


def write_judge(path_stem, value, as_npy):
    if as_npy:
        np.save(str(path_stem) + ".npy", np.array([value], dtype=np.float32))
    else:
        Path(str(path_stem) + ".txt").write_text(f"{value:.6f}\n")


def make_mini_corpus():
    rng = np.random.default_rng(7)
    root = OUT / "mini2afc"
    for ci, cat in enumerate(CATEGORIES):
        for sub in ("ref", "p0", "p1", "judge"):
            (root / cat / sub).mkdir(parents=True, exist_ok=True)
        for i in range(10):
            stem = f"{i:06d}"
            ref = random_reference(rng)
            s0, s1 = rng.uniform(0.1, 1.0, 2)
            p0 = distort(cat, ref, s0, rng)
            p1 = distort(cat, ref, s1, rng)
            # simulated panel of 5 voters favouring the weaker distortion
            prob_p1 = 1.0 / (1.0 + np.exp(-6.0 * (s0 - s1)))
            judge = rng.binomial(5, prob_p1) / 5.0
            to_pil(ref).save(root / cat / "ref" / f"{stem}.png")
            to_pil(p0).save(root / cat / "p0" / f"{stem}.png")
            to_pil(p1).save(root / cat / "p1" / f"{stem}.png")
            write_judge(root / cat / "judge" / stem, judge, as_npy=(i + ci) % 2 == 0)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    export_alexnet()
    export_squeezenet()
    make_mini_corpus()
