"""Image decoding, preprocessing, augmentation and dataset handling.

Images are float64 arrays of shape ``(H, W, 1)`` with pixels in [0, 1].
Label 1 is the positive class.
"""

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DecodeError, InputError, ManifestError
from .tensor import DTYPE

IMAGE_SIZE = (100, 100)
MANIFEST_NAME = "manifest.csv"
_WHITESPACE = b" \t\r\n\v\f"


# -- PGM codec -----------------------------------------------------------------

def _read_header_token(data, pos):
    """Return (token, token start, position after token), skipping whitespace and comments."""
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise DecodeError("truncated header", offset=pos)
    return data[start:pos], start, pos


def decode_pgm(data):
    """Decode a binary (P5) 8-bit PGM into an ``(H, W, 1)`` array in [0, 1]."""
    data = bytes(data)
    if data[:2] != b"P5":
        raise DecodeError(f"bad magic {data[:2]!r}, expected b'P5'", offset=0)
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        token, start, pos = _read_header_token(data, pos)
        if not token.isdigit():
            raise DecodeError(f"{name} is not a decimal integer: {token!r}", offset=start)
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise DecodeError(f"invalid dimensions {width}x{height}", offset=2)
    if maxval != 255:
        raise DecodeError(f"unsupported maxval {maxval}, only 255 is accepted", offset=pos)
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise DecodeError("missing whitespace after header", offset=pos)
    pos += 1
    need = width * height
    if len(data) - pos < need:
        raise DecodeError(f"truncated pixel data: need {need} bytes, have {len(data) - pos}",
                          offset=len(data))
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return (pixels.astype(DTYPE) / 255.0).reshape(height, width, 1)


def encode_pgm(image):
    """Encode an ``(H, W)`` or ``(H, W, 1)`` image in [0, 1] as P5 bytes."""
    img = np.asarray(image, dtype=DTYPE)
    if img.ndim == 3:
        img = img[:, :, 0]
    h, w = img.shape
    pixels = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    return b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def read_pgm(path):
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def write_pgm(path, image):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(image))


# -- geometry --------------------------------------------------------------------

def _axis_coords(n_in, n_out):
    if n_out == 1 or n_in == 1:
        pos = np.zeros(n_out)
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.minimum(np.floor(pos).astype(np.intp), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize_bilinear(image, out_h, out_w):
    """Corner-aligned bilinear resize of an ``(H, W, C)`` image."""
    if out_h < 1 or out_w < 1:
        raise ConfigError(f"target size must be positive, got {out_h}x{out_w}")
    image = np.asarray(image, dtype=DTYPE)
    h, w = image.shape[:2]
    if (h, w) == (out_h, out_w):
        return image.copy()
    y0, y1, fy = _axis_coords(h, out_h)
    x0, x1, fx = _axis_coords(w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = image[y0][:, x0] * (1.0 - fx) + image[y0][:, x1] * fx
    bottom = image[y1][:, x0] * (1.0 - fx) + image[y1][:, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    # convex combinations can overshoot by an ulp
    return np.clip(out, image.min(), image.max())


def zoom(image, factor):
    """Zoom about the centre; factor > 1 crops in, factor < 1 shrinks and edge-pads."""
    h, w = image.shape[:2]
    if factor > 1.0:
        ch, cw = max(1, int(h / factor)), max(1, int(w / factor))
        if (ch, cw) == (h, w):
            return image.copy()
        top, left = (h - ch) // 2, (w - cw) // 2
        return resize_bilinear(image[top:top + ch, left:left + cw], h, w)
    if factor < 1.0:
        sh, sw = max(1, int(h * factor)), max(1, int(w * factor))
        if (sh, sw) == (h, w):
            return image.copy()
        small = resize_bilinear(image, sh, sw)
        top, left = (h - sh) // 2, (w - sw) // 2
        return np.pad(small, ((top, h - sh - top), (left, w - sw - left), (0, 0)), mode="edge")
    return image.copy()


def random_zoom(image, zoom_range, rng):
    """Zoom by a factor drawn uniformly from [1 - zoom_range, 1 + zoom_range]."""
    if not 0.0 <= zoom_range < 1.0:
        raise ConfigError(f"zoom_range must lie in [0, 1), got {zoom_range}")
    factor = rng.uniform(1.0 - zoom_range, 1.0 + zoom_range)
    if zoom_range == 0.0:
        return np.array(image, dtype=DTYPE, copy=True)
    return zoom(np.asarray(image, dtype=DTYPE), factor)


def preprocess(image, size=IMAGE_SIZE):
    """Resize to ``size`` and clip into [0, 1]."""
    image = np.asarray(image, dtype=DTYPE)
    if image.ndim == 2:
        image = image[:, :, None]
    return np.clip(resize_bilinear(image, *size), 0.0, 1.0)


# -- datasets ----------------------------------------------------------------------

@dataclass(frozen=True)
class Sample:
    image: np.ndarray
    label: int
    source_id: str


class Dataset:
    """Ordered collection of samples."""

    def __init__(self, samples):
        self.samples = list(samples)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, idx):
        return self.samples[idx]

    @property
    def class_counts(self):
        pos = sum(s.label for s in self.samples)
        return len(self.samples) - pos, pos

    @property
    def images(self):
        if not self.samples:
            return np.zeros((0,) + IMAGE_SIZE + (1,), dtype=DTYPE)
        return np.stack([s.image for s in self.samples])

    @property
    def labels(self):
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def source_ids(self):
        return [s.source_id for s in self.samples]

    def subset(self, indices):
        return Dataset(self.samples[i] for i in indices)

    def __repr__(self):
        neg, pos = self.class_counts
        return f"Dataset(n={len(self)}, negatives={neg}, positives={pos})"


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    train_size: int = None  # overrides train_fraction when set

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.train_size is not None and self.train_size < 1:
            raise ConfigError(f"train_size must be >= 1, got {self.train_size}")

    def n_train(self, n):
        if self.train_size is not None:
            if self.train_size > n:
                raise ConfigError(f"train_size {self.train_size} exceeds dataset size {n}")
            return self.train_size
        return math.floor(n * self.train_fraction + 0.5)


def split(dataset, spec=SplitSpec()):
    """Seeded shuffle, then cut into (train, validation)."""
    n = len(dataset)
    if n == 0:
        raise InputError("cannot split an empty dataset")
    order = np.random.default_rng(spec.seed).permutation(n)
    k = spec.n_train(n)
    return dataset.subset(order[:k]), dataset.subset(order[k:])


def _stripes(rng, size):
    h, w = size
    angle = np.deg2rad(rng.choice([45.0, 135.0]) + rng.uniform(-15.0, 15.0))
    period = rng.uniform(10.0, 20.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    contrast = rng.uniform(0.6, 0.9)
    yy, xx = np.mgrid[0:h, 0:w].astype(DTYPE)
    u = xx * np.cos(angle) + yy * np.sin(angle)
    wave = np.tanh(3.0 * np.sin(2.0 * np.pi * u / period + phase))
    return 0.5 + rng.uniform(-0.1, 0.1) + 0.5 * contrast * wave


def _blobs(rng, size):
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w].astype(DTYPE)
    img = np.full(size, rng.uniform(0.1, 0.35))
    for _ in range(rng.integers(1, 4)):
        cy, cx = rng.uniform(0.2 * h, 0.8 * h), rng.uniform(0.2 * w, 0.8 * w)
        sigma = rng.uniform(0.1, 0.25) * min(h, w)
        amp = rng.uniform(0.3, 0.6)
        img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma ** 2))
    return img


def synthetic_image(label, rng, size=IMAGE_SIZE):
    base = _stripes(rng, size) if label == 1 else _blobs(rng, size)
    noisy = base + rng.uniform(-0.1, 0.1, size=size)
    return np.clip(noisy, 0.0, 1.0)[:, :, None]


def generate_synthetic(n_per_class, seed=0, size=IMAGE_SIZE):
    """Deterministic balanced two-class image set.

    Positives are oriented diagonal stripes, negatives are soft radial
    blobs; both carry uniform noise of amplitude 0.1. Samples alternate
    negative/positive so every even-length prefix is balanced.
    """
    if n_per_class < 1:
        raise ConfigError(f"n_per_class must be >= 1, got {n_per_class}")
    samples = []
    for i in range(n_per_class):
        for label in (0, 1):
            rng = np.random.default_rng([seed, label, i])
            idx = 2 * i + label
            samples.append(Sample(synthetic_image(label, rng, size), label, f"synth_{idx:05d}_c{label}"))
    return Dataset(samples)


def write_dataset(dataset, out_dir):
    """Write every sample as a PGM file plus ``manifest.csv``; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    for sample in dataset:
        name = f"{sample.source_id}.pgm"
        write_pgm(os.path.join(out_dir, name), sample.image)
        lines.append(f"{name},{sample.label}\n")
    manifest = os.path.join(out_dir, MANIFEST_NAME)
    with open(manifest, "w", encoding="utf-8", newline="") as fh:
        fh.writelines(lines)
    return manifest


def load_manifest(path, size=IMAGE_SIZE):
    """Load ``relative_path,label`` lines into a preprocessed Dataset.

    All bad lines are collected and reported together in a ManifestError.
    """
    base = os.path.dirname(os.path.abspath(path))
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    samples, errors = [], []
    for lineno, row in enumerate(rows, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            errors.append((lineno, f"expected 'relative_path,label', got {len(row)} field(s)"))
            continue
        rel, label = row[0].strip(), row[1].strip()
        if label not in ("0", "1"):
            errors.append((lineno, f"label must be 0 or 1, got {label!r}"))
            continue
        full = os.path.join(base, rel)
        try:
            image = preprocess(read_pgm(full), size)
        except FileNotFoundError:
            errors.append((lineno, f"missing file {full}"))
            continue
        except (OSError, DecodeError) as exc:
            errors.append((lineno, f"{full}: {exc}"))
            continue
        samples.append(Sample(image, int(label), rel))
    if errors:
        raise ManifestError(errors)
    if not samples:
        raise InputError(f"manifest {path} lists no samples")
    return Dataset(samples)
