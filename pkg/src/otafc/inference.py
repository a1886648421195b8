"""End-to-end forward passes through the designed analog layer.

ota_forward propagates a signal through the true channels with per-group
noise injection. accuracy measures a synthetic classification task through
both the OTA layer and its digital reference. imported_forward runs an
externally trained image pipeline with the middle complex FC layer replaced
by the OTA link.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, NoiseModel
from .solver import OtaParams, TargetLayer
from .utils import as_rng, complex_normal


def ota_forward(x: np.ndarray, params: OtaParams, true_ch: ChannelSet,
                noise: NoiseModel, rng_seed, bias: np.ndarray = None) -> np.ndarray:
    """Propagate x through precoder, relay cascade, and combiner with noise.

    Accepts a single vector (N,) or a batch (N, S) with independent noise
    per sample. Noise enters each relay group before amplification and the
    receiver front end before combining; the bias, when given, is added
    digitally after combining. With all-zero noise draws the output equals
    F2 Heff F1 x + bias exactly.
    """
    rng = as_rng(rng_seed)
    x = np.asarray(x, dtype=complex)
    single = x.ndim == 1
    xs = x[:, None] if single else x

    s = params.f1 @ xs
    v = true_ch.h_hop[0] @ s
    for l in range(true_ch.num_groups):
        v = v + complex_normal(rng, v.shape, noise.relay_noise_var[l])
        v = params.a[l][:, None] * v
        nxt = true_ch.h_hop[l + 1] if l + 1 < true_ch.num_groups else true_ch.h_last
        v = nxt @ v
    y_in = v + true_ch.h_direct @ s
    y_in = y_in + complex_normal(rng, y_in.shape, noise.rx_noise_var)
    y = params.f2 @ y_in
    if bias is not None:
        y = y + np.asarray(bias, dtype=complex)[:, None]
    return y[:, 0] if single else y


@dataclass(frozen=True)
class SyntheticTask:
    """Gaussian-cluster classification task probing the emulated layer.

    Samples are class_means[c] plus CN(0, sample_noise_var) perturbations;
    decisions take the argmax of Re(classifier_head @ layer_output).
    """

    num_classes: int
    class_means: np.ndarray
    sample_noise_var: float
    classifier_head: np.ndarray

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.class_means.shape[0] != self.num_classes:
            raise ValueError("one mean vector per class required")
        if self.classifier_head.shape[0] != self.num_classes:
            raise ValueError("one classifier row per class required")
        if self.sample_noise_var < 0:
            raise ValueError("sample noise variance cannot be negative")


def make_synthetic_task(target: TargetLayer, num_classes: int = 10,
                        sample_noise_var: float = 0.1, rng_seed=None) -> SyntheticTask:
    """Draw class means from CN(0, I) and build the matched classifier head.

    The head is the pseudo-inverse of the digital class templates
    W mu_c + b, so noiseless digital samples score as one-hot vectors.
    """
    rng = as_rng(rng_seed)
    means = complex_normal(rng, (num_classes, target.in_dim))
    templates = target.w @ means.T + target.bias[:, None]
    head = np.linalg.pinv(templates)
    return SyntheticTask(num_classes=num_classes, class_means=means,
                         sample_noise_var=sample_noise_var, classifier_head=head)


def accuracy(task: SyntheticTask, target: TargetLayer, params: OtaParams,
             true_ch: ChannelSet, noise: NoiseModel, num_samples: int,
             rng_seed) -> dict:
    """Classification accuracy through the OTA layer and its digital twin.

    Returns {"ota_acc": ..., "digital_acc": ...} over num_samples labeled
    draws; both paths see the same samples.
    """
    if num_samples < 1:
        raise ValueError("need at least one sample")
    rng = as_rng(rng_seed)
    labels = rng.integers(0, task.num_classes, size=num_samples)
    xs = task.class_means[labels].T
    if task.sample_noise_var > 0:
        xs = xs + complex_normal(rng, xs.shape, task.sample_noise_var)

    y_dig = target.w @ xs + target.bias[:, None]
    y_ota = ota_forward(xs, params, true_ch, noise, rng, bias=target.bias)

    pred_dig = np.argmax((task.classifier_head @ y_dig).real, axis=0)
    pred_ota = np.argmax((task.classifier_head @ y_ota).real, axis=0)
    return {"ota_acc": float(np.mean(pred_ota == labels)),
            "digital_acc": float(np.mean(pred_dig == labels))}


# ---------------------------------------------------------------------------
# Imported image pipeline (conv front end, complex FC middle, real head)
# ---------------------------------------------------------------------------

_F32, _C64 = 0, 1
_TENSOR_SPECS = (
    ("conv_kernel", _F32),
    ("conv_bias", _F32),
    ("bn_scale", _C64),
    ("bn_shift", _C64),
    ("fc_mid_weight", _C64),
    ("fc_mid_bias", _C64),
    ("fc_out_weight", _F32),
    ("fc_out_bias", _F32),
)
_MAGIC = b"OTAW"
_VERSION = 1

CONV_STRIDE = 4
CONV_PADDING = 1


@dataclass(frozen=True)
class ImportedPipeline:
    """Externally trained weights for the image-classification pipeline.

    Stage order: conv (2 output channels) -> real-to-complex pairing ->
    complex batch norm (affine, inference mode) -> power normalization ->
    complex FC (the OTA-replaceable layer) -> complex ReLU ->
    complex-to-real -> real FC head.
    """

    conv_kernel: np.ndarray   # (2, in_channels, kh, kw) float32
    conv_bias: np.ndarray     # (2,) float32
    bn_scale: np.ndarray      # (F,) complex64
    bn_shift: np.ndarray      # (F,) complex64
    fc_mid_weight: np.ndarray  # (M, F) complex64
    fc_mid_bias: np.ndarray    # (M,) complex64
    fc_out_weight: np.ndarray  # (C, 2M) float32
    fc_out_bias: np.ndarray    # (C,) float32

    def __post_init__(self):
        if self.conv_kernel.ndim != 4 or self.conv_kernel.shape[0] != 2:
            raise ValueError("conv kernel must be (2, in_ch, kh, kw)")
        if self.conv_bias.shape != (2,):
            raise ValueError("conv bias must have 2 entries")
        f = self.fc_mid_weight.shape[1]
        if self.bn_scale.shape != (f,) or self.bn_shift.shape != (f,):
            raise ValueError("batch-norm parameter length must match FC input")
        m = self.fc_mid_weight.shape[0]
        if self.fc_mid_bias.shape != (m,):
            raise ValueError("middle FC bias length must match its output")
        if self.fc_out_weight.shape[1] != 2 * m:
            raise ValueError("output FC must consume 2x the complex feature count")
        if self.fc_out_bias.shape != (self.fc_out_weight.shape[0],):
            raise ValueError("output FC bias length mismatch")

    @property
    def target_layer(self) -> TargetLayer:
        """The OTA-replaceable complex FC layer."""
        return TargetLayer(w=self.fc_mid_weight.astype(complex),
                           bias=self.fc_mid_bias.astype(complex))


def save_pipeline(pipeline: ImportedPipeline, path):
    """Write the flat binary weight file (magic, version, tagged tensors)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(_TENSOR_SPECS)))
        for name, code in _TENSOR_SPECS:
            arr = np.asarray(getattr(pipeline, name))
            arr = arr.astype("<c8" if code == _C64 else "<f4")
            raw = name.encode()
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BB", code, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_pipeline(path) -> ImportedPipeline:
    """Read a weight file written by save_pipeline."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a pipeline weight file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode()
            code, ndim = struct.unpack("<BB", fh.read(2))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            dtype = np.dtype("<c8" if code == _C64 else "<f4")
            payload = fh.read(int(np.prod(shape)) * dtype.itemsize)
            tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(shape)
    expected = {name for name, _ in _TENSOR_SPECS}
    missing = expected - tensors.keys()
    if missing:
        raise ValueError(f"{path}: missing tensors {sorted(missing)}")
    return ImportedPipeline(**{k: v for k, v in tensors.items() if k in expected})


def _conv2d(image: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
            stride: int, padding: int) -> np.ndarray:
    """Strided valid convolution (cross-correlation) after zero padding."""
    if image.ndim == 2:
        image = image[None, :, :]
    in_ch = kernel.shape[1]
    if image.shape[0] != in_ch:
        raise ValueError(f"expected {in_ch} input channels, got {image.shape[0]}")
    padded = np.pad(image, ((0, 0), (padding, padding), (padding, padding)))
    kh, kw = kernel.shape[2], kernel.shape[3]
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]
    out = np.einsum("cijhw,ochw->oij", windows, kernel)
    return out + bias[:, None, None]


def _complex_relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z.real, 0.0) + 1j * np.maximum(z.imag, 0.0)


def _power_normalize(z: np.ndarray) -> np.ndarray:
    """Scale one feature vector to unit average per-feature power."""
    mean_power = np.mean(np.abs(z) ** 2)
    if mean_power == 0:
        return z
    return z / np.sqrt(mean_power)


def _pre_layers(pipeline: ImportedPipeline, image: np.ndarray) -> np.ndarray:
    """Conv + R2C + batch norm + power normalization -> complex features."""
    conv = _conv2d(image, pipeline.conv_kernel.astype(float),
                   pipeline.conv_bias.astype(float), CONV_STRIDE, CONV_PADDING)
    z = (conv[0] + 1j * conv[1]).ravel()
    if z.size != pipeline.fc_mid_weight.shape[1]:
        raise ValueError(
            f"conv produced {z.size} complex features, pipeline expects "
            f"{pipeline.fc_mid_weight.shape[1]}"
        )
    z = pipeline.bn_scale * z + pipeline.bn_shift
    return _power_normalize(z)


def _post_layers(pipeline: ImportedPipeline, y: np.ndarray) -> np.ndarray:
    y = _complex_relu(y)
    real = np.concatenate([y.real, y.imag])
    return pipeline.fc_out_weight.astype(float) @ real + pipeline.fc_out_bias.astype(float)


def imported_forward(pipeline: ImportedPipeline, image: np.ndarray,
                     params: OtaParams, true_ch: ChannelSet, noise: NoiseModel,
                     rng_seed) -> np.ndarray:
    """Class scores with the middle complex FC layer realized over the air."""
    z = _pre_layers(pipeline, np.asarray(image, dtype=float))
    mid = ota_forward(z, params, true_ch, noise, rng_seed,
                      bias=pipeline.fc_mid_bias.astype(complex))
    return _post_layers(pipeline, mid)


def digital_forward(pipeline: ImportedPipeline, image: np.ndarray) -> np.ndarray:
    """Fully digital reference: the same pipeline with the FC layer in math."""
    z = _pre_layers(pipeline, np.asarray(image, dtype=float))
    mid = pipeline.fc_mid_weight.astype(complex) @ z + pipeline.fc_mid_bias.astype(complex)
    return _post_layers(pipeline, mid)
