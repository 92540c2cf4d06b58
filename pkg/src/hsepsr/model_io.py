"""Binary model container: one header, then named float64 arrays.

Layout: 6-byte magic, little-endian uint32 format version, little-endian
uint32 header length, UTF-8 JSON header, then the raw bytes of every
array named in the header, little-endian float64 in C order.  The header
carries the window configuration, regularizer, kernel families and
bandwidths, the standardization transform, and the array manifest.

Persisted arrays are the windowed training data, the training Gram
matrices, the per-history weight matrix, the state Gram matrix, and the
start belief.  Conditioning tensors are not stored; they are rebuilt
lazily from the persisted arrays on first use.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from hsepsr.gramops import GramCache
from hsepsr.kernels import KernelSet, KernelSpec
from hsepsr.learner import HsePsrModel
from hsepsr.windows import Standardizer, WindowConfig, WindowedData

MAGIC = b"HSEPSR"
FORMAT_VERSION = 1

_WINDOW_ARRAYS = (
    "histories",
    "test_actions",
    "test_obs",
    "shifted_test_actions",
    "shifted_test_obs",
    "cur_actions",
    "cur_obs",
)
_GRAM_ARRAYS = (
    "G_HH",
    "G_TA_TA",
    "G_TAs_TAs",
    "G_TO_TO",
    "G_TO_TOs",
    "G_TA_TAs",
    "G_A_A",
    "G_O_O",
)
_LEARNED_ARRAYS = (
    "history_state_weights",
    "gram_states",
    "feasible_weights",
)


def _collect_arrays(model: HsePsrModel) -> dict:
    arrays = {}
    for name in _WINDOW_ARRAYS:
        arrays[name] = getattr(model.windowed, name)
    for name in _GRAM_ARRAYS:
        arrays[name] = getattr(model.grams, name)
    for name in _LEARNED_ARRAYS:
        arrays[name] = getattr(model, name)
    return arrays


def save_model(model: HsePsrModel, path) -> None:
    """Write a trained model to ``path`` in the binary container format."""
    arrays = _collect_arrays(model)
    std = model.standardizer
    header = {
        "n_samples": model.n_samples,
        "history_length": model.config.history_length,
        "test_length": model.config.test_length,
        "action_dim": model.action_dim,
        "obs_dim": model.obs_dim,
        "lam": model.lam,
        "discrete": model.discrete,
        "kernels": {
            stream: {
                "family": spec.family,
                "dimension": spec.dimension,
                "bandwidth": spec.bandwidth,
            }
            for stream, spec in (
                ("history", model.kernels.history),
                ("test_action", model.kernels.test_action),
                ("test_obs", model.kernels.test_obs),
                ("action", model.kernels.action),
                ("obs", model.kernels.obs),
            )
        },
        "standardizer": {
            "action_mean": std.action_mean.tolist(),
            "action_scale": std.action_scale.tolist(),
            "obs_mean": std.obs_mean.tolist(),
            "obs_scale": std.obs_scale.tolist(),
        },
        "arrays": [[name, list(a.shape)] for name, a in arrays.items()],
    }
    blob = json.dumps(header, sort_keys=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValueError(f"model file truncated while reading {what}")
    return data


def load_model(path) -> HsePsrModel:
    """Read a model container back into a usable model.

    The training report and conditioning-tensor caches are not part of the
    container; caches rebuild lazily on first use.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError("not a model file (bad magic)")
        version = struct.unpack("<I", _read_exact(fh, 4, "version"))[0]
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        hlen = struct.unpack("<I", _read_exact(fh, 4, "header length"))[0]
        header = json.loads(_read_exact(fh, hlen, "header").decode("utf-8"))
        arrays = {}
        for name, shape in header["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, 8 * count, f"array {name}")
            arrays[name] = np.frombuffer(raw, "<f8").reshape(shape).copy()
        if fh.read(1):
            raise ValueError("model file has trailing bytes")

    missing = [
        name
        for name in _WINDOW_ARRAYS + _GRAM_ARRAYS + _LEARNED_ARRAYS
        if name not in arrays
    ]
    if missing:
        raise ValueError(f"model file is missing arrays: {', '.join(missing)}")

    kernels = KernelSet(
        **{
            stream: KernelSpec(
                entry["family"],
                int(entry["dimension"]),
                None if entry["bandwidth"] is None else float(entry["bandwidth"]),
            )
            for stream, entry in header["kernels"].items()
        }
    )
    std_raw = header["standardizer"]
    standardizer = Standardizer(
        action_mean=np.asarray(std_raw["action_mean"], dtype=float),
        action_scale=np.asarray(std_raw["action_scale"], dtype=float),
        obs_mean=np.asarray(std_raw["obs_mean"], dtype=float),
        obs_scale=np.asarray(std_raw["obs_scale"], dtype=float),
    )
    windowed = WindowedData(
        config=WindowConfig(
            int(header["history_length"]), int(header["test_length"])
        ),
        standardizer=standardizer,
        discrete=bool(header["discrete"]),
        **{name: arrays[name] for name in _WINDOW_ARRAYS},
    )
    lam = float(header["lam"])
    grams = GramCache(
        lam_T=lam * int(header["n_samples"]),
        **{name: arrays[name] for name in _GRAM_ARRAYS},
    )
    return HsePsrModel(
        windowed=windowed,
        kernels=kernels,
        lam=lam,
        grams=grams,
        history_state_weights=arrays["history_state_weights"],
        gram_states=arrays["gram_states"],
        feasible_weights=arrays["feasible_weights"],
    )
