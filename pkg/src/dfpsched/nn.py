"""Minimal dense-network kernel: layers, backprop, Adam, checkpoint I/O.

Only the fixed graph family needed by the scheduling agent is supported:
three input MLPs concatenated into a joint representation, split into an
expectation stream and a mean-normalized action stream. Parameters default
to float32; reductions (losses, means) accumulate in float64. Gradient-check
tests instantiate float64 networks.
"""

import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

LEAKY_SLOPE = 0.01


class CheckpointError(Exception):
    pass


class DenseLayer:
    """y = act(x @ W.T + b), activation 'leaky_relu' or 'identity'."""

    def __init__(self, in_dim, out_dim, activation, rng, dtype=np.float32):
        # He-style fan-in scaling
        scale = np.sqrt(2.0 / in_dim)
        self.W = (rng.standard_normal((out_dim, in_dim)) * scale).astype(dtype)
        self.b = np.zeros(out_dim, dtype=dtype)
        self.activation = activation

    def forward(self, x):
        pre = x @ self.W.T + self.b
        if self.activation == "leaky_relu":
            out = np.where(pre >= 0, pre, LEAKY_SLOPE * pre)
        else:
            out = pre
        return out, (x, pre)

    def backward(self, cache, dout):
        x, pre = cache
        if self.activation == "leaky_relu":
            dpre = dout * np.where(pre >= 0, 1.0, LEAKY_SLOPE).astype(dout.dtype)
        else:
            dpre = dout
        dW = dpre.T @ x
        db = dpre.sum(axis=0)
        dx = dpre @ self.W
        return dx, dW, db


class Mlp:
    """Stack of dense layers: leaky-relu hidden, identity output."""

    def __init__(self, in_dim, hidden, out_dim, rng, dtype=np.float32,
                 out_activation="identity"):
        sizes = [in_dim] + list(hidden) + [out_dim]
        self.layers = []
        for i in range(len(sizes) - 1):
            act = "leaky_relu" if i < len(sizes) - 2 else out_activation
            self.layers.append(DenseLayer(sizes[i], sizes[i + 1], act, rng, dtype))

    def forward(self, x):
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x)
            caches.append(c)
        return x, caches

    def backward(self, caches, dout):
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            dout, dW, db = self.layers[i].backward(caches[i], dout)
            grads[i] = (dW, db)
        return dout, grads


class DfpNetwork:
    """Goal-conditioned future-measurement predictor with dueling streams.

    Inputs: state vector, per-resource utilization measurement, per-resource
    goal weights. Output: per window-slot predictions of future measurement
    changes, shape [batch, window, n_offsets, n_resources], combined as
    prediction(a) = expectation + (action(a) - mean_a action(a)).
    """

    def __init__(self, state_dim, n_resources, window, n_offsets,
                 state_hidden=(4000, 1000), state_out=512,
                 head_hidden=(128, 128), head_out=128,
                 stream_hidden=(256,), seed=0, dtype=np.float32):
        self.state_dim = state_dim
        self.n_resources = n_resources
        self.window = window
        self.n_offsets = n_offsets
        self.dtype = np.dtype(dtype)
        self.arch = {
            "state_dim": state_dim, "n_resources": n_resources,
            "window": window, "n_offsets": n_offsets,
            "state_hidden": list(state_hidden), "state_out": state_out,
            "head_hidden": list(head_hidden), "head_out": head_out,
            "stream_hidden": list(stream_hidden),
        }
        rng = np.random.default_rng(seed)
        k = n_offsets * n_resources
        joint = state_out + 2 * head_out
        self.state_mlp = Mlp(state_dim, state_hidden, state_out, rng, dtype)
        self.meas_mlp = Mlp(n_resources, head_hidden, head_out, rng, dtype)
        self.goal_mlp = Mlp(n_resources, head_hidden, head_out, rng, dtype)
        self.expect_mlp = Mlp(joint, stream_hidden, k, rng, dtype)
        self.action_mlp = Mlp(joint, stream_hidden, window * k, rng, dtype)
        self._splits = (state_out, state_out + head_out)

    @property
    def mlps(self):
        return {
            "state": self.state_mlp, "meas": self.meas_mlp,
            "goal": self.goal_mlp, "expect": self.expect_mlp,
            "action": self.action_mlp,
        }

    def named_params(self):
        out = []
        for name, mlp in self.mlps.items():
            for i, layer in enumerate(mlp.layers):
                out.append((f"{name}.{i}.W", layer.W))
                out.append((f"{name}.{i}.b", layer.b))
        return out

    def params(self):
        return [a for _, a in self.named_params()]

    def set_params(self, arrays):
        current = self.params()
        if len(arrays) != len(current):
            raise ValueError("parameter count mismatch")
        for dst, src in zip(current, arrays):
            if dst.shape != src.shape:
                raise ValueError("parameter shape mismatch")
            dst[...] = src

    def forward(self, state, measurement, goal):
        """Returns (pred [B, window, n_offsets, R], cache)."""
        state = np.atleast_2d(np.asarray(state, dtype=self.dtype))
        measurement = np.atleast_2d(np.asarray(measurement, dtype=self.dtype))
        goal = np.atleast_2d(np.asarray(goal, dtype=self.dtype))
        if state.shape[1] != self.state_dim:
            raise ValueError(
                f"state dim {state.shape[1]}, expected {self.state_dim}"
            )
        b = state.shape[0]
        k = self.n_offsets * self.n_resources
        s_out, s_c = self.state_mlp.forward(state)
        m_out, m_c = self.meas_mlp.forward(measurement)
        g_out, g_c = self.goal_mlp.forward(goal)
        joint = np.concatenate([s_out, m_out, g_out], axis=1)
        expect, e_c = self.expect_mlp.forward(joint)
        action, a_c = self.action_mlp.forward(joint)
        action = action.reshape(b, self.window, k)
        centered = action - action.mean(axis=1, keepdims=True)
        pred = expect[:, None, :] + centered
        cache = (s_c, m_c, g_c, e_c, a_c, b)
        return pred.reshape(b, self.window, self.n_offsets, self.n_resources), cache

    def backward(self, cache, dpred):
        """Gradients for every parameter given d(loss)/d(pred).

        dpred: [B, window, n_offsets, R]. Returns a flat list matching
        named_params() order.
        """
        s_c, m_c, g_c, e_c, a_c, b = cache
        k = self.n_offsets * self.n_resources
        dpred = np.asarray(dpred, dtype=self.dtype).reshape(b, self.window, k)
        dexpect = dpred.sum(axis=1)
        daction = dpred - dpred.mean(axis=1, keepdims=True)
        daction = daction.reshape(b, self.window * k)
        dj_e, e_grads = self.expect_mlp.backward(e_c, dexpect)
        dj_a, a_grads = self.action_mlp.backward(a_c, daction)
        dj = dj_e + dj_a
        i1, i2 = self._splits
        _, s_grads = self.state_mlp.backward(s_c, dj[:, :i1])
        _, m_grads = self.meas_mlp.backward(m_c, dj[:, i1:i2])
        _, g_grads = self.goal_mlp.backward(g_c, dj[:, i2:])
        flat = []
        for grads in (s_grads, m_grads, g_grads, e_grads, a_grads):
            for dW, db in grads:
                flat.append(dW)
                flat.append(db)
        return flat


def mse_loss(pred, target, mask=None):
    """Masked mean squared error and its gradient w.r.t. pred.

    mask broadcasts against pred; masked-out entries contribute neither to
    the loss nor to the gradient.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError("pred/target shape mismatch")
    if mask is None:
        mask = np.ones(pred.shape, dtype=bool)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), pred.shape)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("all targets are masked out")
    diff = np.where(mask, pred.astype(np.float64) - target.astype(np.float64), 0.0)
    loss = float(np.sum(diff * diff) / count)
    grad = (2.0 / count) * diff
    return loss, grad.astype(pred.dtype)


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.v = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.skipped = 0

    def step(self, params, grads):
        """One Adam update in place. Non-finite gradients skip the step."""
        if any(not np.all(np.isfinite(g)) for g in grads):
            self.skipped += 1
            return False
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            g64 = g.astype(np.float64)
            m *= self.beta1
            m += (1.0 - self.beta1) * g64
            v *= self.beta2
            v += (1.0 - self.beta2) * g64 * g64
            update = self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p -= update.astype(p.dtype)
        return True

    def state_arrays(self):
        out = [("opt.t", np.array([self.t], dtype=np.int64))]
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out.append((f"opt.m.{i}", m))
            out.append((f"opt.v.{i}", v))
        return out

    def load_state(self, arrays):
        self.t = int(arrays["opt.t"][0])
        for i in range(len(self.m)):
            self.m[i][...] = arrays[f"opt.m.{i}"]
            self.v[i][...] = arrays[f"opt.v.{i}"]


# --- checkpoint I/O ---------------------------------------------------------
#
# Byte layout (little-endian throughout):
#   magic     8 bytes  b"DFPCKPT1"
#   crc32     u32      of everything after this field
#   meta_len  u32      followed by UTF-8 JSON metadata (architecture,
#                      config_hash, phase, extra fields)
#   n_arrays  u32
#   per array: name_len u16, name UTF-8, dtype_code u8 (0=f32, 1=f64, 2=i64),
#              ndim u8, ndim x u32 dims, raw row-major data

_MAGIC = b"DFPCKPT1"
_VERSION = 1
_DTYPES = {0: "<f4", 1: "<f8", 2: "<i8"}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1,
                np.dtype("int64"): 2}


def _pack_arrays(arrays):
    parts = [struct.pack("<I", len(arrays))]
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr)
        code = _DTYPE_CODES[arr.dtype]
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype(_DTYPES[code]).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf, offset=0):
        self.buf = buf
        self.off = offset

    def take(self, n):
        if self.off + n > len(self.buf):
            raise CheckpointError("truncated checkpoint file")
        out = self.buf[self.off:self.off + n]
        self.off += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def save_checkpoint(net: DfpNetwork, optimizer, metadata: dict, path):
    """Write a versioned checkpoint; round-trip loads reproduce forward
    outputs bit-identically."""
    meta = dict(metadata)
    meta["version"] = _VERSION
    meta["arch"] = net.arch
    meta["dtype"] = net.dtype.name
    arrays = list(net.named_params())
    if optimizer is not None:
        arrays += optimizer.state_arrays()
    meta_blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    body = struct.pack("<I", len(meta_blob)) + meta_blob + _pack_arrays(arrays)
    crc = zlib.crc32(body) & 0xFFFFFFFF
    with open(path, "wb") as f:
        f.write(_MAGIC + struct.pack("<I", crc) + body)


def load_checkpoint(path, expected_config_hash=None):
    """Load (net, arrays, metadata); refuses config-hash mismatches."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 12 or buf[:8] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (crc,) = struct.unpack("<I", buf[8:12])
    body = buf[12:]
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CheckpointError(f"{path}: checksum mismatch (corrupt or truncated)")
    r = _Reader(body)
    (meta_len,) = r.unpack("<I")
    meta = json.loads(r.take(meta_len).decode("utf-8"))
    if meta.get("version") != _VERSION:
        raise CheckpointError(f"{path}: unsupported version {meta.get('version')}")
    if expected_config_hash is not None and meta.get("config_hash") != expected_config_hash:
        raise CheckpointError(
            f"{path}: config hash {meta.get('config_hash')} does not match "
            f"expected {expected_config_hash}"
        )
    (n_arrays,) = r.unpack("<I")
    arrays = {}
    for _ in range(n_arrays):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        code, ndim = r.unpack("<BB")
        dims = r.unpack(f"<{ndim}I")
        dt = np.dtype(_DTYPES[code])
        data = r.take(int(np.prod(dims, dtype=np.int64)) * dt.itemsize)
        arrays[name] = np.frombuffer(data, dtype=dt).reshape(dims).copy()
    arch = meta["arch"]
    net = DfpNetwork(
        state_dim=arch["state_dim"], n_resources=arch["n_resources"],
        window=arch["window"], n_offsets=arch["n_offsets"],
        state_hidden=tuple(arch["state_hidden"]), state_out=arch["state_out"],
        head_hidden=tuple(arch["head_hidden"]), head_out=arch["head_out"],
        stream_hidden=tuple(arch["stream_hidden"]),
        dtype=np.dtype(meta["dtype"]),
    )
    try:
        net.set_params([arrays[name] for name, _ in net.named_params()])
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing parameter array {exc}")
    return net, arrays, meta
