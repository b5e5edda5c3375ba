"""Conditional velocity MLP with hand-written reverse mode.

Layout of one hidden block (``h_in`` -> ``h_out``)::

    a = h_in @ W + b
    n = layernorm(a) * ln_scale + ln_shift
    h_out = silu(n) (+ h_in when the widths match)

The input is ``[x, fourier(tau), xb]`` and a final linear layer maps to the
state dimension.  All trainable parameters live in one flat float64 buffer
(``net.flat``) with per-array views, in the order
``W_0, b_0, ln_scale_0, ln_shift_0, ..., W_out, b_out``; weight matrices are
stored as (fan_in, fan_out).
"""

import numpy as np

__all__ = ["FourierEmbed", "VelocityNet", "fourier_time_embed", "LN_EPS"]

LN_EPS = 1e-5


class FourierEmbed:
    """Frozen random Fourier features of the flow time."""

    def __init__(self, G):
        G = np.array(G, dtype=float).reshape(-1, 1)
        G.setflags(write=False)
        self.G = G

    @classmethod
    def random(cls, rng, d_tau=32, scale=10.0):
        if d_tau % 2:
            raise ValueError("d_tau must be even")
        return cls(scale * rng.standard_normal((d_tau // 2, 1)))

    @property
    def d_tau(self):
        return 2 * self.G.shape[0]

    def __call__(self, tau):
        return fourier_time_embed(tau, self)


def fourier_time_embed(tau, embed):
    """``[sin(2 pi tau G^T), cos(2 pi tau G^T)]``; vectorised over ``tau``."""
    tau = np.asarray(tau, dtype=float)
    angles = 2.0 * np.pi * tau[..., None] * embed.G[:, 0]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class VelocityNet:
    def __init__(self, dim, widths, embed, flat=None, norm_mean=None, norm_std=None):
        self.dim = int(dim)
        self.widths = [int(w) for w in widths]
        self.embed = embed
        self.d_in = 2 * self.dim + embed.d_tau
        self.layout = []
        fan_in = self.d_in
        for i, w in enumerate(self.widths):
            self.layout += [
                (f"W{i}", (fan_in, w)),
                (f"b{i}", (w,)),
                (f"ln_scale{i}", (w,)),
                (f"ln_shift{i}", (w,)),
            ]
            fan_in = w
        self.layout += [("W_out", (fan_in, self.dim)), ("b_out", (self.dim,))]
        self.size = sum(int(np.prod(s)) for _, s in self.layout)
        self.flat = np.zeros(self.size) if flat is None else np.array(flat, dtype=float)
        if self.flat.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {self.flat.shape}")
        self.params = self._views(self.flat)
        self.norm_mean = np.zeros(self.dim) if norm_mean is None else np.asarray(norm_mean, float)
        self.norm_std = np.ones(self.dim) if norm_std is None else np.asarray(norm_std, float)
        # instrumentation: analysis code must never call backward
        self.n_forward = 0
        self.n_backward = 0

    def _views(self, buf):
        out = {}
        off = 0
        for name, shape in self.layout:
            n = int(np.prod(shape))
            out[name] = buf[off : off + n].reshape(shape)
            off += n
        return out

    @classmethod
    def initialize(cls, dim, widths, rng, d_tau=32):
        """Fourier matrix ~ 10 N(0, 1); linear layers ~ U(+-1/sqrt(fan_in))."""
        net = cls(dim, widths, FourierEmbed.random(rng, d_tau))
        for name, shape in net.layout:
            p = net.params[name]
            if name.startswith("ln_scale"):
                p[...] = 1.0
            elif name.startswith("ln_shift"):
                p[...] = 0.0
            elif name.startswith("W"):
                bound = 1.0 / np.sqrt(shape[0])
                p[...] = rng.uniform(-bound, bound, size=shape)
            else:
                fan_in = net.params["W" + name[1:]].shape[0]
                p[...] = rng.uniform(-1.0 / np.sqrt(fan_in), 1.0 / np.sqrt(fan_in), size=shape)
        return net

    def copy(self):
        return VelocityNet(
            self.dim, self.widths, self.embed, self.flat.copy(),
            self.norm_mean.copy(), self.norm_std.copy(),
        )

    def residual(self, i):
        fan_in = self.d_in if i == 0 else self.widths[i - 1]
        return fan_in == self.widths[i]

    # normalisation ------------------------------------------------------

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.norm_mean) / self.norm_std

    def denormalize(self, u):
        return np.asarray(u, dtype=float) * self.norm_std + self.norm_mean

    # forward / backward -------------------------------------------------

    def _forward(self, x, tau, xb, keep):
        x = np.atleast_2d(x)
        xb = np.atleast_2d(xb)
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (x.shape[0],))
        h = np.concatenate([x, fourier_time_embed(tau, self.embed), xb], axis=1)
        cache = []
        P = self.params
        for i in range(len(self.widths)):
            a = h @ P[f"W{i}"] + P[f"b{i}"]
            mu = a.mean(axis=1, keepdims=True)
            ac = a - mu
            inv = 1.0 / np.sqrt((ac * ac).mean(axis=1, keepdims=True) + LN_EPS)
            xhat = ac * inv
            n = xhat * P[f"ln_scale{i}"] + P[f"ln_shift{i}"]
            sg = _sigmoid(n)
            o = n * sg
            if keep:
                cache.append((h, xhat, inv, n, sg))
            h = o + h if self.residual(i) else o
        out = h @ P["W_out"] + P["b_out"]
        if keep:
            cache.append(h)
        return out, cache

    def forward(self, x, tau, xb):
        """Velocity in normalised coordinates; ``x``/``xb`` are (d,) or (B, d)."""
        self.n_forward += 1
        single = np.ndim(x) == 1
        out, _ = self._forward(x, tau, xb, keep=False)
        return out[0] if single else out

    __call__ = forward

    def loss_and_grad(self, x, tau, xb, target):
        """Mean over the batch of ``|v(x, tau, xb) - target|^2`` and its
        gradient with respect to ``flat`` (the Fourier matrix is frozen)."""
        self.n_backward += 1
        out, cache = self._forward(x, tau, xb, keep=True)
        target = np.atleast_2d(target)
        B = out.shape[0]
        diff = out - target
        loss = float(np.einsum("ij,ij->", diff, diff) / B)

        grad = np.zeros(self.size)
        G = self._views(grad)
        P = self.params
        dout = (2.0 / B) * diff
        h = cache[-1]
        G["W_out"][...] = h.T @ dout
        G["b_out"][...] = dout.sum(axis=0)
        dh = dout @ P["W_out"].T
        for i in reversed(range(len(self.widths))):
            h_in, xhat, inv, n, sg = cache[i]
            dn = dh * (sg * (1.0 + n * (1.0 - sg)))
            G[f"ln_scale{i}"][...] = (dn * xhat).sum(axis=0)
            G[f"ln_shift{i}"][...] = dn.sum(axis=0)
            dxhat = dn * P[f"ln_scale{i}"]
            da = inv * (
                dxhat
                - dxhat.mean(axis=1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
            )
            G[f"W{i}"][...] = h_in.T @ da
            G[f"b{i}"][...] = da.sum(axis=0)
            dh_in = da @ P[f"W{i}"].T
            if self.residual(i):
                dh_in = dh_in + dh
            dh = dh_in
        return loss, grad
