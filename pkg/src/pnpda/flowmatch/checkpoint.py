"""Save and load trained velocity networks.

The container header records testbed, architecture, normalisation
statistics, ``beta`` and ``seed``; the blob holds ``G`` followed by the
network parameters in ``VelocityNet.layout`` order.
"""

from ..container import read_container, write_container
from .net import FourierEmbed, VelocityNet

KIND = "velocity-net"


def save_checkpoint(path, net, testbed="", beta=None, seed=None, extra=None):
    header = {
        "kind": KIND,
        "testbed": testbed,
        "dim": net.dim,
        "widths": net.widths,
        "d_tau": net.embed.d_tau,
        "norm_mean": [float(v) for v in net.norm_mean],
        "norm_std": [float(v) for v in net.norm_std],
        "beta": beta,
        "seed": seed,
        "param_order": ["G"] + [name for name, _ in net.layout],
    }
    if extra:
        header["extra"] = extra
    arrays = [("G", net.embed.G)] + [(name, net.params[name]) for name, _ in net.layout]
    write_container(path, header, arrays)


def load_checkpoint(path):
    """Return ``(net, header)``."""
    header, arrays = read_container(path)
    if header.get("kind") != KIND:
        raise ValueError(f"{path}: not a velocity-net checkpoint")
    net = VelocityNet(
        header["dim"],
        header["widths"],
        FourierEmbed(arrays["G"]),
        norm_mean=header["norm_mean"],
        norm_std=header["norm_std"],
    )
    for name, _ in net.layout:
        net.params[name][...] = arrays[name]
    return net, header
