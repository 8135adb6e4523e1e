"""Preference-conditioned generation of the actor's scoring head.

A small MLP maps the weight vector w to every parameter of the
decoder's scoring head. The output layer starts with near-zero weights
and a bias holding a conventionally initialized default head, so the
untrained mapping is approximately constant in w (a single shared
head) and REINFORCE warm-up is stable. Generation runs through the
autodiff tape, so actor-loss gradients reach these parameters.
"""

import numpy as np

from . import autodiff as ad
from . import nn

PHI = "hypernet/phi"


def init_hypernet(store, n_u, shapes, rng, hidden=64):
    """shapes: ordered (name, shape) list of the generated head."""
    total = sum(int(np.prod(s)) for _, s in shapes)
    store.add(f"{PHI}/w0", nn.uniform_fan_in(rng, (n_u, hidden)))
    store.add(f"{PHI}/b0", np.zeros((1, hidden)))
    store.add(f"{PHI}/w1", 1e-3 * nn.uniform_fan_in(rng, (hidden, total)))
    # bias = a default head: fan-in weights, zero biases, flattened in order
    parts = []
    for name, shape in shapes:
        if name.rsplit("/", 1)[-1].startswith("b"):
            parts.append(np.zeros(int(np.prod(shape))))
        else:
            parts.append(nn.uniform_fan_in(rng, shape).reshape(-1))
    store.add(f"{PHI}/b1", np.concatenate(parts).reshape(1, total))


def generate(store, w, shapes):
    """Head tensors for preference vector ``w``, as name -> Tensor."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    n_u = store.get(f"{PHI}/w0").shape[0]
    if w.shape[0] != n_u:
        raise ValueError(f"preference dimension {w.shape[0]}, expected {n_u}")
    if not np.all(np.isfinite(w)):
        raise ValueError("preference weights must be finite")
    flat = nn.mlp_apply(nn.mlp_params(store, PHI), ad.Tensor(w.reshape(1, -1)))
    out = {}
    offset = 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        out[name] = ad.reshape(ad.slice_cols(flat, offset, offset + size), shape)
        offset += size
    if offset != flat.shape[1]:
        raise ValueError(
            f"head shapes cover {offset} values but hypernet emits {flat.shape[1]}")
    return out


def assemble(theta_w, base_store, shapes):
    """Merge generated head tensors with the base store, by reference.

    Errors on name overlap, on a missing head tensor, and on head
    names outside the declared split.
    """
    expected = [name for name, _ in shapes]
    missing = [n for n in expected if n not in theta_w]
    if missing:
        raise ValueError(f"generated head is missing {missing}")
    extra = [n for n in theta_w if n not in expected]
    if extra:
        raise ValueError(f"unexpected generated tensors {extra}")
    merged = nn.ParamStore()
    for name, tensor in base_store.items():
        if name in theta_w:
            raise ValueError(f"name {name!r} present in both parameter sets")
        merged.put(name, tensor)
    for name in expected:
        merged.put(name, theta_w[name])
    return merged
