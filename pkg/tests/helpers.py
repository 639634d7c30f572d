import numpy as np

from sensalign import ModalityView, ObjectClass
from sensalign.scenegen import rigid_twin, sample_positions

REGION = ((-25.0, 25.0), (0.5, 1.2), (5.0, 60.0))


def twin_views(seed, n=25, npairs=5, noise=0.0, region=REGION):
    """Source view and a rigidly moved, shuffled copy with optional noise.

    Returns ``(source, target, pairs, truth)`` where ``truth`` maps source
    index -> target index.
    """
    rng = np.random.default_rng(seed)
    X = sample_positions(n, region, 1.0, rng)
    classes = [ObjectClass.CAR if c else ObjectClass.PERSON for c in rng.random(n) < 0.75]
    Y, perm = rigid_twin(X, rng)
    if noise:
        diam = np.max(np.linalg.norm(X[:, None] - X[None], axis=-1))
        Y = Y + rng.normal(size=Y.shape) * noise * diam
    inv = np.argsort(perm)
    src = ModalityView.from_points("lidar", X, classes)
    tgt = ModalityView.from_points("lidar", Y, [classes[p] for p in perm], first_id=n)
    chosen = rng.choice(n, npairs, replace=False)
    pairs = [(int(i), int(inv[i])) for i in chosen]
    truth = {i: int(inv[i]) for i in range(n)}
    return src, tgt, pairs, truth
