"""Synthetic scene generators shared by the tests.

Each generator doubles as the ground-truth oracle for the scenario it
builds: cluster counts, labels, segment directions and analytic moments are
known by construction.
"""

import numpy as np

# four unit-variance blob anchors pairwise >= 13 apart, fifth keeps >= 13
BLOB_ANCHORS = np.array([
    [0.0, 0.0],
    [14.0, 2.0],
    [4.0, 14.0],
    [17.0, 15.0],
    [30.0, 7.0],
])

# segment anchors spaced far enough apart for half-length 10 toothpicks
SEGMENT_ANCHORS = np.array([
    [0.0, 0.0],
    [40.0, 5.0],
    [15.0, 35.0],
    [45.0, 40.0],
    [-10.0, 55.0],
    [70.0, 20.0],
    [5.0, 70.0],
])


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_orthogonal(rng, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def random_psd(rng, n: int, ridge_low: float = 0.1, ridge_high: float = 1.0) -> np.ndarray:
    """Well-conditioned random PSD matrix (trace bounded away from zero)."""
    a = rng.normal(size=(n, n))
    ridge = rng.uniform(ridge_low, ridge_high)
    m = a @ a.T / n + ridge * np.eye(n)
    return 0.5 * (m + m.T)


def gaussian_blobs(seed: int, k: int = 3, n_per: int = 200, std: float = 1.0,
                   jitter: float = 1.5):
    """k unit blobs around well-separated anchors; returns (points, labels)."""
    g = np.random.default_rng(seed)
    centers = BLOB_ANCHORS[:k] + g.uniform(-jitter, jitter, (k, 2))
    pts = np.vstack([g.normal(c, std, (n_per, 2)) for c in centers])
    labels = np.repeat(np.arange(k), n_per)
    return pts, labels


def segment_scene(seed: int, k: int = 5, n_per: int = 300, half_len: float = 10.0,
                  jitter: float = 0.5):
    """Thin segments with transverse Gaussian jitter (the toothpick scene).

    Returns (points, labels, angles); segment i points uniformly along
    direction ``angles[i]`` so its longitudinal variance is half_len^2/3 and
    the transverse variance jitter^2.
    """
    g = np.random.default_rng(seed)
    angles = g.uniform(0.0, np.pi, k)
    centers = SEGMENT_ANCHORS[:k]
    blocks = []
    for i in range(k):
        t = g.uniform(-half_len, half_len, n_per)
        w = g.normal(0.0, jitter, n_per)
        d = np.array([np.cos(angles[i]), np.sin(angles[i])])
        o = np.array([-d[1], d[0]])
        blocks.append(centers[i] + t[:, None] * d + w[:, None] * o)
    labels = np.repeat(np.arange(k), n_per)
    return np.vstack(blocks), labels, angles


def needle_scene_3d(seed: int, k: int = 3, n_per: int = 250, half_len: float = 10.0,
                    jitter: float = 0.5):
    """Thin 3-D needles with isotropic transverse jitter.

    Longitudinal variance is half_len^2/3, both transverse variances
    jitter^2. Returns (points, labels).
    """
    g = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0, 0.0], [40.0, 5.0, 10.0], [15.0, 35.0, -8.0]])[:k]
    blocks = []
    for i in range(k):
        d = g.normal(size=3)
        d /= np.linalg.norm(d)
        a = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = np.cross(d, a)
        u /= np.linalg.norm(u)
        v = np.cross(d, u)
        t = g.uniform(-half_len, half_len, n_per)
        w1 = g.normal(0.0, jitter, n_per)
        w2 = g.normal(0.0, jitter, n_per)
        blocks.append(centers[i] + t[:, None] * d + w1[:, None] * u + w2[:, None] * v)
    labels = np.repeat(np.arange(k), n_per)
    return np.vstack(blocks), labels


def uniform_ellipse(rng, n: int, r1: float, r2: float, center=(0.0, 0.0),
                    angle: float = 0.0) -> np.ndarray:
    """Uniform samples inside an ellipse with semi-axes (r1, r2).

    The population covariance of this density is diag(r1^2/4, r2^2/4) in the
    ellipse frame.
    """
    u = rng.uniform(0.0, 1.0, n)
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    radius = np.sqrt(u)
    unit = np.column_stack([radius * np.cos(phi), radius * np.sin(phi)])
    pts = unit * np.array([r1, r2])
    return pts @ rotation(angle).T + np.asarray(center)


def antialiased_ellipse_image(width: int, height: int, cx: float, cy: float,
                              r1: float, r2: float, angle: float = 0.0,
                              supersample: int = 4) -> np.ndarray:
    """Dark antialiased ellipse on a white background, float levels 0..255.

    Pixel values are 255 * (1 - coverage) with coverage estimated on a
    supersample x supersample subgrid of each pixel.
    """
    ss = supersample
    sub = (np.arange(ss) + 0.5) / ss
    ys = np.arange(height)[:, None] + sub[None, :]   # (height, ss)
    xs = np.arange(width)[:, None] + sub[None, :]    # (width, ss)
    ct, st = np.cos(angle), np.sin(angle)
    # evaluate inside-test on the full subgrid
    yy = ys.reshape(-1)[:, None]                     # (height*ss, 1)
    xx = xs.reshape(-1)[None, :]                     # (1, width*ss)
    u = (xx - cx) * ct + (yy - cy) * st
    v = -(xx - cx) * st + (yy - cy) * ct
    inside = (u / r1) ** 2 + (v / r2) ** 2 <= 1.0
    coverage = inside.reshape(height, ss, width, ss).mean(axis=(1, 3))
    return 255.0 * (1.0 - coverage)
