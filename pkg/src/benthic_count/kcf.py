"""Kernelized correlation filter tracking.

A single-object tracker that trains a kernel ridge regressor on every
cyclic shift of a feature patch without ever materializing those shifts:
the all-shifts design matrix is circulant, so training and detection
reduce to elementwise work on 2-D DFTs. The filter is kept in dual form
(``alpha_hat``) together with the learned feature spectrum
(``template_hat``); the Gaussian kernel couples them at detection time.

Feature modes: ``grayscale`` (mean-removed intensity, one channel) and
``hog`` (9 unsigned orientation bins per cell, L2-normalized over 2x2
cell blocks). Both are tapered by a 2-D Hann window so the cyclic-shift
model's wraparound seam carries no energy.

Every operation here is deterministic; a model is exclusively owned by
one track, so distinct models may be updated in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import BBox


@dataclass(frozen=True)
class KcfParams:
    """Tracker hyperparameters.

    lambda_value: ridge regularization weight (>= 0).
    kernel_sigma: Gaussian kernel bandwidth in feature units.
    output_sigma_factor: label bandwidth as a fraction of the target size.
    padding: search-window scale relative to the target box (>= 1).
    learning_rate: per-frame model interpolation factor in [0, 1].
    cell_size: pixels per feature cell (>= 1).
    feature_mode: "grayscale" or "hog".
    """

    lambda_value: float = 1e-4
    kernel_sigma: float = 0.5
    output_sigma_factor: float = 0.1
    padding: float = 2.5
    learning_rate: float = 0.02
    cell_size: int = 4
    feature_mode: str = "hog"

    def __post_init__(self):
        if self.lambda_value < 0:
            raise ValueError("lambda_value must be >= 0")
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in [0, 1]")
        if self.padding < 1.0:
            raise ValueError("padding must be >= 1")
        if self.cell_size < 1:
            raise ValueError("cell_size must be >= 1")
        if self.feature_mode not in ("grayscale", "hog"):
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")

    @classmethod
    def grayscale(cls, **kw) -> "KcfParams":
        kw.setdefault("cell_size", 1)
        return cls(feature_mode="grayscale", **kw)


@dataclass(frozen=True)
class FeaturePatch:
    """M x N x C real feature block (channels share one spatial grid)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise ValueError(f"feature patch must be MxNxC, got shape {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def c(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LabelMap:
    """M x N regression targets in [0, 1], peak exactly 1.0 at (0, 0)."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ResponseMap:
    """Filter response over all cyclic shifts of the search window."""

    values: np.ndarray

    def peak(self) -> tuple[tuple[int, int], float]:
        """((row, col), value) of the maximum; ties -> smallest row-major index."""
        flat = int(np.argmax(self.values))
        m, n = self.values.shape
        return (flat // n, flat % n), float(self.values.flat[flat])

    def peak_offset(self) -> tuple[tuple[int, int], float]:
        """Peak as a translation: indices past half the map wrap to negative."""
        (i, j), value = self.peak()
        m, n = self.values.shape
        di = i - m if i > m / 2 else i
        dj = j - n if j > n / 2 else j
        return (di, dj), value


@dataclass(frozen=True)
class KcfModel:
    """Learned filter state.

    alpha_hat: M x N complex dual coefficients in the Fourier domain.
    template_hat: M x N x C learned feature spectrum.
    window_size: (M, N) in cells; target_size: (w, h) in pixels.
    center: current target center (cx, cy) in pixels.
    """

    alpha_hat: np.ndarray
    template_hat: np.ndarray
    params: KcfParams
    window_size: tuple[int, int]
    target_size: tuple[float, float] = (0.0, 0.0)
    center: tuple[float, float] = (0.0, 0.0)

    def bbox(self) -> BBox:
        cx, cy = self.center
        w, h = self.target_size
        return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def cyclic_shift(x: np.ndarray, k: int) -> np.ndarray:
    """Shift so that element i of the result is x[(i - k) mod n]."""
    return np.roll(np.asarray(x), k)


def cyclic_shift2d(a: np.ndarray, p: int, q: int) -> np.ndarray:
    """2-D cyclic shift by (p, q) = (rows, cols)."""
    return np.roll(np.roll(a, p, axis=0), q, axis=1)


def circulant(x: np.ndarray) -> np.ndarray:
    """Matrix of all cyclic shifts of x; row k is cyclic_shift(x, k)."""
    x = np.asarray(x, dtype=np.float64)
    return np.stack([cyclic_shift(x, k) for k in range(len(x))])


def gaussian_labels(m: int, n: int, sigma: float) -> LabelMap:
    """Regression targets decaying with cyclic shift distance.

    y(i, j) = exp(-(d_i^2 + d_j^2) / (2 sigma^2)) with d_i = min(i, m - i),
    so the zero-shift position (0, 0) scores exactly 1.0 and the map is
    symmetric under (i, j) -> (m - i mod m, n - j mod n).
    """
    if m < 1 or n < 1 or sigma <= 0:
        raise ValueError("need m, n >= 1 and sigma > 0")
    di = np.minimum(np.arange(m), m - np.arange(m))
    dj = np.minimum(np.arange(n), n - np.arange(n))
    d2 = di[:, None] ** 2 + dj[None, :] ** 2
    return LabelMap(np.exp(-d2 / (2.0 * sigma * sigma)))


def hann2d(m: int, n: int) -> np.ndarray:
    return np.outer(np.hanning(m), np.hanning(n))


def _crop_replicated(frame: np.ndarray, center: tuple[float, float],
                     size: tuple[int, int]) -> np.ndarray:
    """Crop rows x cols around center, replicating edge pixels outside the frame."""
    rows, cols = size
    fh, fw = frame.shape[:2]
    cx, cy = center
    y0 = int(np.floor(cy)) - rows // 2
    x0 = int(np.floor(cx)) - cols // 2
    if y0 >= fh or x0 >= fw or y0 + rows <= 0 or x0 + cols <= 0:
        raise ValueError("crop window lies fully outside the frame")
    ys = np.clip(y0 + np.arange(rows), 0, fh - 1)
    xs = np.clip(x0 + np.arange(cols), 0, fw - 1)
    return frame[np.ix_(ys, xs)]


def _cell_pool(a: np.ndarray, cell: int) -> np.ndarray:
    """Mean over cell x cell blocks; input dims must be multiples of cell."""
    if cell == 1:
        return a
    m, n = a.shape[0] // cell, a.shape[1] // cell
    return a.reshape(m, cell, n, cell).mean(axis=(1, 3))


HOG_BINS = 9


def _hog_cells(gray: np.ndarray, cell: int) -> np.ndarray:
    """Per-cell unsigned orientation histograms, L2-normalized over 2x2 blocks.

    Gradients come from central differences; orientations in [0, pi) fall
    into 9 bins weighted by gradient magnitude. Each cell's histogram is
    divided by the L2 energy of its 2x2 cell neighborhood (edge cells
    borrow their nearest neighbors), which keeps the channel-summation
    kernel insensitive to local contrast.
    """
    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), np.pi)  # unsigned
    bins = np.minimum((ori / np.pi * HOG_BINS).astype(np.int64), HOG_BINS - 1)

    m, n = gray.shape[0] // cell, gray.shape[1] // cell
    ci = (np.arange(gray.shape[0]) // cell)[:, None]
    cj = (np.arange(gray.shape[1]) // cell)[None, :]
    hist = np.zeros((m, n, HOG_BINS))
    flat_idx = (ci * n + cj) * HOG_BINS + bins
    np.add.at(hist.reshape(-1), flat_idx.ravel(), mag.ravel())

    energy = (hist ** 2).sum(axis=2)
    padded = np.pad(energy, ((0, 1), (0, 1)), mode="edge")
    block = padded[:-1, :-1] + padded[1:, :-1] + padded[:-1, 1:] + padded[1:, 1:]
    return hist / np.sqrt(block + 1e-12)[:, :, None]


def extract_features(frame: np.ndarray, center: tuple[float, float],
                     window: tuple[float, float], params: KcfParams) -> FeaturePatch:
    """Crop a (w, h) window around center and convert it to windowed features.

    The crop replicates edge pixels where the window leaves the frame. Cell
    grid is M = floor(h / cell) rows by N = floor(w / cell) cols; grayscale
    mode maps intensity to [-0.5, 0.5], removes the patch mean, and mean-pools
    cells; hog mode builds per-cell orientation histograms. Every channel is
    then tapered by a 2-D Hann window.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 3:
        frame = frame.mean(axis=2)
    if frame.size == 0:
        raise ValueError("frame is empty")
    win_w, win_h = window
    cell = params.cell_size
    m = int(win_h // cell)
    n = int(win_w // cell)
    if m < 1 or n < 1:
        raise ValueError(f"window {window} smaller than one {cell}px cell")

    crop = _crop_replicated(frame, center, (m * cell, n * cell))
    if params.feature_mode == "grayscale":
        g = crop / 255.0 - 0.5
        g = g - g.mean()
        feats = _cell_pool(g, cell)[:, :, None]
    else:
        feats = _hog_cells(crop / 255.0, cell)
    return FeaturePatch(feats * hann2d(m, n)[:, :, None])


def kernel_correlation(a: FeaturePatch, b: FeaturePatch, sigma: float) -> np.ndarray:
    """Gaussian kernel between ``a`` and every cyclic shift of ``b``.

    k(i, j) = exp(-max(0, ||a||^2 + ||b||^2 - 2 cross(i, j)) / (sigma^2 M N C))
    where cross = idft(sum_c conj(dft(a_c)) * dft(b_c)). The channel sum in
    the Fourier domain is what makes multi-channel features cost a single
    inverse transform. The squared distance is clamped at 0 before the
    exponential to absorb floating-point cancellation.
    """
    if a.data.shape != b.data.shape:
        raise ValueError(f"patch shapes differ: {a.data.shape} vs {b.data.shape}")
    a_hat = np.fft.fft2(a.data, axes=(0, 1))
    b_hat = np.fft.fft2(b.data, axes=(0, 1))
    return _kernel_from_spectra(a_hat, float((a.data ** 2).sum()), b_hat,
                                float((b.data ** 2).sum()), sigma)


def _kernel_from_spectra(a_hat: np.ndarray, a_sq: float, b_hat: np.ndarray,
                         b_sq: float, sigma: float) -> np.ndarray:
    m, n, c = a_hat.shape
    cross = np.fft.ifft2((np.conj(a_hat) * b_hat).sum(axis=2)).real
    dist2 = np.maximum(0.0, a_sq + b_sq - 2.0 * cross)
    return np.exp(-dist2 / (sigma * sigma * m * n * c))


def train(patch: FeaturePatch, labels: LabelMap, params: KcfParams,
          center: tuple[float, float] = (0.0, 0.0),
          target_size: tuple[float, float] = (0.0, 0.0)) -> KcfModel:
    """Closed-form kernel ridge regression over all cyclic shifts of ``patch``.

    alpha_hat = dft(labels) / (dft(k_xx) + lambda), elementwise, with k_xx the
    Gaussian auto-correlation map of the patch. lambda = 0 is permitted only
    when no kernel spectrum bin vanishes.
    """
    if (patch.m, patch.n) != (labels.m, labels.n):
        raise ValueError(
            f"patch {patch.m}x{patch.n} and labels {labels.m}x{labels.n} disagree"
        )
    k_xx = kernel_correlation(patch, patch, params.kernel_sigma)
    k_hat = np.fft.fft2(k_xx)
    if params.lambda_value == 0.0 and np.any(np.abs(k_hat) < 1e-12):
        raise ValueError("singular training system: zero kernel spectrum bin with lambda=0")
    alpha_hat = np.fft.fft2(labels.values) / (k_hat + params.lambda_value)
    template_hat = np.fft.fft2(patch.data, axes=(0, 1))
    if not (np.all(np.isfinite(alpha_hat)) and np.all(np.isfinite(template_hat))):
        raise ValueError("training produced non-finite model state")
    return KcfModel(alpha_hat, template_hat, params, (patch.m, patch.n),
                    target_size, center)


def linear_ridge_weights(patch: np.ndarray, labels: np.ndarray, lam: float) -> np.ndarray:
    """Primal ridge weights for the linear-kernel variant, in closed form.

    Solves (X^T X + lambda I)^-1 X^T y for X the all-shifts matrix of a
    single-channel patch, without building X:
    w = idft(dft(x) * dft(y) / (|dft(x)|^2 + lambda)).
    """
    x_hat = np.fft.fft2(np.asarray(patch, dtype=np.float64))
    y_hat = np.fft.fft2(np.asarray(labels, dtype=np.float64))
    w_hat = x_hat * y_hat / (x_hat * np.conj(x_hat) + lam)
    return np.fft.ifft2(w_hat).real


def respond(model: KcfModel, patch: FeaturePatch) -> ResponseMap:
    """Evaluate the filter on every cyclic shift of ``patch``.

    response = real(idft(dft(k_tz) * alpha_hat)) with k_tz the kernel map
    between the learned template and the patch; the peak offset is the
    estimated target translation.
    """
    if model.template_hat.shape != patch.data.shape:
        raise ValueError(
            f"patch shape {patch.data.shape} does not match model "
            f"{model.template_hat.shape}"
        )
    m, n, _ = model.template_hat.shape
    # Parseval: spatial energy of the template from its stored spectrum
    t_sq = float((np.abs(model.template_hat) ** 2).sum()) / (m * n)
    z_hat = np.fft.fft2(patch.data, axes=(0, 1))
    k = _kernel_from_spectra(model.template_hat, t_sq, z_hat,
                             float((patch.data ** 2).sum()), model.params.kernel_sigma)
    response = np.fft.ifft2(np.fft.fft2(k) * model.alpha_hat).real
    if not np.all(np.isfinite(response)):
        raise ValueError("response contains non-finite values")
    return ResponseMap(response)


def _window_px(bbox_w: float, bbox_h: float, params: KcfParams) -> tuple[float, float]:
    return params.padding * bbox_w, params.padding * bbox_h


def _label_sigma(bbox_w: float, bbox_h: float, params: KcfParams) -> float:
    cells = (bbox_w / params.cell_size) * (bbox_h / params.cell_size)
    return params.output_sigma_factor * float(np.sqrt(cells))


def tracker_init(frame: np.ndarray, bbox: BBox, params: KcfParams) -> KcfModel:
    """Train a fresh model on ``bbox``; the search window is the padded box."""
    fh, fw = np.asarray(frame).shape[:2]
    x1, y1, x2, y2 = bbox.corners()
    if x2 <= 0 or y2 <= 0 or x1 >= fw or y1 >= fh:
        raise ValueError("bbox lies outside the frame")
    window = _window_px(bbox.w, bbox.h, params)
    patch = extract_features(frame, (bbox.cx, bbox.cy), window, params)
    labels = gaussian_labels(patch.m, patch.n, _label_sigma(bbox.w, bbox.h, params))
    return train(patch, labels, params, center=(bbox.cx, bbox.cy),
                 target_size=(bbox.w, bbox.h))


def tracker_update(model: KcfModel, frame: np.ndarray) -> tuple[BBox, float, KcfModel]:
    """One tracking step: locate, then relearn.

    Detects the translation peak in the window around the previous center,
    moves the box by that offset (in feature cells times cell_size), then
    retrains at the new position and blends old and fresh state with the
    learning rate. A box that leaves the frame entirely is reported with
    peak value 0.0 and the model is left untouched.
    """
    frame = np.asarray(frame)
    fh, fw = frame.shape[:2]
    params = model.params
    w, h = model.target_size
    window = _window_px(w, h, params)

    try:
        patch = extract_features(frame, model.center, window, params)
    except ValueError:
        return model.bbox(), 0.0, model  # search window fully outside: lost
    (di, dj), peak_value = respond(model, patch).peak_offset()
    cx = model.center[0] + dj * params.cell_size
    cy = model.center[1] + di * params.cell_size
    bbox = BBox(cx - w / 2.0, cy - h / 2.0, w, h)

    x1, y1, x2, y2 = bbox.corners()
    if x2 <= 0 or y2 <= 0 or x1 >= fw or y1 >= fh:
        return bbox, 0.0, model  # lost: keep last valid state

    eta = params.learning_rate
    if eta == 0.0:
        return bbox, peak_value, replace(model, center=(cx, cy))

    fresh_patch = extract_features(frame, (cx, cy), window, params)
    labels = gaussian_labels(fresh_patch.m, fresh_patch.n, _label_sigma(w, h, params))
    fresh = train(fresh_patch, labels, params)
    blended = KcfModel(
        (1.0 - eta) * model.alpha_hat + eta * fresh.alpha_hat,
        (1.0 - eta) * model.template_hat + eta * fresh.template_hat,
        params,
        model.window_size,
        model.target_size,
        (cx, cy),
    )
    return bbox, peak_value, blended
