# losses.py
from typing import Optional, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from data import GaussianScene, LossWeights, RAImage, RDImage
from errors import DomainError

DTYPE = torch.float64
NORMALIZER_QUANTILE = 0.999
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2

ImageLike = Union[torch.Tensor, np.ndarray, RAImage, RDImage]


def as_tensor(image: ImageLike) -> torch.Tensor:
    if isinstance(image, (RAImage, RDImage)):
        image = image.data
    if isinstance(image, torch.Tensor):
        return image if image.dtype == DTYPE else image.to(DTYPE)
    return torch.tensor(np.asarray(image, dtype=np.float64), dtype=DTYPE)


def _check_shapes(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise DomainError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def gaussian_window(window: int, sigma: Optional[float] = None) -> torch.Tensor:
    if window < 1 or window % 2 == 0:
        raise DomainError(f"SSIM window must be a positive odd count, got {window}")
    sigma = window / 6.0 if sigma is None else sigma
    offsets = torch.arange(window, dtype=DTYPE) - (window - 1) / 2.0
    taps = torch.exp(-0.5 * (offsets / sigma) ** 2)
    return taps / taps.sum()


def _blur(images: torch.Tensor, taps: torch.Tensor) -> torch.Tensor:
    # separable valid convolution over the last two axes of (N, 1, H, W)
    k = taps.numel()
    out = F.conv2d(images, taps.reshape(1, 1, k, 1))
    return F.conv2d(out, taps.reshape(1, 1, 1, k))


def ssim_batch(a: torch.Tensor, b: torch.Tensor, window: int, sigma: Optional[float] = None) -> torch.Tensor:
    """Mean local SSIM per image of two (N, H, W) stacks on unit dynamic range."""
    _check_shapes(a, b)
    if a.dim() != 3:
        raise DomainError(f"ssim_batch expects (N, H, W) stacks, got shape {tuple(a.shape)}")
    taps = gaussian_window(window, sigma)
    if min(a.shape[-2:]) < window:
        raise DomainError(f"image {tuple(a.shape[-2:])} is smaller than the {window}-bin SSIM window")
    n = a.shape[0]
    stack = torch.cat([a, b, a * a, b * b, a * b], dim=0).unsqueeze(1)
    mu_a, mu_b, aa, bb, ab = _blur(stack, taps).squeeze(1).split(n, dim=0)
    var_a = (aa - mu_a * mu_a).clamp_min(0.0)
    var_b = (bb - mu_b * mu_b).clamp_min(0.0)
    cov = ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return (num / den).mean(dim=(-2, -1))


def l1(a: ImageLike, b: ImageLike) -> torch.Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _check_shapes(ta, tb)
    return F.l1_loss(ta, tb)


def ssim(a: ImageLike, b: ImageLike, w: LossWeights) -> torch.Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _check_shapes(ta, tb)
    if ta.dim() != 2:
        raise DomainError(f"ssim expects a 2-D image, got shape {tuple(ta.shape)}")
    return ssim_batch(ta[None], tb[None], w.ssim_window)[0]


def normalizer(measured: ImageLike) -> float:
    # 99.9th percentile of the measured image, 1 when it vanishes
    tm = as_tensor(measured).detach()
    if tm.numel() == 0:
        return 1.0
    value = float(torch.quantile(tm.flatten(), NORMALIZER_QUANTILE))
    return value if value > 0.0 else 1.0


def normalizers(measured: torch.Tensor) -> torch.Tensor:
    if measured.shape[0] == 0:
        return torch.ones(0, dtype=DTYPE)
    values = torch.quantile(measured.detach().reshape(measured.shape[0], -1), NORMALIZER_QUANTILE, dim=1)
    return torch.where(values > 0.0, values, torch.ones_like(values))


def image_loss_batch(
    rendered: torch.Tensor,
    measured: torch.Tensor,
    scale: Optional[torch.Tensor],
    w: LossWeights,
) -> torch.Tensor:
    """Per-image (1 - lambda) L1 + lambda (1 - SSIM) over (N, H, W) stacks.

    L1 compares raw intensities. SSIM compares both images divided by the
    measured normaliser and clamped to [0, 1].
    """
    _check_shapes(rendered, measured)
    loss = (1.0 - w.lambda_ssim) * (rendered - measured).abs().mean(dim=(-2, -1))
    if w.lambda_ssim > 0.0:
        s = normalizers(measured) if scale is None else scale
        s = s.reshape(-1, 1, 1)
        nr = (rendered / s).clamp(0.0, 1.0)
        nm = (measured / s).clamp(0.0, 1.0)
        loss = loss + w.lambda_ssim * (1.0 - ssim_batch(nr, nm, w.ssim_window))
    return loss


def image_loss(rendered: ImageLike, measured: ImageLike, w: LossWeights) -> torch.Tensor:
    tr, tm = as_tensor(rendered), as_tensor(measured)
    _check_shapes(tr, tm)
    return image_loss_batch(tr[None], tm[None], None, w)[0]


def scale_reg(scene: Union[GaussianScene, torch.Tensor, np.ndarray], w: LossWeights) -> torch.Tensor:
    """Mean over Gaussians of max(0, max(S) - s_reg)^2."""
    scales = as_tensor(scene.scales) if isinstance(scene, GaussianScene) else as_tensor(scene)
    if scales.numel() == 0:
        return torch.zeros((), dtype=DTYPE)
    excess = F.relu(scales.reshape(-1, 2).max(dim=1).values - w.scale_reg)
    return (excess * excess).mean()


def stage_loss(
    stage: str,
    ra_renders: Sequence[ImageLike],
    ra_measured: Sequence[ImageLike],
    scene: Union[GaussianScene, torch.Tensor],
    w: LossWeights,
    rd_renders: Sequence[Optional[ImageLike]] = (),
    rd_measured: Sequence[Optional[ImageLike]] = (),
) -> torch.Tensor:
    """Objective of one backend stage over the keyframes of its window.

    pose: RA + rd_weight * RD; map: RA + lambda_scale * scale_reg; ba: all terms.
    RD pairs with a missing render or measurement (keyframe 0) are skipped.
    """
    if stage not in ("pose", "map", "ba"):
        raise DomainError(f"unknown stage '{stage}'")
    if len(ra_renders) == 0:
        raise DomainError("stage_loss needs at least one keyframe")
    if len(ra_renders) != len(ra_measured):
        raise DomainError("renders and measurements differ in length")

    total = torch.zeros((), dtype=DTYPE)
    for rendered, measured in zip(ra_renders, ra_measured):
        total = total + image_loss(rendered, measured, w)
    if stage in ("pose", "ba"):
        for rendered_rd, measured_rd in zip(rd_renders, rd_measured):
            if rendered_rd is None or measured_rd is None:
                continue
            total = total + w.rd_weight * image_loss(rendered_rd, measured_rd, w)
    if stage in ("map", "ba"):
        total = total + w.lambda_scale * scale_reg(scene, w)
    return total
