# renderer.py
"""Differentiable radar forward model.

RA rendering splats every Gaussian in polar space weighted by the radar
equation, RD rendering soft-bins the RA image along Doppler using the
per-bin Doppler of the ego-velocity. Everything is evaluated in float64
torch so that autograd gives the exact derivatives of this forward model
with respect to poses, velocities and Gaussian parameters.
"""
from dataclasses import dataclass
import functools
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from data import (DopplerMap, Gaussian2D, GaussianScene, GradientBundle, LossSpec, LossWeights, Pose2,
                  RAImage, RadarConfig, RDImage, Vel2, WindowView)
from errors import DomainError, NumericalError
import logger
import losses
from radar_model import grid_from_config, world_to_sensor

log = logger.get_logger()

DTYPE = torch.float64
EPS_RANGE = 1e-6
POLAR_REG = 1e-8
FOOTPRINT = 9.0     # squared Mahalanobis radius of the 3-sigma footprint
DOPPLER_SIGN = 1.0  # positive Doppler = velocity component along the bin direction
VIEW_CHUNK = 16      # views rendered per autograd graph


@dataclass(frozen=True)
class GridTensors:
    ranges: torch.Tensor
    azimuths: torch.Tensor
    dopplers: torch.Tensor
    gain: torch.Tensor


@functools.lru_cache(maxsize=32)
def grid_tensors(cfg: RadarConfig) -> GridTensors:
    grid = grid_from_config(cfg)
    return GridTensors(
        ranges=torch.tensor(grid.range_centers, dtype=DTYPE),
        azimuths=torch.tensor(grid.azimuth_centers, dtype=DTYPE),
        dopplers=torch.tensor(grid.doppler_centers, dtype=DTYPE),
        gain=torch.tensor(cfg.gain, dtype=DTYPE),
    )


def _wrap(angle: torch.Tensor) -> torch.Tensor:
    return torch.remainder(angle + math.pi, 2.0 * math.pi) - math.pi


def _scalar(value: float) -> torch.Tensor:
    return torch.tensor(float(value), dtype=DTYPE)


def project_t(means: torch.Tensor, orient: torch.Tensor, scales: torch.Tensor,
              x: torch.Tensor, y: torch.Tensor, yaw: torch.Tensor
              ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    # range, azimuth and polar covariance entries (rr, ra, aa)
    c, s = torch.cos(yaw), torch.sin(yaw)
    dx = means[:, 0] - x
    dy = means[:, 1] - y
    px = c * dx + s * dy
    py = -s * dx + c * dy
    rng = torch.sqrt(px * px + py * py)
    phi = torch.atan2(py, px)

    # Rot(-phi) Rot(-yaw) Rot(theta) = Rot(alpha)
    alpha = orient - yaw - phi
    ca, sa = torch.cos(alpha), torch.sin(alpha)
    s1 = scales[:, 0] * scales[:, 0]
    s2 = scales[:, 1] * scales[:, 1]
    m00 = ca * ca * s1 + sa * sa * s2
    m11 = sa * sa * s1 + ca * ca * s2
    m01 = ca * sa * (s1 - s2)
    return rng, phi, m00, m01 / rng, m11 / (rng * rng)


def _azimuth_step(cfg: RadarConfig) -> float:
    return cfg.azimuth_fov / (cfg.n_azimuth - 1) if cfg.n_azimuth > 1 else 2.0 * math.pi


def _footprints(means: torch.Tensor, orient: torch.Tensor, scales: torch.Tensor,
                x: torch.Tensor, y: torch.Tensor, yaw: torch.Tensor, cfg: RadarConfig
                ) -> Tuple[torch.Tensor, ...]:
    """Visible (view, Gaussian) pairs with their nearest bin and patch half-widths.

    The marginal Mahalanobis distance bounds the joint one from below, so a
    pair is dropped only when no bin centre can fall inside its footprint,
    and the patch always covers every bin that can.
    """
    gt = grid_tensors(cfg)
    n_views, n_gauss = x.shape[0], means.shape[0]
    step = _azimuth_step(cfg)
    reach = math.sqrt(FOOTPRINT)
    with torch.no_grad():
        view = torch.arange(n_views).repeat_interleave(n_gauss)
        gauss = torch.arange(n_gauss).repeat(n_views)
        rng, phi, rr, _, aa = project_t(means.detach()[gauss], orient.detach()[gauss], scales.detach()[gauss],
                                        x.detach()[view], y.detach()[view], yaw.detach()[view])
        keep = rng >= EPS_RANGE
        safe_rng = torch.where(keep, rng, torch.ones_like(rng))
        sd_r = torch.sqrt(rr + POLAR_REG)
        sd_a = torch.sqrt(torch.where(keep, aa, torch.ones_like(aa)) + POLAR_REG)

        c_r = torch.round(safe_rng / cfg.range_res - 0.5).clamp(0, cfg.n_range - 1).long()
        d_azimuth, c_a = _wrap(gt.azimuths[None, :] - phi[:, None]).abs().min(dim=1)
        keep &= (gt.ranges[c_r] - safe_rng).abs() <= reach * sd_r
        keep &= d_azimuth <= reach * sd_a

        h_r = torch.ceil((reach * sd_r / cfg.range_res).clamp(max=cfg.n_range)).long() + 1
        h_a = torch.ceil((reach * sd_a / step).clamp(max=cfg.n_azimuth)).long() + 1
        # footprints that can wrap around the unobserved sector take the whole row
        wraps = 2.0 * reach * sd_a + step >= 2.0 * math.pi - cfg.azimuth_fov
        h_a = torch.where(wraps, torch.full_like(h_a, cfg.n_azimuth), h_a)
        h_r = h_r.clamp(max=cfg.n_range)
        h_a = h_a.clamp(max=cfg.n_azimuth)
        pairs = keep.nonzero().reshape(-1)
    return view[pairs], gauss[pairs], c_r[pairs], c_a[pairs], h_r[pairs], h_a[pairs]


def render_ra_batch_t(means: torch.Tensor, orient: torch.Tensor, scales: torch.Tensor, power: torch.Tensor,
                      x: torch.Tensor, y: torch.Tensor, yaw: torch.Tensor, cfg: RadarConfig) -> torch.Tensor:
    """RA images of one scene seen from V poses, shape (V, Nr, Na).

    Each visible Gaussian is evaluated on a patch of bins around its centre
    and scattered into the flat image stack with index_add. Pairs are
    grouped by patch size so every group is one vectorised evaluation.
    """
    gt = grid_tensors(cfg)
    n_views = x.shape[0]
    nr, na = cfg.n_range, cfg.n_azimuth
    flat = torch.zeros(n_views * nr * na, dtype=DTYPE)
    if means.shape[0] == 0 or n_views == 0:
        return flat.reshape(n_views, nr, na)
    view, gauss, c_r, c_a, h_r, h_a = _footprints(means, orient, scales, x, y, yaw, cfg)
    if view.numel() == 0:
        return flat.reshape(n_views, nr, na)

    rng, phi, rr, ra, aa = project_t(means[gauss], orient[gauss], scales[gauss], x[view], y[view], yaw[view])
    rr = rr + POLAR_REG
    aa = aa + POLAR_REG
    det = rr * aa - ra * ra
    i_rr, i_ra, i_aa = aa / det, -ra / det, rr / det
    amplitude = cfg.power_const * power[gauss] / rng ** 4

    keys = h_r * (na + 1) + h_a
    for key in torch.unique(keys).tolist():
        sel = (keys == key).nonzero().reshape(-1)
        hr, ha = divmod(int(key), na + 1)
        ri = c_r[sel, None] + torch.arange(-hr, hr + 1)
        ai = c_a[sel, None] + torch.arange(-ha, ha + 1)
        inside = ((ri >= 0) & (ri < nr))[:, :, None] & ((ai >= 0) & (ai < na))[:, None, :]
        ri = ri.clamp(0, nr - 1)
        ai = ai.clamp(0, na - 1)

        d_r = (gt.ranges[ri] - rng[sel, None])[:, :, None]            # (P, 2hr+1, 1)
        d_a = _wrap(gt.azimuths[ai] - phi[sel, None])[:, None, :]     # (P, 1, 2ha+1)
        q = (i_rr[sel, None, None] * d_r * d_r + 2.0 * i_ra[sel, None, None] * d_r * d_a
             + i_aa[sel, None, None] * d_a * d_a)
        mask = inside & (q.detach() <= FOOTPRINT)
        target = view[sel, None, None] * (nr * na) + ri[:, :, None] * na + ai[:, None, :]
        values = amplitude[sel, None, None] * torch.exp(-0.5 * q)
        flat = flat.index_add(0, target[mask], values[mask])
    return flat.reshape(n_views, nr, na)


def render_ra_t(means: torch.Tensor, orient: torch.Tensor, scales: torch.Tensor, power: torch.Tensor,
                x: torch.Tensor, y: torch.Tensor, yaw: torch.Tensor, cfg: RadarConfig) -> torch.Tensor:
    return render_ra_batch_t(means, orient, scales, power, x.reshape(1), y.reshape(1), yaw.reshape(1), cfg)[0]


def ego_velocity_t(x: torch.Tensor, y: torch.Tensor, yaw: torch.Tensor,
                   px: torch.Tensor, py: torch.Tensor, dt: Union[float, torch.Tensor]
                   ) -> Tuple[torch.Tensor, torch.Tensor]:
    if not bool(torch.all(torch.as_tensor(dt) > 0.0)):
        raise DomainError(f"time difference must be positive, got {dt}")
    c, s = torch.cos(yaw), torch.sin(yaw)
    dx = (x - px) / dt
    dy = (y - py) / dt
    return c * dx + s * dy, -s * dx + c * dy


def doppler_row_t(vx: torch.Tensor, vy: torch.Tensor, cfg: RadarConfig) -> torch.Tensor:
    """Doppler of every azimuth bin for velocities of shape (...), shape (..., Na)."""
    gt = grid_tensors(cfg)
    return DOPPLER_SIGN * (vx[..., None] * torch.cos(gt.azimuths) + vy[..., None] * torch.sin(gt.azimuths))


def doppler_map_t(vx: torch.Tensor, vy: torch.Tensor, cfg: RadarConfig) -> torch.Tensor:
    return doppler_row_t(vx, vy, cfg)[None, :].expand(cfg.n_range, cfg.n_azimuth)


def _doppler_kernel(doppler: torch.Tensor, cfg: RadarConfig) -> torch.Tensor:
    gt = grid_tensors(cfg)
    diff = doppler[..., None] - gt.dopplers
    sigma = cfg.kernel_sigma
    kernel = torch.exp(-(diff * diff) / (2.0 * sigma * sigma))
    if cfg.bin_window < cfg.n_doppler:
        order = torch.argsort(diff.detach().abs(), dim=-1, stable=True)
        nearest = torch.zeros(kernel.shape, dtype=torch.bool)
        nearest.scatter_(-1, order[..., :cfg.bin_window], True)
        kernel = torch.where(nearest, kernel, torch.zeros_like(kernel))
    return kernel


def render_rd_t(ra: torch.Tensor, doppler: torch.Tensor, cfg: RadarConfig) -> torch.Tensor:
    """Soft-bin RA images (..., Nr, Na) along Doppler.

    doppler is a full map shaped like ra, or one row (..., Na) shared by all range bins.
    """
    weighted = ra * grid_tensors(cfg).gain
    kernel = _doppler_kernel(doppler, cfg)
    if doppler.shape == ra.shape:
        return torch.einsum('...ra,...rad->...rd', weighted, kernel)
    return torch.einsum('...ra,...ad->...rd', weighted, kernel)


def _scene_tensors(scene: GaussianScene) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    return (
        torch.tensor(scene.means, dtype=DTYPE).reshape(-1, 2),
        torch.tensor(scene.orient, dtype=DTYPE).reshape(-1),
        torch.tensor(scene.scales, dtype=DTYPE).reshape(-1, 2),
        torch.tensor(scene.power, dtype=DTYPE).reshape(-1),
    )


def _pose_tensors(pose: Pose2) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    return _scalar(pose.x), _scalar(pose.y), _scalar(pose.yaw)


def project_to_polar(g: Gaussian2D, pose: Pose2) -> Optional[Tuple[float, float, np.ndarray]]:
    """Range, azimuth and 2x2 polar covariance of g seen from pose; None when g sits on the sensor."""
    p = world_to_sensor(g.mean, pose)
    if math.hypot(p[0], p[1]) < EPS_RANGE:
        return None
    means = torch.tensor([g.mean], dtype=DTYPE)
    rng, phi, rr, ra, aa = project_t(
        means, _scalar(g.orient)[None], torch.tensor([g.scales], dtype=DTYPE), *_pose_tensors(pose)
    )
    cov = np.array([[float(rr[0]), float(ra[0])], [float(ra[0]), float(aa[0])]])
    return float(rng[0]), float(phi[0]), cov


def render_ra(scene: GaussianScene, pose: Pose2, cfg: RadarConfig) -> RAImage:
    with torch.no_grad():
        image = render_ra_t(*_scene_tensors(scene), *_pose_tensors(pose), cfg)
    return RAImage(image.numpy().copy())


def ego_velocity_from_poses(T_k: Pose2, T_km1: Pose2, dt: float) -> Vel2:
    x, y, yaw = _pose_tensors(T_k)
    vx, vy = ego_velocity_t(x, y, yaw, _scalar(T_km1.x), _scalar(T_km1.y), dt)
    return Vel2(float(vx), float(vy))


def gaussian_doppler(g: Gaussian2D, pose: Pose2, v: Vel2) -> Optional[float]:
    p = world_to_sensor(g.mean, pose)
    norm = math.hypot(p[0], p[1])
    if norm < EPS_RANGE:
        return None
    return DOPPLER_SIGN * (p[0] * v.vx + p[1] * v.vy) / norm


def render_doppler_map(v: Vel2, cfg: RadarConfig) -> DopplerMap:
    with torch.no_grad():
        dop = doppler_map_t(_scalar(v.vx), _scalar(v.vy), cfg)
    return DopplerMap(dop.numpy().copy())


def render_rd(ra: RAImage, dop: DopplerMap, cfg: RadarConfig) -> RDImage:
    expected = (cfg.n_range, cfg.n_azimuth)
    if ra.data.shape != expected or dop.data.shape != expected:
        raise DomainError(f"render_rd expects {expected} inputs, got {ra.data.shape} and {dop.data.shape}")
    with torch.no_grad():
        doppler = torch.tensor(dop.data, dtype=DTYPE)
        if bool(torch.all(doppler == doppler[:1])):
            doppler = doppler[0]
        rd = render_rd_t(torch.tensor(ra.data, dtype=DTYPE), doppler, cfg)
    return RDImage(np.clip(rd.numpy(), 0.0, None))


class WindowProblem:
    """Loss of one backend stage over a window of keyframes, as a function of torch leaf tensors.

    Pose and scene parameters live in separate leaves so the optimiser can
    give each group its own step size. Fixed poses (the gauge anchor) stay
    in the pose tensors but their gradients are zeroed and their values
    restored after every update.
    """

    def __init__(self, scene: GaussianScene, views: Sequence[WindowView], cfg: RadarConfig,
                 spec: LossSpec, weights: LossWeights) -> None:
        if not views:
            raise DomainError("optimisation window is empty")
        self.cfg = cfg
        self.spec = spec
        self.weights = weights
        self.views: List[WindowView] = list(views)
        self.bounds = scene.bounds
        self.max_gaussians = scene.max_gaussians

        for i, view in enumerate(self.views):
            if view.previous is not None and not 0 <= view.previous < len(self.views):
                raise DomainError(f"view {i} refers to predecessor {view.previous} outside the window")
            if (view.previous is not None or view.previous_pose is not None) and not view.dt > 0:
                raise DomainError(f"view {i} has non-positive time step {view.dt}")

        self.xy = torch.tensor([[v.pose.x, v.pose.y] for v in self.views], dtype=DTYPE)
        self.yaw = torch.tensor([v.pose.yaw for v in self.views], dtype=DTYPE)
        self.xy.requires_grad_(spec.grad_poses)
        self.yaw.requires_grad_(spec.grad_poses)
        self._fixed = torch.tensor([v.fixed or not spec.grad_poses for v in self.views])
        self._initial_xy = self.xy.detach().clone()
        self._initial_yaw = self.yaw.detach().clone()

        self.means, self.orient, self.scales, self.power = _scene_tensors(scene)
        for t in (self.means, self.orient, self.scales, self.power):
            t.requires_grad_(spec.grad_gaussians)

        self._measured_ra = self._stack([v.measured_ra for v in self.views], (cfg.n_range, cfg.n_azimuth), "RA")
        self._ra_scale = losses.normalizers(self._measured_ra)
        rd_views = [i for i, v in enumerate(self.views) if v.measured_rd is not None]
        self._rd_row = {i: k for k, i in enumerate(rd_views)}
        measured_rd = [v.measured_rd for v in self.views if v.measured_rd is not None]
        self._measured_rd = self._stack(measured_rd, (cfg.n_range, cfg.n_doppler), "RD")
        self._rd_scale = losses.normalizers(self._measured_rd)

    @staticmethod
    def _stack(images: Sequence[losses.ImageLike], shape: Tuple[int, int], kind: str) -> torch.Tensor:
        tensors = [losses.as_tensor(image) for image in images]
        for i, t in enumerate(tensors):
            if tuple(t.shape) != shape:
                raise DomainError(f"measured {kind} image {i} has shape {tuple(t.shape)}, expected {shape}")
        return torch.stack(tensors) if tensors else torch.zeros((0, *shape), dtype=DTYPE)

    # parameters

    def _pose_values(self) -> Tuple[torch.Tensor, torch.Tensor]:
        # fixed poses read their initial values, so no gradient reaches them
        xy = torch.where(self._fixed[:, None], self._initial_xy, self.xy)
        yaw = torch.where(self._fixed, self._initial_yaw, self.yaw)
        return xy, yaw

    def _velocities(self, chunk: Sequence[int], xy: torch.Tensor, yaw: torch.Tensor
                    ) -> Tuple[List[int], Optional[Tuple[torch.Tensor, torch.Tensor]]]:
        # positions inside chunk with an RD term, and their body velocities
        local: List[int] = []
        previous: List[torch.Tensor] = []
        dts: List[float] = []
        for k, i in enumerate(chunk):
            view = self.views[i]
            if i not in self._rd_row:
                continue
            if view.previous is not None:
                previous.append(xy[view.previous])
            elif view.previous_pose is not None:
                previous.append(torch.tensor([view.previous_pose.x, view.previous_pose.y], dtype=DTYPE))
            else:
                continue
            local.append(k)
            dts.append(view.dt)
        if not local:
            return local, None
        index = torch.tensor([chunk[k] for k in local])
        prev = torch.stack(previous)
        dt = torch.tensor(dts, dtype=DTYPE)
        return local, ego_velocity_t(xy[index, 0], xy[index, 1], yaw[index], prev[:, 0], prev[:, 1], dt)

    def leaves(self) -> Dict[str, torch.Tensor]:
        return {"pose.xy": self.xy, "pose.yaw": self.yaw, "gaussian.mean": self.means,
                "gaussian.orient": self.orient, "gaussian.scales": self.scales, "gaussian.power": self.power}

    def parameter_groups(self, lr: Dict[str, float]) -> List[Dict[str, object]]:
        groups: List[Dict[str, object]] = []
        for name, tensor in self.leaves().items():
            if tensor.requires_grad and tensor.numel() > 0 and lr.get(name, 0.0) > 0.0:
                groups.append({"params": [tensor], "lr": lr[name], "name": name})
        return groups

    # loss

    def chunk_loss(self, chunk: Sequence[int]) -> torch.Tensor:
        xy, yaw = self._pose_values()
        index = torch.tensor(list(chunk))
        rendered = render_ra_batch_t(self.means, self.orient, self.scales, self.power,
                                     xy[index, 0], xy[index, 1], yaw[index], self.cfg)
        loss = losses.image_loss_batch(rendered, self._measured_ra[index], self._ra_scale[index], self.weights).sum()
        if self.spec.stage in ("pose", "ba") and self.spec.use_rd and self._rd_row:
            local, velocity = self._velocities(chunk, xy, yaw)
            if velocity is not None:
                rows = torch.tensor([self._rd_row[chunk[k]] for k in local])
                rendered_rd = render_rd_t(rendered[torch.tensor(local)], doppler_row_t(*velocity, self.cfg), self.cfg)
                rd = losses.image_loss_batch(rendered_rd, self._measured_rd[rows], self._rd_scale[rows], self.weights)
                loss = loss + self.weights.rd_weight * rd.sum()
        return loss

    def regularizer(self) -> torch.Tensor:
        if self.spec.stage in ("map", "ba"):
            return self.weights.lambda_scale * losses.scale_reg(self.scales, self.weights)
        return torch.zeros((), dtype=DTYPE)

    def zero_grad(self) -> None:
        for tensor in self.leaves().values():
            tensor.grad = None

    def evaluate(self, backward: bool = False) -> float:
        """Total stage loss; with backward=True gradients accumulate chunk by chunk."""
        self.zero_grad()
        total = 0.0
        n = len(self.views)
        chunks = [range(start, min(start + VIEW_CHUNK, n)) for start in range(0, n, VIEW_CHUNK)]
        terms = [lambda c=c: self.chunk_loss(c) for c in chunks] + [self.regularizer]
        for term in terms:
            if backward:
                value = term()
                if value.requires_grad:
                    value.backward()
            else:
                with torch.no_grad():
                    value = term()
            total += float(value)
        if not math.isfinite(total):
            raise NumericalError(f"non-finite {self.spec.stage} loss")
        if backward:
            self._check_gradients()
        return total

    def _check_gradients(self) -> None:
        for name, tensor in self.leaves().items():
            if tensor.grad is None:
                continue
            if name.startswith("pose."):
                tensor.grad[self._fixed] = 0.0
            bad = ~torch.isfinite(tensor.grad)
            if bool(bad.any()):
                index = int(bad.reshape(bad.shape[0], -1).any(dim=1).nonzero()[0, 0])
                label = f"pose[{index}].{name.split('.')[1]}" if name.startswith("pose.") else f"gaussian[{index}].{name.split('.')[1]}"
                raise NumericalError("non-finite gradient", parameter=label)

    # state

    def project_(self, s_min: float, s_max: float) -> None:
        with torch.no_grad():
            self.scales.clamp_(s_min, s_max)
            self.power.clamp_(min=0.0)
            self.xy[self._fixed] = self._initial_xy[self._fixed]
            self.yaw[self._fixed] = self._initial_yaw[self._fixed]

    def snapshot(self) -> Tuple[torch.Tensor, ...]:
        return tuple(t.detach().clone() for t in self.leaves().values())

    def restore(self, state: Tuple[torch.Tensor, ...]) -> None:
        with torch.no_grad():
            for tensor, saved in zip(self.leaves().values(), state):
                tensor.copy_(saved)

    def poses(self) -> List[Pose2]:
        xy = self.xy.detach().numpy()
        yaw = self.yaw.detach().numpy()
        return [Pose2(float(xy[i, 0]), float(xy[i, 1]), float(yaw[i])) for i in range(len(self.views))]

    def scene(self) -> GaussianScene:
        return GaussianScene(
            self.means.detach().numpy().copy(),
            self.orient.detach().numpy().copy(),
            self.scales.detach().numpy().copy(),
            self.power.detach().numpy().copy(),
            self.bounds,
            self.max_gaussians,
        )

    def gradients(self) -> GradientBundle:
        def grad(t: torch.Tensor) -> Optional[np.ndarray]:
            if not t.requires_grad:
                return None
            return np.zeros(tuple(t.shape)) if t.grad is None else t.grad.detach().numpy().copy()

        bundle = GradientBundle()
        if self.spec.grad_poses:
            d_xy, d_yaw = grad(self.xy), grad(self.yaw)
            assert d_xy is not None and d_yaw is not None
            bundle.d_pose = np.concatenate([d_xy, d_yaw[:, None]], axis=1)
        if self.spec.grad_gaussians:
            bundle.d_mean = grad(self.means)
            bundle.d_orient = grad(self.orient)
            bundle.d_scales = grad(self.scales)
            bundle.d_power = grad(self.power)
        return bundle


def render_with_grads(scene: GaussianScene, views: Sequence[WindowView], cfg: RadarConfig,
                      loss_spec: LossSpec, weights: Optional[LossWeights] = None) -> Tuple[float, GradientBundle]:
    """Stage loss over the window and its gradients for the parameter groups loss_spec requests."""
    problem = WindowProblem(scene, views, cfg, loss_spec, weights or LossWeights())
    loss = problem.evaluate(backward=True)
    return loss, problem.gradients()
