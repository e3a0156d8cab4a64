"""Procedural terrain scenes with analytic ground truth.

Every scene is a heightfield ``z(u, v)`` over a flat ground plane ``z = 0``:
seeded cosine hills plus raised-cosine rocks. Relative depth is rendered from
a fixed oblique view as ``D = near + span * (H - 1 - v) / (H - 1) - z`` so
that elevated terrain is closer to the camera. RGB comes from per-material
albedo, overhead Lambertian shading, additive depth-proportional airlight
and texture noise.

A vegetation region, separated from the ground by a wavy boundary, carries
the annotation ambiguity: inside a band around the boundary every annotator
places the traversable edge at a different, smoothly varying offset.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dense_maps import load_dmap, save_dmap
from .rasters import read_ppm, write_ppm

__all__ = [
    "PRESETS",
    "SceneParams",
    "Scene",
    "generate_scene",
    "generate_dataset",
    "annotator_relabel",
    "write_dataset",
    "load_dataset",
    "SLOPE_LIMIT",
    "HEIGHT_LIMIT",
]

PRESETS = ("easy", "ambiguous_boundary", "slope_hazard", "elevated_obstacle", "mixed")

# traversable ground must be flatter and lower than this (pixel units)
SLOPE_LIMIT = 0.3
HEIGHT_LIMIT = 0.1
ROCK_FOOTPRINT = 0.02
HILL_THRESHOLD = 0.2
# ripple height relative to hill height
RIPPLE = 0.01

DEPTH_NEAR = 48.0
DEPTH_SPAN = 6.0
AIRLIGHT = 0.03  # per unit of depth
# airlight is zero at this depth, safely nearer than any rendered terrain
AIRLIGHT_ORIGIN = DEPTH_NEAR - 6.0

GROUND = np.array([0.58, 0.47, 0.33])
VEGETATION = np.array([0.26, 0.50, 0.22])
ROCK = np.array([0.50, 0.52, 0.60])
MARGIN = np.array([0.12, 0.12, 0.18])
HAZE = np.array([0.75, 0.80, 0.88])

_PRESET_DEFAULTS = {
    "easy": dict(amplitude=0.0, smoothness=0.8, band_width=0.0, obstacle_count=0, vegetation=False),
    "ambiguous_boundary": dict(amplitude=0.0, smoothness=0.8, band_width=12.0, obstacle_count=0, vegetation=True),
    "slope_hazard": dict(amplitude=5.0, smoothness=0.8, band_width=0.0, obstacle_count=0, vegetation=False),
    "elevated_obstacle": dict(amplitude=0.0, smoothness=0.8, band_width=0.0, obstacle_count=4, vegetation=False),
    "mixed": dict(amplitude=1.75, smoothness=0.15, band_width=6.0, obstacle_count=2, vegetation=True),
}


@dataclass(frozen=True)
class SceneParams:
    rng_seed: int = 0
    height: int = 64
    width: int = 64
    preset: str = "easy"
    amplitude: float | None = None
    smoothness: float | None = None
    band_width: float | None = None
    obstacle_count: int | None = None
    obstacle_height: tuple[float, float] = (1.5, 4.0)
    texture_noise: float = 0.03
    margin: int = 2

    def resolved(self) -> "SceneParams":
        """Copy with preset defaults filled in for every ``None`` field."""
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; expected one of {PRESETS}")
        d = _PRESET_DEFAULTS[self.preset]
        out = replace(
            self,
            amplitude=d["amplitude"] if self.amplitude is None else float(self.amplitude),
            smoothness=d["smoothness"] if self.smoothness is None else float(self.smoothness),
            band_width=d["band_width"] if self.band_width is None else float(self.band_width),
            obstacle_count=d["obstacle_count"] if self.obstacle_count is None else int(self.obstacle_count),
            obstacle_height=tuple(float(x) for x in self.obstacle_height),
        )
        out._validate()
        return out

    @property
    def has_vegetation(self) -> bool:
        return _PRESET_DEFAULTS[self.preset]["vegetation"]

    def _validate(self):
        if self.height < 16 or self.width < 16:
            raise ValueError("scene dimensions must be at least 16x16")
        if self.band_width < 0:
            raise ValueError("band_width must be >= 0")
        if self.amplitude < 0 or self.smoothness <= 0:
            raise ValueError("amplitude must be >= 0 and smoothness > 0")
        if self.obstacle_count < 0:
            raise ValueError("obstacle_count must be >= 0")
        lo, hi = self.obstacle_height
        if not 0 < lo <= hi:
            raise ValueError("obstacle_height must satisfy 0 < lo <= hi")
        if self.texture_noise < 0:
            raise ValueError("texture_noise must be >= 0")
        if self.margin < 0 or 2 * self.margin >= min(self.height, self.width):
            raise ValueError("margin out of range")


@dataclass
class Scene:
    params: SceneParams
    rgb: np.ndarray  # (3, H, W), 8-bit quantized
    depth: np.ndarray  # float32-representable
    label: np.ndarray
    oracle: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def band(self) -> np.ndarray:
        return self.oracle["band"]


def _cosines(rng, u, v, k, wavelength):
    """Seeded sum of ``k`` plane cosines in [-1, 1] and its gradient."""
    angles = rng.uniform(0, 2 * np.pi, k)
    wavelengths = wavelength * rng.uniform(0.8, 1.5, k)
    phases = rng.uniform(0, 2 * np.pi, k)
    weights = rng.uniform(0.5, 1.0, k)
    weights /= weights.sum()
    g = np.zeros_like(u)
    gu = np.zeros_like(u)
    gv = np.zeros_like(u)
    for a, lam, ph, wt in zip(angles, wavelengths, phases, weights):
        ku, kv = 2 * np.pi / lam * np.cos(a), 2 * np.pi / lam * np.sin(a)
        arg = ku * u + kv * v + ph
        g += wt * np.cos(arg)
        gu -= wt * ku * np.sin(arg)
        gv -= wt * kv * np.sin(arg)
    return g, gu, gv


def _hills(params: SceneParams, rng, u, v):
    """Unit-amplitude terrain shape and its gradient; scale both by amplitude.

    Hills rise where a cosine field exceeds a threshold, through a smoothstep
    ramp whose width is ``params.smoothness`` (small values give
    steep-sided plateaus). A faint ripple keeps the gradient nonzero almost
    everywhere.
    """
    size = min(params.height, params.width)
    g, gu, gv = _cosines(rng, u, v, 4, 0.45 * size)
    r, ru, rv = _cosines(rng, u, v, 3, 0.25 * size)
    t = (g - HILL_THRESHOLD) / params.smoothness
    inside = (t > 0) & (t < 1)
    tc = np.clip(t, 0.0, 1.0)
    shape = tc * tc * (3 - 2 * tc)
    ramp = np.where(inside, 6 * tc * (1 - tc) / params.smoothness, 0.0)
    z = shape + RIPPLE * r
    return z, ramp * gu + RIPPLE * ru, ramp * gv + RIPPLE * rv


def _rocks(params: SceneParams, rng, u, v):
    z = np.zeros_like(u)
    zu = np.zeros_like(u)
    zv = np.zeros_like(u)
    m = params.margin
    lo, hi = params.obstacle_height
    # fixed draw count keeps other scene content independent of obstacle_count
    for i in range(8):
        cu = rng.uniform(m + 4, params.width - 1 - m - 4)
        cv = rng.uniform(m + 4, params.height - 1 - m - 4)
        radius = rng.uniform(3.0, 6.0)
        top = rng.uniform(lo, hi)
        if i >= params.obstacle_count:
            continue
        du, dv = u - cu, v - cv
        rho = np.hypot(du, dv)
        inside = rho < radius
        bump = np.where(inside, 0.5 * top * (1 + np.cos(np.pi * rho / radius)), 0.0)
        dz_drho = np.where(inside, -0.5 * top * np.pi / radius * np.sin(np.pi * rho / radius), 0.0)
        safe = np.where(rho > 0, rho, 1.0)
        # overlapping rocks: keep the taller surface
        take = bump > z
        z = np.where(take, bump, z)
        zu = np.where(take, dz_drho * du / safe, zu)
        zv = np.where(take, dz_drho * dv / safe, zv)
    return z, zu, zv


def _boundary(params: SceneParams, rng, u, v):
    """Signed distance-like coordinate (positive on the vegetation side) and
    the coordinate along the boundary."""
    theta = rng.uniform(0, 2 * np.pi)
    normal = np.array([np.cos(theta), np.sin(theta)])
    tangent = np.array([-normal[1], normal[0]])
    shift = rng.uniform(0.08, 0.25) * min(params.height, params.width)
    cu = (params.width - 1) / 2 + shift * normal[0]
    cv = (params.height - 1) / 2 + shift * normal[1]
    amp = rng.uniform(1.0, 4.0)
    lam = rng.uniform(24.0, 48.0)
    phase = rng.uniform(0, 2 * np.pi)
    du, dv = u - cu, v - cv
    along = du * tangent[0] + dv * tangent[1]
    across = du * normal[0] + dv * normal[1]
    return across + amp * np.sin(2 * np.pi * along / lam + phase), along


def _annotator_offset(band_width: float, rng, along):
    """Where one annotator puts the edge, in [-band/2, band/2] along the boundary."""
    a0 = rng.uniform(-0.8, 0.8)
    a1 = rng.uniform(0.0, 0.3)
    lam = rng.uniform(20.0, 50.0)
    phase = rng.uniform(0, 2 * np.pi)
    shape = np.clip(a0 + a1 * np.cos(2 * np.pi * along / lam + phase), -1.0, 1.0)
    return 0.5 * band_width * shape


def _vegetation_label(distance, offset, band_width):
    if band_width == 0:
        return distance > 0
    half = 0.5 * band_width
    in_band = np.abs(distance) < half
    return np.where(in_band, distance > offset, distance >= half)


def generate_scene(params: SceneParams) -> Scene:
    """Render one scene; bit-identical for identical parameters."""
    p = params.resolved()
    rng = np.random.default_rng(p.rng_seed)
    h, w = p.height, p.width
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)

    hill_z, hill_u, hill_v = _hills(p, rng, u, v)
    rock_z, rock_u, rock_v = _rocks(p, rng, u, v)
    distance, along = _boundary(p, rng, u, v)
    offset = _annotator_offset(p.band_width, rng, along)
    albedo_jitter = rng.uniform(-0.01, 0.01, size=3)
    noise = rng.standard_normal((3, h, w))

    z = p.amplitude * hill_z + rock_z
    zu = p.amplitude * hill_u + rock_u
    zv = p.amplitude * hill_v + rock_v
    slope = np.hypot(zu, zv)

    m = p.margin
    margin = np.ones((h, w), dtype=bool)
    margin[m : h - m, m : w - m] = False
    rock = rock_z > ROCK_FOOTPRINT

    if p.has_vegetation:
        band = np.abs(distance) < 0.5 * p.band_width
        if p.band_width > 0:
            veg_mix = np.clip(0.5 + distance / p.band_width, 0.0, 1.0)
        else:
            veg_mix = (distance > 0).astype(np.float64)
        vegetation = _vegetation_label(distance, offset, p.band_width)
    else:
        band = np.zeros((h, w), dtype=bool)
        veg_mix = np.zeros((h, w))
        vegetation = np.zeros((h, w), dtype=bool)

    clear = ~margin & ~rock & (slope < SLOPE_LIMIT) & (z < HEIGHT_LIMIT)
    label = (clear & ~vegetation).astype(np.float64)

    depth = DEPTH_NEAR + DEPTH_SPAN * (h - 1 - v) / (h - 1) - z
    depth = depth.astype(np.float32).astype(np.float64)

    ground = GROUND + albedo_jitter
    albedo = ground[:, None, None] * (1 - veg_mix) + VEGETATION[:, None, None] * veg_mix
    albedo = np.where(rock, ROCK[:, None, None], albedo)
    shade = 0.35 + 0.65 / np.sqrt(1.0 + slope**2)
    airlight = AIRLIGHT * np.maximum(depth - AIRLIGHT_ORIGIN, 0.0)
    rgb = albedo * shade + airlight * HAZE[:, None, None]
    rgb = np.where(margin, MARGIN[:, None, None], rgb)
    rgb = rgb + p.texture_noise * noise
    rgb = np.rint(np.clip(rgb, 0.0, 1.0) * 255.0) / 255.0

    f32 = lambda a: np.asarray(a, dtype=np.float32).astype(np.float64)  # noqa: E731
    oracle = {
        "heightfield": f32(z),
        "slope": f32(slope),
        "height": f32(z),
        "band": band.astype(np.float64),
        "boundary_distance": f32(distance),
        "boundary_along": f32(along),
        "clear": clear.astype(np.float64),
    }
    return Scene(params=p, rgb=rgb, depth=depth, label=label, oracle=oracle)


def annotator_relabel(scene: Scene, seed: int) -> np.ndarray:
    """Label a second annotator would draw: identical outside the ambiguity
    band, with an independently placed edge inside it."""
    p = scene.params
    band = scene.oracle["band"].astype(bool)
    if not band.any():
        return scene.label.copy()
    rng = np.random.default_rng([seed, 0x5EED])
    offset = _annotator_offset(p.band_width, rng, scene.oracle["boundary_along"])
    vegetation = _vegetation_label(scene.oracle["boundary_distance"], offset, p.band_width)
    relabel = (scene.oracle["clear"].astype(bool) & ~vegetation).astype(np.float64)
    return np.where(band, relabel, scene.label)


def generate_dataset(count: int, base: SceneParams, start_seed: int | None = None) -> list[Scene]:
    """``count`` scenes with seeds ``start_seed, start_seed + 1, ...``."""
    start = base.rng_seed if start_seed is None else start_seed
    return [generate_scene(replace(base, rng_seed=start + i)) for i in range(count)]


def write_dataset(scenes: list[Scene], out_dir: str | os.PathLike) -> None:
    """One numbered sub-directory per scene plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, scene in enumerate(scenes):
        name = f"{i:05d}"
        d = out / name
        d.mkdir(exist_ok=True)
        write_ppm(scene.rgb, d / "rgb.ppm")
        save_dmap(scene.depth, d / "depth.dmap")
        save_dmap(scene.label, d / "label.dmap")
        for key, value in scene.oracle.items():
            save_dmap(value, d / f"oracle_{key}.dmap")
        params = asdict(scene.params)
        params["obstacle_height"] = list(params["obstacle_height"])
        entries.append({"dir": name, "seed": scene.params.rng_seed, "preset": scene.params.preset, "params": params})
    manifest = {"format": "vita-scenes", "version": 1, "count": len(scenes), "scenes": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_dataset(data_dir: str | os.PathLike) -> list[Scene]:
    root = Path(data_dir)
    manifest = json.loads((root / "manifest.json").read_text())
    scenes = []
    for entry in manifest["scenes"]:
        d = root / entry["dir"]
        params = dict(entry["params"])
        params["obstacle_height"] = tuple(params["obstacle_height"])
        oracle = {
            f.stem[len("oracle_") :]: load_dmap(f) for f in sorted(d.glob("oracle_*.dmap"))
        }
        scenes.append(
            Scene(
                params=SceneParams(**params),
                rgb=read_ppm(d / "rgb.ppm"),
                depth=load_dmap(d / "depth.dmap"),
                label=load_dmap(d / "label.dmap"),
                oracle=oracle,
            )
        )
    return scenes
