"""Parameter pools and on-disk synthetic datasets.

A dataset directory holds, per sample, an 8-bit silhouette PNG, an optional
occluder PNG and a JSON record, plus ``manifest.json`` which is written last
(through a temporary file and an atomic rename). A directory without a
manifest is an incomplete write. See FORMATS.md for the byte-level layout.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .body_model import BodyModel, BodyParams, forward, load_model, make_test_body, regress_keypoints3d
from .errors import DatasetError, SchemaError
from .geometry import PerspectiveCamera
from .renderer import load_silhouette_png, save_silhouette_png
from .synth import Keypoints2D, SynthConfig, SyntheticSample, encode_heatmaps, generate_sample, stack_input

SCHEMA_VERSION = 1
MANIFEST = "manifest.json"
TEST_BODY = "test-body"

# Per-joint pose bounds (radians) for the synthetic pool, by joint name.
DEFAULT_JOINT_BOUNDS = {
    "pelvis": 0.1,
    "spine": 0.2, "chest": 0.2, "neck": 0.2,
    "left_shoulder": 0.4, "right_shoulder": 0.4,
    "left_elbow": 0.5, "right_elbow": 0.5,
    "left_wrist": 0.2, "right_wrist": 0.2,
    "left_hip": 0.4, "right_hip": 0.4,
    "left_knee": 0.5, "right_knee": 0.5,
    "left_ankle": 0.2, "right_ankle": 0.2,
}
GENERIC_BOUND = 0.3
ROOT_BOUND = 0.1


def resolve_model(ref, format="native"):
    """Load a model from a path, or build the procedural one for ``"test-body"``."""
    if ref is None or str(ref) == TEST_BODY:
        return make_test_body()
    return load_model(ref, format=format)


# ----------------------------------------------------------------------------
# parameter pools


@dataclass
class ParameterPool:
    records: list
    provenance: str
    num_joints: int
    num_betas: int

    def __post_init__(self):
        for i, r in enumerate(self.records):
            if r.pose.shape != (self.num_joints, 3) or r.shape.shape != (self.num_betas,):
                raise SchemaError(
                    f"pool record {i}: expected pose ({self.num_joints}, 3) and shape "
                    f"({self.num_betas},), got {r.pose.shape} and {r.shape.shape}")

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def count(self):
        return len(self.records)

    @classmethod
    def random(cls, model: BodyModel, count, seed=0, bounds=None):
        """Uniform per-joint axis-angle draws inside ``[-b, b]^3``; zero shape."""
        if bounds is None:
            bounds = joint_bounds(model)
        bounds = np.asarray(bounds, dtype=float).reshape(-1)
        if bounds.shape != (model.num_joints,):
            raise ValueError("need one bound per joint")
        rng = np.random.default_rng(seed)
        records = [BodyParams(rng.uniform(-1.0, 1.0, (model.num_joints, 3)) * bounds[:, None],
                              np.zeros(model.num_betas)) for _ in range(int(count))]
        return cls(records, "synthetic-random", model.num_joints, model.num_betas)

    def to_dict(self):
        return {
            "format": "occbody-pool",
            "provenance": self.provenance,
            "num_joints": self.num_joints,
            "num_betas": self.num_betas,
            "records": [r.to_dict() for r in self.records],
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, d):
        try:
            recs = d["records"]
        except (KeyError, TypeError):
            raise SchemaError("pool file has no 'records' list") from None
        records = []
        for i, r in enumerate(recs):
            if "pose" not in r or "shape" not in r:
                raise SchemaError(f"pool record {i} needs 'pose' and 'shape'")
            records.append(BodyParams(np.array(r["pose"], dtype=float).reshape(-1, 3),
                                      np.array(r["shape"], dtype=float).reshape(-1)))
        J = d.get("num_joints", records[0].pose.shape[0] if records else 0)
        B = d.get("num_betas", records[0].shape.shape[0] if records else 0)
        return cls(records, d.get("provenance", "imported"), int(J), int(B))

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def joint_bounds(model: BodyModel):
    names = model.joint_names or ()
    out = np.full(model.num_joints, GENERIC_BOUND)
    for j in range(model.num_joints):
        if j < len(names) and names[j] in DEFAULT_JOINT_BOUNDS:
            out[j] = DEFAULT_JOINT_BOUNDS[names[j]]
        elif model.parents[j] < 0:
            out[j] = ROOT_BOUND
    return out


# ----------------------------------------------------------------------------
# sample records


def sample_seeds(seed, count):
    """Per-sample seeds for a dataset; distinct across datasets with different seeds."""
    return [(int(seed) << 32) + i for i in range(int(count))]


def sample_record(sample: SyntheticSample):
    return {
        "seed": sample.seed,
        "keypoints": sample.keypoints.to_dict(),
        "gt_params": sample.gt_params.to_dict(),
        "camera": sample.gt_camera.to_dict(),
        "boxes": [list(b) for b in sample.boxes],
        "dropped_parts": list(sample.dropped_parts),
        "occluded": bool(sample.occluded),
    }


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


@dataclass
class DatasetManifest:
    schema_version: int
    count: int
    config: dict
    model: str
    samples: list = field(default_factory=list)
    pool: str | None = None

    def to_dict(self):
        return {
            "format": "occbody-dataset",
            "schema_version": self.schema_version,
            "count": self.count,
            "config": self.config,
            "model": self.model,
            "pool": self.pool,
            "samples": self.samples,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["schema_version"], d["count"], d["config"], d["model"], d["samples"],
                   d.get("pool"))

    @property
    def seeds(self):
        return [s["seed"] for s in self.samples]

    @property
    def synth_config(self):
        return SynthConfig.from_dict(self.config)


def write_dataset(samples, directory, config: SynthConfig, model_ref=TEST_BODY, pool_ref=None):
    """Write ``samples`` (any iterable) and finish with the manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stale = directory / MANIFEST
    if stale.exists():
        stale.unlink()
    entries = []
    seen = set()
    for i, sample in enumerate(samples):
        if sample.seed in seen:
            raise ValueError(f"duplicate sample seed {sample.seed}")
        seen.add(sample.seed)
        stem = f"sample_{i:06d}"
        entry = {"id": stem, "seed": sample.seed, "record": f"{stem}.json",
                 "silhouette": f"{stem}.png", "occluder": None}
        _write(directory / entry["silhouette"], lambda p: save_silhouette_png(p, sample.silhouette))
        if sample.occluder is not None:
            entry["occluder"] = f"{stem}_occluder.png"
            _write(directory / entry["occluder"], lambda p: save_silhouette_png(p, sample.occluder))
        _write(directory / entry["record"], lambda p: p.write_text(_dump(sample_record(sample))))
        entries.append(entry)
    manifest = DatasetManifest(SCHEMA_VERSION, len(entries), config.to_dict(), str(model_ref),
                               entries, pool_ref)
    tmp = directory / (MANIFEST + ".tmp")
    _write(tmp, lambda p: p.write_text(_dump(manifest.to_dict())))
    os.replace(tmp, directory / MANIFEST)
    return manifest


def _write(path, writer):
    try:
        writer(path)
    except OSError as e:
        raise OSError(f"{path}: {e.strerror or e}") from e


class Dataset:
    """Lazy view of a dataset directory; samples are read on access."""

    def __init__(self, directory, manifest: DatasetManifest, model: BodyModel):
        self.directory = Path(directory)
        self.manifest = manifest
        self.model = model
        self.config = manifest.synth_config

    def __len__(self):
        return self.manifest.count

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def _path(self, name):
        p = self.directory / name
        if not p.is_file():
            raise DatasetError(f"dataset file missing: {p}")
        return p

    def _png(self, name):
        p = self._path(name)
        try:
            return load_silhouette_png(p)
        except (OSError, ValueError, SyntaxError) as e:
            raise DatasetError(f"cannot decode image {p}: {e}") from e

    def __getitem__(self, i) -> SyntheticSample:
        if not 0 <= i < len(self):
            raise IndexError(i)
        entry = self.manifest.samples[i]
        path = self._path(entry["record"])
        try:
            rec = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise DatasetError(f"corrupted record {path}: {e}") from e
        silhouette = self._png(entry["silhouette"])
        occluder = self._png(entry["occluder"]) if entry.get("occluder") else None
        params = BodyParams.from_dict(rec["gt_params"])
        mesh, _ = forward(self.model, params)
        return SyntheticSample(
            silhouette=silhouette,
            keypoints=Keypoints2D.from_dict(rec["keypoints"]),
            gt_params=params,
            gt_camera=PerspectiveCamera.from_dict(rec["camera"]),
            gt_vertices=mesh.vertices,
            gt_joints3d=regress_keypoints3d(self.model, mesh),
            seed=rec["seed"],
            occluder=occluder,
            boxes=[tuple(b) for b in rec.get("boxes", [])],
            dropped_parts=list(rec.get("dropped_parts", [])),
            occluded=bool(rec.get("occluded", False)),
        )

    def heatmaps(self, i):
        s = self[i]
        return encode_heatmaps(s.keypoints, s.silhouette.shape, self.config.heatmap_sigma)

    def input_tensor(self, i):
        s = self[i]
        return stack_input(s.silhouette, encode_heatmaps(s.keypoints, s.silhouette.shape,
                                                         self.config.heatmap_sigma))


def read_manifest(directory):
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise DatasetError(f"no manifest in {directory} (incomplete or missing dataset)")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"corrupted manifest {path}: {e}") from e
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DatasetError(
            f"{path}: schema version {version} is not supported (this reader expects "
            f"version {SCHEMA_VERSION})")
    manifest = DatasetManifest.from_dict(d)
    if len(set(manifest.seeds)) != len(manifest.seeds):
        raise DatasetError(f"{path}: sample seeds are not unique")
    return manifest


def read_dataset(directory, model: BodyModel | None = None):
    """Open a dataset. The model defaults to the one named in the manifest."""
    manifest = read_manifest(directory)
    for entry in manifest.samples:
        for key in ("record", "silhouette", "occluder"):
            name = entry.get(key)
            if name and not (Path(directory) / name).is_file():
                raise DatasetError(f"dataset file missing: {Path(directory) / name}")
    if model is None:
        ref = manifest.model
        if ref != TEST_BODY and not Path(ref).is_absolute():
            ref = str(Path(directory) / ref)
        model = resolve_model(ref)
    return Dataset(directory, manifest, model)


# ----------------------------------------------------------------------------
# generation


def _generate(args):
    model, pool, cfg, seed = args
    return generate_sample(model, pool, cfg, seed)


def synthesize(model: BodyModel, pool, cfg: SynthConfig, seeds, workers=1):
    """Generate one sample per seed, in order; ``workers > 1`` uses processes."""
    seeds = list(seeds)
    if workers <= 1 or len(seeds) <= 1:
        for s in seeds:
            yield generate_sample(model, pool, cfg, s)
        return
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as ex:
        yield from ex.map(_generate, [(model, pool, cfg, s) for s in seeds])
