"""Domain types and loaders for the evaluation inputs.

Everything the harness consumes lives on disk as JSON or image files:
a manifest describing (reference photo, sketch) pairs, per-image keypoint
prediction files, and embedding files. The loaders here validate all of
it eagerly so downstream metric code can assume well-formed values.

Loaded values are immutable and safe to share across worker threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from PIL import Image


class SketchRefError(ValueError):
    """Base class for all validation and computation errors."""


class LoadError(SketchRefError):
    """A file failed to parse or violated its schema."""


class PairingError(SketchRefError):
    """Reference and sketch predictions cannot be paired positionally."""


class Domain(str, Enum):
    HUMAN = "Human"
    FACE = "Face"
    ANIMAL = "Animal"
    THINGS = "Things"


class Task(str, Enum):
    CATEGORY = "Category"
    STRUCTURE = "Structure"


class EmbeddingKind(str, Enum):
    IMAGE = "image"
    TEXT = "text"


#: Keypoint schema used for each structure-estimation domain.
DOMAIN_SCHEMAS: dict[Domain, str] = {
    Domain.HUMAN: "coco17",
    Domain.FACE: "face106",
    Domain.ANIMAL: "animal20",
}

#: Domains for which each task is defined.
CATEGORY_DOMAINS = frozenset({Domain.ANIMAL, Domain.THINGS})
STRUCTURE_DOMAINS = frozenset({Domain.HUMAN, Domain.FACE, Domain.ANIMAL})


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------

# Integer BT.601 luma weights (per mille). Integer arithmetic keeps the
# grayscale conversion byte-stable across platforms and library versions,
# which the complexity estimators rely on.
_LUMA_WEIGHTS = (299, 587, 114)


def _to_grayscale(img: Image.Image) -> np.ndarray:
    if img.mode == "L":
        return np.asarray(img, dtype=np.uint8)
    if img.mode == "1":
        return np.asarray(img.convert("L"), dtype=np.uint8)
    # Everything else goes through RGBA (a lossless expansion for 8-bit
    # modes), gets composited over white, then reduced by integer luma.
    rgba = np.asarray(img.convert("RGBA"), dtype=np.uint32)
    alpha = rgba[..., 3:4]
    rgb = (rgba[..., :3] * alpha + 255 * (255 - alpha) + 127) // 255
    wr, wg, wb = _LUMA_WEIGHTS
    y = (wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2] + 500) // 1000
    return y.astype(np.uint8)


@dataclass(frozen=True)
class ImageRecord:
    """A decoded 8-bit grayscale image.

    ``pixels`` is the row-major grayscale buffer; holding it as ``bytes``
    makes records hashable, comparable, and trivially immutable.
    """

    id: str
    path: Path | None
    width: int
    height: int
    pixels: bytes

    def __post_init__(self) -> None:
        if not self.id:
            raise SketchRefError("image id must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise SketchRefError(
                f"image {self.id!r}: dimensions must be positive, "
                f"got {self.width}x{self.height}"
            )
        if len(self.pixels) != self.width * self.height:
            raise SketchRefError(
                f"image {self.id!r}: buffer length {len(self.pixels)} != "
                f"width*height {self.width * self.height}"
            )

    @property
    def array(self) -> np.ndarray:
        """Read-only (height, width) uint8 view of the pixel buffer."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width
        )


def image_from_array(image_id: str, arr: np.ndarray, path: Path | None = None) -> ImageRecord:
    """Wrap a uint8 (height, width) array as an ImageRecord."""
    a = np.ascontiguousarray(arr, dtype=np.uint8)
    if a.ndim != 2:
        raise SketchRefError("expected a 2-d grayscale array")
    return ImageRecord(
        id=image_id, path=path, width=a.shape[1], height=a.shape[0],
        pixels=a.tobytes(),
    )


def load_image(path: Path | str, image_id: str | None = None) -> ImageRecord:
    """Decode an image file to grayscale.

    The id defaults to the file stem, which is also the key under which
    prediction and embedding files are looked up.
    """
    p = Path(path)
    try:
        with Image.open(p) as img:
            gray = _to_grayscale(img)
    except FileNotFoundError:
        raise LoadError(f"image file not found: {p}") from None
    except SketchRefError:
        raise
    except Exception as exc:
        raise LoadError(f"cannot decode image {p}: {exc}") from exc
    return image_from_array(image_id or p.stem, gray, path=p)


# ---------------------------------------------------------------------------
# Keypoint schemas
# ---------------------------------------------------------------------------

# Published per-keypoint falloff constants for the 17-point body skeleton.
_COCO17_SIGMAS = (
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072,
    0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089, 0.089,
)

#: point counts of the built-in schemas
BUILTIN_SCHEMA_POINTS = {"coco17": 17, "face106": 106, "animal20": 20}

# No published falloff tables exist for the dense-face and animal skeletons;
# a uniform constant is used unless overridden.
_DEFAULT_UNIFORM_SIGMA = 0.05


@dataclass(frozen=True)
class KeypointSchema:
    """A skeleton definition: point count plus per-point falloff constants."""

    name: str
    point_count: int
    sigmas: tuple[float, ...]

    def __post_init__(self) -> None:
        expected = BUILTIN_SCHEMA_POINTS.get(self.name)
        if expected is None:
            raise SketchRefError(
                f"unknown keypoint schema {self.name!r}; "
                f"expected one of {sorted(BUILTIN_SCHEMA_POINTS)}"
            )
        if self.point_count != expected:
            raise SketchRefError(
                f"schema {self.name!r} must have {expected} points, "
                f"got {self.point_count}"
            )
        if len(self.sigmas) != self.point_count:
            raise SketchRefError(
                f"schema {self.name!r}: {len(self.sigmas)} sigmas for "
                f"{self.point_count} points"
            )
        if any(s <= 0 for s in self.sigmas):
            raise SketchRefError(f"schema {self.name!r}: sigmas must be > 0")


def load_sigma_overrides(path: Path | str) -> dict[str, tuple[float, ...]]:
    """Read a sigma override file: JSON mapping schema name -> sigma list."""
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise LoadError(f"sigma override file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"cannot parse sigma overrides {p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise LoadError(f"sigma overrides {p}: expected an object")
    out: dict[str, tuple[float, ...]] = {}
    for name, sigmas in raw.items():
        if not isinstance(sigmas, list):
            raise LoadError(f"sigma overrides {p}: {name!r} must map to a list")
        out[name] = tuple(float(s) for s in sigmas)
    return out


def get_schema(
    name: str, overrides: Mapping[str, tuple[float, ...]] | None = None
) -> KeypointSchema:
    """Return a built-in schema, with per-point sigmas optionally overridden."""
    count = BUILTIN_SCHEMA_POINTS.get(name)
    if count is None:
        raise SketchRefError(
            f"unknown keypoint schema {name!r}; "
            f"expected one of {sorted(BUILTIN_SCHEMA_POINTS)}"
        )
    if overrides and name in overrides:
        sigmas = overrides[name]
    elif name == "coco17":
        sigmas = _COCO17_SIGMAS
    else:
        sigmas = (_DEFAULT_UNIFORM_SIGMA,) * count
    return KeypointSchema(name=name, point_count=count, sigmas=tuple(sigmas))


# ---------------------------------------------------------------------------
# Keypoint targets and prediction files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetKeypoints:
    """One detected target: bounding box plus its keypoint set.

    ``visibility`` is only present for ground-truth annotations;
    model predictions carry confidences instead.
    """

    bbox: tuple[float, float, float, float]
    points: tuple[tuple[float, float, float], ...]
    visibility: tuple[int, ...] | None = None
    score: float = 1.0

    def __post_init__(self) -> None:
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise SketchRefError(f"bbox extent must be positive, got w={w}, h={h}")
        if not self.points:
            raise SketchRefError("target must have at least one keypoint")
        for i, (_, _, conf) in enumerate(self.points):
            if not 0.0 <= conf <= 1.0:
                raise SketchRefError(
                    f"keypoint {i}: confidence {conf} outside [0, 1]"
                )
        if self.visibility is not None:
            if len(self.visibility) != len(self.points):
                raise SketchRefError(
                    f"visibility length {len(self.visibility)} != "
                    f"point count {len(self.points)}"
                )
            if any(v not in (0, 1, 2) for v in self.visibility):
                raise SketchRefError("visibility flags must be 0, 1, or 2")


@dataclass(frozen=True)
class PredictionFile:
    """All detected targets for one image, under one keypoint schema."""

    image_id: str
    schema: str
    targets: tuple[TargetKeypoints, ...]

    @property
    def n_targets(self) -> int:
        return len(self.targets)


def load_predictions(path: Path | str, schema: KeypointSchema) -> PredictionFile:
    """Load a prediction file and validate every target against ``schema``."""
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise LoadError(f"prediction file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"cannot parse prediction file {p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise LoadError(f"prediction file {p}: expected an object")

    declared = raw.get("schema")
    if declared != schema.name:
        raise LoadError(
            f"prediction file {p}: declares schema {declared!r}, "
            f"loader expected {schema.name!r}"
        )
    image_id = raw.get("image_id")
    if not image_id or not isinstance(image_id, str):
        raise LoadError(f"prediction file {p}: missing image_id")

    targets = []
    for t_idx, entry in enumerate(raw.get("targets", [])):
        try:
            bbox = tuple(float(v) for v in entry["bbox"])
            if len(bbox) != 4:
                raise SketchRefError("bbox must have 4 entries")
            kpts = entry["keypoints"]
            if len(kpts) != schema.point_count:
                raise SketchRefError(
                    f"{len(kpts)} keypoints where schema "
                    f"{schema.name!r} requires {schema.point_count}"
                )
            points = tuple(
                (float(k[0]), float(k[1]), float(k[2])) for k in kpts
            )
            visibility = entry.get("visibility")
            if visibility is not None:
                visibility = tuple(int(v) for v in visibility)
            target = TargetKeypoints(
                bbox=bbox,  # type: ignore[arg-type]
                points=points,
                visibility=visibility,
                score=float(entry.get("score", 1.0)),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise LoadError(
                f"prediction file {p}: malformed target {t_idx}: {exc}"
            ) from exc
        except SketchRefError as exc:
            raise LoadError(
                f"prediction file {p}: target {t_idx}: {exc}"
            ) from exc
        targets.append(target)

    return PredictionFile(image_id=image_id, schema=schema.name, targets=tuple(targets))


def load_predictions_auto(
    path: Path | str,
    overrides: Mapping[str, tuple[float, ...]] | None = None,
) -> tuple[PredictionFile, KeypointSchema]:
    """Load a prediction file using the schema it declares."""
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise LoadError(f"prediction file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"cannot parse prediction file {p}: {exc}") from exc
    if not isinstance(raw, dict) or "schema" not in raw:
        raise LoadError(f"prediction file {p}: missing schema declaration")
    schema = get_schema(str(raw["schema"]), overrides)
    return load_predictions(p, schema), schema


def prediction_to_dict(pf: PredictionFile) -> dict[str, Any]:
    """Serialize a PredictionFile back to its wire format."""
    return {
        "image_id": pf.image_id,
        "schema": pf.schema,
        "targets": [
            {
                "bbox": list(t.bbox),
                "score": t.score,
                "keypoints": [[x, y, c] for x, y, c in t.points],
                **({"visibility": list(t.visibility)} if t.visibility is not None else {}),
            }
            for t in pf.targets
        ],
    }


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingRecord:
    """One embedding vector, keyed by image id or by class-label text."""

    key: str
    kind: EmbeddingKind
    model_id: str
    dim: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise SketchRefError(f"embedding {self.key!r}: dim must be > 0")
        if len(self.values) != self.dim:
            raise SketchRefError(
                f"embedding {self.key!r}: declares dim {self.dim} but has "
                f"{len(self.values)} values"
            )
        if not any(v != 0.0 for v in self.values):
            raise SketchRefError(
                f"embedding {self.key!r}: zero vector (cosine undefined)"
            )

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def load_embedding(path: Path | str) -> EmbeddingRecord:
    """Load and validate one embedding file."""
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise LoadError(f"embedding file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"cannot parse embedding file {p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise LoadError(f"embedding file {p}: expected an object")
    try:
        kind = EmbeddingKind(raw["kind"])
        record = EmbeddingRecord(
            key=str(raw["key"]),
            kind=kind,
            model_id=str(raw["model_id"]),
            dim=int(raw["dim"]),
            values=tuple(float(v) for v in raw["values"]),
        )
    except (KeyError, TypeError) as exc:
        raise LoadError(f"embedding file {p}: missing field: {exc}") from exc
    except SketchRefError as exc:
        raise LoadError(f"embedding file {p}: {exc}") from exc
    return record


def embedding_to_dict(rec: EmbeddingRecord) -> dict[str, Any]:
    """Serialize an EmbeddingRecord back to its wire format."""
    return {
        "key": rec.key,
        "kind": rec.kind.value,
        "model_id": rec.model_id,
        "dim": rec.dim,
        "values": list(rec.values),
    }


# ---------------------------------------------------------------------------
# Evaluation items and the manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalItem:
    """One evaluation unit: a reference photo and a synthesized sketch."""

    id: str
    domain: Domain
    task: Task
    ref: ImageRecord
    sketch: ImageRecord
    method: str
    class_label: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise SketchRefError("item id must be non-empty")
        if not self.method:
            raise SketchRefError(f"item {self.id!r}: method must be non-empty")
        if self.task is Task.CATEGORY:
            if not self.class_label:
                raise SketchRefError(
                    f"item {self.id!r}: Category task requires a class_label"
                )
            if self.domain not in CATEGORY_DOMAINS:
                raise SketchRefError(
                    f"item {self.id!r}: Category task is only defined for "
                    f"{sorted(d.value for d in CATEGORY_DOMAINS)}"
                )
        else:
            if self.domain not in STRUCTURE_DOMAINS:
                raise SketchRefError(
                    f"item {self.id!r}: Structure task is only defined for "
                    f"{sorted(d.value for d in STRUCTURE_DOMAINS)}"
                )
        if (self.ref.width, self.ref.height) != (self.sketch.width, self.sketch.height):
            # Never silently resize: mismatched pairs are a data error.
            raise SketchRefError(
                f"item {self.id!r}: reference is {self.ref.width}x{self.ref.height} "
                f"but sketch is {self.sketch.width}x{self.sketch.height}"
            )


def load_manifest(path: Path | str) -> list[EvalItem]:
    """Load a manifest and every image it references.

    Image ids are file stems; two manifest entries may reference the same
    image file (it is loaded once), but two *different* files with the
    same stem collide.
    """
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise LoadError(f"manifest not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"cannot parse manifest {p}: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("items"), list):
        raise LoadError(f"manifest {p}: expected an object with an items list")

    base = p.parent
    image_cache: dict[Path, ImageRecord] = {}
    stem_owner: dict[str, Path] = {}
    seen_ids: set[str] = set()
    items: list[EvalItem] = []

    def load_side(rel: str) -> ImageRecord:
        img_path = (base / rel).resolve() if not Path(rel).is_absolute() else Path(rel)
        if img_path in image_cache:
            return image_cache[img_path]
        record = load_image(img_path)
        owner = stem_owner.get(record.id)
        if owner is not None and owner != img_path:
            raise LoadError(
                f"manifest {p}: image id {record.id!r} maps to both "
                f"{owner} and {img_path}"
            )
        stem_owner[record.id] = img_path
        image_cache[img_path] = record
        return record

    for idx, entry in enumerate(raw["items"]):
        if not isinstance(entry, dict):
            raise LoadError(f"manifest {p}: item {idx} is not an object")
        try:
            item_id = str(entry["id"])
            domain = Domain(entry["domain"])
            task = Task(entry["task"])
            ref = load_side(str(entry["ref_path"]))
            sketch = load_side(str(entry["sketch_path"]))
            item = EvalItem(
                id=item_id,
                domain=domain,
                task=task,
                ref=ref,
                sketch=sketch,
                method=str(entry["method"]),
                class_label=entry.get("class_label"),
            )
        except KeyError as exc:
            raise LoadError(f"manifest {p}: item {idx}: missing field {exc}") from exc
        except LoadError:
            raise
        except SketchRefError as exc:
            raise LoadError(f"manifest {p}: item {idx}: {exc}") from exc
        except ValueError as exc:
            raise LoadError(f"manifest {p}: item {idx}: {exc}") from exc
        if item.id in seen_ids:
            raise LoadError(f"manifest {p}: duplicate item id {item.id!r}")
        seen_ids.add(item.id)
        items.append(item)

    return items


def manifest_to_dict(items: list[EvalItem], version: str = "1") -> dict[str, Any]:
    """Serialize loaded items back to the manifest wire format."""
    out = []
    for item in items:
        entry: dict[str, Any] = {
            "id": item.id,
            "domain": item.domain.value,
            "task": item.task.value,
            "ref_path": str(item.ref.path),
            "sketch_path": str(item.sketch.path),
            "method": item.method,
        }
        if item.class_label is not None:
            entry["class_label"] = item.class_label
        out.append(entry)
    return {"version": version, "items": out}
