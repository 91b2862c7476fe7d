"""Session-oriented HTTP API for the interactive refinement loop.

Masks travel as run-length-encoded JSON ({"h", "w", "rle": [...]}, runs
alternating zeros-first over row-major pixels); difficulty maps travel as
base64 of the float raster format. Errors are JSON {code, message}.
"""
from __future__ import annotations

import base64
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, File, UploadFile
from fastapi.responses import JSONResponse

from .fileio import PGM_MAGIC, RasterFormatError, decode_pgm, decode_raster, encode_raster
from .imgcore import SeedSet, render_seeds
from .nets import RefineNet, backbone_forward, binarize, difficulty_map, refine_forward
from .evaluator import metrics
from .validation import check_image

DEFAULT_IDLE_TIMEOUT = 1800.0


def encode_mask_rle(mask: np.ndarray) -> dict:
    """Row-major run lengths, alternating and starting with a zero-run."""
    flat = np.asarray(mask, dtype=bool).ravel()
    h, w = mask.shape
    if flat.size == 0:
        return {"h": h, "w": w, "rle": []}
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return {"h": int(h), "w": int(w), "rle": [int(r) for r in runs]}


def decode_mask_rle(obj: dict) -> np.ndarray:
    h, w = int(obj["h"]), int(obj["w"])
    runs = [int(r) for r in obj["rle"]]
    if sum(runs) != h * w:
        raise ValueError(f"rle runs sum to {sum(runs)}, expected {h * w}")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(h, w)


def _encode_float_map(arr: np.ndarray) -> str:
    return base64.b64encode(encode_raster(arr.astype(np.float32))).decode("ascii")


@dataclass
class Session:
    image: np.ndarray
    seg: object
    gt: np.ndarray | None = None
    fg: "dict[tuple[int, int], None]" = field(default_factory=dict)
    bg: "dict[tuple[int, int], None]" = field(default_factory=dict)
    revision: int = 0
    last_access: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def seed_set(self) -> SeedSet:
        return SeedSet(foreground=list(self.fg), background=list(self.bg))


class SessionStore:
    """In-memory sessions with idle eviction; mutations serialize per session."""

    def __init__(self, idle_timeout: float = DEFAULT_IDLE_TIMEOUT):
        self.idle_timeout = idle_timeout
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def sweep(self) -> None:
        now = time.monotonic()
        with self._lock:
            expired = [
                sid for sid, s in self._sessions.items()
                if now - s.last_access > self.idle_timeout
            ]
            for sid in expired:
                del self._sessions[sid]

    def add(self, session: Session) -> str:
        self.sweep()
        sid = uuid.uuid4().hex
        with self._lock:
            self._sessions[sid] = session
        return sid

    def get(self, sid: str) -> Session | None:
        self.sweep()
        with self._lock:
            session = self._sessions.get(sid)
        if session is not None:
            session.last_access = time.monotonic()
        return session

    def remove(self, sid: str) -> bool:
        with self._lock:
            return self._sessions.pop(sid, None) is not None


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def _decode_image_payload(data: bytes) -> np.ndarray:
    if data.startswith(PGM_MAGIC):
        return decode_pgm(data)
    arr = decode_raster(data)
    if arr.dtype == bool:
        raise RasterFormatError("expected a grayscale image payload, got a mask raster")
    return arr


def _decode_mask_payload(data: bytes) -> np.ndarray:
    if data.startswith(PGM_MAGIC):
        return decode_pgm(data) >= 0.5
    arr = decode_raster(data)
    if arr.dtype != bool:
        raise RasterFormatError("expected a mask payload, got a float image raster")
    return arr


def _parse_points(raw, shape, label: str):
    points, bad = [], []
    for p in raw:
        if not isinstance(p, (list, tuple)) or len(p) != 2:
            raise ValueError(f"{label} entries must be [row, col] pairs, got {p!r}")
        r, c = int(p[0]), int(p[1])
        if 0 <= r < shape[0] and 0 <= c < shape[1]:
            points.append((r, c))
        else:
            bad.append([r, c])
    return points, bad


def create_app(
    model: RefineNet | None = None,
    *,
    sigma: float = 5.0,
    threshold: float = 0.5,
    idle_timeout: float = DEFAULT_IDLE_TIMEOUT,
) -> FastAPI:
    """Build the annotation service around a frozen model (inference only)."""
    app = FastAPI(title="refineseg annotation service")
    store = SessionStore(idle_timeout)
    app.state.store = store
    app.state.model = model

    def _refine_payload(session: Session) -> dict:
        channels = render_seeds(
            session.seed_set(), session.image.shape[0], session.image.shape[1], sigma
        )
        refined_p = refine_forward(model, session.seg, channels)
        refined = binarize(refined_p, threshold)
        payload = {
            "revision": session.revision,
            "refined_mask": encode_mask_rle(refined),
            "difficulty_map": _encode_float_map(difficulty_map(refined_p)),
        }
        if session.gt is not None:
            payload["metrics"] = metrics(refined, session.gt).as_dict()
        return payload

    @app.post("/sessions")
    def create_session(image: UploadFile = File(...), gt: UploadFile | None = File(None)):
        """Upload an image, run the backbone once, return mask and difficulty."""
        if model is None:
            return _error(503, "model_not_loaded", "no model checkpoint is loaded")
        try:
            img = _decode_image_payload(image.file.read())
            img = check_image(img, "image")
        except (RasterFormatError, ValueError) as exc:
            return _error(400, "bad_payload", str(exc))
        h, w = img.shape
        if h % 4 or w % 4:
            return _error(
                400, "bad_payload", f"image size {h}x{w} must be divisible by 4"
            )
        gt_mask = None
        if gt is not None:
            try:
                gt_mask = _decode_mask_payload(gt.file.read())
            except (RasterFormatError, ValueError) as exc:
                return _error(400, "bad_payload", f"ground truth: {exc}")
            if gt_mask.shape != img.shape:
                return _error(
                    400,
                    "bad_payload",
                    f"ground truth shape {gt_mask.shape} does not match image {img.shape}",
                )
        try:
            seg = backbone_forward(model, img)
        except ValueError as exc:
            return _error(400, "bad_payload", str(exc))
        session = Session(image=img, seg=seg, gt=gt_mask)
        sid = store.add(session)
        return {
            "session_id": sid,
            "revision": session.revision,
            "h": h,
            "w": w,
            "initial_mask": encode_mask_rle(binarize(seg.p_full, threshold)),
            "difficulty_map": _encode_float_map(difficulty_map(seg.p_full)),
        }

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        session = store.get(sid)
        if session is None:
            return _error(404, "not_found", f"unknown session {sid}")
        with session.lock:
            return {
                "session_id": sid,
                "revision": session.revision,
                "h": session.image.shape[0],
                "w": session.image.shape[1],
                "seeds": session.seed_set().to_json(),
                "has_gt": session.gt is not None,
            }

    @app.post("/sessions/{sid}/seeds")
    def add_seeds(sid: str, delta: dict):
        """Accumulate seeds; re-submitting a point in the other class moves it.

        With "replace": true the payload is treated as the full seed state
        instead of a delta (used by clients to erase seeds).
        """
        session = store.get(sid)
        if session is None:
            return _error(404, "not_found", f"unknown session {sid}")
        try:
            fg_pts, fg_bad = _parse_points(delta.get("fg", []), session.image.shape, "fg")
            bg_pts, bg_bad = _parse_points(delta.get("bg", []), session.image.shape, "bg")
        except (ValueError, TypeError) as exc:
            return _error(400, "bad_payload", str(exc))
        if fg_bad or bg_bad:
            return _error(
                400,
                "out_of_bounds",
                f"seed coordinates out of bounds for {session.image.shape}: {fg_bad + bg_bad}",
            )
        both = set(fg_pts) & set(bg_pts)
        if both:
            return _error(
                400,
                "conflicting_seeds",
                f"coordinates submitted in both classes: {sorted(both)}",
            )
        with session.lock:
            if delta.get("replace"):
                session.fg.clear()
                session.bg.clear()
            for p in fg_pts:
                session.bg.pop(p, None)
                session.fg[p] = None
            for p in bg_pts:
                session.fg.pop(p, None)
                session.bg[p] = None
            session.revision += 1
            return {"revision": session.revision}

    @app.post("/sessions/{sid}/refine")
    def refine(sid: str):
        """Refine with the session's current seeds; idempotent for fixed seeds."""
        session = store.get(sid)
        if session is None:
            return _error(404, "not_found", f"unknown session {sid}")
        with session.lock:
            return _refine_payload(session)

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        if not store.remove(sid):
            return _error(404, "not_found", f"unknown session {sid}")
        return {"deleted": True}

    return app
