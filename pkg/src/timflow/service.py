"""Stateless JSON service exposing rasterization, compression, and prediction.

Endpoints (HTTP/1.1, JSON bodies):
    POST /api/v1/discretize   pattern -> dispensed grid
    POST /api/v1/compress     pattern -> dispensed + compressed grids and
                              coverage/void/off-grid diagnostics
    GET  /api/v1/health       service and model status

Handlers only read shared immutable state (the optional surrogate model), so
any number of requests may run in parallel and identical requests always
produce byte-identical bodies. Compute time is reported in the X-Compute-Ms
response header, deliberately outside the body to keep bodies deterministic.

Every non-200 response carries {"error": code, "message": ...} where code is
one of: invalid_pattern, out_of_bounds, resolution_limit, overflow,
model_unavailable, not_found, method_not_allowed.
"""
from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import __version__
from .dataset import dataset_to_bytes, single_record_dataset
from .errors import InvalidPattern, MassOverflow, OutOfBounds
from .heuristic import (CompressionConfig, CropAndReport, ErrorOnOverflow,
                        LinearSteps, Multiplicative, SingleStep, compress)
from .metrics import DEFAULT_COVER_THRESHOLD, coverage_ratio, detect_voids
from .pattern import DispensePattern, GridSpec, TimGrid, discretize, scale_for_gap
from .surrogate import SurrogateModel, forward, load_model

MAX_RESOLUTION = 512

ERROR_CODES = ("invalid_pattern", "out_of_bounds", "resolution_limit", "overflow",
               "model_unavailable", "not_found", "method_not_allowed")


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        assert code in ERROR_CODES
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def parse_schedule(text: str):
    if text == "single":
        return SingleStep()
    m = re.fullmatch(r"linear:(\d+)", text)
    if m:
        return LinearSteps(int(m.group(1)))
    m = re.fullmatch(r"mult:(\d*\.?\d+)", text)
    if m:
        factor = float(m.group(1))
        if not (0.0 < factor < 1.0):
            raise ValueError(f"multiplicative factor must be in (0, 1), got {factor}")
        return Multiplicative(factor)
    raise ValueError(f"unknown schedule {text!r}; use single, linear:K, or mult:F")


def parse_boundary(text: str):
    if text == "error":
        return ErrorOnOverflow()
    m = re.fullmatch(r"crop(?::(\d+))?", text)
    if m:
        return CropAndReport(int(m.group(1) or 0))
    raise ValueError(f"unknown boundary {text!r}; use error, crop, or crop:M")


@dataclass(frozen=True)
class CompressRequest:
    pattern: DispensePattern
    model: str | None
    gap: float
    resolution: tuple[int, int]
    schedule: object | None
    boundary: object | None


_ALLOWED_FIELDS = {"pattern", "model", "gap", "resolution", "schedule", "boundary"}


def parse_compress_request(body: bytes, require_model: bool) -> CompressRequest:
    try:
        data = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ServiceError(400, "invalid_pattern", f"body is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ServiceError(400, "invalid_pattern", "body must be a JSON object")
    unknown = set(data) - _ALLOWED_FIELDS
    if unknown:
        raise ServiceError(400, "invalid_pattern", f"unknown fields: {sorted(unknown)}")

    resolution = data.get("resolution", [50, 50])
    if (not isinstance(resolution, (list, tuple)) or len(resolution) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in resolution)):
        raise ServiceError(400, "invalid_pattern", "resolution must be [H, W] integers")
    h, w = resolution
    if h < 1 or w < 1 or h > MAX_RESOLUTION or w > MAX_RESOLUTION:
        raise ServiceError(400, "resolution_limit",
                           f"resolution {h}x{w} outside 1..{MAX_RESOLUTION}")

    gap = data.get("gap", 1.0)
    if isinstance(gap, bool) or not isinstance(gap, (int, float)) \
            or not math.isfinite(gap) or gap <= 0:
        raise ServiceError(400, "invalid_pattern", f"gap must be a positive number, got {gap!r}")

    model = data.get("model")
    if require_model:
        if model not in ("heuristic", "surrogate"):
            raise ServiceError(400, "invalid_pattern",
                               "model must be \"heuristic\" or \"surrogate\"")
    elif model is not None and model not in ("heuristic", "surrogate"):
        raise ServiceError(400, "invalid_pattern",
                           "model must be \"heuristic\" or \"surrogate\"")

    schedule = None
    boundary = None
    for key, parser in (("schedule", parse_schedule), ("boundary", parse_boundary)):
        if key in data:
            if model == "surrogate":
                raise ServiceError(400, "invalid_pattern",
                                   f"{key} only applies to the heuristic model")
            if not isinstance(data[key], str):
                raise ServiceError(400, "invalid_pattern", f"{key} must be a string")
            try:
                parsed = parser(data[key])
            except ValueError as exc:
                raise ServiceError(400, "invalid_pattern", str(exc))
            if key == "schedule":
                schedule = parsed
            else:
                boundary = parsed
    if "pattern" not in data:
        raise ServiceError(400, "invalid_pattern", "missing field: pattern")
    try:
        pattern = DispensePattern.from_json(data["pattern"])
    except InvalidPattern as exc:
        raise ServiceError(400, "invalid_pattern", str(exc))
    return CompressRequest(pattern, model, float(gap), (h, w), schedule, boundary)


def _round6(value: float) -> float:
    return float(f"{value:.6g}")


def grid_to_rows(grid: TimGrid) -> list[list[float]]:
    """Row-major nested lists, floats rounded to six significant digits."""
    return [[_round6(v) for v in row] for row in grid.amounts.tolist()]


class ServiceState:
    """Immutable-after-startup shared state: the loaded surrogate, if any."""

    def __init__(self, model: SurrogateModel | None = None):
        self.model = model

    @classmethod
    def from_weights_path(cls, path: str | None) -> "ServiceState":
        return cls(load_model(path) if path else None)


def handle_discretize(state: ServiceState, body: bytes, binary: bool = False):
    req = parse_compress_request(body, require_model=False)
    try:
        dispensed = discretize(req.pattern, GridSpec(req.resolution))
    except OutOfBounds as exc:
        raise ServiceError(400, "out_of_bounds", str(exc))
    if binary:
        # as-dispensed state: nothing compressed yet, both grids identical
        return dataset_to_bytes(single_record_dataset(req.pattern, dispensed, dispensed))
    return {"dispensed": grid_to_rows(dispensed), "resolution": list(req.resolution)}


def handle_compress(state: ServiceState, body: bytes, binary: bool = False):
    req = parse_compress_request(body, require_model=True)
    try:
        dispensed = discretize(req.pattern, GridSpec(req.resolution))
    except OutOfBounds as exc:
        raise ServiceError(400, "out_of_bounds", str(exc))
    if req.model == "heuristic":
        config = CompressionConfig(
            termination_height=req.gap,
            schedule=req.schedule if req.schedule is not None else Multiplicative(),
            boundary=req.boundary if req.boundary is not None else ErrorOnOverflow())
        try:
            result = compress(dispensed, config)
        except MassOverflow as exc:
            raise ServiceError(409, "overflow", str(exc))
        compressed = result.compressed
        off_grid = result.off_grid_mass
    else:
        if state.model is None:
            raise ServiceError(503, "model_unavailable", "no surrogate weights loaded")
        if state.model.resolution != req.resolution:
            raise ServiceError(400, "resolution_limit",
                               f"surrogate expects {state.model.resolution[0]}x"
                               f"{state.model.resolution[1]}, request asked for "
                               f"{req.resolution[0]}x{req.resolution[1]}")
        out = forward(state.model, scale_for_gap(dispensed, req.gap))
        compressed = TimGrid(out.amounts * req.gap, copy=False)
        off_grid = 0.0
    if binary:
        return dataset_to_bytes(single_record_dataset(req.pattern, dispensed, compressed))
    threshold = DEFAULT_COVER_THRESHOLD * req.gap
    return {
        "dispensed": grid_to_rows(dispensed),
        "compressed": grid_to_rows(compressed),
        "coverage_ratio": _round6(coverage_ratio(compressed, threshold=threshold)),
        "void_count": len(detect_voids(compressed, threshold=threshold)),
        "off_grid_mass": _round6(off_grid),
    }


def handle_health(state: ServiceState) -> dict:
    return {"status": "ok", "model_loaded": state.model is not None,
            "version": __version__}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = f"timflow/{__version__}"

    def _send(self, status: int, payload: dict, compute_ms: float | None = None):
        body = json.dumps(payload, sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        if compute_ms is not None:
            self.send_header("X-Compute-Ms", f"{compute_ms:.3f}")
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, err: ServiceError):
        self._send(err.status, {"error": err.code, "message": err.message})

    def do_GET(self):
        if self.path == "/api/v1/health":
            self._send(200, handle_health(self.server.state))
        elif self.path in ("/api/v1/discretize", "/api/v1/compress"):
            self._send_error(ServiceError(405, "method_not_allowed",
                                          f"use POST for {self.path}"))
        else:
            self._send_error(ServiceError(404, "not_found", f"no route {self.path}"))

    def _send_binary(self, blob: bytes, compute_ms: float):
        self.send_response(200)
        self.send_header("Content-Type", "application/x-timd")
        self.send_header("Content-Length", str(len(blob)))
        self.send_header("X-Compute-Ms", f"{compute_ms:.3f}")
        self.end_headers()
        self.wfile.write(blob)

    def do_POST(self):
        handlers = {"/api/v1/discretize": handle_discretize,
                    "/api/v1/compress": handle_compress}
        handler = handlers.get(self.path)
        if handler is None:
            if self.path == "/api/v1/health":
                self._send_error(ServiceError(405, "method_not_allowed",
                                              "use GET for /api/v1/health"))
            else:
                self._send_error(ServiceError(404, "not_found", f"no route {self.path}"))
            return
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length) if length else b""
        # bulk clients can negotiate the binary grid format instead of JSON
        binary = "application/x-timd" in (self.headers.get("Accept") or "")
        begin = time.perf_counter()
        try:
            payload = handler(self.server.state, body, binary=binary)
        except ServiceError as err:
            self._send_error(err)
            return
        compute_ms = (time.perf_counter() - begin) * 1e3
        if binary:
            self._send_binary(payload, compute_ms)
        else:
            self._send(200, payload, compute_ms=compute_ms)

    def log_message(self, fmt, *args):  # quiet by default; tests hammer the server
        pass


def create_server(port: int = 0, host: str = "127.0.0.1",
                  state: ServiceState | None = None) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), _Handler)
    server.state = state or ServiceState()
    return server


def serve_forever(port: int, weights_path: str | None, host: str = "0.0.0.0") -> None:
    server = create_server(port, host, ServiceState.from_weights_path(weights_path))
    try:
        server.serve_forever()
    finally:
        server.server_close()
