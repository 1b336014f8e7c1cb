"""Wire API for the review queue: items, decisions, label space, image pixels.

Thin HTTP layer over ReviewStore. Decision outcomes map to status codes the
client can branch on: 404 unknown item, 409 already decided, 400 invalid
payload. Image requests are confined to the configured data root; any path
that would escape it is rejected with 403.
"""

from __future__ import annotations

import mimetypes
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..core import InvariantViolation, LabelSpace
from .store import (
    AlreadyDecided,
    BadPage,
    InvalidBox,
    InvalidCategory,
    NotFound,
    ReviewStore,
    item_to_dict,
)


class DecisionBody(BaseModel):
    action: str
    actor: str = "anonymous"
    category_id: int | None = None
    bbox: list[float] | None = None


def _is_traversal(part: str) -> bool:
    return ".." in part or "/" in part or "\\" in part or part.startswith("~")


def create_app(
    store: ReviewStore,
    label_space: LabelSpace,
    data_root: str | Path,
    routes: dict | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    """Build the review API application.

    ``routes`` is an optional mapping of fusion route names to counts,
    surfaced verbatim under /api/stats. If ``ui_dir`` exists its static
    files are mounted under /ui/.
    """
    root = Path(data_root).resolve()
    app = FastAPI(title="labelfuse review service")

    @app.get("/api/items")
    def list_items(status: str | None = None, offset: int = 0, limit: int = 50):
        try:
            page, total = store.list_items(status=status, offset=offset, limit=limit)
        except BadPage as e:
            raise HTTPException(status_code=400, detail=str(e)) from None
        return {"items": [item_to_dict(i) for i in page], "total": total}

    @app.get("/api/items/{item_id}")
    def get_item(item_id: str):
        try:
            return item_to_dict(store.get(item_id))
        except NotFound as e:
            raise HTTPException(status_code=404, detail=str(e)) from None

    @app.get("/api/images/{dataset}/{image_id}")
    def serve_image(dataset: str, image_id: str):
        if _is_traversal(dataset) or _is_traversal(image_id):
            raise HTTPException(status_code=403, detail="path traversal rejected")
        record = None
        for item in store:
            if item.image.source_dataset == dataset and item.image.id == image_id:
                record = item.image
                break
        if record is None:
            raise HTTPException(status_code=404, detail=f"no image {dataset}/{image_id}")
        path = (root / record.file_path).resolve()
        if root not in path.parents and path != root:
            raise HTTPException(status_code=403, detail="image path escapes the data root")
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"image file missing: {record.file_path}")
        media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return Response(content=path.read_bytes(), media_type=media_type)

    @app.post("/api/items/{item_id}/decision")
    def decide(item_id: str, body: DecisionBody):
        try:
            item = store.decide(
                item_id,
                body.action,
                body.actor,
                category_id=body.category_id,
                bbox=body.bbox,
            )
        except NotFound as e:
            raise HTTPException(status_code=404, detail=str(e)) from None
        except AlreadyDecided as e:
            raise HTTPException(status_code=409, detail=str(e)) from None
        except (InvalidCategory, InvalidBox, InvariantViolation) as e:
            raise HTTPException(status_code=400, detail=str(e)) from None
        return item_to_dict(item)

    @app.get("/api/labelspace")
    def labelspace():
        return {
            "categories": [
                {
                    "id": c.id,
                    "name": c.canonical_name,
                    "aliases": sorted(c.aliases),
                }
                for c in label_space.categories
            ]
        }

    @app.get("/api/stats")
    def stats():
        payload = store.stats()
        payload["routes"] = dict(routes) if routes else {}
        return payload

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(app: FastAPI, listen: str = "127.0.0.1:8000") -> None:
    """Run the app on host:port (blocking)."""
    import uvicorn

    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise InvariantViolation(f"listen address must be host:port, got {listen!r}")
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
