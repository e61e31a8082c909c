"""HTTP scoring of draft posts against a loaded model snapshot.

The scoring logic is plain functions over an immutable ModelSnapshot so it
can be exercised without a server: `load_snapshot` + `score_draft` are what
the single-shot CLI predictor uses, and `build_app` wraps the same pair in
a FastAPI app for the composer UI.

Concurrency: requests only read the current snapshot; reload builds a new
snapshot off to the side and swaps one attribute, so in-flight requests
finish on whatever snapshot they started with.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .corpus import AccountProfile, Conversation, Label, ParentTweet, Reply
from .ensembles import (
    ForestModel,
    Model,
    model_from_artifact,
    predict_batch,
)
from .errors import (
    ManifestMismatchError,
    ParseError,
    SchemaError,
    StageMismatchError,
)
from .explain import shap_attribute
from .features import (
    BoWVocabulary,
    FeatureMask,
    ScalerState,
    Stage,
    apply_scaler_matrix,
    assemble,
    to_matrix,
)
from .lexicons import abuse_score, built_in_registry, classify
from .textprep import preprocess


@lru_cache(maxsize=1)
def _registry():
    return built_in_registry()


# ---------------------------------------------------------------------------
# snapshot

@dataclass(frozen=True)
class ModelSnapshot:
    """Everything needed to turn a draft into a score, loaded once."""

    model: Model
    mask: FeatureMask
    stage: Stage
    scaler: ScalerState
    background: np.ndarray
    vocab: BoWVocabulary | None
    columns: tuple[str, ...]  # model input order: dense schema then bow:term
    feature_manifest: dict
    training_manifest: dict
    y_range: tuple[float, float]
    model_id: str
    path: str


_EXTRA_KEYS = ("mask", "stage", "scaler", "background", "y_range")


def load_snapshot(path: str | Path) -> ModelSnapshot:
    """Load a serving artifact; the digest of the file bytes names the model.

    Raises ParseError/SchemaError on malformed artifacts.  Stage is loaded
    as recorded — callers that require a pre-post model check it themselves.
    """
    raw = Path(path).read_bytes()
    model_id = hashlib.sha256(raw).hexdigest()
    try:
        artifact = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"model artifact is not valid JSON: {e}") from None
    if not isinstance(artifact, dict):
        raise SchemaError("model artifact must be a JSON object")
    missing = [k for k in _EXTRA_KEYS if k not in artifact]
    if missing:
        raise SchemaError(f"model artifact lacks serving fields: {missing}")
    model = model_from_artifact(artifact)
    try:
        mask = FeatureMask.from_string(artifact["mask"])
        stage = Stage(artifact["stage"])
    except ValueError as e:
        raise SchemaError(str(e)) from None
    scaler = ScalerState(
        mean=np.asarray(artifact["scaler"]["mean"], dtype=float),
        std=np.asarray(artifact["scaler"]["std"], dtype=float),
    )
    background = np.asarray(artifact["background"], dtype=float)
    if background.ndim != 2 or background.shape[0] == 0:
        raise SchemaError("artifact background must be a non-empty matrix")
    manifest = artifact.get("feature_manifest") or {}
    terms = tuple(manifest.get("bow_terms") or ())
    vocab = BoWVocabulary(terms=terms) if (mask.te and terms) else None
    columns = tuple(c["name"] for c in manifest.get("columns", ()))
    columns += tuple(f"bow:{t}" for t in terms)
    if len(columns) != model.n_features:
        raise SchemaError(
            f"artifact names {len(columns)} columns for a "
            f"{model.n_features}-feature model")
    y_lo, y_hi = artifact["y_range"]
    return ModelSnapshot(
        model=model, mask=mask, stage=stage, scaler=scaler,
        background=background, vocab=vocab, columns=columns,
        feature_manifest=manifest,
        training_manifest=artifact.get("training", {}),
        y_range=(float(y_lo), float(y_hi)),
        model_id=model_id, path=str(path),
    )


# ---------------------------------------------------------------------------
# request parsing

_REQUEST_KEYS = {"draft_text", "hashtags", "mentions", "urls", "account"}
_ACCOUNT_FIELDS = {f.name: f for f in dataclasses.fields(AccountProfile)}


def _parse_account(obj) -> AccountProfile:
    if obj is None:
        return AccountProfile()
    if not isinstance(obj, dict):
        raise SchemaError("account must be a JSON object")
    unknown = sorted(set(obj) - set(_ACCOUNT_FIELDS))
    if unknown:
        raise SchemaError(f"unknown account fields: {unknown}")
    kwargs = {}
    for name, value in obj.items():
        if value is None:
            continue
        spec_field = _ACCOUNT_FIELDS[name]
        if name == "time_zone":
            if not isinstance(value, str):
                raise SchemaError("account.time_zone must be a string")
        elif spec_field.type in ("int", int):
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise SchemaError(f"account.{name} must be a nonnegative integer")
        elif not isinstance(value, bool):
            raise SchemaError(f"account.{name} must be a boolean")
        kwargs[name] = value
    return AccountProfile(**kwargs)


def _count_field(payload: dict, key: str) -> int | None:
    value = payload.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise SchemaError(f"{key} must be a nonnegative integer")
    return value


def draft_conversation(payload: dict) -> Conversation:
    """Shape a request into the corpus record the feature code expects.

    Counts omitted from the request are derived from the text with the
    same prefix rules the surface-count features use.  The single empty
    placeholder reply satisfies the at-least-one-reply invariant and is
    never consulted by pre-post features.
    """
    if not isinstance(payload, dict):
        raise SchemaError("request body must be a JSON object")
    unknown = sorted(set(payload) - _REQUEST_KEYS)
    if unknown:
        raise SchemaError(f"unknown request fields: {unknown}")
    text = payload.get("draft_text")
    if not isinstance(text, str):
        raise SchemaError("draft_text must be a string")
    if not text.strip():
        raise SchemaError("draft_text is empty")
    words = text.split()
    hashtags = _count_field(payload, "hashtags")
    if hashtags is None:
        hashtags = sum(1 for w in words if w.startswith("#") and len(w) > 1)
    mentions = _count_field(payload, "mentions")
    if mentions is None:
        mentions = sum(1 for w in words if w.startswith("@") and len(w) > 1)
    urls = _count_field(payload, "urls")
    if urls is None:
        urls = sum(1 for w in words
                   if w.startswith(("http://", "https://", "www.")))
    symbols = sum(1 for w in words if w.startswith("$") and len(w) > 1)
    parent = ParentTweet(id="draft", text=text, hashtag_count=hashtags,
                         symbol_count=symbols, mention_count=mentions,
                         url_count=urls)
    return Conversation(id="draft", parent=parent,
                        account=_parse_account(payload.get("account")),
                        replies=(Reply(id="draft-r0", text=""),))


# ---------------------------------------------------------------------------
# scoring

def score_draft(snapshot: ModelSnapshot, payload: dict) -> dict:
    """Score one draft; identical payloads yield identical responses."""
    conv = draft_conversation(payload)
    registry = _registry()
    fv = assemble(conv, snapshot.mask, Stage.PRE_POST, snapshot.vocab, registry)
    vocab_size = len(snapshot.vocab) if snapshot.vocab is not None else 0
    X = to_matrix([fv], vocab_size=vocab_size)
    Xs = apply_scaler_matrix(X, snapshot.scaler)
    prediction = float(predict_batch(snapshot.model, Xs)[0])

    stream = preprocess(conv.parent.text)
    if len(stream) == 0:
        verdict = Label.NEUTRAL
    else:
        verdict = classify(abuse_score(stream, registry))

    # Boosted models aggregate by weighted median, which has no additive
    # attribution; they answer with an empty list.
    tops: list[dict] = []
    base = None
    if isinstance(snapshot.model, ForestModel):
        att = shap_attribute(snapshot.model, Xs[0], snapshot.background)
        base = float(att.base_value)
        order = sorted(range(len(att.values)),
                       key=lambda i: (-abs(att.values[i]), i))[:10]
        tops = [{
            "feature": snapshot.columns[i],
            "value": float(Xs[0, i]),
            "attribution": float(att.values[i]),
        } for i in order]
    return {
        "predicted_abusive_replies": prediction,
        "verdict_of_draft": verdict.value,
        "top_attributions": tops,
        "attribution_base": base,
        "model_id": snapshot.model_id,
        "stage": snapshot.stage.value,
    }


def model_info(snapshot: ModelSnapshot) -> dict:
    return {
        "model_id": snapshot.model_id,
        "kind": snapshot.model.kind,
        "mask": snapshot.mask.to_string(),
        "stage": snapshot.stage.value,
        "feature_manifest": snapshot.feature_manifest,
        "training_manifest": snapshot.training_manifest,
    }


def require_prepost(snapshot: ModelSnapshot) -> None:
    if snapshot.stage is not Stage.PRE_POST:
        raise StageMismatchError(
            "model was trained post-hoc; draft scoring needs a prepost model")


# ---------------------------------------------------------------------------
# HTTP surface

class SnapshotHolder:
    """Single mutable cell; attribute swap is the only write."""

    def __init__(self) -> None:
        self.snapshot: ModelSnapshot | None = None
        self.reloading = False

    def install(self, snapshot: ModelSnapshot) -> None:
        self.snapshot = snapshot


def build_app(model_path: str | Path | None = None,
              static_dir: str | Path | None = None):
    """App factory.  A given model path must hold a prepost artifact."""
    app = FastAPI(title="abuse-forecast", docs_url=None, redoc_url=None)
    holder = SnapshotHolder()
    app.state.holder = holder
    if model_path is not None:
        snapshot = load_snapshot(model_path)
        require_prepost(snapshot)
        holder.install(snapshot)

    def _error(status: int, exc_type: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"error": {"type": exc_type,
                                               "message": message}})

    @app.post("/v1/predict")
    async def predict(request: Request):
        snapshot = holder.snapshot
        if snapshot is None:
            return _error(503, "NoModel", "no model loaded")
        if snapshot.stage is not Stage.PRE_POST:
            return _error(409, "StageMismatchError",
                          "loaded model was trained post-hoc")
        try:
            payload = await request.json()
        except Exception:
            return _error(400, "ParseError", "request body is not valid JSON")
        try:
            return JSONResponse(score_draft(snapshot, payload))
        except SchemaError as e:
            return _error(400, "SchemaError", str(e))

    @app.get("/v1/model")
    async def model(request: Request):
        snapshot = holder.snapshot
        if snapshot is None:
            return _error(503, "NoModel", "no model loaded")
        return JSONResponse(model_info(snapshot))

    @app.get("/v1/health")
    async def health(request: Request):
        if holder.reloading:
            status = "reloading"
        elif holder.snapshot is None:
            status = "no_model"
        else:
            status = "ok"
        return JSONResponse({"status": status})

    @app.post("/v1/reload")
    async def reload(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return _error(400, "ParseError", "request body is not valid JSON")
        if not isinstance(payload, dict) or not isinstance(payload.get("path"), str):
            return _error(400, "SchemaError", "body must be {\"path\": string}")
        holder.reloading = True
        try:
            snapshot = load_snapshot(payload["path"])
            require_prepost(snapshot)
        except StageMismatchError as e:
            return _error(409, "StageMismatchError", str(e))
        except (OSError, ParseError, SchemaError, ManifestMismatchError) as e:
            return _error(400, type(e).__name__, str(e))
        finally:
            holder.reloading = False
        holder.install(snapshot)
        return JSONResponse({"model_id": snapshot.model_id})

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")
    return app


def run_server(model_path: str | Path | None, addr: str,
               static_dir: str | Path | None = None) -> None:
    import uvicorn

    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise SchemaError(f"address {addr!r} is not host:port")
    app = build_app(model_path, static_dir)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
