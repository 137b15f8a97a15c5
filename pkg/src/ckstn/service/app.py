"""HTTP service exposing the full workflow.

Every endpoint accepts the shared RunConfig document and returns a typed
response; library errors map to an {"error": {kind, message}} envelope with
a status code per kind (validation 400, numeric 422, io 404). The CLI is a
thin client of this app, in-process by default.
"""
from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..ablation import run_ablation
from ..data_io import FeatureSet, read_features, split_pairs, synth_generate, write_features
from ..errors import CkstnError, ValidationError
from ..evaluator import encode_pairs, evaluate_retrieval, export_matching, write_matching_jsonl
from ..gradsuite import run_suite
from ..model.params import CkstnParams
from ..runs import version_stamp
from ..trainer import train
from . import schemas as sc

_STATUS_BY_KIND = {"validation": 400, "numeric": 422, "io": 404}


def _corpus(cfg: sc.RunConfig) -> tuple[FeatureSet, FeatureSet | None]:
    """Training corpus: CKFT1 paths when given, synthetic otherwise."""
    if cfg.paths.train_features:
        train_fs = read_features(cfg.paths.train_features)
        heldout = (read_features(cfg.paths.heldout_features)
                   if cfg.paths.heldout_features else None)
        return train_fs, heldout
    fs = synth_generate(cfg.synth)
    if cfg.holdout > 0:
        return split_pairs(fs, cfg.holdout)
    return fs, None


def _eval_features(cfg: sc.RunConfig) -> FeatureSet:
    path = cfg.paths.heldout_features or cfg.paths.train_features
    if path:
        return read_features(path)
    fs = synth_generate(cfg.synth)
    if cfg.holdout > 0:
        return split_pairs(fs, cfg.holdout)[1]
    return fs


def _checkpoint(cfg: sc.RunConfig):
    if not cfg.paths.checkpoint:
        raise ValidationError("paths.checkpoint is required")
    return CkstnParams.load(cfg.paths.checkpoint)


def _out_dir(cfg: sc.RunConfig, command: str) -> Path:
    out = Path(cfg.paths.out_dir or f"runs/{command}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def create_app() -> FastAPI:
    app = FastAPI(title="ckstn", version=version_stamp())

    @app.exception_handler(CkstnError)
    async def _ckstn_error(_req: Request, exc: CkstnError) -> JSONResponse:
        status = _STATUS_BY_KIND.get(exc.kind, 400)
        body = sc.ErrorEnvelope(error=sc.ErrorBody(kind=exc.kind, message=str(exc)))
        return JSONResponse(status_code=status, content=body.model_dump())

    @app.get("/health", response_model=sc.HealthResponse)
    async def health() -> sc.HealthResponse:
        return sc.HealthResponse(status="ok", version=version_stamp())

    @app.post("/gen-data", response_model=sc.GenDataResponse)
    async def gen_data(cfg: sc.RunConfig) -> sc.GenDataResponse:
        cfg = cfg.effective()
        out = _out_dir(cfg, "gen-data")
        fs = synth_generate(cfg.synth)
        if cfg.holdout > 0:
            train_fs, heldout_fs = split_pairs(fs, cfg.holdout)
        else:
            train_fs, heldout_fs = fs, None
        train_path = write_features(train_fs, out / "train")
        heldout_path = None
        if heldout_fs is not None:
            heldout_path = str(write_features(heldout_fs, out / "heldout"))
        dims = {it.modality: it.dim for it in fs.items}
        return sc.GenDataResponse(
            out_dir=str(out), train_path=str(train_path),
            heldout_path=heldout_path,
            train_pairs=len(train_fs.pairings),
            heldout_pairs=len(heldout_fs.pairings) if heldout_fs else 0,
            dim_visual=dims["visual"], dim_textual=dims["textual"])

    @app.post("/train", response_model=sc.TrainResponse)
    async def train_run(cfg: sc.RunConfig) -> sc.TrainResponse:
        cfg = cfg.effective()
        out = _out_dir(cfg, "train")
        train_fs, heldout_fs = _corpus(cfg)
        result = train(train_fs, heldout_fs, cfg.model, cfg.train, out)
        last = result.metrics[-1] if result.metrics else None
        return sc.TrainResponse(
            out_dir=str(out),
            final_checkpoint=str(result.final_checkpoint),
            best_checkpoint=str(result.best_checkpoint),
            metrics_csv=str(result.metrics_path),
            epochs=len(result.metrics),
            initial_l_all=result.initial_l_all,
            final_l_all=result.final_l_all,
            best_rsum=result.best_rsum,
            last_epoch=sc.EpochRow(**last.__dict__) if last else None)

    @app.post("/eval", response_model=sc.EvalResponse)
    async def eval_run(cfg: sc.RunConfig) -> sc.EvalResponse:
        cfg = cfg.effective()
        params, units = _checkpoint(cfg)
        fs = _eval_features(cfg)
        report = evaluate_retrieval(fs, params, units, cfg.model)
        d = report.as_dict()
        return sc.EvalResponse(
            n=report.n,
            sentence_retrieval=sc.DirectionRecalls(**d["sentence_retrieval"]),
            image_retrieval=sc.DirectionRecalls(**d["image_retrieval"]),
            rsum=report.rsum)

    @app.post("/grad-check", response_model=sc.GradCheckResponse)
    async def grad_check_run(cfg: sc.RunConfig) -> sc.GradCheckResponse:
        cfg = cfg.effective()
        gc = cfg.gradcheck
        result = run_suite(cfg.model, seeds=gc.seeds, tol=gc.tol,
                           max_coords=gc.max_coords, pairs=gc.pairs,
                           both_normalizers=gc.both_normalizers)
        return sc.GradCheckResponse(
            tol=result.tol, max_rel_err=result.max_rel_err,
            passed=result.passed,
            cells=[sc.GradCellRow(
                seed=c.seed, attention_normalizer=c.attention_normalizer,
                max_rel_err=c.max_rel_err, passed=c.passed,
                tensors=len(c.reports)) for c in result.cells])

    @app.post("/ablate", response_model=sc.AblateResponse)
    async def ablate(cfg: sc.RunConfig) -> sc.AblateResponse:
        cfg = cfg.effective()
        out = _out_dir(cfg, "ablate")
        result = run_ablation(cfg.ablation.variants, cfg.ablation.seeds,
                              cfg.synth, cfg.holdout, cfg.model, cfg.train, out)
        return sc.AblateResponse(
            out_dir=str(out), csv_path=str(result.csv_path),
            summary_path=str(result.summary_path),
            rows=len(result.rows),
            rsum_ordering=result.summary["rsum_ordering"],
            summary=result.summary)

    @app.post("/export-matching", response_model=sc.ExportMatchingResponse)
    async def export_matching_run(cfg: sc.RunConfig) -> sc.ExportMatchingResponse:
        cfg = cfg.effective()
        out = _out_dir(cfg, "export-matching")
        params, units = _checkpoint(cfg)
        fs = _eval_features(cfg)
        encodings = encode_pairs(fs, params, units, cfg.model)
        rows: list[dict] = []
        for enc in encodings:
            words = [f"{enc.textual_id}:w{j}" for j in range(enc.valid_tex)]
            regions = [f"{enc.visual_id}:r{i}" for i in range(enc.valid_vis)]
            rows.extend(export_matching(
                enc.y_vis[:enc.valid_vis], enc.y_tex[:enc.valid_tex],
                words, regions))
        path = write_matching_jsonl(rows, Path(out) / "matching.jsonl")
        return sc.ExportMatchingResponse(path=str(path), rows=len(rows),
                                         pairs=len(encodings))

    @app.post("/param-count", response_model=sc.ParamCountResponse)
    async def param_count(cfg: sc.RunConfig) -> sc.ParamCountResponse:
        cfg = cfg.effective()
        params = CkstnParams.initialize(cfg.model, seed=0)
        by_path, total = params.param_count()
        by_group: dict[str, int] = {}
        for path, n in by_path.items():
            group = path.split(".")[0]
            by_group[group] = by_group.get(group, 0) + n
        return sc.ParamCountResponse(total=total, by_group=by_group,
                                     by_path=by_path)

    return app
