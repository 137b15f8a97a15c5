"""Command-line client for the service.

Every subcommand builds one RunConfig from --config files plus --set
overrides, posts it to the matching endpoint (in-process app by default,
--server for a remote one), writes a run manifest, and prints a final
``RESULT <json>`` line on success.

Exit codes: 0 success, 1 validation/usage, 2 numeric, 3 I/O.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import pydantic

from .errors import CkstnError, ConfigError, IoError
from .runs import RunManifest
from .service.app import create_app
from .service.schemas import RunConfig

COMMANDS = ("gen-data", "train", "eval", "grad-check", "ablate",
            "export-matching", "param-count")

_EXIT_BY_KIND = {"validation": 1, "numeric": 2, "io": 3}


def _coerce(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _assign(tree: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = tree
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {dotted}: {p} is not a section")
    node[parts[-1]] = value


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def build_config(config_paths: list[str], sets: list[str],
                 seed: int | None, out_dir: str | None) -> RunConfig:
    merged: dict = {}
    for path in config_paths:
        p = Path(path)
        if not p.exists():
            raise IoError(f"config file not found: {path}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        merged = _deep_merge(merged, doc)
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, raw = item.split("=", 1)
        _assign(merged, key.strip(), _coerce(raw))
    if seed is not None:
        merged["seed"] = seed
    if out_dir is not None:
        merged.setdefault("paths", {})["out_dir"] = out_dir
    if merged.get("seed") is None and os.environ.get("CKSTN_SEED"):
        try:
            merged["seed"] = int(os.environ["CKSTN_SEED"])
        except ValueError:
            raise ConfigError("CKSTN_SEED must be an integer")
    try:
        return RunConfig(**merged)
    except pydantic.ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(x) for x in first["loc"])
        raise ConfigError(f"bad configuration at {loc}: {first['msg']}")


def _post(server: str | None, command: str, cfg: RunConfig):
    payload = cfg.model_dump()
    if server:
        import httpx
        try:
            resp = httpx.post(f"{server.rstrip('/')}/{command}", json=payload,
                              timeout=3600.0)
        except httpx.HTTPError as exc:
            raise IoError(f"cannot reach server {server}: {exc}")
        return resp.status_code, resp.json()
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient
    with TestClient(create_app(), raise_server_exceptions=False) as client:
        resp = client.post(f"/{command}", json=payload)
    return resp.status_code, resp.json()


def _fail_from_body(status: int, body) -> int:
    if isinstance(body, dict) and "error" in body:
        err = body["error"]
        print(f"error ({err.get('kind', '?')}): {err.get('message', '')}",
              file=sys.stderr)
        return _EXIT_BY_KIND.get(err.get("kind"), 1)
    detail = body.get("detail") if isinstance(body, dict) else body
    print(f"error (validation): HTTP {status}: {json.dumps(detail)}",
          file=sys.stderr)
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ckstn",
        description="Image-text retrieval workbench: data synthesis, "
                    "training, evaluation and diagnostics.")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run {name}")
        p.add_argument("--config", action="append", default=[],
                       metavar="JSON", help="config file; repeatable, later "
                       "files override earlier ones")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="dotted-path override, value parsed as JSON "
                       "when possible")
        p.add_argument("--seed", type=int, default=None,
                       help="overrides train and synthesis seeds "
                       "(fallback: CKSTN_SEED)")
        p.add_argument("--out", default=None, metavar="DIR",
                       help="output directory (default runs/<command>)")
        p.add_argument("--server", default=None, metavar="URL",
                       help="POST to a running service instead of in-process")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1

    manifest = None
    try:
        cfg = build_config(args.config, args.set, args.seed, args.out)
        out_dir = cfg.paths.out_dir or f"runs/{args.command}"
        manifest = RunManifest(command=args.command,
                               config_paths=list(args.config),
                               seed=cfg.seed, out_dir=out_dir)
        manifest.write()
        status, body = _post(args.server, args.command, cfg)
    except CkstnError as exc:
        print(f"error ({exc.kind}): {exc}", file=sys.stderr)
        if manifest is not None:
            manifest.finalize("failed")
        return exc.exit_code
    if status >= 400:
        if manifest is not None:
            manifest.finalize("failed")
        return _fail_from_body(status, body)
    manifest.finalize("ok")
    print("RESULT " + json.dumps(body, sort_keys=True))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
