"""Command-line client for the experiment service.

Subcommands: run, metrics, compare, export-front, synth-data, serve. All
of them (except serve) go through the HTTP API: by default against an
in-process copy of the service, or against a remote instance with
--server. File handling stays on this side: front CSVs are read here and
sent inline, and merged results are written back here, so a remote server
needs no access to local paths. Exit codes: 0 success, 1 usage or config
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

import httpx

from mograd.experiments import read_front_csv, write_front_csv
from mograd.service import create_app

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


class _InProcessTransport(httpx.BaseTransport):
    """Serve requests from the ASGI app without a network socket."""

    def __init__(self):
        # the app turns its own errors into 4xx/5xx responses; don't re-raise
        self._asgi = httpx.ASGITransport(app=create_app(), raise_app_exceptions=False)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        return asyncio.run(self._roundtrip(request))

    async def _roundtrip(self, request: httpx.Request) -> httpx.Response:
        response = await self._asgi.handle_async_request(request)
        body = await response.aread()
        await response.aclose()
        return httpx.Response(
            status_code=response.status_code,
            headers=response.headers,
            content=body,
            request=request,
        )


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
    return httpx.Client(
        transport=_InProcessTransport(), base_url="http://mograd.internal", timeout=None
    )


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    try:
        resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        print(f"error: request failed: {exc}", file=sys.stderr)
        raise SystemExit(RUNTIME_ERROR)
    if resp.status_code >= 500:
        print(f"error: {_detail(resp)}", file=sys.stderr)
        raise SystemExit(RUNTIME_ERROR)
    if resp.status_code >= 400:
        print(f"error: {_detail(resp)}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    return resp.json()


def _detail(resp: httpx.Response) -> str:
    try:
        body = resp.json()
    except ValueError:
        return resp.text or f"HTTP {resp.status_code}"
    if isinstance(body, dict) and "detail" in body:
        detail = body["detail"]
        if isinstance(detail, str):
            return detail
        return json.dumps(detail)
    return json.dumps(body)


def _load_json_file(path: str) -> dict:
    if not os.path.exists(path):
        print(f"error: no such file: {path}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        print(f"error: {path}: invalid JSON: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    if not isinstance(data, dict):
        print(f"error: {path}: expected a JSON object", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    return data


def _resolve_front_path(arg: str) -> str:
    """A front argument may be a CSV file or a directory holding one."""
    if os.path.isfile(arg):
        return arg
    if os.path.isdir(arg):
        for candidate in ("merged_front.csv", "front.csv"):
            path = os.path.join(arg, candidate)
            if os.path.isfile(path):
                return path
        print(
            f"error: {arg}: no merged_front.csv or front.csv inside", file=sys.stderr
        )
        raise SystemExit(USAGE_ERROR)
    print(f"error: no such file or directory: {arg}", file=sys.stderr)
    raise SystemExit(USAGE_ERROR)


def _front_payload(path: str, label: str) -> dict:
    try:
        names, points = read_front_csv(path)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    return {"label": label, "objectives": names, "points": points.tolist()}


def _fmt(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _print_metric_block(entry: dict) -> None:
    raw, norm = entry["raw"], entry["normalized"]
    print(
        f"  {entry['label']:<12} points={entry['points']:<4} "
        f"hypervolume={_fmt(raw['hypervolume']):<12} spacing={_fmt(raw['spacing'])}"
    )
    print(
        f"  {'':<12} normalized: hypervolume={_fmt(norm['hypervolume']):<12} "
        f"spacing={_fmt(norm['spacing'])}"
    )


def _print_ranges(report: dict) -> None:
    parts = [
        f"{name} [{_fmt(lo)}, {_fmt(hi)}]"
        for name, (lo, hi) in zip(report["objectives"], report["axis_ranges"])
    ]
    print("  axis ranges: " + ", ".join(parts))


def cmd_run(args) -> int:
    config = _load_json_file(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out_dir is not None:
        config["out_dir"] = args.out_dir
    if "seed" not in config:
        print(
            "error: seed is required (config field `seed` or --seed)", file=sys.stderr
        )
        return USAGE_ERROR
    with _client(args.server) as client:
        body = _post(client, "/run", {"config": config, "jobs": args.jobs})
    manifest = body["manifest"]
    if args.json:
        print(json.dumps(body, indent=2, sort_keys=True))
    else:
        statuses = [r["status"] for r in manifest["runs"]]
        print(f"out_dir: {body['out_dir']}")
        print(f"runs: {len(statuses)} ({statuses.count('ok')} ok, "
              f"{statuses.count('failed')} failed)")
        for variant, path in sorted(manifest["merged_fronts"].items()):
            print(f"merged {variant} front: {os.path.join(body['out_dir'], path)}")
        for failure in manifest["failures"]:
            print(f"FAILED {failure['id']}: {failure['error']}", file=sys.stderr)
    return 0 if body["ok"] else RUNTIME_ERROR


def cmd_metrics(args) -> int:
    payload = {"front": _front_payload(_resolve_front_path(args.front), "front")}
    if args.second is not None:
        payload["second"] = _front_payload(_resolve_front_path(args.second), "second")
    with _client(args.server) as client:
        body = _post(client, "/metrics", payload)
    report = body["report"]
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
        return 0
    print("objectives: " + ", ".join(report["objectives"]))
    for entry in report["fronts"]:
        _print_metric_block(entry)
    _print_ranges(report)
    if "coverage" in report:
        for key, value in report["coverage"].items():
            print(f"  {key} = {_fmt(value)}")
    return 0


def cmd_compare(args) -> int:
    payload = {
        "vanilla": _front_payload(_resolve_front_path(args.dir_vanilla), "vanilla"),
        "adamized": _front_payload(_resolve_front_path(args.dir_adamized), "adamized"),
    }
    with _client(args.server) as client:
        body = _post(client, "/compare", payload)
    report = body["report"]
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
        return 0
    print("objectives: " + ", ".join(report["objectives"]))
    for variant in ("vanilla", "adamized"):
        entry = dict(report["variants"][variant])
        entry["label"] = variant
        _print_metric_block(entry)
    for key, value in report["coverage"].items():
        print(f"  {key} = {_fmt(value)}")
    _print_ranges(report)
    return 0


def cmd_export_front(args) -> int:
    fronts = []
    for arg in args.dirs:
        path = _resolve_front_path(arg)
        fronts.append(_front_payload(path, arg))
    with _client(args.server) as client:
        body = _post(client, "/export-front", {"fronts": fronts})
    if args.out:
        write_front_csv(args.out, body["objectives"], body["points"])
        print(f"wrote {len(body['points'])} points to {args.out}")
    else:
        header = ",".join(f"obj_{n}" for n in body["objectives"])
        print(header)
        for row in body["points"]:
            print(",".join(repr(v) for v in row))
    return 0


def cmd_synth_data(args) -> int:
    config = _load_json_file(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out_dir is not None:
        config["out_dir"] = args.out_dir
    if "seed" not in config:
        print(
            "error: seed is required (config field `seed` or --seed)", file=sys.stderr
        )
        return USAGE_ERROR
    with _client(args.server) as client:
        body = _post(client, "/synth-data", {"config": config})
    manifest = body["manifest"]
    print(f"out_dir: {body['out_dir']}")
    print(f"rows: {manifest['params']['rows']}")
    for kind, name in sorted(manifest["files"].items()):
        print(f"{kind}: {os.path.join(body['out_dir'], name)}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mograd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_server(p):
        p.add_argument("--server", help="base URL of a running service "
                       "(default: run the service in-process)")

    p = sub.add_parser("run", help="execute a configured experiment sweep")
    p.add_argument("config", help="experiment config JSON file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-dir", help="override the config output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs (default 1)")
    p.add_argument("--json", action="store_true", help="print the full manifest")
    add_server(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", help="hypervolume/spacing for a front CSV")
    p.add_argument("front", help="front CSV (or a directory containing one)")
    p.add_argument("second", nargs="?", help="optional second front for coverage")
    p.add_argument("--json", action="store_true")
    add_server(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("compare", help="vanilla vs adamized front comparison")
    p.add_argument("dir_vanilla", help="vanilla merged front (dir or CSV)")
    p.add_argument("dir_adamized", help="adamized merged front (dir or CSV)")
    p.add_argument("--json", action="store_true")
    add_server(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-front", help="merge run fronts into one CSV")
    p.add_argument("dirs", nargs="+", help="run directories or front CSVs")
    p.add_argument("--out", help="output CSV (default: stdout)")
    add_server(p)
    p.set_defaults(func=cmd_export_front)

    p = sub.add_parser("synth-data", help="generate a synthetic ratings dataset")
    p.add_argument("config", help="synthesis config JSON file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-dir", help="override the config output directory")
    add_server(p)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
